use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cmtg_core::cards::Archetype;
use cmtg_core::env::Opponent;
use cmtg_core::rewards::RewardScheme;
use cmtg_harness::config::heuristic_pool;
use cmtg_harness::manifest::{self, read_manifest, verify_manifest, verify_rerun, RunContext, MANIFEST_FILE};
use cmtg_harness::protocols::{self, checkpoint_path, train_cell};
use cmtg_harness::{report, AgentSpec, Format, HarnessConfig, MatchSpec, Profile, StatReport};
use cmtg_learn::train::Variant;

#[derive(Parser)]
#[command(name = "cmtg", about = "Train, evaluate and report on the card-game arena")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every run; they override the config file.
#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Evaluation episodes per (seed, opponent).
    #[arg(long)]
    episodes: Option<usize>,
    /// Training steps per agent.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    turn_cap: Option<u32>,
    /// Reward scheme: sparse, shaped or dense.
    #[arg(long)]
    scheme: Option<String>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<HarnessConfig> {
        let mut c = match &self.config {
            Some(p) => HarnessConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => HarnessConfig::default(),
        };
        if let Some(v) = &self.run_dir {
            c.run_dir = v.clone();
        }
        if let Some(v) = self.profile {
            c.profile = v;
        }
        if let Some(v) = &self.seeds {
            c.seeds = v.clone();
        }
        if let Some(v) = self.episodes {
            c.episodes_per_opponent = v;
        }
        if let Some(v) = self.steps {
            c.total_steps = Some(v);
        }
        if let Some(v) = self.turn_cap {
            c.turn_cap = v;
        }
        if let Some(v) = &self.scheme {
            c.reward = v.parse::<RewardScheme>()?;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one agent and save its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "masked_ppo")]
        agent: String,
        #[arg(long, default_value = "mono_red_aggro")]
        deck: String,
        /// `pool` for every heuristic, or a comma list of archetypes whose
        /// heuristics form the pool.
        #[arg(long, default_value = "pool")]
        opponents: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play a match and record its manifest and per-episode rows.
    Eval {
        #[command(flatten)]
        common: Common,
        /// `random`, `heuristic` or a checkpoint path.
        #[arg(long)]
        agent_a: String,
        #[arg(long, default_value = "heuristic")]
        agent_b: String,
        #[arg(long, default_value = "mono_red_aggro")]
        deck_a: String,
        #[arg(long, default_value = "mono_red_aggro")]
        deck_b: String,
        /// Output directory; defaults to <run_dir>/eval.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every deck, baseline against treatment, with anchors.
    Headline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "masked_ppo,cgfa")]
        agents: Vec<String>,
    },
    /// The six learner variants on one deck.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mono_red_aggro")]
        deck: String,
        #[arg(long, value_delimiter = ',', default_value = "masked_ppo,cwm,scalar_only,no_gate,no_calibration,cgfa")]
        variants: Vec<String>,
    },
    /// Leave-one-opponent-out transfer.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mono_red_aggro")]
        deck: String,
        #[arg(long, value_delimiter = ',', default_value = "masked_ppo,cgfa")]
        agents: Vec<String>,
    },
    /// Re-emit a saved report in another format.
    Report {
        /// A report JSON written by a protocol run.
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manifest utilities.
    Manifest {
        #[command(subcommand)]
        cmd: ManifestCmd,
    },
}

#[derive(Subcommand)]
enum ManifestCmd {
    /// Recompute digests; with --rerun, replay the evaluation and compare
    /// trace hashes.
    Verify {
        /// Run directory containing manifest.json.
        dir: PathBuf,
        #[arg(long)]
        rerun: bool,
    },
}

fn variants(names: &[String]) -> anyhow::Result<Vec<Variant>> {
    names.iter().map(|n| Ok(n.parse::<Variant>()?)).collect()
}

fn agent_spec(s: &str) -> AgentSpec {
    match s {
        "random" => AgentSpec::Random,
        "heuristic" => AgentSpec::Heuristic,
        path => AgentSpec::Checkpoint { path: PathBuf::from(path) },
    }
}

fn opponents(s: &str) -> anyhow::Result<Vec<Opponent>> {
    if s == "pool" {
        return Ok(heuristic_pool());
    }
    s.split(',').map(|d| Ok(Opponent::heuristic(d.trim().parse::<Archetype>()?))).collect()
}

/// Write a protocol report (CSV and JSON) and its manifest under the run
/// directory.
fn persist(cfg: &HarnessConfig, name: &str, rep: &StatReport) -> anyhow::Result<()> {
    let dir = cfg.run_dir.join(name);
    let mut files = report(rep, Format::Csv, &dir)?;
    files.extend(report(rep, Format::Json, &dir)?);
    let ctx = RunContext::here(name, serde_json::to_value(cfg)?, cfg.seeds.clone());
    manifest::write_manifest(&ctx, &dir.join(MANIFEST_FILE))?;
    for f in files {
        println!("wrote {}", f.display());
    }
    for r in &rep.summary {
        println!(
            "{:<16} {:<15} {:>6.1}% [{:>5.1}, {:>5.1}] n_s={} {}",
            r.deck,
            r.agent,
            100.0 * r.win_rate,
            100.0 * r.ci_low,
            100.0 * r.ci_high,
            r.n_s,
            match (r.delta_pp, r.p_boot, r.p_holm) {
                (Some(d), Some(p), Some(h)) => format!("Δ={d:+.1}pp p={p:.4} p_holm={h:.4}"),
                _ => String::new(),
            }
        );
    }
    for r in &rep.transfer {
        println!(
            "{:<15} in={:.3} held={:.3} Δ_pooled={:+.1}pp Δ_folds={:+.1}pp p={:.4} p_holm={:.4}",
            r.agent, r.in_dist, r.held_out, r.delta_pooled_pp, r.delta_fold_mean_pp, r.p_boot, r.p_holm
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Train { common, agent, deck, opponents: opp, seed } => {
            let cfg = common.resolve()?;
            let deck: Archetype = deck.parse()?;
            let variant: Variant = agent.parse()?;
            let tc = cfg.train_config(deck, variant, seed, opponents(&opp)?);
            let path = checkpoint_path(&cfg.checkpoint_dir(), "train", deck, variant, seed);
            train_cell(&tc, &path)?;
            let ctx = RunContext::here("train", serde_json::to_value(&tc)?, vec![seed]);
            manifest::write_manifest(&ctx, &path.with_extension("manifest.json"))?;
            println!("wrote {}", path.display());
        }
        Cmd::Eval { common, agent_a, agent_b, deck_a, deck_b, out } => {
            let cfg = common.resolve()?;
            let spec = MatchSpec {
                agent_a: agent_spec(&agent_a),
                agent_b: agent_spec(&agent_b),
                deck_a: deck_a.parse()?,
                deck_b: deck_b.parse()?,
                episodes: cfg.episodes_per_opponent,
                seeds: cfg.seeds.clone(),
                turn_cap: cfg.turn_cap,
                reward: cfg.reward,
            };
            let dir = out.unwrap_or_else(|| cfg.run_dir.join("eval"));
            let ctx = RunContext::here("eval", serde_json::Value::Null, vec![]);
            let (_, res) = manifest::record_eval(&spec, &dir, ctx)?;
            let t = res.tally();
            println!(
                "{} vs {}: {} wins, {} draws, {} losses ({} episodes) -> {}",
                spec.agent_a.name(),
                spec.agent_b.name(),
                t.wins,
                t.draws,
                t.losses,
                t.games(),
                dir.display()
            );
        }
        Cmd::Headline { common, agents } => {
            let cfg = common.resolve()?;
            let rep = protocols::run_headline(&cfg, &Archetype::ALL, &variants(&agents)?)?;
            persist(&cfg, "headline", &rep)?;
        }
        Cmd::Ablate { common, deck, variants: names } => {
            let cfg = common.resolve()?;
            let rep = protocols::run_ablation(&cfg, deck.parse()?, &variants(&names)?)?;
            persist(&cfg, "ablation", &rep)?;
        }
        Cmd::Transfer { common, deck, agents } => {
            let cfg = common.resolve()?;
            let rep = protocols::run_transfer(&cfg, deck.parse()?, &variants(&agents)?)?;
            persist(&cfg, "transfer", &rep)?;
        }
        Cmd::Report { input, format, out } => {
            let rep: StatReport = serde_json::from_str(&std::fs::read_to_string(&input)?)?;
            let fmt: Format = format.parse()?;
            let dir = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
            for f in report(&rep, fmt, &dir)? {
                println!("wrote {}", f.display());
            }
        }
        Cmd::Manifest { cmd: ManifestCmd::Verify { dir, rerun } } => {
            let m = read_manifest(&dir.join(MANIFEST_FILE))?;
            let check = verify_manifest(&m, &manifest::workspace_root())?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            if rerun {
                let bad = verify_rerun(&dir)?;
                if !bad.is_empty() {
                    bail!("{} episodes differ on rerun: {:?}", bad.len(), bad);
                }
                println!("rerun reproduced every trace hash");
            }
            if !check.lockfile_matches || !check.fingerprints_match {
                bail!("manifest digests do not recompute");
            }
        }
    }
    Ok(())
}
