//! Headline, transfer and ablation protocols.
//!
//! Evaluation happens per (seed, opponent) cell. The cell's game seeds
//! depend on the seed and the opponent's identity only, so two agents
//! evaluated on the same seed list are paired game by game. Pairwise tests
//! use per-cell win rates as the paired unit.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cmtg_core::cards::{Archetype, Catalog};
use cmtg_core::env::{Env, EnvConfig, EpisodeSpec, Opponent, OpponentSchedule};
use cmtg_core::observe::encode;
use cmtg_learn::checkpoint::Checkpoint;
use cmtg_learn::factor_returns_advantages;
use cmtg_learn::metrics::UpdateMetrics;
use cmtg_learn::net::sparsify;
use cmtg_learn::train::{GreedyAgent, TrainConfig, Trainer, Variant};
use cmtg_learn::K;
use cmtg_stats::{bootstrap_ci, holm_bonferroni, paired_bootstrap_test, transfer_gap, SampleSet, TestResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{heuristic_pool, HarnessConfig};
use crate::matches::{play_seed, EpisodeRow, Player, Tally};
use crate::report::{CalibrationRow, CaseStudyRow, CellRow, Family, StatReport, StatSettings, SummaryRow, TransferRow};
use crate::{mix64, HarnessError, Result};

pub const RANDOM: &str = "random";
pub const HEURISTIC: &str = "heuristic";

/// Results of one (seed, opponent) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub seed: u64,
    pub opponent: String,
    pub tally: Tally,
    pub rows: Vec<EpisodeRow>,
}

impl Cell {
    /// Win rate with draws excluded; an all-draw cell counts as 0.5.
    pub fn rate(&self) -> f64 {
        self.tally.win_rate().unwrap_or(0.5)
    }
}

/// One agent on one deck against an opponent pool, over a seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEval {
    pub agent: String,
    pub deck: Archetype,
    pub cells: Vec<Cell>,
}

impl PoolEval {
    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for c in &self.cells {
            t.merge(&c.tally);
        }
        t
    }

    pub fn seeds(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.cells.iter().map(|c| c.seed).collect();
        set.into_iter().collect()
    }

    pub fn cell_rates(&self) -> Vec<f64> {
        self.cells.iter().map(Cell::rate).collect()
    }

    pub fn mean_rate(&self) -> f64 {
        let r = self.cell_rates();
        r.iter().sum::<f64>() / r.len().max(1) as f64
    }

    /// Pooled rate of one seed's cells.
    pub fn seed_rate(&self, seed: u64) -> f64 {
        let mut t = Tally::default();
        for c in self.cells.iter().filter(|c| c.seed == seed) {
            t.merge(&c.tally);
        }
        t.win_rate().unwrap_or(0.5)
    }

    fn cell_keys(&self) -> Vec<u64> {
        self.cells.iter().map(|c| cell_seed(c.seed, &c.opponent)).collect()
    }

    pub fn cell_rows(&self) -> Vec<CellRow> {
        self.cells
            .iter()
            .map(|c| CellRow {
                agent: self.agent.clone(),
                deck: self.deck.as_str().to_string(),
                seed: c.seed,
                opponent: c.opponent.clone(),
                wins: c.tally.wins,
                draws: c.tally.draws,
                losses: c.tally.losses,
                win_rate: c.tally.win_rate(),
            })
            .collect()
    }
}

/// Seed of the game stream for `seed` against `opponent`.
pub fn cell_seed(seed: u64, opponent: &str) -> u64 {
    let id = opponent.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| mix64(h ^ b as u64));
    mix64(seed ^ id)
}

/// Evaluate one player per seed against every opponent in `pool`.
pub fn evaluate_pool(
    agent: &str,
    players: &[(u64, Player)],
    deck: Archetype,
    pool: &[Opponent],
    episodes: usize,
    turn_cap: u32,
) -> Result<PoolEval> {
    if episodes == 0 {
        return Err(HarnessError::NoEpisodes);
    }
    if players.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    let catalog = Catalog::bundled();
    let jobs: Vec<(usize, Opponent)> =
        (0..players.len()).flat_map(|i| pool.iter().map(move |o| (i, *o))).collect();
    let cells = jobs
        .par_iter()
        .map(|(i, opp)| {
            let (seed, player) = &players[*i];
            let name = opp.name();
            let b = Player::Scripted(opp.agent);
            let rows = play_seed(&catalog, player, &b, deck, opp.deck, cell_seed(*seed, &name), episodes, turn_cap)?;
            Ok(Cell { seed: *seed, opponent: name, tally: Tally::from_rows(&rows), rows })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoolEval { agent: agent.to_string(), deck, cells })
}

/// Scripted players (random or heuristic) for every seed.
pub fn scripted_players(name: &str, deck: Archetype, seeds: &[u64]) -> Result<Vec<(u64, Player)>> {
    let spec = match name {
        RANDOM => crate::AgentSpec::Random,
        HEURISTIC => crate::AgentSpec::Heuristic,
        other => return Err(HarnessError::MissingCell(format!("no scripted agent `{other}`"))),
    };
    seeds.iter().map(|&s| Ok((s, Player::resolve(&spec, deck)?))).collect()
}

/// Structural pairing check: same seeds, opponents and game seeds.
pub fn check_pairing(x: &PoolEval, y: &PoolEval) -> Result<()> {
    let what = || format!("{} vs {} on {}", x.agent, y.agent, x.deck.as_str());
    if x.deck != y.deck || x.cells.len() != y.cells.len() {
        return Err(HarnessError::Unpaired(what()));
    }
    SampleSet::with_seeds(x.cell_rates(), x.cell_keys())?
        .check_paired(&SampleSet::with_seeds(y.cell_rates(), y.cell_keys())?)
        .map_err(|_| HarnessError::Unpaired(what()))?;
    for (a, b) in x.cells.iter().zip(&y.cells) {
        let ga: Vec<u64> = a.rows.iter().map(|r| r.game_seed).collect();
        let gb: Vec<u64> = b.rows.iter().map(|r| r.game_seed).collect();
        if ga != gb {
            return Err(HarnessError::Unpaired(what()));
        }
    }
    Ok(())
}

/// Paired bootstrap of mean cell rate, `x - y`.
pub fn paired_compare(x: &PoolEval, y: &PoolEval, s: &StatSettings) -> Result<TestResult> {
    check_pairing(x, y)?;
    Ok(paired_bootstrap_test(&x.cell_rates(), &y.cell_rates(), s.resamples, s.seed)?)
}

fn summary_row(e: &PoolEval, s: &StatSettings) -> Result<SummaryRow> {
    let t = e.tally();
    let (lo, hi) = t.wilson(s.confidence)?.unwrap_or((0.0, 1.0));
    let rates = e.cell_rates();
    let boot = if rates.len() >= 2 { Some(bootstrap_ci(s.ci_method, &rates, s.resamples, s.confidence, s.seed)?) } else { None };
    Ok(SummaryRow {
        deck: e.deck.as_str().to_string(),
        agent: e.agent.clone(),
        win_rate: e.mean_rate(),
        ci_low: lo,
        ci_high: hi,
        n_s: e.seeds().len(),
        delta_pp: None,
        p_boot: None,
        p_holm: None,
        family: None,
        reference: None,
        wins: t.wins,
        draws: t.draws,
        losses: t.losses,
        boot_low: boot.map(|b| b.0),
        boot_high: boot.map(|b| b.1),
        boot_method: s.ci_method.as_str().to_string(),
    })
}

fn find<'a>(evals: &'a [PoolEval], deck: Archetype, agent: &str) -> Result<&'a PoolEval> {
    evals
        .iter()
        .find(|e| e.deck == deck && e.agent == agent)
        .ok_or_else(|| HarnessError::MissingCell(format!("{agent} on {}", deck.as_str())))
}

/// Fill `p_holm` for the rows at `idx`, registering the family.
fn adjust_family(rep: &mut StatReport, name: &str, idx: &[usize], members: Vec<String>) -> Result<()> {
    if idx.is_empty() {
        return Ok(());
    }
    let raw: Vec<f64> = idx.iter().map(|&i| rep.summary[i].p_boot.unwrap()).collect();
    let fam = holm_family(name, members, raw)?;
    for (&i, &a) in idx.iter().zip(&fam.p_holm) {
        rep.summary[i].p_holm = Some(a);
        rep.summary[i].family = Some(name.to_string());
    }
    rep.families.push(fam);
    Ok(())
}

/// Holm-adjust one named family of raw p-values.
pub fn holm_family(name: &str, members: Vec<String>, p_boot: Vec<f64>) -> Result<Family> {
    if members.len() != p_boot.len() {
        return Err(HarnessError::Invariant(format!("family {name}: {} members, {} p-values", members.len(), p_boot.len())));
    }
    let p_holm = holm_bonferroni(&p_boot)?;
    Ok(Family { name: name.to_string(), members, p_boot, p_holm })
}

/// Headline table: every agent on every deck against the pool.
/// `learned` lists `[baseline, treatment]`; with both present the
/// treatment is tested against the baseline per deck, Holm-adjusted over
/// decks. `anchors` (random, heuristic) are reported without tests.
pub fn assemble_headline(
    evals: &[PoolEval],
    decks: &[Archetype],
    learned: &[String],
    anchors: &[String],
    s: &StatSettings,
) -> Result<StatReport> {
    let mut rep = StatReport::new("headline");
    rep.settings = Some(*s);
    let mut tested = Vec::new();
    let mut members = Vec::new();
    for &deck in decks {
        for name in anchors.iter().chain(learned) {
            let e = find(evals, deck, name)?;
            rep.summary.push(summary_row(e, s)?);
            rep.cells.extend(e.cell_rows());
        }
        if let [base, treat, ..] = learned {
            let (b, t) = (find(evals, deck, base)?, find(evals, deck, treat)?);
            let test = paired_compare(t, b, s)?;
            let row = rep.summary.len() - 1;
            let r = &mut rep.summary[row];
            r.delta_pp = Some(100.0 * test.statistic);
            r.p_boot = Some(test.p_value);
            r.reference = Some(base.clone());
            tested.push(row);
            members.push(format!("{}:{treat}-vs-{base}", deck.as_str()));
        }
    }
    adjust_family(&mut rep, "headline", &tested, members)?;
    Ok(rep)
}

/// Ablation table: each variant against `reference`, Holm over the family.
pub fn assemble_ablation(evals: &[PoolEval], reference: &str, s: &StatSettings) -> Result<StatReport> {
    let first = evals.first().ok_or_else(|| HarnessError::MissingCell("no ablation variants".into()))?;
    let deck = first.deck;
    let refe = find(evals, deck, reference)?;
    let mut rep = StatReport::new("ablation");
    rep.settings = Some(*s);
    let mut tested = Vec::new();
    let mut members = Vec::new();
    for e in evals {
        if e.deck != deck {
            return Err(HarnessError::MissingCell(format!("{} evaluated on {}", e.agent, e.deck.as_str())));
        }
        let mut row = summary_row(e, s)?;
        rep.cells.extend(e.cell_rows());
        if e.agent != reference {
            let test = paired_compare(e, refe, s)?;
            row.delta_pp = Some(100.0 * test.statistic);
            row.p_boot = Some(test.p_value);
            row.reference = Some(reference.to_string());
            tested.push(rep.summary.len());
            members.push(format!("{}-vs-{reference}", e.agent));
        }
        rep.summary.push(row);
    }
    adjust_family(&mut rep, "ablation", &tested, members)?;
    Ok(rep)
}

/// One leave-one-out fold: trained without `held_out`, evaluated on the
/// training pool and on the held-out opponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEval {
    pub agent: String,
    pub held_out: Archetype,
    pub in_dist: PoolEval,
    pub held: PoolEval,
}

/// Transfer table. Reports Δ both from rates pooled over folds and as the
/// mean of per-fold Δ. The test pairs each (fold, seed)'s in-distribution
/// rate with its held-out rate.
pub fn assemble_transfer(folds: &[FoldEval], s: &StatSettings) -> Result<StatReport> {
    let mut agents: Vec<&str> = Vec::new();
    for f in folds {
        if !agents.contains(&f.agent.as_str()) {
            agents.push(&f.agent);
        }
    }
    if agents.is_empty() {
        return Err(HarnessError::MissingCell("no transfer folds".into()));
    }
    let mut rep = StatReport::new("transfer");
    rep.settings = Some(*s);
    let mut raw = Vec::new();
    for agent in &agents {
        let mine: Vec<&FoldEval> = folds.iter().filter(|f| f.agent == *agent).collect();
        let held: BTreeSet<Archetype> = mine.iter().map(|f| f.held_out).collect();
        if mine.len() != Archetype::ALL.len() || held.len() != Archetype::ALL.len() {
            return Err(HarnessError::FoldCount { agent: agent.to_string(), got: mine.len() });
        }
        let (mut tin, mut tout) = (Tally::default(), Tally::default());
        let mut fold_deltas = Vec::new();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut seeds = BTreeSet::new();
        for f in &mine {
            if f.in_dist.seeds() != f.held.seeds() {
                return Err(HarnessError::Unpaired(format!("{agent} fold {}", f.held_out.as_str())));
            }
            let (a, b) = (f.in_dist.tally(), f.held.tally());
            tin.merge(&a);
            tout.merge(&b);
            fold_deltas.push(transfer_gap(a.win_rate().unwrap_or(0.5), b.win_rate().unwrap_or(0.5))?);
            for seed in f.in_dist.seeds() {
                xs.push(f.in_dist.seed_rate(seed));
                ys.push(f.held.seed_rate(seed));
                seeds.insert(seed);
            }
            rep.cells.extend(f.in_dist.cell_rows());
            rep.cells.extend(f.held.cell_rows());
        }
        let (rin, rout) = (tin.win_rate().unwrap_or(0.5), tout.win_rate().unwrap_or(0.5));
        let test = paired_bootstrap_test(&xs, &ys, s.resamples, s.seed)?;
        raw.push(test.p_value);
        rep.transfer.push(TransferRow {
            agent: agent.to_string(),
            in_dist: rin,
            held_out: rout,
            delta_pooled_pp: transfer_gap(rin, rout)?,
            delta_fold_mean_pp: fold_deltas.iter().sum::<f64>() / fold_deltas.len() as f64,
            n_folds: mine.len(),
            n_s: seeds.len(),
            p_boot: test.p_value,
            p_holm: f64::NAN,
            family: "transfer".into(),
        });
    }
    let fam = holm_family("transfer", agents.iter().map(|a| format!("{a}:in-vs-held")).collect(), raw)?;
    for (r, a) in rep.transfer.iter_mut().zip(&fam.p_holm) {
        r.p_holm = *a;
    }
    rep.families.push(fam);
    Ok(rep)
}

/// Checkpoint file of a training cell.
pub fn checkpoint_path(dir: &Path, tag: &str, deck: Archetype, variant: Variant, seed: u64) -> PathBuf {
    dir.join(format!("{tag}_{}_{}_s{seed}.json", deck.as_str(), variant.as_str()))
}

pub fn metrics_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("metrics.json")
}

/// Train `config` unless `path` already holds a checkpoint of it. Writes
/// the checkpoint and its per-update metrics.
pub fn train_cell(config: &TrainConfig, path: &Path) -> Result<PathBuf> {
    if path.exists() {
        let ck = Checkpoint::load(path)?;
        ck.check_config(config).map_err(|e| HarnessError::ConfigMismatch {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        return Ok(path.to_path_buf());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut t = Trainer::new(config.clone())?;
    t.train()?;
    Checkpoint::from_trainer(&t).save(path)?;
    std::fs::write(metrics_path(path), serde_json::to_string(&t.metrics)?)?;
    Ok(path.to_path_buf())
}

/// Train several cells in parallel.
pub fn train_cells(jobs: &[(TrainConfig, PathBuf)]) -> Result<Vec<PathBuf>> {
    jobs.par_iter().map(|(c, p)| train_cell(c, p)).collect()
}

pub fn read_metrics(checkpoint: &Path) -> Result<Vec<UpdateMetrics>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(metrics_path(checkpoint))?)?)
}

/// Learned players from checkpoints, one per seed.
pub fn learned_players(paths: &[(u64, PathBuf)], deck: Archetype) -> Result<Vec<(u64, Player)>> {
    paths
        .iter()
        .map(|(s, p)| Ok((*s, Player::Learned(Box::new(crate::matches::load_agent(p, deck)?)))))
        .collect()
}

/// Replay one greedy episode and record per-turn `V_k`, `A_k` and `eps_k`
/// from the agent's side.
#[allow(clippy::too_many_arguments)]
pub fn case_study(
    agent: &GreedyAgent,
    deck: Archetype,
    opponent: Opponent,
    game_seed: u64,
    agent_seat: usize,
    turn_cap: u32,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<CaseStudyRow>> {
    let mut env = Env::new(EnvConfig {
        agent_deck: deck,
        opponents: vec![opponent],
        schedule: OpponentSchedule::Fixed,
        reward: Default::default(),
        turn_cap,
        alternate_seats: false,
    })?;
    env.learner.weights = agent.weights;
    env.reset_with(EpisodeSpec { seed: game_seed, agent_seat, opponent: 0 })?;
    let (mut turns, mut vk, mut gates, mut rf, mut eps, mut dones) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    while !env.is_done() {
        let st = env.state().expect("live episode");
        let seat = env.agent_seat();
        let legal = st.mask()?.to_vec();
        let out = agent.net.forward(&sparsify(&encode(st, seat)), &legal)?;
        turns.push(st.turn);
        vk.push(out.vk);
        gates.push(out.g);
        let a = agent.act(st, seat)?;
        let tr = env.step(a)?;
        rf.push(tr.r_factor);
        eps.push(tr.eps);
        dones.push(tr.done);
    }
    let (_, adv) = factor_returns_advantages(&rf, &vk, &dones, &[0.0; K], gamma, lambda)?;
    let mut rows: Vec<CaseStudyRow> = Vec::new();
    for i in 0..turns.len() {
        match rows.last_mut() {
            Some(r) if r.turn == turns[i] => {
                r.decisions += 1;
                for k in 0..K {
                    r.a_k[k] += adv[i][k];
                    r.eps_k[k] += eps[i][k];
                }
            }
            _ => rows.push(CaseStudyRow {
                turn: turns[i],
                decisions: 1,
                v_k: vk[i],
                a_k: adv[i],
                eps_k: eps[i],
                gate: gates[i],
            }),
        }
    }
    Ok(rows)
}

/// Statistic settings of a run configuration.
pub fn settings(cfg: &HarnessConfig) -> StatSettings {
    StatSettings { resamples: cfg.bootstrap_resamples, seed: cfg.bootstrap_seed, ci_method: cfg.ci_method, confidence: 0.95 }
}

fn calibration_of(rep: &mut StatReport, agent: &str, paths: &[(u64, PathBuf)]) -> Result<()> {
    for (seed, p) in paths {
        rep.calibration.extend(CalibrationRow::series(agent, *seed, &read_metrics(p)?));
    }
    Ok(())
}

/// Train (or reuse) one checkpoint per seed for `deck` and `variant`.
fn train_seeds(cfg: &HarnessConfig, tag: &str, deck: Archetype, variant: Variant, pool: &[Opponent]) -> Vec<(TrainConfig, PathBuf)> {
    cfg.seeds
        .iter()
        .map(|&s| {
            (cfg.train_config(deck, variant, s, pool.to_vec()), checkpoint_path(&cfg.checkpoint_dir(), tag, deck, variant, s))
        })
        .collect()
}

fn seed_paths(jobs: &[(TrainConfig, PathBuf)]) -> Vec<(u64, PathBuf)> {
    jobs.iter().map(|(c, p)| (c.seed, p.clone())).collect()
}

/// Headline protocol: `learned` is `[baseline, treatment]` (or a single
/// agent), trained per deck and seed against the heuristic pool, with the
/// random and heuristic anchors.
pub fn run_headline(cfg: &HarnessConfig, decks: &[Archetype], learned: &[Variant]) -> Result<StatReport> {
    let pool = heuristic_pool();
    let mut jobs = Vec::new();
    for &deck in decks {
        for &v in learned {
            jobs.push(((deck, v), train_seeds(cfg, "pool", deck, v, &pool)));
        }
    }
    train_cells(&jobs.iter().flat_map(|(_, j)| j.clone()).collect::<Vec<_>>())?;
    let mut evals = Vec::new();
    for &deck in decks {
        for name in [RANDOM, HEURISTIC] {
            evals.push(evaluate_pool(name, &scripted_players(name, deck, &cfg.seeds)?, deck, &pool, cfg.episodes_per_opponent, cfg.turn_cap)?);
        }
    }
    for ((deck, v), j) in &jobs {
        let players = learned_players(&seed_paths(j), *deck)?;
        evals.push(evaluate_pool(v.as_str(), &players, *deck, &pool, cfg.episodes_per_opponent, cfg.turn_cap)?);
    }
    let names: Vec<String> = learned.iter().map(|v| v.as_str().to_string()).collect();
    let anchors = vec![RANDOM.to_string(), HEURISTIC.to_string()];
    let mut rep = assemble_headline(&evals, decks, &names, &anchors, &settings(cfg))?;
    for ((_, v), j) in &jobs {
        calibration_of(&mut rep, v.as_str(), &seed_paths(j))?;
    }
    Ok(rep)
}

/// Ablation protocol on `deck` against the heuristic pool; `cgfa` must be
/// among the variants and serves as the reference. Also records a
/// case-study episode of the reference agent's first seed.
pub fn run_ablation(cfg: &HarnessConfig, deck: Archetype, variants: &[Variant]) -> Result<StatReport> {
    if !variants.contains(&Variant::Cgfa) {
        return Err(HarnessError::MissingCell("ablation needs the cgfa reference".into()));
    }
    let pool = heuristic_pool();
    let jobs: Vec<_> = variants.iter().map(|&v| (v, train_seeds(cfg, "pool", deck, v, &pool))).collect();
    train_cells(&jobs.iter().flat_map(|(_, j)| j.clone()).collect::<Vec<_>>())?;
    let mut evals = Vec::new();
    for (v, j) in &jobs {
        let players = learned_players(&seed_paths(j), deck)?;
        evals.push(evaluate_pool(v.as_str(), &players, deck, &pool, cfg.episodes_per_opponent, cfg.turn_cap)?);
    }
    let mut rep = assemble_ablation(&evals, Variant::Cgfa.as_str(), &settings(cfg))?;
    for (v, j) in &jobs {
        calibration_of(&mut rep, v.as_str(), &seed_paths(j))?;
    }
    let (_, reference) = jobs.iter().find(|(v, _)| *v == Variant::Cgfa).unwrap();
    let (ck_cfg, path) = &reference[0];
    let agent = crate::matches::load_agent(path, deck)?;
    rep.case_study = case_study(
        &agent,
        deck,
        pool[0],
        cell_seed(ck_cfg.seed, &pool[0].name()),
        0,
        cfg.turn_cap,
        ck_cfg.coeffs.gamma,
        ck_cfg.coeffs.lambda,
    )?;
    Ok(rep)
}

/// Leave-one-out transfer protocol for `deck`: five folds, each trained on
/// four heuristic opponents and evaluated on both sides of the split.
pub fn run_transfer(cfg: &HarnessConfig, deck: Archetype, variants: &[Variant]) -> Result<StatReport> {
    let full = heuristic_pool();
    let mut jobs = Vec::new();
    for &held in &Archetype::ALL {
        let pool: Vec<Opponent> = full.iter().copied().filter(|o| o.deck != held).collect();
        for &v in variants {
            let tag = format!("loo-{}", held.as_str());
            jobs.push((held, v, pool.clone(), train_seeds(cfg, &tag, deck, v, &pool)));
        }
    }
    train_cells(&jobs.iter().flat_map(|(.., j)| j.clone()).collect::<Vec<_>>())?;
    let mut folds = Vec::new();
    for (held, v, pool, j) in &jobs {
        let players = learned_players(&seed_paths(j), deck)?;
        let out: Vec<Opponent> = full.iter().copied().filter(|o| o.deck == *held).collect();
        folds.push(FoldEval {
            agent: v.as_str().to_string(),
            held_out: *held,
            in_dist: evaluate_pool(v.as_str(), &players, deck, pool, cfg.episodes_per_opponent, cfg.turn_cap)?,
            held: evaluate_pool(v.as_str(), &players, deck, &out, cfg.episodes_per_opponent, cfg.turn_cap)?,
        });
    }
    assemble_transfer(&folds, &settings(cfg))
}
