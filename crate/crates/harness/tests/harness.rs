use std::path::PathBuf;
use std::process::Command;

use cmtg_core::cards::Archetype;
use cmtg_core::env::Opponent;
use cmtg_core::rewards::RewardScheme;
use cmtg_harness::manifest::{
    build_manifest, read_manifest, record_eval, rerun, rng_fingerprint, vcs_info, verify_manifest, verify_rerun,
    workspace_root, RunContext, MANIFEST_FILE,
};
use cmtg_harness::matches::{game_seed, EpisodeResult, EpisodeRow};
use cmtg_harness::protocols::{
    assemble_ablation, assemble_headline, assemble_transfer, case_study, evaluate_pool, holm_family, scripted_players,
    train_cell, Cell, FoldEval, PoolEval, HEURISTIC, RANDOM,
};
use cmtg_harness::report::StatSettings;
use cmtg_harness::{report, run_match, AgentSpec, Format, HarnessConfig, HarnessError, MatchSpec, StatReport, Tally};
use cmtg_learn::checkpoint::Checkpoint;
use cmtg_learn::train::{Algo, Trainer, Variant};
use cmtg_learn::GateMode;
use cmtg_stats::wilson_interval;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cmtg-harness-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn spec(a: AgentSpec, b: AgentSpec, episodes: usize, seeds: Vec<u64>) -> MatchSpec {
    MatchSpec {
        agent_a: a,
        agent_b: b,
        deck_a: Archetype::MonoRedAggro,
        deck_b: Archetype::MonoRedAggro,
        episodes,
        seeds,
        turn_cap: 30,
        reward: RewardScheme::Shaped,
    }
}

fn settings() -> StatSettings {
    StatSettings { resamples: 2000, ..Default::default() }
}

/// Synthetic evaluation with `(wins, losses)` per cell, cells ordered by
/// seed then opponent.
fn fixture(agent: &str, deck: Archetype, seeds: &[u64], opponents: &[&str], counts: &[(u64, u64)]) -> PoolEval {
    let mut cells = Vec::new();
    let mut it = counts.iter();
    for &s in seeds {
        for &o in opponents {
            let &(w, l) = it.next().expect("one count per cell");
            let rows: Vec<EpisodeRow> = (0..(w + l) as usize)
                .map(|i| EpisodeRow {
                    seed: s,
                    episode: i,
                    game_seed: game_seed(s, i),
                    a_seat: i % 2,
                    result: if (i as u64) < w { EpisodeResult::WinA } else { EpisodeResult::WinB },
                    turns: 10,
                    length: 100,
                    trace_hash: String::new(),
                })
                .collect();
            cells.push(Cell { seed: s, opponent: o.to_string(), tally: Tally::from_rows(&rows), rows });
        }
    }
    PoolEval { agent: agent.into(), deck, cells }
}

#[test]
fn same_spec_twice_is_identical() {
    let s = spec(AgentSpec::Random, AgentSpec::Heuristic, 6, vec![3, 4]);
    let a = run_match(&s).unwrap();
    let b = run_match(&s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 12);
    assert!(a.rows.iter().all(|r| r.trace_hash.len() == 16));
    // Seats alternate with the episode index.
    assert!(a.rows.iter().all(|r| r.a_seat == r.episode % 2));
}

#[test]
fn random_mirror_is_symmetric() {
    let s = spec(AgentSpec::Random, AgentSpec::Random, 500, vec![11]);
    let t = run_match(&s).unwrap().tally();
    assert_eq!(t.games(), 500);
    let (lo, hi) = wilson_interval(t.wins, t.decisive(), 0.95).unwrap();
    assert!(lo <= 0.5 && 0.5 <= hi, "wins {} of {} decisive: [{lo}, {hi}]", t.wins, t.decisive());
}

#[test]
fn match_spec_validation() {
    assert!(matches!(run_match(&spec(AgentSpec::Random, AgentSpec::Random, 0, vec![1])), Err(HarnessError::NoEpisodes)));
    assert!(matches!(run_match(&spec(AgentSpec::Random, AgentSpec::Random, 1, vec![])), Err(HarnessError::NoSeeds)));
    assert!(matches!(
        run_match(&spec(AgentSpec::Random, AgentSpec::Random, 1, vec![2, 2])),
        Err(HarnessError::DuplicateSeed(2))
    ));
    let missing = AgentSpec::Checkpoint { path: PathBuf::from("/nonexistent/ck.json") };
    assert!(matches!(run_match(&spec(missing, AgentSpec::Random, 1, vec![1])), Err(HarnessError::MissingCheckpoint(_))));
}

#[test]
fn paired_evaluations_share_game_seeds() {
    let pool = vec![Opponent::heuristic(Archetype::AzoriusControl), Opponent::heuristic(Archetype::DomainRamp)];
    let deck = Archetype::MonoRedAggro;
    let r = evaluate_pool(RANDOM, &scripted_players(RANDOM, deck, &[0, 1]).unwrap(), deck, &pool, 3, 30).unwrap();
    let h = evaluate_pool(HEURISTIC, &scripted_players(HEURISTIC, deck, &[0, 1]).unwrap(), deck, &pool, 3, 30).unwrap();
    assert_eq!(r.cells.len(), 4);
    for (a, b) in r.cells.iter().zip(&h.cells) {
        assert_eq!((a.seed, &a.opponent), (b.seed, &b.opponent));
        let ga: Vec<u64> = a.rows.iter().map(|x| x.game_seed).collect();
        let gb: Vec<u64> = b.rows.iter().map(|x| x.game_seed).collect();
        assert_eq!(ga, gb);
    }
    // Different opponents never share a game stream.
    assert_ne!(r.cells[0].rows[0].game_seed, r.cells[1].rows[0].game_seed);
}

#[test]
fn headline_holm_family_fixture() {
    let raw = vec![0.0001, 0.0001, 0.4881, 0.0001, 0.4881];
    let members = Archetype::ALL.iter().map(|a| a.as_str().to_string()).collect();
    let f = holm_family("headline", members, raw).unwrap();
    let want = [0.0005, 0.0005, 0.9762, 0.0005, 0.9762];
    for (got, want) in f.p_holm.iter().zip(want) {
        assert!((got - want).abs() < 5e-5, "{got} vs {want}");
    }
    assert!(f.p_holm.iter().zip(&f.p_boot).all(|(a, r)| a >= r));
}

#[test]
fn headline_assembly() {
    let decks = [Archetype::MonoRedAggro, Archetype::DimirMidrange];
    let opps = ["o1", "o2", "o3"];
    let mut evals = Vec::new();
    for &d in &decks {
        evals.push(fixture("random", d, &[0, 1], &opps, &[(1, 9); 6]));
        evals.push(fixture("heuristic", d, &[0, 1], &opps, &[(5, 5); 6]));
        evals.push(fixture("masked_ppo", d, &[0, 1], &opps, &[(4, 6), (5, 5), (4, 6), (6, 4), (5, 5), (4, 6)]));
        evals.push(fixture("cgfa", d, &[0, 1], &opps, &[(7, 3), (8, 2), (6, 4), (9, 1), (7, 3), (8, 2)]));
    }
    let learned = vec!["masked_ppo".to_string(), "cgfa".to_string()];
    let anchors = vec!["random".to_string(), "heuristic".to_string()];
    let rep = assemble_headline(&evals, &decks, &learned, &anchors, &settings()).unwrap();
    assert_eq!(rep.summary.len(), 8);
    rep.check().unwrap();
    let tested: Vec<_> = rep.summary.iter().filter(|r| r.p_boot.is_some()).collect();
    assert_eq!(tested.len(), 2);
    for r in &tested {
        assert_eq!(r.agent, "cgfa");
        assert!(r.p_holm.unwrap() >= r.p_boot.unwrap());
        // Mean cell rates 0.75 vs 0.4667.
        assert!((r.delta_pp.unwrap() - 100.0 * (0.75 - 0.28 / 0.6)).abs() < 1e-9);
        assert!(r.p_boot.unwrap() < 0.01);
    }
    assert_eq!(rep.families.len(), 1);
    assert_eq!(rep.families[0].members.len(), 2);
    // One learned agent: anchors reported, no pairwise section.
    let solo = assemble_headline(&evals, &decks, &learned[..1], &anchors, &settings()).unwrap();
    assert_eq!(solo.summary.len(), 6);
    assert!(solo.summary.iter().all(|r| r.p_boot.is_none()) && solo.families.is_empty());
    // Missing cell.
    let err = assemble_headline(&evals[..3], &decks, &learned, &anchors, &settings()).unwrap_err();
    assert!(matches!(err, HarnessError::MissingCell(_)));
}

#[test]
fn unpaired_seeds_are_rejected() {
    let d = Archetype::MonoRedAggro;
    let evals = vec![
        fixture("masked_ppo", d, &[0, 1], &["o"], &[(3, 7), (4, 6)]),
        fixture("cgfa", d, &[0, 2], &["o"], &[(6, 4), (7, 3)]),
    ];
    let learned = vec!["masked_ppo".to_string(), "cgfa".to_string()];
    let err = assemble_headline(&evals, &[d], &learned, &[], &settings()).unwrap_err();
    assert!(matches!(err, HarnessError::Unpaired(_)), "{err}");
}

fn folds(agent: &str, rate_in: (u64, u64), rate_out: (u64, u64)) -> Vec<FoldEval> {
    Archetype::ALL
        .iter()
        .map(|&held| FoldEval {
            agent: agent.into(),
            held_out: held,
            in_dist: fixture(agent, Archetype::MonoRedAggro, &[0, 1], &["pool"], &[rate_in, rate_in]),
            held: fixture(agent, Archetype::MonoRedAggro, &[0, 1], &["held"], &[rate_out, rate_out]),
        })
        .collect()
}

#[test]
fn transfer_fixture_delta() {
    let mut all = folds("masked_ppo", (761, 239), (808, 192));
    all.extend(folds("cgfa", (726, 274), (768, 232)));
    let rep = assemble_transfer(&all, &settings()).unwrap();
    rep.check().unwrap();
    let ppo = &rep.transfer[0];
    assert!((ppo.delta_pooled_pp - -4.7).abs() < 1e-9, "{}", ppo.delta_pooled_pp);
    assert!((ppo.delta_fold_mean_pp - -4.7).abs() < 1e-9);
    assert_eq!((ppo.n_folds, ppo.n_s), (5, 2));
    let cgfa = &rep.transfer[1];
    assert!((cgfa.delta_pooled_pp - -4.2).abs() < 1e-9);
    assert!(rep.transfer.iter().all(|r| r.p_holm >= r.p_boot));
}

#[test]
fn transfer_identical_rates_and_fold_count() {
    let rep = assemble_transfer(&folds("cgfa", (6, 4), (6, 4)), &settings()).unwrap();
    assert_eq!(rep.transfer[0].delta_pooled_pp, 0.0);
    assert!(rep.transfer[0].p_boot > 0.99);
    let four = &folds("cgfa", (6, 4), (5, 5))[..4];
    assert!(matches!(assemble_transfer(four, &settings()), Err(HarnessError::FoldCount { got: 4, .. })));
}

#[test]
fn ablation_variants() {
    assert!("frobnicate".parse::<Variant>().is_err());
    let nc = HarnessConfig::default().train_config(
        Archetype::MonoRedAggro,
        "no_calibration".parse().unwrap(),
        0,
        cmtg_harness::config::heuristic_pool(),
    );
    assert_eq!(nc.coeffs.c_c, 0.0);
    assert_eq!(nc.algo, Algo::Cgfa { gate: GateMode::Learned });
    let so = HarnessConfig::default().train_config(Archetype::MonoRedAggro, Variant::ScalarOnly, 0, vec![]);
    assert_eq!((so.coeffs.c_f, so.coeffs.c_c, so.coeffs.c_e), (0.0, 0.0, 0.0));
    // Parameter-matched: same network as the full learner.
    let full = HarnessConfig::default().train_config(Archetype::MonoRedAggro, Variant::Cgfa, 0, vec![]);
    assert_eq!(so.net, full.net);

    let d = Archetype::MonoRedAggro;
    let evals: Vec<PoolEval> = Variant::ALL
        .iter()
        .enumerate()
        .map(|(i, v)| fixture(v.as_str(), d, &[0, 1], &["a", "b"], &[(3 + i as u64, 7 - i as u64); 4]))
        .collect();
    let rep = assemble_ablation(&evals, "cgfa", &settings()).unwrap();
    rep.check().unwrap();
    assert_eq!(rep.summary.len(), 6);
    assert_eq!(rep.families[0].members.len(), 5);
    assert!(matches!(assemble_ablation(&evals[..5], "cgfa", &settings()), Err(HarnessError::MissingCell(_))));
}

#[test]
fn report_files_and_errors() {
    let d = Archetype::MonoRedAggro;
    let evals = vec![
        fixture("masked_ppo", d, &[0, 1], &["o"], &[(3, 7), (4, 6)]),
        fixture("cgfa", d, &[0, 1], &["o"], &[(6, 4), (7, 3)]),
    ];
    let learned = vec!["masked_ppo".to_string(), "cgfa".to_string()];
    let rep = assemble_headline(&evals, &[d], &learned, &[], &settings()).unwrap();
    let dir = scratch("report");
    let files = report(&rep, Format::Csv, &dir).unwrap();
    let summary = std::fs::read_to_string(&files[0]).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..9], ["deck", "agent", "win_rate", "ci_low", "ci_high", "n_s", "delta_pp", "p_boot", "p_holm"]);
    let json = report(&rep, Format::Json, &dir).unwrap();
    let back: StatReport = serde_json::from_str(&std::fs::read_to_string(&json[0]).unwrap()).unwrap();
    assert_eq!(back.summary.len(), rep.summary.len());
    assert!(matches!("xml".parse::<Format>(), Err(HarnessError::UnknownFormat(_))));
    assert!(matches!(report(&StatReport::new("empty"), Format::Csv, &dir), Err(HarnessError::EmptyReport)));
    // A tampered adjusted p below its raw p is refused.
    let mut bad = rep.clone();
    let row = bad.summary.iter_mut().find(|r| r.p_holm.is_some()).unwrap();
    row.p_holm = Some(row.p_boot.unwrap() / 2.0);
    assert!(matches!(report(&bad, Format::Csv, &dir), Err(HarnessError::Invariant(_))));
}

#[test]
fn training_cell_calibration_and_case_study() {
    let dir = scratch("train");
    let cfg = HarnessConfig { total_steps: Some(1024), ..Default::default() };
    let tc = cfg.train_config(Archetype::MonoRedAggro, Variant::Cgfa, 5, cmtg_harness::config::heuristic_pool());
    let path = dir.join("ck.json");
    train_cell(&tc, &path).unwrap();
    // Cached on the second call; a different config is refused.
    train_cell(&tc, &path).unwrap();
    let mut other = tc.clone();
    other.seed = 6;
    assert!(matches!(train_cell(&other, &path), Err(HarnessError::ConfigMismatch { .. })));

    let metrics = cmtg_harness::protocols::read_metrics(&path).unwrap();
    let series = cmtg_harness::CalibrationRow::series("cgfa", 5, &metrics);
    assert_eq!(series.len(), 2);
    let mut rep = StatReport::new("calibration");
    rep.calibration = series;
    let files = report(&rep, Format::Csv, &dir).unwrap();
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let header = text.lines().next().unwrap();
    // Three channels: correlation, credit share, gate.
    assert_eq!(header.matches("corr_").count(), 6);
    assert_eq!(header.matches("share_").count(), 6);
    assert!(header.contains("gate_mean") && header.contains("gate_min") && header.contains("gate_max"));

    let agent = Checkpoint::load(&path).unwrap().agent();
    let opp = Opponent::heuristic(Archetype::AzoriusControl);
    let rows = case_study(&agent, Archetype::MonoRedAggro, opp, 77, 0, 30, 0.99, 0.95).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0].turn < w[1].turn));
    assert!(rows.iter().all(|r| r.decisions >= 1 && r.gate > 0.0 && r.gate < 1.0));
    assert_eq!(rows, case_study(&agent, Archetype::MonoRedAggro, opp, 77, 0, 30, 0.99, 0.95).unwrap());
}

#[test]
fn learned_agent_match_is_reproducible() {
    let dir = scratch("learned");
    let mut t = Trainer::new(cmtg_learn::TrainConfig {
        total_steps: 512,
        ..cmtg_learn::TrainConfig::desk(Archetype::MonoRedAggro, Variant::MaskedPpo, 2)
    })
    .unwrap();
    t.train().unwrap();
    let path = dir.join("ppo.json");
    Checkpoint::from_trainer(&t).save(&path).unwrap();
    let s = spec(AgentSpec::Checkpoint { path: path.clone() }, AgentSpec::Heuristic, 4, vec![0]);
    assert_eq!(run_match(&s).unwrap(), run_match(&s).unwrap());
    // Playing a deck the checkpoint was not trained on is refused.
    let mut wrong = s.clone();
    wrong.deck_a = Archetype::DomainRamp;
    assert!(matches!(run_match(&wrong), Err(HarnessError::ConfigMismatch { .. })));
}

#[test]
fn manifest_sections_and_rerun() {
    let dir = scratch("manifest");
    let s = spec(AgentSpec::Random, AgentSpec::Heuristic, 5, vec![8, 9]);
    let ctx = RunContext::here("eval", serde_json::Value::Null, vec![]);
    let (m, res) = record_eval(&s, &dir, ctx).unwrap();
    assert_eq!(m.seeds.seeds, vec![8, 9]);
    assert_eq!(m.seeds.fingerprints, vec![rng_fingerprint(8), rng_fingerprint(9)]);
    assert_ne!(rng_fingerprint(8), rng_fingerprint(9));
    assert_eq!(m.lockfile.sha256.len(), 64);
    assert!(m.runtime.libraries.contains_key("rand_chacha"));
    let check = verify_manifest(&read_manifest(&dir.join(MANIFEST_FILE)).unwrap(), &workspace_root()).unwrap();
    assert!(check.lockfile_matches && check.fingerprints_match && check.sections_complete, "{check:?}");
    assert_eq!(rerun(&m).unwrap().trace_hashes(), res.trace_hashes());
    assert!(verify_rerun(&dir).unwrap().is_empty());
}

#[test]
fn manifest_errors() {
    let mut ctx = RunContext::here("x", serde_json::json!({}), vec![1]);
    ctx.lockfile = PathBuf::from("/nonexistent/Cargo.lock");
    assert!(matches!(build_manifest(&ctx), Err(HarnessError::Lockfile { .. })));
}

#[test]
fn dirty_tree_sets_flag() {
    let dir = scratch("git");
    let git = |args: &[&str]| {
        let ok = Command::new("git")
            .arg("-C")
            .arg(&dir)
            .args(["-c", "user.name=t", "-c", "user.email=t@example.com"])
            .args(args)
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false);
        assert!(ok, "git {args:?}");
    };
    git(&["init", "-q"]);
    std::fs::write(dir.join("a.txt"), "one").unwrap();
    git(&["add", "a.txt"]);
    git(&["commit", "-q", "-m", "init"]);
    let clean = vcs_info(&dir);
    assert!(!clean.dirty);
    assert_eq!(clean.commit.len(), 40);
    std::fs::write(dir.join("a.txt"), "two").unwrap();
    assert!(vcs_info(&dir).dirty);
}
