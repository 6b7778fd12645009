use super::*;
use crate::backend::Tier;
use crate::sim::{HexCoord, Side, Terrain, UnitSpec};

fn duel() -> Scenario {
    let spec = |side, id, row, col, hit_base| UnitSpec {
        id,
        side,
        pos: HexCoord::new(row, col),
        vision_range: 4,
        weapon_range: 2,
        hit_base,
    };
    Scenario {
        rows: 8,
        cols: 8,
        terrain: vec![vec![Terrain::Open; 8]; 8],
        control_point: HexCoord::new(7, 7),
        units: vec![spec(Side::Red, 1, 0, 0, 1.0), spec(Side::Blue, 1, 1, 0, 0.0)],
        max_ticks: 20,
    }
}

fn run(cfg: &ExperimentConfig) -> ExperimentRun {
    run_experiment(cfg, &BackendHandle::from_config(cfg).unwrap()).unwrap()
}

#[test]
fn rule_vs_random_is_reproducible() {
    let mut cfg = ExperimentConfig::new(Scenario::standard(), PolicyKind::Rule, PolicyKind::Random);
    cfg.base_seed = 7;
    let a = run(&cfg);
    let b = run(&cfg);
    assert_eq!(a.results, b.results);
    assert_eq!(a.results[0].trajectory_hash.len(), 64);
    cfg.base_seed = 8;
    assert_ne!(run(&cfg).results[0].trajectory_hash, a.results[0].trajectory_hash);
}

#[test]
fn annihilation_bookkeeping() {
    let cfg = ExperimentConfig::new(duel(), PolicyKind::Rule, PolicyKind::Rule);
    let r = &run(&cfg).results[0];
    assert_eq!(r.winner, Outcome::Red);
    assert_eq!(r.ticks, 1);
    assert_eq!(r.kills, PerSide { red: 1, blue: 0 });
    assert_eq!(r.survivors, PerSide { red: 1, blue: 0 });
    assert_eq!(r.captured_by, None);
    assert!(r.is_consistent());
    assert_eq!(r.scores(Side::Red), TaskScores { kill: 100, goal: 0, survive: 1000 });
}

#[test]
fn gwae_requires_a_document() {
    let cfg = ExperimentConfig::new(Scenario::standard(), PolicyKind::Gwae, PolicyKind::Rule);
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "  \n").unwrap();
    assert!(matches!(cfg.clone().with_expert_doc(&empty), Err(HarnessError::ExpertDoc { .. })));
    assert!(cfg.clone().with_expert_doc(&dir.path().join("missing.txt")).is_err());

    let doc = dir.path().join("doc.txt");
    std::fs::write(&doc, "\n  Hold the road.  \n").unwrap();
    let cfg = cfg.with_expert_doc(&doc).unwrap();
    assert_eq!(cfg.expert_doc.as_deref(), Some("Hold the road."));
    cfg.validate().unwrap();
}

#[test]
fn baseline_runs_never_touch_the_backend() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.txt");
    std::fs::write(&doc, "Hold the road.").unwrap();
    let mut cfg = ExperimentConfig::new(duel(), PolicyKind::Rule, PolicyKind::Random).with_expert_doc(&doc).unwrap();
    cfg.episodes = 3;
    let out = run(&cfg);
    assert_eq!(out.report.completed, 3);
    assert!(out.transcripts.iter().all(|t| t.exchanges.is_empty()));
}

#[test]
fn gwa_episode_negotiates_every_tick() {
    let mut cfg = ExperimentConfig::new(Scenario::standard(), PolicyKind::Gwa, PolicyKind::Random);
    cfg.base_seed = 3;
    let out = run(&cfg);
    assert!(out.report.failures.is_empty(), "{:?}", out.report.failures);
    let t = &out.transcripts[0];
    assert!(!t.ticks.is_empty());
    for tick in &t.ticks {
        assert_eq!(tick.negotiations.len(), 1);
        assert!(tick.summaries.contains_key("red"));
    }
    assert!(t.exchanges.iter().any(|x| x.tier == Tier::Tactical));
}

#[test]
fn backend_failure_is_recorded_and_the_batch_goes_on() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("rules.json");
    // Enough to score memories but nothing to summarize with.
    std::fs::write(&script, r#"[{"match": "score", "reply": "4"}]"#).unwrap();
    let mut cfg = ExperimentConfig::new(Scenario::standard(), PolicyKind::Gwa, PolicyKind::Rule);
    cfg.script = Some(script);
    cfg.episodes = 2;
    let out = run(&cfg);
    assert_eq!(out.report.completed, 0);
    assert_eq!(out.report.failures.len(), 2);
    let t = &out.transcripts[0];
    assert!(t.error.as_deref().unwrap().contains("red side"));
    assert!(!t.exchanges.is_empty(), "partial transcript is kept");
}

#[test]
fn empty_batch_writes_empty_outputs() {
    let mut cfg = ExperimentConfig::new(Scenario::standard(), PolicyKind::Rule, PolicyKind::Random);
    cfg.episodes = 0;
    let out = run(&cfg);
    assert_eq!(out.report.completed, 0);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&out, dir.path()).unwrap();
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("transcripts").is_dir());
}

#[test]
fn outputs_land_on_disk() {
    let mut cfg = ExperimentConfig::new(duel(), PolicyKind::Gwa, PolicyKind::Rule);
    cfg.episodes = 2;
    let out = run(&cfg);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("transcripts/episode_0001.json").exists());
    assert!(dir.path().join("transcripts/episode_0001.prompts.jsonl").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["red"], "gwa");
    assert_eq!(report["win_rate_series"]["red:gwa"].as_array().unwrap().len(), 2);
}

#[test]
fn policy_names_parse() {
    for k in [PolicyKind::Gwa, PolicyKind::Gwae, PolicyKind::Rule, PolicyKind::Random] {
        assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
    }
    assert!("ppo".parse::<PolicyKind>().is_err());
    assert_eq!("CACHED".parse::<BackendProfile>().unwrap(), BackendProfile::Cached);
}
