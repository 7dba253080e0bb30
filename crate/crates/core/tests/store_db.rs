mod common;

use chrono::Utc;
use rlgame::network::init_network;
use rlgame::store::{
    game_rows, load_model, save_model, ExperimentRecord, ExperimentStore, Lineage, ModelFile, QueryFilter,
    SessionAggregate, StoreError,
};
use rlgame::{run_cc_session, Color, GameConfig, NetworkPair, SessionSpec, SessionStats};

fn fresh_pair(cfg: GameConfig, seed: u64) -> NetworkPair {
    NetworkPair::new(
        init_network(cfg, Color::White, seed, 0.01),
        init_network(cfg, Color::Black, seed + 1, 0.01),
    )
}

fn record_selfplay(store: &ExperimentStore, run_id: &str, games: u32, seed: u64) -> ExperimentRecord {
    let cfg = common::small();
    let mut nets = fresh_pair(cfg, 3);
    let inputs: Vec<String> = [&nets.white, &nets.black]
        .iter()
        .map(|n| store.put_model(&ModelFile::from_network(n, Lineage::default())).unwrap())
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    let spec = SessionSpec::self_play(cfg, games, seed);
    let started = Utc::now();
    let out = run_cc_session(&spec, &mut nets).unwrap();
    let lineage = Lineage {
        parents: inputs.clone(),
        sessions: vec![run_id.to_string()],
    };
    let outputs: Vec<String> = [&nets.white, &nets.black]
        .iter()
        .map(|n| {
            let f = ModelFile::from_network(n, lineage.clone());
            store.put_model(&f).unwrap();
            f.id
        })
        .collect();
    let record = ExperimentRecord::new(
        run_id,
        "selfplay",
        serde_json::to_value(&spec).unwrap(),
        vec![SessionAggregate {
            session: "selfplay".into(),
            stats: out.stats.clone(),
        }],
        started,
    )
    .with_models(inputs, outputs);
    store.record_experiment(&record, &game_rows(run_id, "selfplay", &out.records)).unwrap();
    record
}

#[test]
fn thousand_game_run_round_trips_through_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = ExperimentStore::open(dir.path()).unwrap();
    let record = record_selfplay(&store, "cc-1000", 1000, 5);

    let rows = store.game_rows("cc-1000").unwrap();
    assert_eq!(rows.len(), 1000);
    let stored = store.get_run("cc-1000").unwrap();
    assert_eq!(stored.aggregates.len(), 1);
    assert_eq!(store.reaggregate("cc-1000").unwrap(), stored.aggregates);
    assert_eq!(
        SessionStats::from_records(&rows.iter().map(|r| r.record.clone()).collect::<Vec<_>>()),
        stored.aggregates[0].stats
    );

    for id in record.input_models.iter().chain(&record.output_models) {
        let hits = store
            .query(&QueryFilter {
                model_id: Some(id.clone()),
                ..QueryFilter::default()
            })
            .unwrap();
        assert_eq!(hits.len(), 1, "{id}");
        store.get_model(id).unwrap();
    }
    assert!(store.dangling_models().unwrap().is_empty());
}

#[test]
fn rerunning_a_spec_reproduces_its_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let store = ExperimentStore::open(dir.path()).unwrap();
    let first = record_selfplay(&store, "again", 100, 8);
    let second = record_selfplay(&store, "again", 100, 8);
    assert_eq!(first.spec_hash, second.spec_hash);
    assert_eq!(first.aggregate_hash, second.aggregate_hash);
    assert_eq!(store.query(&QueryFilter::default()).unwrap().len(), 1);
}

#[test]
fn conflicting_spec_under_same_id_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let store = ExperimentStore::open(dir.path()).unwrap();
    let cfg = common::small();
    let mk = |games: u32| {
        let spec = SessionSpec::self_play(cfg, games, 1);
        ExperimentRecord::new("dup", "selfplay", serde_json::to_value(&spec).unwrap(), vec![], Utc::now())
    };
    store.record_experiment(&mk(10), &[]).unwrap();
    assert!(matches!(store.record_experiment(&mk(11), &[]), Err(StoreError::DuplicateRun(_))));
}

#[test]
fn model_files_survive_save_load_save() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GameConfig::default();
    let mut nets = fresh_pair(cfg, 40);
    run_cc_session(&SessionSpec::self_play(cfg, 5, 1), &mut nets).unwrap();
    let p1 = dir.path().join("a.model");
    let p2 = dir.path().join("b.model");
    let lineage = Lineage {
        parents: vec!["m-0000000000000000".into()],
        sessions: vec!["run".into()],
    };
    save_model(&p1, &nets.white, lineage.clone()).unwrap();
    let loaded = load_model(&p1).unwrap();
    save_model(&p2, &loaded.net, loaded.file.lineage.clone()).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(loaded.net, nets.white);

    let mut bytes = std::fs::read_to_string(&p1).unwrap();
    let at = bytes.find("\"weights\": \"").unwrap() + 20;
    let flipped = if &bytes[at..at + 1] == "A" { "B" } else { "A" };
    bytes.replace_range(at..at + 1, flipped);
    std::fs::write(&p1, bytes).unwrap();
    assert!(matches!(load_model(&p1), Err(StoreError::Integrity(_))));
}
