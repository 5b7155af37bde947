use std::fs;

use mictact::detect::{response_time_study, StudyConfig};
use mictact::pipeline::{
    checkpoint_path, collect_runs, detect_from_manifest, eval_run, preprocess, simulate_corpus, train_run, write_report,
    CorpusSpec, DragGrid, RunConfig, RunInputs, MANIFEST_FILE,
};
use mictact::signal::WindowConfig;
use mictact::sim::{SensorLayout, SimConfig};
use mictact::storage::{load_checkpoint, DatasetManifest, WindowDataset};
use mictact::{Error, Task};

#[test]
fn corpus_to_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let sim = SimConfig::default();
    let grid = DragGrid::standard(2, 5);
    let manifest = simulate_corpus(&CorpusSpec::Drags(grid.clone()), &sim, &corpus).unwrap();
    assert_eq!(manifest.episodes.len(), grid.len());
    assert_eq!(DatasetManifest::read(&corpus.join(MANIFEST_FILE)).unwrap(), manifest);

    let ds = preprocess(&corpus.join(MANIFEST_FILE), &WindowConfig::for_task(Task::Texture)).unwrap();
    let ds_path = dir.path().join("texture.mtwd");
    ds.write(&ds_path).unwrap();
    let ds = WindowDataset::read(&ds_path).unwrap();
    assert!(!ds.samples.is_empty());

    let run_dir = dir.path().join("run");
    let mut cfg = RunConfig::for_task(Task::Texture, &run_dir);
    cfg.folds = vec!["heldout-40".into()];
    cfg.train.max_epochs = 1;
    let layout = SensorLayout::default();
    let inputs = RunInputs {
        layout: &layout,
        position_run: None,
    };
    let trained = train_run(&ds, &cfg, inputs).unwrap();
    assert_eq!(trained.reports.len(), 1);
    let ckpt = load_checkpoint(&checkpoint_path(&run_dir, "heldout-40")).unwrap();
    assert_eq!(ckpt.config, cfg.model);

    let eval_dir = dir.path().join("eval");
    let evaluated = eval_run(&run_dir, &ds, &eval_dir, inputs).unwrap();
    assert_eq!(evaluated.reports, trained.reports);

    let collected = collect_runs(&[run_dir.as_path()]).unwrap();
    write_report(&dir.path().join("report"), &collected).unwrap();
    let summary = fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn tampered_episode_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let grid = DragGrid {
        velocities_mm_s: vec![40.0],
        ..DragGrid::standard(1, 1)
    };
    let manifest = simulate_corpus(&CorpusSpec::Drags(grid), &SimConfig::default(), dir.path()).unwrap();
    let victim = dir.path().join(&manifest.episodes[0].file);
    let mut bytes = fs::read(&victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&victim, bytes).unwrap();
    let err = preprocess(&dir.path().join(MANIFEST_FILE), &WindowConfig::for_task(Task::Velocity)).unwrap_err();
    assert!(matches!(err, Error::HashMismatch { .. }), "{err}");
}

#[test]
fn stored_taps_give_the_in_memory_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StudyConfig {
        episodes_per_cell: 4,
        ..StudyConfig::default()
    };
    let sim = SimConfig::default();
    simulate_corpus(&CorpusSpec::Taps(cfg.clone()), &sim, dir.path()).unwrap();
    let stored = detect_from_manifest(&dir.path().join(MANIFEST_FILE), &cfg).unwrap();
    let direct = response_time_study(&SensorLayout::default(), &sim.tap, &cfg).unwrap();
    assert_eq!(stored, direct);
}

#[test]
fn empty_manifest_preprocesses_to_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    DatasetManifest::new().write(&path).unwrap();
    let ds = preprocess(&path, &WindowConfig::for_task(Task::Texture)).unwrap();
    assert!(ds.samples.is_empty());
}
