use dbd_cli::SequenceFile;
use dbd_core::anneal::{optimize_population, AnnealConfig};
use dbd_core::synthetic::uniform_population;
use tempfile::TempDir;

#[test]
fn write_then_read_round_trips() {
    let pop = uniform_population(30, 3, 8).unwrap();
    let cfg = AnnealConfig::default().with_iterations(3_000).with_seed(2);
    let run = optimize_population(&pop, 5, &cfg).unwrap();
    let file = SequenceFile::from_result(&pop, &run, 1, cfg.iterations, 0.25);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("seq.json");
    file.write(&path).unwrap();
    let back = SequenceFile::read(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.resolve(&pop).unwrap(), run.best_sequence);
    assert_eq!(back.expected_energy, run.best_objective);
}

#[test]
fn resolve_rejects_foreign_populations() {
    let pop = uniform_population(12, 2, 1).unwrap();
    let cfg = AnnealConfig::default().with_iterations(100);
    let run = optimize_population(&pop, 3, &cfg).unwrap();
    let file = SequenceFile::from_result(&pop, &run, 1, 100, 0.0);
    assert!(file
        .resolve(&uniform_population(13, 2, 1).unwrap())
        .is_err());

    let mut renamed = file.clone();
    renamed.ids[0] = "stranger".into();
    assert!(renamed.resolve(&pop).is_err());
}
