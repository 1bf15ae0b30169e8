//! Dataset → training → checkpoint → evaluation through the public API.

use qtw_core::backbones::{BackboneKind, ModelConfig};
use qtw_core::eval::{evaluate_model, read_report, write_report};
use qtw_core::heads::HeadKind;
use qtw_core::model::Model;
use qtw_core::sim::{generate_dataset, DatasetSpec, LoadedDataset, TEST_FILE};
use qtw_core::train::{fit, read_checkpoint, write_checkpoint, Sequence, TrainRunConfig};
use qtw_core::Error;

fn spec() -> DatasetSpec {
    DatasetSpec { n_train: 12, n_test: 4, ..DatasetSpec::default().with_steps(120) }
}

#[test]
fn train_checkpoint_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&spec(), dir.path(), 2).unwrap();
    let ds = LoadedDataset::load(dir.path()).unwrap();
    assert_eq!(ds.train.len(), 12);
    let stats = &manifest.stats;
    let seqs: Vec<Sequence> = ds.train.trajectories.iter().map(|t| Sequence::from_trajectory(t, stats)).collect();

    for head in [HeadKind::Kraus, HeadKind::Direct] {
        let model = Model::new(ModelConfig::new(BackboneKind::Lstm, 6), head).unwrap();
        let run = TrainRunConfig { epochs: 2, batch_size: 4, ..Default::default() };
        let out = fit(&model, &run, &seqs, Some(stats), Some(&manifest.train.sha256)).unwrap();
        assert!(out.diverged.is_none());
        assert_eq!(out.log.len(), 2);

        let ck_path = dir.path().join(format!("{}.qckp", head.as_str()));
        write_checkpoint(&ck_path, &out.best).unwrap();
        let ck = read_checkpoint(&ck_path).unwrap();
        assert_eq!(ck, out.best);
        let restored = ck.model().unwrap();

        let report = evaluate_model(&restored, &ck.params, stats, &ds.test, &manifest.test.sha256).unwrap();
        assert_eq!(report.aggregate.n_traj, 4);
        assert_eq!(report.aggregate.physical, head == HeadKind::Kraus);
        let rp = dir.path().join("report.json");
        write_report(&rp, &report).unwrap();
        assert_eq!(read_report(&rp).unwrap(), report);
    }
}

#[test]
fn tampered_test_file_fails_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&spec(), dir.path(), 1).unwrap();
    let path = dir.path().join(TEST_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(LoadedDataset::load(dir.path()), Err(Error::Digest(_))));
}
