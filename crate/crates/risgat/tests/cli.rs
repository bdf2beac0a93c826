use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "dataset.n_ris=2",
    "dataset.m_p=8",
    "dataset.train_snr=-10:5:0",
    "dataset.test_snr=-10:10:0",
    "dataset.train_per_snr=10",
    "dataset.test_per_snr=4",
    "train.epochs=2",
    "train.patience=2",
    "train.batch_size=8",
    "eval.ber_snr=-10:5:-5",
    "eval.ber_n_ris=2",
    "eval.min_errors=10",
    "eval.max_bits=4096",
    "eval.band_models=2",
    "eval.doppler_hz=0,25000",
    "eval.quant_n_ris=2",
    "eval.quant_snr=-10",
    "eval.quant_bits=1,2",
    "eval.hist_bins=8",
];

fn risgat(dir: &Path, extra: &[&str], args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_risgat"));
    cmd.args(args).arg("--set").arg(format!("output_dir={}", dir.display()));
    for kv in TINY.iter().chain(extra) {
        cmd.arg("--set").arg(kv);
    }
    cmd.env("RUST_LOG", "warn").output().unwrap()
}

fn ok(out: Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_pipeline_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    ok(risgat(run, &[], &["gen-dataset"]));
    assert!(run.join("data/train/manifest.txt").exists());
    assert!(run.join("config.txt").exists());
    ok(risgat(run, &[], &["train"]));
    assert!(run.join("weights_n2.gatw").exists());
    let history = std::fs::read_to_string(run.join("history_n2.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    for (fig, file) in [
        ("fig5", "fig5_nmse.csv"),
        ("fig6", "fig6_doppler.csv"),
        ("fig7", "fig7_ber.csv"),
        ("fig8", "fig8_band.csv"),
        ("fig9", "fig9_bits.csv"),
        ("fig10", "fig10_sets.csv"),
        ("fig11", "fig11_hist.csv"),
    ] {
        ok(risgat(run, &["eval.estimator=gat"], &["eval", "--which", fig]));
        let text = std::fs::read_to_string(run.join(file)).unwrap();
        assert!(text.starts_with("# manifest_sha256 = "), "{file}");
        assert!(text.lines().any(|l| !l.starts_with('#')), "{file}");
    }
    let sets = std::fs::read_to_string(run.join("fig10_sets.csv")).unwrap();
    assert!(sets.contains("set3-2bit"));
}

#[test]
fn existing_dataset_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    ok(risgat(dir.path(), &[], &["gen-dataset"]));
    let again = risgat(dir.path(), &[], &["gen-dataset"]);
    assert_eq!(again.status.code(), Some(1));
    ok(risgat(dir.path(), &[], &["gen-dataset", "--force"]));
}

#[test]
fn missing_weights_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = risgat(dir.path(), &[], &["eval", "--which", "fig5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(risgat(dir.path(), &["train.lr=fast"], &["train"]).status.code(), Some(2));
    assert_eq!(risgat(dir.path(), &["no.such.key=1"], &["train"]).status.code(), Some(2));
}

#[test]
fn ber_report_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for workers in ["1", "4"] {
        ok(risgat(dir.path(), &[], &["eval", "--which", "fig7", "--workers", workers]));
        reports.push(std::fs::read(dir.path().join("fig7_ber.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
