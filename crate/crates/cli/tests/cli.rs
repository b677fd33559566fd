use std::process::{Command, Output};

fn rbm_qst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbm-qst")).args(args).output().unwrap()
}

#[test]
fn gen_data_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = rbm_qst(&[
        "gen-data",
        "--out-dir",
        out,
        "--seed",
        "4",
        "--set",
        "n_qubits=4",
        "--set",
        "pool_size=100",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["dataset.txt", "energies.csv", "stats.csv", "manifest.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# command gen-data\n"));
    assert!(manifest.contains("\nseed = 4\n"));
    assert!(manifest.contains("\nn_qubits = 4\n"));

    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("manifest.txt");
    let res = rbm_qst(&[
        "gen-data",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    for f in ["dataset.txt", "energies.csv", "stats.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        rbm_qst(&["gen-data", "--out-dir", out, "--set", "colour=red"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rbm_qst(&["gen-data", "--out-dir", out, "--set", "repeats=0"])
            .status
            .code(),
        Some(2)
    );
    let cfg = dir.path().join("bad.txt");
    std::fs::write(&cfg, "seed = 1\nnot a line\n").unwrap();
    assert_eq!(
        rbm_qst(&["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(rbm_qst(&["spectrum", "--out-dir", out]).status.code(), Some(2));
}

#[test]
fn unmet_criterion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let res = rbm_qst(&[
        "train",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--set",
        "n_qubits=4",
        "--set",
        "n_hidden=1",
        "--set",
        "pool_size=500",
        "--set",
        "n_samples=2000",
        "--set",
        "epoch_budget=0",
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(dir.path().join("model.txt").exists());
}

#[test]
fn io_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = rbm_qst(&["symmetry", "--out-dir", out, "--set", "model=/nonexistent/model.txt"]);
    assert_eq!(res.status.code(), Some(4));
    let res = rbm_qst(&["gen-data", "--config", "/nonexistent/config.txt", "--out-dir", out]);
    assert_eq!(res.status.code(), Some(4));
}
