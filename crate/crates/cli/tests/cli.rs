use std::process::{Command, Output};

fn fhn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhn-pulse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eta_prints_the_ratio() {
    let out = fhn(&["eta", "--c0", "14.04", "--d", "5e-4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let eta: f64 = text.trim().trim_start_matches("eta = ").parse().unwrap();
    assert!((eta - 2.0 * 5e-4 * 14.04 * 14.04 / 0.25).abs() < 1e-6, "{text}");
}

#[test]
fn missing_model_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[model]\nd = 5e-4\ngamma = 0.0625\n").unwrap();
    let out = fhn(&["minimize", "--config", cfg.to_str().unwrap(), "--c", "14"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn out_of_range_beta_is_rejected() {
    let out = fhn(&["minimize", "--d", "5e-4", "--gamma", "0.0625", "--beta", "0.6", "--c", "14"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_checkpoint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, "not a checkpoint\n").unwrap();
    let out = fhn(&["stability", path.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn minimize_writes_a_reloadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let body = format!(
        "[model]\nd = 5e-4\ngamma = 0.0625\nbeta = 0.25\n[grid]\nh = 0.05\ndomain_length = 60.0\n[paths]\noutput_dir = {:?}\ncheckpoint_dir = {:?}\n",
        dir.path().join("out"),
        dir.path().join("ck")
    );
    std::fs::write(&cfg, body).unwrap();
    let out = fhn(&["minimize", "--config", cfg.to_str().unwrap(), "--c", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = std::fs::read_dir(dir.path().join("ck")).unwrap().next().unwrap().unwrap().path();
    let loaded = fhn_core::io::load_checkpoint::<f64>(&ckpt).unwrap();
    assert_eq!(loaded.meta.c, 10.0);
    assert_eq!(loaded.profile.samples().len(), 1201);
}

#[test]
fn verify_passes() {
    let out = fhn(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
