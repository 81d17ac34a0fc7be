use std::process::{Command, Output};

fn flipwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flipwalk")).args(args).output().unwrap()
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn dirac_prior_is_recovered_exactly() {
    let out = flipwalk(&["denoise-sweep", "--prior", "dirac", "--vertex", "+-+-", "--d", "4"]);
    assert!(out.status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 20);
    for r in rows {
        assert_eq!(num(&r[3]), 0.0);
        assert_eq!(num(&r[4]), 0.0);
    }
}

#[test]
fn multi_sweep_distance_does_not_grow_with_m() {
    let out = flipwalk(&["multi-sweep", "--d", "6", "--beta", "1", "--m", "1,3,5"]);
    assert!(out.status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 60);
    for group in rows.chunks(3) {
        let w: Vec<f64> = group.iter().map(|r| num(&r[4])).collect();
        assert!(w[0] >= w[1] && w[1] >= w[2], "alpha {}: {w:?}", group[0][2]);
    }
}

#[test]
fn default_bound_suite_passes() {
    let out = flipwalk(&["check-bounds"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&out);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[10] == "true"));
}

#[test]
fn failing_bound_exits_with_two_and_still_reports() {
    let out = flipwalk(&["check-bounds", "--prior", "mixture", "--beta", "1", "--d", "6", "--alpha", "1", "--m", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(rows(&out).iter().any(|r| r[2] == "denoise_multi" && r[10] == "false"));
}

#[test]
fn exit_codes() {
    assert_eq!(flipwalk(&["--help"]).status.code(), Some(0));
    assert_eq!(flipwalk(&["sample", "--bogus"]).status.code(), Some(3));
    assert_eq!(flipwalk(&["sample", "--alpha", "0"]).status.code(), Some(3));
    assert_eq!(flipwalk(&["sample", "--prior", "nope"]).status.code(), Some(3));
    assert_eq!(flipwalk(&["multi-sweep", "--d", ""]).status.code(), Some(3));
    assert_eq!(flipwalk(&["mixing-sweep", "--d", "13", "--alpha", "1"]).status.code(), Some(4));
    assert_eq!(
        flipwalk(&["learn", "--n", "10", "--epochs", "50", "--beta", "3", "--lr", "1e308"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("spec.json");
    std::fs::write(&config, r#"{"command": "multi-sweep", "d": [4], "beta": [1.0], "alpha": [0.5], "m": [1, 2]}"#).unwrap();
    let config = config.to_str().unwrap();

    let out = flipwalk(&["multi-sweep", "--config", config]);
    assert!(out.status.success());
    assert_eq!(rows(&out).len(), 2);

    let out = flipwalk(&["multi-sweep", "--config", config, "--m", "3"]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "3");

    assert_eq!(flipwalk(&["denoise-sweep", "--config", config]).status.code(), Some(3));
}

#[test]
fn learned_checkpoint_drives_the_sampler() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let losses = dir.path().join("loss.csv");
    let out = flipwalk(&[
        "learn", "--d", "4", "--n", "2000", "--epochs", "50", "--lr", "1", "--out",
        model.to_str().unwrap(), "--loss-out", losses.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let curve = std::fs::read_to_string(&losses).unwrap();
    assert_eq!(curve.lines().count(), 51);

    let out = flipwalk(&["sample", "--model", model.to_str().unwrap(), "--steps", "50", "--chains", "2"]);
    assert!(out.status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| num(&r[2]) < 16.0));
}

#[test]
fn tabular_prior_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("prior.csv");
    std::fs::write(&table, "index,prob\n0,0.1\n1,0.2\n2,0.3\n3,0.4\n").unwrap();
    let out = flipwalk(&["denoise-sweep", "--prior", "tabular", "--table", table.to_str().unwrap(), "--d", "2", "--alpha", "50"]);
    assert!(out.status.success());
    assert!(num(&rows(&out)[0][3]) < 1e-12);
    let out = flipwalk(&["denoise-sweep", "--prior", "tabular", "--table", table.to_str().unwrap(), "--d", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_schemas() {
    let cases: [(&[&str], &str); 5] = [
        (&["denoise-sweep", "--d", "2", "--alpha", "1"], "d,beta,alpha,wasserstein,mse,bound"),
        (&["multi-sweep", "--d", "2", "--alpha", "1"], "d,beta,alpha,m,wasserstein,mse,bound"),
        (&["mixing-sweep", "--d", "2", "--alpha", "1"], "d,beta,kind,eta,alpha,mixing_time,stationary_W"),
        (&["stationary-denoise", "--d", "2", "--alpha", "1"], "d,beta,kind,alpha,stationary_W,denoised_W"),
        (
            &["seq-sample", "--d", "2", "--runs", "20", "--steps", "2"],
            "d,beta,alpha,m,kind,runs,wasserstein,std_error,exact_wasserstein,bound",
        ),
    ];
    for (args, header) in cases {
        let out = flipwalk(args);
        assert!(out.status.success(), "{args:?}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next(), Some(header));
    }
}
