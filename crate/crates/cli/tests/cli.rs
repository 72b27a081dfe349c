use std::fs;
use std::process::{Command, Output};

fn lvx(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lvx"));
    cmd.args(args).env_remove("LVX_SEED").env("RUST_LOG", "warn");
    if let Some(s) = seed_env {
        cmd.env("LVX_SEED", s);
    }
    cmd.output().unwrap()
}

#[test]
fn missing_dataset_fails_with_schema_hint() {
    let out = lvx(&["reproduce", "--table", "1", "--data", "/nonexistent/creditcard.csv"], None);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Time,V1"), "{stderr}");
}

#[test]
fn env_seed_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let spec = "n=200,anomaly=0.05,sep=2,d=3";
    assert!(lvx(&["gen-data", "--synthetic", spec, "--seed", "11", "--out", a.to_str().unwrap()], None).status.success());
    assert!(lvx(&["gen-data", "--synthetic", spec, "--out", b.to_str().unwrap()], Some("11")).status.success());
    assert!(lvx(&["gen-data", "--synthetic", spec, "--seed", "12", "--out", c.to_str().unwrap()], Some("11")).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn score_rejects_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(lvx(&["gen-data", "--synthetic", "n=100,anomaly=0.1,sep=3,d=4", "--out", &p("d4.csv")], None));
    ok(lvx(&["gen-data", "--synthetic", "n=100,anomaly=0.1,sep=3,d=3", "--out", &p("d3.csv")], None));
    ok(lvx(
        &["train", "--method", "LinearRaw_E10", "--data", &p("d4.csv"), "--epochs-clf", "1", "--out", &p("m.lvxp")],
        None,
    ));
    let out = lvx(&["score", "--model", &p("m.lvxp"), "--data", &p("d3.csv"), "--out", &p("o.csv")], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("D = 4"));
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!lvx(&["reproduce", "--table", "9", "--synthetic", "n=100,anomaly=0.1,sep=1"], None).status.success());
    assert!(!lvx(&["gen-data", "--synthetic", "n=10,anomaly=0.0,sep=1", "--out", "/tmp/x.csv"], None).status.success());
}
