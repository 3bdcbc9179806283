use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = "\
[mesh]
nx = 3
ny = 3
nz = 3
distortion = 0.1
seed = 3

[boundary]
left = pressure roller
top = noflow traction

[material]
biot = 0.8
biot_modulus = 1e9

[time]
dt = 1
n_steps = 2

[coupling]
tol = 1e-10

[scenario]
initial_pressure = 1e6
pressure.left = 0
traction.top = 0 0 -8e5
";

fn poro(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_poro"))
        .args(args)
        .env("PORO_THREADS", threads)
        .output()
        .expect("spawn poro")
}

fn run_into(dir: &Path, cfg: &Path, threads: &str) {
    let out = poro(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()], threads);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("case.cfg");
    fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&a, &cfg, "1");
    run_into(&b, &cfg, "4");
    for name in ["reports.csv", "steps.csv"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn report_summarises_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("case.cfg");
    fs::write(&cfg, CONFIG).unwrap();
    let dir = tmp.path().join("out");
    run_into(&dir, &cfg, "2");
    let out = poro(&["report", dir.join("reports.csv").to_str().unwrap()], "2");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("step 1: iterations"));
    assert!(text.contains("step 2: iterations"));
    assert!(text.contains("contraction holds"));
}

#[test]
fn exit_codes() {
    assert_eq!(poro(&[], "1").status.code(), Some(2));
    assert_eq!(poro(&["run", "/definitely/missing.cfg"], "1").status.code(), Some(2));
    assert_eq!(poro(&["verify", "--filter", "skempton"], "0").status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[mesh]\nnx = 0\n").unwrap();
    let out = poro(&["run", bad.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(1));
    let ok = poro(&["verify", "--filter", "skempton"], "1");
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS"));
}
