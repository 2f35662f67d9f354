use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kolmo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmo"))
        .args(args)
        .output()
        .expect("spawn kolmo")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn smoke_config(dir: &Path) -> PathBuf {
    let p = dir.join("smoke.toml");
    std::fs::write(
        &p,
        "[domain]\nm = 1\nM = 1.0\nfamily = \"flat\"\n\n[simulation]\nsamples = 2000\nseed = 3\n\n\
         [experiment]\nscales = [0.25, 0.125, 0.0625, 0.03125]\nresolution = 0.5\n",
    )
    .unwrap();
    p
}

#[test]
fn kernel_eval_at_unit_time() {
    let o = kolmo(&["kernel", "eval", "--lambda", "1", "--t", "1"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    // Gaussian with covariance C(1), det 1/12, at its mean
    let want = 12f64.sqrt() / (2.0 * std::f64::consts::PI);
    assert!((v - want).abs() < 1e-14, "{v}");
}

#[test]
fn geom_compose_follows_the_group_law() {
    let o = kolmo(&["geom", "compose", "--p", "1,2,0,1", "--q", "1,1,1,0.5"]);
    assert!(o.status.success());
    // y = 0 + 1 - 0.5 * 2
    assert_eq!(stdout(&o).trim(), "1,3,0,1.5");
}

#[test]
fn bad_input_exits_with_usage_code() {
    assert_eq!(kolmo(&["bogus"]).status.code(), Some(2));
    assert_eq!(kolmo(&["geom", "norm", "--p", "1,x,0,0"]).status.code(), Some(2));
    assert_eq!(
        kolmo(&["geom", "dilate", "--p", "1,0,0,0", "--r", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chain.csv");
    std::fs::write(&out, "keep").unwrap();
    let args = [
        "chains",
        "connect",
        "--start",
        "1,0,0,1",
        "--end",
        "1,0,0,0",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(kolmo(&args).status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "keep");
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(kolmo(&forced).status.success());
    assert_ne!(std::fs::read_to_string(&out).unwrap(), "keep");
}

#[test]
fn invalid_config_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[domain]\nm = 1\nM = 1.0\nfamily = \"flat\"\n[experiment]\nscalez = [0.1]\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = kolmo(&[
        "verify",
        "carleson",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn verify_reruns_are_byte_identical_and_report_renders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = kolmo(&[
            "-q",
            "verify",
            "doubling",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));

    let csv = dir.path().join("rows.csv");
    let o = kolmo(&[
        "report",
        "--input",
        dir.path().join("a.json").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("check \"doubling\""));
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.lines().any(|l| l.starts_with("scale,anchor,quantity")));
}

#[test]
fn seed_override_changes_the_bank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());
    let hit = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = kolmo(&[
            "-q",
            "--seed",
            seed,
            "simulate",
            "hit",
            "--config",
            cfg.to_str().unwrap(),
            "--start",
            "1,0.5,0,0.5",
            "--samples",
            "500",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(hit("5", "a.csv"), hit("5", "b.csv"));
    assert_ne!(hit("5", "a2.csv"), hit("6", "c.csv"));
}
