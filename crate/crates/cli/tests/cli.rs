use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kbh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbh"))
        .args(args)
        .output()
        .unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_same_files(expected: &Path, actual: &Path) {
    for name in ["g_hat.csv", "c_hat.csv", "theta.csv", "trace.csv"] {
        let e = std::fs::read_to_string(expected.join(name)).unwrap();
        let a = std::fs::read_to_string(actual.join(name)).unwrap();
        assert_eq!(e, a, "{name} differs from {}", expected.display());
    }
}

#[test]
fn identify_reproduces_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for estimator in ["kbh", "baseline"] {
        let out = dir.path().join(estimator);
        let o = kbh(&[
            "identify",
            s(&data("golden.csv")),
            "--out",
            s(&out),
            "--estimator",
            estimator,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_same_files(&data(&format!("golden_{estimator}")), &out);
    }
}

#[test]
fn both_estimators_share_one_schema() {
    for name in ["g_hat.csv", "c_hat.csv", "theta.csv", "trace.csv"] {
        let header = |d: &str| {
            std::fs::read_to_string(data(d).join(name))
                .unwrap()
                .lines()
                .next()
                .unwrap()
                .to_string()
        };
        assert_eq!(header("golden_kbh"), header("golden_baseline"), "{name}");
    }
    let g = std::fs::read_to_string(data("golden_kbh/g_hat.csv")).unwrap();
    assert_eq!(g.lines().count(), 1 + 15);
    let c = std::fs::read_to_string(data("golden_baseline/c_hat.csv")).unwrap();
    assert_eq!(c.lines().count(), 1 + 7);
}

#[test]
fn parse_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "u,y\n1,2\n3,4\n5\n6,7\n").unwrap();
    let o = kbh(&[
        "identify",
        s(&p),
        "--out",
        s(&dir.path().join("o")),
        "--n",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.csv:4:"), "{err}");
}

#[test]
fn numerical_failures_report_the_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.csv");
    let rows: String = (0..40)
        .map(|t| format!("1,{}\n", (t as f64 * 0.7).sin()))
        .collect();
    std::fs::write(&p, format!("u,y\n{rows}")).unwrap();
    let o = kbh(&[
        "identify",
        s(&p),
        "--out",
        s(&dir.path().join("o")),
        "--n",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("iteration"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(kbh(&["identify"]).status.code(), Some(1));
    assert_eq!(kbh(&["frobnicate"]).status.code(), Some(1));
    let o = kbh(&[
        "identify",
        s(&data("golden.csv")),
        "--out",
        "x",
        "--estimator",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(kbh(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_then_campaign_then_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("sim.csv");
    let o = kbh(&[
        "simulate",
        "--out",
        s(&ds),
        "-N",
        "80",
        "--n",
        "10",
        "--seed",
        "2",
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("sim.truth.csv").exists());

    let cfg = dir.path().join("c.txt");
    std::fs::write(
        &cfg,
        "nu = 4\nsnr = 10\nN = 120\nn = 15\nruns = 2\nmax_iter = 20\n",
    )
    .unwrap();
    let camp = |name: &str| {
        let out = dir.path().join(name);
        let o = kbh(&[
            "campaign",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--parallelism",
            "2",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("runs.csv")).unwrap()
    };
    assert_eq!(camp("a"), camp("b"));
    let o = kbh(&["plotdata", s(&dir.path().join("a"))]);
    assert!(o.status.success());
    assert!(dir.path().join("a/plot/boxplot.csv").exists());

    let o = kbh(&[
        "campaign",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("z")),
        "--runs",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    let o = kbh(&["plotdata", s(&dir.path().join("missing"))]);
    assert_ne!(o.status.code(), Some(0));
}
