//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_clark-ocone"));
    for (key, _) in std::env::vars() {
        if key.starts_with("CLARK_OCONE_") {
            c.env_remove(key);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data lines, comment lines dropped.
fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn slope(o: &Output) -> Option<f64> {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("# slope="))
        .and_then(|s| s.parse().ok())
}

fn column(o: &Output, name: &str) -> Vec<f64> {
    let r = rows(o);
    let i = r[0].iter().position(|h| h == name).unwrap();
    r[1..].iter().map(|row| row[i].parse().unwrap()).collect()
}

#[test]
fn validation_failures_exit_two() {
    for args in [
        &["expand", "--max-degree", "-1"][..],
        &["verify-bound", "--interp-r", "1.5"],
        &["rate-sweep", "--N1-list", "8,4"],
        &["expand", "--payoff", "nonsense:3"],
        &["expand", "--bogus"],
        &["simulate-hedge", "--samples", "0"],
    ] {
        let o = run(args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(o.stdout.is_empty(), "{args:?} wrote output");
    }
}

#[test]
fn expand_digital_degree_three() {
    let o = run(&["expand", "--payoff", "digital:0", "--max-degree", "3"]);
    assert!(o.status.success());
    let r = rows(&o);
    assert_eq!(r[0], ["multiindex", "coefficient"]);
    assert_eq!(r.len(), 4, "the zero d_2 coefficient is pruned");
    let values: Vec<(String, f64)> = r[1..]
        .iter()
        .map(|x| (x[0].clone(), x[1].parse().unwrap()))
        .collect();
    let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert_eq!(values[0].0, "()");
    assert!((values[0].1 - 0.5).abs() < 1e-15);
    assert_eq!(values[1].0, "(1)");
    assert!((values[1].1 - phi0).abs() < 1e-15);
    assert_eq!(values[2].0, "(3)");
    assert!((values[2].1 + phi0 / 6f64.sqrt()).abs() < 1e-15);
    // The resolved configuration is echoed first.
    assert!(stdout(&o).starts_with("# command=expand\n"));
    assert!(stdout(&o).contains("# max-degree=3\n"));
}

#[test]
fn expand_constant_is_single_row() {
    let o = run(&["expand", "--payoff", "const:2.5", "--N0", "3"]);
    let r = rows(&o);
    assert_eq!(r.len(), 2);
    assert_eq!(r[1][0], "()");
    assert_eq!(r[1][1].parse::<f64>().unwrap(), 2.5);
}

#[test]
fn decompose_lists_mean_and_terms() {
    let o = run(&[
        "decompose",
        "--payoff",
        "poly:0,0,1",
        "--N0",
        "2",
        "--max-degree",
        "2",
    ]);
    assert!(o.status.success());
    let r = rows(&o);
    assert_eq!(r[0], ["slot", "order", "multiindex", "coefficient"]);
    assert_eq!(&r[1][..3], ["0", "0", "()"]);
    let keys: Vec<(&str, &str, &str)> = r[2..].iter().map(|x| (&*x[0], &*x[1], &*x[2])).collect();
    assert_eq!(
        keys,
        [("1", "2", "()"), ("2", "1", "(1)"), ("2", "2", "()")]
    );
}

#[test]
fn randomized_bound_suite_holds() {
    let o = run(&[
        "verify-bound",
        "--payoff",
        "random:100",
        "--order-n",
        "1,2,3",
        "--sobolev-s",
        "-1,0,1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = rows(&o);
    assert_eq!(r.len(), 1 + 100 * 3 * 7 * 3);
    let holds = r[0].iter().position(|h| h == "holds").unwrap();
    assert!(r[1..].iter().all(|x| x[holds] == "true"));
}

#[test]
fn constant_payoff_has_zero_error() {
    let o = run(&["verify-bound", "--payoff", "const:1", "--N1-list", "1,3"]);
    assert!(o.status.success());
    assert!(column(&o, "lhs").iter().all(|&x| x == 0.0));
}

#[test]
fn quadratic_rate_sweep_slope() {
    let o = run(&["rate-sweep", "--payoff", "poly:0,0,1"]);
    assert!(o.status.success());
    let s = slope(&o).unwrap();
    assert!((-0.6..=-0.4).contains(&s), "slope {s}");
    let (e, b) = (column(&o, "error_norm"), column(&o, "bound"));
    assert!(e.iter().zip(&b).all(|(e, b)| e <= b));
}

#[test]
fn low_degree_rate_sweep_skips_fit() {
    let o = run(&["rate-sweep", "--payoff", "poly:1,2"]);
    assert!(o.status.success());
    assert!(column(&o, "error_norm").iter().all(|&x| x == 0.0));
    assert!(stdout(&o).contains("# slope=none\n"));
}

#[test]
fn hedge_linear_payoff_is_exact() {
    let o = run(&[
        "simulate-hedge",
        "--payoff",
        "poly:0,1",
        "--N1-list",
        "2,4,8",
        "--samples",
        "2000",
    ]);
    assert!(o.status.success());
    assert!(column(&o, "l2_estimate").iter().all(|&x| x.abs() < 1e-12));
}

#[test]
fn hedge_quadratic_payoff() {
    let o = run(&[
        "simulate-hedge",
        "--payoff",
        "poly:0,0,1",
        "--N1-list",
        "4",
        "--samples",
        "100000",
    ]);
    let (e, se) = (column(&o, "l2_estimate")[0], column(&o, "std_error")[0]);
    assert_eq!(column(&o, "N"), [4.0]);
    assert!(
        (e - std::f64::consts::FRAC_1_SQRT_2).abs() <= 3.0 * se,
        "{e} +- {se}"
    );
}

#[test]
fn hedge_occupation_time_rate() {
    let o = run(&[
        "simulate-hedge",
        "--payoff",
        "occupation",
        "--N1-list",
        "4,8,16,32,64",
    ]);
    assert!(o.status.success());
    let s = slope(&o).unwrap();
    assert!((-0.65..=-0.35).contains(&s), "slope {s}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate-hedge",
        "--payoff",
        "digital:0.2",
        "--N1-list",
        "2,4",
        "--samples",
        "5000",
    ];
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "3", "3"].iter().enumerate() {
        let out = dir.path().join(format!("{i}.csv"));
        let o = bin()
            .args(args)
            .args(["--workers", workers, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn environment_and_config_file_layers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "payoff = \"const:7\"\nN0 = 2\n").unwrap();

    let from_file = bin()
        .args(["expand", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(rows(&from_file)[1][1].parse::<f64>().unwrap(), 7.0);
    assert!(stdout(&from_file).contains("# N0=2\n"));

    let from_env = bin()
        .args(["expand", "--config"])
        .arg(&config)
        .env("CLARK_OCONE_PAYOFF", "const:3")
        .output()
        .unwrap();
    assert_eq!(rows(&from_env)[1][1].parse::<f64>().unwrap(), 3.0);

    let from_flag = bin()
        .args(["expand", "--payoff", "const:5", "--config"])
        .arg(&config)
        .env("CLARK_OCONE_PAYOFF", "const:3")
        .output()
        .unwrap();
    assert_eq!(rows(&from_flag)[1][1].parse::<f64>().unwrap(), 5.0);

    std::fs::write(&config, "colour = 3\n").unwrap();
    let bad = bin()
        .args(["expand", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn failed_run_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = bin()
        .args(["rate-sweep", "--order-n", "0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 0);
}

#[test]
fn expansion_file_source_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("f.csv");
    let first = bin()
        .args([
            "expand",
            "--payoff",
            "exp:0.5",
            "--max-degree",
            "6",
            "--out",
        ])
        .arg(&file)
        .output()
        .unwrap();
    assert!(first.status.success());
    let spec = format!("file:{}", file.display());
    let again = run(&["expand", "--payoff", &spec]);
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    let data = |text: &str| {
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(
        data(&stdout(&again)),
        data(&std::fs::read_to_string(Path::new(&file)).unwrap())
    );
}
