use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[problem]
n_dim = 3
a1 = 1.0
a2 = 1.0

[weight1]
family = "constant"
c = 1.0

[weight2]
family = "constant"
c = 1.0

[nonlinearity]
family = "power_pair"
alpha = 1.0
beta = 1.0

[numerics]
r_max = 2.0
grid_points = 512
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ko-radial-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ko-radial"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn solve_writes_csv() {
    let dir = scratch("solve");
    let cfg = write_config(&dir, CONFIG);
    let csv = dir.join("out.csv");
    let set = format!("output.csv_path=\"{}\"", csv.display());
    let out = run(&["solve", "--config", &cfg, "--set", &set]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("verdict: BothLarge"));
    let table = std::fs::read_to_string(&csv).unwrap();
    let row = table
        .lines()
        .find(|l| l.starts_with("1.0000000000000000e0,"))
        .unwrap();
    let u: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((u - 1.17520).abs() < 1e-5);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let cfg = write_config(&dir, CONFIG);
    let code = |extra: &[&str]| {
        let mut args = vec!["solve", "--config", cfg.as_str()];
        for s in extra {
            args.extend(["--set", s]);
        }
        run(&args).status.code()
    };
    assert_eq!(code(&["numerics.r_max=-1"]), Some(1));
    assert_eq!(code(&["numerics.max_iter=2"]), Some(2));
    assert_eq!(
        code(&[
            "nonlinearity.alpha=3",
            "nonlinearity.beta=3",
            "numerics.r_max=20"
        ]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "nonlinearity.alpha=3",
            "nonlinearity.beta=3",
            "weight1.family=power_decay",
            "weight1.c=0.01",
            "weight1.sigma=4",
        ]),
        Some(4)
    );
    assert_eq!(
        run(&["classify", "--config", "/nonexistent/run.toml"])
            .status
            .code(),
        Some(1)
    );
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn check_envelope_and_sweep() {
    let dir = scratch("sweep");
    let cfg = write_config(
        &dir,
        &format!("{CONFIG}\n[sweep]\n\"nonlinearity.alpha\" = [0.5, 1.0]\n"),
    );
    let out = run(&["check-envelope", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("holds: true"));

    let csv = dir.join("sweep.csv");
    let set = format!("output.csv_path=\"{}\"", csv.display());
    let out = run(&["sweep", "--config", &cfg, "--set", &set]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("cell,nonlinearity.alpha,exit_code,verdict"));
    assert!(lines[1].starts_with("0,0.5,0,BothLarge,T1"));
    std::fs::remove_dir_all(dir).unwrap();
}
