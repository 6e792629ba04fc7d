use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"[domain]
n = 2
extent = [-1.5, 1.5]
cells = 150
margin = 2

[flow]
alpha = 1.5
h = 0.01
n_steps = 10
engine = "threshold"

[norm]
kind = "euclidean"

[forcing]
kind = "zero"

[initial]
shape = "ball"
center = [0.0, 0.0]
radius = 1.0

[output]
dir = "out"
cadence = 5
formats = []

[scenario]
name = "shrink_circle"
"#;

fn frontflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontflow"))
        .args(args)
        .env_remove("FRONTFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let out = frontflow(&["run", &cfg, "--print-config"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), MINIMAL);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (MINIMAL.replace("alpha = 1.5", "alpha = 2.0"), "alpha must be in [1,2)"),
        (MINIMAL.replace("[norm]\nkind = \"euclidean\"\n", ""), "norm"),
        (MINIMAL.replace("cadence = 5", "cadence = 5\ncolour = 1"), "colour"),
        (MINIMAL.replace("h = 0.01", "h = 0.0001"), "kernel length"),
        (
            MINIMAL
                .replace("kind = \"zero\"", "kind = \"affine\"\ngradient = [1.0, 0.0]\noffset = 0.0\ntimes = [0.0, 1.0]\nvalues = [1.0, 2.0]")
                .replace("\"shrink_circle\"", "\"convexity\""),
            "only on time",
        ),
        (
            MINIMAL
                .replace("kind = \"zero\"", "kind = \"constant\"\nvalue = 0.0")
                .replace("\"shrink_circle\"", "\"wulff\""),
            "c > 0",
        ),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{k}.toml"), text);
        let outdir = dir.path().join(format!("out{k}"));
        let out = frontflow(&["run", &cfg, "--outdir", outdir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "case {k}");
        assert!(stderr(&out).contains(needle), "case {k}: {}", stderr(&out));
        assert!(!outdir.join("summary.csv").exists());
    }
    let out = frontflow(&["run", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_criterion_exits_one_and_still_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    // far too coarse for the circle law
    let cfg = write(dir.path(), "coarse.toml", &MINIMAL.replace("n_steps = 10", "n_steps = 100"));
    let outdir = dir.path().join("out");
    let out = frontflow(&["run", &cfg, "--outdir", outdir.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let summary = fs::read_to_string(outdir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,value,relation,threshold,pass\n"));
    assert!(summary.contains("max_rel_radius_err,"));
    assert!(summary.contains(",false\n"));
    assert!(outdir.join("series.csv").exists());
    assert!(!outdir.join("frame_000000.pgm").exists());
}

#[test]
fn scenario_override_and_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace("kind = \"euclidean\"", "kind = \"pnorm\"\nq = 4.0")
        .replace("formats = []", "formats = [\"pgm\", \"grid\"]");
    let cfg = write(dir.path(), "report.toml", &text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_frontflow"))
            .args(["run", &cfg, "--scenario", "anisotropy_report", "--outdir", d.to_str().unwrap()])
            .env("FRONTFLOW_THREADS", "2")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for f in ["series.csv", "summary.csv", "anisotropy.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let out = frontflow(&["run", &cfg, "--scenario", "no_such_thing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn frames_follow_the_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace("formats = []", "formats = [\"pgm\", \"grid\"]")
        .replace("\"shrink_circle\"", "\"convexity\"");
    let cfg = write(dir.path(), "frames.toml", &text);
    let outdir = dir.path().join("out");
    let out = frontflow(&["run", &cfg, "--outdir", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for step in [0, 5, 10] {
        assert!(outdir.join(format!("frame_{step:06}.pgm")).exists());
        assert!(outdir.join(format!("frame_{step:06}.grid")).exists());
    }
    assert!(!outdir.join("frame_000003.pgm").exists());
    let pgm = fs::read(outdir.join("frame_000000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n150 150\n255\n"));
}

#[test]
fn shipped_configs_are_valid_and_canonical() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let out = frontflow(&["run", path.to_str().unwrap(), "--print-config"]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), stderr(&out));
        assert_eq!(out.stdout, fs::read(&path).unwrap(), "{} is not canonical", path.display());
        seen += 1;
    }
    assert_eq!(seen, 8);
}
