//! End-to-end runs of the `brickwall` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brickwall_cli::GateFile;

const BIN: &str = env!("CARGO_BIN_EXE_brickwall");

fn brickwall(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn failure(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure:\n{}", String::from_utf8_lossy(&out.stdout));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, circuit: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"
[model]
kind = "ising1d"
size = 4
time = 0.5
g = 0.75
h = 0.3

{circuit}

[trust_region]
max_iter = 25
{extra}
"#
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const STRANG5: &str = "[circuit]\nlayers = 5\nwarm_start = { kind = \"splitting\", method = \"strang\", r = 2 }";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn optimize_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&a)]));
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&b)]));

    for name in ["gates.json", "trace.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let (header, rows) = read_csv(&a.join("trace.csv"));
    assert_eq!(&header[..6], ["iter", "f", "rescaled_f", "spectral_error", "radius", "accepted"]);
    assert_eq!(rows.len(), 26);
    let f: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for (row, &fv) in rows.iter().zip(&f) {
        let rescaled: f64 = row[2].parse().unwrap();
        assert!((rescaled - (fv + 16.0) / 16.0).abs() < 1e-15);
    }

    let file = GateFile::read(&a.join("gates.json")).unwrap();
    assert_eq!(file.num_layers(), 5);
    assert!(file.recompute_metrics().unwrap().max_deviation(&file.metrics) <= 1e-10);
    let text = std::fs::read_to_string(a.join("gates.json")).unwrap();
    assert_eq!(GateFile::from_json(&text).unwrap().to_json().unwrap(), text);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let warm = summary["warm_start_metrics"]["spectral"].as_f64().unwrap();
    let last = summary["final_metrics"]["spectral"].as_f64().unwrap();
    assert!(last <= warm);
}

#[test]
fn benchmark_lists_splitting_and_optimized_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "");
    let out = dir.path().join("out");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&out)]));
    let extra = "[benchmark]\nmethods = [\"strang\", \"suzuki4\", \"mclachlan4\"]\nsteps = [1, 2, 4]\ngatefiles = [\"out/gates.json\"]";
    let cfg = write_config(dir.path(), "b.toml", "", extra);
    ok(&brickwall(&["benchmark", "--config", s(&cfg), "--out", s(&out)]));

    let (header, rows) = read_csv(&out.join("benchmark.csv"));
    assert_eq!(&header[..6], ["method", "r", "s", "n", "spectral", "frobenius"]);
    assert_eq!(rows.len(), 10);
    for chunk in rows[..9].chunks(3) {
        let errs: Vec<f64> = chunk.iter().map(|r| r[4].parse().unwrap()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{chunk:?}");
        for row in chunk {
            let (r, s, n): (usize, usize, usize) = (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap());
            assert_eq!(n, (s - 1) * r + 1);
        }
    }
    assert!(rows[..3].iter().all(|r| r[3] == (2 * r[1].parse::<usize>().unwrap() + 1).to_string()));
    let opt = &rows[9];
    assert_eq!(opt[0], "optimized");
    assert_eq!((opt[1].as_str(), opt[2].as_str(), opt[3].as_str()), ("", "", "5"));
    let strang_r2: f64 = rows[1][4].parse().unwrap();
    assert!(opt[4].parse::<f64>().unwrap() <= strang_r2);
}

#[test]
fn extend_reports_errors_and_light_cone_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "\n[extend]\nsizes = [6, 8]");
    let out = dir.path().join("out");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&out)]));
    let run = brickwall(&["extend", "--config", s(&cfg), "--out", s(&out)]);
    ok(&run);
    assert!(String::from_utf8_lossy(&run.stderr).contains("warning: light cone"));

    let (_, rows) = read_csv(&out.join("extend.csv"));
    let sizes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(sizes, ["4", "6", "8"]);
    let stored = GateFile::read(&out.join("gates.json")).unwrap().metrics.spectral;
    let first: f64 = rows[0][5].parse().unwrap();
    assert!((first - stored).abs() <= 1e-12);

    // explicit flags override the config
    let run = brickwall(&["extend", "--gatefile", s(&out.join("gates.json")), "--sizes", "6", "--out", s(&out)]);
    ok(&run);
    assert_eq!(read_csv(&out.join("extend.csv")).1.len(), 2);
}

#[test]
fn extend_refuses_sizes_beyond_the_dimension_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "");
    let out = dir.path().join("out");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&out)]));
    let err = failure(&brickwall(&["extend", "--gatefile", s(&out.join("gates.json")), "--sizes", "14", "--out", s(&out)]));
    assert!(err.contains("above the cap"), "{err}");
    let err = failure(&brickwall(&["extend", "--gatefile", s(&out.join("gates.json")), "--sizes", "2", "--out", s(&out)]));
    assert!(err.contains("smaller than the optimization size"), "{err}");
}

#[test]
fn bootstrap_continues_from_a_gate_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "");
    let small = dir.path().join("small");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&small)]));
    let boot = "[circuit]\nlayers = 7\nwarm_start = { kind = \"bootstrap\", gatefile = \"small/gates.json\" }";
    let cfg = write_config(dir.path(), "boot.toml", boot, "");
    let big = dir.path().join("big");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&big)]));
    let f_small = GateFile::read(&small.join("gates.json")).unwrap().metrics.f;
    let f_big = GateFile::read(&big.join("gates.json")).unwrap().metrics.f;
    assert!(f_big <= f_small + 1e-12);

    let bad = "[circuit]\nlayers = 9\nwarm_start = { kind = \"bootstrap\", gatefile = \"small/gates.json\" }";
    let cfg = write_config(dir.path(), "bad.toml", bad, "");
    let err = failure(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&big)]));
    assert!(err.contains("has 5 layers"), "{err}");

    let missing = "[circuit]\nlayers = 7\nwarm_start = { kind = \"bootstrap\", gatefile = \"nowhere.json\" }";
    let cfg = write_config(dir.path(), "missing.toml", missing, "");
    let err = failure(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&big)]));
    assert!(err.contains("cannot read gate file"), "{err}");
}

#[test]
fn seed_controls_random_warm_starts() {
    let dir = tempfile::tempdir().unwrap();
    let random = "[circuit]\nlayers = 3\nwarm_start = { kind = \"random\" }";
    let cfg = write_config(dir.path(), "c.toml", random, "");
    let gates = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&out), "--seed", seed]));
        std::fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    assert_eq!(gates("7", "a"), gates("7", "b"));
    assert_ne!(gates("7", "c"), gates("8", "d"));
}

#[test]
fn invalid_configs_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = "[circuit]\nlayers = 6\nwarm_start = { kind = \"splitting\", method = \"strang\", r = 2 }";
    let cfg = write_config(dir.path(), "c.toml", wrong, "");
    let err = failure(&brickwall(&["optimize", "--config", s(&cfg)]));
    assert!(err.contains("error:") && err.contains("circuit.layers = 6"), "{err}");

    let ladder_method = "[circuit]\nlayers = 5\nwarm_start = { kind = \"splitting\", method = \"strang3\", r = 1 }";
    let cfg = write_config(dir.path(), "d.toml", ladder_method, "");
    let err = failure(&brickwall(&["optimize", "--config", s(&cfg)]));
    assert!(err.contains("partitions"), "{err}");

    let err = failure(&brickwall(&["optimize"]));
    assert!(err.contains("--config"), "{err}");
    let err = failure(&brickwall(&["optimize", "--config", s(&dir.path().join("absent.toml"))]));
    assert!(err.contains("cannot read config"), "{err}");
}

#[test]
fn verify_passes_and_checks_gate_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", STRANG5, "");
    let out = dir.path().join("out");
    ok(&brickwall(&["optimize", "--config", s(&cfg), "--out", s(&out)]));
    let stdout = ok(&brickwall(&["verify", "--seed", "3", "--gatefile", s(&out.join("gates.json"))]));
    assert!(stdout.lines().count() >= 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");

    let path = out.join("gates.json");
    let mut file = GateFile::read(&path).unwrap();
    file.metrics.spectral += 1e-6;
    file.write(&path).unwrap();
    let run = brickwall(&["verify", "--gatefile", s(&path)]);
    failure(&run);
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL  stored metrics"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = brickwall_cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            assert!(c.circuit.is_some());
            count += 1;
        }
    }
    assert!(count >= 4);
}
