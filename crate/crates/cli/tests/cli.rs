use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tailsim(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailsim")).args(args).env("TAILSIM_OUT", out_root).output().expect("binary runs")
}

fn ok(args: &[&str], out_root: &Path) {
    let o = tailsim(args, out_root);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> BTreeMap<String, String> {
    json(&dir.join("manifest.json"))["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn eta_one_series_column_is_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["intermittency", "--F", "uniform", "--G", "uniform", "--eta", "1", "--oracle-only", "--tmax", "50"], tmp.path());
    let path = tmp.path().join("intermittency/pmf.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["T", "p_mc", "p_series", "p_lower", "p_upper", "se_mc"]);
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().all(|r| r[1].is_empty() && r[5].is_empty()));
    for (t, p) in column(&path, "p_series").into_iter().enumerate() {
        let want = 1.0 / ((t as f64 + 1.0) * (t as f64 + 2.0));
        assert!((p - want).abs() <= 1e-14 * want, "T={t}: {p} vs {want}");
    }
}

#[test]
fn zero_deadline_ltp_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["queue", "--policy", "edf", "--deadline", "point:x=0", "--rho", "0.9", "--snapshot-q", "8:12", "--horizon", "2e4", "--seed", "3"];
    ok(&args, tmp.path());
    let dir = tmp.path().join("queue");
    let lambda = json(&dir.join("manifest.json"))["config"]["lambda"].as_f64().unwrap();
    let width = 10.0 / lambda;
    let xs = column(&dir.join("ltp.csv"), "x");
    let fs = column(&dir.join("ltp.csv"), "F_analytic");
    for (x, f) in xs.iter().zip(&fs) {
        let want = ((x + width) / width).clamp(0.0, 1.0);
        assert!((f - want).abs() < 1e-12, "x={x}: {f} vs {want}");
    }
    let metrics = json(&dir.join("metrics.json"));
    assert!(metrics["ltp"]["ks"].as_f64().unwrap() < 0.15, "{metrics}");
    for name in ["tasks.csv", "ltp.csv", "metrics.json", "config.toml"] {
        assert!(checksums(&dir).contains_key(name), "{name}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let runs: [&[&str]; 6] = [
        &["langevin", "--seed", "4", "--steps", "50000", "--oracle"],
        &["graph", "cameo", "--n", "3000", "--seed", "4"],
        &["intermittency", "--eta", "0.7", "--episodes", "20000", "--tmax", "30", "--seed", "4"],
        &["queue", "--rho", "0.8", "--horizon", "5000", "--seed", "4", "--policy", "ros"],
        &["aging", "--a-max", "3", "--t-end", "5"],
        &["sandpile", "--L", "8,12", "--n", "3000", "--seed", "4"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    for args in runs {
        let (a, b) = (tmp.path().join(format!("{}-a", args[0])), tmp.path().join(format!("{}-b", args[0])));
        for dir in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", dir.to_str().unwrap()]);
            ok(&full, tmp.path());
        }
        let (ca, cb) = (checksums(&a), checksums(&b));
        assert_eq!(ca, cb, "{}", args[0]);
        for file in ca.keys() {
            assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn other_seed_other_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for (seed, dir) in [("1", "a"), ("2", "b")] {
        ok(&["queue", "--rho", "0.5", "--horizon", "1000", "--seed", seed, "--out", tmp.path().join(dir).to_str().unwrap()], tmp.path());
    }
    assert_ne!(checksums(&tmp.path().join("a"))["tasks.csv"], checksums(&tmp.path().join("b"))["tasks.csv"]);
}

#[test]
fn flags_override_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("q.toml");
    std::fs::write(&file, "experiment = \"queue\"\nseed = 9\n\n[queue]\nrho = 0.3\nhorizon = 2000\npolicy = \"fcfs\"\n").unwrap();
    let out = tmp.path().join("q");
    ok(&["queue", "--config", file.to_str().unwrap(), "--rho", "0.6", "--out", out.to_str().unwrap()], tmp.path());
    let config = &json(&out.join("manifest.json"))["config"];
    assert_eq!(config["rho"].as_f64().unwrap(), 0.6);
    assert_eq!(config["policy"], "fcfs");
    assert_eq!(config["horizon"].as_f64().unwrap(), 2000.0);

    // The echoed config reproduces the run.
    let again = tmp.path().join("again");
    ok(&["run", out.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()], tmp.path());
    assert_eq!(checksums(&out), checksums(&again));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.toml");
    std::fs::write(&file, "experiment = \"queue\"\nseed = 1\n[queue]\nrho = 0.5\npolcy = \"edf\"\n").unwrap();
    let o = tailsim(&["run", file.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("polcy"));

    let o = tailsim(&["queue", "--rho", "0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "missing seed");
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let o = tailsim(&["queue", "--rho", "0.5", "--seed", "1", "--service", "pareto:omega=0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = tailsim(&["aging", "--p", "power:c=1,q=1", "--mu", "0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aging:"));

    let o = tailsim(&["intermittency", "--eta", "0.5", "--seed", "1", "--bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_then_collect() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("sw");
    ok(&["sweep", "queue", "--seeds", "1..3", "--grid", "rho=0.4;0.7", "--set", "horizon=2000", "--jobs", "2", "--out", root.to_str().unwrap()], tmp.path());
    let report = json(&root.join("sweep.json"));
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    let merged = tmp.path().join("m.csv");
    ok(&["collect", root.to_str().unwrap(), "--file", "metrics.json", "--out", merged.to_str().unwrap()], tmp.path());
    let (header, rows) = read_csv(&merged);
    assert_eq!(&header[..3], ["cell", "seed", "rho"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r[2].as_str()).collect::<Vec<_>>(), ["0.4", "0.4", "0.7", "0.7"]);

    // A cell run alone with its seed matches the sweep's output.
    let solo = tmp.path().join("solo");
    ok(&["queue", "--rho", "0.7", "--horizon", "2000", "--seed", "2", "--out", solo.to_str().unwrap()], tmp.path());
    assert_eq!(checksums(&solo)["tasks.csv"], checksums(&root.join("cell-0003"))["tasks.csv"]);
}

#[test]
fn every_csv_column_is_documented() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["sandpile", "--L", "8", "--n", "500", "--seed", "1"], tmp.path());
    let dir = tmp.path().join("sandpile");
    for o in json(&dir.join("manifest.json"))["outputs"].as_array().unwrap() {
        let file = o["file"].as_str().unwrap();
        if file.ends_with(".csv") {
            let (header, _) = read_csv(&dir.join(file));
            let documented: Vec<&str> = o["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
            assert_eq!(header, documented);
            assert_eq!(header, ["s", "a", "t", "dissipated"]);
        }
    }
}

#[test]
fn file_counts_accept_exponent_form() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("i.toml");
    std::fs::write(&file, "experiment = \"intermittency\"\nseed = 2\n[intermittency]\neta = 0.5\nepisodes = 2e3\ntmax = \"2_0\"\n").unwrap();
    let out = tmp.path().join("i");
    ok(&["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
    let config = &json(&out.join("manifest.json"))["config"];
    assert_eq!(config["episodes"], 2000);
    assert_eq!(read_csv(&out.join("pmf.csv")).1.len(), 21);
}
