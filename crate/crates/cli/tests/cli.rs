use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PAIR: &str = r#"
seed = 5

[backend]
kind = "pairstate"
n = 3
alpha = 1.0
beta = 1.5

[regions.a]
sites = [0]
[regions.b]
sites = [1, 2]
[regions.c]
sites = [3]

[rulers.arc]
a = "a"
b = "b"
c = "c"

[[experiments]]
kind = "exotic"
name = "exotic"

[[experiments]]
kind = "table"
name = "table"
partition = { kind = "circle" }
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-ruler"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn undefined_region_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &PAIR.replace("c = \"c\"", "c = \"missing\""));
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("rulers.arc.c") && err.contains("missing"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("typo = 1\n{PAIR}"));
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("typo"), "{}", stderr(&o));
}

#[test]
fn grid_outside_unit_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let o = run(&["scan-sigma", "--ruler", "arc", "--grid", "0:1.5:11"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`grid`"), "{}", stderr(&o));
}

#[test]
fn exotic_run_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let (o1, o2) = (dir.path().join("one"), dir.path().join("two"));
    assert_eq!(run(&["run"], &cfg, &o1).status.code(), Some(0));
    assert_eq!(run(&["run", "--jobs", "2"], &cfg, &o2).status.code(), Some(0));
    for name in ["exotic.json", "table.json", "summary.json"] {
        let (mut a, mut b) = (read_json(&o1.join(name)), read_json(&o2.join(name)));
        for v in [&mut a, &mut b] {
            v.as_object_mut().unwrap().remove("generated_at").expect("timestamp present");
        }
        assert_eq!(a, b, "{name}");
    }
    let rep = read_json(&o1.join("exotic.json"));
    assert_eq!(rep["config"], "pair.toml");
    assert_eq!(rep["seed"], 5);
    assert_eq!(rep["tolerance_profile"], "desk");
    assert_eq!(rep["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(rep["results"]["fixed_point_violated"], true);
    assert_eq!(
        std::fs::read(o1.join("table_table.csv")).unwrap(),
        std::fs::read(o2.join("table_table.csv")).unwrap()
    );
}

#[test]
fn csv_carries_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let out = dir.path().join("out");
    assert_eq!(run(&["run"], &cfg, &out).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("table_table.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let eta = row.split(',').nth(4).unwrap();
    let mantissa = eta.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{eta}");
}

#[test]
fn tolerance_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "strict.toml", &format!("{PAIR}\n[tolerances]\nsigma_ratio = 1e9\n"));
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL exotic"));
}

#[test]
fn scan_sidecar_records_the_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let out = dir.path().join("out");
    let o = run(&["scan-sigma", "--ruler", "arc", "--grid", "0.1:0.9:9"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("scan_arc.csv")).unwrap();
    let sigmas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(sigmas.len(), 9);
    let side = read_json(&out.join("scan_arc.json"));
    let min = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(side["sigma_min"].as_f64().unwrap(), min);
}

#[test]
fn embed_recovers_cft_circle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cft.toml",
        "[backend]\nkind = \"cft\"\nc = 2.0\nepsilon = 1e-3\nn_arcs = 7\n\n\
         [[experiments]]\nkind = \"table\"\nname = \"t\"\npartition = { kind = \"circle\" }\n",
    );
    let out = dir.path().join("out");
    let o = run(&["embed"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&out.join("embedding.json"));
    assert!(rep["verify"].as_f64().unwrap() < 1e-10);
    assert_eq!(rep["angles"].as_array().unwrap().len(), 7);

    // The table written by the first call embeds identically when read back.
    let again = dir.path().join("again");
    let o = bin()
        .args(["embed", "--config"])
        .arg(&cfg)
        .arg("--table")
        .arg(out.join("t_table.csv"))
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_json(&again.join("embedding.json"))["angles"], rep["angles"]);
}

#[test]
fn oracle_compare_agrees_on_pair_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "oracle.toml",
        "[backend]\nkind = \"edoracle\"\nsource = { kind = \"pairstate\", n = 2, alpha = 0.4, beta = 1.0 }\n\
         [regions.a]\nsites = [0]\n[regions.b]\nsites = [1]\n[regions.c]\nsites = [2]\n\
         [rulers.r]\na = \"a\"\nb = \"b\"\nc = \"c\"\n",
    );
    let out = dir.path().join("out");
    let o = run(&["oracle-compare"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("oracle_compare.json"))["passed"], true);
}

#[test]
fn oracle_compare_needs_an_oracle_backend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let o = run(&["oracle-compare"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("backend.kind"), "{}", stderr(&o));
}
