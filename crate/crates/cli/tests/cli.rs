use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uneq-ot"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("--config").arg(cfg).arg("--out").arg(out).args(extra).arg("run").output().unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = configs().join("quarter_disk_exponential.toml");
    assert!(run_config(&cfg, &a, &[]).status.success());
    assert!(run_config(&cfg, &b, &[]).status.success());
    let name = "nested.json";
    let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    assert_eq!(x, y);
    assert_eq!(fs::read(a.join("nested.csv")).unwrap(), fs::read(b.join("nested.csv")).unwrap());
    let v = json(&a, name);
    assert_eq!(v["kind"], "solve-nested");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn malformed_configs_exit_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("broken.toml", "command = \"solve-nested\"\n[cost\n"),
        ("unknown.toml", "command = \"reproduce-paper\"\nseed = 1\nsurprise = 3\n"),
        ("enum.toml", "command = \"solve-nested\"\nseed = 1\n[cost]\nfamily = \"nope\"\n"),
    ];
    for (name, text) in cases {
        let cfg = tmp.path().join(name);
        fs::write(&cfg, text).unwrap();
        let out = tmp.path().join(format!("out_{name}"));
        let o = run_config(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none(), "{name} left outputs");
    }
    let o = run_config(&tmp.path().join("unknown.toml"), &tmp.path().join("x"), &[]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("surprise"));
}

#[test]
fn sampling_needs_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    let text = fs::read_to_string(configs().join("quarter_disk_uniform.toml")).unwrap().replace("seed = 1\n", "");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run_config(&cfg, &tmp.path().join("o"), &[]).status.code(), Some(1));
}

#[test]
fn pseudo_index_is_nested() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(&configs().join("pseudo_index.toml"), tmp.path(), &[]);
    assert!(o.status.success());
    let v = json(tmp.path(), "check_nestedness.json");
    assert_eq!(v["result"]["nested"], true);
    assert_eq!(v["result"]["dmin_max"].as_f64().unwrap(), 0.0);
}

#[test]
fn reproduce_paper_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(&configs().join("reproduce.toml"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|e| e == "md")).unwrap();
    let report = fs::read_to_string(md).unwrap();
    assert!(report.contains("0.6148"));
    assert!(report.contains("0.65806"));
    assert!(report.contains("M(2)"));
    assert!(!report.contains("FAIL"));
}

#[test]
fn power_family_without_flag_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    let text = fs::read_to_string(configs().join("congestion_half.toml"))
        .unwrap()
        .replace("f = { kind = \"entropy\" }", "f = { kind = \"power\", p = 2.0 }");
    fs::write(&cfg, text).unwrap();
    let o = run_config(&cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn non_nested_target_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 257;
    let values: Vec<String> = (0..n)
        .map(|i| {
            let y = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            format!("{}", 1.0 - 0.4 * (2.0 * y).sin())
        })
        .collect();
    let text = format!(
        "command = \"check-nestedness\"\ngrid = {n}\n[cost]\nfamily = \"bilinear_arc\"\n[source.domain]\nkind = \"quarter_disk\"\nradius = 1.0\n\
         [target]\nlo = 0.0\nhi = 1.5707963267948966\ndensity = {{ kind = \"values\", values = [{}] }}\n",
        values.join(", ")
    );
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let o = run_config(&cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&tmp.path().join("o"), "check_nestedness.json");
    assert_eq!(v["result"]["nested"], false);
}
