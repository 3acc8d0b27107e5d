//! End-to-end runs of the `retlab` binary on the shipped fixture configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_retlab")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("retlab-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawn retlab")
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn thue_morse_point_gives_the_seven_known_returns() {
    let out = scratch("tm");
    let o = run("returns", &fixture("thue_morse.conf"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Vec<u64> = data_rows(&out.join("returns_seed1.csv")).iter().map(|row| row[1].parse().unwrap()).collect();
    assert_eq!(r, vec![3, 5, 6, 9, 10, 12, 15]);
}

#[test]
fn full_space_returns_every_time() {
    let out = scratch("full");
    assert!(run("returns", &fixture("full_space.conf"), &out, &[]).status.success());
    let rows = data_rows(&out.join("returns_seed1.csv"));
    assert_eq!(rows.len(), 20);
    for row in rows {
        assert_eq!(row[0], row[1]);
    }
}

#[test]
fn csv_and_json_carry_provenance() {
    let out = scratch("prov");
    assert!(run("returns", &fixture("full_space.conf"), &out, &[]).status.success());
    let first = fs::read_to_string(out.join("returns_seed1.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(first.starts_with(&format!("# retlab {} config=", env!("CARGO_PKG_VERSION"))), "{first}");
    assert!(first.ends_with(" seed=1"));
    let sha = first.split("config=").nth(1).unwrap().split(' ').next().unwrap();
    assert_eq!(sha.len(), 64);

    let summary = json(&out.join("returns_summary.json"));
    let raw = fs::read_to_string(out.join("returns_summary.json")).unwrap();
    assert!(raw.trim_start().starts_with("{\n  \"provenance\""));
    assert_eq!(summary["provenance"]["config_sha256"], sha);
    assert_eq!(summary["provenance"]["tool"], "retlab");
}

#[test]
fn seed_override_replaces_the_seed_list() {
    let out = scratch("override");
    assert!(run("returns", &fixture("full_space.conf"), &out, &["--seed-override", "77"]).status.success());
    assert!(out.join("returns_seed77.csv").exists());
    assert!(!out.join("returns_seed1.csv").exists());
}

#[test]
fn power_map_growth_exponent_for_seed_eleven() {
    let out = scratch("growth");
    assert!(run("returns", &fixture("power_shrinking.conf"), &out, &[]).status.success());
    let s = json(&out.join("returns_summary.json"));
    let g = s["runs"][0]["growth_exponent"].as_f64().unwrap();
    // 1/(1-a) = 5/3
    assert!((1.5..=1.83).contains(&g), "growth exponent {g}");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let cfg = fixture("cyclic_projection.conf");
    let a = scratch("det-a");
    let b = scratch("det-b");
    let c = scratch("det-c");
    assert!(run("average", &cfg, &a, &["--threads", "1"]).status.success());
    assert!(run("average", &cfg, &b, &["--threads", "1"]).status.success());
    assert!(run("average", &cfg, &c, &["--threads", "4"]).status.success());
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 11);
    for n in names {
        let x = fs::read(a.join(&n)).unwrap();
        assert_eq!(x, fs::read(b.join(&n)).unwrap(), "{n:?}");
        assert_eq!(x, fs::read(c.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn ergodic_cyclic_average_reaches_the_mean_after_one_period() {
    let out = scratch("ergodic");
    assert!(run("average", &fixture("ergodic_cyclic.conf"), &out, &[]).status.success());
    let rows = data_rows(&out.join("average_seed1.csv"));
    let last = rows.last().unwrap();
    assert_eq!(last[0], "5");
    assert_eq!(last[3].parse::<f64>().unwrap(), 4.0);
    assert_eq!(last[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn cyclic_projection_and_residues() {
    let out = scratch("cyclic");
    assert!(run("average", &fixture("cyclic_projection.conf"), &out, &["--seed-override", "3"]).status.success());
    let rows = data_rows(&out.join("average_seed3.csv"));
    let last = rows.last().unwrap();
    assert_eq!(last[0], "10000");
    // coset {0, 2, 4} of table 0.9, 0.4, 0.2
    assert!((last[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    assert!(last[4].parse::<f64>().unwrap() < 0.01);

    assert!(run("residues", &fixture("cyclic_projection.conf"), &out, &["--seed-override", "3"]).status.success());
    let rows = data_rows(&out.join("residues.csv"));
    assert_eq!(rows.len(), 3);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for r in rows {
        assert!((r[2].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 0.02);
    }
}

#[test]
fn markov_source_visits_the_event() {
    let out = scratch("markov");
    assert!(run("returns", &fixture("markov_returns.conf"), &out, &[]).status.success());
    for seed in [1, 2] {
        let n = data_rows(&out.join(format!("returns_seed{seed}.csv"))).len();
        assert!((400..=600).contains(&n), "seed {seed}: {n} visits");
    }
}

#[test]
fn counterexample_average_misses_the_projection() {
    let out = scratch("counter");
    let o = run("counterexample", &fixture("counterexample.conf"), &out, &["--seed-override", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("counterexample_summary.json"));
    let r = &s["runs"][0];
    assert_eq!(r["containment"], true);
    assert_eq!(r["two_over_k"], true);
    assert!(r["returns"].as_u64().unwrap() >= 1000);
    assert!(r["final_gap"].as_f64().unwrap() > 0.2);
}

#[test]
fn verify_default_suite_passes() {
    let out = scratch("verify");
    let o = run("verify", &fixture("verify_default.conf"), &out, &["--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("verify.json"));
    assert_eq!(v["failed"], 0);
    let names: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["check_name"].as_str().unwrap()).collect();
    for want in ["property_P", "split_identity", "van_der_corput", "lln_ratio", "covariance_bound", "vn_decay"] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn periodic_chain_fails_property_p_with_a_witness() {
    let out = scratch("periodic");
    let o = run("verify", &fixture("verify_periodic.conf"), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&out.join("verify.json"));
    let p = v["records"].as_array().unwrap().iter().find(|r| r["check_name"] == "property_P").unwrap().clone();
    assert_eq!(p["pass"], false);
    assert!(p["witness"].is_string() || p["witness"].is_array(), "{p}");
}

#[test]
fn independent_chain_passes_property_p() {
    let out = scratch("indep");
    let o = run("verify", &fixture("verify_independent.conf"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&out.join("verify.json"));
    let p = v["records"].as_array().unwrap().iter().find(|r| r["check_name"] == "property_P").unwrap().clone();
    assert_eq!(p["pass"], true);
}

#[test]
fn bad_config_exits_with_two() {
    let out = scratch("bad");
    let cfg = out.join("bad.conf");
    fs::write(&cfg, "source = power\na = 3/2\n").unwrap();
    assert_eq!(run("returns", &cfg, &out, &[]).status.code(), Some(2));
    fs::write(&cfg, "source = nowhere\n").unwrap();
    assert_eq!(run("returns", &cfg, &out, &[]).status.code(), Some(2));
    fs::write(&cfg, "n_max 10\n").unwrap();
    assert_eq!(run("returns", &cfg, &out, &[]).status.code(), Some(2));
    assert_eq!(run("returns", &out.join("missing.conf"), &out, &[]).status.code(), Some(2));
}

#[test]
fn scan_exhaustion_exits_with_three() {
    let out = scratch("exhaust");
    let cfg = out.join("short.conf");
    fs::write(
        &cfg,
        "source = power\ntarget = shrinking\na = 0.4\ntest_system = rotation\nobservable = character\nk_max = 1000\nhorizon = 50\nseeds = 1\n",
    )
    .unwrap();
    let o = run("average", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon 50"));
}
