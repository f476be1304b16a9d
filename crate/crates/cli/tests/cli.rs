use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn magicfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magicfn"))
        .args(args)
        .env_remove("MAGICFN_CACHE_DIR")
        .output()
        .expect("run magicfn")
}

fn report(args: &[&str]) -> Value {
    let out = magicfn(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn cache_files(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["bound", "--n", "8", "--k", "6", "--cache-dir", cache];
    let first = report(&args);
    assert_eq!(cache_files(dir.path()), 1);
    let second = report(&args);
    assert_eq!(cache_files(dir.path()), 1);
    assert_eq!(first["results"], second["results"]);
    assert_eq!(first["manifest"]["cache_keys"], second["manifest"]["cache_keys"]);
    let fresh = report(&["bound", "--n", "8", "--k", "6", "--no-cache"]);
    assert_eq!(first["results"], fresh["results"]);
    assert!(fresh["manifest"]["cache_keys"].as_array().unwrap().is_empty());

    // a cached build serves later commands on the same pair
    let t = report(&["taylor", "--n", "8", "--k", "6", "--cache-dir", cache]);
    assert_eq!(t["manifest"]["cache_keys"], first["manifest"]["cache_keys"]);
    assert_eq!(cache_files(dir.path()), 1);
}

#[test]
fn cache_is_keyed_by_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let a = report(&["bound", "--n", "8", "--k", "4", "--signs", "skip", "--cache-dir", cache]);
    let b = report(&["bound", "--n", "8", "--k", "4", "--schedule", "naive", "--signs", "skip", "--cache-dir", cache]);
    assert_eq!(cache_files(dir.path()), 2);
    assert_ne!(a["results"]["bound_vs_lattice"], b["results"]["bound_vs_lattice"]);
}

#[test]
fn output_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("roots.csv");
    let o = magicfn(&[
        "atlas", "--n", "8", "--k", "4", "--side", "both", "--no-cache",
        "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["manifest"]["outputs"].as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("re,im,mult,forced,side\n"));
    assert!(text.contains(",f\n") && text.contains(",fhat\n"));
    assert_eq!(text.matches("re,im").count(), 1);
}

#[test]
fn sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let r = report(&[
        "sweep", "--n", "8", "--ks", "3,4,5", "--task", "bound", "--jobs", "2", "--no-cache",
        "--csv", csv.to_str().unwrap(),
    ]);
    let rows = r["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.iter().map(|r| r["k"].as_u64().unwrap()).collect::<Vec<_>>(), [3, 4, 5]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("k,value,error"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn exit_codes() {
    // usage problems
    assert_eq!(magicfn(&["bound", "--n", "8"]).status.code(), Some(3));
    assert_eq!(magicfn(&["bound", "--n", "8", "--k", "5", "--digits", "40"]).status.code(), Some(3));
    assert_eq!(magicfn(&["bound", "--n", "9/2", "--k", "5"]).status.code(), Some(3));
    assert_eq!(magicfn(&["single", "--n", "8", "--k", "3", "--eps", "0", "--closed-form"]).status.code(), Some(3));
    assert_eq!(magicfn(&["ratio", "--n", "10", "--lattice", "e8"]).status.code(), Some(3));
    // below the policy only with the override
    let o = magicfn(&["bound", "--n", "8", "--k", "5", "--digits", "40", "--force-digits", "--no-cache"]);
    assert!(o.status.success());
    assert_eq!(magicfn(&["--help"]).status.code(), Some(0));
}

#[test]
fn rational_dimensions() {
    let a = report(&["bound", "--n", "9/2", "--k", "3", "--lattice", "e8", "--signs", "skip", "--no-cache"]);
    let b = report(&["bound", "--n", "4.5", "--k", "3", "--lattice", "e8", "--signs", "skip", "--no-cache"]);
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["manifest"]["parameters"]["n"], "9/2");
}
