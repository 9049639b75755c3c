//! Black-box behavior of the boltzspec binary: exit codes, output schemas,
//! cache determinism.

use std::path::PathBuf;
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_boltzspec")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("boltzspec-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn dimension_mismatch_is_a_config_error() {
    // a 2-component frequency against a d=3 configuration: exit code 2
    let out = Command::new(exe())
        .args(["--dim", "3", "--degree", "4", "spectrum", "--xi", "0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_file_rejected() {
    let dir = tmpdir("cfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"schema_version": 1, "dimension": 7}"#).unwrap();
    let out = Command::new(exe())
        .args(["--config", path.to_str().unwrap(), "nu"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn nu_output_schema() {
    let out = Command::new(exe())
        .args(["--dim", "3", "nu", "--speeds", "0:2:5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dimension"], 3);
    assert_eq!(v["speeds"].as_array().unwrap().len(), 5);
    let nu0 = v["nu0"].as_f64().unwrap();
    let nu1 = v["nu1"].as_f64().unwrap();
    assert!(nu0 > 0.0 && nu1 > nu0);
    // floats are serialized in scientific notation with 17 significant digits
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("e0") || text.contains("e1") || text.contains("e-"));
}

#[test]
fn spectrum_json_and_branch_count() {
    let out = Command::new(exe())
        .args(["--dim", "2", "--degree", "4", "spectrum", "--xi", "0.1,0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let eigs = v["eigenvalues"].as_array().unwrap();
    assert_eq!(eigs.len(), 15); // C(4+2, 2) basis functions
    assert_eq!(v["branch_count"], 4);
    for e in eigs {
        assert!(e["re"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn branches_csv_shape() {
    let dir = tmpdir("csv");
    let path = dir.join("branches.csv");
    let out = Command::new(exe())
        .args([
            "--dim",
            "2",
            "--degree",
            "4",
            "branches",
            "--direction",
            "1,0",
            "--r-grid",
            "0.05:0.2:4",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,branch,re,im,multiplicity");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 4); // 4 grid points x 4 branches
    assert!(rows[0].contains("acoustic") || rows[0].contains("entropy") || rows[0].contains("shear"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn assemble_cache_is_deterministic() {
    let dir = tmpdir("cache");
    let bin1 = dir.join("l1.bin");
    let bin2 = dir.join("l2.bin");
    let run = |out_path: &std::path::Path| {
        let out = Command::new(exe())
            .args([
                "--dim",
                "2",
                "--degree",
                "4",
                "--cache-dir",
                dir.join("store").to_str().unwrap(),
                "assemble",
                "--out",
                out_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let first = run(&bin1);
    assert_eq!(first["from_cache"], false);
    let second = run(&bin2);
    assert_eq!(second["from_cache"], true);
    let b1 = std::fs::read(&bin1).unwrap();
    let b2 = std::fs::read(&bin2).unwrap();
    assert_eq!(b1, b2, "cached rerun is not byte-identical");
    // corrupt the cached payload: the next run must reassemble, not reuse
    let store = dir.join("store");
    let mut bins: Vec<PathBuf> = std::fs::read_dir(&store)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().map(|x| x == "bin").unwrap_or(false)).then_some(p)
        })
        .collect();
    assert_eq!(bins.len(), 1);
    let target = bins.pop().unwrap();
    let mut bytes = std::fs::read(&target).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x55;
    std::fs::write(&target, &bytes).unwrap();
    let third = run(&bin1);
    assert_eq!(third["from_cache"], false, "corrupted cache entry was reused");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn semigroup_json_schema() {
    let out = Command::new(exe())
        .args([
            "--dim",
            "2",
            "--degree",
            "4",
            "semigroup",
            "--xi",
            "0.1,0",
            "--t-grid",
            "0:1:30",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["gamma_fit"].as_f64().unwrap() < 0.0);
    assert!(v["C_fit"].as_f64().unwrap() > 0.0);
    assert!(v["commutation_residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["norms"].as_array().unwrap().len(), 30);
}

#[test]
fn enlargement_json_schema() {
    let out = Command::new(exe())
        .args(["--dim", "2", "--degree", "5", "enlargement", "--k", "6", "--xi", "0.1,0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k"], 6.0);
    let pairs = v["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 4);
    assert!(v["max_dist"].as_f64().unwrap() < 0.05);
    for p in pairs {
        assert!(p["gauss"]["re"].is_number() && p["poly"]["im"].is_number());
        assert!(p["dist"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn coeffs_json_schema() {
    let out = Command::new(exe())
        .args(["--dim", "2", "--degree", "6", "coeffs", "--direction", "1,0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lam2 = v["lambda2"].as_array().unwrap();
    assert_eq!(lam2.len(), 4);
    for x in lam2 {
        assert!(x.as_f64().unwrap() < 0.0);
    }
    for r in v["fit_residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() < 1e-2);
    }
}
