use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magsle"))
}

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/kernel_oracles.toml")
}

#[test]
fn experiment_writes_report_manifest_and_plots() {
    let out = scratch("experiment");
    let st = bin().args(["experiment", "--config"]).arg(config()).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["report.json", "manifest.json", "checks.csv", "koebe.csv", "kernel_oracles.dat", "kernel_oracles.svg"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let text = fs::read(config()).unwrap();
    assert_eq!(m["inputs"][0]["blob"], magsle_lab::report::blob_hash(&text));
    assert_eq!(m["seed"], 3);
    assert!(m["versions"]["magsle-core"].is_string());
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn out_dir_from_environment() {
    let out = scratch("env");
    let st = bin().args(["domain", "--config"]).arg(config()).env("MAGSLE_OUT", &out).status().unwrap();
    assert!(st.success());
    assert!(out.join("domain.csv").exists());
}

#[test]
fn invalid_config_exits_2() {
    let dir = scratch("invalid");
    let p = dir.join("bad.toml");
    fs::write(&p, fs::read_to_string(config()).unwrap().replace("meshes = [0.25]", "meshes = [0.25, 0.5]")).unwrap();
    let o = bin().args(["experiment", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("meshes"));
}

#[test]
fn kernel_probe_prints_the_one_point_kernel() {
    let o = bin().args(["kernel-probe", "--points", "0,0", "--config"]).arg(config()).output().unwrap();
    assert!(o.status.success());
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    // f^{(+,1)}(0) = 2^{1/4} on the unit disk
    assert!((v - 2f64.powf(0.25)).abs() < 1e-12, "{v}");
}

#[test]
fn interface_then_driving_and_rn_from_saved_paths() {
    let out = scratch("pipeline");
    let cfg = out.join("c.toml");
    fs::write(&cfg, "experiment = \"driving_variance\"\nseed = 9\nmeshes = [0.125]\nsamples = 200\nconditional_samples = 50\nn_mc = 50\norder = 2\n[domain]\nshape = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.0\na = [0.0, -1.0]\nb = [0.0, 1.0]\n[field]\nh = 0.5\n").unwrap();
    let paths = out.join("paths");
    assert!(bin().args(["interface", "--config"]).arg(&cfg).arg("--out").arg(&paths).status().unwrap().success());
    let csv = fs::read_dir(&paths).unwrap().next().unwrap().unwrap().path();
    assert!(bin().args(["driving", "--config"]).arg(&cfg).arg("--path").arg(&csv).arg("--out").arg(out.join("drv")).status().unwrap().success());
    let rn = out.join("rn");
    assert!(bin().args(["rn", "--config"]).arg(&cfg).arg("--paths").arg(&paths).arg("--out").arg(&rn).status().unwrap().success());
    let summary = fs::read_to_string(rn.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}
