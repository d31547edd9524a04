use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MINIMAL: &str = "\
sigma = 0.5
eps = 0.05
r = 1
n = 2
N = 200
scheme = semi_implicit
dt = 1e-3
t_max = 50
residual_tol = 1e-6
";

fn mmcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmcf"))
        .args(args)
        .env_remove("MMCF_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn assert_inventory_exists(out: &Path, m: &Value) {
    for f in m["files"].as_array().unwrap() {
        assert!(out.join(f["path"].as_str().unwrap()).is_file(), "{f}");
    }
    let leftovers = fs::read_dir(out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "tmp")
        })
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn minimal_flow_converges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{MINIMAL}[flow]\ninitial = perturbed_cap\nsnapshot_times = 0, 2\n"),
    );
    let out = tmp.path().join("out");
    let res = mmcf(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,t,energy,dissipation,residual_sup,w_max,G_max,u_max,v_min,v_max"
    );
    let m = manifest(&out);
    assert_eq!(m["status"], "converged");
    assert_eq!(m["config"]["flow"]["sigma"], 0.5);
    assert_eq!(m["extra"]["snapshots"].as_array().unwrap().len(), 2);
    assert_inventory_exists(&out, &m);
    let snap: mmcf::Snapshot =
        serde_json::from_str(&fs::read_to_string(out.join("final.json")).unwrap()).unwrap();
    assert_eq!(snap.v.len(), 200);
}

#[test]
fn zero_time_budget_times_out_with_one_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let res = mmcf(&[
        "flow",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--t-max",
        "0",
        "--set",
        "initial=perturbed_cap",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(manifest(&out)["status"], "timed_out");
}

#[test]
fn invalid_sigma_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let res = mmcf(&["flow", "--sigma", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sigma out of (-1,1)"));
    assert_eq!(manifest(&out)["status"], "error");
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = TempDir::new().unwrap();
    for (text, key) in [
        ("[flow]\nsigmma = 0.5\n", "`sigmma`"),
        ("[flow]\nt_max = later\n", "`t_max`"),
        ("[domain]\nsigma = 0.5\n", "`sigma`"),
    ] {
        let cfg = write_config(tmp.path(), text);
        let res = mmcf(&[
            "flow",
            "--config",
            &cfg,
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(res.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&res.stderr).contains(key), "{text}");
    }
}

#[test]
fn reruns_share_the_content_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{MINIMAL}t_max = 1\n").replace("t_max = 50\n", ""),
    );
    let hash = |name: &str| {
        let out = tmp.path().join(name);
        let res = mmcf(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2));
        manifest(&out)["content_sha256"].clone()
    };
    assert_eq!(hash("a"), hash("b"));
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("env-out");
    let res = Command::new(env!("CARGO_BIN_EXE_mmcf"))
        .args(["sweep", "--nodes-list", "50,100"])
        .env("MMCF_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn cmc_writes_snapshot_and_log() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("cmc");
    let res = mmcf(&[
        "cmc",
        "--sigma0",
        "0.9",
        "--eps",
        "0.05",
        "--r",
        "1",
        "--n",
        "2",
        "--N",
        "400",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let log = fs::read_to_string(out.join("continuation_log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("sigma,iters,final_residual"));
    assert_eq!(lines.last().unwrap().split(',').next(), Some("0.9"));
    let m = manifest(&out);
    assert_eq!(m["extra"]["heights_ok"], true);
    assert_inventory_exists(&out, &m);
}

#[test]
fn verify_suites() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let res = mmcf(&[
        "verify",
        "--suite",
        "oracles",
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    assert!(report
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["status"] != "fail"));
    assert_eq!(
        mmcf(&["verify", "--suite", "nope", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn resolution_sweep_reports_second_order() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let res = mmcf(&[
        "sweep",
        "--nodes-list",
        "100,200,400",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let order = manifest(&out)["extra"]["min_observed_order"]
        .as_f64()
        .unwrap();
    assert!(order >= 1.9, "{order}");
}

#[test]
fn eps_sweep_reports_cauchy_limits() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let res = mmcf(&[
        "sweep",
        "--eps-list",
        "0.2,0.1,0.05,0.025",
        "--set",
        "initial=perturbed_cap",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_report.json")).unwrap()).unwrap();
    assert_eq!(report["is_cauchy"], true);
    assert_eq!(report["w_uniform"], true);
    assert_eq!(report["report"]["entries"].as_array().unwrap().len(), 4);
}

#[test]
fn empty_sweep_lists_fail() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    for flag in ["--eps-list", "--nodes-list"] {
        assert_eq!(
            mmcf(&["sweep", flag, "", "--out", out.to_str().unwrap()])
                .status
                .code(),
            Some(1)
        );
    }
    assert_eq!(
        mmcf(&["sweep", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}
