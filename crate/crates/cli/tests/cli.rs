use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spamsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spamsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPAMSIM_CONFIG")
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = spamsim(args, out);
    assert!(o.status.success(), "{:?} failed: {}", args, String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spam_outputs_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["spam", "--mode", "jump", "--trials", "4000", "--seed", "9", "--workers", "1"], &a);
    ok(&["spam", "--mode", "jump", "--trials", "4000", "--seed", "9", "--workers", "4"], &b);
    for f in ["spam_report.json", "histogram_zero.csv", "histogram_one.csv", "budget.csv", "budget.txt", "manifest.json"] {
        let fa = fs::read(a.join(f)).unwrap();
        let fb = fs::read(b.join(f)).unwrap();
        if f == "manifest.json" {
            // Only the output directory differs.
            assert_eq!(json(&a.join(f))["config_sha256"], json(&b.join(f))["config_sha256"]);
        } else {
            assert_eq!(fa, fb, "{} differs", f);
        }
    }
}

#[test]
fn outputs_carry_seed_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["spam", "--trials", "1000", "--seed", "77"], dir.path());
    let report = json(&dir.path().join("spam_report.json"));
    assert_eq!(report["seed"], 77);
    let hash = report["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(report["config"]["spam"]["trials_zero"], 1000);
    let csv = fs::read_to_string(dir.path().join("histogram_one.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# seed=77 config_sha256={}", hash));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "spam");
    assert_eq!(manifest["timestamp"], 0);
    assert_eq!(manifest["seed"], 77);
}

#[test]
fn zero_trials_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = spamsim(&["spam", "--trials", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("spam_report.json").exists());
}

#[test]
fn single_point_pulse_scan_is_full_transfer() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["pulse-scan", "--scan", "detuning", "--rabi-khz", "35", "--points", "1"], dir.path());
    let csv = fs::read_to_string(dir.path().join("pulse_scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cols: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[0], 0.0);
    assert!((cols[1] - 1.0).abs() < 1e-12);
}

#[test]
fn pulse_scan_summary_compares_plateaus() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["pulse-scan", "--scan", "area", "--points", "41"], dir.path());
    let s = json(&dir.path().join("pulse_summary.json"));
    let w = &s["plateau_widths"];
    assert!(w["composite"].as_f64().unwrap() > w["single_pi"].as_f64().unwrap());
}

#[test]
fn capacity_of_typical_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = spamsim(&["capacity", "2.9e-4"], dir.path());
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "2390");
    assert_eq!(json(&dir.path().join("capacity.json"))["qubits"], 2390);
    let bad = spamsim(&["capacity", "0", "--force"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["capacity", "1e-3"], dir.path());
    let again = spamsim(&["capacity", "2e-3"], dir.path());
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(json(&dir.path().join("capacity.json"))["qubits"], 693);
    ok(&["capacity", "2e-3", "--force"], dir.path());
    assert_eq!(json(&dir.path().join("capacity.json"))["qubits"], 346);
}

#[test]
fn config_errors_name_the_key_and_exit_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[readout]\nbright_mean = 39.0\ndark_mean = 1.0\nwindow = 4.5e-3\nthreshold = 12\n").unwrap();
    let o = spamsim(&["budget", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lifetime"));

    let missing = spamsim(&["budget", "--config", "/nonexistent/x.toml"], &dir.path().join("out"));
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn config_file_from_environment_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[spam]\ntrials_zero = 500\ntrials_one = 700\nblock_size = 50\nrabi_khz = 35.0\n\
         detuning_khz = 0.0\narea_scale = 1.0\neps_cp = 1e-4\nbackground_flip = 3e-5\n",
    )
    .unwrap();
    let out = dir.path().join("a");
    let o = Command::new(env!("CARGO_BIN_EXE_spamsim"))
        .args(["spam", "--out", out.to_str().unwrap()])
        .env("SPAMSIM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("spam_report.json"));
    assert_eq!(r["trials_zero"], 500);
    assert_eq!(r["trials_one"], 700);
    assert_eq!(r["config"]["spam"]["block_size"], 50);

    let out = dir.path().join("b");
    ok(&["spam", "--config", cfg.to_str().unwrap(), "--trials", "300"], &out);
    assert_eq!(json(&out.join("spam_report.json"))["config"]["spam"]["trials_one"], 300);
}

#[test]
fn rate_and_jump_spam_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (r, j) = (dir.path().join("r"), dir.path().join("j"));
    ok(&["spam", "--mode", "rate", "--trials", "40000", "--seed", "3"], &r);
    ok(&["spam", "--mode", "jump", "--trials", "40000", "--seed", "4"], &j);
    let (r, j) = (json(&r.join("spam_report.json")), json(&j.join("spam_report.json")));
    for key in ["eps_zero", "eps_one"] {
        let (a, b) = (r[key]["value"].as_f64().unwrap(), j[key]["value"].as_f64().unwrap());
        let s = r[key]["wald_sigma"].as_f64().unwrap().hypot(j[key]["wald_sigma"].as_f64().unwrap());
        assert!((a - b).abs() <= 3.0 * s.max(1.0 / 40000.0), "{}: {} vs {}", key, a, b);
    }
}

#[test]
fn noiseless_spectroscopy_recovers_splittings() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, want, tol) in [("455", 623.0, 0.623), ("614", 83.0, 0.083)] {
        let out = dir.path().join(kind);
        ok(&["spectroscopy", "--kind", kind, "--no-noise"], &out);
        let fit = json(&out.join("fit.json"));
        let got = fit["splitting_MHz"]["value"].as_f64().unwrap();
        assert!((got - want).abs() < tol, "{}: {}", kind, got);
        assert_eq!(fit["fits"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn spectroscopy_rejects_short_grids() {
    let dir = tempfile::tempdir().unwrap();
    let o = spamsim(&["spectroscopy", "--kind", "455", "--points", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    ok(&["spectroscopy", "--kind", "455", "--points", "21", "--no-noise"], dir.path());
    let csv = fs::read_to_string(dir.path().join("scan_s1-p2.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 22);
}

#[test]
fn bare_shelving_matches_branching_quotient() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["shelve", "--scheme", "bare-455", "--mode", "rate"], dir.path());
    let s = json(&dir.path().join("shelve.json"));
    let f = s["shelving_fidelity"]["value"].as_f64().unwrap();
    assert!((f - 0.8846).abs() < 3e-3, "{}", f);
}

#[test]
fn budget_outputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["budget"], dir.path());
    let b = json(&dir.path().join("budget.json"));
    let entries = b["budget"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let sum: f64 = entries.iter().map(|e| e["error"].as_f64().unwrap()).sum();
    assert!((sum - b["budget"]["total"].as_f64().unwrap()).abs() < 1e-15);
    let csv = fs::read_to_string(dir.path().join("budget.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 8);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spamsim(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(spamsim(&["shelve", "--scheme", "bare"], dir.path()).status.code(), Some(2));
}
