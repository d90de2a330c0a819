//! End-to-end runs of the `pointer-limit` binary.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64 as C64;
use pointer_limit::check::{run_property_suite_with, CheckSetup, Status};
use pointer_limit::config::RunConfig;
use pointer_limit::dynamics::EvolutionConfig;
use pointer_limit::manifest::{read_manifest, sha256_file, verify_manifest, MANIFEST_FILE};
use pointer_limit::model::{build_hamiltonian, Hamiltonian, LinearOperator, ModelSpec};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointer-limit"))
        .args(args)
        .env_remove("POINTER_LIMIT_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_with(config: &Path, out: &Path, command: &str, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j]).collect()
}

const SIMULATE_HEADER: [&str; 6] = ["t", "pointer_expectation", "threshold_prob", "rho01_abs", "overlap_D", "norm_error"];

#[test]
fn simulate_undetected_branch_never_crosses_threshold() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.toml", r#"
[model]
n = 6
coupling_kind = "disordered"
seed = 2

[amplitudes]
c0 = [1.0, 0.0]
c1 = [0.0, 0.0]

[evolution]
t_max = 30.0
"#);
    let out = tmp.path().join("out");
    let o = run_with(&cfg, &out, "simulate", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("simulate.csv"));
    assert_eq!(header, SIMULATE_HEADER);
    assert_eq!(rows.len(), 301);
    assert!(column(&header, &rows, "threshold_prob").iter().all(|&p| p == 0.0));
    assert!(column(&header, &rows, "overlap_D").iter().all(|d| d.is_nan()));
    let text = std::fs::read(out.join("simulate.csv")).unwrap();
    assert!(!text.contains(&b'\r'));
}

#[test]
fn simulate_detected_branch_follows_rabi_formula() {
    let tmp = TempDir::new().unwrap();
    let g = 0.8;
    let cfg = write_config(tmp.path(), "sim.toml", &format!(r#"
[model]
n = 9
coupling_kind = "uniform"
g = {g}

[amplitudes]
c0 = [0.0, 0.0]
c1 = [0.0, 1.0]

[evolution]
dt = 0.25
t_max = 40.0

[output]
formats = ["csv", "dat"]
"#));
    let out = tmp.path().join("out");
    let o = run_with(&cfg, &out, "simulate", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("simulate.csv"));
    let t = column(&header, &rows, "t");
    let pointer = column(&header, &rows, "pointer_expectation");
    for (t, p) in t.iter().zip(&pointer) {
        assert!((p - (g * t / 2.0).sin().powi(2)).abs() < 1e-9, "t = {t}");
    }
    assert!(column(&header, &rows, "norm_error").iter().all(|&e| e < 1e-9));
    let dat = std::fs::read_to_string(out.join("simulate.dat")).unwrap();
    assert!(dat.starts_with("# t pointer_expectation"));
    assert_eq!(dat.lines().count(), rows.len() + 1);
}

#[test]
fn check_passes_on_shipped_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/check.toml");
    let out = tmp.path().join("out");
    let o = run_with(&cfg, &out, "check", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("pass")), "{csv}");
}

#[test]
fn check_skips_trigger_with_self_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "check.toml", r#"
[model]
n = 5
coupling_kind = "disordered"
epsilon = 0.2

[evolution]
t_max = 50.0
"#);
    let out = tmp.path().join("out");
    let o = run_with(&cfg, &out, "check", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("check.csv")).unwrap();
    let trigger = csv.lines().find(|l| l.starts_with("trigger_stationarity")).unwrap();
    assert!(trigger.contains(",skipped,") && trigger.contains("self energy"), "{trigger}");
}

/// H plus a small anti-Hermitian perturbation on one pair of entries.
struct Sabotaged(Hamiltonian);

impl LinearOperator for Sabotaged {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        self.0.apply_into(v, out);
        out[0] += v[1] * 0.01;
        out[1] -= v[0] * 0.01;
    }
}

#[test]
fn check_names_broken_hermiticity() {
    let spec = ModelSpec::disordered(5, 1, 0.5, 1.5).unwrap();
    let setup = CheckSetup {
        spec: spec.clone(),
        c0: C64::new(0.6, 0.0),
        c1: C64::new(0.8, 0.0),
        cfg: EvolutionConfig::default(),
        t_max: 50.0,
    };
    let broken = Sabotaged(build_hamiltonian(&spec).unwrap());
    let report = run_property_suite_with(&setup, &broken).unwrap();
    assert!(!report.all_pass());
    let h = report.get("hermiticity").unwrap();
    assert_eq!(h.status, Status::Fail);
    assert!(h.residual > h.tolerance);
}

#[test]
fn algebra_reports_commutators() {
    let o = run(&["algebra", "--alpha", "0.3", "--alpha-prime", "1.0853981633974483"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("commutator_norm = 5e-1") || text.contains("commutator_norm = 4.99999"), "{text}");
    assert!(text.contains("verdict: incompatible"));
    let same = run(&["algebra", "--alpha", "0.3", "--alpha-prime", "0.3"]);
    assert!(String::from_utf8_lossy(&same.stdout).contains("verdict: compatible"));
}

const SMALL_SCAN: &str = r#"
[model]
n_list = [4, 5, 6]
coupling_kind = "disordered"

[amplitudes]
c0 = [0.6, 0.0]
c1 = [0.8, 0.0]

[evolution]
dt = 0.25
t_max = 80.0

[scan]
seeds = [1, 2, 3]
"#;

#[test]
fn scan_is_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.toml", SMALL_SCAN);
    let mut sums = Vec::new();
    for threads in ["1", "2", "3"] {
        let out = tmp.path().join(format!("out{threads}"));
        let o = run_with(&cfg, &out, "scan", &["--threads", threads, "--allow-unconverged"]);
        assert!(matches!(code(&o), 0 | 4), "{}", String::from_utf8_lossy(&o.stderr));
        sums.push(sha256_file(&out.join("scan.csv")).unwrap().0);
        let (header, rows) = read_csv(&out.join("scan.csv"));
        assert_eq!(
            header,
            ["n", "seed", "time_avg_D", "p_hat", "abs_error", "mixture_distance", "tail_variation", "wall_time_s"]
        );
        assert_eq!(rows.len(), 9);
        assert!(column(&header, &rows, "wall_time_s").iter().all(|w| w.is_nan()));
    }
    assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");
}

#[test]
fn manifest_echoes_config_and_checksums() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), "scan.toml", SMALL_SCAN);
    let out = tmp.path().join("out");
    let o = run_with(&cfg_path, &out, "scan", &["--allow-unconverged", "--seeds", "4,5"]);
    assert!(matches!(code(&o), 0 | 4));
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.command, "scan");
    assert_eq!(m.seeds, vec![4, 5]);
    assert!(m.finished.is_some());
    let mut original = RunConfig::parse(SMALL_SCAN).unwrap();
    original.scan.seeds = vec![4, 5];
    assert_eq!(RunConfig::parse(&m.config).unwrap(), original);
    assert!(verify_manifest(&out).unwrap());
    // every emitted file is listed exactly once
    let mut listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    listed.sort();
    let mut present: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != MANIFEST_FILE)
        .collect();
    present.sort();
    assert_eq!(listed, present);
    std::fs::write(out.join("scan.csv"), "tampered\n").unwrap();
    assert!(!verify_manifest(&out).unwrap());
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.toml", "[model]\nn = 3\ncoupling_kind = \"disordered\"\n[evolution]\nt_max = 5.0\n");
    let env_out = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_pointer-limit"))
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("POINTER_LIMIT_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(env_out.join("simulate.csv").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[model]\nn = 4\ncoupling_kind = \"disordered\"\n[pointer]\nthetta = 0.3\n");
    let o = run_with(&cfg, &tmp.path().join("out"), "simulate", &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("thetta"));
    let bad_value = write_config(tmp.path(), "bad2.toml", "[model]\nn = 4\ncoupling_kind = \"disordered\"\n[pointer]\ntheta = 1.5\n");
    let o = run_with(&bad_value, &tmp.path().join("out2"), "simulate", &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pointer.theta"));
}

#[test]
fn unconverged_rows_exit_three_unless_allowed() {
    let tmp = TempDir::new().unwrap();
    let strict = format!("{SMALL_SCAN}max_tail_variation = 1e-12\n");
    let cfg = write_config(tmp.path(), "scan.toml", &strict);
    let o = run_with(&cfg, &tmp.path().join("a"), "scan", &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_manifest(&tmp.path().join("a")).unwrap().status, "unconverged");
    let o = run_with(&cfg, &tmp.path().join("b"), "scan", &["--allow-unconverged"]);
    assert_ne!(code(&o), 3);
}

#[test]
fn commensurate_scan_exits_with_fit_refusal() {
    let tmp = TempDir::new().unwrap();
    let period = 2.0 * std::f64::consts::PI;
    let cfg = write_config(tmp.path(), "scan.toml", &format!(r#"
[model]
n_list = [4, 6, 8]
coupling_kind = "uniform"
g = 1.0

[amplitudes]
c0 = [0.6, 0.0]
c1 = [0.8, 0.0]

[evolution]
dt = {period}
t_max = {}

[scan]
seeds = [1]
"#, 60.0 * period));
    let out = tmp.path().join("out");
    let o = run_with(&cfg, &out, "scan", &[]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("scan_report.txt")).unwrap();
    assert!(report.contains("refused"), "{report}");
    assert!(!report.contains("p_inf ="));
}

#[test]
fn macro_test_rejects_single_unit_family() {
    let tmp = TempDir::new().unwrap();
    let base = "[model]\nn_list = [4, 6, 8]\ncoupling_kind = \"disordered\"\n[macro]\ntrials = 50\n";
    let pointer = write_config(tmp.path(), "p.toml", &format!("{base}family = \"pointer\"\n"));
    let o = run_with(&pointer, &tmp.path().join("p"), "macro-test", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let (header, rows) = read_csv(&tmp.path().join("p/evidence.csv"));
    assert_eq!(header, ["n", "k", "trial", "deviation"]);
    assert_eq!(rows.len(), 150);
    let single = write_config(tmp.path(), "s.toml", &format!("{base}family = \"single_unit\"\n"));
    let o = run_with(&single, &tmp.path().join("s"), "macro-test", &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not macroscopic"));
}
