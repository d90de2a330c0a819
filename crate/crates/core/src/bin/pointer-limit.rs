use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use pointer_limit::born::{measure_trajectory, setup_commutator};
use pointer_limit::check::{run_property_suite, CheckSetup, Status};
use pointer_limit::config::{FamilyChoice, Format, RunConfig};
use pointer_limit::dynamics::uniform_times;
use pointer_limit::macro_obs::{
    is_macroscopic, MacroTestPlan, ObservableFamily, PointerFamily, SingleUnitFamily,
};
use pointer_limit::manifest::ManifestWriter;
use pointer_limit::output;
use pointer_limit::scaling::{extrapolate_limit, scan_n, ScanPlan};
use pointer_limit::Error;

/// Environment variable naming the output directory when neither --out nor
/// `output.directory` is given.
const OUT_ENV: &str = "POINTER_LIMIT_OUT";
const FALLBACK_OUT: &str = "pointer-limit-out";

/// Two setups count as compatible below this commutator norm.
const COMPATIBLE_TOL: f64 = 1e-12;

const EXIT_FAILED: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_UNCONVERGED: u8 = 3;
const EXIT_FIT_REFUSED: u8 = 4;

#[derive(Parser)]
#[command(name = "pointer-limit", version, about = "Particle-plus-amplifier measurement simulator")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory and $POINTER_LIMIT_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated coupling seeds, replacing scan.seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Exit 0 even when some time averages did not converge.
    #[arg(long, global = true)]
    allow_unconverged: bool,
    /// Worker threads for scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory at a single n.
    Simulate,
    /// Born estimates and overlap decay over model.n_list.
    Scan,
    /// Property suite (n <= 12).
    Check,
    /// Commutator of the projectors of two measurement setups.
    Algebra {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long = "alpha-prime", allow_hyphen_values = true)]
        alpha_prime: f64,
    },
    /// Substitution test of an observable family over model.n_list.
    MacroTest,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => EXIT_UNCONVERGED,
        Error::FitRefused(_) => EXIT_FIT_REFUSED,
        Error::Io(_) | Error::Csv(_) => EXIT_FAILED,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seeds) = &cli.seeds {
        cfg.scan.seeds = seeds.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT))
}

/// Runs `body` between manifest start and finish; the manifest records a
/// failure status when `body` errors.
fn with_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    cli: &Cli,
    body: impl FnOnce(&mut ManifestWriter) -> Result<(u8, String), Error>,
) -> Result<u8, Error> {
    let mut m = ManifestWriter::start(dir, command, cfg, cfg.scan.seeds.clone(), cli.threads)?;
    match body(&mut m) {
        Ok((code, status)) => {
            m.finish(&status)?;
            Ok(code)
        }
        Err(e) => {
            m.finish(&format!("failed: {e}"))?;
            Err(e)
        }
    }
}

fn simulate(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let spec = cfg.single_spec()?;
    let evo = cfg.evolution_config()?;
    let (c0, c1) = cfg.amplitudes()?;
    let dir = out_dir(cli, &cfg);
    with_manifest(&dir, "simulate", &cfg, cli, |m| {
        let start = Instant::now();
        let times = uniform_times(cfg.evolution.t_max, evo.dt);
        let series = measure_trajectory(&spec, c0, c1, cfg.pointer.theta, &times, &evo)?;
        output::write_simulate_csv(&m.path_for("simulate.csv"), &series)?;
        m.register("simulate.csv")?;
        if cfg.wants(Format::Dat) {
            output::write_simulate_dat(&m.path_for("simulate.dat"), &series)?;
            m.register("simulate.dat")?;
        }
        m.note(format!("wall_time_s = {:.3}", start.elapsed().as_secs_f64()));
        println!("wrote {} samples to {}", series.len(), m.dir().display());
        Ok((0, "complete".into()))
    })
}

fn scan(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let n_list = cfg.n_list()?;
    let template = cfg.model_spec(n_list[0])?;
    let (c0, c1) = cfg.amplitudes()?;
    let plan = ScanPlan {
        template,
        n_list,
        c0,
        c1,
        theta: cfg.pointer.theta,
        t_max: cfg.evolution.t_max,
        cfg: cfg.evolution_config()?,
        seeds: cfg.scan.seeds.clone(),
        max_tail_variation: cfg.scan.max_tail_variation,
        threads: cli.threads,
    };
    let dir = out_dir(cli, &cfg);
    with_manifest(&dir, "scan", &cfg, cli, |m| {
        let start = Instant::now();
        let report = scan_n(&plan)?;
        output::write_scan_csv(&m.path_for("scan.csv"), &report, cfg.scan.record_timing)?;
        m.register("scan.csv")?;
        let text = output::scan_report_text(&report);
        std::fs::write(m.path_for("scan_report.txt"), &text)?;
        m.register("scan_report.txt")?;
        if cfg.wants(Format::Dat) {
            output::write_scan_dat(&m.path_for("scan.dat"), &report)?;
            m.register("scan.dat")?;
        }
        for r in &report.rows {
            m.note(format!("n = {} seed = {} wall_time_s = {:.3}", r.n, r.seed, r.wall_time_s));
        }
        m.note(format!("total wall_time_s = {:.3}", start.elapsed().as_secs_f64()));
        print!("{text}");
        let flagged = report.flagged().count();
        if flagged > 0 && !cli.allow_unconverged {
            eprintln!("{flagged} row(s) did not converge; rerun with --allow-unconverged to accept");
            return Ok((EXIT_UNCONVERGED, "unconverged".into()));
        }
        if let Err(e) = extrapolate_limit(&report) {
            eprintln!("{e}");
            return Ok((EXIT_FIT_REFUSED, "fit refused".into()));
        }
        Ok((0, "complete".into()))
    })
}

fn check(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let (c0, c1) = cfg.amplitudes()?;
    let setup = CheckSetup {
        spec: cfg.single_spec()?,
        c0,
        c1,
        cfg: cfg.evolution_config()?,
        t_max: cfg.evolution.t_max,
    };
    let dir = out_dir(cli, &cfg);
    with_manifest(&dir, "check", &cfg, cli, |m| {
        let report = run_property_suite(&setup)?;
        let csv = report.to_csv();
        std::fs::write(m.path_for("check.csv"), &csv)?;
        m.register("check.csv")?;
        for r in &report.results {
            let status = match &r.status {
                Status::Pass => "PASS".to_string(),
                Status::Fail => "FAIL".to_string(),
                Status::Skipped(why) => format!("SKIP ({why})"),
            };
            println!("{:<26} {:<8} residual {:.3e} tol {:.1e}", r.name, status, r.residual, r.tolerance);
        }
        if report.all_pass() {
            Ok((0, "complete".into()))
        } else {
            Ok((EXIT_FAILED, "property failure".into()))
        }
    })
}

fn algebra(alpha: f64, alpha_prime: f64) -> Result<u8, Error> {
    if !(alpha.is_finite() && alpha_prime.is_finite()) {
        return Err(Error::InvalidParameter("angles must be finite".into()));
    }
    let norm = setup_commutator(alpha, alpha_prime);
    println!("commutator_norm = {norm:e}");
    println!(
        "verdict: {}",
        if norm <= COMPATIBLE_TOL { "compatible" } else { "incompatible" }
    );
    Ok(0)
}

fn macro_test(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let n_list = cfg.n_list()?;
    let (c0, c1) = cfg.amplitudes()?;
    let mt = &cfg.macro_test;
    let plan = MacroTestPlan {
        template: cfg.model_spec(n_list[0])?,
        c0,
        c1,
        k: mt.k,
        trials: mt.trials,
        seed: mt.seed,
        t_max: mt.t_max,
        cfg: cfg.evolution_config()?,
        slack: mt.slack,
    };
    let single;
    let family: &dyn ObservableFamily = match mt.family {
        FamilyChoice::Pointer => &PointerFamily,
        FamilyChoice::SingleUnit => {
            single = SingleUnitFamily { unit: 0 };
            &single
        }
    };
    let dir = out_dir(cli, &cfg);
    with_manifest(&dir, "macro-test", &cfg, cli, |m| {
        let verdict = is_macroscopic(family, &n_list, &plan)?;
        output::write_evidence_csv(&m.path_for("evidence.csv"), &verdict.evidence)?;
        m.register("evidence.csv")?;
        let text = output::macro_report_text(&verdict);
        std::fs::write(m.path_for("macro_report.txt"), &text)?;
        m.register("macro_report.txt")?;
        print!("{text}");
        if verdict.pass {
            Ok((0, "complete".into()))
        } else {
            Ok((EXIT_FAILED, "not macroscopic".into()))
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate => simulate(&cli),
        Command::Scan => scan(&cli),
        Command::Check => check(&cli),
        Command::Algebra { alpha, alpha_prime } => algebra(*alpha, *alpha_prime),
        Command::MacroTest => macro_test(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
