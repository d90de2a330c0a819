//! Property suite run by `pointer-limit check`: structural checks of the
//! Hamiltonian, integrator cross-checks and the algebra identities, each with
//! a measured residual against a fixed tolerance.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::born::{pointer_algebra, setup_commutator, setup_projector};
use crate::dynamics::{EvolutionConfig, Method, Propagator};
use crate::error::{Error, Result};
use crate::macro_obs::{substitution_invariance, Averaging, PointerFamily, SubstitutionTest};
use crate::model::{
    build_hamiltonian, closed_form_branch, initial_factors, initial_state, LinearOperator,
    ModelSpec, DENSE_MAX_UNITS,
};
use crate::state::{make_product_state, StateVector};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRIGGER_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-8;
pub const ORACLE_HORIZON: f64 = 50.0;
pub const CROSS_CHECK_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-9;
pub const REVERSIBILITY_TOL: f64 = 1e-8;
pub const ENERGY_TOL: f64 = 1e-9;
pub const LINEARITY_TOL: f64 = 1e-9;
pub const LINEARITY_SAMPLES: usize = 50;
pub const SUBSTITUTION_SLACK: f64 = 1e-12;
pub const WITHIN_SETUP_TOL: f64 = 1e-12;
pub const CROSS_SETUP_TOL: f64 = 1e-10;
/// Longest trajectory used by the unitarity and reversibility checks.
pub const MAX_CHECK_SPAN: f64 = 200.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub status: Status,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    /// Skipped properties do not count as failures.
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// One `name,status,residual,tolerance,detail` line per property.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,status,residual,tolerance,detail\n");
        for r in &self.results {
            let (status, detail) = match &r.status {
                Status::Pass => ("pass", r.detail.clone()),
                Status::Fail => ("fail", r.detail.clone()),
                Status::Skipped(why) => ("skipped", why.clone()),
            };
            out.push_str(&format!(
                "{},{},{:e},{:e},\"{}\"\n",
                r.name,
                status,
                r.residual,
                r.tolerance,
                detail.replace('"', "'")
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CheckSetup {
    pub spec: ModelSpec,
    pub c0: C64,
    pub c1: C64,
    pub cfg: EvolutionConfig,
    /// Trajectory length for unitarity and reversibility, capped at `MAX_CHECK_SPAN`.
    pub t_max: f64,
}

fn judged(name: &'static str, residual: f64, tolerance: f64, detail: impl Into<String>) -> PropertyResult {
    PropertyResult {
        name,
        status: if residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        },
        residual,
        tolerance,
        detail: detail.into(),
    }
}

fn skipped(name: &'static str, tolerance: f64, why: impl Into<String>) -> PropertyResult {
    PropertyResult {
        name,
        status: Status::Skipped(why.into()),
        residual: f64::NAN,
        tolerance,
        detail: String::new(),
    }
}

fn errored(name: &'static str, tolerance: f64, e: Error) -> PropertyResult {
    PropertyResult {
        name,
        status: Status::Fail,
        residual: f64::NAN,
        tolerance,
        detail: e.to_string(),
    }
}

fn settle(name: &'static str, tolerance: f64, r: Result<PropertyResult>) -> PropertyResult {
    r.unwrap_or_else(|e| errored(name, tolerance, e))
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn operator_scale(spec: &ModelSpec) -> f64 {
    1.0 + spec.couplings().iter().sum::<f64>() * 0.5 + spec.n() as f64 * spec.self_energy().abs()
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn hermiticity(op: &dyn LinearOperator, spec: &ModelSpec) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale = operator_scale(spec);
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let u = random_vector(op.dim(), &mut rng);
        let v = random_vector(op.dim(), &mut rng);
        let lhs = dotc(&u, &op.apply(&v));
        let rhs = dotc(&op.apply(&u), &v);
        let norms = dotc(&u, &u).re.sqrt() * dotc(&v, &v).re.sqrt();
        worst = worst.max((lhs - rhs).norm() / (norms * scale));
    }
    judged("hermiticity", worst, HERMITICITY_TOL, "relative |<u,Hv> - <Hu,v>| over 16 random pairs")
}

fn trigger(op: &dyn LinearOperator, spec: &ModelSpec) -> Result<PropertyResult> {
    const NAME: &str = "trigger_stationarity";
    if spec.self_energy() != 0.0 {
        return Ok(skipped(NAME, TRIGGER_TOL, "self energy is nonzero, so the ψ₀ branch is not stationary"));
    }
    let s = initial_state(spec, C64::new(1.0, 0.0), C64::new(0.0, 0.0))?;
    let hv = op.apply(s.amplitudes());
    let norm = dotc(&hv, &hv).re.sqrt();
    Ok(judged(NAME, norm, TRIGGER_TOL, "||H (ψ₀ ⊗ all excited)||"))
}

fn oracle(op: &dyn LinearOperator, spec: &ModelSpec, cfg: &EvolutionConfig) -> Result<PropertyResult> {
    const NAME: &str = "oracle_equivalence";
    if spec.self_energy() != 0.0 {
        return Ok(skipped(NAME, ORACLE_TOL, "closed-form branch requires zero self energy"));
    }
    let mut prop = Propagator::krylov(op, cfg);
    let mut s = initial_state(spec, C64::new(0.0, 0.0), C64::new(1.0, 0.0))?;
    let mut worst: f64 = 0.0;
    let steps = ORACLE_HORIZON as usize;
    for i in 1..=steps {
        s = prop.evolve(&s, 1.0)?;
        let exact = make_product_state(&closed_form_branch(spec, i as f64)?);
        worst = worst.max(sup_diff(s.amplitudes(), exact.amplitudes()));
    }
    Ok(judged(NAME, worst, ORACLE_TOL, "sup-norm vs closed-form ψ₁ branch on t = 1..50"))
}

fn dense_vs_krylov(op: &dyn LinearOperator, spec: &ModelSpec, s0: &StateVector, cfg: &EvolutionConfig) -> Result<PropertyResult> {
    let h = build_hamiltonian(spec)?;
    let mut dense = Propagator::new(&h, &cfg.clone().with_method(Method::DenseEigen))?;
    let mut krylov = Propagator::krylov(op, cfg);
    let (mut a, mut b) = (s0.clone(), s0.clone());
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        a = dense.evolve(&a, 5.0)?;
        b = krylov.evolve(&b, 5.0)?;
        worst = worst.max(a.distance(&b)?);
    }
    Ok(judged("dense_vs_krylov", worst, CROSS_CHECK_TOL, "l2 distance at t = 5, 10, …, 50"))
}

fn unitarity_and_energy(op: &dyn LinearOperator, s0: &StateVector, setup: &CheckSetup) -> Result<[PropertyResult; 2]> {
    let mut prop = Propagator::krylov(op, &setup.cfg);
    let energy = |s: &StateVector| dotc(s.amplitudes(), &op.apply(s.amplitudes())).re;
    let e0 = energy(s0);
    let span = setup.t_max.min(MAX_CHECK_SPAN);
    let steps = (span.ceil() as usize).max(1);
    let dt = span / steps as f64;
    let mut s = s0.clone();
    let (mut norm_err, mut energy_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..steps {
        s = prop.evolve(&s, dt)?;
        norm_err = norm_err.max(s.norm_error());
        energy_err = energy_err.max((energy(&s) - e0).abs());
    }
    let scale = operator_scale(&setup.spec);
    Ok([
        judged("unitarity", norm_err, UNITARITY_TOL, format!("max | ||ψ(t)|| - 1 | over [0, {span}]")),
        judged("energy_conservation", energy_err / scale, ENERGY_TOL, "relative drift of <H>"),
    ])
}

fn reversibility(op: &dyn LinearOperator, s0: &StateVector, setup: &CheckSetup) -> Result<PropertyResult> {
    let mut prop = Propagator::krylov(op, &setup.cfg);
    let span = setup.t_max.min(MAX_CHECK_SPAN);
    let forward = prop.evolve(s0, span)?;
    let back = prop.evolve(&forward, -span)?;
    Ok(judged("reversibility", back.distance(s0)?, REVERSIBILITY_TOL, format!("forward then backward over {span}")))
}

fn linearity(op: &dyn LinearOperator, setup: &CheckSetup) -> Result<PropertyResult> {
    let spec = &setup.spec;
    let mut prop = Propagator::krylov(op, &setup.cfg);
    let mut full = initial_state(spec, setup.c0, setup.c1)?;
    let mut b0 = initial_state(spec, C64::new(1.0, 0.0), C64::new(0.0, 0.0))?;
    let mut b1 = initial_state(spec, C64::new(0.0, 0.0), C64::new(1.0, 0.0))?;
    let dt = ORACLE_HORIZON / LINEARITY_SAMPLES as f64;
    let mut worst: f64 = 0.0;
    for _ in 0..LINEARITY_SAMPLES {
        full = prop.evolve(&full, dt)?;
        b0 = prop.evolve(&b0, dt)?;
        b1 = prop.evolve(&b1, dt)?;
        let combined: Vec<C64> = b0
            .amplitudes()
            .iter()
            .zip(b1.amplitudes())
            .map(|(x, y)| setup.c0 * x + setup.c1 * y)
            .collect();
        worst = worst.max(sup_diff(full.amplitudes(), &combined));
    }
    Ok(judged("linearity", worst, LINEARITY_TOL, "superposition vs weighted branches at 50 times"))
}

fn substitution(setup: &CheckSetup) -> Result<PropertyResult> {
    let spec = &setup.spec;
    let n = spec.n();
    if n < 2 {
        return Ok(skipped("substitution_bound", SUBSTITUTION_SLACK, "needs at least two units"));
    }
    let test = SubstitutionTest {
        base: initial_factors(spec, setup.c0, setup.c1)?,
        k: 1,
        trials: 200,
        seed: 11,
    };
    let out = substitution_invariance(&PointerFamily, &test, &Averaging::Static)?;
    let excess = out.max_deviation - 1.0 / n as f64;
    Ok(judged(
        "substitution_bound",
        excess.max(0.0),
        SUBSTITUTION_SLACK,
        format!("max |Δ pointer| = {:.3e} against 1/n = {:.3e}", out.max_deviation, 1.0 / n as f64),
    ))
}

fn algebra(spec: &ModelSpec) -> Result<[PropertyResult; 2]> {
    let alpha = spec.basis_angle();
    let within = pointer_algebra(setup_projector(alpha))?.max_commutator();
    let mut cross: f64 = 0.0;
    for i in 0..=24 {
        let delta = PI * i as f64 / 24.0;
        let expect = (delta.sin() * delta.cos()).abs();
        cross = cross.max((setup_commutator(alpha, alpha + delta) - expect).abs());
    }
    Ok([
        judged("within_setup_commutators", within, WITHIN_SETUP_TOL, "commutators among I, P, P² and aI + bP"),
        judged("cross_setup_commutator", cross, CROSS_SETUP_TOL, "||[P(α), P(α+Δ)]|| vs |sinΔ cosΔ|, 25 angles"),
    ])
}

/// Runs the suite on the model's own Hamiltonian.
pub fn run_property_suite(setup: &CheckSetup) -> Result<SuiteReport> {
    let h = build_hamiltonian(&setup.spec)?;
    run_property_suite_with(setup, &h)
}

/// Runs the suite with `op` standing in for the Hamiltonian. Dense
/// references and closed forms are still built from `setup.spec`.
pub fn run_property_suite_with(setup: &CheckSetup, op: &dyn LinearOperator) -> Result<SuiteReport> {
    let spec = &setup.spec;
    if spec.n() > DENSE_MAX_UNITS {
        return Err(Error::DenseUnavailable {
            n: spec.n(),
            max: DENSE_MAX_UNITS,
        });
    }
    if op.dim() != 2usize << spec.n() {
        return Err(Error::DimensionMismatch {
            left: op.dim(),
            right: 2usize << spec.n(),
        });
    }
    setup.cfg.validate()?;
    let s0 = initial_state(spec, setup.c0, setup.c1)?;
    let mut results = vec![hermiticity(op, spec)];
    results.push(settle("trigger_stationarity", TRIGGER_TOL, trigger(op, spec)));
    results.push(settle("oracle_equivalence", ORACLE_TOL, oracle(op, spec, &setup.cfg)));
    results.push(settle("dense_vs_krylov", CROSS_CHECK_TOL, dense_vs_krylov(op, spec, &s0, &setup.cfg)));
    match unitarity_and_energy(op, &s0, setup) {
        Ok(pair) => results.extend(pair),
        Err(e) => {
            let msg = e.to_string();
            results.push(errored("unitarity", UNITARITY_TOL, Error::InvalidParameter(msg.clone())));
            results.push(errored("energy_conservation", ENERGY_TOL, Error::InvalidParameter(msg)));
        }
    }
    results.push(settle("reversibility", REVERSIBILITY_TOL, reversibility(op, &s0, setup)));
    results.push(settle("linearity", LINEARITY_TOL, linearity(op, setup)));
    results.push(settle("substitution_bound", SUBSTITUTION_SLACK, substitution(setup)));
    results.extend(algebra(spec)?);
    Ok(SuiteReport { results })
}
