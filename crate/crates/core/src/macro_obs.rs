//! Macroscopic observables: families f_n whose trajectory time averages are
//! insensitive to substituting finitely many tensor factors, and the pointer
//! variable (fraction of de-excited units) as the canonical example.

use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{sample_trajectory, time_average, uniform_times, EvolutionConfig, Observable, Propagator};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, initial_factors, ModelSpec};
use crate::state::{deexcited_count, make_product_state, unit_mask, ProductFactors, StateVector};

/// Default detection threshold on the de-excited fraction.
pub const DEFAULT_THETA: f64 = 0.25;

/// Smallest de-excited count m with m/n ≥ θ.
pub fn threshold_count(n: usize, theta: f64) -> usize {
    (theta * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// The pointer variable M_n: diagonal, with value m/n on basis states having
/// m de-excited units, and its threshold projector Π_θ onto m/n ≥ θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerObservable {
    n: usize,
    theta: f64,
}

impl PointerObservable {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold θ must lie in (0, 1), got {theta}"
            )));
        }
        Ok(Self { n, theta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weight(&self, index: usize) -> f64 {
        deexcited_count(self.n, index) as f64 / self.n as f64
    }

    /// Diagonal entry of Π_θ.
    pub fn projector(&self, index: usize) -> f64 {
        if deexcited_count(self.n, index) >= threshold_count(self.n, self.theta) {
            1.0
        } else {
            0.0
        }
    }

    /// Distinct eigenvalues {0, 1/n, …, 1}.
    pub fn spectrum(&self) -> Vec<f64> {
        (0..=self.n).map(|m| m as f64 / self.n as f64).collect()
    }
}

/// ⟨s|M_n|s⟩
pub fn pointer_expectation(s: &StateVector) -> f64 {
    let n = s.n();
    let sum: f64 = s
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| a.norm_sqr() * deexcited_count(n, i) as f64)
        .sum();
    sum / n as f64
}

/// ⟨s|Π_θ|s⟩
pub fn threshold_probability(s: &StateVector, theta: f64) -> Result<f64> {
    let obs = PointerObservable::new(s.n(), theta)?;
    let m_min = threshold_count(obs.n, obs.theta);
    Ok(s.amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| deexcited_count(obs.n, *i) >= m_min)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// A sequence {f_n} of real functions on the joint state spaces.
pub trait ObservableFamily: Sync {
    fn name(&self) -> String;
    fn evaluate(&self, s: &StateVector) -> f64;
}

/// f_n = pointer expectation.
#[derive(Clone, Copy, Debug, Default)]
pub struct PointerFamily;

impl ObservableFamily for PointerFamily {
    fn name(&self) -> String {
        "pointer".into()
    }
    fn evaluate(&self, s: &StateVector) -> f64 {
        pointer_expectation(s)
    }
}

/// De-excitation probability of a single unit. Not macroscopic: one
/// substituted factor moves it by O(1).
#[derive(Clone, Copy, Debug, Default)]
pub struct SingleUnitFamily {
    pub unit: usize,
}

impl ObservableFamily for SingleUnitFamily {
    fn name(&self) -> String {
        format!("single-unit-{}", self.unit + 1)
    }
    fn evaluate(&self, s: &StateVector) -> f64 {
        let mask = unit_mask(s.n(), self.unit.min(s.n() - 1));
        s.amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantFamily(pub f64);

impl ObservableFamily for ConstantFamily {
    fn name(&self) -> String {
        format!("constant-{}", self.0)
    }
    fn evaluate(&self, _: &StateVector) -> f64 {
        self.0
    }
}

/// How f_n is evaluated on a product sequence.
#[derive(Clone, Debug)]
pub enum Averaging {
    /// f_n on the product state itself.
    Static,
    /// Trapezoidal time average over [0, t_max] of the trajectory under `spec`.
    TimeAveraged {
        spec: ModelSpec,
        cfg: EvolutionConfig,
        t_max: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SubstitutionTest {
    pub base: ProductFactors,
    /// Number of unit factors replaced per trial.
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionOutcome {
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// Largest summed tail variation of the two averages in any trial.
    pub averaging_error: f64,
}

fn random_factor(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let mut draw = || C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    let (a, b) = (draw(), draw());
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / norm, b / norm]
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// k-subset number `rank` of {0..n} in lexicographic order.
fn subset_by_rank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for remaining in (1..=k).rev() {
        loop {
            let count = binomial(n - next - 1, remaining - 1);
            if rank < count {
                out.push(next);
                next += 1;
                break;
            }
            rank -= count;
            next += 1;
        }
    }
    out
}

/// Substituted positions and factors per trial. Every k-subset is visited when
/// `trials ≥ C(n, k)`; otherwise subsets are drawn at random.
fn plan_substitutions(test: &SubstitutionTest) -> Vec<Vec<(usize, [C64; 2])>> {
    let n = test.base.n();
    let mut rng = ChaCha8Rng::seed_from_u64(test.seed);
    let total = binomial(n, test.k);
    (0..test.trials)
        .map(|trial| {
            let positions = if total <= test.trials as u128 {
                subset_by_rank(n, test.k, trial as u128 % total)
            } else {
                sample(&mut rng, n, test.k).into_vec()
            };
            positions
                .into_iter()
                .map(|p| (p, random_factor(&mut rng)))
                .collect()
        })
        .collect()
}

fn averaged_value(
    family: &dyn ObservableFamily,
    factors: &ProductFactors,
    averaging: &Averaging,
) -> Result<(f64, f64)> {
    let state = make_product_state(factors);
    match averaging {
        Averaging::Static => Ok((family.evaluate(&state), 0.0)),
        Averaging::TimeAveraged { spec, cfg, t_max } => {
            let h = build_hamiltonian(spec)?;
            let mut prop = Propagator::new(&h, cfg)?;
            let times = uniform_times(*t_max, cfg.dt);
            let obs = [Observable::new("f", |s: &StateVector| family.evaluate(s))];
            let series = sample_trajectory(&mut prop, &state, &times, &obs)?;
            let avg = time_average(&series, "f")?;
            Ok((avg.mean, avg.tail_variation))
        }
    }
}

/// Max |⟨f_n(v)⟩ − ⟨f_n(v′)⟩| over trials where v′ differs from v in k factors.
pub fn substitution_invariance(
    family: &dyn ObservableFamily,
    test: &SubstitutionTest,
    averaging: &Averaging,
) -> Result<SubstitutionOutcome> {
    let n = test.base.n();
    if test.k >= n {
        return Err(Error::InvalidParameter(format!(
            "substitution count k = {} must be < n = {n}",
            test.k
        )));
    }
    if let Averaging::TimeAveraged { spec, .. } = averaging {
        if spec.n() != n {
            return Err(Error::DimensionMismatch {
                left: spec.n(),
                right: n,
            });
        }
    }
    let (base_value, base_tail) = averaged_value(family, &test.base, averaging)?;
    let plans = plan_substitutions(test);
    let results: Vec<Result<(f64, f64)>> = plans
        .par_iter()
        .map(|subs| {
            if subs.is_empty() {
                return Ok((0.0, base_tail));
            }
            let mut factors = test.base.clone();
            for (pos, f) in subs {
                factors = factors.with_unit(*pos, *f)?;
            }
            let (value, tail) = averaged_value(family, &factors, averaging)?;
            Ok(((value - base_value).abs(), base_tail + tail))
        })
        .collect();
    let mut deviations = Vec::with_capacity(results.len());
    let mut averaging_error: f64 = 0.0;
    for r in results {
        let (d, e) = r?;
        deviations.push(d);
        averaging_error = averaging_error.max(e);
    }
    Ok(SubstitutionOutcome {
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        deviations,
        averaging_error,
    })
}

/// Settings for `is_macroscopic`.
#[derive(Clone, Debug)]
pub struct MacroTestPlan {
    /// Coupling distribution, basis and self energy; n is replaced per entry.
    pub template: ModelSpec,
    pub c0: C64,
    pub c1: C64,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Averaging window; 0 evaluates f_n on the product states directly.
    pub t_max: f64,
    pub cfg: EvolutionConfig,
    /// Allowance on top of k/n plus the averaging error.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceRow {
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleRow {
    pub n: usize,
    pub max_deviation: f64,
    pub allowed: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroVerdict {
    pub family: String,
    pub pass: bool,
    pub schedule: Vec<ScheduleRow>,
    pub evidence: Vec<EvidenceRow>,
}

/// Pass iff for every n the max substitution deviation stays within
/// k/n + averaging error + slack, a schedule that shrinks to zero with n.
pub fn is_macroscopic(
    family: &dyn ObservableFamily,
    n_list: &[usize],
    plan: &MacroTestPlan,
) -> Result<MacroVerdict> {
    if n_list.len() < 3 {
        return Err(Error::InsufficientPoints {
            got: n_list.len(),
            need: 3,
        });
    }
    let mut schedule = Vec::new();
    let mut evidence = Vec::new();
    for &n in n_list {
        let spec = plan.template.with_units(n)?;
        let base = initial_factors(&spec, plan.c0, plan.c1)?;
        let test = SubstitutionTest {
            base,
            k: plan.k,
            trials: plan.trials,
            seed: plan.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        };
        let averaging = if plan.t_max > 0.0 {
            Averaging::TimeAveraged {
                spec,
                cfg: plan.cfg.clone(),
                t_max: plan.t_max,
            }
        } else {
            Averaging::Static
        };
        let outcome = substitution_invariance(family, &test, &averaging)?;
        let allowed = plan.k as f64 / n as f64 + outcome.averaging_error + plan.slack;
        evidence.extend(outcome.deviations.iter().enumerate().map(|(trial, &d)| EvidenceRow {
            n,
            k: plan.k,
            trial,
            deviation: d,
        }));
        schedule.push(ScheduleRow {
            n,
            max_deviation: outcome.max_deviation,
            allowed,
            within: outcome.max_deviation <= allowed,
        });
    }
    Ok(MacroVerdict {
        family: family.name(),
        pass: schedule.iter().all(|r| r.within),
        schedule,
        evidence,
    })
}
