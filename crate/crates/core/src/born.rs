//! Decoherence and Born-rule estimators on the full entangled trajectory, the
//! distance to Bell's two-point mixture, and the abelian algebra of one setup.

use num_complex::Complex64 as C64;

use crate::dynamics::{
    sample_trajectory, time_average, uniform_times, EvolutionConfig, Observable, Propagator,
    TimeAverage, TimeSeries,
};
use crate::error::{Error, Result};
use crate::macro_obs::{pointer_expectation, threshold_probability, PointerObservable};
use crate::mat2::Mat2;
use crate::model::{build_hamiltonian, initial_state, ModelSpec};
use crate::state::{branch_decompose_measured, partial_trace_particle, StateVector};

/// Tail variation above which a time average counts as unconverged.
pub const DEFAULT_MAX_TAIL_VARIATION: f64 = 0.01;

/// Minimum averaging window, in characteristic times 1/ḡ.
pub const MIN_BORN_SPAN: f64 = 50.0;

pub const COL_POINTER: &str = "pointer_expectation";
pub const COL_THRESHOLD: &str = "threshold_prob";
pub const COL_RHO01: &str = "rho01_abs";
pub const COL_OVERLAP: &str = "overlap_D";
pub const COL_NORM_ERROR: &str = "norm_error";

/// Every per-sample quantity recorded along a measurement trajectory. The
/// overlap column is NaN when a branch is absent.
pub fn measure_trajectory(
    spec: &ModelSpec,
    c0: C64,
    c1: C64,
    theta: f64,
    times: &[f64],
    cfg: &EvolutionConfig,
) -> Result<TimeSeries> {
    PointerObservable::new(spec.n(), theta)?;
    let h = build_hamiltonian(spec)?;
    let mut prop = Propagator::new(&h, cfg)?;
    let s0 = initial_state(spec, c0, c1)?;
    let alpha = spec.basis_angle();
    let observables = [
        Observable::new(COL_POINTER, pointer_expectation),
        Observable::new(COL_THRESHOLD, move |s: &StateVector| {
            threshold_probability(s, theta).expect("θ validated")
        }),
        Observable::new(COL_RHO01, move |s: &StateVector| {
            partial_trace_particle(s)
                .in_measured_basis(alpha)
                .coherence()
                .norm()
        }),
        Observable::new(COL_OVERLAP, move |s: &StateVector| {
            branch_decompose_measured(s, alpha)
                .normalized_overlap()
                .unwrap_or(f64::NAN)
        }),
        Observable::new(COL_NORM_ERROR, StateVector::norm_error),
    ];
    Ok(sample_trajectory(&mut prop, &s0, times, &observables)?
        .with_characteristic_period(spec.characteristic_time()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceSeries {
    pub times: Vec<f64>,
    pub rho01_abs: Vec<f64>,
    /// D(t) = |⟨Â₀(t)|Â₁(t)⟩|; `None` when a branch is absent.
    pub overlap: Option<Vec<f64>>,
    pub time_avg_d: Option<TimeAverage>,
}

fn is_degenerate(c0: C64, c1: C64) -> bool {
    c0.norm() < crate::state::DEGENERATE_BRANCH || c1.norm() < crate::state::DEGENERATE_BRANCH
}

pub fn decoherence_series(
    spec: &ModelSpec,
    c0: C64,
    c1: C64,
    times: &[f64],
    cfg: &EvolutionConfig,
) -> Result<DecoherenceSeries> {
    let series = measure_trajectory(spec, c0, c1, crate::macro_obs::DEFAULT_THETA, times, cfg)?;
    decoherence_from(&series, c0, c1)
}

pub(crate) fn decoherence_from(series: &TimeSeries, c0: C64, c1: C64) -> Result<DecoherenceSeries> {
    let degenerate = is_degenerate(c0, c1);
    Ok(DecoherenceSeries {
        times: series.times().to_vec(),
        rho01_abs: series.values(COL_RHO01)?.to_vec(),
        overlap: (!degenerate)
            .then(|| series.values(COL_OVERLAP).map(<[f64]>::to_vec))
            .transpose()?,
        time_avg_d: (!degenerate)
            .then(|| time_average(series, COL_OVERLAP))
            .transpose()?,
    })
}

/// Time-averaged detection probability against the Born target |c₁|².
#[derive(Clone, Debug, PartialEq)]
pub struct BornEstimate {
    pub p_hat: f64,
    pub target: f64,
    pub abs_error: f64,
    pub n: usize,
    pub t_max: f64,
    pub theta: f64,
    pub tail_variation: f64,
    pub converged: bool,
    /// Time-averaged branch overlap, which bounds the interference cross term.
    pub time_avg_d: Option<f64>,
}

impl BornEstimate {
    /// Total-variation distance between the two-outcome distributions
    /// (1 − p̂, p̂) and (|c₀|², |c₁|²), which reduces to |p̂ − |c₁|²|.
    pub fn mixture_distance(&self) -> f64 {
        (self.p_hat - self.target).abs()
    }
}

pub(crate) fn born_from(
    series: &TimeSeries,
    spec: &ModelSpec,
    c0: C64,
    c1: C64,
    theta: f64,
    max_tail_variation: f64,
) -> Result<BornEstimate> {
    let p = time_average(series, COL_THRESHOLD)?;
    let target = c1.norm_sqr();
    let time_avg_d = if is_degenerate(c0, c1) {
        None
    } else {
        Some(time_average(series, COL_OVERLAP)?.mean)
    };
    Ok(BornEstimate {
        p_hat: p.mean,
        target,
        abs_error: (p.mean - target).abs(),
        n: spec.n(),
        t_max: p.span,
        theta,
        tail_variation: p.tail_variation,
        converged: p.tail_variation <= max_tail_variation,
        time_avg_d,
    })
}

pub(crate) fn check_born_span(spec: &ModelSpec, t_max: f64) -> Result<()> {
    let needed = MIN_BORN_SPAN * spec.characteristic_time();
    if t_max < needed {
        return Err(Error::InvalidParameter(format!(
            "averaging window T = {t_max} is shorter than {MIN_BORN_SPAN} characteristic times ({needed:.3})"
        )));
    }
    Ok(())
}

pub fn born_estimate(
    spec: &ModelSpec,
    c0: C64,
    c1: C64,
    theta: f64,
    t_max: f64,
    cfg: &EvolutionConfig,
) -> Result<BornEstimate> {
    check_born_span(spec, t_max)?;
    let times = uniform_times(t_max, cfg.dt);
    let series = measure_trajectory(spec, c0, c1, theta, &times, cfg)?;
    born_from(&series, spec, c0, c1, theta, DEFAULT_MAX_TAIL_VARIATION)
}

pub fn mixture_distance(
    spec: &ModelSpec,
    c0: C64,
    c1: C64,
    theta: f64,
    t_max: f64,
    cfg: &EvolutionConfig,
) -> Result<f64> {
    Ok(born_estimate(spec, c0, c1, theta, t_max, cfg)?.mixture_distance())
}

/// Projector P₁(α) onto ψ₁(α) = cos α·ψ₁ + sin α·ψ₀.
pub fn setup_projector(alpha: f64) -> Mat2 {
    let (s, c) = alpha.sin_cos();
    Mat2::from_real([[s * s, s * c], [s * c, c * c]])
}

/// Operator norm of [P₁(α), P₁(α′)]; zero iff the two setups are compatible.
pub fn setup_commutator(alpha: f64, alpha_prime: f64) -> f64 {
    setup_projector(alpha)
        .commutator(&setup_projector(alpha_prime))
        .operator_norm()
}

/// The commutative algebra {aI + bG} generated by one self-adjoint 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerAlgebra {
    generator: Mat2,
}

const ALGEBRA_TOL: f64 = 1e-12;

pub fn pointer_algebra(generator: Mat2) -> Result<PointerAlgebra> {
    let residual = generator.hermiticity_residual();
    if residual > ALGEBRA_TOL {
        return Err(Error::InvalidParameter(format!(
            "generator is not self-adjoint (residual {residual:.3e})"
        )));
    }
    Ok(PointerAlgebra { generator })
}

impl PointerAlgebra {
    pub fn generator(&self) -> &Mat2 {
        &self.generator
    }

    pub fn element(&self, a: C64, b: C64) -> Mat2 {
        Mat2::IDENTITY.scale(a) + self.generator.scale(b)
    }

    /// G with its scalar part removed.
    fn traceless(&self) -> Mat2 {
        self.generator - Mat2::IDENTITY.scale(self.generator.trace() * 0.5)
    }

    /// 1 when G is a multiple of the identity, otherwise 2.
    pub fn dimension(&self) -> usize {
        if self.traceless().max_abs() <= ALGEBRA_TOL {
            1
        } else {
            2
        }
    }

    /// Distance from `m` to the span {I, G} in the Frobenius inner product.
    pub fn membership_residual(&self, m: &Mat2) -> f64 {
        let scalar = Mat2::IDENTITY.scale(m.trace() * 0.5);
        let rest = *m - scalar;
        let t = self.traceless();
        let tt = frobenius(&t, &t).re;
        let projected = if tt > ALGEBRA_TOL * ALGEBRA_TOL {
            t.scale(frobenius(&t, &rest) / tt)
        } else {
            Mat2::ZERO
        };
        (rest - projected).max_abs()
    }

    pub fn contains(&self, m: &Mat2) -> bool {
        self.membership_residual(m) <= 1e-12
    }

    /// Largest commutator norm among I, G, G² and a spread of elements aI + bG.
    pub fn max_commutator(&self) -> f64 {
        let g = self.generator;
        let mut elements = vec![Mat2::IDENTITY, g, g * g];
        for (a, b) in [(0.3, -1.7), (2.0, 0.5), (-1.1, 3.3)] {
            elements.push(self.element(C64::from(a), C64::new(b, 0.0)));
        }
        let mut worst: f64 = 0.0;
        for x in &elements {
            for y in &elements {
                worst = worst.max(x.commutator(y).operator_norm());
            }
        }
        worst
    }
}

fn frobenius(a: &Mat2, b: &Mat2) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            s += a.get(i, j).conj() * b.get(i, j);
        }
    }
    s
}
