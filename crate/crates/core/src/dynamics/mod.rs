//! Unitary time evolution under a time-independent Hamiltonian.

mod dense;
mod krylov;
mod trajectory;

pub use dense::DensePropagator;
pub use krylov::{KrylovPropagator, KrylovStats, TOLERANCE_HORIZON};
pub use trajectory::{
    sample_trajectory, time_average, uniform_times, Observable, TimeAverage, TimeSeries,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BranchOperator, Hamiltonian, LinearOperator, DENSE_MAX_UNITS};
use crate::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dense diagonalization, n ≤ 12.
    DenseEigen,
    /// Lanczos–Krylov with a posteriori step control.
    IterativeKrylov,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub method: Method,
    pub krylov_dim: usize,
    /// Sampling step for trajectories.
    pub dt: f64,
    /// Global error budget over `TOLERANCE_HORIZON` time units.
    pub tolerance: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            method: Method::IterativeKrylov,
            krylov_dim: 16,
            dt: 0.1,
            tolerance: 1e-9,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 4 {
            return Err(Error::InvalidParameter(format!(
                "krylov_dim must be >= 4, got {}",
                self.krylov_dim
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

/// Amplitudes split along the measured particle basis: `v = ψ₀(α) ⊗ b0 + ψ₁(α) ⊗ b1`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MeasuredSplit {
    psi: [[C64; 2]; 2],
}

impl MeasuredSplit {
    pub(crate) fn new(h: &Hamiltonian) -> Self {
        let spec = h.spec();
        Self {
            psi: [spec.psi0_measured(), spec.psi1_measured()],
        }
    }

    pub(crate) fn split(&self, v: &[C64], b0: &mut [C64], b1: &mut [C64]) {
        let [p0, p1] = self.psi;
        let (v0, v1) = v.split_at(v.len() / 2);
        for (i, (x, y)) in v0.iter().zip(v1).enumerate() {
            b0[i] = p0[0].conj() * x + p0[1].conj() * y;
            b1[i] = p1[0].conj() * x + p1[1].conj() * y;
        }
    }

    pub(crate) fn join(&self, b0: &[C64], b1: &[C64], v: &mut [C64]) {
        let [p0, p1] = self.psi;
        let (v0, v1) = v.split_at_mut(b0.len());
        for (i, (x, y)) in v0.iter_mut().zip(v1.iter_mut()).enumerate() {
            *x = p0[0] * b0[i] + p1[0] * b1[i];
            *y = p0[1] * b0[i] + p1[1] * b1[i];
        }
    }
}

/// Krylov propagation of each measured-basis block separately; H never
/// mixes the two branches, so this is exact and works on half-size vectors.
pub struct BranchKrylov<'h> {
    split: MeasuredSplit,
    blocks: [KrylovPropagator<BranchOperator<'h>>; 2],
    scratch: [Vec<C64>; 2],
}

impl<'h> BranchKrylov<'h> {
    fn new(h: &'h Hamiltonian, cfg: &EvolutionConfig) -> Self {
        let half = h.dim() / 2;
        let block = |b| KrylovPropagator::new(h.branch_operator(b), cfg.krylov_dim, cfg.tolerance);
        Self {
            split: MeasuredSplit::new(h),
            blocks: [block(0), block(1)],
            scratch: [vec![C64::new(0.0, 0.0); half], vec![C64::new(0.0, 0.0); half]],
        }
    }

    fn advance(&mut self, v: &mut [C64], t: f64) -> Result<()> {
        let [b0, b1] = &mut self.scratch;
        self.split.split(v, b0, b1);
        self.blocks[0].advance(b0, t)?;
        self.blocks[1].advance(b1, t)?;
        self.split.join(b0, b1, v);
        Ok(())
    }

    /// Accumulated statistics of the (ψ₀, ψ₁) blocks.
    pub fn stats(&self) -> [KrylovStats; 2] {
        [self.blocks[0].stats(), self.blocks[1].stats()]
    }
}

/// A reusable propagator bound to one Hamiltonian.
pub enum Propagator<'h> {
    /// Krylov on an arbitrary operator.
    Krylov(KrylovPropagator<&'h dyn LinearOperator>),
    Branched(BranchKrylov<'h>),
    Dense(Box<DensePropagator>),
}

impl<'h> Propagator<'h> {
    pub fn new(h: &'h Hamiltonian, cfg: &EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        match cfg.method {
            Method::IterativeKrylov => Ok(Propagator::Branched(BranchKrylov::new(h, cfg))),
            Method::DenseEigen => {
                if h.n() > DENSE_MAX_UNITS {
                    return Err(Error::DenseUnavailable {
                        n: h.n(),
                        max: DENSE_MAX_UNITS,
                    });
                }
                Ok(Propagator::Dense(Box::new(DensePropagator::new(h)?)))
            }
        }
    }

    /// Krylov propagation for any Hermitian operator.
    pub fn krylov(op: &'h dyn LinearOperator, cfg: &EvolutionConfig) -> Self {
        Propagator::Krylov(KrylovPropagator::new(op, cfg.krylov_dim, cfg.tolerance))
    }

    pub(crate) fn advance(&mut self, amps: &mut [C64], t: f64) -> Result<()> {
        match self {
            Propagator::Krylov(k) => k.advance(amps, t),
            Propagator::Branched(b) => b.advance(amps, t),
            Propagator::Dense(d) => {
                d.advance(amps, t);
                Ok(())
            }
        }
    }

    /// exp(−iHt)·s. Negative `t` evolves backwards.
    pub fn evolve(&mut self, s: &StateVector, t: f64) -> Result<StateVector> {
        let mut amps = s.amplitudes().to_vec();
        self.advance(&mut amps, t)?;
        Ok(StateVector::from_evolved(s.n(), amps))
    }
}

/// One-shot evolution; builds a propagator for the call.
pub fn evolve(h: &Hamiltonian, s: &StateVector, t: f64, cfg: &EvolutionConfig) -> Result<StateVector> {
    if s.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: s.dim(),
            right: h.dim(),
        });
    }
    Propagator::new(h, cfg)?.evolve(s, t)
}
