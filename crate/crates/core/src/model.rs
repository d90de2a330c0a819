//! The amplifier model: n two-level units, all initially excited, coupled to a
//! two-state particle through a time-independent Hamiltonian
//!
//! ```text
//! H = P₁(α) ⊗ Σ_k (g_k / 2) X_k  +  ε · I ⊗ Σ_k Z_k
//! ```
//!
//! `P₁(α)` projects onto the measured particle state ψ₁(α) = cos α·ψ₁ + sin α·ψ₀,
//! `X_k` flips unit k and `Z_k` is +1 on an excited unit, −1 on a de-excited one.
//! With ε = 0 the ψ₀(α) branch is stationary and the ψ₁(α) branch drives every
//! unit from |1⟩ towards |0⟩. ħ = 1; times are in units of 1/g.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{
    check_units, make_product_state, unit_mask, ProductFactors, StateVector, NORM_TOL,
};

/// Largest n for which dense matrices are built.
pub const DENSE_MAX_UNITS: usize = 12;

/// Default disorder range for couplings.
pub const DEFAULT_G_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingKind {
    Uniform { g: f64 },
    /// Couplings drawn uniformly from `[g_min, g_max]`. The draw for a given
    /// `n` uses stream `n` of a ChaCha8 generator seeded with `seed`.
    Disordered { seed: u64, g_min: f64, g_max: f64 },
}

impl CouplingKind {
    fn validate(&self) -> Result<()> {
        match *self {
            CouplingKind::Uniform { g } if !(g > 0.0 && g.is_finite()) => Err(
                Error::InvalidParameter(format!("uniform coupling must be positive, got {g}")),
            ),
            CouplingKind::Disordered { g_min, g_max, .. }
                if !(g_min > 0.0 && g_max >= g_min && g_max.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "disordered coupling range [{g_min}, {g_max}] must satisfy 0 < g_min <= g_max"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn draw(&self, n: usize) -> Vec<f64> {
        match *self {
            CouplingKind::Uniform { g } => vec![g; n],
            CouplingKind::Disordered { seed, g_min, g_max } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(n as u64);
                let dist = Uniform::new_inclusive(g_min, g_max);
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        }
    }
}

/// Full description of the amplifier; determines the Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    n: usize,
    couplings: Vec<f64>,
    coupling_kind: CouplingKind,
    basis_angle: f64,
    self_energy: f64,
}

impl ModelSpec {
    pub fn new(n: usize, coupling_kind: CouplingKind) -> Result<Self> {
        check_units(n)?;
        coupling_kind.validate()?;
        Ok(Self {
            n,
            couplings: coupling_kind.draw(n),
            coupling_kind,
            basis_angle: 0.0,
            self_energy: 0.0,
        })
    }

    pub fn uniform(n: usize, g: f64) -> Result<Self> {
        Self::new(n, CouplingKind::Uniform { g })
    }

    pub fn disordered(n: usize, seed: u64, g_min: f64, g_max: f64) -> Result<Self> {
        Self::new(n, CouplingKind::Disordered { seed, g_min, g_max })
    }

    pub fn with_basis_angle(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::PI).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "basis angle must lie in [0, π), got {alpha}"
            )));
        }
        self.basis_angle = alpha;
        Ok(self)
    }

    pub fn with_self_energy(mut self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter("self energy must be finite".into()));
        }
        self.self_energy = epsilon;
        Ok(self)
    }

    /// Same coupling distribution, basis and self energy, with `n` units and a
    /// fresh coupling draw.
    pub fn with_units(&self, n: usize) -> Result<Self> {
        Ok(Self::new(n, self.coupling_kind.clone())?
            .with_basis_angle(self.basis_angle)?
            .with_self_energy(self.self_energy)?)
    }

    /// Same spec with the seed of a disordered draw replaced.
    pub fn with_seed(&self, seed: u64) -> Result<Self> {
        let kind = match self.coupling_kind {
            CouplingKind::Disordered { g_min, g_max, .. } => {
                CouplingKind::Disordered { seed, g_min, g_max }
            }
            ref k => k.clone(),
        };
        Ok(Self::new(self.n, kind)?
            .with_basis_angle(self.basis_angle)?
            .with_self_energy(self.self_energy)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn coupling_kind(&self) -> &CouplingKind {
        &self.coupling_kind
    }

    pub fn basis_angle(&self) -> f64 {
        self.basis_angle
    }

    pub fn self_energy(&self) -> f64 {
        self.self_energy
    }

    /// 1/ḡ, the natural time unit of the model.
    pub fn characteristic_time(&self) -> f64 {
        self.couplings.len() as f64 / self.couplings.iter().sum::<f64>()
    }

    /// ψ₀(α) in the computational particle basis.
    pub fn psi0_measured(&self) -> [C64; 2] {
        let (s, c) = self.basis_angle.sin_cos();
        [C64::from(c), C64::from(-s)]
    }

    /// ψ₁(α) in the computational particle basis.
    pub fn psi1_measured(&self) -> [C64; 2] {
        let (s, c) = self.basis_angle.sin_cos();
        [C64::from(s), C64::from(c)]
    }
}

/// Matrix-free linear map on joint amplitude vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, v: &[C64], out: &mut [C64]);

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn nonzero_count(&self, tol: f64) -> usize {
        self.data.iter().filter(|z| z.norm() > tol).count()
    }
}

/// The joint Hamiltonian H^com of particle and amplifier.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    spec: ModelSpec,
    half_couplings: Vec<f64>,
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<Hamiltonian> {
    check_units(spec.n)?;
    Ok(Hamiltonian {
        half_couplings: spec.couplings.iter().map(|g| 0.5 * g).collect(),
        spec: spec.clone(),
    })
}

impl Hamiltonian {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Σ_k (g_k/2) X_k on one apparatus half, accumulated into `out`.
    fn add_flips(&self, v: &[C64], out: &mut [C64]) {
        let n = self.spec.n;
        for (k, &h) in self.half_couplings.iter().enumerate() {
            let m = unit_mask(n, k);
            // blocks of 2m amplitudes: the unit is clear in the first half, set in the second
            for (vb, ob) in v.chunks_exact(2 * m).zip(out.chunks_exact_mut(2 * m)) {
                let (v_lo, v_hi) = vb.split_at(m);
                let (o_lo, o_hi) = ob.split_at_mut(m);
                for (o, x) in o_lo.iter_mut().zip(v_hi) {
                    *o += x * h;
                }
                for (o, x) in o_hi.iter_mut().zip(v_lo) {
                    *o += x * h;
                }
            }
        }
    }

    fn add_self_energy(&self, v: &[C64], out: &mut [C64]) {
        let eps = self.spec.self_energy;
        if eps == 0.0 {
            return;
        }
        let n = self.spec.n;
        let units = (1usize << n) - 1;
        for (i, (o, x)) in out.iter_mut().zip(v).enumerate() {
            let z = 2.0 * (i & units).count_ones() as f64 - n as f64;
            *o += x * (eps * z);
        }
    }

    /// H₀ (`branch = 0`) or H₁ (`branch = 1`) as a matrix-free operator on
    /// apparatus vectors.
    pub fn branch_operator(&self, branch: usize) -> BranchOperator<'_> {
        BranchOperator {
            h: self,
            driven: branch == 1,
        }
    }

    /// Dense H restricted to one measured-basis branch: `branch = 0` gives
    /// H₀ = ε Σ Z_k, `branch = 1` gives H₁ = Σ (g_k/2) X_k + ε Σ Z_k, so that
    /// H = P₀(α) ⊗ H₀ + P₁(α) ⊗ H₁.
    pub fn branch_block(&self, branch: usize) -> Result<DenseMatrix> {
        let n = self.spec.n;
        if n > DENSE_MAX_UNITS {
            return Err(Error::DenseUnavailable {
                n,
                max: DENSE_MAX_UNITS,
            });
        }
        let dim = 1usize << n;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        let eps = self.spec.self_energy;
        for i in 0..dim {
            let z = 2.0 * i.count_ones() as f64 - n as f64;
            data[i * dim + i] += C64::from(eps * z);
            if branch == 1 {
                for (k, &h) in self.half_couplings.iter().enumerate() {
                    data[i * dim + (i ^ unit_mask(n, k))] += C64::from(h);
                }
            }
        }
        Ok(DenseMatrix { dim, data })
    }

    /// Full 2^(n+1) × 2^(n+1) matrix, built entrywise from the branch blocks.
    pub fn dense_matrix(&self) -> Result<DenseMatrix> {
        let b0 = self.branch_block(0)?;
        let b1 = self.branch_block(1)?;
        let half = b0.dim;
        let dim = 2 * half;
        let p0 = self.spec.psi0_measured();
        let p1 = self.spec.psi1_measured();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for (pi, pj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let w0 = p0[pi] * p0[pj].conj();
            let w1 = p1[pi] * p1[pj].conj();
            for i in 0..half {
                for j in 0..half {
                    let v = w0 * b0.get(i, j) + w1 * b1.get(i, j);
                    data[(pi * half + i) * dim + pj * half + j] = v;
                }
            }
        }
        Ok(DenseMatrix { dim, data })
    }
}

impl LinearOperator for Hamiltonian {
    fn dim(&self) -> usize {
        1 << (self.spec.n + 1)
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let half = v.len() / 2;
        out.fill(C64::new(0.0, 0.0));
        let (s, c) = self.spec.basis_angle.sin_cos();
        if s == 0.0 {
            // P₁ is diag(0, 1): only the ψ₁ half is driven.
            let (_, v1) = v.split_at(half);
            let (_, o1) = out.split_at_mut(half);
            self.add_flips(v1, o1);
        } else {
            {
                let (v0, v1) = v.split_at(half);
                let (o0, o1) = out.split_at_mut(half);
                self.add_flips(v0, o0);
                self.add_flips(v1, o1);
            }
            let (o0, o1) = out.split_at_mut(half);
            let (ss, sc, cc) = (s * s, s * c, c * c);
            for (w0, w1) in o0.iter_mut().zip(o1.iter_mut()) {
                let (a, b) = (*w0, *w1);
                *w0 = a * ss + b * sc;
                *w1 = a * sc + b * cc;
            }
        }
        self.add_self_energy(v, out);
    }
}

/// One measured-basis block of the Hamiltonian.
pub struct BranchOperator<'a> {
    h: &'a Hamiltonian,
    driven: bool,
}

impl LinearOperator for BranchOperator<'_> {
    fn dim(&self) -> usize {
        1 << self.h.spec.n
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        if self.driven {
            self.h.add_flips(v, out);
        }
        self.h.add_self_energy(v, out);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        (**self).apply_into(v, out)
    }
}

/// Particle in c₀ψ₀(α) + c₁ψ₁(α), every unit excited.
pub fn initial_factors(spec: &ModelSpec, c0: C64, c1: C64) -> Result<ProductFactors> {
    let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized {
            what: "particle amplitudes",
            index: None,
            norm,
        });
    }
    let p0 = spec.psi0_measured();
    let p1 = spec.psi1_measured();
    let particle = [c0 * p0[0] + c1 * p1[0], c0 * p0[1] + c1 * p1[1]];
    let excited = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    ProductFactors::new(particle, vec![excited; spec.n])
}

/// The population-inverted initial state with the particle in superposition.
pub fn initial_state(spec: &ModelSpec, c0: C64, c1: C64) -> Result<StateVector> {
    Ok(make_product_state(&initial_factors(spec, c0, c1)?))
}

/// Analytic evolution of ψ₁(α) ⊗ |1…1⟩ for ε = 0: unit k carries
/// (−i·sin(g_k t/2), cos(g_k t/2)) on (|0⟩, |1⟩).
pub fn closed_form_branch(spec: &ModelSpec, t: f64) -> Result<ProductFactors> {
    if spec.self_energy != 0.0 {
        return Err(Error::OracleUnavailable(format!(
            "self energy ε = {} is nonzero",
            spec.self_energy
        )));
    }
    let units = spec
        .couplings
        .iter()
        .map(|g| {
            let (s, c) = (0.5 * g * t).sin_cos();
            [C64::new(0.0, -s), C64::new(c, 0.0)]
        })
        .collect();
    ProductFactors::new(spec.psi1_measured(), units)
}
