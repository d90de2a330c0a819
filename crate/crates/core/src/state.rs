//! Joint particle ⊗ apparatus states.
//!
//! # Bit layout
//!
//! A joint basis state of the particle and `n` amplifier units is stored at
//! linear index
//!
//! ```text
//! index = particle_bit << n | b_1 << (n - 1) | b_2 << (n - 2) | ... | b_n
//! ```
//!
//! so the particle bit is the most significant bit and unit 1 is the most
//! significant of the unit bits. Particle bit 0 is ψ₀ (passes the other slit,
//! not detected), 1 is ψ₁. Unit bit 1 is the excited state |1⟩, 0 is the
//! de-excited state |0⟩. Every module shares this layout.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mat2::Mat2;

/// Hard cap on the number of amplifier units (2^(n+1) dense amplitudes).
pub const MAX_UNITS: usize = 24;

/// Norm tolerance enforced on constructed states and factors.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

pub(crate) fn check_units(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("unit count n must be >= 1".into()));
    }
    if n > MAX_UNITS {
        return Err(Error::TooManyUnits { n, max: MAX_UNITS });
    }
    Ok(())
}

/// Bit mask selecting unit `k` (0-based) inside a linear index.
#[inline]
pub fn unit_mask(n: usize, k: usize) -> usize {
    debug_assert!(k < n);
    1 << (n - 1 - k)
}

/// Number of de-excited units encoded in a linear index.
#[inline]
pub fn deexcited_count(n: usize, index: usize) -> usize {
    let units = index & ((1usize << n) - 1);
    n - units.count_ones() as usize
}

/// A joint basis label: particle bit plus one bit per unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    n: usize,
    particle_bit: u8,
    unit_bits: u32,
}

impl BasisIndex {
    /// `units[k]` is `true` when unit k+1 is excited.
    pub fn new(particle_bit: u8, units: &[bool]) -> Result<Self> {
        check_units(units.len())?;
        if particle_bit > 1 {
            return Err(Error::InvalidParameter(format!(
                "particle bit must be 0 or 1, got {particle_bit}"
            )));
        }
        let n = units.len();
        let unit_bits = units
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .fold(0u32, |acc, (k, _)| acc | unit_mask(n, k) as u32);
        Ok(Self {
            n,
            particle_bit,
            unit_bits,
        })
    }

    pub fn from_linear(n: usize, index: usize) -> Result<Self> {
        check_units(n)?;
        if index >> (n + 1) != 0 {
            return Err(Error::InvalidParameter(format!(
                "index {index} out of range for n = {n}"
            )));
        }
        Ok(Self {
            n,
            particle_bit: (index >> n) as u8,
            unit_bits: (index & ((1 << n) - 1)) as u32,
        })
    }

    pub fn to_linear(&self) -> usize {
        ((self.particle_bit as usize) << self.n) | self.unit_bits as usize
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn particle_bit(&self) -> u8 {
        self.particle_bit
    }

    /// Whether unit `k` (0-based) is excited.
    pub fn unit_excited(&self, k: usize) -> bool {
        self.unit_bits as usize & unit_mask(self.n, k) != 0
    }

    pub fn deexcited(&self) -> usize {
        deexcited_count(self.n, self.unit_bits as usize)
    }
}

/// Normalized amplitude vector over the joint basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        check_units(n)?;
        let dim = 1usize << (n + 1);
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                left: amps.len(),
                right: dim,
            });
        }
        let norm = norm_sqr(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                what: "state vector",
                index: None,
                norm,
            });
        }
        Ok(Self { n, amps })
    }

    /// Wraps the output of a unitary map. Norm drift is reported, not rejected.
    pub(crate) fn from_evolved(n: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << (n + 1));
        Self { n, amps }
    }

    pub fn basis(index: BasisIndex) -> Self {
        let n = index.n();
        let mut amps = vec![ZERO; 1 << (n + 1)];
        amps[index.to_linear()] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut Vec<C64> {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    pub fn norm_error(&self) -> f64 {
        (self.norm() - 1.0).abs()
    }

    /// Euclidean distance to another state of the same size.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn same_dim(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// A product sequence v₀ ⊗ v₁ ⊗ … ⊗ vₙ: particle amplitudes (on ψ₀, ψ₁)
/// followed by one (|0⟩, |1⟩) pair per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFactors {
    particle: [C64; 2],
    units: Vec<[C64; 2]>,
}

impl ProductFactors {
    /// Validates every factor. Offending factors are reported by position:
    /// 0 for the particle, k for unit k (1-based).
    pub fn new(particle: [C64; 2], units: Vec<[C64; 2]>) -> Result<Self> {
        check_units(units.len())?;
        for (pos, f) in std::iter::once(&particle).chain(units.iter()).enumerate() {
            let norm = (f[0].norm_sqr() + f[1].norm_sqr()).sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized {
                    what: "product factor",
                    index: Some(pos),
                    norm,
                });
            }
        }
        Ok(Self { particle, units })
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn particle(&self) -> [C64; 2] {
        self.particle
    }

    pub fn units(&self) -> &[[C64; 2]] {
        &self.units
    }

    /// Replaces unit `k` (0-based) with a new unit-norm factor.
    pub fn with_unit(&self, k: usize, factor: [C64; 2]) -> Result<Self> {
        let mut units = self.units.clone();
        *units.get_mut(k).ok_or_else(|| {
            Error::InvalidParameter(format!("unit {k} out of range for n = {}", self.n()))
        })? = factor;
        Self::new(self.particle, units)
    }
}

/// Expands a product sequence into a dense joint state.
pub fn make_product_state(factors: &ProductFactors) -> StateVector {
    let n = factors.n();
    let mut amps = Vec::with_capacity(1 << (n + 1));
    amps.extend_from_slice(&factors.particle);
    for unit in &factors.units {
        let prev = std::mem::take(&mut amps);
        amps = Vec::with_capacity(prev.len() * 2);
        for a in prev {
            amps.push(a * unit[0]);
            amps.push(a * unit[1]);
        }
    }
    StateVector { n, amps }
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    same_dim(a, b)?;
    Ok(a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Particle reduced density matrix ρ = Tr_apparatus |s⟩⟨s|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedDensityMatrix {
    entries: Mat2,
}

impl ReducedDensityMatrix {
    pub fn entries(&self) -> &Mat2 {
        &self.entries
    }

    pub fn population(&self, i: usize) -> f64 {
        self.entries.get(i, i).re
    }

    /// ρ₀₁
    pub fn coherence(&self) -> C64 {
        self.entries.get(0, 1)
    }

    /// Re-expresses ρ in the measured basis {ψ₀(α), ψ₁(α)}.
    pub fn in_measured_basis(&self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        let rot = Mat2::from_real([[c, -s], [s, c]]);
        Self {
            entries: rot * self.entries * rot.adjoint(),
        }
    }
}

pub fn partial_trace_particle(s: &StateVector) -> ReducedDensityMatrix {
    let half = s.dim() / 2;
    let (a0, a1) = s.amps.split_at(half);
    let mut rho = [[ZERO; 2]; 2];
    for (x, y) in a0.iter().zip(a1) {
        rho[0][0] += x * x.conj();
        rho[1][1] += y * y.conj();
        rho[0][1] += x * y.conj();
    }
    rho[1][0] = rho[0][1].conj();
    ReducedDensityMatrix {
        entries: Mat2(rho),
    }
}

/// Apparatus branch vectors: s = ψ₀ ⊗ A₀ + ψ₁ ⊗ A₁.
#[derive(Clone, Debug, PartialEq)]
pub struct Branches {
    pub a0: Vec<C64>,
    pub a1: Vec<C64>,
}

/// Branch norm below which a branch counts as absent.
pub const DEGENERATE_BRANCH: f64 = 1e-12;

impl Branches {
    pub fn norms(&self) -> (f64, f64) {
        (norm_sqr(&self.a0).sqrt(), norm_sqr(&self.a1).sqrt())
    }

    /// ⟨A₀|A₁⟩
    pub fn overlap(&self) -> C64 {
        self.a0
            .iter()
            .zip(&self.a1)
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    /// |⟨Â₀|Â₁⟩| for normalized branches, `None` when either branch is absent.
    pub fn normalized_overlap(&self) -> Option<f64> {
        let (n0, n1) = self.norms();
        if n0 < DEGENERATE_BRANCH || n1 < DEGENERATE_BRANCH {
            return None;
        }
        Some((self.overlap().norm() / (n0 * n1)).min(1.0))
    }

    /// Rebuilds the joint state ψ₀ ⊗ A₀ + ψ₁ ⊗ A₁.
    pub fn recompose(&self, n: usize) -> StateVector {
        let mut amps = self.a0.clone();
        amps.extend_from_slice(&self.a1);
        StateVector { n, amps }
    }
}

pub fn branch_decompose(s: &StateVector) -> Branches {
    let half = s.dim() / 2;
    Branches {
        a0: s.amps[..half].to_vec(),
        a1: s.amps[half..].to_vec(),
    }
}

/// Branch decomposition with respect to the measured basis ψ₀(α), ψ₁(α).
pub fn branch_decompose_measured(s: &StateVector, alpha: f64) -> Branches {
    let half = s.dim() / 2;
    let (a0, a1) = s.amps.split_at(half);
    if alpha == 0.0 {
        return Branches {
            a0: a0.to_vec(),
            a1: a1.to_vec(),
        };
    }
    let (sn, cs) = alpha.sin_cos();
    Branches {
        a0: a0.iter().zip(a1).map(|(x, y)| x * cs - y * sn).collect(),
        a1: a0.iter().zip(a1).map(|(x, y)| x * sn + y * cs).collect(),
    }
}
