//! Lanczos–Krylov propagation of exp(−iHt)·v for Hermitian H.
//!
//! Each step builds an orthonormal Krylov basis V_m with full
//! reorthogonalization, diagonalizes the tridiagonal projection T_m and
//! advances by the largest sub-step h whose a posteriori error estimate
//! ‖v‖·β_m·|e_mᵀ exp(−ihT_m) e₁| stays within budget. The basis does not depend
//! on h, so shrinking a rejected step costs only O(m²).

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::LinearOperator;

/// Time span over which `tolerance` bounds the accumulated error estimate.
pub const TOLERANCE_HORIZON: f64 = 1000.0;

const BREAKDOWN: f64 = 1e-13;
const MAX_HALVINGS: usize = 64;
/// Relative size of an error estimate that is indistinguishable from round-off.
const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of accepted local error estimates.
    pub error_estimate: f64,
}

pub struct KrylovPropagator<O> {
    op: O,
    krylov_dim: usize,
    tolerance: f64,
    basis: Vec<Vec<C64>>,
    work: Vec<C64>,
    stats: KrylovStats,
}

struct Projection {
    values: Vec<f64>,
    /// Row-major k×k eigenvectors of T_m.
    vectors: Vec<f64>,
    dim: usize,
    /// β_m coupling the last basis vector to the discarded residual (0 on breakdown).
    residual: f64,
}

impl Projection {
    /// exp(−ihT) e₁ expressed in the Krylov basis.
    fn coefficients(&self, h: f64) -> Vec<C64> {
        let k = self.dim;
        let weights: Vec<C64> = (0..k)
            .map(|l| C64::from_polar(self.vectors[l], -h * self.values[l]))
            .collect();
        (0..k)
            .map(|j| {
                (0..k)
                    .map(|l| weights[l] * self.vectors[j * k + l])
                    .sum()
            })
            .collect()
    }

    fn error(&self, h: f64, scale: f64) -> (f64, Vec<C64>) {
        let y = self.coefficients(h);
        let err = scale * self.residual * y[self.dim - 1].norm();
        (err, y)
    }
}

impl<O: LinearOperator> KrylovPropagator<O> {
    pub fn new(op: O, krylov_dim: usize, tolerance: f64) -> Self {
        let dim = op.dim();
        Self {
            op,
            krylov_dim,
            tolerance,
            basis: (0..krylov_dim).map(|_| vec![C64::new(0.0, 0.0); dim]).collect(),
            work: vec![C64::new(0.0, 0.0); dim],
            stats: KrylovStats::default(),
        }
    }

    pub fn stats(&self) -> KrylovStats {
        self.stats
    }

    fn local_budget(&self, h: f64, scale: f64) -> f64 {
        (self.tolerance * h.abs() / TOLERANCE_HORIZON).max(ROUNDOFF_FLOOR * scale)
    }

    fn lanczos(&mut self, v: &[C64], scale: f64) -> Projection {
        let m = self.krylov_dim;
        let inv = 1.0 / scale;
        for (b, x) in self.basis[0].iter_mut().zip(v) {
            *b = x * inv;
        }
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut residual = 0.0;
        for j in 0..m {
            self.op.apply_into(&self.basis[j], &mut self.work);
            self.stats.matvecs += 1;
            let a = dot(&self.basis[j], &self.work).re;
            axpy(&mut self.work, -C64::from(a), &self.basis[j]);
            if j > 0 {
                axpy(&mut self.work, -C64::from(beta[j - 1]), &self.basis[j - 1]);
            }
            for i in 0..=j {
                let c = dot(&self.basis[i], &self.work);
                axpy(&mut self.work, -c, &self.basis[i]);
            }
            alpha.push(a);
            let b = dot(&self.work, &self.work).re.sqrt();
            if b < BREAKDOWN * (1.0 + a.abs()) {
                // invariant subspace: the projection is exact
                residual = 0.0;
                break;
            }
            if j + 1 == m {
                residual = b;
                break;
            }
            beta.push(b);
            let inv_b = 1.0 / b;
            for (dst, src) in self.basis[j + 1].iter_mut().zip(&self.work) {
                *dst = src * inv_b;
            }
        }
        let k = alpha.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.selfadjoint_eigendecomposition(Side::Lower);
        let s = eig.s().column_vector();
        let u = eig.u();
        Projection {
            values: (0..k).map(|l| s.read(l)).collect(),
            vectors: (0..k * k).map(|idx| u.read(idx / k, idx % k)).collect(),
            dim: k,
            residual,
        }
    }

    /// Advances `v` in place by exp(−iHt).
    pub fn advance(&mut self, v: &mut [C64], t: f64) -> Result<()> {
        let mut remaining = t;
        while remaining != 0.0 {
            let scale = dot(v, v).re.sqrt();
            if scale == 0.0 {
                return Ok(());
            }
            let proj = self.lanczos(v, scale);
            let mut h = remaining;
            let (mut err, mut y) = proj.error(h, scale);
            let mut halvings = 0;
            while err > self.local_budget(h, scale) {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::NonConvergence {
                        achieved: err,
                        requested: self.local_budget(h, scale),
                    });
                }
                h *= 0.5;
                (err, y) = proj.error(h, scale);
            }
            v.fill(C64::new(0.0, 0.0));
            for (j, c) in y.iter().enumerate() {
                axpy(v, c * scale, &self.basis[j]);
            }
            self.stats.steps += 1;
            self.stats.error_estimate += err;
            remaining -= h;
            if remaining.abs() <= 1e-15 * t.abs() {
                remaining = 0.0;
            }
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Diagonal operator with known spectrum.
    struct Diag(Vec<f64>);

    impl LinearOperator for Diag {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply_into(&self, v: &[C64], out: &mut [C64]) {
            for ((o, x), d) in out.iter_mut().zip(v).zip(&self.0) {
                *o = x * d;
            }
        }
    }

    #[test]
    fn diagonal_operator_phases_exactly() {
        let d: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let op = Diag(d.clone());
        let mut v: Vec<C64> = (0..40).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let v0 = v.clone();
        let mut prop = KrylovPropagator::new(&op, 12, 1e-10);
        prop.advance(&mut v, 7.5).unwrap();
        for ((x, x0), e) in v.iter().zip(&v0).zip(&d) {
            let expect = x0 * C64::from_polar(1.0, -e * 7.5);
            assert!((x - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn happy_breakdown_on_small_invariant_subspace() {
        let op = Diag(vec![1.0, 1.0, 2.0, 2.0]);
        let mut v = vec![C64::new(0.5, 0.0); 4];
        let mut prop = KrylovPropagator::new(&op, 8, 1e-12);
        prop.advance(&mut v, 100.0).unwrap();
        // two distinct eigenvalues → one step suffices
        assert_eq!(prop.stats().steps, 1);
        assert!((v[0] - C64::from_polar(0.5, -100.0)).norm() < 1e-12);
        assert!((v[3] - C64::from_polar(0.5, -200.0)).norm() < 1e-12);
    }
}
