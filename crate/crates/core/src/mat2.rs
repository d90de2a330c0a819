//! Minimal 2×2 complex matrix algebra for particle-space operators.

use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[C64::new(0.0, 0.0); 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ]);

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([
            [C64::from(m[0][0]), C64::from(m[0][1])],
            [C64::from(m[1][0]), C64::from(m[1][1])],
        ])
    }

    /// Rank-one projector |u⟩⟨u| for a (not necessarily normalized) vector.
    pub fn outer(u: [C64; 2], v: [C64; 2]) -> Self {
        Mat2([
            [u[0] * v[0].conj(), u[0] * v[1].conj()],
            [u[1] * v[0].conj(), u[1] * v[1].conj()],
        ])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    /// Largest absolute entry of `self - self†`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = *self - self.adjoint();
        d.max_abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        let gram = self.adjoint() * *self;
        gram.hermitian_eigenvalues()[1].max(0.0).sqrt()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_norm_of_diagonal() {
        let m = Mat2::from_real([[3.0, 0.0], [0.0, -5.0]]);
        assert!((m.operator_norm() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_x() {
        let x = Mat2::from_real([[0.0, 1.0], [1.0, 0.0]]);
        let ev = x.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn commutator_of_paulis() {
        let x = Mat2::from_real([[0.0, 1.0], [1.0, 0.0]]);
        let z = Mat2::from_real([[1.0, 0.0], [0.0, -1.0]]);
        // [X, Z] = -2iY, norm 2
        assert!((x.commutator(&z).operator_norm() - 2.0).abs() < 1e-14);
    }
}
