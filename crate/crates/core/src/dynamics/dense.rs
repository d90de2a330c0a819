//! Exact propagation by dense diagonalization of the measured-basis blocks
//! H = P₀(α) ⊗ H₀ + P₁(α) ⊗ H₁.

use faer::complex_native::c64;
use faer::{Col, Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{DenseMatrix, Hamiltonian, DENSE_MAX_UNITS};

use super::MeasuredSplit;

enum BlockEigen {
    Diagonal(Vec<f64>),
    Full { values: Vec<f64>, vectors: Mat<c64> },
}

impl BlockEigen {
    fn new(block: &DenseMatrix) -> Self {
        let dim = block.dim;
        let is_diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || block.get(i, j) == C64::new(0.0, 0.0)));
        if is_diagonal {
            return BlockEigen::Diagonal((0..dim).map(|i| block.get(i, i).re).collect());
        }
        let m = Mat::<c64>::from_fn(dim, dim, |i, j| {
            let z = block.get(i, j);
            c64::new(z.re, z.im)
        });
        let eig = m.selfadjoint_eigendecomposition(Side::Lower);
        let s = eig.s().column_vector();
        BlockEigen::Full {
            values: (0..dim).map(|l| s.read(l).re).collect(),
            vectors: eig.u().to_owned(),
        }
    }

    fn advance(&self, b: &mut [C64], t: f64) {
        match self {
            BlockEigen::Diagonal(d) => {
                for (x, e) in b.iter_mut().zip(d) {
                    *x *= C64::from_polar(1.0, -e * t);
                }
            }
            BlockEigen::Full { values, vectors } => {
                let col = Col::<c64>::from_fn(b.len(), |i| c64::new(b[i].re, b[i].im));
                let mut coef = vectors.adjoint() * &col;
                for (l, e) in values.iter().enumerate() {
                    let z = coef.read(l);
                    let p = C64::new(z.re, z.im) * C64::from_polar(1.0, -e * t);
                    coef.write(l, c64::new(p.re, p.im));
                }
                let out = vectors * &coef;
                for (i, x) in b.iter_mut().enumerate() {
                    let z = out.read(i);
                    *x = C64::new(z.re, z.im);
                }
            }
        }
    }
}

pub struct DensePropagator {
    split: MeasuredSplit,
    blocks: [BlockEigen; 2],
}

impl DensePropagator {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let n = h.n();
        if n > DENSE_MAX_UNITS {
            return Err(Error::DenseUnavailable {
                n,
                max: DENSE_MAX_UNITS,
            });
        }
        Ok(Self {
            split: MeasuredSplit::new(h),
            blocks: [
                BlockEigen::new(&h.branch_block(0)?),
                BlockEigen::new(&h.branch_block(1)?),
            ],
        })
    }

    pub fn advance(&self, v: &mut [C64], t: f64) {
        let half = v.len() / 2;
        let mut b0 = vec![C64::new(0.0, 0.0); half];
        let mut b1 = vec![C64::new(0.0, 0.0); half];
        self.split.split(v, &mut b0, &mut b1);
        self.blocks[0].advance(&mut b0, t);
        self.blocks[1].advance(&mut b1, t);
        self.split.join(&b0, &b1, v);
    }
}
