//! Seeded random noise matrices with a prescribed column-angle class.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, Matrix};
use crate::modularity::{classify_default, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    Acute,
    Obtuse,
    Orthogonal,
    General,
}

impl fmt::Display for NoiseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Acute => "acute",
            Self::Obtuse => "obtuse",
            Self::Orthogonal => "orthogonal",
            Self::General => "general",
        })
    }
}

impl NoiseShape {
    pub fn verdict(self) -> Verdict {
        match self {
            Self::Acute => Verdict::Acute,
            Self::Obtuse => Verdict::Obtuse,
            Self::Orthogonal => Verdict::Orthogonal,
            Self::General => Verdict::General,
        }
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| std * Distribution::<f64>::sample(&StandardNormal, rng))
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// `r × n` matrix with orthonormal columns (Gram–Schmidt on a Gaussian
/// matrix); needs `n ≤ r`.
pub fn orthonormal_columns<R: Rng + ?Sized>(r: usize, n: usize, rng: &mut R) -> Result<Matrix<f64>> {
    if n > r {
        return Err(Error::Invalid(format!("cannot fit {n} orthonormal columns in dimension {r}")));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vector(r, 1.0, rng);
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for q in &cols {
                let p = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            cols.push(v.iter().map(|x| x / nv).collect());
        }
    }
    Matrix::from_columns(r, &cols)
}

/// Random Gram matrix with off-diagonal entries of one sign, about a
/// quarter of them zero, made positive definite by diagonal dominance.
fn signed_gram<R: Rng + ?Sized>(n: usize, sign: f64, rng: &mut R) -> Matrix<f64> {
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.25 {
                continue;
            }
            let v = sign * rng.random_range(0.05..1.0);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| g.get(i, j).abs()).sum();
        g.set(i, i, off + rng.random_range(0.2..1.0));
    }
    g
}

/// `C` with `CᵀC = G`: `C = Q Lᵀ` with `G = L Lᵀ` and `Q` orthonormal.
fn realize_gram<R: Rng + ?Sized>(g: &Matrix<f64>, r: usize, rng: &mut R) -> Result<Matrix<f64>> {
    let l = cholesky(g).ok_or_else(|| Error::Invalid("Gram matrix is not positive definite".into()))?;
    let q = orthonormal_columns(r, g.rows(), rng)?;
    q.matmul(&l.transpose())
}

/// Random `r × n` noise matrix of the requested class, column norms of
/// order `scale`.
///
/// Acute matrices exist for any `r`. Obtuse and orthogonal ones need
/// `n ≤ r`: at most `r` nonzero vectors in `ℝ^r` are pairwise orthogonal,
/// and this generator does not build the degenerate obtuse families with
/// `r < n ≤ 2r`.
pub fn random_noise_matrix<R: Rng + ?Sized>(
    shape: NoiseShape,
    r: usize,
    n: usize,
    scale: f64,
    rng: &mut R,
) -> Result<Matrix<f64>> {
    if r == 0 && n > 0 {
        return Err(Error::Invalid("noise matrix needs at least one row".into()));
    }
    let c = match shape {
        NoiseShape::Acute => {
            // nonnegative entries keep every inner product ≥ 0; a random
            // rotation hides the sign pattern
            let raw = Matrix::from_fn(r, n, |_, _| {
                if rng.random::<f64>() < 0.3 {
                    0.0
                } else {
                    rng.random_range(0.1..1.0)
                }
            });
            let raw = fill_zero_columns(raw, rng);
            let rot = orthonormal_columns(r, r, rng)?;
            rot.matmul(&raw)?
        }
        NoiseShape::Obtuse => realize_gram(&signed_gram(n, -1.0, rng), r, rng)?,
        NoiseShape::Orthogonal => {
            let q = orthonormal_columns(r, n, rng)?;
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            q.matmul(&Matrix::diagonal(&d))?
        }
        NoiseShape::General => loop {
            let c = gaussian_matrix(r, n, 1.0, rng);
            if n < 3 || matches!(classify_default(&c).map(|k| k.verdict), Ok(Verdict::General)) {
                break c;
            }
        },
    };
    Ok(c.scaled(scale))
}

fn fill_zero_columns<R: Rng + ?Sized>(mut c: Matrix<f64>, rng: &mut R) -> Matrix<f64> {
    for j in 0..c.cols() {
        if (0..c.rows()).all(|i| c.get(i, j) == 0.0) {
            let i = rng.random_range(0..c.rows());
            c.set(i, j, rng.random_range(0.1..1.0));
        }
    }
    c
}
