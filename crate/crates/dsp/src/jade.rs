//! JADE: whitening, fourth-order cumulant matrices and their joint
//! diagonalization by Jacobi rotations.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue below which a whitened direction is dropped.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct JadeConfig {
    /// Rotation angle below which a pair counts as diagonalized.
    pub threshold: f64,
    pub max_sweeps: usize,
}

impl Default for JadeConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-8,
            max_sweeps: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JadeOutput {
    /// One row per recovered source, unit variance.
    pub sources: Vec<Vec<f64>>,
    /// Separating matrix mapping centered observations to sources.
    pub unmixing: DMatrix<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Separates `rows` (observations × samples). The number of sources is
/// the numerical rank of the covariance.
pub fn jade(rows: &[Vec<f64>], cfg: &JadeConfig) -> Result<JadeOutput> {
    let n = rows.len();
    let t = rows.first().map_or(0, Vec::len);
    if n == 0 || t < 2 || rows.iter().any(|r| r.len() != t) {
        return Err(Error::invalid(
            "jade",
            "need equal-length observation rows with ≥ 2 samples",
        ));
    }
    let mut x = DMatrix::from_fn(n, t, |i, j| rows[i][j]);
    for mut r in x.row_iter_mut() {
        let m = r.mean();
        r.add_scalar_mut(-m);
    }
    let cov = &x * x.transpose() / t as f64;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::invalid("jade", "observations have zero variance"));
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL * top)
        .collect();
    let m = keep.len();
    let whitening = DMatrix::from_fn(m, n, |r, c| {
        let k = keep[r];
        eig.eigenvectors[(c, k)] / eig.eigenvalues[k].sqrt()
    });
    let z = &whitening * &x;

    // cumulant matrices Q_ij, off-diagonal pairs weighted by √2
    let mut cms: Vec<DMatrix<f64>> = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in i..m {
            let mut q = DMatrix::zeros(m, m);
            for s in 0..t {
                let col = z.column(s);
                let w = col[i] * col[j] / t as f64;
                q += w * col * col.transpose();
            }
            if i == j {
                for d in 0..m {
                    q[(d, d)] -= 1.0;
                }
                q[(i, i)] -= 2.0;
            } else {
                q[(i, j)] -= 1.0;
                q[(j, i)] -= 1.0;
                q *= std::f64::consts::SQRT_2;
            }
            cms.push(q);
        }
    }

    let mut v = DMatrix::<f64>::identity(m, m);
    let mut sweeps = 0;
    let mut converged = m < 2;
    while !converged && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..m - 1 {
            for q in p + 1..m {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for c in &cms {
                    let a = c[(p, p)] - c[(q, q)];
                    let b = c[(p, q)] + c[(q, p)];
                    g11 += a * a;
                    g12 += a * b;
                    g22 += b * b;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                if theta.abs() <= cfg.threshold {
                    continue;
                }
                rotated = true;
                let (cs, sn) = (theta.cos(), theta.sin());
                rotate(&mut v, p, q, cs, sn, false);
                for c in cms.iter_mut() {
                    rotate(c, p, q, cs, sn, true);
                }
            }
        }
        converged = !rotated;
    }
    let unmixing = v.transpose() * whitening;
    let s = &unmixing * &x;
    let sources = s.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(JadeOutput {
        sources,
        unmixing,
        sweeps,
        converged,
    })
}

/// Applies the Givens rotation `G = [[c, −s], [s, c]]` on columns `p, q`
/// (`M ← M·G`), and also on rows (`M ← Gᵀ·M`) when `both`.
fn rotate(mat: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, both: bool) {
    for r in 0..mat.nrows() {
        let (a, b) = (mat[(r, p)], mat[(r, q)]);
        mat[(r, p)] = c * a + s * b;
        mat[(r, q)] = -s * a + c * b;
    }
    if both {
        for col in 0..mat.ncols() {
            let (a, b) = (mat[(p, col)], mat[(q, col)]);
            mat[(p, col)] = c * a + s * b;
            mat[(q, col)] = -s * a + c * b;
        }
    }
}
