//! Laplacian eigenbasis, graph Fourier transform, brick-wall low-pass filter,
//! and the subspace diagnostics (incoherence, data complexity).

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetry tolerance accepted by [`eig_smallest`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are one cluster for the ordering tie-break.
pub const CLUSTER_GAP: f64 = 1e-9;

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 0;
const GAMMA_MAX_N: usize = 24;
const GAMMA_MAX_R: usize = 4;

/// Leading eigenpairs of a symmetric matrix: `vectors` is N × r with
/// orthonormal columns, column `i` paired with `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralBasis {
    /// Wraps an explicit basis. Columns are assumed orthonormal.
    pub fn from_parts(eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        if eigenvalues.len() != vectors.ncols() {
            return Err(Error::DimensionMismatch {
                expected: vectors.ncols(),
                got: eigenvalues.len(),
            });
        }
        if vectors.ncols() == 0 || vectors.ncols() > vectors.nrows() {
            return Err(Error::InvalidSize(format!(
                "basis must have 1..=N columns, got {} for N={}",
                vectors.ncols(),
                vectors.nrows()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues,
            vectors,
        })
    }

    /// A basis with unspecified (zero) eigenvalues, for synthetic subspaces.
    pub fn from_vectors(vectors: DMatrix<f64>) -> Result<Self> {
        let r = vectors.ncols();
        Self::from_parts(vec![0.0; r], vectors)
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn r(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The N × r matrix `X_r`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// The r × N matrix `X_rᵀ`, whose column `i` is the spectral footprint of
    /// vertex `i`.
    pub fn analysis_matrix(&self) -> DMatrix<f64> {
        self.vectors.transpose()
    }

    /// The first `r` eigenpairs.
    pub fn truncated(&self, r: usize) -> Result<SpectralBasis> {
        if r == 0 || r > self.r() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a {}-column basis to {r}",
                self.r()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues: self.eigenvalues[..r].to_vec(),
            vectors: self.vectors.columns(0, r).into_owned(),
        })
    }

    /// `max_i ‖L x_i − λ_i x_i‖₂`.
    pub fn residual(&self, l: &DMatrix<f64>) -> f64 {
        let lx = l * &self.vectors;
        (0..self.r())
            .map(|i| (lx.column(i) - self.vectors.column(i) * self.eigenvalues[i]).norm())
            .fold(0.0, f64::max)
    }

    /// `‖X_r‖_{2,∞}`, the largest row ℓ2 norm.
    pub fn two_inf_norm(&self) -> f64 {
        max_row_norm_sq(&self.vectors).sqrt()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }
}

fn max_row_norm_sq(x: &DMatrix<f64>) -> f64 {
    (0..x.nrows())
        .map(|i| x.row(i).norm_squared())
        .fold(0.0, f64::max)
}

/// The `r` smallest eigenpairs of a symmetric matrix, in a deterministic order.
///
/// Eigenvalues are non-decreasing. Each eigenvector is signed so that its
/// largest-magnitude entry (lowest index on ties) is positive. Inside a
/// cluster of numerically equal eigenvalues the vectors are ordered
/// lexicographically by their entries.
pub fn eig_smallest(l: &DMatrix<f64>, r: usize) -> Result<SpectralBasis> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.ncols(),
        });
    }
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!(
            "bandwidth r must satisfy 1 <= r <= {n}, got {r}"
        )));
    }
    let asym = (l - l.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    let eig = l
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNoConvergence)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            normalize_sign(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 < CLUSTER_GAP {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        start = end;
    }

    let eigenvalues = pairs[..r].iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(n, r, |i, j| pairs[j].1[i]);
    Ok(SpectralBasis {
        eigenvalues,
        vectors,
    })
}

fn normalize_sign(v: &mut [f64]) {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return;
    }
    let lead = v
        .iter()
        .position(|x| x.abs() >= peak * (1.0 - 1e-12))
        .expect("peak entry exists");
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Graph Fourier transform `Xᵀ f` (coefficients on the basis columns).
pub fn gft(basis: &SpectralBasis, f: &DVector<f64>) -> Result<DVector<f64>> {
    basis.check_len(f.len())?;
    Ok(basis.vectors.tr_mul(f))
}

/// Synthesis `X c`; inverts [`gft`] on a complete basis.
pub fn inverse_gft(basis: &SpectralBasis, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
    if coefficients.len() != basis.r() {
        return Err(Error::DimensionMismatch {
            expected: basis.r(),
            got: coefficients.len(),
        });
    }
    Ok(&basis.vectors * coefficients)
}

/// Brick-wall low-pass filter `X_r X_rᵀ v`.
pub fn brickwall_apply(basis: &SpectralBasis, v: &DVector<f64>) -> Result<DVector<f64>> {
    let coefficients = gft(basis, v)?;
    Ok(&basis.vectors * coefficients)
}

/// Incoherence `μ(X_r) = (N/r) · max_i ‖P_{X_r} e_i‖₂²`, from row norms.
pub fn incoherence(basis: &SpectralBasis) -> f64 {
    let (n, r) = (basis.n() as f64, basis.r() as f64);
    n / r * max_row_norm_sq(&basis.vectors)
}

/// Incoherence evaluated by projecting each standard basis vector explicitly.
/// O(N²r); used to cross-check [`incoherence`].
pub fn incoherence_by_projection(basis: &SpectralBasis) -> f64 {
    let x = &basis.vectors;
    let (n, r) = (basis.n(), basis.r());
    let worst = (0..n)
        .map(|i| {
            let pe = x * x.row(i).transpose();
            pe.norm_squared()
        })
        .fold(0.0, f64::max);
    n as f64 / r as f64 * worst
}

/// Data complexity `Γ(X_r)`: the largest spectral norm of an r × r
/// submatrix of `X_rᵀ` over all r-subsets of its columns, by exhaustive
/// enumeration. Limited to N ≤ 24 and r ≤ 4; beyond that use `Γ ≤ ‖X_r‖`.
pub fn gamma_complexity(basis: &SpectralBasis) -> Result<f64> {
    let (n, r) = (basis.n(), basis.r());
    if n > GAMMA_MAX_N || r > GAMMA_MAX_R {
        return Err(Error::SizeLimit(format!(
            "gamma enumeration needs N <= {GAMMA_MAX_N} and r <= {GAMMA_MAX_R} (got N={n}, r={r}); \
             use the bound gamma <= ||X_r|| instead"
        )));
    }
    let xt = basis.analysis_matrix();
    let mut best = 0.0_f64;
    for_each_subset(n, r, &mut |subset| {
        let sub = xt.select_columns(subset.iter());
        let norm = sub.singular_values().max();
        best = best.max(norm);
    });
    Ok(best)
}

/// Calls `visit` with every size-`k` subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}
