//! Single-shot noise shaping.
//!
//! Preprocessing walks `z` inside the box `‖z‖_∞ ≤ c` along directions in the
//! kernel of the spectral analysis matrix `X = X_rᵀ` (r × N), restricted to
//! coordinates that are not yet saturated. Every step drives at least one
//! more coordinate onto `±c`, and the walk stops once at most `r` coordinates
//! remain strictly inside the box. Since `Xz` never changes, the low-pass
//! content of the signal is untouched, and a subsequent memoryless quantizer
//! whose alphabet contains `±c` only errs on those `≤ r` leftover entries.
//!
//! Two engines produce the same contract:
//!
//! * [`preprocess_reference`] solves one `r × (r+1)` null-space problem per
//!   boundary hit, `O(r³N)` overall.
//! * [`preprocess_fast`] factors one `r × 2r` block per outer iteration,
//!   obtaining `r` kernel directions at once, and recycles them with rank-one
//!   eliminations after each hit, `O(r²N)` overall.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{kernel_basis_of_columns, null_space_of_columns};
use crate::quantizer::Alphabet;
use crate::signal::GraphSignal;
use crate::spectral::{eig_smallest, SpectralBasis};

/// Coordinates within `SATURATION_TOL · c` of `±c` are snapped onto the boundary.
pub const SATURATION_TOL: f64 = 1e-10;
/// Largest accepted `‖X b‖₂` for a unit kernel direction.
pub const KERNEL_TOL: f64 = 1e-9;
/// Largest accepted `‖X Δz‖₂ / max(1, ‖Δz‖₂)` for the combined move of one
/// fast-engine block; a block above it is undone and replaced by one
/// reference step.
pub const BLOCK_TOL: f64 = 1e-11;
/// Elimination pivots below `PIVOT_TOL · ‖b‖_∞` are treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;
/// An eliminated direction shorter than this (relative to its inputs) marks
/// the recycled set as numerically dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-9;
/// Tolerance on `‖f‖_∞ = 1` accepted by [`ssns_quantize`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Engine {
    Reference,
    #[default]
    Fast,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Reference => "reference",
            Engine::Fast => "fast",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Engine::Reference),
            "fast" => Ok(Engine::Fast),
            other => Err(Error::InvalidParameter(format!(
                "unknown engine `{other}` (expected reference or fast)"
            ))),
        }
    }
}

/// Output of the preprocessing walk.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessResult {
    pub reshaped: DVector<f64>,
    /// Indices with `|f̂_i| = c`, ascending.
    pub saturated: Vec<usize>,
    /// Outer iterations: boundary hits for the reference engine, factored
    /// blocks for the fast engine.
    pub iterations: usize,
    /// `‖X(f̂ − z₀)‖₂`.
    pub spectral_residual: f64,
    pub bound: f64,
}

impl PreprocessResult {
    /// Entries with `|f̂_i| < c − SATURATION_TOL · c`.
    pub fn unsaturated(&self) -> Vec<usize> {
        let eps = SATURATION_TOL * self.bound;
        (0..self.reshaped.len())
            .filter(|&i| self.reshaped[i].abs() < self.bound - eps)
            .collect()
    }
}

/// A unit vector in the kernel of `X`, supported away from the saturated set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDirection {
    support: Vec<usize>,
    coefficients: Vec<f64>,
}

impl KernelDirection {
    pub fn new(support: Vec<usize>, coefficients: Vec<f64>) -> Result<Self> {
        if support.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: coefficients.len(),
            });
        }
        Ok(KernelDirection {
            support,
            coefficients,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn to_dense(&self, n: usize) -> DVector<f64> {
        let mut b = DVector::zeros(n);
        for (&i, &v) in self.support.iter().zip(&self.coefficients) {
            b[i] = v;
        }
        b
    }
}

/// One step of the walk, reported to observers.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub iteration: usize,
    pub alpha: f64,
    pub newly_saturated: Vec<usize>,
    /// `|J|` after the step.
    pub saturated_count: usize,
}

/// Restricted kernel direction on the `active` columns of `X`.
///
/// `active` must be disjoint from `saturated`. The result is the first
/// null vector of the `r × |active|` submatrix from a pivoted QR, scaled to
/// unit norm.
pub fn kernel_vector(
    x: &DMatrix<f64>,
    saturated: &[usize],
    active: &[usize],
) -> Result<KernelDirection> {
    if let Some(i) = active.iter().find(|i| saturated.contains(i)) {
        return Err(Error::Precondition(format!(
            "active column {i} is in the saturated set"
        )));
    }
    if let Some(&i) = active.iter().find(|&&i| i >= x.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: i + 1,
        });
    }
    let coefficients = restricted_kernel(x, active)?;
    KernelDirection::new(active.to_vec(), coefficients)
}

fn restricted_kernel(x: &DMatrix<f64>, active: &[usize]) -> Result<Vec<f64>> {
    let mut b = null_space_of_columns(x, active)
        .into_iter()
        .next()
        .ok_or_else(|| {
            Error::NoKernel(format!(
                "{} columns have full numerical rank {}",
                active.len(),
                active.len()
            ))
        })?;
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    b.iter_mut().for_each(|v| *v /= norm);
    let residual = submatrix_residual(x, active, &b);
    if residual > KERNEL_TOL {
        return Err(Error::NoKernel(format!(
            "kernel residual {residual:e} exceeds {KERNEL_TOL:e}"
        )));
    }
    Ok(b)
}

/// `‖X[:, support] · coefficients‖₂`.
fn submatrix_residual(x: &DMatrix<f64>, support: &[usize], coefficients: &[f64]) -> f64 {
    let mut acc = vec![0.0; x.nrows()];
    for (&i, &w) in support.iter().zip(coefficients) {
        if w != 0.0 {
            for (a, xv) in acc.iter_mut().zip(x.column(i).iter()) {
                *a += w * xv;
            }
        }
    }
    acc.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Moves `z` along `b` by the smallest positive `α` that puts a coordinate
/// on `±c`, snapping every coordinate within `SATURATION_TOL · c` of the
/// boundary. Returns `α` and the newly saturated indices, ascending.
pub fn step_to_boundary(
    z: &mut DVector<f64>,
    b: &KernelDirection,
    c: f64,
) -> Result<(f64, Vec<usize>)> {
    if let Some(&i) = b.support.iter().find(|&&i| i >= z.len()) {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: i + 1,
        });
    }
    let (alpha, hit) = step_along(z, &b.support, &b.coefficients, c)?;
    Ok((alpha, hit.into_iter().map(|p| b.support[p]).collect()))
}

// Returns positions into `support` of the coordinates that saturated.
fn step_along(
    z: &mut DVector<f64>,
    support: &[usize],
    coefficients: &[f64],
    c: f64,
) -> Result<(f64, Vec<usize>)> {
    let eps = SATURATION_TOL * c;
    let mut alpha = f64::INFINITY;
    for (&i, &b) in support.iter().zip(coefficients) {
        let zi = z[i];
        if b == 0.0 || zi.abs() >= c {
            continue;
        }
        let root = if b > 0.0 { (c - zi) / b } else { (-c - zi) / b };
        if root > 0.0 && root < alpha {
            alpha = root;
        }
    }
    if !alpha.is_finite() {
        return Err(Error::NoKernel(
            "direction has no positive step to the boundary".into(),
        ));
    }

    let mut hit = Vec::new();
    for (pos, (&i, &b)) in support.iter().zip(coefficients).enumerate() {
        let zi = z[i];
        if b == 0.0 || zi.abs() >= c {
            continue;
        }
        let moved = zi + alpha * b;
        if moved.abs() >= c - eps {
            z[i] = c.copysign(moved);
            hit.push(pos);
        } else {
            z[i] = moved;
        }
    }
    Ok((alpha, hit))
}

/// Walk state shared by both engines.
struct Walk {
    z: DVector<f64>,
    saturated: Vec<bool>,
    unsaturated: Vec<usize>,
    c: f64,
}

impl Walk {
    fn start(x: &DMatrix<f64>, z0: &DVector<f64>, c: f64) -> Result<Self> {
        let (r, n) = (x.nrows(), x.ncols());
        if r >= n {
            return Err(Error::Precondition(format!(
                "need r < N, got r={r}, N={n}"
            )));
        }
        if z0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z0.len(),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Precondition(format!("bound c must be positive, got {c}")));
        }
        let peak = z0.amax();
        if c < peak {
            return Err(Error::Precondition(format!(
                "bound c={c} is below ||z0||_inf={peak}"
            )));
        }

        let eps = SATURATION_TOL * c;
        let mut z = z0.clone();
        let mut saturated = vec![false; n];
        for i in 0..n {
            if x.column(i).iter().all(|&v| v == 0.0) {
                // Zero columns are free: push them to +c.
                z[i] = c;
                saturated[i] = true;
            } else if z[i].abs() >= c - eps {
                z[i] = c.copysign(z[i]);
                saturated[i] = true;
            }
        }
        let unsaturated = (0..n).filter(|&i| !saturated[i]).collect();
        Ok(Walk {
            z,
            saturated,
            unsaturated,
            c,
        })
    }

    fn mark(&mut self, hits: impl IntoIterator<Item = usize>) {
        for i in hits {
            self.saturated[i] = true;
        }
    }

    fn compact(&mut self) {
        let saturated = &self.saturated;
        self.unsaturated.retain(|&i| !saturated[i]);
    }

    fn saturated_count(&self) -> usize {
        self.saturated.len() - self.unsaturated.len()
    }

    fn finish(self, x: &DMatrix<f64>, z0: &DVector<f64>, iterations: usize) -> PreprocessResult {
        let spectral_residual = (x * (&self.z - z0)).norm();
        let saturated = (0..self.z.len()).filter(|&i| self.saturated[i]).collect();
        PreprocessResult {
            reshaped: self.z,
            saturated,
            iterations,
            spectral_residual,
            bound: self.c,
        }
    }
}

/// Reference preprocessing: one fresh restricted-kernel direction per hit.
pub fn preprocess_reference(
    x: &DMatrix<f64>,
    z0: &DVector<f64>,
    c: f64,
) -> Result<PreprocessResult> {
    preprocess_reference_observed(x, z0, c, &mut |_| {})
}

pub fn preprocess_reference_observed(
    x: &DMatrix<f64>,
    z0: &DVector<f64>,
    c: f64,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<PreprocessResult> {
    let r = x.nrows();
    let n = x.ncols();
    let mut walk = Walk::start(x, z0, c)?;
    let mut iterations = 0;

    while walk.unsaturated.len() > r {
        if iterations >= n {
            return Err(Error::IterationCap(n));
        }
        let active = &walk.unsaturated[..r + 1];
        let b = restricted_kernel(x, active)?;
        let (alpha, hit) = step_along(&mut walk.z, active, &b, c)?;
        let hit: Vec<usize> = hit.into_iter().map(|p| active[p]).collect();
        walk.mark(hit.iter().copied());
        walk.compact();
        iterations += 1;
        observer(&StepEvent {
            iteration: iterations,
            alpha,
            newly_saturated: hit,
            saturated_count: walk.saturated_count(),
        });
    }
    Ok(walk.finish(x, z0, iterations))
}

/// Block preprocessing with recycled kernel directions.
pub fn preprocess_fast(x: &DMatrix<f64>, z0: &DVector<f64>, c: f64) -> Result<PreprocessResult> {
    preprocess_fast_observed(x, z0, c, &mut |_| {})
}

pub fn preprocess_fast_observed(
    x: &DMatrix<f64>,
    z0: &DVector<f64>,
    c: f64,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<PreprocessResult> {
    fast_walk(x, z0, c, BLOCK_TOL, observer)
}

fn fast_walk(
    x: &DMatrix<f64>,
    z0: &DVector<f64>,
    c: f64,
    block_tol: f64,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<PreprocessResult> {
    let r = x.nrows();
    let n = x.ncols();
    let mut walk = Walk::start(x, z0, c)?;
    let mut blocks = 0;
    let mut steps = 0;

    while walk.unsaturated.len() > r {
        if blocks >= n {
            return Err(Error::IterationCap(n));
        }
        blocks += 1;
        let block: Vec<usize> = walk.unsaturated[..(2 * r).min(walk.unsaturated.len())].to_vec();
        let mut directions = kernel_basis_of_columns(x, &block);
        if directions.is_empty() {
            return Err(Error::NoKernel(format!(
                "block of {} columns has no kernel",
                block.len()
            )));
        }
        let before: Vec<f64> = block.iter().map(|&i| walk.z[i]).collect();
        let mut events = Vec::new();
        let mut open = walk.unsaturated.len();

        while !directions.is_empty() && open > r {
            let b = directions.remove(0);
            let (alpha, hit) = match step_along(&mut walk.z, &block, &b, c) {
                Ok(step) => step,
                // Vanishes on every open coordinate of the block.
                Err(_) => continue,
            };
            open -= hit.len();
            walk.mark(hit.iter().map(|&p| block[p]));
            if !eliminate(&mut directions, &b, &hit) {
                log::debug!("recycled directions lost independence; refactoring block");
                directions.clear();
            }
            events.push((alpha, hit.iter().map(|&p| block[p]).collect::<Vec<_>>(), open));
        }

        let delta: Vec<f64> = block.iter().zip(&before).map(|(&i, &z)| walk.z[i] - z).collect();
        let scale = delta.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let residual = submatrix_residual(x, &block, &delta);
        if residual > block_tol * scale {
            log::debug!("block residual {residual:e} too large; redoing with a single step");
            for (&i, &z) in block.iter().zip(&before) {
                walk.z[i] = z;
                walk.saturated[i] = false;
            }
            let active = &block[..r + 1];
            let b = restricted_kernel(x, active)?;
            let (alpha, hit) = step_along(&mut walk.z, active, &b, c)?;
            let hit: Vec<usize> = hit.into_iter().map(|p| active[p]).collect();
            walk.mark(hit.iter().copied());
            events = vec![(alpha, hit, 0)];
        }
        walk.compact();
        let last = events.len();
        for (k, (alpha, newly_saturated, open)) in events.into_iter().enumerate() {
            steps += 1;
            let open = if k + 1 == last { walk.unsaturated.len() } else { open };
            observer(&StepEvent {
                iteration: steps,
                alpha,
                newly_saturated,
                saturated_count: n - open,
            });
        }
    }
    Ok(walk.finish(x, z0, blocks))
}

/// Removes the newly saturated positions `hits` (ascending) from the
/// remaining directions. The first hit uses the direction just walked as
/// pivot, `b_j ← b − (b_{i⋆} / (b_j)_{i⋆}) b_j`; further simultaneous hits
/// consume the remaining direction with the largest pivot. Returns false if
/// the set degenerated numerically.
fn eliminate(directions: &mut Vec<Vec<f64>>, used: &[f64], hits: &[usize]) -> bool {
    let Some((&first, rest)) = hits.split_first() else {
        return true;
    };
    let mut independent = true;
    let lead = used[first];

    for v in directions.iter_mut() {
        let pivot = v[first];
        if pivot.abs() < PIVOT_TOL * inf_norm(v) {
            v[first] = 0.0;
            continue;
        }
        let s = lead / pivot;
        for (vk, &uk) in v.iter_mut().zip(used) {
            *vk = uk - s * *vk;
        }
        v[first] = 0.0;
        independent &= renormalize(v, 1.0_f64.max(s.abs()));
    }

    for &h in rest {
        let Some((idx, peak)) = directions
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v[h].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if peak < PIVOT_TOL {
            directions.iter_mut().for_each(|v| v[h] = 0.0);
            continue;
        }
        let pivot = directions.remove(idx);
        for v in directions.iter_mut() {
            let s = v[h] / pivot[h];
            if s != 0.0 {
                for (vk, &pk) in v.iter_mut().zip(&pivot) {
                    *vk -= s * pk;
                }
                v[h] = 0.0;
                independent &= renormalize(v, 1.0_f64.max(s.abs()));
            }
        }
    }
    independent
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn renormalize(v: &mut [f64], scale: f64) -> bool {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    norm >= INDEPENDENCE_TOL * scale
}

pub fn preprocess(
    engine: Engine,
    x: &DMatrix<f64>,
    z0: &DVector<f64>,
    c: f64,
) -> Result<PreprocessResult> {
    match engine {
        Engine::Reference => preprocess_reference(x, z0, c),
        Engine::Fast => preprocess_fast(x, z0, c),
    }
}

/// Result of the full quantization pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SsnsOutput {
    /// Quantized signal in `𝒜^N`.
    pub q: DVector<f64>,
    /// Quantized representative `L_r q`.
    pub fq: DVector<f64>,
    pub preprocess: PreprocessResult,
}

/// Quantizes a signal with `‖f‖_∞ = 1` against a precomputed basis:
/// preprocess with `X = X_rᵀ`, `z₀ = f`, `c = 1`, then apply MSQ.
pub fn ssns_quantize_with_basis(
    basis: &SpectralBasis,
    f: &GraphSignal,
    alphabet: &Alphabet,
    engine: Engine,
) -> Result<SsnsOutput> {
    let x = basis.analysis_matrix();
    let preprocess = preprocess_normalized(&x, f, engine)?;
    Ok(quantize_reshaped(basis, preprocess, alphabet))
}

/// Preprocessing step of the pipeline on its own; the result can be
/// quantized at several bit depths with [`quantize_reshaped`].
pub fn preprocess_normalized(
    x: &DMatrix<f64>,
    f: &GraphSignal,
    engine: Engine,
) -> Result<PreprocessResult> {
    let peak = f.linf();
    if (peak - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Precondition(format!(
            "signal must satisfy ||f||_inf = 1, got {peak}"
        )));
    }
    let z0 = f.values().map(|v| v.clamp(-1.0, 1.0));
    let mut result = preprocess(engine, x, &z0, 1.0)?;
    if peak > 1.0 {
        result.spectral_residual = (x * (&result.reshaped - f.values())).norm();
    }
    Ok(result)
}

pub fn quantize_reshaped(
    basis: &SpectralBasis,
    preprocess: PreprocessResult,
    alphabet: &Alphabet,
) -> SsnsOutput {
    let q = alphabet.quantize_vector(&preprocess.reshaped);
    let fq = basis.vectors() * basis.vectors().tr_mul(&q);
    SsnsOutput { q, fq, preprocess }
}

/// Full pipeline from a Laplacian: eigendecomposition, preprocessing, MSQ.
pub fn ssns_quantize(
    laplacian: &DMatrix<f64>,
    f: &GraphSignal,
    bits: u32,
    r: usize,
    engine: Engine,
) -> Result<SsnsOutput> {
    let basis = eig_smallest(laplacian, r)?;
    let alphabet = Alphabet::with_bits(bits)?;
    ssns_quantize_with_basis(&basis, f, &alphabet, engine)
}

/// `√r · Δ / 2`: the guaranteed ceiling on `‖L_r(f − q)‖₂`.
pub fn explicit_error_bound(r: usize, alphabet: &Alphabet) -> f64 {
    (r as f64).sqrt() * alphabet.spacing() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_of_mean_direction() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]) / 3f64.sqrt();
        let b = kernel_vector(&x, &[], &[0, 1]).unwrap();
        let c = b.coefficients();
        assert!((c[0] + c[1]).abs() < 1e-15);
        assert!((c[0].abs() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.support(), &[0, 1]);
    }

    #[test]
    fn kernel_respects_saturated_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_orthonormal(16, 4, &mut rng).transpose();
        let mut idx: Vec<usize> = (0..16).collect();
        idx.shuffle(&mut rng);
        let saturated = idx[..5].to_vec();
        let mut active: Vec<usize> = idx[5..].to_vec();
        active.sort();
        active.truncate(5);
        let b = kernel_vector(&x, &saturated, &active).unwrap();
        let dense = b.to_dense(16);
        assert!(saturated.iter().all(|&i| dense[i] == 0.0));
        assert!((&x * &dense).norm() <= 1e-9);
        assert!((dense.norm() - 1.0).abs() < 1e-14);

        assert!(kernel_vector(&x, &saturated, &[saturated[0], active[0]]).is_err());
        // r columns of a generic r × N matrix have no kernel.
        assert!(matches!(
            kernel_vector(&x, &[], &active[..4]),
            Err(Error::NoKernel(_))
        ));
    }

    #[test]
    fn step_examples() {
        let mut z = DVector::from_vec(vec![0.0, 0.0]);
        let s = 0.5f64.sqrt();
        let b = KernelDirection::new(vec![0, 1], vec![s, -s]).unwrap();
        let (alpha, hit) = step_to_boundary(&mut z, &b, 1.0).unwrap();
        assert!((alpha - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(hit, vec![0, 1]);
        assert_eq!(z.as_slice(), &[1.0, -1.0]);

        let mut z = DVector::from_vec(vec![0.5, 0.0, 0.0]);
        let b = KernelDirection::new(vec![0, 1, 2], vec![1.0, 0.0, 0.0]).unwrap();
        let (alpha, hit) = step_to_boundary(&mut z, &b, 1.0).unwrap();
        assert_eq!((alpha, hit), (0.5, vec![0]));
        assert_eq!(z[0], 1.0);

        let mut z = DVector::from_vec(vec![0.9, -0.9, 0.0]);
        let b = KernelDirection::new(vec![0, 1, 2], vec![0.0, 0.0, 1.0]).unwrap();
        let (alpha, hit) = step_to_boundary(&mut z, &b, 1.0).unwrap();
        assert_eq!((alpha, hit), (1.0, vec![2]));
        assert_eq!(z.as_slice(), &[0.9, -0.9, 1.0]);

        let mut z = DVector::from_vec(vec![1.0, -1.0]);
        let b = KernelDirection::new(vec![0, 1], vec![1.0, 1.0]).unwrap();
        assert!(step_to_boundary(&mut z, &b, 1.0).is_err());
    }

    fn check_contract(x: &DMatrix<f64>, z0: &DVector<f64>, c: f64, out: &PreprocessResult) {
        let r = x.nrows();
        assert!(out.spectral_residual <= 1e-8 * (1.0 + z0.norm()), "{}", out.spectral_residual);
        assert!((out.reshaped.amax() - c).abs() <= 1e-10 * c);
        assert!(out.unsaturated().len() <= r);
        for &i in &out.saturated {
            assert_eq!(out.reshaped[i].abs(), c);
        }
    }

    #[test]
    fn zero_matrix_saturates_at_init() {
        let x = DMatrix::zeros(2, 6);
        let z0 = DVector::from_vec(vec![0.1, -0.2, 0.3, -0.4, 0.5, 0.0]);
        for out in [
            preprocess_reference(&x, &z0, 1.0).unwrap(),
            preprocess_fast(&x, &z0, 1.0).unwrap(),
        ] {
            assert_eq!(out.iterations, 0);
            assert!(out.reshaped.iter().all(|&v| v == 1.0));
            assert_eq!(out.saturated.len(), 6);
        }
    }

    #[test]
    fn mean_preserving_walk() {
        let n = 40;
        let x = DMatrix::from_element(1, n, 1.0 / (n as f64).sqrt());
        let z0 = DVector::zeros(n);
        for engine in [Engine::Reference, Engine::Fast] {
            let out = preprocess(engine, &x, &z0, 1.0).unwrap();
            check_contract(&x, &z0, 1.0, &out);
            let at_bound = out.reshaped.iter().filter(|v| v.abs() == 1.0).count();
            assert!(at_bound >= n - 1);
            assert!(out.reshaped.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn random_subspace_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n, r) in &[(30, 3), (64, 8), (1000, 48), (257, 16)] {
            let x = random_orthonormal(n, r, &mut rng).transpose();
            let alpha = DVector::from_fn(r, |i, _| ((i * 37 % 11) as f64) - 5.0);
            let f = x.tr_mul(&alpha);
            let z0 = &f / f.amax();
            for engine in [Engine::Reference, Engine::Fast] {
                let out = preprocess(engine, &x, &z0, 1.0).unwrap();
                check_contract(&x, &z0, 1.0, &out);
            }
        }
    }

    #[test]
    fn bound_above_peak_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_orthonormal(50, 5, &mut rng).transpose();
        let z0 = DVector::from_fn(50, |i, _| ((i as f64) * 0.37).sin() * 0.5);
        for engine in [Engine::Reference, Engine::Fast] {
            let out = preprocess(engine, &x, &z0, 2.0).unwrap();
            check_contract(&x, &z0, 2.0, &out);
        }
        assert!(matches!(
            preprocess_reference(&x, &z0, 0.25),
            Err(Error::Precondition(_))
        ));
        let square = DMatrix::identity(4, 4);
        assert!(preprocess_fast(&square, &DVector::zeros(4), 1.0).is_err());
    }

    #[test]
    fn saturation_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_orthonormal(120, 10, &mut rng).transpose();
        let z0 = DVector::from_fn(120, |i, _| ((i as f64) * 1.3).cos() * 0.9);
        for engine in [Engine::Reference, Engine::Fast] {
            let mut seen = std::collections::BTreeSet::new();
            let mut last = 0;
            let mut record = |e: &StepEvent| {
                assert!(e.alpha > 0.0);
                assert!(!e.newly_saturated.is_empty());
                for &i in &e.newly_saturated {
                    assert!(seen.insert(i), "index {i} saturated twice");
                }
                assert!(e.saturated_count > last);
                last = e.saturated_count;
            };
            match engine {
                Engine::Reference => preprocess_reference_observed(&x, &z0, 1.0, &mut record),
                Engine::Fast => preprocess_fast_observed(&x, &z0, 1.0, &mut record),
            }
            .unwrap();
        }
    }

    #[test]
    fn fast_engine_uses_fewer_factorizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_orthonormal(400, 20, &mut rng).transpose();
        let z0 = DVector::from_fn(400, |i, _| ((i as f64) * 0.11).sin() * 0.8);
        let reference = preprocess_reference(&x, &z0, 1.0).unwrap();
        let fast = preprocess_fast(&x, &z0, 1.0).unwrap();
        assert!(fast.iterations * 5 < reference.iterations);
    }

    #[test]
    fn rejected_blocks_fall_back_to_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_orthonormal(90, 7, &mut rng).transpose();
        let z0 = DVector::from_fn(90, |i, _| ((i as f64) * 0.7).sin() * 0.95);
        let mut hits = 0;
        // A negative tolerance rejects every block.
        let out = fast_walk(&x, &z0, 1.0, -1.0, &mut |e| hits += e.newly_saturated.len()).unwrap();
        assert!(out.unsaturated().len() <= 7);
        assert!((&x * (&out.reshaped - &z0)).norm() < 1e-12);
        assert_eq!(hits, out.saturated.len());
        assert_eq!(out.iterations, preprocess_reference(&x, &z0, 1.0).unwrap().iterations);
    }

    #[test]
    fn pipeline_rejects_unnormalized_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = SpectralBasis::from_vectors(random_orthonormal(20, 3, &mut rng)).unwrap();
        let f = GraphSignal::from_vec(vec![0.5; 20]).unwrap();
        let a = Alphabet::with_bits(2).unwrap();
        assert!(ssns_quantize_with_basis(&basis, &f, &a, Engine::Fast).is_err());
    }

    #[test]
    fn alphabet_valued_signal_is_a_fixed_point() {
        // Every entry already at ±1: nothing to walk, nothing to round.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = SpectralBasis::from_vectors(random_orthonormal(24, 4, &mut rng)).unwrap();
        let values: Vec<f64> = (0..24).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let f = GraphSignal::from_vec(values).unwrap();
        for b in [1, 2, 4] {
            let a = Alphabet::with_bits(b).unwrap();
            let out = ssns_quantize_with_basis(&basis, &f, &a, Engine::Reference).unwrap();
            assert_eq!(&out.q, f.values());
            assert_eq!(out.preprocess.iterations, 0);
        }
    }

    #[test]
    fn engine_names() {
        assert_eq!("fast".parse::<Engine>().unwrap(), Engine::Fast);
        assert_eq!("reference".parse::<Engine>().unwrap(), Engine::Reference);
        assert!("slow".parse::<Engine>().is_err());
        assert_eq!(Engine::Reference.to_string(), "reference");
    }
}
