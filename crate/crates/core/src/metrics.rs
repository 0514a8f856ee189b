//! Quantization error functionals and the theoretical bound curves.
//!
//! Curve expressions use the natural logarithm; the bit budget matching a
//! `log log N` total allowance is `⌈log₂ log₂ N⌉`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::quantizer::Alphabet;
use crate::spectral::{brickwall_apply, gft, incoherence, SpectralBasis};

/// `‖L_r(f − q)‖₂`, computed as `‖X_rᵀ(f − q)‖₂`.
pub fn qe_filtered(basis: &SpectralBasis, f: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    check_lengths(f, q)?;
    Ok(gft(basis, &(f - q))?.norm())
}

/// `‖L_r(f − q)‖₂` with the filtered difference formed explicitly.
pub fn qe_filtered_direct(
    basis: &SpectralBasis,
    f: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<f64> {
    check_lengths(f, q)?;
    Ok(brickwall_apply(basis, &(f - q))?.norm())
}

/// `‖L_r(f − q)‖₂ / ‖f‖₂`.
pub fn relative_error(basis: &SpectralBasis, f: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    let norm = f.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter(
            "relative error of the zero signal is undefined".into(),
        ));
    }
    Ok(qe_filtered(basis, f, q)? / norm)
}

fn check_lengths(f: &DVector<f64>, q: &DVector<f64>) -> Result<()> {
    if f.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Theoretical relative-error curves with unit constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurves {
    /// `μ · r · 2^{−B} / √N`
    pub thm31: f64,
    /// `μ · r · ln r / √(N ln N)`; zero when `r < 2`.
    pub eq5: f64,
    /// `μ · r / (√N · ln N)`
    pub eq6: f64,
}

pub fn bound_curves(n: usize, r: usize, bits: u32, mu: f64) -> Result<BoundCurves> {
    if r == 0 || n <= r {
        return Err(Error::InvalidParameter(format!(
            "bound curves need N > r >= 1, got N={n}, r={r}"
        )));
    }
    if bits == 0 {
        return Err(Error::InvalidParameter("bit depth must be >= 1".into()));
    }
    if mu < 1.0 - 1e-9 {
        return Err(Error::InvalidParameter(format!("incoherence must be >= 1, got {mu}")));
    }
    let (nf, rf) = (n as f64, r as f64);
    let eq5 = if r < 2 {
        log::warn!("log-r curve is degenerate for r = {r}; reporting 0");
        0.0
    } else {
        mu * rf * rf.ln() / (nf * nf.ln()).sqrt()
    };
    Ok(BoundCurves {
        thm31: mu * rf * 2f64.powi(-(bits as i32)) / nf.sqrt(),
        eq5,
        eq6: mu * rf / (nf.sqrt() * nf.ln()),
    })
}

/// Bits per entry matching a total budget of `N log log N` bits.
pub fn bit_budget(n: usize) -> u32 {
    (n as f64).log2().log2().ceil().max(1.0) as u32
}

/// Everything reported for one quantized signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub qe: f64,
    pub relative: f64,
    /// `√r · Δ / 2`, absolute.
    pub bound_explicit: f64,
    pub bound_thm31: f64,
    pub bound_eq5: f64,
    pub bound_eq6: f64,
}

impl ErrorReport {
    pub fn compute(
        basis: &SpectralBasis,
        f: &DVector<f64>,
        q: &DVector<f64>,
        alphabet: &Alphabet,
    ) -> Result<Self> {
        let qe = qe_filtered(basis, f, q)?;
        let relative = relative_error(basis, f, q)?;
        let bits = alphabet
            .bits()
            .ok_or_else(|| Error::InvalidParameter("alphabet size is not a power of two".into()))?;
        let curves = bound_curves(basis.n(), basis.r(), bits, incoherence(basis))?;
        Ok(ErrorReport {
            qe,
            relative,
            bound_explicit: (basis.r() as f64).sqrt() * alphabet.spacing() / 2.0,
            bound_thm31: curves.thm31,
            bound_eq5: curves.eq5,
            bound_eq6: curves.eq6,
        })
    }
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        va += (x - mean).powi(2);
        vb += (y - mean).powi(2);
    }
    Ok(num / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}
