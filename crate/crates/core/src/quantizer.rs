//! Symmetric midrise alphabets and the memoryless scalar quantizer (MSQ).

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Largest supported bit depth (2^24 levels).
pub const MAX_BITS: u32 = 24;

/// Two candidate distances that differ by less than
/// `TIE_ULPS · ε · max(1, |z|)` count as a tie, which goes to the larger
/// level. Midpoints such as `2/3` between `1/3` and `1` are not exactly
/// representable, so exact comparison would break ties arbitrarily.
pub const TIE_ULPS: f64 = 8.0;

/// A uniform, strictly increasing level set that is symmetric about zero and
/// has an even number of levels (no level at zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    levels: Vec<f64>,
    spacing: f64,
    bits: Option<u32>,
}

impl Alphabet {
    /// The B-bit alphabet `{-1 + 2j/(2^B - 1) : j = 0..2^B}` with endpoints ±1.
    pub fn with_bits(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidParameter(format!(
                "bit depth must be in 1..={MAX_BITS}, got {bits}"
            )));
        }
        let count = 1usize << bits;
        let denom = (count - 1) as f64;
        // Odd integer numerators keep the set exactly symmetric.
        let levels = (0..count)
            .map(|j| (2.0 * j as f64 - denom) / denom)
            .collect();
        Ok(Alphabet {
            levels,
            spacing: 2.0 / denom,
            bits: Some(bits),
        })
    }

    /// The generic midrise alphabet `{±(k − 1/2)δ : 1 ≤ k ≤ K}`.
    pub fn midrise(k: usize, delta: f64) -> Result<Self> {
        if k == 0 || !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "midrise alphabet needs K >= 1 and delta > 0, got K={k}, delta={delta}"
            )));
        }
        let positive: Vec<f64> = (1..=k).map(|i| (i as f64 - 0.5) * delta).collect();
        let levels = positive
            .iter()
            .rev()
            .map(|v| -v)
            .chain(positive.iter().copied())
            .collect();
        let bits = (2 * k).is_power_of_two().then(|| (2 * k).trailing_zeros());
        Ok(Alphabet {
            levels,
            spacing: delta,
            bits,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Distance Δ between adjacent levels.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        self.levels
            .binary_search_by(|p| p.total_cmp(&x))
            .is_ok()
    }

    /// Nearest level to `z`; ties go to the larger level, and values outside
    /// the range clip to the nearest endpoint.
    pub fn quantize(&self, z: f64) -> f64 {
        let last = self.levels.len() - 1;
        let guess = ((z - self.levels[0]) / self.spacing + 0.5).floor();
        let guess = if guess.is_nan() {
            0
        } else {
            guess.clamp(0.0, last as f64) as usize
        };
        // The closed-form index can be off by one near midpoints; settle it
        // with the same distance comparison an exhaustive search would use.
        let mut best = guess.saturating_sub(1);
        for idx in best + 1..=(guess + 1).min(last) {
            if prefer(z, self.levels[idx], self.levels[best]) {
                best = idx;
            }
        }
        self.levels[best]
    }

    pub fn quantize_vector(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(|v| self.quantize(v))
    }
}

/// Whether `candidate` beats `incumbent` as the quantization of `z`, given
/// `candidate > incumbent`.
fn prefer(z: f64, candidate: f64, incumbent: f64) -> bool {
    let dc = (z - candidate).abs();
    let di = (z - incumbent).abs();
    dc <= di + TIE_ULPS * f64::EPSILON * z.abs().max(1.0)
}

pub fn make_alphabet_b(bits: u32) -> Result<Alphabet> {
    Alphabet::with_bits(bits)
}

/// `Q(z) = argmin_{p ∈ 𝒜} |z − p|`.
pub fn msq(z: f64, alphabet: &Alphabet) -> f64 {
    alphabet.quantize(z)
}

/// Entry-wise MSQ.
pub fn msq_vector(z: &DVector<f64>, alphabet: &Alphabet) -> DVector<f64> {
    alphabet.quantize_vector(z)
}
