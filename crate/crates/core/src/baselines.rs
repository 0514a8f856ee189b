//! Comparison quantizers: direct MSQ and a sampled first-order noise shaper.
//!
//! The noise shaper is a sketch of step-by-step serving with replacement
//! (SSS-R): at each step a vertex `i` is drawn, `q = msq(f_i + u)` is
//! recorded for it and the running state is updated as `u ← u + f_i − q`.
//! Each vertex keeps the average of everything recorded for it. Run in
//! round-robin order with one pass, the same engine is the Sigma-Delta style
//! halftoner (SDW) used for display comparisons.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantizer::Alphabet;
use crate::rng;
use crate::spectral::SpectralBasis;

/// Label attached to every output produced by the sampled noise shaper.
pub const SSSR_LABEL: &str = "SSS-R (sketch)";

/// Per-vertex visit averages in the augmented alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedQuantization {
    pub values: DVector<f64>,
    pub visits: Vec<u64>,
    pub samples: u64,
}

impl AugmentedQuantization {
    /// Vertices that were never drawn.
    pub fn unvisited(&self) -> usize {
        self.visits.iter().filter(|&&v| v == 0).count()
    }
}

/// Vertex visiting order for [`noise_shape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `M` uniform draws with replacement from the seeded stream.
    Sampled { samples: u64, seed: u64 },
    /// `0, 1, …, N−1, 0, 1, …` for `M` steps.
    RoundRobin { samples: u64 },
}

/// Entry-wise MSQ with the B-bit alphabet.
pub fn msq_direct(f: &DVector<f64>, bits: u32) -> Result<DVector<f64>> {
    check_range(f)?;
    Ok(Alphabet::with_bits(bits)?.quantize_vector(f))
}

/// `⌈N ln N⌉`
pub fn default_samples(n: usize) -> u64 {
    let nf = n as f64;
    (nf * nf.ln()).ceil().max(nf) as u64
}

/// Sampled noise shaping with `samples` draws (at least `N`).
///
/// Vertices that are never drawn fall back to `msq(f_i)`.
pub fn sssr_quantize(
    f: &DVector<f64>,
    basis: &SpectralBasis,
    bits: u32,
    samples: u64,
    seed: u64,
) -> Result<AugmentedQuantization> {
    if bits == 1 {
        return Err(Error::Unsupported(
            "SSS-R is not available for 1-bit quantization".into(),
        ));
    }
    if basis.n() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.n(),
            got: f.len(),
        });
    }
    let alphabet = Alphabet::with_bits(bits)?;
    noise_shape(f, &alphabet, Schedule::Sampled { samples, seed })
}

/// Single round-robin pass; 1-bit output is allowed.
pub fn sdw_halftone(f: &DVector<f64>, bits: u32) -> Result<DVector<f64>> {
    let alphabet = Alphabet::with_bits(bits)?;
    let out = noise_shape(
        f,
        &alphabet,
        Schedule::RoundRobin {
            samples: f.len() as u64,
        },
    )?;
    Ok(out.values)
}

/// The shared engine behind [`sssr_quantize`] and [`sdw_halftone`].
pub fn noise_shape(
    f: &DVector<f64>,
    alphabet: &Alphabet,
    schedule: Schedule,
) -> Result<AugmentedQuantization> {
    check_range(f)?;
    let n = f.len();
    if n == 0 {
        return Err(Error::InvalidSize("empty signal".into()));
    }
    let samples = match schedule {
        Schedule::Sampled { samples, .. } | Schedule::RoundRobin { samples } => samples,
    };
    if samples < n as u64 {
        return Err(Error::InvalidParameter(format!(
            "need at least N = {n} samples, got {samples}"
        )));
    }

    let mut sums = vec![0.0; n];
    let mut visits = vec![0u64; n];
    let mut u = 0.0;
    let mut step = |i: usize| {
        let q = alphabet.quantize(f[i] + u);
        u += f[i] - q;
        sums[i] += q;
        visits[i] += 1;
    };
    match schedule {
        Schedule::Sampled { seed, .. } => {
            let mut stream = rng::stream(seed);
            for _ in 0..samples {
                step(stream.random_range(0..n));
            }
        }
        Schedule::RoundRobin { .. } => {
            for t in 0..samples {
                step((t % n as u64) as usize);
            }
        }
    }

    let values = DVector::from_fn(n, |i, _| {
        if visits[i] == 0 {
            alphabet.quantize(f[i])
        } else {
            sums[i] / visits[i] as f64
        }
    });
    Ok(AugmentedQuantization {
        values,
        visits,
        samples,
    })
}

fn check_range(f: &DVector<f64>) -> Result<()> {
    if let Some(i) = f.iter().position(|v| v.is_nan() || v.abs() > 1.0) {
        return Err(Error::Precondition(format!(
            "entry {i} = {} lies outside [-1, 1]",
            f[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_grid, normalized_laplacian};
    use crate::signal::random_bandlimited;
    use crate::spectral::eig_smallest;
    use proptest::prelude::*;

    fn basis(r: usize) -> SpectralBasis {
        let l = normalized_laplacian(&build_grid(6, 7).unwrap()).unwrap();
        eig_smallest(&l, r).unwrap()
    }

    #[test]
    fn msq_direct_examples() {
        let f = DVector::from_vec(vec![0.1, 0.9, 1e-9, 1.0]);
        assert_eq!(msq_direct(&f, 1).unwrap(), DVector::from_element(4, 1.0));
        let a = Alphabet::with_bits(3).unwrap();
        let exact = DVector::from_vec(a.levels().to_vec());
        assert_eq!(msq_direct(&exact, 3).unwrap(), exact);
        assert!(msq_direct(&DVector::from_vec(vec![1.5]), 2).is_err());
    }

    #[test]
    fn one_bit_sssr_is_unsupported() {
        let b = basis(5);
        let f = DVector::zeros(42);
        assert!(matches!(
            sssr_quantize(&f, &b, 1, 100, 0),
            Err(Error::Unsupported(_))
        ));
        assert!(sssr_quantize(&f, &b, 2, 41, 0).is_err());
    }

    #[test]
    fn round_robin_single_pass_is_sigma_delta() {
        let f = DVector::from_vec(vec![0.3, -0.2, 0.7, 0.0, -0.9]);
        let a = Alphabet::with_bits(2).unwrap();
        let got = noise_shape(&f, &a, Schedule::RoundRobin { samples: 5 }).unwrap();
        let mut u = 0.0;
        for i in 0..5 {
            let q = a.quantize(f[i] + u);
            u += f[i] - q;
            assert_eq!(got.values[i], q);
            assert_eq!(got.visits[i], 1);
        }
        assert_eq!(got.values, sdw_halftone(&f, 2).unwrap());
    }

    #[test]
    fn one_bit_halftone_is_binary_with_bounded_state() {
        let f = DVector::from_fn(200, |i, _| (i as f64 * 0.05).sin());
        let q = sdw_halftone(&f, 1).unwrap();
        assert!(q.iter().all(|&v| v == 1.0 || v == -1.0));
        let mut partial = 0.0f64;
        for i in 0..200 {
            partial += f[i] - q[i];
            assert!(partial.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn sampled_is_seeded() {
        let b = basis(8);
        let f = random_bandlimited(&b, 4).unwrap().into_values();
        let m = default_samples(42);
        let x = sssr_quantize(&f, &b, 3, m, 11).unwrap();
        assert_eq!(x, sssr_quantize(&f, &b, 3, m, 11).unwrap());
        assert_ne!(x, sssr_quantize(&f, &b, 3, m, 12).unwrap());
        assert_eq!(x.visits.iter().sum::<u64>(), m);
        assert_eq!(x.samples, m);
    }

    #[test]
    fn default_sample_count() {
        assert_eq!(default_samples(900), (900.0 * 900f64.ln()).ceil() as u64);
        assert_eq!(default_samples(1), 1);
    }

    proptest! {
        #[test]
        fn averages_stay_in_range(seed in 0u64..1000, bits in 2u32..=5) {
            let f = DVector::from_fn(30, |i, _| ((i as u64 * 37 + seed) % 19) as f64 / 9.0 - 1.0);
            let a = Alphabet::with_bits(bits).unwrap();
            let out = noise_shape(&f, &a, Schedule::Sampled { samples: 120, seed }).unwrap();
            let d = a.spacing();
            prop_assert!(out.values.iter().all(|v| v.abs() <= 1.0 + d));
            prop_assert_eq!(out.visits.iter().sum::<u64>(), 120);
            for i in 0..30 {
                if out.visits[i] > 0 {
                    // A visit average times the visit count is a sum of levels.
                    let total = out.values[i] * out.visits[i] as f64;
                    let steps = (total + out.visits[i] as f64) / d;
                    prop_assert!((steps - steps.round()).abs() < 1e-9);
                }
            }
        }
    }
}
