//! Quick end-to-end sanity checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graph_ssns::graph::{build_grid, build_ring, normalized_laplacian};
use graph_ssns::linalg::random_orthonormal;
use graph_ssns::metrics::qe_filtered;
use graph_ssns::signal::random_bandlimited;
use graph_ssns::spectral::{eig_smallest, gamma_complexity};
use graph_ssns::ssns::{explicit_error_bound, preprocess_normalized, quantize_reshaped};
use graph_ssns::{Alphabet, Engine, SpectralBasis};

use crate::config::{ExperimentConfig, ExperimentKind, Settings};
use crate::experiments::run;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_selftest() -> Vec<Check> {
    vec![msq_oracle(), preprocessing(), gamma(), determinism()]
}

fn msq_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for bits in 1..=8 {
        let a = Alphabet::with_bits(bits).expect("valid bit depth");
        for _ in 0..2000 {
            let z: f64 = rng.random_range(-1.5..1.5);
            // Exhaustive search, ties to the larger level.
            let mut best = a.levels()[0];
            for &p in a.levels() {
                if (z - p).abs() <= (z - best).abs() + 8.0 * f64::EPSILON * z.abs().max(1.0) {
                    best = p;
                }
            }
            mismatches += (a.quantize(z) != best) as usize;
        }
    }
    Check {
        name: "msq matches exhaustive search",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches"),
    }
}

fn preprocessing() -> Check {
    let mut failures = Vec::new();
    let graphs = [("ring", build_ring(120)), ("grid", build_grid(10, 12))];
    for (name, g) in graphs {
        let l = normalized_laplacian(&g.expect("valid graph")).expect("connected");
        let full = eig_smallest(&l, 12).expect("eigendecomposition");
        for r in [3, 12] {
            let basis = full.truncated(r).expect("r <= 12");
            let x = basis.analysis_matrix();
            for seed in 0..3 {
                let f = random_bandlimited(&basis, seed).expect("signal");
                for engine in [Engine::Reference, Engine::Fast] {
                    let ok = preprocess_normalized(&x, &f, engine).is_ok_and(|pre| {
                        let a = Alphabet::with_bits(2).expect("2 bits");
                        let unsat = pre.unsaturated().len();
                        let residual = pre.spectral_residual;
                        let out = quantize_reshaped(&basis, pre, &a);
                        let qe = qe_filtered(&basis, f.values(), &out.q).unwrap_or(f64::INFINITY);
                        unsat <= r
                            && residual <= 1e-8 * (1.0 + f.l2())
                            && qe <= explicit_error_bound(r, &a) + 1e-10
                    });
                    if !ok {
                        failures.push(format!("{name} r={r} seed={seed} {engine}"));
                    }
                }
            }
        }
    }
    Check {
        name: "preprocessing contract and explicit bound",
        passed: failures.is_empty(),
        detail: if failures.is_empty() { "24 runs".into() } else { failures.join("; ") },
    }
}

fn gamma() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = random_orthonormal(10, 3, &mut rng);
        let basis = SpectralBasis::from_vectors(x).expect("orthonormal");
        worst = worst.max(gamma_complexity(&basis).unwrap_or(f64::INFINITY));
    }
    Check {
        name: "data complexity at most one",
        passed: worst <= 1.0 + 1e-10,
        detail: format!("max {worst:.6}"),
    }
}

fn determinism() -> Check {
    let mut s = Settings::default();
    for (k, v) in [("graph", "grid:5x6"), ("r", "4,7"), ("bits", "1,2"), ("trials", "3")] {
        s.set(k, v).expect("valid key");
    }
    let result = ExperimentConfig::resolve(ExperimentKind::Sweep, &[&s])
        .and_then(|cfg| Ok((run(&cfg)?, run(&cfg)?)));
    let passed = matches!(&result, Ok((a, b)) if a.tables == b.tables);
    Check {
        name: "sweep reruns are identical",
        passed,
        detail: match result {
            Ok(_) => "2 runs".into(),
            Err(e) => e.to_string(),
        },
    }
}
