//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles here are computed independently of the library where
//! the library's own answer is what is being checked.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graph_ssns::graph::{build_grid, build_ring, build_sensor, normalized_laplacian, swiss_roll};
use graph_ssns::linalg::random_orthonormal;
use graph_ssns::metrics::{bit_budget, spearman};
use graph_ssns::rng::{derive_seed, SeedPart};
use graph_ssns::signal::random_bandlimited;
use graph_ssns::spectral::{eig_smallest, gamma_complexity, for_each_subset};
use graph_ssns::ssns::{preprocess_normalized, quantize_reshaped};
use graph_ssns::{Alphabet, Engine, Graph, SpectralBasis};
use ssns_cli::output::Cell;
use ssns_cli::{run, ExperimentConfig, ExperimentKind, ExperimentOutput, Settings};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Shared tallies for the per-run criteria 2 and 3.
#[derive(Default)]
struct Tally {
    bound_runs: usize,
    bound_violations: Vec<String>,
    worst_bound_ratio: f64,
    signals: usize,
    norm_violations: Vec<String>,
}

impl Tally {
    fn bound(&mut self, label: &str, qe: f64, r: usize, bits: u32) {
        let limit = if bits == 1 {
            (r as f64).sqrt()
        } else {
            (r as f64).sqrt() / ((1u64 << bits) - 1) as f64
        };
        self.bound_runs += 1;
        self.worst_bound_ratio = self.worst_bound_ratio.max(qe / limit);
        if qe > limit {
            self.bound_violations.push(format!("{label} B={bits}: {qe:e} > {limit:e}"));
        }
    }
}

fn config(kind: ExperimentKind, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut s = Settings::default();
    for (k, v) in pairs {
        s.set(k, v).expect("valid key");
    }
    ExperimentConfig::resolve(kind, &[&s]).expect("valid config")
}

fn column(out: &ExperimentOutput, table: &str, name: &str) -> Vec<f64> {
    out.table(table).expect("table exists").floats(name)
}

/// `(N/r) · max_i ‖row_i(X_r)‖²`, straight from the definition.
fn incoherence_oracle(x: &DMatrix<f64>) -> f64 {
    let (n, r) = x.shape();
    let peak = (0..n)
        .map(|i| x.row(i).norm_squared())
        .fold(0.0, f64::max);
    n as f64 / r as f64 * peak
}

/// `‖X_rᵀ v‖₂` without going through the library's metric.
fn filtered_norm(x: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (x.transpose() * v).norm()
}

fn criterion_1(tally: &mut Tally) -> Outcome {
    let start = Instant::now();
    let graphs: Vec<(String, Graph)> = vec![
        ("ring-256".into(), build_ring(256).unwrap()),
        ("ring-900".into(), build_ring(900).unwrap()),
        ("grid-16x16".into(), build_grid(16, 16).unwrap()),
        ("grid-30x30".into(), build_grid(30, 30).unwrap()),
        ("sensor-256".into(), build_sensor(256, 8, 11).unwrap()),
        ("sensor-900".into(), build_sensor(900, 8, 12).unwrap()),
    ];
    let bandwidths = [8usize, 32, 50];
    let bases: Vec<SpectralBasis> = graphs
        .iter()
        .map(|(_, g)| eig_smallest(&normalized_laplacian(g).unwrap(), 50).unwrap())
        .collect();

    let mut failures = Vec::new();
    let (mut worst_residual, mut worst_peak, mut runs) = (0.0f64, 0.0f64, 0);
    for instance in 0..200usize {
        let combo = instance % (graphs.len() * bandwidths.len());
        let (g, r) = (combo / bandwidths.len(), bandwidths[combo % bandwidths.len()]);
        let basis = bases[g].truncated(r).unwrap();
        let seed = derive_seed(1, &[SeedPart::Label("c1"), SeedPart::Index(instance as u64)]);
        let f = random_bandlimited(&basis, seed).unwrap();
        let label = format!("{} r={r} #{instance}", graphs[g].0);

        let norm = f.l2();
        let mu = incoherence_oracle(basis.vectors());
        let floor = (basis.n() as f64 / r as f64).sqrt() / mu;
        tally.signals += 1;
        if norm < floor * (1.0 - 1e-9) {
            tally.norm_violations.push(format!("{label}: {norm} < {floor}"));
        }

        let x = basis.analysis_matrix();
        for engine in [Engine::Reference, Engine::Fast] {
            runs += 1;
            let pre = match preprocess_normalized(&x, &f, engine) {
                Ok(p) => p,
                Err(e) => {
                    failures.push(format!("{label} {engine}: {e}"));
                    continue;
                }
            };
            let fhat = &pre.reshaped;
            let residual = filtered_norm(basis.vectors(), &(fhat - f.values()));
            let peak = fhat.amax();
            let inside = fhat.iter().filter(|v| v.abs() < 1.0).count();
            worst_residual = worst_residual.max(residual / (1.0 + norm));
            worst_peak = worst_peak.max((peak - 1.0).abs());
            if residual > 1e-8 * (1.0 + norm) || (peak - 1.0).abs() > 1e-10 || inside > r {
                failures.push(format!(
                    "{label} {engine}: residual {residual:e}, peak {peak}, {inside} unsaturated"
                ));
            }
            for bits in 1..=4 {
                let a = Alphabet::with_bits(bits).unwrap();
                let q = quantize_reshaped(&basis, pre.clone(), &a).q;
                tally.bound(&format!("{label} {engine}"), filtered_norm(basis.vectors(), &(f.values() - q)), r, bits);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = failures.is_empty() && secs < 60.0;
    outcome(
        passed,
        format!(
            "200 instances, {runs} runs, {} failures, max residual/(1+|f|) {worst_residual:.1e}, max |peak-1| {worst_peak:.1e}, {secs:.1} s (limit 60 s){}",
            failures.len(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_2(tally: &Tally) -> Outcome {
    outcome(
        tally.bound_violations.is_empty(),
        format!(
            "{} runs, {} violations, max qe/bound {:.3}{}",
            tally.bound_runs,
            tally.bound_violations.len(),
            tally.worst_bound_ratio,
            tally.bound_violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

fn criterion_3(tally: &Tally) -> Outcome {
    outcome(
        tally.norm_violations.is_empty(),
        format!(
            "{} signals, {} violations{}",
            tally.signals,
            tally.norm_violations.len(),
            tally.norm_violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = Vec::new();
    let mut ties = 0usize;
    for bits in 1..=8u32 {
        let a = Alphabet::with_bits(bits).unwrap();
        let d = ((1u64 << bits) - 1) as f64;
        let levels: Vec<f64> = (0..1u64 << bits).map(|j| -1.0 + 2.0 * j as f64 / d).collect();
        for k in 0..100_000usize {
            // Every tenth sample sits on a midpoint or a level.
            let z = match k % 10 {
                0 => {
                    let j = rng.random_range(0..levels.len() - 1);
                    ties += 1;
                    0.5 * (levels[j] + levels[j + 1])
                }
                5 => levels[rng.random_range(0..levels.len())],
                _ => rng.random_range(-1.25..1.25),
            };
            let mut best = 0;
            for (j, &p) in levels.iter().enumerate() {
                let (dj, db) = ((z - p).abs(), (z - levels[best]).abs());
                if dj <= db + 8.0 * f64::EPSILON * z.abs().max(1.0) {
                    best = j;
                }
            }
            let q = a.quantize(z);
            let got = a.levels().iter().position(|&p| p == q);
            if got != Some(best) {
                mismatches.push(format!("B={bits} z={z:e}: got {q}, want level {best}"));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "800000 samples ({ties} midpoints), {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(4..=12usize);
        let r = rng.random_range(1..=3usize);
        let x = random_orthonormal(n, r, &mut rng);
        let gamma = gamma_complexity(&SpectralBasis::from_vectors(x.clone()).unwrap()).unwrap();
        let mut oracle = 0.0f64;
        for_each_subset(n, r, &mut |rows| {
            let sub = x.select_rows(rows);
            let s = sub.singular_values().max();
            oracle = oracle.max(s);
        });
        worst = worst.max(gamma);
        worst_gap = worst_gap.max((gamma - oracle).abs());
    }
    outcome(
        worst <= 1.0 + 1e-10 && worst_gap <= 1e-12,
        format!("50 matrices, max gamma {worst:.12}, max |gamma - svd oracle| {worst_gap:.1e}"),
    )
}

fn criterion_6(tally: &mut Tally) -> Outcome {
    let start = Instant::now();
    let cfg = config(
        ExperimentKind::Bitdepth,
        &[("graph", "grid:30x30"), ("r", "200"), ("bits", "1:6"), ("trials", "50")],
    );
    let out = run(&cfg).unwrap();
    for (qe, bits) in column(&out, "bitdepth", "qe").into_iter().zip(column(&out, "bitdepth", "bits")) {
        tally.bound("grid-30x30 r=200", qe, 200, bits as u32);
    }
    let means = column(&out, "bitdepth_summary", "mean_rel_error");
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    // Ratios for B -> B+1 with B in 2..=5 are entries 1..=4.
    let shrinking = ratios[1..].iter().all(|&q| q <= 0.75);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        decreasing && shrinking && secs < 600.0,
        format!(
            "means {}; ratios {}; {secs:.1} s (limit 600 s)",
            join(means.iter().map(|m| format!("{m:.3e}"))),
            join(ratios.iter().map(|q| format!("{q:.3}")))
        ),
    )
}

fn criterion_7(tally: &mut Tally) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for graph in ["ring", "grid:30x30"] {
        let cfg = config(
            ExperimentKind::Sweep,
            &[("graph", graph), ("n", "900"), ("r", "15,155"), ("bits", "2"), ("trials", "20")],
        );
        let out = run(&cfg).unwrap();
        for (qe, r) in column(&out, "sweep", "qe").into_iter().zip(column(&out, "sweep", "r")) {
            tally.bound(graph, qe, r as usize, 2);
        }
        let means = column(&out, "sweep_summary", "mean_rel_error");
        passed &= means[1] > means[0];
        parts.push(format!("{graph}: r=15 {:.3e}, r=155 {:.3e}", means[0], means[1]));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let l = normalized_laplacian(&build_ring(2048).unwrap()).unwrap();
    let full = eig_smallest(&l, 64).unwrap();
    let mut ratios = Vec::new();
    let mut parts = Vec::new();
    for r in [16usize, 64] {
        let basis = full.truncated(r).unwrap();
        let x = basis.analysis_matrix();
        let f = random_bandlimited(&basis, 8).unwrap();
        let mut times = [Vec::new(), Vec::new()];
        for _ in 0..5 {
            for (k, engine) in [Engine::Reference, Engine::Fast].into_iter().enumerate() {
                let start = Instant::now();
                let pre = preprocess_normalized(&x, &f, engine).unwrap();
                times[k].push(start.elapsed().as_secs_f64());
                assert!(pre.unsaturated().len() <= r);
            }
        }
        let [reference, fast] = times.map(median);
        ratios.push(reference / fast);
        parts.push(format!(
            "r={r}: reference {:.1} ms, fast {:.1} ms, ratio {:.2}",
            reference * 1e3,
            fast * 1e3,
            reference / fast
        ));
    }
    let growth = ratios[1] / ratios[0];
    outcome(growth >= 2.0, format!("{}; ratio growth {growth:.2} (need >= 2)", parts.join("; ")))
}

fn criterion_9() -> Outcome {
    let budget = bit_budget(900);
    let cfg = config(
        ExperimentKind::Compare,
        &[("graph", "ring"), ("n", "900"), ("r", "15:155:10"), ("bits", "budget"), ("trials", "20")],
    );
    let out = run(&cfg).unwrap();
    let bits = column(&out, "compare_summary", "bits");
    let eq6 = column(&out, "compare_summary", "bound_eq6");
    let empirical = column(&out, "compare_summary", "ssns_mean_rel_error");
    let worst = eq6
        .iter()
        .zip(&empirical)
        .map(|(b, e)| (b / e).log10().abs())
        .fold(0.0, f64::max);
    let rho = spearman(&eq6, &empirical).unwrap();
    let within_hundred = worst <= 2.0;
    outcome(
        budget == 4 && bits.iter().all(|&b| b == 4.0) && worst <= 3.0 && rho > 0.9,
        format!(
            "B={budget}, {} bandwidths, max |log10(eq6/empirical)| {worst:.2} (pass <= 3, within 10^2: {within_hundred}), spearman {rho:.3}",
            eq6.len()
        ),
    )
}

fn criterion_10(dir: &Path) -> Outcome {
    let mesh = dir.join("roll.ply");
    swiss_roll(1500, 10).save_ply(&mesh).unwrap();
    let cfg = config(
        ExperimentKind::Halftone,
        &[("mesh", mesh.to_str().unwrap()), ("r", "20,50"), ("bits", "1")],
    );
    let out = run(&cfg).unwrap();
    let summary = out.table("halftone").unwrap();
    let method = summary.column("method").unwrap();
    let mut parts = Vec::new();
    let mut passed = true;
    for r in [20usize, 50] {
        let proxy = |name: &str| {
            summary
                .rows
                .iter()
                .find(|row| row[1] == Cell::from(r) && row[method] == Cell::from(name))
                .and_then(|row| row[summary.column("proxy_error").unwrap()].as_f64())
                .unwrap()
        };
        let (ssns, msq, sdw) = (proxy("SSNS"), proxy("MSQ"), proxy("SDW"));
        let values = out.table(&format!("halftone_r{r}_b1")).unwrap();
        let binary = values.floats("ssns").iter().all(|v| v.abs() == 1.0);
        passed &= ssns < msq && binary && values.rows.len() == 1500;
        parts.push(format!("r={r}: SSNS {ssns:.3e} < MSQ {msq:.3e} (SDW {sdw:.3e})"));
    }
    outcome(passed, format!("1500-vertex mesh; {}", parts.join("; ")))
}

fn criterion_11(dir: &Path) -> Outcome {
    let mesh = dir.join("det.ply");
    swiss_roll(300, 3).save_ply(&mesh).unwrap();
    let mesh = mesh.to_str().unwrap().to_string();
    let experiments: Vec<(ExperimentKind, Vec<(&str, &str)>)> = vec![
        (ExperimentKind::Sweep, vec![("graph", "sensor"), ("n", "200"), ("r", "5,20"), ("bits", "1,3"), ("trials", "4")]),
        (ExperimentKind::Bitdepth, vec![("graph", "grid:10x12"), ("r", "30"), ("bits", "1:4"), ("trials", "4")]),
        (ExperimentKind::Compare, vec![("graph", "ring"), ("n", "150"), ("r", "5,15"), ("bits", "1,3"), ("trials", "4")]),
        (ExperimentKind::Halftone, vec![("mesh", mesh.as_str()), ("r", "10")]),
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (kind, pairs) in experiments {
        let mut written: Vec<Vec<PathBuf>> = Vec::new();
        for (attempt, threads) in [(0, 1usize), (1, 3)] {
            let mut pairs = pairs.clone();
            let out_dir = dir.join(format!("{}-{attempt}", kind.name()));
            let out_str = out_dir.to_str().unwrap().to_string();
            pairs.push(("out", &out_str));
            let cfg = config(kind, &pairs);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let files = pool.install(|| ssns_cli::run_and_write(&cfg)).unwrap();
            written.push(
                files
                    .into_iter()
                    .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                    .filter(|p| !p.to_string_lossy().ends_with("_timing.csv"))
                    .collect(),
            );
        }
        for (a, b) in written[0].iter().zip(&written[1]) {
            compared += 1;
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                differing.push(a.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!(
            "{compared} CSV files compared across reruns with 1 and 3 threads, {} differ{}",
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let dir = std::env::temp_dir().join(format!("ssns-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut tally = Tally::default();

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "preprocessing contract", criterion_1(&mut tally)),
        (4, "MSQ oracle equivalence", criterion_4()),
        (5, "data complexity brute force", criterion_5()),
        (6, "bit-depth scaling", criterion_6(&mut tally)),
        (7, "bandwidth trend", criterion_7(&mut tally)),
        (8, "engine speedup growth", criterion_8()),
        (9, "ring tightness", criterion_9()),
        (10, "halftoning", criterion_10(&dir)),
        (11, "determinism", criterion_11(&dir)),
        (2, "explicit error bound", criterion_2(&tally)),
        (3, "signal norm floor", criterion_3(&tally)),
    ];
    results.sort_by_key(|r| r.0);

    let _ = std::fs::remove_dir_all(&dir);
    let mut failed = 0;
    for (id, name, o) in &results {
        let status = if o.passed { "PASS" } else { "FAIL" };
        failed += !o.passed as usize;
        println!("criterion {id:>2} {status} {name}: {}", o.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
