//! The four experiment runners.
//!
//! Each trial draws its signal from a seed derived from the master seed, the
//! graph id, the bandwidth and the trial index, so results do not depend on
//! execution order or thread count. The same signal is reused across bit
//! depths. Trials run in parallel; aggregation walks a fixed index order.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use graph_ssns::baselines::{default_samples, sdw_halftone, sssr_quantize, SSSR_LABEL};
use graph_ssns::graph::normalized_laplacian;
use graph_ssns::metrics::{bit_budget, bound_curves, qe_filtered, relative_error};
use graph_ssns::rng::{derive_seed, SeedPart};
use graph_ssns::signal::{mesh_z_signal, random_bandlimited};
use graph_ssns::spectral::{eig_smallest, incoherence};
use graph_ssns::ssns::{explicit_error_bound, preprocess_normalized, quantize_reshaped};
use graph_ssns::{Alphabet, GraphSignal, PointCloud, PreprocessResult, SpectralBasis};

use crate::config::{BuiltGraph, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, ExperimentOutput, Table};

pub const SEED_SCHEME: &str = "first 8 bytes (LE u64) of sha256(master_seed LE || labels NUL-terminated || indices LE); \
signal: ('signal', graph_id, r, trial); SSS-R sampling: ('sssr', graph_id, r, B, trial); \
generated graphs: ('graph', graph_id)";

/// Slack on the explicit bound check, covering the spectral residual.
const BOUND_SLACK: f64 = 1e-10;

pub fn signal_seed(master: u64, graph_id: &str, r: usize, trial: usize) -> u64 {
    derive_seed(
        master,
        &[
            SeedPart::Label("signal"),
            SeedPart::Label(graph_id),
            SeedPart::Index(r as u64),
            SeedPart::Index(trial as u64),
        ],
    )
}

pub fn sssr_seed(master: u64, graph_id: &str, r: usize, bits: u32, trial: usize) -> u64 {
    derive_seed(
        master,
        &[
            SeedPart::Label("sssr"),
            SeedPart::Label(graph_id),
            SeedPart::Index(r as u64),
            SeedPart::Index(bits as u64),
            SeedPart::Index(trial as u64),
        ],
    )
}

/// Runs the experiment selected by `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Sweep => run_bandwidth_sweep(cfg),
        ExperimentKind::Bitdepth => run_bitdepth_scaling(cfg),
        ExperimentKind::Compare => run_comparison(cfg),
        ExperimentKind::Halftone => run_halftone(cfg),
    }
}

/// Runs and writes into `cfg.out_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    run(cfg)?.write(&cfg.out_dir)
}

/// Graph, bandwidth-indexed bases and the bandwidths below `N`.
struct Setup {
    built: BuiltGraph,
    bandwidths: Vec<usize>,
    skipped: Vec<usize>,
    bases: Vec<Band>,
}

struct Band {
    r: usize,
    basis: SpectralBasis,
    analysis: DMatrix<f64>,
    mu: f64,
}

fn setup(cfg: &ExperimentConfig) -> CliResult<Setup> {
    let built = cfg.graph.build(cfg.seed)?;
    let n = built.graph.n();
    let (bandwidths, skipped): (Vec<usize>, Vec<usize>) =
        cfg.bandwidths.iter().partition(|&&r| r < n);
    for r in &skipped {
        log::warn!("skipping r = {r}: needs r < N = {n}");
    }
    let Some(&r_max) = bandwidths.last() else {
        return Err(CliError::Config(format!("no bandwidth below N = {n}")));
    };
    log::info!("eigendecomposition of {} (N = {n})", built.id);
    let full = eig_smallest(&normalized_laplacian(&built.graph)?, r_max)?;
    let bases = bandwidths
        .iter()
        .map(|&r| {
            let basis = full.truncated(r)?;
            Ok(Band {
                r,
                analysis: basis.analysis_matrix(),
                mu: incoherence(&basis),
                basis,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Setup {
        built,
        bandwidths,
        skipped,
        bases,
    })
}

struct Trial {
    band: usize,
    trial: usize,
    seed: u64,
    f: GraphSignal,
    pre: PreprocessResult,
    preprocess_ms: f64,
}

/// Draws and preprocesses every `(bandwidth, trial)` pair in parallel.
fn run_trials(cfg: &ExperimentConfig, setup: &Setup) -> CliResult<Vec<Trial>> {
    let jobs: Vec<(usize, usize)> = (0..setup.bases.len())
        .flat_map(|b| (0..cfg.trials).map(move |t| (b, t)))
        .collect();
    jobs.par_iter()
        .map(|&(b, trial)| {
            let band = &setup.bases[b];
            let seed = signal_seed(cfg.seed, &setup.built.id, band.r, trial);
            let f = random_bandlimited(&band.basis, seed)?;
            let start = Instant::now();
            let pre = preprocess_normalized(&band.analysis, &f, cfg.engine)?;
            let preprocess_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(Trial {
                band: b,
                trial,
                seed,
                f,
                pre,
                preprocess_ms,
            })
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn metadata(cfg: &ExperimentConfig, setup: &Setup) -> Vec<(String, String)> {
    let g = &setup.built.graph;
    let join = |v: &[usize]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",");
    let mut meta = vec![
        ("experiment".to_string(), cfg.kind.name().to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("graph_id".to_string(), setup.built.id.clone()),
        ("vertices".to_string(), g.n().to_string()),
        ("edges".to_string(), g.edge_count().to_string()),
        ("components".to_string(), g.component_count().to_string()),
        ("bandwidths".to_string(), join(&setup.bandwidths)),
        ("skipped_bandwidths".to_string(), join(&setup.skipped)),
        ("engine".to_string(), cfg.engine.to_string()),
        ("seed_scheme".to_string(), SEED_SCHEME.to_string()),
        ("float_format".to_string(), "17 significant digits".to_string()),
    ];
    for (k, v) in cfg.settings.pairs() {
        meta.push((format!("config.{k}"), v.to_string()));
    }
    meta
}

/// Relative SSNS error over bandwidths and bit depths.
pub fn run_bandwidth_sweep(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let setup = setup(cfg)?;
    let trials = run_trials(cfg, &setup)?;
    let id = setup.built.id.clone();
    let engine = cfg.engine.to_string();

    let mut rows = Table::new(
        "sweep",
        &[
            "graph", "r", "bits", "trial", "trial_seed", "engine", "rel_error", "qe",
            "signal_norm", "bound_explicit", "bound_thm31", "mu", "unsaturated",
            "within_explicit_bound",
        ],
    );
    let mut summary = Table::new(
        "sweep_summary",
        &[
            "graph", "r", "bits", "trials", "mean_rel_error", "std_rel_error", "max_rel_error",
            "mean_bound_explicit_rel", "bound_thm31", "mu", "violations",
        ],
    );
    let mut timing = Table::new("sweep_timing", &["graph", "r", "trial", "engine", "preprocess_ms"]);

    for (b, band) in setup.bases.iter().enumerate() {
        let group: Vec<&Trial> = trials.iter().filter(|t| t.band == b).collect();
        for t in &group {
            timing.push(vec![
                id.as_str().into(),
                band.r.into(),
                t.trial.into(),
                engine.as_str().into(),
                t.preprocess_ms.into(),
            ]);
        }
        for &bits in &cfg.bits {
            let alphabet = Alphabet::with_bits(bits)?;
            let bound = explicit_error_bound(band.r, &alphabet);
            let thm31 = bound_curves(band.basis.n(), band.r, bits, band.mu)?.thm31;
            let (mut rels, mut bound_rels, mut violations) = (Vec::new(), Vec::new(), 0u64);
            for t in &group {
                let out = quantize_reshaped(&band.basis, t.pre.clone(), &alphabet);
                let qe = qe_filtered(&band.basis, t.f.values(), &out.q)?;
                let norm = t.f.l2();
                let within = qe <= bound + BOUND_SLACK;
                if !within {
                    violations += 1;
                    log::warn!("explicit bound violated: {id} r={} B={bits} trial={}", band.r, t.trial);
                }
                rels.push(qe / norm);
                bound_rels.push(bound / norm);
                rows.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    t.trial.into(),
                    t.seed.into(),
                    engine.as_str().into(),
                    (qe / norm).into(),
                    qe.into(),
                    norm.into(),
                    bound.into(),
                    thm31.into(),
                    band.mu.into(),
                    t.pre.unsaturated().len().into(),
                    (within as u64).into(),
                ]);
            }
            let (mean, std) = mean_std(&rels);
            summary.push(vec![
                id.as_str().into(),
                band.r.into(),
                bits.into(),
                group.len().into(),
                mean.into(),
                std.into(),
                rels.iter().copied().fold(0.0, f64::max).into(),
                mean_std(&bound_rels).0.into(),
                thm31.into(),
                band.mu.into(),
                violations.into(),
            ]);
        }
    }

    Ok(ExperimentOutput {
        name: "sweep".into(),
        metadata: metadata(cfg, &setup),
        tables: vec![rows, summary],
        timing,
        point_cloud: None,
    })
}

/// Mean SSNS error per bit depth with a `2^{-B}` reference curve.
pub fn run_bitdepth_scaling(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let setup = setup(cfg)?;
    let trials = run_trials(cfg, &setup)?;
    let id = setup.built.id.clone();

    let mut rows = Table::new(
        "bitdepth",
        &["graph", "r", "bits", "trial", "trial_seed", "rel_error", "qe", "bound_explicit"],
    );
    let mut summary = Table::new(
        "bitdepth_summary",
        &[
            "graph", "r", "bits", "trials", "mean_rel_error", "std_rel_error",
            "ratio_to_previous", "reference_two_pow", "bound_explicit", "bound_ratio_to_previous",
        ],
    );
    let mut timing = Table::new("bitdepth_timing", &["graph", "r", "trial", "engine", "preprocess_ms"]);
    let engine = cfg.engine.to_string();

    for (b, band) in setup.bases.iter().enumerate() {
        let group: Vec<&Trial> = trials.iter().filter(|t| t.band == b).collect();
        for t in &group {
            timing.push(vec![
                id.as_str().into(),
                band.r.into(),
                t.trial.into(),
                engine.as_str().into(),
                t.preprocess_ms.into(),
            ]);
        }
        let mut previous: Option<(f64, f64)> = None;
        let mut first: Option<(u32, f64)> = None;
        for &bits in &cfg.bits {
            let alphabet = Alphabet::with_bits(bits)?;
            let bound = explicit_error_bound(band.r, &alphabet);
            let mut rels = Vec::new();
            for t in &group {
                let out = quantize_reshaped(&band.basis, t.pre.clone(), &alphabet);
                let qe = qe_filtered(&band.basis, t.f.values(), &out.q)?;
                rels.push(qe / t.f.l2());
                rows.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    t.trial.into(),
                    t.seed.into(),
                    (qe / t.f.l2()).into(),
                    qe.into(),
                    bound.into(),
                ]);
            }
            let (mean, std) = mean_std(&rels);
            let (b0, m0) = *first.get_or_insert((bits, mean));
            let reference = m0 * 2f64.powi(-((bits - b0) as i32));
            summary.push(vec![
                id.as_str().into(),
                band.r.into(),
                bits.into(),
                group.len().into(),
                mean.into(),
                std.into(),
                previous.map(|(m, _)| mean / m).into(),
                reference.into(),
                bound.into(),
                previous.map(|(_, pb)| pb / bound).into(),
            ]);
            previous = Some((mean, bound));
        }
    }

    Ok(ExperimentOutput {
        name: "bitdepth".into(),
        metadata: metadata(cfg, &setup),
        tables: vec![rows, summary],
        timing,
        point_cloud: None,
    })
}

/// SSNS against the sampled noise-shaping sketch and the bound curves.
pub fn run_comparison(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let setup = setup(cfg)?;
    let n = setup.built.graph.n();
    let bit_list = if cfg.bits.is_empty() {
        vec![bit_budget(n)]
    } else {
        cfg.bits.clone()
    };
    let samples = cfg.samples.unwrap_or_else(|| default_samples(n));
    let trials = run_trials(cfg, &setup)?;
    let id = setup.built.id.clone();

    // SSS-R runs are independent of preprocessing; parallelize them too.
    let jobs: Vec<(usize, u32)> = (0..trials.len())
        .flat_map(|i| bit_list.iter().filter(|&&b| b >= 2).map(move |&b| (i, b)))
        .collect();
    let sssr: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(i, bits)| {
            let t = &trials[i];
            let band = &setup.bases[t.band];
            let seed = sssr_seed(cfg.seed, &id, band.r, bits, t.trial);
            let start = Instant::now();
            let out = sssr_quantize(t.f.values(), &band.basis, bits, samples, seed)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((relative_error(&band.basis, t.f.values(), &out.values)?, ms))
        })
        .collect::<CliResult<_>>()?;
    let sssr_of = |i: usize, bits: u32| {
        jobs.iter()
            .position(|&j| j == (i, bits))
            .map(|p| sssr[p])
    };

    let mut rows = Table::new(
        "compare",
        &["graph", "r", "bits", "trial", "trial_seed", "method", "rel_error"],
    );
    let mut summary = Table::new(
        "compare_summary",
        &[
            "graph", "r", "bits", "trials", "mu", "ssns_mean_rel_error",
            "sssr_sketch_mean_rel_error", "bound_eq5", "bound_eq6", "eq6_over_ssns", "samples",
        ],
    );
    let mut timing = Table::new(
        "compare_timing",
        &["graph", "r", "bits", "trial", "method", "runtime_ms"],
    );

    for (b, band) in setup.bases.iter().enumerate() {
        for &bits in &bit_list {
            let alphabet = Alphabet::with_bits(bits)?;
            let curves = bound_curves(n, band.r, bits, band.mu)?;
            let (mut ssns_rel, mut sssr_rel) = (Vec::new(), Vec::new());
            for (i, t) in trials.iter().enumerate().filter(|(_, t)| t.band == b) {
                let start = Instant::now();
                let out = quantize_reshaped(&band.basis, t.pre.clone(), &alphabet);
                let ms = t.preprocess_ms + start.elapsed().as_secs_f64() * 1e3;
                let rel = relative_error(&band.basis, t.f.values(), &out.q)?;
                ssns_rel.push(rel);
                rows.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    t.trial.into(),
                    t.seed.into(),
                    "SSNS".into(),
                    rel.into(),
                ]);
                timing.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    t.trial.into(),
                    "SSNS".into(),
                    ms.into(),
                ]);
                if let Some((rel, ms)) = sssr_of(i, bits) {
                    sssr_rel.push(rel);
                    rows.push(vec![
                        id.as_str().into(),
                        band.r.into(),
                        bits.into(),
                        t.trial.into(),
                        sssr_seed(cfg.seed, &id, band.r, bits, t.trial).into(),
                        SSSR_LABEL.into(),
                        rel.into(),
                    ]);
                    timing.push(vec![
                        id.as_str().into(),
                        band.r.into(),
                        bits.into(),
                        t.trial.into(),
                        SSSR_LABEL.into(),
                        ms.into(),
                    ]);
                }
            }
            let ssns_mean = mean_std(&ssns_rel).0;
            let sssr_mean = (!sssr_rel.is_empty()).then(|| mean_std(&sssr_rel).0);
            summary.push(vec![
                id.as_str().into(),
                band.r.into(),
                bits.into(),
                ssns_rel.len().into(),
                band.mu.into(),
                ssns_mean.into(),
                sssr_mean.into(),
                curves.eq5.into(),
                curves.eq6.into(),
                (curves.eq6 / ssns_mean).into(),
                if sssr_mean.is_some() { Cell::from(samples) } else { Cell::Empty },
            ]);
        }
    }
    if bit_list.contains(&1) {
        log::warn!("{SSSR_LABEL} rows omitted for B = 1");
    }

    let mut meta = metadata(cfg, &setup);
    meta.push(("sssr_label".into(), SSSR_LABEL.into()));
    meta.push((
        "sssr_rule".into(),
        "u <- u + f_i - q, q = msq(f_i + u), per-vertex visit averages".into(),
    ));
    meta.push(("sssr_samples".into(), samples.to_string()));
    meta.push((
        "bits_used".into(),
        bit_list.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
    ));
    Ok(ExperimentOutput {
        name: "compare".into(),
        metadata: meta,
        tables: vec![rows, summary],
        timing,
        point_cloud: None,
    })
}

/// Halftones the height field of a point cloud with MSQ, SDW and SSNS.
pub fn run_halftone(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let setup = setup(cfg)?;
    let id = setup.built.id.clone();
    let cloud = setup.built.cloud.clone().ok_or_else(|| {
        CliError::Config("halftoning needs a point cloud (swissroll or points:PATH)".into())
    })?;
    let f = mesh_z_signal(&cloud)?;
    let n = f.len();

    let mut summary = Table::new(
        "halftone",
        &["graph", "r", "bits", "method", "proxy_error", "relative_error", "vertices"],
    );
    let mut timing = Table::new("halftone_timing", &["graph", "r", "bits", "method", "runtime_ms"]);
    let mut tables = Vec::new();

    for band in &setup.bases {
        for &bits in &cfg.bits {
            let alphabet = Alphabet::with_bits(bits)?;
            let mut results: Vec<(&str, DVector<f64>, f64)> = Vec::new();

            let start = Instant::now();
            let q = alphabet.quantize_vector(f.values());
            results.push(("MSQ", q, start.elapsed().as_secs_f64() * 1e3));

            let start = Instant::now();
            let q = sdw_halftone(f.values(), bits)?;
            results.push(("SDW", q, start.elapsed().as_secs_f64() * 1e3));

            let start = Instant::now();
            let pre = preprocess_normalized(&band.analysis, &f, cfg.engine)?;
            let q = quantize_reshaped(&band.basis, pre, &alphabet).q;
            results.push(("SSNS", q, start.elapsed().as_secs_f64() * 1e3));

            for (method, q, ms) in &results {
                let proxy = qe_filtered(&band.basis, f.values(), q)?;
                summary.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    (*method).into(),
                    proxy.into(),
                    (proxy / f.l2()).into(),
                    n.into(),
                ]);
                timing.push(vec![
                    id.as_str().into(),
                    band.r.into(),
                    bits.into(),
                    (*method).into(),
                    (*ms).into(),
                ]);
            }

            let mut values = Table::new(
                format!("halftone_r{}_b{bits}", band.r),
                &["vertex", "x", "y", "z", "f", "msq", "sdw", "ssns"],
            );
            for (i, p) in cloud.points().iter().enumerate() {
                values.push(vec![
                    i.into(),
                    p[0].into(),
                    p[1].into(),
                    p[2].into(),
                    f.values()[i].into(),
                    results[0].1[i].into(),
                    results[1].1[i].into(),
                    results[2].1[i].into(),
                ]);
            }
            tables.push(values);
        }
    }
    tables.insert(0, summary);

    let generated: Option<PointCloud> = matches!(
        cfg.graph,
        crate::config::GraphSpec::SwissRoll { .. }
    )
    .then_some(cloud);
    Ok(ExperimentOutput {
        name: "halftone".into(),
        metadata: metadata(cfg, &setup),
        tables,
        timing,
        point_cloud: generated.map(|c| (format!("{id}.ply"), c)),
    })
}
