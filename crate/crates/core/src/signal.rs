//! Graph signals: seeded bandlimited test data and mesh height fields.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::PointCloud;
use crate::rng;
use crate::spectral::SpectralBasis;

/// A real-valued function on the vertices of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: DVector<f64>,
    bandwidth_hint: Option<usize>,
}

impl GraphSignal {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("signal entry {i} is not finite")));
        }
        Ok(GraphSignal {
            values,
            bandwidth_hint: None,
        })
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values))
    }

    pub fn with_bandwidth_hint(mut self, r: usize) -> Self {
        self.bandwidth_hint = Some(r);
        self
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn bandwidth_hint(&self) -> Option<usize> {
        self.bandwidth_hint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn linf(&self) -> f64 {
        self.values.amax()
    }

    pub fn l2(&self) -> f64 {
        self.values.norm()
    }

    /// Maps a `[-1, 1]` signal back to `[0, 1]` for display.
    pub fn to_unit_interval(&self) -> DVector<f64> {
        self.values.map(|v| 0.5 * (v + 1.0))
    }
}

/// `f = X_r α` with standard Gaussian `α` drawn from the seeded stream, scaled
/// so that `‖f‖_∞ = 1`. A zero draw is retried with `seed + 1`.
pub fn random_bandlimited(basis: &SpectralBasis, seed: u64) -> Result<GraphSignal> {
    let r = basis.r();
    let mut seed = seed;
    loop {
        let mut stream = rng::stream(seed);
        let alpha = DVector::from_fn(r, |_, _| stream.sample::<f64, _>(StandardNormal));
        let f = basis.vectors() * alpha;
        let peak = f.amax();
        if peak > 0.0 {
            return Ok(GraphSignal::new(f / peak)?.with_bandwidth_hint(r));
        }
        log::warn!("degenerate bandlimited draw for seed {seed}; retrying");
        seed = seed.wrapping_add(1);
    }
}

/// Height field of a point cloud, affinely mapped so the lowest point is −1
/// and the highest is +1.
pub fn mesh_z_signal(cloud: &PointCloud) -> Result<GraphSignal> {
    if cloud.is_empty() {
        return Err(Error::InvalidParameter("empty point cloud".into()));
    }
    let z: Vec<f64> = cloud.points().iter().map(|p| p[2]).collect();
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::InvalidParameter("z coordinate is constant".into()));
    }
    let values = z
        .iter()
        .map(|&v| {
            if v == lo {
                -1.0
            } else if v == hi {
                1.0
            } else {
                (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect();
    GraphSignal::from_vec(values)
}
