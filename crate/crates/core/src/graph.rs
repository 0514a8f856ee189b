//! Weighted undirected graphs, their builders and loaders, and the
//! symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Weighted undirected graph with a symmetric, nonnegative, zero-diagonal
/// adjacency stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
}

impl Graph {
    /// Builds a graph on `n` vertices from undirected edges.
    ///
    /// Each `(i, j, w)` sets `W_ij = W_ji = w`; a later entry for the same
    /// unordered pair replaces an earlier one. Self-loops are dropped with a
    /// warning and zero weights remove the edge.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut pairs = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            if i == j {
                log::warn!("ignoring self-loop on vertex {i}");
                continue;
            }
            pairs.insert((i.min(j), i.max(j)), w);
        }

        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &w) in &pairs {
            if w > 0.0 {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        let degrees = adjacency
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        Ok(Graph { adjacency, degrees })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.adjacency[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.nnz() / 2
    }

    /// Number of nonzero entries of `W` (each edge counted twice).
    pub fn nnz(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut w = DMatrix::zeros(n, n);
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, wij) in row {
                w[(i, j)] = wij;
            }
        }
        w
    }

    /// Number of connected components (breadth-first search).
    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &(u, _) in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }
}

/// A finite set of points in ℝ³.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Loads either an ASCII PLY file (vertex x/y/z properties; faces are
    /// ignored) or a plain whitespace-separated `x y z` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with("ply") {
            parse_ply(path, &text)
        } else {
            parse_xyz(path, &text)
        }
    }

    /// Writes the cloud as ASCII PLY (vertices only).
    pub fn save_ply(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("ply\nformat ascii 1.0\n");
        out.push_str(&format!("element vertex {}\n", self.len()));
        out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
        for p in &self.points {
            out.push_str(&format!("{:e} {:e} {:e}\n", p[0], p[1], p[2]));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_error(path, idx + 1, format!("bad coordinate: {e}")))?;
        if coords.len() < 3 {
            return Err(parse_error(path, idx + 1, "expected `x y z`"));
        }
        points.push([coords[0], coords[1], coords[2]]);
    }
    PointCloud::new(points)
}

fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();

    for (idx, raw) in lines.by_ref() {
        let mut words = raw.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(Error::Unsupported(format!(
                        "{}: only ASCII PLY is supported",
                        path.display()
                    )));
                }
            }
            Some("element") => {
                let name = words.next().unwrap_or("");
                in_vertex = name == "vertex";
                if in_vertex {
                    let count = words
                        .next()
                        .and_then(|c| c.parse::<usize>().ok())
                        .ok_or_else(|| parse_error(path, idx + 1, "bad vertex count"))?;
                    vertex_count = Some(count);
                }
            }
            Some("property") if in_vertex => {
                if let Some(name) = raw.split_whitespace().last() {
                    props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let count = vertex_count.ok_or_else(|| parse_error(path, 1, "no vertex element"))?;
    let slot = |axis: &str| {
        props
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| parse_error(path, 1, format!("vertex has no `{axis}` property")))
    };
    let (ix, iy, iz) = (slot("x")?, slot("y")?, slot("z")?);

    let mut points = Vec::with_capacity(count);
    for (idx, raw) in lines {
        if points.len() == count {
            break;
        }
        let values: Vec<f64> = raw
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_error(path, idx + 1, format!("bad vertex value: {e}")))?;
        if values.len() < props.len() {
            return Err(parse_error(path, idx + 1, "truncated vertex line"));
        }
        points.push([values[ix], values[iy], values[iz]]);
    }
    if points.len() != count {
        return Err(parse_error(
            path,
            text.lines().count(),
            format!("expected {count} vertices, found {}", points.len()),
        ));
    }
    PointCloud::new(points)
}

/// Cycle graph on `n` vertices with unit weights.
pub fn build_ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("ring needs n >= 3, got {n}")));
    }
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
}

/// `h × w` four-neighbor lattice with unit weights; vertex `(row, col)` has
/// index `row * w + col`.
pub fn build_grid(h: usize, w: usize) -> Result<Graph> {
    if h < 2 || w < 2 {
        return Err(Error::InvalidSize(format!("grid needs h, w >= 2, got {h}x{w}")));
    }
    let mut edges = Vec::with_capacity(2 * h * w);
    for row in 0..h {
        for col in 0..w {
            let v = row * w + col;
            if col + 1 < w {
                edges.push((v, v + 1, 1.0));
            }
            if row + 1 < h {
                edges.push((v, v + w, 1.0));
            }
        }
    }
    Graph::from_edges(h * w, edges)
}

/// Random sensor network: `n` seeded uniform points in the unit square joined
/// by a symmetrized Gaussian-weighted k-NN rule.
pub fn build_sensor(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "sensor graph needs n > k >= 1, got n={n}, k={k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0])
        .collect();
    let graph = build_knn_from_points(&PointCloud::new(points)?, k)?;
    if !graph.is_connected() {
        log::warn!(
            "sensor graph (n={n}, k={k}, seed={seed}) has {} components",
            graph.component_count()
        );
    }
    Ok(graph)
}

/// Symmetrized k-nearest-neighbor graph with weights `exp(-d²/2σ²)`, where σ
/// is the mean distance to the k-th neighbor. Neighbor ties go to the lower
/// index.
pub fn build_knn_from_points(cloud: &PointCloud, k: usize) -> Result<Graph> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k-NN graph needs |cloud| > k >= 1, got |cloud|={n}, k={k}"
        )));
    }
    let pts = cloud.points();
    let dist = |a: usize, b: usize| -> f64 {
        let (p, q) = (pts[a], pts[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };

    let mut neighbor_sets = Vec::with_capacity(n);
    let mut kth_sum = 0.0;
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)));
        candidates.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nearest = candidates[..k].to_vec();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        kth_sum += nearest[k - 1].0;
        neighbor_sets.push(nearest);
    }
    let sigma = kth_sum / n as f64;
    let kernel = |d: f64| {
        if sigma > 0.0 {
            (-d * d / (2.0 * sigma * sigma)).exp()
        } else {
            1.0
        }
    };

    let edges = neighbor_sets
        .iter()
        .enumerate()
        .flat_map(|(i, nearest)| nearest.iter().map(move |&(d, j)| (i, j, d)))
        .map(|(i, j, d)| (i, j, kernel(d)))
        .collect::<Vec<_>>();
    Graph::from_edges(n, edges)
}

/// Seeded swiss-roll sample `(t cos t, y, t sin t)` with `t ~ U[1.5π, 4.5π]`
/// and `y ~ U[0, 20]`.
pub fn swiss_roll(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let t = rng.random_range(1.5 * PI..4.5 * PI);
            let y = rng.random_range(0.0..20.0);
            [t * t.cos(), y, t * t.sin()]
        })
        .collect();
    PointCloud { points }
}

/// Reads a whitespace-separated `i j [w]` edge list (0-based, `#` comments).
/// The vertex count is one more than the largest index seen.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(path, &text)
}

pub(crate) fn parse_edge_list(path: &Path, text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_error(path, idx + 1, "expected `i j [w]`"));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_error(path, idx + 1, format!("bad vertex index `{s}`")))
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w >= 0.0)
                .ok_or_else(|| parse_error(path, idx + 1, format!("bad weight `{s}`")))?,
            None => 1.0,
        };
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j, w));
    }
    Graph::from_edges(n, edges)
}

/// Dense symmetric normalized Laplacian. Fails on isolated vertices.
pub fn normalized_laplacian(g: &Graph) -> Result<DMatrix<f64>> {
    let n = g.n();
    if let Some(i) = g.degrees().iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedVertex(i));
    }
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = DMatrix::identity(n, n);
    for i in 0..n {
        for &(j, w) in g.neighbors(i) {
            l[(i, j)] = -w * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(l)
}
