//! Small dense linear-algebra kernels that nalgebra does not expose directly.
//!
//! The restricted-kernel computations need a *full* orthonormal basis of the
//! null space of a short, wide matrix `A` (r × m, m > r). nalgebra's QR and SVD
//! only return thin factors, so the null space is obtained here from a
//! column-pivoted Householder QR of `Aᵀ`: the trailing `m - rank` columns of
//! the full `Q` span `ker(A)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative threshold on the pivoted `|R_kk| / |R_00|` below which the
/// remaining columns are treated as numerically dependent.
pub const RANK_TOL: f64 = 1e-12;

struct Reflector {
    v: Vec<f64>,
    beta: f64,
}

/// Orthonormal basis of `ker(X[:, cols])`, expressed as coefficient vectors
/// over `cols` (each of length `cols.len()`).
///
/// `X` is r × N; the submatrix is r × m with m = `cols.len()`.
pub fn null_space_of_columns(x: &DMatrix<f64>, cols: &[usize]) -> Vec<Vec<f64>> {
    let r = x.nrows();
    let m = cols.len();
    // Columns of Aᵀ are the rows of the submatrix.
    let mut w: Vec<Vec<f64>> = (0..r)
        .map(|k| cols.iter().map(|&c| x[(k, c)]).collect())
        .collect();
    let reflectors = pivoted_householder(&mut w, m);
    let rank = reflectors.len();

    (rank..m)
        .map(|j| {
            let mut y = vec![0.0; m];
            y[j] = 1.0;
            for (k, h) in reflectors.iter().enumerate().rev() {
                apply_reflector(h, &mut y[k..]);
            }
            y
        })
        .collect()
}

/// Orthonormal null-space basis of a dense matrix, one basis vector per column.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..a.ncols()).collect();
    let basis = null_space_of_columns(a, &cols);
    let mut out = DMatrix::zeros(a.ncols(), basis.len());
    for (j, v) in basis.iter().enumerate() {
        for (i, &value) in v.iter().enumerate() {
            out[(i, j)] = value;
        }
    }
    out
}

// Householder QR with column pivoting, in place on the columns `w` (each of
// length `m`). Returns the reflectors; their count is the numerical rank.
fn pivoted_householder(w: &mut [Vec<f64>], m: usize) -> Vec<Reflector> {
    let ncols = w.len();
    let mut reflectors = Vec::with_capacity(ncols.min(m));
    let mut lead = 0.0_f64;

    for k in 0..ncols.min(m) {
        let (p, norm_sq) = (k..ncols)
            .map(|j| (j, w[j][k..].iter().map(|v| v * v).sum::<f64>()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        w.swap(k, p);
        let norm = norm_sq.sqrt();
        if k == 0 {
            lead = norm;
        }
        if norm == 0.0 || norm <= RANK_TOL * lead {
            break;
        }

        let x0 = w[k][k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v = w[k][k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        let h = Reflector {
            beta: 2.0 / vtv,
            v,
        };

        w[k][k] = alpha;
        for e in &mut w[k][k + 1..] {
            *e = 0.0;
        }
        for col in w.iter_mut().skip(k + 1) {
            apply_reflector(&h, &mut col[k..]);
        }
        reflectors.push(h);
    }
    reflectors
}

#[inline]
fn apply_reflector(h: &Reflector, y: &mut [f64]) {
    let dot: f64 = h.v.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let s = h.beta * dot;
    if s != 0.0 {
        for (yi, vi) in y.iter_mut().zip(&h.v) {
            *yi -= s * vi;
        }
    }
}

/// A basis of `ker(X[:, cols])` in reduced form, from Gaussian elimination
/// with column pivoting: each vector has a unit entry on its own free column
/// and zeros on the other free columns. Cheaper than
/// [`null_space_of_columns`] but not orthonormal.
///
/// Columns are pivoted on the largest entry of the current row; a row that
/// vanishes on the remaining columns falls back to a full search.
pub fn kernel_basis_of_columns(x: &DMatrix<f64>, cols: &[usize]) -> Vec<Vec<f64>> {
    let r = x.nrows();
    let m = cols.len();
    let mut a: Vec<Vec<f64>> = cols.iter().map(|&c| x.column(c).iter().copied().collect()).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let lead = a.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if lead == 0.0 {
        return unit_vectors(m);
    }
    let floor = RANK_TOL * lead;

    let mut rank = 0;
    while rank < r.min(m) {
        let k = rank;
        let (mut pc, mut best) = (k, 0.0);
        for (j, col) in a.iter().enumerate().skip(k) {
            if col[k].abs() > best {
                best = col[k].abs();
                pc = j;
            }
        }
        if best <= floor {
            let mut found = None;
            let mut peak = floor;
            for (j, col) in a.iter().enumerate().skip(k) {
                for (i, v) in col.iter().enumerate().skip(k) {
                    if v.abs() > peak {
                        peak = v.abs();
                        found = Some((i, j));
                    }
                }
            }
            let Some((pr, j)) = found else { break };
            for col in a.iter_mut() {
                col.swap(k, pr);
            }
            pc = j;
        }
        a.swap(k, pc);
        perm.swap(k, pc);

        let pivot = a[k][k];
        let multipliers: Vec<f64> = a[k][k + 1..].iter().map(|v| v / pivot).collect();
        for col in a.iter_mut().skip(k + 1) {
            let s = col[k];
            if s != 0.0 {
                for (v, l) in col[k + 1..].iter_mut().zip(&multipliers) {
                    *v -= l * s;
                }
            }
        }
        rank += 1;
    }

    (rank..m)
        .map(|f| {
            // Solve U₁ y = −u_f by back substitution.
            let mut y: Vec<f64> = a[f][..rank].iter().map(|v| -v).collect();
            for i in (0..rank).rev() {
                y[i] /= a[i][i];
                let yi = y[i];
                for (t, u) in y[..i].iter_mut().zip(&a[i][..i]) {
                    *t -= u * yi;
                }
            }
            let mut b = vec![0.0; m];
            for (i, &yi) in y.iter().enumerate() {
                b[perm[i]] = yi;
            }
            b[perm[f]] = 1.0;
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            b.iter_mut().for_each(|v| *v /= norm);
            b
        })
        .collect()
}

fn unit_vectors(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect()
}

/// Random n × r matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}
