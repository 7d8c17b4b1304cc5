//! Maximum-likelihood detection of ST codewords.
//!
//! Detection works on the real-valued model y = G x + w produced by
//! [`crate::stc::effective_real_channel`]: x stacks the real and imaginary
//! parts of the Q transmitted symbols, and each of its 2Q entries ranges
//! over the per-axis PAM alphabet of the (square) constellation.
//!
//! Two detectors are provided. [`ml_exhaustive`] enumerates all M^Q symbol
//! vectors and is the reference oracle; [`sphere_decode`] is an exact ML
//! lattice search (QR + depth-first Schnorr-Euchner enumeration with radius
//! shrinking, infinite initial radius) whose decisions match the exhaustive
//! search on every feasible instance. [`mrc_combine`] covers the SIMO
//! benchmark.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::modulation::Constellation;

/// Cap on the exhaustive search space M^Q.
pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("search space {size} exceeds cap {cap}")]
    SearchSpaceExceeded { size: u128, cap: u128 },
    #[error("zero channel vector")]
    ZeroChannel,
    #[error("dimension error: {0}")]
    Dimension(String),
}

pub type DetectResult<T> = std::result::Result<T, DetectError>;

/// One ML detection instance over the real-valued effective channel.
#[derive(Debug, Clone, Copy)]
pub struct DetectionProblem<'a> {
    /// Column-major real channel, `rows x 2q`.
    pub g: &'a [f64],
    pub rows: usize,
    /// Received real vector, length `rows`.
    pub y: &'a [f64],
    pub constellation: &'a Constellation,
    /// Complex symbols per codeword.
    pub q: usize,
}

impl<'a> DetectionProblem<'a> {
    pub fn new(
        g: &'a [f64],
        rows: usize,
        y: &'a [f64],
        constellation: &'a Constellation,
        q: usize,
    ) -> DetectResult<Self> {
        let cols = 2 * q;
        if g.len() != rows * cols {
            return Err(DetectError::Dimension(format!(
                "G has {} entries, expected {}x{}",
                g.len(),
                rows,
                cols
            )));
        }
        if y.len() != rows {
            return Err(DetectError::Dimension(format!(
                "y has {} entries, expected {}",
                y.len(),
                rows
            )));
        }
        if rows < cols {
            return Err(DetectError::Dimension(format!(
                "underdetermined problem: {rows} rows for {cols} unknowns"
            )));
        }
        Ok(DetectionProblem {
            g,
            rows,
            y,
            constellation,
            q,
        })
    }

    fn search_space(&self) -> u128 {
        (self.constellation.size() as u128).pow(self.q as u32)
    }
}

/// Diagnostics from one sphere decoding run.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereStats {
    /// Candidate extensions whose metric increment was evaluated.
    pub visited: u64,
    /// True when rank deficiency forced the exhaustive fallback.
    pub fell_back: bool,
}

/// Exhaustive ML: argmin over all M^Q symbol vectors of ||y - G x||^2,
/// ties broken toward the lexicographically smallest label vector.
pub fn ml_exhaustive(p: &DetectionProblem, cap: u64) -> DetectResult<Vec<Complex64>> {
    let space = p.search_space();
    if space > cap as u128 {
        return Err(DetectError::SearchSpaceExceeded {
            size: space,
            cap: cap as u128,
        });
    }
    let labels = exhaustive_labels(p);
    Ok(labels.iter().map(|&l| p.constellation.point(l)).collect())
}

fn exhaustive_labels(p: &DetectionProblem) -> Vec<usize> {
    let m = p.rows;
    let q = p.q;
    let points = p.constellation.points();
    let n_points = points.len();

    // contrib[sym * n_points + label] = the m-vector that symbol `sym`
    // carrying `label` contributes to G x.
    let mut contrib = vec![0.0f64; q * n_points * m];
    for sym in 0..q {
        let col_re = &p.g[sym * m..(sym + 1) * m];
        let col_im = &p.g[(q + sym) * m..(q + sym + 1) * m];
        for (label, pt) in points.iter().enumerate() {
            let dst = &mut contrib[(sym * n_points + label) * m..(sym * n_points + label + 1) * m];
            for i in 0..m {
                dst[i] = pt.re * col_re[i] + pt.im * col_im[i];
            }
        }
    }

    struct State<'s> {
        q: usize,
        m: usize,
        n_points: usize,
        contrib: &'s [f64],
        current: Vec<usize>,
        best: Vec<usize>,
        best_dist: f64,
    }

    // Depth-first enumeration over symbol labels in ascending order: the
    // first leaf among ties is the lexicographically smallest vector.
    fn descend(st: &mut State, depth: usize, parent: &[f64], stack: &mut [f64]) {
        let m = st.m;
        let (child, rest) = stack.split_at_mut(m);
        for label in 0..st.n_points {
            let base = (depth * st.n_points + label) * m;
            let c = &st.contrib[base..base + m];
            for i in 0..m {
                child[i] = parent[i] - c[i];
            }
            st.current[depth] = label;
            if depth + 1 == st.q {
                let dist: f64 = child.iter().map(|v| v * v).sum();
                if dist < st.best_dist {
                    st.best_dist = dist;
                    st.best.copy_from_slice(&st.current);
                }
            } else {
                descend(st, depth + 1, child, rest);
            }
        }
    }

    let mut stack = vec![0.0f64; q * m];
    let mut st = State {
        q,
        m,
        n_points,
        contrib: &contrib,
        current: vec![0; q],
        best: vec![0; q],
        best_dist: f64::INFINITY,
    };
    descend(&mut st, 0, p.y, &mut stack);
    st.best
}

/// Exact ML sphere decoder.
///
/// QR-based depth-first search with Schnorr-Euchner enumeration and radius
/// shrinking from an infinite initial radius, so the first leaf reached is
/// the Babai point and the final answer is the exact ML solution. Columns
/// are ordered by decreasing R diagonal magnitude (QR with column pivoting);
/// the output is unpermuted.
///
/// If G is rank deficient beyond the regularization tolerance the decoder
/// falls back to [`ml_exhaustive`] when the search space fits under `cap`
/// (flagged in [`SphereStats::fell_back`]); otherwise the deficient
/// diagonal entries are regularized for enumeration ordering only and the
/// metric still uses the original R.
pub fn sphere_decode(
    p: &DetectionProblem,
    cap: u64,
) -> DetectResult<(Vec<Complex64>, SphereStats)> {
    let m = p.rows;
    let n = 2 * p.q;

    // Householder QR with greedy max-remaining-norm column pivoting, so the
    // R diagonal magnitudes are nonincreasing; the reflectors are applied to
    // y on the fly instead of forming Q.
    let (r, qt_y, perm) = pivoted_qr(p.g, m, n, p.y);
    let qty = DMatrix::<f64>::from_column_slice(n, 1, &qt_y[..n]);

    let mut max_diag: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for i in 0..n {
        let d = r[(i, i)].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    let tol = 1e-9 * max_diag.max(1.0);
    let deficient = min_diag <= tol;
    if deficient && p.search_space() <= cap as u128 {
        let symbols = ml_exhaustive(p, cap)?;
        return Ok((
            symbols,
            SphereStats {
                visited: 0,
                fell_back: true,
            },
        ));
    }

    let levels = p.constellation.axis_levels();
    let n_levels = levels.len();

    // Regularized diagonal used only to place the enumeration center.
    let r_center: Vec<f64> = (0..n)
        .map(|i| {
            let d = r[(i, i)];
            if d.abs() <= tol {
                if d >= 0.0 {
                    tol.max(1e-12)
                } else {
                    -tol.max(1e-12)
                }
            } else {
                d
            }
        })
        .collect();

    let mut stats = SphereStats::default();
    let mut search = SphereSearch {
        r: &r,
        r_center: &r_center,
        qty: &qty,
        levels,
        n_levels,
        // Schnorr-Euchner ordering makes metric increments nondecreasing, so
        // the first rejected candidate ends the level. That only holds when
        // the ordering diagonal equals the metric diagonal, i.e. no
        // regularization was applied.
        ordered_prune: !deficient,
        chosen_idx: vec![0usize; n],
        chosen_val: vec![0.0f64; n],
        best_idx: vec![0usize; n],
        best_dist: f64::INFINITY,
        stats: &mut stats,
    };
    search.descend(n - 1, 0.0);
    let best_idx = search.best_idx;

    // Undo the column permutation, then pair (Re, Im) dims into symbols.
    let mut axis_idx = vec![0usize; n];
    for (pos, &orig) in perm.iter().enumerate() {
        axis_idx[orig] = best_idx[pos];
    }
    let symbols: Vec<Complex64> = (0..p.q)
        .map(|s| {
            let label = p
                .constellation
                .label_from_axes(axis_idx[s], axis_idx[s + p.q]);
            p.constellation.point(label)
        })
        .collect();
    Ok((symbols, stats))
}

struct SphereSearch<'a> {
    r: &'a DMatrix<f64>,
    r_center: &'a [f64],
    qty: &'a DMatrix<f64>,
    levels: &'a [f64],
    n_levels: usize,
    ordered_prune: bool,
    chosen_idx: Vec<usize>,
    chosen_val: Vec<f64>,
    best_idx: Vec<usize>,
    best_dist: f64,
    stats: &'a mut SphereStats,
}

impl SphereSearch<'_> {
    fn descend(&mut self, k: usize, partial: f64) {
        let n = self.chosen_idx.len();
        let mut b = self.qty[(k, 0)];
        for i in k + 1..n {
            b -= self.r[(k, i)] * self.chosen_val[i];
        }
        let center = b / self.r_center[k];

        // Candidate axis values sorted by distance to the unconstrained
        // center (zig-zag order), index as tie-break. At most 4 levels.
        let mut order = [(0.0f64, 0usize); 4];
        for (idx, &v) in self.levels.iter().enumerate() {
            order[idx] = ((v - center).abs(), idx);
        }
        let order = &mut order[..self.n_levels];
        order.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });

        for rank in 0..self.n_levels {
            let idx = order[rank].1;
            let v = self.levels[idx];
            let e = b - self.r[(k, k)] * v;
            let next = partial + e * e;
            self.stats.visited += 1;
            if next >= self.best_dist {
                if self.ordered_prune {
                    break;
                }
                continue;
            }
            self.chosen_idx[k] = idx;
            self.chosen_val[k] = v;
            if k == 0 {
                self.best_dist = next;
                self.best_idx.copy_from_slice(&self.chosen_idx);
            } else {
                self.descend(k - 1, next);
            }
        }
    }
}

/// Householder QR with column pivoting on the largest remaining column norm.
///
/// Returns (R upper-triangular n x n, Q^T y of length m, perm) where
/// position j of the pivoted matrix holds original column `perm[j]`, so
/// ||y - G x||^2 = ||(Q^T y)[..n] - R x_perm||^2 + ||(Q^T y)[n..]||^2.
fn pivoted_qr(g: &[f64], m: usize, n: usize, y: &[f64]) -> (DMatrix<f64>, Vec<f64>, Vec<usize>) {
    let mut a = g.to_vec(); // column-major working copy
    let mut yw = y.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Pivot: remaining subcolumn with the largest norm.
        let mut best_j = k;
        let mut best_norm = -1.0f64;
        for j in k..n {
            let nrm: f64 = a[j * m + k..(j + 1) * m].iter().map(|v| v * v).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best_j = j;
            }
        }
        if best_j != k {
            for i in 0..m {
                a.swap(k * m + i, best_j * m + i);
            }
            perm.swap(k, best_j);
        }

        // Householder reflector for the pivot subcolumn.
        let norm = best_norm.max(0.0).sqrt();
        if norm == 0.0 {
            continue; // remaining block is zero; R diagonal stays 0
        }
        let akk = a[k * m + k];
        let alpha = if akk >= 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of the subcolumn tail.
        let v0 = akk - alpha;
        let vnorm_sq = v0 * v0
            + a[k * m + k + 1..(k + 1) * m]
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
        a[k * m + k] = alpha;
        if vnorm_sq <= 0.0 {
            continue;
        }
        let inv = 2.0 / vnorm_sq;
        // Apply H = I - 2 v v^T / (v^T v) to remaining columns and to y.
        for j in k + 1..n {
            let mut dot = v0 * a[j * m + k];
            for i in k + 1..m {
                dot += a[k * m + i] * a[j * m + i];
            }
            let s = dot * inv;
            a[j * m + k] -= s * v0;
            for i in k + 1..m {
                a[j * m + i] -= s * a[k * m + i];
            }
        }
        let mut dot = v0 * yw[k];
        for i in k + 1..m {
            dot += a[k * m + i] * yw[i];
        }
        let s = dot * inv;
        yw[k] -= s * v0;
        for i in k + 1..m {
            yw[i] -= s * a[k * m + i];
        }
        // Zero the subdiagonal we just eliminated (v tail was stored there).
        for i in k + 1..m {
            a[k * m + i] = 0.0;
        }
    }

    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = a[j * m + i];
        }
    }
    (r, yw, perm)
}

/// Maximum-ratio combining for the 1 x N_R benchmark: (h^H y) / ||h||^2.
pub fn mrc_combine(h: &[Complex64], y: &[Complex64]) -> DetectResult<Complex64> {
    if h.len() != y.len() {
        return Err(DetectError::Dimension(format!(
            "{} channel entries vs {} observations",
            h.len(),
            y.len()
        )));
    }
    let norm: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(DetectError::ZeroChannel);
    }
    let num: Complex64 = h.iter().zip(y).map(|(hv, yv)| hv.conj() * yv).sum();
    Ok(num / norm)
}

/// Slices symbols to their Gray bit labels (nearest point, ties toward the
/// smaller label).
pub fn hard_demap(symbols: &[Complex64], constellation: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    for &s in symbols {
        let label = constellation.nearest_label(s);
        constellation.label_bits(label, &mut bits);
    }
    bits
}
