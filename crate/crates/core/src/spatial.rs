//! Exact nearest-neighbour queries over a static point set, backed by a
//! uniform cell hash over the points' bounding box.
//!
//! Queries return the same answer as a linear scan comparing squared
//! distances, with ties going to the smallest point index.

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<Vec3>,
    lo: Vec3,
    cell: f64,
    dims: [i64; 3],
    /// Start offsets into `order`, one per cell plus a sentinel.
    starts: Vec<usize>,
    /// Point indices sorted by cell, ascending index within a cell.
    order: Vec<usize>,
}

/// Result of a nearest-neighbour query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub dist_sq: f64,
}

impl Nearest {
    pub fn distance(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

#[inline]
fn better(d2: f64, idx: usize, best: &Nearest) -> bool {
    d2 < best.dist_sq || (d2 == best.dist_sq && idx < best.index)
}

impl PointIndex {
    /// Builds the index. Returns `None` for an empty point set.
    pub fn new(points: Vec<Vec3>) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let diag = extent.norm();
        // Aim for a couple of points per occupied cell on surface-like data.
        let target_cells = (points.len() as f64).max(1.0);
        let mut cell = if diag > 0.0 {
            let vol = extent.iter().map(|e| e.max(diag * 1e-3)).product::<f64>();
            (vol / target_cells).cbrt().max(diag / 256.0)
        } else {
            1.0
        };
        if !(cell > 0.0 && cell.is_finite()) {
            cell = 1.0;
        }
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as i64 + 1).max(1));
        let ncells = (dims[0] * dims[1] * dims[2]) as usize;

        let cell_of = |p: &Vec3| -> usize {
            let c = [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell).floor() as i64).clamp(0, dims[a] - 1));
            (c[0] + dims[0] * (c[1] + dims[1] * c[2])) as usize
        };
        let mut counts = vec![0usize; ncells + 1];
        let ids: Vec<usize> = points.iter().map(cell_of).collect();
        for &c in &ids {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut order = vec![0usize; points.len()];
        for (i, &c) in ids.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Some(Self {
            points,
            lo,
            cell,
            dims,
            starts,
            order,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn scan_cell(&self, c: [i64; 3], q: &Vec3, best: &mut Nearest) {
        let id = (c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])) as usize;
        for &i in &self.order[self.starts[id]..self.starts[id + 1]] {
            let d2 = (self.points[i] - q).norm_squared();
            if better(d2, i, best) {
                *best = Nearest { index: i, dist_sq: d2 };
            }
        }
    }

    pub fn nearest(&self, q: &Vec3) -> Nearest {
        let mut best = Nearest {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        // Query cell in unbounded cell coordinates; may lie outside the grid.
        let qc = [0, 1, 2].map(|a| ((q[a] - self.lo[a]) / self.cell).floor() as i64);
        // Chebyshev distance from the query cell to the farthest grid cell.
        let max_ring = (0..3)
            .map(|a| qc[a].abs().max((qc[a] - (self.dims[a] - 1)).abs()))
            .max()
            .unwrap_or(0);
        let min_ring = (0..3)
            .map(|a| {
                if qc[a] < 0 {
                    -qc[a]
                } else if qc[a] >= self.dims[a] {
                    qc[a] - (self.dims[a] - 1)
                } else {
                    0
                }
            })
            .max()
            .unwrap_or(0);
        for r in min_ring..=max_ring {
            // Points in ring r or beyond are at least r - 1 cell widths away.
            if r > 0 && best.index != usize::MAX {
                // Slack covers points rounded into a neighbouring cell.
                let lb = ((r - 1) as f64 * self.cell * (1.0 - 1e-9)).max(0.0);
                if best.dist_sq < lb * lb {
                    break;
                }
            }
            let lo = [0, 1, 2].map(|a| (qc[a] - r).max(0));
            let hi = [0, 1, 2].map(|a| (qc[a] + r).min(self.dims[a] - 1));
            if (0..3).any(|a| lo[a] > hi[a]) {
                continue;
            }
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    let on_shell_yz = (z - qc[2]).abs() == r || (y - qc[1]).abs() == r;
                    if on_shell_yz {
                        for x in lo[0]..=hi[0] {
                            self.scan_cell([x, y, z], q, &mut best);
                        }
                    } else {
                        for x in [qc[0] - r, qc[0] + r] {
                            if x >= lo[0] && x <= hi[0] {
                                self.scan_cell([x, y, z], q, &mut best);
                            }
                        }
                    }
                }
            }
        }
        best
    }
}
