//! Shape-similarity metrics: IoU over voxel occupancies and the symmetric
//! Chamfer distance between point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{sample_trilinear, GridSpec, ScalarField};
use crate::spatial::PointIndex;
use crate::surface::TriMesh;
use crate::{par, Error, Result, Vec3};

/// Default voxelization resolution for IoU.
pub const DEFAULT_IOU_RES: usize = 128;
/// Default number of surface samples per shape for Chamfer.
pub const DEFAULT_CHAMFER_SAMPLES: usize = 10_000;

/// Boolean occupancy per grid node, same layout as [`ScalarField`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    bits: Vec<bool>,
}

impl Eq for GridSpec {}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != spec.len() {
            return Err(Error::domain(format!("{} occupancy bits for a grid of {}", bits.len(), spec.len())));
        }
        Ok(Self { spec, bits })
    }

    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            bits: vec![false; spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }
}

/// Resamples `phi` onto `res^3` nodes over the same box; a node is occupied
/// when the interpolated value is `>= 0`.
pub fn voxelize_field(phi: &ScalarField, res: usize) -> Result<OccupancyGrid> {
    if res < 2 {
        return Err(Error::domain(format!("voxel resolution must be >= 2, got {res}")));
    }
    let src = phi.spec();
    let [nx, ny, nz] = src.dims();
    if nx != ny || ny != nz {
        return Err(Error::domain("voxelize_field needs a cubic grid"));
    }
    let extent = src.spacing() * (nx - 1) as f64;
    let spec = GridSpec::new([res; 3], src.origin(), extent / (res - 1) as f64)?;
    let hi = src.max_corner();
    let same = spec == *src;
    let bits = par::map_indexed(spec.len(), |idx| {
        if same {
            return phi.values()[idx] >= 0.0;
        }
        // Clamp against rounding at the far faces.
        let p = spec.position(idx).zip_map(&hi, f64::min);
        sample_trilinear(phi, &p).map(|v| v >= 0.0).unwrap_or(false)
    });
    OccupancyGrid::new(spec, bits)
}

/// Occupancy of the cube grid `res^3` over `[-1, 1]^3` by ray parity: each
/// node casts a ray along +x and is inside when it crosses the mesh an odd
/// number of times.
pub fn voxelize_mesh(m: &TriMesh, res: usize) -> Result<OccupancyGrid> {
    voxelize_mesh_on(m, GridSpec::unit_box(res)?)
}

pub fn voxelize_mesh_on(m: &TriMesh, spec: GridSpec) -> Result<OccupancyGrid> {
    if m.is_empty() {
        return Ok(OccupancyGrid::empty(spec));
    }
    let open = m.open_edges();
    if !open.is_empty() {
        return Err(Error::domain(format!("mesh is not watertight: {} open edges", open.len())));
    }
    let [nx, ny, nz] = spec.dims();
    let h = spec.spacing();
    let origin = spec.origin();

    // Bucket triangles by the (j, k) rows their yz-projection can touch.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); ny * nz];
    for (t, tri) in m.triangles.iter().enumerate() {
        let pts = tri.map(|i| m.vertices[i]);
        let lo = |a: usize| pts.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
        let hi = |a: usize| pts.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        let range = |a: usize, n: usize| {
            let from = ((lo(a) - origin[a]) / h).floor().max(0.0) as usize;
            let to = (((hi(a) - origin[a]) / h).ceil().max(0.0) as usize).min(n - 1);
            from..=to
        };
        for k in range(2, nz) {
            for j in range(1, ny) {
                rows[j + ny * k].push(t);
            }
        }
    }

    let row_bits: Vec<Vec<bool>> = par::map_indexed(ny * nz, |row| {
        let (j, k) = (row % ny, row / ny);
        let base = spec.node_position(0, j, k);
        let hits = row_crossings(m, &rows[row], base.y, base.z, row as u64);
        let mut bits = vec![false; nx];
        let mut inside = false;
        let mut next = 0;
        for (i, bit) in bits.iter_mut().enumerate() {
            let x = origin.x + h * i as f64;
            while next < hits.len() && hits[next] <= x {
                inside = !inside;
                next += 1;
            }
            *bit = inside;
        }
        bits
    });
    let mut bits = vec![false; spec.len()];
    for (row, rb) in row_bits.iter().enumerate() {
        let start = row * nx;
        bits[start..start + nx].copy_from_slice(rb);
    }
    OccupancyGrid::new(spec, bits)
}

/// Sorted x-coordinates where the line `(*, y, z)` crosses the mesh. A line
/// grazing an edge or vertex of the projection is nudged by a small seeded
/// offset and recast.
fn row_crossings(m: &TriMesh, candidates: &[usize], y: f64, z: f64, seed: u64) -> Vec<f64> {
    const GRAZE: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut z) = (y, z);
    for _attempt in 0..16 {
        let mut hits = Vec::new();
        let mut grazed = false;
        for &t in candidates {
            let [a, b, c] = m.triangle(t);
            // 2D barycentrics of (y, z) in the projected triangle.
            let d = (b.y - a.y) * (c.z - a.z) - (c.y - a.y) * (b.z - a.z);
            if d == 0.0 {
                continue;
            }
            let w1 = ((y - a.y) * (c.z - a.z) - (c.y - a.y) * (z - a.z)) / d;
            let w2 = ((b.y - a.y) * (z - a.z) - (y - a.y) * (b.z - a.z)) / d;
            let w0 = 1.0 - w1 - w2;
            let lo = w0.min(w1).min(w2);
            if lo < -GRAZE {
                continue;
            }
            if lo <= GRAZE {
                grazed = true;
                break;
            }
            hits.push(w0 * a.x + w1 * b.x + w2 * c.x);
        }
        if !grazed {
            hits.sort_by(f64::total_cmp);
            return hits;
        }
        let jitter = 1e-6;
        y += rng.gen_range(-jitter..jitter);
        z += rng.gen_range(-jitter..jitter);
    }
    Vec::new()
}

/// `|A & B| / |A | B|`, or 1 when both are empty.
pub fn iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64> {
    if a.spec.dims() != b.spec.dims() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.spec.dims(), b.spec.dims())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean nearest-neighbour distance from `from` into `to`.
fn directed_mean(from: &[Vec3], to: &PointIndex) -> f64 {
    let d = par::map_indexed(from.len(), |i| to.nearest(&from[i]).distance());
    d.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance with exact nearest neighbours and plain
/// (unsquared) Euclidean distances.
pub fn chamfer(p1: &[Vec3], p2: &[Vec3]) -> Result<f64> {
    let i1 = PointIndex::new(p1.to_vec()).ok_or_else(|| Error::domain("first point set is empty"))?;
    let i2 = PointIndex::new(p2.to_vec()).ok_or_else(|| Error::domain("second point set is empty"))?;
    Ok(directed_mean(p1, &i2) + directed_mean(p2, &i1))
}
