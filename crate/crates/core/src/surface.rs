//! Zero level set extraction and triangle-mesh utilities.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::OrientedPointCloud;
use crate::grid::ScalarField;
use crate::mc_table::{self, CORNERS, EDGES};
use crate::{par, Error, Result, Vec3};

const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh. Triangles wind counter-clockwise seen from
/// outside, so `(b - a) x (c - a)` points toward `phi < iso`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::domain(format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    /// Unnormalised normal, twice the triangle area in length.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.face_normal(t).norm()
    }

    /// Undirected edges that are not shared by exactly two triangles.
    pub fn open_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut open: Vec<_> = count.into_iter().filter(|&(_, c)| c != 2).map(|(e, _)| e).collect();
        open.sort_unstable();
        open
    }

    pub fn is_watertight(&self) -> bool {
        self.open_edges().is_empty()
    }

    /// Reverses every triangle's winding.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }
}

/// Marching cubes on the `iso` level set. Corners with `phi >= iso` count as
/// inside. Vertices are shared between cubes via their grid edge, and
/// triangles with area below `1e-12` are dropped.
pub fn marching_cubes(phi: &ScalarField, iso: f64) -> Result<TriMesh> {
    if !iso.is_finite() {
        return Err(Error::domain("iso value must be finite"));
    }
    let spec = *phi.spec();
    let [nx, ny, nz] = spec.dims();
    let values = phi.values();
    let table = mc_table::table();

    // Triangles per z-slab, as global edge keys (node index * 3 + axis).
    let slabs: Vec<Vec<[usize; 3]>> = par::map_indexed(nz - 1, |k| {
        let mut out = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut mask = 0u8;
                for (c, off) in CORNERS.iter().enumerate() {
                    if values[spec.index(i + off[0], j + off[1], k + off[2])] >= iso {
                        mask |= 1 << c;
                    }
                }
                for tri in &table[mask as usize] {
                    out.push(tri.map(|e| {
                        let base = CORNERS[EDGES[e][0]];
                        spec.index(i + base[0], j + base[1], k + base[2]) * 3 + mc_table::edge_axis(e)
                    }));
                }
            }
        }
        out
    });

    let edge_vertex = |key: usize| -> Vec3 {
        let node = key / 3;
        let axis = key % 3;
        let [i, j, k] = spec.coords(node);
        let mut other = [i, j, k];
        other[axis] += 1;
        let v0 = values[node];
        let v1 = values[spec.index(other[0], other[1], other[2])];
        let p0 = spec.node_position(i, j, k);
        let t = ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0);
        let mut p = p0;
        p[axis] += t * spec.spacing();
        p
    };

    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tri in cancel_opposed(slabs.into_iter().flatten().collect()) {
        let corners = tri.map(edge_vertex);
        let area = 0.5 * (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).norm();
        if area < DEGENERATE_AREA {
            continue;
        }
        let idx = tri.map(|key| {
            *ids.entry(key).or_insert_with(|| {
                vertices.push(edge_vertex(key));
                vertices.len() - 1
            })
        });
        triangles.push(idx);
    }
    Ok(TriMesh { vertices, triangles })
}

/// Drops pairs of identical triangles with opposite winding. Fanning a
/// cube's contour can lay a triangle flat on an ambiguous face, and the
/// neighbouring cube then emits the same triangle reversed.
fn cancel_opposed(tris: Vec<[usize; 3]>) -> Vec<[usize; 3]> {
    let canonical = |t: &[usize; 3]| {
        let r = (0..3).min_by_key(|&i| t[i]).unwrap_or(0);
        [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
    };
    let mut keep = vec![true; tris.len()];
    let mut unmatched: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        let c = canonical(t);
        if let Some(j) = unmatched.get_mut(&[c[0], c[2], c[1]]).and_then(Vec::pop) {
            keep[i] = false;
            keep[j] = false;
        } else {
            unmatched.entry(c).or_default().push(i);
        }
    }
    tris.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect()
}

/// Area and enclosed volume of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMeasures {
    pub area: f64,
    /// Absolute signed-tetrahedron sum. Only meaningful when `watertight`.
    pub volume: f64,
    pub watertight: bool,
}

pub fn mesh_area_volume(m: &TriMesh) -> MeshMeasures {
    let mut area = 0.0;
    let mut vol6 = 0.0;
    for t in 0..m.triangles.len() {
        let [a, b, c] = m.triangle(t);
        area += 0.5 * (b - a).cross(&(c - a)).norm();
        vol6 += a.dot(&b.cross(&c));
    }
    MeshMeasures {
        area,
        volume: (vol6 / 6.0).abs(),
        watertight: m.is_watertight(),
    }
}

/// Seeded area-weighted surface samples; normals follow triangle winding.
pub fn sample_mesh_surface(m: &TriMesh, count: usize, seed: u64) -> Result<OrientedPointCloud> {
    if count == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    let mut cumulative = Vec::with_capacity(m.triangles.len());
    let mut total = 0.0;
    for t in 0..m.triangles.len() {
        total += m.triangle_area(t);
        cumulative.push(total);
    }
    if m.triangles.is_empty() || total <= 0.0 {
        return Err(Error::domain("cannot sample an empty mesh"));
    }
    let normals: Vec<Vec3> = (0..m.triangles.len())
        .map(|t| {
            let n = m.face_normal(t);
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut out_normals = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.gen_range(0.0..total);
        let t = cumulative.partition_point(|&c| c <= r).min(m.triangles.len() - 1);
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = m.triangle(t);
        let p = a + u * (b - a) + v * (c - a);
        points.push(p.map(|x| x.clamp(-1.0, 1.0)));
        out_normals.push(normals[t]);
    }
    OrientedPointCloud::new(points, out_normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{analytic_sdf, Shape};
    use crate::grid::{sample_trilinear, GridSpec};
    use std::f64::consts::PI;

    fn sphere_mesh(res: usize) -> (GridSpec, ScalarField, TriMesh) {
        let spec = GridSpec::unit_box(res).unwrap();
        let phi = analytic_sdf(&Shape::sphere(0.5), spec).unwrap();
        let mesh = marching_cubes(&phi, 0.0).unwrap();
        (spec, phi, mesh)
    }

    #[test]
    fn sphere_vertices_near_radius() {
        let (spec, _, mesh) = sphere_mesh(64);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!((v.norm() - 0.5).abs() <= spec.spacing());
        }
    }

    #[test]
    fn vertices_lie_on_the_level_set() {
        let spec = GridSpec::unit_box(24).unwrap();
        let phi = ScalarField::from_fn(spec, |p| 0.4 - (p - Vec3::new(0.1, -0.05, 0.0)).norm() + 0.1 * (4.0 * p.x).sin() * p.y).unwrap();
        let (lo, hi) = phi.min_max();
        for iso in [0.0, 0.1] {
            let mesh = marching_cubes(&phi, iso).unwrap();
            for v in &mesh.vertices {
                assert!((sample_trilinear(&phi, v).unwrap() - iso).abs() <= 1e-6 * (hi - lo));
            }
            assert!(mesh.is_watertight());
        }
    }

    #[test]
    fn sphere_mesh_is_watertight_and_outward() {
        let (_, _, mesh) = sphere_mesh(32);
        assert!(mesh.is_watertight());
        let outward = (0..mesh.triangles.len())
            .filter(|&t| {
                let [a, b, c] = mesh.triangle(t);
                ((a + b + c) / 3.0).dot(&mesh.face_normal(t)) > 0.0
            })
            .count();
        assert!(outward as f64 >= 0.99 * mesh.triangles.len() as f64);
    }

    #[test]
    fn noise_fields_give_closed_meshes() {
        // White noise hits every ambiguous face configuration.
        let spec = GridSpec::unit_box(9).unwrap();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..spec.len())
                .map(|i| if spec.is_boundary(i) { -1.0 } else { rng.gen_range(-1.0..1.0) })
                .collect();
            let phi = ScalarField::new(spec, values).unwrap();
            let m = marching_cubes(&phi, 0.0).unwrap();
            assert!(m.is_watertight(), "seed {seed}: {:?}", m.open_edges());
        }
    }

    #[test]
    fn one_signed_field_gives_empty_mesh() {
        let spec = GridSpec::unit_box(8).unwrap();
        assert!(marching_cubes(&ScalarField::constant(spec, 1.0), 0.0).unwrap().is_empty());
        assert!(marching_cubes(&ScalarField::constant(spec, -1.0), 0.0).unwrap().is_empty());
    }

    #[test]
    fn negated_field_reverses_winding() {
        let (spec, phi, mesh) = sphere_mesh(20);
        let neg = ScalarField::new(spec, phi.values().iter().map(|v| -v).collect()).unwrap();
        let flipped = marching_cubes(&neg, 0.0).unwrap();
        assert_eq!(flipped.triangles.len(), mesh.triangles.len());
        // Vertex numbering may differ; compare triangles by position.
        let canon = |m: &TriMesh, t: [usize; 3]| {
            let key = t.map(|i| m.vertices[i].map(f64::to_bits).into());
            let r = (0..3).min_by_key(|&k| key[k]).unwrap();
            let k: [[u64; 3]; 3] = [key[r], key[(r + 1) % 3], key[(r + 2) % 3]];
            k
        };
        let reversed = mesh.flipped();
        let mut a: Vec<_> = reversed.triangles.iter().map(|&t| canon(&reversed, t)).collect();
        let mut b: Vec<_> = flipped.triangles.iter().map(|&t| canon(&flipped, t)).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn sphere_area_and_volume() {
        let (_, _, mesh) = sphere_mesh(64);
        let m = mesh_area_volume(&mesh);
        assert!(m.watertight);
        assert!((m.area - PI).abs() <= 0.02 * PI, "{}", m.area);
        let vol = 4.0 / 3.0 * PI * 0.125;
        assert!((m.volume - vol).abs() <= 0.02 * vol, "{}", m.volume);
    }

    #[test]
    fn single_triangle_measures() {
        let mesh = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let m = mesh_area_volume(&mesh);
        assert_eq!(m.area, 0.5);
        assert!(!m.watertight);
    }

    pub(crate) fn octahedron(r: f64) -> TriMesh {
        let v = vec![
            Vec3::new(r, 0.0, 0.0),
            Vec3::new(-r, 0.0, 0.0),
            Vec3::new(0.0, r, 0.0),
            Vec3::new(0.0, -r, 0.0),
            Vec3::new(0.0, 0.0, r),
            Vec3::new(0.0, 0.0, -r),
        ];
        let t = vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]];
        TriMesh::new(v, t).unwrap()
    }

    #[test]
    fn octahedron_measures() {
        let m = mesh_area_volume(&octahedron(0.5));
        assert!(m.watertight);
        assert!((m.area - 3f64.sqrt()).abs() < 1e-12);
        assert!((m.volume - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn octahedron_winding_is_outward() {
        let o = octahedron(0.5);
        for t in 0..o.triangles.len() {
            let [a, b, c] = o.triangle(t);
            assert!(((a + b + c) / 3.0).dot(&o.face_normal(t)) > 0.0);
        }
    }

    #[test]
    fn bad_indices_rejected() {
        assert!(TriMesh::new(vec![Vec3::zeros()], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn single_triangle_sampling() {
        let mesh = TriMesh::new(vec![Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.0, 0.5, 0.0)], vec![[0, 1, 2]]).unwrap();
        let cloud = sample_mesh_surface(&mesh, 500, 4).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 0.5 + 1e-12 && p.z == 0.0);
            assert_eq!(*n, Vec3::z());
        }
    }

    #[test]
    fn sampling_follows_area_ratio() {
        // Two parallel right triangles with areas in ratio 1:3.
        let mesh = TriMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(0.25, 0.0, 0.0),
                Vec3::new(0.0, 0.5, 0.0),
                Vec3::new(0.0, 0.0, 0.1),
                Vec3::new(0.75, 0.0, 0.1),
                Vec3::new(0.0, 0.5, 0.1),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        assert!((mesh.triangle_area(1) / mesh.triangle_area(0) - 3.0).abs() < 1e-12);
        let n = 100_000;
        let cloud = sample_mesh_surface(&mesh, n, 8).unwrap();
        let first = cloud.points().iter().filter(|p| p.z == 0.0).count();
        // Within 1% of the sample count of the expected 25 / 75 split.
        assert!((first as f64 - 0.25 * n as f64).abs() <= 0.01 * n as f64, "{first}");
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_empty() {
        let (_, _, mesh) = sphere_mesh(16);
        assert_eq!(sample_mesh_surface(&mesh, 200, 3).unwrap(), sample_mesh_surface(&mesh, 200, 3).unwrap());
        assert!(sample_mesh_surface(&TriMesh::default(), 10, 1).is_err());
    }
}
