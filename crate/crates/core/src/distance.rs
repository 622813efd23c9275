//! Target shapes: oriented point clouds, their unsigned distance fields on a
//! grid, and analytic shapes used to synthesise ground truth.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GridSpec, ScalarField};
use crate::spatial::PointIndex;
use crate::{par, Error, Result, Vec3};

const NORMAL_TOL: f64 = 1e-6;

/// Surface samples with unit normals. Normals are meaningful up to sign.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedPointCloud {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
}

impl OrientedPointCloud {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("point cloud is empty"));
        }
        if points.len() != normals.len() {
            return Err(Error::domain(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        for (i, (p, n)) in points.iter().zip(&normals).enumerate() {
            if !p.iter().all(|c| c.is_finite() && c.abs() <= 1.0) {
                return Err(Error::domain(format!("point {i} lies outside [-1, 1]^3")));
            }
            if !((n.norm() - 1.0).abs() <= NORMAL_TOL) {
                return Err(Error::domain(format!("normal {i} is not unit length")));
            }
        }
        Ok(Self { points, normals })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unsigned distance from every grid node to the closest cloud point, plus
/// which point that is.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub d: ScalarField,
    pub nearest: Vec<usize>,
}

/// Exact nearest-point distances on every node. Ties go to the lower index.
pub fn build_distance_field(cloud: &OrientedPointCloud, spec: GridSpec) -> Result<DistanceField> {
    let index = PointIndex::new(cloud.points.clone()).ok_or_else(|| Error::domain("point cloud is empty"))?;
    let hits = par::map_indexed(spec.len(), |idx| index.nearest(&spec.position(idx)));
    let d = hits.iter().map(|n| n.distance()).collect();
    let nearest = hits.iter().map(|n| n.index).collect();
    Ok(DistanceField {
        d: ScalarField::new(spec, d)?,
        nearest,
    })
}

/// Closed analytic shapes. Signed distances are positive inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    /// Ring torus around the z axis through `center`.
    Torus { center: Vec3, major: f64, minor: f64 },
}

impl Shape {
    pub fn sphere(radius: f64) -> Self {
        Shape::Sphere {
            center: Vec3::zeros(),
            radius,
        }
    }

    pub fn cube(half: f64) -> Self {
        Shape::Box {
            center: Vec3::zeros(),
            half_extents: Vec3::repeat(half),
        }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Shape::Torus {
            center: Vec3::zeros(),
            major,
            minor,
        }
    }

    pub fn center(&self) -> Vec3 {
        match *self {
            Shape::Sphere { center, .. } | Shape::Box { center, .. } | Shape::Torus { center, .. } => center,
        }
    }

    /// Half extents of the axis-aligned bounding box.
    pub fn half_bounds(&self) -> Vec3 {
        match *self {
            Shape::Sphere { radius, .. } => Vec3::repeat(radius),
            Shape::Box { half_extents, .. } => half_extents,
            Shape::Torus { major, minor, .. } => Vec3::new(major + minor, major + minor, minor),
        }
    }

    /// Checks the parameters and that the shape sits strictly inside `[-1, 1]^3`.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius, .. } => radius > 0.0,
            Shape::Box { half_extents, .. } => half_extents.iter().all(|&e| e > 0.0),
            Shape::Torus { major, minor, .. } => minor > 0.0 && major > minor,
        };
        if !ok {
            return Err(Error::domain(format!("invalid shape parameters: {self:?}")));
        }
        let c = self.center();
        let b = self.half_bounds();
        if !(0..3).all(|a| c[a].is_finite() && c[a].abs() + b[a] < 1.0) {
            return Err(Error::domain(format!("shape does not fit inside [-1, 1]^3: {self:?}")));
        }
        Ok(())
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => radius - (p - center).norm(),
            Shape::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.max().min(0.0);
                -(outside + inside)
            }
            Shape::Torus { center, major, minor } => {
                let l = p - center;
                let ring = (l.x * l.x + l.y * l.y).sqrt() - major;
                minor - (ring * ring + l.z * l.z).sqrt()
            }
        }
    }

    /// Distance from `p` to the set where the signed distance is not smooth
    /// (medial axis inside, plus the symmetry axis outside a torus).
    pub fn medial_clearance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, .. } => (p - center).norm(),
            Shape::Box { center, half_extents } => {
                let l = p - center;
                if (0..3).any(|a| l[a].abs() > half_extents[a]) {
                    return f64::INFINITY;
                }
                // Distances to the six faces; the medial set is where the two
                // nearest are equal.
                let mut faces: Vec<(f64, usize)> = (0..3)
                    .flat_map(|a| [(half_extents[a] - l[a], a), (half_extents[a] + l[a], a)])
                    .collect();
                faces.sort_by(|x, y| x.0.total_cmp(&y.0));
                let (d1, a1) = faces[0];
                let (d2, a2) = faces[1];
                if a1 == a2 {
                    (d2 - d1) / 2.0
                } else {
                    (d2 - d1) / std::f64::consts::SQRT_2
                }
            }
            Shape::Torus { center, major, .. } => {
                let l = p - center;
                let rho = (l.x * l.x + l.y * l.y).sqrt();
                let ring = ((rho - major).powi(2) + l.z * l.z).sqrt();
                ring.min(rho)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Box { half_extents: e, .. } => 8.0 * (e.x * e.y + e.y * e.z + e.x * e.z),
            Shape::Torus { major, minor, .. } => 4.0 * PI * PI * major * minor,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Shape::Box { half_extents: e, .. } => 8.0 * e.x * e.y * e.z,
            Shape::Torus { major, minor, .. } => 2.0 * PI * PI * major * minor * minor,
        }
    }
}

/// Exact signed distance of `shape` sampled on every node of `spec`.
pub fn analytic_sdf(shape: &Shape, spec: GridSpec) -> Result<ScalarField> {
    shape.validate()?;
    ScalarField::from_fn(spec, |p| shape.signed_distance(&p))
}

/// Seeded samples distributed uniformly by area over the shape's surface,
/// with exact outward normals.
pub fn sample_shape_surface(shape: &Shape, count: usize, seed: u64) -> Result<OrientedPointCloud> {
    shape.validate()?;
    if count == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let (p, n) = match *shape {
            Shape::Sphere { center, radius } => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..TAU);
                let s = (1.0 - z * z).max(0.0).sqrt();
                let n = Vec3::new(s * phi.cos(), s * phi.sin(), z).normalize();
                (center + radius * n, n)
            }
            Shape::Box { center, half_extents: e } => {
                let areas = [e.y * e.z, e.x * e.z, e.x * e.y];
                let total: f64 = areas.iter().sum();
                let pick = rng.gen_range(0.0..total);
                let axis = if pick < areas[0] {
                    0
                } else if pick < areas[0] + areas[1] {
                    1
                } else {
                    2
                };
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let mut local = Vec3::zeros();
                for a in 0..3 {
                    local[a] = if a == axis {
                        sign * e[a]
                    } else {
                        rng.gen_range(-e[a]..=e[a])
                    };
                }
                let mut n = Vec3::zeros();
                n[axis] = sign;
                (center + local, n)
            }
            Shape::Torus { center, major, minor } => {
                // Area element is proportional to major + minor * cos(v).
                let v = loop {
                    let v: f64 = rng.gen_range(0.0..TAU);
                    let w: f64 = rng.gen_range(0.0..(major + minor));
                    if w <= major + minor * v.cos() {
                        break v;
                    }
                };
                let u: f64 = rng.gen_range(0.0..TAU);
                let n = Vec3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
                let p = center + Vec3::new(major * u.cos(), major * u.sin(), 0.0) + minor * n;
                (p, n)
            }
        };
        points.push(p);
        normals.push(n);
    }
    OrientedPointCloud::new(points, normals)
}
