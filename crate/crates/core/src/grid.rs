//! Dense scalar and vector fields on a uniform Cartesian grid, with the
//! finite-difference operators used by the energy.
//!
//! Storage is a single contiguous array with x varying fastest, i.e. node
//! `(i, j, k)` lives at `i + nx * (j + ny * k)`. That layout is also the
//! payload order of the binary field file.

use crate::{par, Error, Result, Vec3};

/// Axis-aligned grid with isotropic spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dims: [usize; 3],
    origin: Vec3,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dims: [usize; 3], origin: Vec3, spacing: f64) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::domain(format!(
                "grid dims must be >= 2 on every axis, got {dims:?}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::domain(format!("grid spacing must be positive, got {spacing}")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("grid origin must be finite"));
        }
        Ok(Self {
            dims,
            origin,
            spacing,
        })
    }

    /// `res^3` nodes spanning exactly `[-1, 1]^3`.
    pub fn unit_box(res: usize) -> Result<Self> {
        if res < 2 {
            return Err(Error::domain(format!("resolution must be >= 2, got {res}")));
        }
        Self::new(
            [res; 3],
            Vec3::new(-1.0, -1.0, -1.0),
            2.0 / (res - 1) as f64,
        )
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Volume of one cell, `h^3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// World position of node `(i, j, k)`: `origin + h * (i, j, k)`.
    #[inline]
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + self.spacing * i as f64,
            self.origin.y + self.spacing * j as f64,
            self.origin.z + self.spacing * k as f64,
        )
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.node_position(i, j, k)
    }

    /// Far corner of the bounding box.
    pub fn max_corner(&self) -> Vec3 {
        self.node_position(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= hi[a])
    }

    /// True when the node is on the outer face of the grid.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..3).any(|a| c[a] == 0 || c[a] == self.dims[a] - 1)
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?}/{} vs {:?}/{:?}/{}",
                self.dims,
                self.origin.as_slice(),
                self.spacing,
                other.dims,
                other.origin.as_slice(),
                other.spacing
            )))
        }
    }

    /// Stride of one step along `axis` in the flat array.
    #[inline]
    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::domain(format!(
                "field has {} values, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite field value at node {i}")));
        }
        Ok(Self { spec, values })
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Evaluates `f` at every node position.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(Vec3) -> f64 + Sync + Send,
    {
        let values = par::map_indexed(spec.len(), |idx| f(spec.position(idx)));
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Replaces the values, re-checking finiteness.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.spec, values)
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    spec: GridSpec,
    values: Vec<Vec3>,
}

impl VectorField {
    pub fn new(spec: GridSpec, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::domain(format!(
                "vector field has {} values, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::domain("non-finite vector field value"));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(Vec3) -> Vec3 + Sync + Send,
    {
        let values = par::map_indexed(spec.len(), |idx| f(spec.position(idx)));
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<Vec3>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }
}

/// Derivative along `axis` at node `idx` of the flat array `data`:
/// central difference inside, first-order one-sided at the two faces.
#[inline]
fn axis_difference(spec: &GridSpec, idx: usize, coord: usize, axis: usize, data: impl Fn(usize) -> f64) -> f64 {
    let n = spec.dims[axis];
    let s = spec.stride(axis);
    let h = spec.spacing;
    if coord == 0 {
        (data(idx + s) - data(idx)) / h
    } else if coord == n - 1 {
        (data(idx) - data(idx - s)) / h
    } else {
        (data(idx + s) - data(idx - s)) / (2.0 * h)
    }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let spec = f.spec;
    let v = &f.values;
    let values = par::map_indexed(spec.len(), |idx| {
        let c = spec.coords(idx);
        Vec3::new(
            axis_difference(&spec, idx, c[0], 0, |i| v[i]),
            axis_difference(&spec, idx, c[1], 1, |i| v[i]),
            axis_difference(&spec, idx, c[2], 2, |i| v[i]),
        )
    });
    VectorField::from_raw(spec, values)
}

/// Sum over axes of the same difference stencils used by [`gradient`].
pub fn divergence(v: &VectorField) -> ScalarField {
    let spec = v.spec;
    let data = &v.values;
    let values = par::map_indexed(spec.len(), |idx| {
        let c = spec.coords(idx);
        (0..3)
            .map(|a| axis_difference(&spec, idx, c[a], a, |i| data[i][a]))
            .sum()
    });
    ScalarField::from_raw(spec, values)
}

/// Transpose of [`gradient`] as a linear map: returns `G^T w`, so that
/// `<gradient(f), w> == <f, gradient_transpose(w)>` for every `f`.
///
/// Evaluated as a per-node gather, which keeps the result independent of
/// thread scheduling.
pub fn gradient_transpose(w: &VectorField) -> ScalarField {
    let spec = w.spec;
    let data = &w.values;
    let h = spec.spacing;
    let values = par::map_indexed(spec.len(), |j| {
        let c = spec.coords(j);
        let mut acc = 0.0;
        for axis in 0..3 {
            let n = spec.dims[axis];
            let s = spec.stride(axis);
            let cj = c[axis];
            // Node cj-1 reads value cj as its forward neighbour.
            if cj >= 1 {
                let i = cj - 1;
                let coeff = if i == 0 { 1.0 / h } else { 0.5 / h };
                acc += coeff * data[j - s][axis];
            }
            // Node cj+1 reads value cj as its backward neighbour.
            if cj + 1 < n {
                let i = cj + 1;
                let coeff = if i == n - 1 { 1.0 / h } else { 0.5 / h };
                acc -= coeff * data[j + s][axis];
            }
            // One-sided stencils also read the node itself.
            if cj == 0 {
                acc -= data[j][axis] / h;
            } else if cj == n - 1 {
                acc += data[j][axis] / h;
            }
        }
        acc
    });
    ScalarField::from_raw(spec, values)
}

/// Trilinear interpolation of the eight nodes around `p`.
pub fn sample_trilinear(f: &ScalarField, p: &Vec3) -> Result<f64> {
    let spec = &f.spec;
    if !spec.contains(p) {
        return Err(Error::domain(format!(
            "point ({}, {}, {}) lies outside the grid",
            p.x, p.y, p.z
        )));
    }
    let mut base = [0usize; 3];
    let mut t = [0.0f64; 3];
    for a in 0..3 {
        let u = (p[a] - spec.origin[a]) / spec.spacing;
        let cell = (u.floor() as usize).min(spec.dims[a] - 2);
        base[a] = cell;
        t[a] = (u - cell as f64).clamp(0.0, 1.0);
    }
    let [i, j, k] = base;
    let lerp = |a: f64, b: f64, s: f64| if s == 0.0 { a } else if s == 1.0 { b } else { a + (b - a) * s };
    let c00 = lerp(f.get(i, j, k), f.get(i + 1, j, k), t[0]);
    let c10 = lerp(f.get(i, j + 1, k), f.get(i + 1, j + 1, k), t[0]);
    let c01 = lerp(f.get(i, j, k + 1), f.get(i + 1, j, k + 1), t[0]);
    let c11 = lerp(f.get(i, j + 1, k + 1), f.get(i + 1, j + 1, k + 1), t[0]);
    let c0 = lerp(c00, c10, t[1]);
    let c1 = lerp(c01, c11, t[1]);
    Ok(lerp(c0, c1, t[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(res: usize) -> GridSpec {
        GridSpec::unit_box(res).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new([1, 4, 4], Vec3::zeros(), 0.1).is_err());
        assert!(GridSpec::new([4, 4, 4], Vec3::zeros(), 0.0).is_err());
        assert!(GridSpec::new([4, 4, 4], Vec3::zeros(), -1.0).is_err());
    }

    #[test]
    fn node_positions_are_origin_plus_h_times_index() {
        let spec = GridSpec::new([3, 4, 5], Vec3::new(0.5, -1.0, 2.0), 0.25).unwrap();
        let idx = spec.index(2, 3, 4);
        assert_eq!(spec.coords(idx), [2, 3, 4]);
        assert_eq!(spec.position(idx), Vec3::new(1.0, -0.25, 3.0));
    }

    #[test]
    fn rejects_non_finite_values() {
        let spec = unit(3);
        let mut v = vec![0.0; spec.len()];
        v[5] = f64::NAN;
        assert!(ScalarField::new(spec, v).is_err());
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = ScalarField::constant(unit(6), 3.5);
        assert!(gradient(&f).values().iter().all(|g| *g == Vec3::zeros()));
    }

    #[test]
    fn gradient_is_exact_on_affine_fields() {
        let spec = GridSpec::new([5, 6, 7], Vec3::new(-0.3, 0.2, -1.0), 0.125).unwrap();
        let f = ScalarField::from_fn(spec, |p| 2.0 * p.x - 0.5 * p.y + 3.0 * p.z + 1.0).unwrap();
        for g in gradient(&f).values() {
            assert_abs_diff_eq!(g.x, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g.y, -0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(g.z, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_of_x_is_unit_x_everywhere() {
        let f = ScalarField::from_fn(unit(9), |p| p.x).unwrap();
        for g in gradient(&f).values() {
            assert_abs_diff_eq!(g.x, 1.0, epsilon = 1e-12);
            assert_eq!(g.y, 0.0);
            assert_eq!(g.z, 0.0);
        }
    }

    #[test]
    fn gradient_of_paraboloid_within_h_squared() {
        // 17^3 over [-1,1]^3: h = 0.125, so (0.5, 0.25, 0) is the node (12, 10, 8).
        let spec = unit(17);
        let h = spec.spacing();
        let f = ScalarField::from_fn(spec, |p| p.x * p.x + p.y * p.y).unwrap();
        let g = gradient(&f);
        let idx = spec.index(12, 10, 8);
        assert_eq!(spec.position(idx), Vec3::new(0.5, 0.25, 0.0));
        let got = g.values()[idx];
        assert!((got - Vec3::new(1.0, 0.5, 0.0)).amax() <= h * h);
    }

    #[test]
    fn divergence_of_constant_and_identity() {
        let spec = unit(7);
        let c = VectorField::from_fn(spec, |_| Vec3::new(1.0, -2.0, 0.5)).unwrap();
        assert!(divergence(&c).values().iter().all(|&d| d == 0.0));
        let id = VectorField::from_fn(spec, |p| p).unwrap();
        let d = divergence(&id);
        for (idx, v) in d.values().iter().enumerate() {
            if !spec.is_boundary(idx) {
                assert_abs_diff_eq!(*v, 3.0, epsilon = 1e-12);
            }
        }
    }

    fn max_interior_laplacian_error(res: usize) -> f64 {
        let spec = unit(res);
        let f = ScalarField::from_fn(spec, |p| p.x * p.x).unwrap();
        let lap = divergence(&gradient(&f));
        // The composed stencil reaches two nodes out, so skip two layers.
        (0..spec.len())
            .filter(|&i| {
                let c = spec.coords(i);
                (0..3).all(|a| c[a] >= 2 && c[a] + 2 < res)
            })
            .map(|i| (lap.values()[i] - 2.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_of_x_squared() {
        let spec = unit(17);
        let h = spec.spacing();
        assert!(max_interior_laplacian_error(17) <= h * h);
    }

    #[test]
    fn laplacian_of_quadratic_converges() {
        // Wide central stencil on a quadratic is exact at deep interior nodes,
        // so measure against a non-polynomial field instead.
        let err = |res: usize| {
            let spec = unit(res);
            let f = ScalarField::from_fn(spec, |p| (p.x * p.x + 0.5 * p.y * p.y).sin()).unwrap();
            let lap = divergence(&gradient(&f));
            let exact = |p: Vec3| {
                let u = p.x * p.x + 0.5 * p.y * p.y;
                let (ux, uy) = (2.0 * p.x, p.y);
                (2.0 + 1.0) * u.cos() - (ux * ux + uy * uy) * u.sin()
            };
            (0..spec.len())
                .filter(|&i| {
                    let c = spec.coords(i);
                    (0..3).all(|a| c[a] >= 2 && c[a] + 2 < res)
                })
                .map(|i| (lap.values()[i] - exact(spec.position(i))).abs())
                .fold(0.0, f64::max)
        };
        let coarse = err(17);
        let fine = err(33);
        assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
    }

    #[test]
    fn transpose_satisfies_adjoint_identity() {
        let spec = GridSpec::new([2, 5, 7], Vec3::zeros(), 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::new(spec, (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let w = VectorField::new(
            spec,
            (0..spec.len())
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let lhs: f64 = gradient(&f).values().iter().zip(w.values()).map(|(a, b)| a.dot(b)).sum();
        let rhs: f64 = f.values().iter().zip(gradient_transpose(&w).values()).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn trilinear_exact_at_nodes_and_linear_cell_centres() {
        let spec = unit(5);
        let f = ScalarField::from_fn(spec, |p| 3.0 * p.x + p.y * p.z).unwrap();
        for idx in 0..spec.len() {
            let v = sample_trilinear(&f, &spec.position(idx)).unwrap();
            assert_eq!(v.to_bits(), f.values()[idx].to_bits());
        }
        let lin = ScalarField::from_fn(spec, |p| p.x).unwrap();
        let h = spec.spacing();
        let centre = spec.node_position(1, 1, 1) + Vec3::repeat(h / 2.0);
        let left = spec.node_position(1, 1, 1).x;
        let right = spec.node_position(2, 1, 1).x;
        assert_abs_diff_eq!(sample_trilinear(&lin, &centre).unwrap(), 0.5 * (left + right), epsilon = 1e-15);
    }

    #[test]
    fn trilinear_rejects_outside_points() {
        let f = ScalarField::constant(unit(4), 1.0);
        assert!(sample_trilinear(&f, &Vec3::new(1.01, 0.0, 0.0)).is_err());
        assert!(sample_trilinear(&f, &Vec3::new(1.0, 1.0, 1.0)).is_ok());
    }

    #[test]
    fn trilinear_tracks_sphere_sdf_within_h() {
        let spec = unit(21);
        let h = spec.spacing();
        let sdf = |p: Vec3| 0.5 - p.norm();
        let f = ScalarField::from_fn(spec, sdf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert!((sample_trilinear(&f, &p).unwrap() - sdf(p)).abs() <= h);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn trilinear_monotone_along_x(a in -5.0f64..5.0, slope in 0.0f64..3.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
                let spec = unit(6);
                let f = ScalarField::from_fn(spec, |p| a + slope * p.x + slope * p.x.powi(3)).unwrap();
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let p = |t: f64| Vec3::new(-1.0 + 2.0 * t, 0.13, -0.4);
                prop_assert!(sample_trilinear(&f, &p(lo)).unwrap() <= sample_trilinear(&f, &p(hi)).unwrap() + 1e-12);
            }
        }
    }
}
