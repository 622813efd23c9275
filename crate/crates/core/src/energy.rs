//! The discretised reconstruction loss and its exact gradient.
//!
//! For a field `phi` on grid nodes `x` with cell volume `h^3`:
//!
//! ```text
//! e_data   = ( h^3 * sum delta(phi) * d^p )^(1/p)
//! e_normal = ( h^3 * sum delta(phi) * (1 - |N . grad phi / |grad phi||)^p )^(1/p)
//! e_sdf    =   h^3 * sum (|grad phi| - 1)^2
//! e_area   =   h^3 * sum delta(phi)
//! e_vol    =   h^3 * sum H(phi)
//! total    = e_data + a1 e_normal + a2 e_sdf + a3 e_area + a4 e_vol
//! ```
//!
//! `d` is the distance to the target cloud and `N` the normal of the closest
//! cloud point, both fixed per node. `delta` and `H` are the mollified delta
//! and step of width `epsilon`. The gradient is the chain rule through every
//! discrete step above, including the finite-difference stencils of
//! `grad phi`, so it agrees with finite differences of [`loss`] to rounding.

use crate::distance::{build_distance_field, DistanceField, OrientedPointCloud};
use crate::grid::{gradient, gradient_transpose, GridSpec, ScalarField, VectorField};
use crate::metrics::OccupancyGrid;
use crate::mollifier::MollifierParams;
use crate::{par, Error, Result, Vec3};

/// Floor for `|grad phi|` wherever it is a denominator.
pub const GRAD_GUARD: f64 = 1e-8;
/// Smoothing of `|t|` as `sqrt(t^2 + s^2) - s`.
const ABS_SMOOTHING: f64 = 1e-6;
/// Inner sums of the `1/p`-powered terms below this count as a perfect fit.
const POWER_FLOOR: f64 = 1e-12;
const CE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Normal alignment.
    pub alpha1: f64,
    /// Unit-gradient penalty.
    pub alpha2: f64,
    /// Surface area.
    pub alpha3: f64,
    /// Enclosed volume.
    pub alpha4: f64,
    pub p: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha1: 0.8,
            alpha2: 1.0,
            alpha3: 0.1,
            alpha4: 0.1,
            p: 2.0,
            epsilon: MollifierParams::DEFAULT_EPSILON,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let alphas = [self.alpha1, self.alpha2, self.alpha3, self.alpha4];
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::domain(format!("loss weights must be finite and >= 0, got {alphas:?}")));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::domain(format!("p must be finite and >= 1, got {}", self.p)));
        }
        MollifierParams::new(self.epsilon)?;
        Ok(())
    }
}

/// Individual loss values. `e_normal` and friends are unweighted; `total`
/// applies the weights to the terms that were selected for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub e_data: f64,
    pub e_normal: f64,
    pub e_sdf: f64,
    pub e_area: f64,
    pub e_vol: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.e_data, self.e_normal, self.e_sdf, self.e_area, self.e_vol, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// One term of the loss, for isolating it in checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Data,
    Normal,
    Sdf,
    Area,
    Volume,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Data, Term::Normal, Term::Sdf, Term::Area, Term::Volume];

    pub fn name(&self) -> &'static str {
        match self {
            Term::Data => "data",
            Term::Normal => "normal",
            Term::Sdf => "sdf",
            Term::Area => "area",
            Term::Volume => "volume",
        }
    }
}

/// Distance and nearest-normal fields of a target cloud on a grid.
#[derive(Debug, Clone)]
pub struct Target {
    distance: DistanceField,
    normals: Vec<Vec3>,
}

impl Target {
    pub fn new(cloud: &OrientedPointCloud, spec: GridSpec) -> Result<Self> {
        let distance = build_distance_field(cloud, spec)?;
        let normals = distance.nearest.iter().map(|&i| cloud.normals()[i]).collect();
        Ok(Self { distance, normals })
    }

    pub fn spec(&self) -> &GridSpec {
        self.distance.d.spec()
    }

    pub fn distance(&self) -> &DistanceField {
        &self.distance
    }

    /// Normal of the closest cloud point, per node.
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }
}

/// Per-node quantities shared by the loss and its gradient.
struct NodeTerms {
    grad: VectorField,
    /// `[delta * d^p, delta * q, (|g| - 1)^2, delta, H]` per node.
    integrands: Vec<[f64; 5]>,
}

/// Loss evaluator bound to a target and a weight set.
#[derive(Debug, Clone)]
pub struct Energy<'a> {
    target: &'a Target,
    weights: LossWeights,
    mollifier: MollifierParams,
    d_pow: Vec<f64>,
    /// Multiplier per term in `total`: `[1, a1, a2, a3, a4]` masked by selection.
    scale: [f64; 5],
    deterministic: bool,
}

impl<'a> Energy<'a> {
    pub fn new(target: &'a Target, weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        let p = weights.p;
        let d_pow = target
            .distance
            .d
            .values()
            .iter()
            .map(|&d| if p == 2.0 { d * d } else { d.powf(p) })
            .collect();
        Ok(Self {
            target,
            weights,
            mollifier: MollifierParams::new(weights.epsilon)?,
            d_pow,
            scale: [1.0, weights.alpha1, weights.alpha2, weights.alpha3, weights.alpha4],
            deterministic: true,
        })
    }

    /// Fixed-order reductions (the default) give bit-identical results
    /// regardless of thread count.
    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    /// Restricts `total` (and the gradient) to the given terms, keeping
    /// their weights. The breakdown still reports every term.
    pub fn only(mut self, terms: &[Term]) -> Self {
        let full = [1.0, self.weights.alpha1, self.weights.alpha2, self.weights.alpha3, self.weights.alpha4];
        for (k, term) in Term::ALL.iter().enumerate() {
            self.scale[k] = if terms.contains(term) { full[k] } else { 0.0 };
        }
        self
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    fn check(&self, phi: &ScalarField) -> Result<()> {
        phi.spec().check_same(self.target.spec())?;
        if phi.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("field contains non-finite values"));
        }
        Ok(())
    }

    fn node_terms(&self, phi: &ScalarField) -> NodeTerms {
        let grad = gradient(phi);
        let p = self.weights.p;
        let m = self.mollifier;
        let values = phi.values();
        let g = grad.values();
        let normals = &self.target.normals;
        let integrands = par::map_indexed(values.len(), |i| {
            let f = values[i];
            let delta = m.delta(f);
            let norm = g[i].norm();
            let t = normals[i].dot(&g[i]) / norm.max(GRAD_GUARD);
            let a = (t * t + ABS_SMOOTHING * ABS_SMOOTHING).sqrt() - ABS_SMOOTHING;
            let q = powp(1.0 - a, p);
            let r = norm - 1.0;
            [delta * self.d_pow[i], delta * q, r * r, delta, m.heaviside(f)]
        });
        NodeTerms { grad, integrands }
    }

    fn sums(&self, terms: &NodeTerms) -> [f64; 5] {
        let cell = self.target.spec().cell_volume();
        let it = &terms.integrands;
        let mut out = [0.0; 5];
        for (k, o) in out.iter_mut().enumerate() {
            *o = cell * par::sum_indexed(it.len(), self.deterministic, |i| it[i][k]);
        }
        out
    }

    fn breakdown(&self, sums: &[f64; 5]) -> LossBreakdown {
        let p = self.weights.p;
        let root = |s: f64| if s < POWER_FLOOR { 0.0 } else { s.powf(1.0 / p) };
        let e = [root(sums[0]), root(sums[1]), sums[2], sums[3], sums[4]];
        let total = e[0] * self.scale[0]
            + self.scale[1] * e[1]
            + self.scale[2] * e[2]
            + self.scale[3] * e[3]
            + self.scale[4] * e[4];
        LossBreakdown {
            e_data: e[0],
            e_normal: e[1],
            e_sdf: e[2],
            e_area: e[3],
            e_vol: e[4],
            total,
        }
    }

    pub fn loss(&self, phi: &ScalarField) -> Result<LossBreakdown> {
        self.check(phi)?;
        let terms = self.node_terms(phi);
        Ok(self.breakdown(&self.sums(&terms)))
    }

    pub fn gradient(&self, phi: &ScalarField) -> Result<ScalarField> {
        self.loss_and_gradient(phi).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(&self, phi: &ScalarField) -> Result<(LossBreakdown, ScalarField)> {
        self.check(phi)?;
        let spec = *phi.spec();
        let cell = spec.cell_volume();
        let p = self.weights.p;
        let terms = self.node_terms(phi);
        let sums = self.sums(&terms);
        let breakdown = self.breakdown(&sums);

        // d(S^(1/p))/dS, zero below the floor.
        let outer = |s: f64| if s < POWER_FLOOR { 0.0 } else { s.powf(1.0 / p - 1.0) / p };
        let c_data = self.scale[0] * outer(sums[0]);
        let c_normal = self.scale[1] * outer(sums[1]);
        let a_sdf = self.scale[2];
        let a_area = self.scale[3];
        let a_vol = self.scale[4];

        let m = self.mollifier;
        let values = phi.values();
        let g = terms.grad.values();
        let normals = &self.target.normals;
        let s2 = ABS_SMOOTHING * ABS_SMOOTHING;

        // Sensitivities with respect to phi at the node (pointwise) and with
        // respect to the node's gradient vector.
        let node_sens: Vec<(f64, Vec3)> = par::map_indexed(values.len(), |i| {
            let f = values[i];
            let delta = m.delta(f);
            let ddelta = m.delta_prime(f);
            let gi = g[i];
            let norm = gi.norm();
            let n = normals[i];
            let t = n.dot(&gi) / norm.max(GRAD_GUARD);
            let root = (t * t + s2).sqrt();
            let a = root - ABS_SMOOTHING;
            let q = powp(1.0 - a, p);

            let pointwise = c_data * ddelta * self.d_pow[i] + c_normal * ddelta * q + a_area * ddelta + a_vol * delta;

            let mut wrt_grad = Vec3::zeros();
            if c_normal != 0.0 && delta != 0.0 {
                let dq_da = -p * powp(1.0 - a, p - 1.0);
                let da_dt = t / root;
                let dt_dg = if norm > GRAD_GUARD {
                    (n - gi * (t / norm)) / norm
                } else {
                    n / GRAD_GUARD
                };
                wrt_grad += dt_dg * (c_normal * delta * dq_da * da_dt);
            }
            if a_sdf != 0.0 {
                wrt_grad += gi * (a_sdf * 2.0 * (norm - 1.0) / norm.max(GRAD_GUARD));
            }
            (cell * pointwise, cell * wrt_grad)
        });

        let w = VectorField::from_raw(spec, node_sens.iter().map(|s| s.1).collect());
        let back = gradient_transpose(&w).into_values();
        let grad: Vec<f64> = node_sens.iter().zip(back).map(|(s, b)| s.0 + b).collect();
        Ok((breakdown, ScalarField::from_raw(spec, grad)))
    }
}

#[inline]
fn powp(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x
    } else if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}

pub fn loss(phi: &ScalarField, target: &Target, w: &LossWeights) -> Result<LossBreakdown> {
    Energy::new(target, *w)?.loss(phi)
}

pub fn loss_gradient(phi: &ScalarField, target: &Target, w: &LossWeights) -> Result<ScalarField> {
    Energy::new(target, *w)?.gradient(phi)
}

/// Mean binary cross entropy between a ground-truth occupancy and predicted
/// occupancy probabilities on the same grid.
pub fn voxel_cross_entropy(p_true: &OccupancyGrid, p_hat: &ScalarField) -> Result<f64> {
    if p_true.spec().dims() != p_hat.spec().dims() {
        return Err(Error::GridMismatch(format!(
            "occupancy {:?} vs prediction {:?}",
            p_true.spec().dims(),
            p_hat.spec().dims()
        )));
    }
    if let Some(v) = p_hat.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("probability {v} outside [0, 1]")));
    }
    let n = p_hat.values().len() as f64;
    let sum: f64 = p_true
        .bits()
        .iter()
        .zip(p_hat.values())
        .map(|(&occ, &q)| {
            let q = q.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
            if occ {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum();
    Ok(-sum / n)
}
