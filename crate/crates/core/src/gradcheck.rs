//! Finite-difference verification of the loss gradient.
//!
//! Each term is checked in isolation (with unit weight) and the full loss
//! with the configured weights, by comparing the analytic gradient against
//! central differences at sampled nodes. Half of the nodes come from the
//! band `|phi| < epsilon` where the surface terms live.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::{sample_shape_surface, Shape};
use crate::energy::{Energy, LossWeights, Target, Term};
use crate::grid::{GridSpec, ScalarField};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub res: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub nodes_per_term: usize,
    pub rel_tol: f64,
    /// Used instead of the relative test where the gradient is tiny.
    pub abs_tol: f64,
    pub small_grad: f64,
    /// Finite-difference step relative to `max |phi|`.
    pub rel_step: f64,
    /// Corrupts the analytic gradient, for testing the checker itself.
    pub sabotage: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            res: 12,
            seed: 0,
            weights: LossWeights::default(),
            nodes_per_term: 50,
            rel_tol: 1e-4,
            abs_tol: 1e-3,
            small_grad: 1e-6,
            rel_step: 1e-5,
            sabotage: false,
        }
    }
}

/// What was differentiated: one isolated term or the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checked {
    Term(Term),
    Combined,
}

impl Checked {
    pub fn name(&self) -> &'static str {
        match self {
            Checked::Term(t) => t.name(),
            Checked::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermReport {
    pub checked: Checked,
    pub nodes: usize,
    /// Largest relative error among nodes with a non-tiny gradient.
    pub max_rel_error: f64,
    /// Largest absolute error over all checked nodes.
    pub max_abs_error: f64,
    pub worst_node: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub terms: Vec<TermReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.terms.iter().all(|t| t.passed)
    }

    pub fn first_failure(&self) -> Option<&TermReport> {
        self.terms.iter().find(|t| !t.passed)
    }
}

/// A smooth non-SDF field: a sphere-like bump at 0.45 whose radius and
/// slope are modulated by low-frequency sines with seeded phases, so
/// `|grad phi|` ranges roughly over `[0.3, 1.5]`.
pub fn smooth_random_field(spec: GridSpec, seed: u64) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vec3, f64, f64)> = (0..4)
        .map(|_| {
            let k = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            (k, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.02..0.06))
        })
        .collect();
    let slope_k = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    ScalarField::from_fn(spec, |p| {
        let slope = 1.0 + 0.4 * (slope_k.dot(&p) + 0.3).sin();
        let bump: f64 = waves.iter().map(|(k, ph, amp)| amp * (k.dot(&p) + ph).sin()).sum();
        slope * (0.45 - p.norm()) + bump
    })
}

fn unit_weights(base: &LossWeights) -> LossWeights {
    LossWeights {
        alpha1: 1.0,
        alpha2: 1.0,
        alpha3: 1.0,
        alpha4: 1.0,
        ..*base
    }
}

/// Half band nodes, half uniform, without repeats.
fn pick_nodes(phi: &ScalarField, epsilon: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = phi.values().len();
    let band: Vec<usize> = (0..n).filter(|&i| phi.values()[i].abs() < epsilon).collect();
    let from_band = (count / 2).min(band.len());
    let mut nodes: Vec<usize> = sample(rng, band.len(), from_band).into_iter().map(|k| band[k]).collect();
    while nodes.len() < count.min(n) {
        let i = rng.gen_range(0..n);
        if !nodes.contains(&i) {
            nodes.push(i);
        }
    }
    nodes
}

fn check_one(
    energy: &Energy,
    phi: &ScalarField,
    checked: Checked,
    nodes: &[usize],
    cfg: &GradCheckConfig,
) -> Result<TermReport> {
    let (_, grad) = energy.loss_and_gradient(phi)?;
    let mut analytic = grad.into_values();
    if cfg.sabotage {
        for g in &mut analytic {
            *g *= 1.01;
        }
    }
    let (lo, hi) = phi.min_max();
    let step = cfg.rel_step * lo.abs().max(hi.abs()).max(1e-3);
    let mut values = phi.values().to_vec();

    let mut report = TermReport {
        checked,
        nodes: nodes.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_node: nodes.first().copied().unwrap_or(0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        passed: true,
    };
    let mut worst_ratio = -1.0;
    for &i in nodes {
        let x = values[i];
        values[i] = x + step;
        let up = energy.loss(&phi.with_values(values.clone())?)?.total;
        values[i] = x - step;
        let down = energy.loss(&phi.with_values(values.clone())?)?.total;
        values[i] = x;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs());
        let diff = (a - numeric).abs();
        report.max_abs_error = report.max_abs_error.max(diff);
        // Failure ratio: error over the tolerance that applies at this node.
        let ratio = if scale < cfg.small_grad {
            diff / cfg.abs_tol
        } else {
            let rel = diff / scale;
            report.max_rel_error = report.max_rel_error.max(rel);
            rel / cfg.rel_tol
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            report.worst_node = i;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    report.passed = worst_ratio <= 1.0;
    Ok(report)
}

/// Checks against an explicit field and target.
pub fn check_gradient(phi: &ScalarField, target: &Target, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.nodes_per_term == 0 {
        return Err(Error::domain("nodes_per_term must be >= 1"));
    }
    if !(cfg.rel_step > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let unit = unit_weights(&cfg.weights);
    let mut terms = Vec::new();
    for term in Term::ALL {
        let energy = Energy::new(target, unit)?.only(&[term]);
        let nodes = pick_nodes(phi, cfg.weights.epsilon, cfg.nodes_per_term, &mut rng);
        terms.push(check_one(&energy, phi, Checked::Term(term), &nodes, cfg)?);
    }
    let energy = Energy::new(target, cfg.weights)?;
    let nodes = pick_nodes(phi, cfg.weights.epsilon, cfg.nodes_per_term, &mut rng);
    terms.push(check_one(&energy, phi, Checked::Combined, &nodes, cfg)?);
    Ok(GradCheckReport { terms })
}

/// Full seeded check on a `res^3` grid: a smooth random field against a
/// sampled sphere of radius 0.5.
pub fn run(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let spec = GridSpec::unit_box(cfg.res)?;
    let phi = smooth_random_field(spec, cfg.seed)?;
    let cloud = sample_shape_surface(&Shape::sphere(0.5), 400, cfg.seed)?;
    let target = Target::new(&cloud, spec)?;
    check_gradient(&phi, &target, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gradient;

    #[test]
    fn random_field_has_varied_slope_and_a_band() {
        let spec = GridSpec::unit_box(12).unwrap();
        let phi = smooth_random_field(spec, 4).unwrap();
        let g = gradient(&phi);
        let norms: Vec<f64> = g.values().iter().map(|v| v.norm()).collect();
        let lo = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = norms.iter().cloned().fold(0.0, f64::max);
        assert!(lo < 0.8 && hi > 1.2, "{lo} {hi}");
        assert!(phi.values().iter().filter(|v| v.abs() < 0.15).count() >= 25);
    }

    #[test]
    fn default_check_passes() {
        let report = run(&GradCheckConfig::default()).unwrap();
        for t in &report.terms {
            assert!(t.passed, "{t:?}");
            assert_eq!(t.nodes, 50);
        }
    }

    #[test]
    fn sabotage_is_caught() {
        let cfg = GradCheckConfig {
            sabotage: true,
            ..GradCheckConfig::default()
        };
        let report = run(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.first_failure().is_some());
    }

    #[test]
    fn volume_only_is_pointwise_exact() {
        let cfg = GradCheckConfig {
            weights: LossWeights {
                alpha1: 0.0,
                alpha2: 0.0,
                alpha3: 0.0,
                alpha4: 1.0,
                ..LossWeights::default()
            },
            seed: 9,
            ..GradCheckConfig::default()
        };
        let report = run(&cfg).unwrap();
        let vol = report.terms.iter().find(|t| t.checked == Checked::Term(Term::Volume)).unwrap();
        assert!(vol.max_abs_error <= 1e-6, "{vol:?}");
        assert!(report.passed());
    }

    #[test]
    fn several_seeds_pass() {
        for seed in 1..4 {
            let cfg = GradCheckConfig {
                seed,
                res: 10,
                ..GradCheckConfig::default()
            };
            let report = run(&cfg).unwrap();
            assert!(report.passed(), "seed {seed}: {:?}", report.first_failure());
        }
    }
}
