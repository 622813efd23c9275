//! Fitting a field to an oriented point cloud by heavy-ball gradient descent.
//!
//! The update follows the functional gradient, i.e. the discrete gradient
//! divided by the cell volume `h^3`, so one step size works across grid
//! resolutions. The default step is `0.1 h^2`, inside the stability limit
//! of the unit-gradient term's boundary stencils at momentum 0.9:
//!
//! ```text
//! v   <- momentum * v - step * grad L / h^3
//! phi <- phi + v
//! ```

use std::path::PathBuf;
use std::time::Duration;

use crate::distance::OrientedPointCloud;
use crate::energy::{Energy, LossBreakdown, LossWeights, Target};
use crate::grid::{GridSpec, ScalarField};
use crate::{io, Error, Result};

/// Loss growth over the initial value treated as divergence.
const BLOWUP_FACTOR: f64 = 1e3;
/// Logged steps spanned by the stopping test.
const STOP_WINDOW: usize = 10;
/// Default step in units of `h^2`.
pub const DEFAULT_STEP_FACTOR: f64 = 0.1;
/// Minimum clearance, in cells, between shapes and the grid boundary.
const MARGIN_CELLS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Signed distance to a sphere at the grid centre.
    Sphere(f64),
    Field(Box<ScalarField>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    /// `None` picks `0.1 h^2`.
    pub step_size: Option<f64>,
    pub momentum: f64,
    /// Stop once the loss falls by less than this fraction over the last
    /// ten logged steps.
    pub stop_tol: f64,
    pub weights: LossWeights,
    pub init: Init,
    pub log_every: usize,
    /// Recorded with the run; the descent itself draws no random numbers.
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: None,
            momentum: 0.9,
            stop_tol: 1e-4,
            weights: LossWeights::default(),
            init: Init::Sphere(0.6),
            log_every: 10,
            seed: 0,
            deterministic: true,
        }
    }
}

impl FitConfig {
    pub fn step_for(&self, spec: &GridSpec) -> f64 {
        self.step_size.unwrap_or(DEFAULT_STEP_FACTOR * spec.spacing() * spec.spacing())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be >= 1"));
        }
        if let Some(s) = self.step_size {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::domain(format!("step size must be finite and >= 0, got {s}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.stop_tol.is_nan() {
            return Err(Error::domain("stop_tol must be a number"));
        }
        if self.log_every == 0 {
            return Err(Error::domain("log_every must be >= 1"));
        }
        self.weights.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    /// Relative decrease over the stop window fell below `stop_tol`.
    Converged,
    /// The loss rose over the stop window.
    LossIncreased,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Number of updates applied.
    pub iterations: usize,
    /// `(iteration, loss)` at every logged step and at the end.
    pub history: Vec<(usize, LossBreakdown)>,
    pub wall_time: Duration,
    pub stop: StopReason,
    pub step_size: f64,
}

impl FitReport {
    pub fn initial(&self) -> &LossBreakdown {
        &self.history.first().expect("history is never empty").1
    }

    pub fn last(&self) -> &LossBreakdown {
        &self.history.last().expect("history is never empty").1
    }
}

fn centre(spec: &GridSpec) -> crate::Vec3 {
    (spec.origin() + spec.max_corner()) / 2.0
}

/// Largest sphere radius that keeps the required margin.
pub fn max_init_radius(spec: &GridSpec) -> f64 {
    let half = (spec.max_corner() - spec.origin()) / 2.0;
    half.min() - MARGIN_CELLS * spec.spacing()
}

/// Initial field: an exact sphere SDF (positive inside) at the grid centre,
/// or a given field, which must live on `spec`.
pub fn init_phi(spec: GridSpec, init: &Init) -> Result<ScalarField> {
    match init {
        Init::Sphere(r) => {
            let limit = max_init_radius(&spec);
            if !(*r > 0.0 && *r <= limit) {
                return Err(Error::domain(format!(
                    "initial radius {r} must be in (0, {limit:.6}] to keep a {MARGIN_CELLS}-cell margin"
                )));
            }
            let c = centre(&spec);
            ScalarField::from_fn(spec, |p| r - (p - c).norm())
        }
        Init::Field(f) => {
            f.spec().check_same(&spec)?;
            Ok((**f).clone())
        }
        Init::File(path) => {
            let f = io::read_field(path)?;
            f.spec().check_same(&spec)?;
            Ok(f)
        }
    }
}

fn check_margin(cloud: &OrientedPointCloud, spec: &GridSpec) -> Result<()> {
    let m = MARGIN_CELLS * spec.spacing();
    let lo = spec.origin().add_scalar(m);
    let hi = spec.max_corner().add_scalar(-m);
    for p in cloud.points() {
        if (0..3).any(|a| p[a] < lo[a] - 1e-12 || p[a] > hi[a] + 1e-12) {
            return Err(Error::domain(format!(
                "target point ({:.4}, {:.4}, {:.4}) is within {MARGIN_CELLS} cells of the grid boundary",
                p.x, p.y, p.z
            )));
        }
    }
    Ok(())
}

/// Fits a field on `spec` to `target`.
pub fn fit(target: &OrientedPointCloud, spec: GridSpec, cfg: &FitConfig) -> Result<(ScalarField, FitReport)> {
    fit_with(target, spec, cfg, |_, _| {})
}

/// Wall clock; browsers give `std::time` no clock, so it reads zero there.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

/// Like [`fit`], calling `on_log(iteration, loss)` at every logged step.
pub fn fit_with<F>(
    target: &OrientedPointCloud,
    spec: GridSpec,
    cfg: &FitConfig,
    mut on_log: F,
) -> Result<(ScalarField, FitReport)>
where
    F: FnMut(usize, &LossBreakdown),
{
    cfg.validate()?;
    check_margin(target, &spec)?;
    let start = Stopwatch::start();
    let target = Target::new(target, spec)?;
    let energy = Energy::new(&target, cfg.weights)?.deterministic(cfg.deterministic);
    let step = cfg.step_for(&spec);
    let scale = step / spec.cell_volume();

    let mut phi = init_phi(spec, &cfg.init)?.into_values();
    let mut velocity = vec![0.0; phi.len()];
    let mut history: Vec<(usize, LossBreakdown)> = Vec::new();
    let mut initial_total = None;
    let mut stop = StopReason::MaxIters;
    let mut last_good = ScalarField::from_raw(spec, phi.clone());
    let mut it = 0;

    loop {
        let field = ScalarField::from_raw(spec, phi.clone());
        let (loss, grad) = energy.loss_and_gradient(&field)?;
        let initial = *initial_total.get_or_insert(loss.total);
        let bound = BLOWUP_FACTOR * initial.abs().max(f64::MIN_POSITIVE);
        if !loss.is_finite() || loss.total > bound {
            return Err(Error::Diverged {
                iteration: it,
                reason: if loss.is_finite() {
                    format!("loss {:.6e} exceeds {BLOWUP_FACTOR}x the initial {:.6e}", loss.total, initial)
                } else {
                    "loss is not finite".into()
                },
                last_good: Box::new(last_good),
            });
        }
        last_good = field;

        let done = it == cfg.max_iters;
        if it % cfg.log_every == 0 || done {
            history.push((it, loss));
            on_log(it, &loss);
            let logged: Vec<f64> = history.iter().filter(|(i, _)| i % cfg.log_every == 0).map(|(_, l)| l.total).collect();
            if !done && logged.len() > STOP_WINDOW {
                let old = logged[logged.len() - 1 - STOP_WINDOW];
                let now = logged[logged.len() - 1];
                if (old - now) / old.abs().max(f64::MIN_POSITIVE) < cfg.stop_tol {
                    stop = if now > old { StopReason::LossIncreased } else { StopReason::Converged };
                    break;
                }
            }
        }
        if done {
            break;
        }

        let g = grad.values();
        for ((p, v), gi) in phi.iter_mut().zip(velocity.iter_mut()).zip(g) {
            *v = cfg.momentum * *v - scale * gi;
            *p += *v;
        }
        it += 1;
    }

    let report = FitReport {
        iterations: it,
        history,
        wall_time: start.elapsed(),
        stop,
        step_size: step,
    };
    Ok((last_good, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{sample_shape_surface, Shape};
    use crate::energy::Term;
    use crate::gradcheck::smooth_random_field;

    fn sphere_cloud() -> OrientedPointCloud {
        sample_shape_surface(&Shape::sphere(0.5), 2000, 1).unwrap()
    }

    #[test]
    fn sphere_init_values_and_margin() {
        let spec = GridSpec::unit_box(20).unwrap();
        let phi = init_phi(spec, &Init::Sphere(0.6)).unwrap();
        // 20 nodes: the centre lies between nodes, so check the analytic form.
        let [i, j, k] = [9, 9, 9];
        let p = spec.node_position(i, j, k);
        assert!((phi.get(i, j, k) - (0.6 - p.norm())).abs() < 1e-15);
        let odd = GridSpec::unit_box(21).unwrap();
        assert_eq!(init_phi(odd, &Init::Sphere(0.6)).unwrap().get(10, 10, 10), 0.6);
        assert!(init_phi(spec, &Init::Sphere(0.95)).is_err());
        assert!(init_phi(spec, &Init::Sphere(0.0)).is_err());
    }

    #[test]
    fn sphere_init_is_well_conditioned() {
        let spec = GridSpec::unit_box(20).unwrap();
        let phi = init_phi(spec, &Init::Sphere(0.6)).unwrap();
        let target = Target::new(&sphere_cloud(), spec).unwrap();
        let energy = Energy::new(&target, LossWeights::default()).unwrap();
        // The kink at the centre spoils the nearby stencils only.
        let g = crate::grid::gradient(&phi);
        let e: f64 = (0..spec.len())
            .filter(|&i| !spec.is_boundary(i) && spec.position(i).norm() > 3.0 * spec.spacing())
            .map(|i| (g.values()[i].norm() - 1.0).powi(2))
            .sum::<f64>()
            * spec.cell_volume();
        assert!(e <= 1e-2, "{e}");
        assert!(energy.loss(&phi).unwrap().is_finite());
    }

    #[test]
    fn field_init_round_trips_through_a_file() {
        let spec = GridSpec::unit_box(9).unwrap();
        let f = smooth_random_field(spec, 2).unwrap();
        let f = f.with_values(f.values().iter().map(|&v| v as f32 as f64).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.lsf");
        io::write_field(&f, &path).unwrap();
        assert_eq!(init_phi(spec, &Init::File(path)).unwrap(), f);
        assert!(init_phi(GridSpec::unit_box(8).unwrap(), &Init::Field(Box::new(f))).is_err());
    }

    #[test]
    fn zero_step_leaves_field_unchanged() {
        let spec = GridSpec::unit_box(16).unwrap();
        let cfg = FitConfig {
            max_iters: 30,
            step_size: Some(0.0),
            log_every: 1,
            stop_tol: 0.0,
            ..FitConfig::default()
        };
        let (phi, report) = fit(&sphere_cloud(), spec, &cfg).unwrap();
        assert_eq!(phi, init_phi(spec, &cfg.init).unwrap());
        assert_eq!(report.history.len(), 31);
        assert!(report.history.iter().all(|(_, l)| l == report.initial()));
    }

    #[test]
    fn volume_term_shrinks_the_shape() {
        let spec = GridSpec::unit_box(16).unwrap();
        let cfg = FitConfig {
            max_iters: 60,
            momentum: 0.0,
            log_every: 1,
            stop_tol: f64::NEG_INFINITY,
            weights: LossWeights {
                alpha1: 1e-6,
                alpha2: 1e-6,
                alpha3: 1e-6,
                alpha4: 5.0,
                ..LossWeights::default()
            },
            init: Init::Sphere(0.5),
            ..FitConfig::default()
        };
        let (_, report) = fit(&sphere_cloud(), spec, &cfg).unwrap();
        // Strict while the band is populated; nodes deeper than epsilon
        // have zero volume gradient, so e_vol plateaus once it empties.
        let hist: Vec<(f64, f64)> = report.history.iter().map(|(_, l)| (l.e_vol, l.e_area)).collect();
        for w in hist.windows(2) {
            if w[0].1 > 1e-3 {
                assert!(w[1].0 < w[0].0, "{hist:?}");
            } else {
                assert!(w[1].0 <= w[0].0, "{hist:?}");
            }
        }
        assert!(hist.last().unwrap().0 < 0.5 * hist[0].0);
    }

    #[test]
    fn small_step_along_negative_gradient_descends() {
        for seed in 0..4 {
            let spec = GridSpec::unit_box(12).unwrap();
            let phi = smooth_random_field(spec, seed).unwrap();
            let cloud = sample_shape_surface(&Shape::sphere(0.4 + 0.05 * seed as f64), 300, seed).unwrap();
            let target = Target::new(&cloud, spec).unwrap();
            let energy = Energy::new(&target, LossWeights::default()).unwrap();
            let (l0, g) = energy.loss_and_gradient(&phi).unwrap();
            let norm = g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm > 1e-6);
            let moved: Vec<f64> = phi.values().iter().zip(g.values()).map(|(p, gi)| p - 1e-6 * gi / norm).collect();
            let l1 = energy.loss(&phi.with_values(moved).unwrap()).unwrap();
            assert!(l1.total < l0.total, "seed {seed}");
        }
    }

    #[test]
    fn fit_is_deterministic_and_descends() {
        let spec = GridSpec::unit_box(16).unwrap();
        let cfg = FitConfig {
            max_iters: 80,
            ..FitConfig::default()
        };
        let (a, ra) = fit(&sphere_cloud(), spec, &cfg).unwrap();
        let (b, rb) = fit(&sphere_cloud(), spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.history, rb.history);
        assert!(ra.last().total < ra.initial().total);
        assert!(ra.history.iter().all(|(_, l)| l.is_finite()));
    }

    #[test]
    fn divergence_returns_last_finite_field() {
        let spec = GridSpec::unit_box(16).unwrap();
        let cfg = FitConfig {
            max_iters: 200,
            step_size: Some(50.0),
            ..FitConfig::default()
        };
        match fit(&sphere_cloud(), spec, &cfg) {
            Err(Error::Diverged { last_good, iteration, .. }) => {
                assert!(iteration > 0);
                assert!(last_good.values().iter().all(|v| v.is_finite()));
                let target = Target::new(&sphere_cloud(), spec).unwrap();
                let e = Energy::new(&target, cfg.weights).unwrap().only(&Term::ALL);
                assert!(e.loss(&last_good).unwrap().is_finite());
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.1.stop)),
        }
    }

    #[test]
    fn rejects_targets_near_the_boundary() {
        let spec = GridSpec::unit_box(16).unwrap();
        let cloud = sample_shape_surface(&Shape::sphere(0.9), 100, 1).unwrap();
        assert!(fit(&cloud, spec, &FitConfig::default()).is_err());
    }
}
