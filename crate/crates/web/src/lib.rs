//! Browser demo bindings. The plain functions do the work and are tested
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.

use lsrecon::distance::{analytic_sdf, sample_shape_surface, Shape};
use lsrecon::energy::LossWeights;
use lsrecon::grid::{GridSpec, ScalarField};
use lsrecon::mollifier::MollifierParams;
use lsrecon::optimizer::{self, FitConfig, Init};
use lsrecon::surface::{marching_cubes, TriMesh};
use wasm_bindgen::prelude::*;

pub fn parse_shape(name: &str) -> Result<Shape, String> {
    match name {
        "sphere" => Ok(Shape::sphere(0.5)),
        "box" => Ok(Shape::cube(0.4)),
        "torus" => Ok(Shape::torus(0.5, 0.2)),
        other => Err(format!("unknown shape {other:?}; expected sphere, box or torus")),
    }
}

/// `n` samples of `delta_eps` and `H_eps` over `[-2 eps, 2 eps]`, as flat
/// `x, delta, heaviside` triples.
pub fn mollifier_samples(epsilon: f64, n: usize) -> Result<Vec<f64>, String> {
    let m = MollifierParams::new(epsilon).map_err(|e| e.to_string())?;
    if n < 2 {
        return Err("need at least two samples".into());
    }
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let x = epsilon * (4.0 * i as f64 / (n - 1) as f64 - 2.0);
        out.extend_from_slice(&[x, m.delta(x), m.heaviside(x)]);
    }
    Ok(out)
}

/// Triangle soup: nine coordinates per triangle.
pub fn triangle_soup(m: &TriMesh) -> Vec<f32> {
    m.triangles
        .iter()
        .flat_map(|t| t.iter().flat_map(|&v| m.vertices[v].iter().map(|&c| c as f32).collect::<Vec<_>>()))
        .collect()
}

/// The analytic shape's SDF at `res`^3, meshed at `iso`.
pub fn shape_mesh_soup(shape: &str, res: usize, iso: f64) -> Result<Vec<f32>, String> {
    let shape = parse_shape(shape)?;
    let spec = GridSpec::unit_box(res).map_err(|e| e.to_string())?;
    let phi = analytic_sdf(&shape, spec).map_err(|e| e.to_string())?;
    let mesh = marching_cubes(&phi, iso).map_err(|e| e.to_string())?;
    Ok(triangle_soup(&mesh))
}

#[derive(Debug, Clone)]
pub struct FitSettings {
    pub shape: String,
    pub res: usize,
    pub iters: usize,
    pub points: usize,
    pub alpha3: f64,
    pub alpha4: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub res: usize,
    pub iterations: usize,
    pub stop: String,
    /// `(iteration, total loss)` at every logged step.
    pub history: Vec<(usize, f64)>,
    /// `phi` on the `z = 0` node plane (or the one just below), x fastest.
    pub slice: Vec<f64>,
    pub mesh: Vec<f32>,
}

fn mid_slice(phi: &ScalarField) -> Vec<f64> {
    let [nx, ny, nz] = phi.spec().dims();
    let k = (nz - 1) / 2;
    (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| phi.get(i, j, k)).collect()
}

pub fn run_fit(s: &FitSettings) -> Result<FitOutcome, String> {
    let shape = parse_shape(&s.shape)?;
    let spec = GridSpec::unit_box(s.res).map_err(|e| e.to_string())?;
    let cloud = sample_shape_surface(&shape, s.points, s.seed).map_err(|e| e.to_string())?;
    let cfg = FitConfig {
        max_iters: s.iters,
        weights: LossWeights {
            alpha3: s.alpha3,
            alpha4: s.alpha4,
            ..LossWeights::default()
        },
        init: Init::Sphere(0.6),
        seed: s.seed,
        ..FitConfig::default()
    };
    let (phi, report) = optimizer::fit(&cloud, spec, &cfg).map_err(|e| e.to_string())?;
    let mesh = marching_cubes(&phi, 0.0).map_err(|e| e.to_string())?;
    Ok(FitOutcome {
        res: s.res,
        iterations: report.iterations,
        stop: format!("{:?}", report.stop),
        history: report.history.iter().map(|(i, l)| (*i, l.total)).collect(),
        slice: mid_slice(&phi),
        mesh: triangle_soup(&mesh),
    })
}

fn js_err(msg: String) -> JsError {
    JsError::new(&msg)
}

#[wasm_bindgen]
pub fn mollifier_curves(epsilon: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    mollifier_samples(epsilon, samples).map_err(js_err)
}

#[wasm_bindgen]
pub fn shape_mesh(shape: &str, res: usize, iso: f64) -> Result<Vec<f32>, JsError> {
    shape_mesh_soup(shape, res, iso).map_err(js_err)
}

#[wasm_bindgen]
pub struct FitResult(FitOutcome);

#[wasm_bindgen]
impl FitResult {
    #[wasm_bindgen(getter)]
    pub fn res(&self) -> usize {
        self.0.res
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn stop(&self) -> String {
        self.0.stop.clone()
    }

    /// Flat `iteration, total` pairs.
    pub fn history(&self) -> Vec<f64> {
        self.0.history.iter().flat_map(|&(i, t)| [i as f64, t]).collect()
    }

    pub fn slice(&self) -> Vec<f64> {
        self.0.slice.clone()
    }

    pub fn mesh(&self) -> Vec<f32> {
        self.0.mesh.clone()
    }
}

#[wasm_bindgen]
pub fn fit(shape: &str, res: usize, iters: usize, points: usize, alpha3: f64, alpha4: f64, seed: u64) -> Result<FitResult, JsError> {
    let s = FitSettings {
        shape: shape.into(),
        res,
        iters,
        points,
        alpha3,
        alpha4,
        seed,
    };
    run_fit(&s).map(FitResult).map_err(js_err)
}
