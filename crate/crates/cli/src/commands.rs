use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use lsrecon::distance::{analytic_sdf, sample_shape_surface, Shape};
use lsrecon::energy::LossWeights;
use lsrecon::gradcheck::{self, GradCheckConfig};
use lsrecon::grid::{GridSpec, ScalarField};
use lsrecon::metrics::{self, OccupancyGrid};
use lsrecon::optimizer::{self, FitConfig, Init};
use lsrecon::surface::{marching_cubes, mesh_area_volume, sample_mesh_surface, TriMesh};
use lsrecon::{io, Error};

use crate::{Cli, Command, EvalArgs, ExtractArgs, FitArgs, GradcheckArgs, ShapeKind, SynthArgs};
use crate::{EXIT_IO, EXIT_NUMERIC, EXIT_USAGE};

const MAX_GRADCHECK_RES: usize = 16;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    fn numeric(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: msg.into(),
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) => EXIT_IO,
        Error::Domain(_) | Error::GridMismatch(_) => EXIT_USAGE,
        Error::Diverged { .. } => EXIT_NUMERIC,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Resolved settings, printed to stderr in config-file syntax.
struct Resolved(Vec<(&'static str, String)>);

impl Resolved {
    fn new(cli: &Cli) -> Self {
        let mut r = Self(Vec::new());
        r.add("threads", cli.threads.map_or("auto".to_string(), |n| n.to_string()));
        r.add("deterministic", cli.deterministic);
        r
    }

    fn add(&mut self, key: &'static str, value: impl Display) -> &mut Self {
        self.0.push((key, value.to_string()));
        self
    }

    fn print(&self, command: &str) {
        eprint!("# {command}: resolved configuration\n{}", io::format_config(&self.0));
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cli: &Cli) -> Outcome {
    let mut resolved = Resolved::new(cli);
    match &cli.command {
        Command::Synth(a) => synth(a, &mut resolved),
        Command::Fit(a) => fit(a, cli.deterministic, &mut resolved),
        Command::Extract(a) => extract(a, &mut resolved),
        Command::Eval(a) => eval(a, &mut resolved),
        Command::Gradcheck(a) => run_gradcheck(a, cli.deterministic, &mut resolved),
    }
}

fn synth(a: &SynthArgs, r: &mut Resolved) -> Outcome {
    let (name, shape) = match a.shape {
        ShapeKind::Sphere => {
            r.add("radius", a.radius);
            ("sphere", Shape::sphere(a.radius))
        }
        ShapeKind::Box => {
            r.add("half", a.half);
            ("box", Shape::cube(a.half))
        }
        ShapeKind::Torus => {
            r.add("major", a.major).add("minor", a.minor);
            ("torus", Shape::torus(a.major, a.minor))
        }
    };
    r.add("shape", name)
        .add("count", a.count)
        .add("seed", a.seed)
        .add("res", a.res)
        .add("out_dir", show(&a.out_dir));
    r.print("synth");
    shape.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if a.count == 0 {
        return Err(Failure::usage("--count must be >= 1"));
    }

    let spec = GridSpec::unit_box(a.res)?;
    let field = analytic_sdf(&shape, spec)?;
    let cloud = sample_shape_surface(&shape, a.count, a.seed)?;
    let mesh = marching_cubes(&field, 0.0)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let paths = [a.out_dir.join("field.lsf"), a.out_dir.join("cloud.pts"), a.out_dir.join("mesh.obj")];
    io::write_field(&field, &paths[0])?;
    io::write_cloud(&cloud, &paths[1])?;
    io::write_obj(&mesh, &paths[2])?;
    println!("field={}\ncloud={}\nmesh={}", show(&paths[0]), show(&paths[1]), show(&paths[2]));
    Ok(())
}

fn weights(alpha: [f64; 4], p: f64, epsilon: f64) -> LossWeights {
    LossWeights {
        alpha1: alpha[0],
        alpha2: alpha[1],
        alpha3: alpha[2],
        alpha4: alpha[3],
        p,
        epsilon,
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fit(a: &FitArgs, deterministic: bool, r: &mut Resolved) -> Outcome {
    let spec = GridSpec::unit_box(a.res)?;
    let cfg = FitConfig {
        max_iters: a.iters,
        step_size: a.step,
        momentum: a.momentum,
        stop_tol: a.stop_tol,
        weights: weights([a.alpha1, a.alpha2, a.alpha3, a.alpha4], a.p, a.epsilon),
        init: match &a.init_field {
            Some(p) => Init::File(p.clone()),
            None => Init::Sphere(a.init_radius),
        },
        log_every: a.log_every,
        seed: a.seed,
        deterministic,
    };
    r.add("input", show(&a.input))
        .add("res", a.res)
        .add("iters", a.iters)
        .add("step", cfg.step_for(&spec))
        .add("momentum", a.momentum)
        .add("alpha1", a.alpha1)
        .add("alpha2", a.alpha2)
        .add("alpha3", a.alpha3)
        .add("alpha4", a.alpha4)
        .add("epsilon", a.epsilon)
        .add("p", a.p)
        .add("stop_tol", a.stop_tol)
        .add("log_every", a.log_every)
        .add("seed", a.seed)
        .add("out", show(&a.out));
    match &a.init_field {
        Some(p) => r.add("init_field", show(p)),
        None => r.add("init_radius", a.init_radius),
    };
    if let Some(log) = &a.log {
        r.add("log", show(log));
    }
    r.print("fit");

    let cloud = io::read_cloud(&a.input)?;
    let mut csv = String::from("iter,e_data,e_normal,e_sdf,e_area,e_vol,total\n");
    let result = optimizer::fit_with(&cloud, spec, &cfg, |it, l| {
        csv.push_str(&format!(
            "{it},{},{},{},{},{},{}\n",
            l.e_data, l.e_normal, l.e_sdf, l.e_area, l.e_vol, l.total
        ));
        eprintln!("iter {it:>5}  total {:.6e}  data {:.4e}  area {:.4e}", l.total, l.e_data, l.e_area);
    });
    if let Some(log) = &a.log {
        fs::write(log, &csv).map_err(|e| Error::Io {
            path: log.clone(),
            source: e,
        })?;
    }
    let (phi, report) = match result {
        Ok(ok) => ok,
        Err(Error::Diverged {
            iteration,
            reason,
            last_good,
        }) => {
            let keep = with_suffix(&a.out, ".last_good");
            io::write_field(&last_good, &keep)?;
            return Err(Failure::numeric(format!(
                "fit diverged at iteration {iteration}: {reason}; last finite field written to {}",
                show(&keep)
            )));
        }
        Err(e) => return Err(e.into()),
    };
    io::write_field(&phi, &a.out)?;
    let last = report.last();
    eprintln!("wall time {:.2?}", report.wall_time);
    println!(
        "iterations={}\nstop={:?}\ne_data={}\ne_normal={}\ne_sdf={}\ne_area={}\ne_vol={}\ntotal={}\nout={}",
        report.iterations,
        report.stop,
        last.e_data,
        last.e_normal,
        last.e_sdf,
        last.e_area,
        last.e_vol,
        last.total,
        show(&a.out)
    );
    Ok(())
}

fn extract(a: &ExtractArgs, r: &mut Resolved) -> Outcome {
    r.add("field", show(&a.field)).add("iso", a.iso).add("out", show(&a.out));
    r.print("extract");
    let phi = io::read_field(&a.field)?;
    let mesh = marching_cubes(&phi, a.iso)?;
    io::write_obj(&mesh, &a.out)?;
    let m = mesh_area_volume(&mesh);
    println!(
        "vertices={}\ntriangles={}\nwatertight={}\narea={}\nout={}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        m.watertight,
        m.area,
        show(&a.out)
    );
    Ok(())
}

enum Shape3 {
    Field(ScalarField),
    Mesh(TriMesh),
}

fn load_shape(path: &Path) -> Result<Shape3, Error> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        io::read_obj(path).map(Shape3::Mesh)
    } else {
        io::read_field(path).map(Shape3::Field)
    }
}

fn occupancy(s: &Shape3, res: usize) -> Result<OccupancyGrid, Error> {
    match s {
        Shape3::Field(f) => metrics::voxelize_field(f, res),
        Shape3::Mesh(m) => metrics::voxelize_mesh(m, res),
    }
}

/// Surface samples, or `None` when the shape has no surface.
fn surface_points(s: &Shape3, count: usize, seed: u64) -> Result<Option<Vec<lsrecon::Vec3>>, Error> {
    let extracted;
    let mesh = match s {
        Shape3::Field(f) => {
            extracted = marching_cubes(f, 0.0)?;
            &extracted
        }
        Shape3::Mesh(m) => m,
    };
    if mesh.is_empty() {
        return Ok(None);
    }
    Ok(Some(sample_mesh_surface(mesh, count, seed)?.points().to_vec()))
}

fn eval(a: &EvalArgs, r: &mut Resolved) -> Outcome {
    r.add("pred", show(&a.pred))
        .add("gt", show(&a.gt))
        .add("iou_res", a.iou_res)
        .add("chamfer_samples", a.chamfer_samples)
        .add("seed", a.seed);
    if let Some(p) = &a.report {
        r.add("report", show(p));
    }
    r.print("eval");
    if a.chamfer_samples == 0 {
        return Err(Failure::usage("--chamfer-samples must be >= 1"));
    }
    let pred = load_shape(&a.pred)?;
    let gt = load_shape(&a.gt)?;

    let (op, og) = (occupancy(&pred, a.iou_res)?, occupancy(&gt, a.iou_res)?);
    if op.spec() != og.spec() {
        return Err(Error::GridMismatch(format!("prediction voxels {:?} vs ground truth {:?}", op.spec(), og.spec())).into());
    }
    let iou = metrics::iou(&op, &og)?;
    let sp = surface_points(&pred, a.chamfer_samples, a.seed)?;
    let sg = surface_points(&gt, a.chamfer_samples, a.seed.wrapping_add(1))?;
    let chamfer = match (&sp, &sg) {
        (Some(p), Some(g)) => metrics::chamfer(p, g)?,
        _ => f64::INFINITY,
    };

    let report = format!(
        "iou={iou:.6}\nchamfer={chamfer:.6}\niou_res={}\nchamfer_samples={}\nseed={}\n",
        a.iou_res, a.chamfer_samples, a.seed
    );
    print!("{report}");
    if let Some(path) = &a.report {
        fs::write(path, &report).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    match (sp, sg) {
        (None, _) => Err(Failure::numeric("prediction has no surface; Chamfer distance is undefined")),
        (_, None) => Err(Failure::numeric("ground truth has no surface; Chamfer distance is undefined")),
        _ => Ok(()),
    }
}

fn run_gradcheck(a: &GradcheckArgs, deterministic: bool, r: &mut Resolved) -> Outcome {
    let cfg = GradCheckConfig {
        res: a.res,
        seed: a.seed,
        weights: weights([a.alpha1, a.alpha2, a.alpha3, a.alpha4], a.p, a.epsilon),
        nodes_per_term: a.nodes,
        sabotage: a.sabotage,
        ..GradCheckConfig::default()
    };
    r.add("res", a.res)
        .add("seed", a.seed)
        .add("nodes", a.nodes)
        .add("alpha1", a.alpha1)
        .add("alpha2", a.alpha2)
        .add("alpha3", a.alpha3)
        .add("alpha4", a.alpha4)
        .add("epsilon", a.epsilon)
        .add("p", a.p)
        .add("rel_tol", cfg.rel_tol)
        .add("abs_tol", cfg.abs_tol);
    if a.sabotage {
        r.add("sabotage", true);
    }
    r.print("gradcheck");
    // Reductions inside the check are always ordered; the flag only
    // affects whether it is echoed.
    let _ = deterministic;
    if a.res > MAX_GRADCHECK_RES || a.res < 4 {
        return Err(Failure::usage(format!("--res must be in 4..={MAX_GRADCHECK_RES}, got {}", a.res)));
    }

    let report = gradcheck::run(&cfg)?;
    for t in &report.terms {
        println!(
            "term={} nodes={} max_rel_error={:.3e} max_abs_error={:.3e} status={}",
            t.checked.name(),
            t.nodes,
            t.max_rel_error,
            t.max_abs_error,
            if t.passed { "ok" } else { "FAIL" }
        );
    }
    match report.first_failure() {
        None => Ok(()),
        Some(t) => {
            let spec = GridSpec::unit_box(a.res)?;
            let [i, j, k] = spec.coords(t.worst_node);
            Err(Failure::numeric(format!(
                "gradient mismatch in term {} at node {} ({i}, {j}, {k}): analytic {:.9e}, finite difference {:.9e}",
                t.checked.name(),
                t.worst_node,
                t.worst_analytic,
                t.worst_numeric
            )))
        }
    }
}
