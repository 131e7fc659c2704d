use std::path::PathBuf;
use std::time::Instant;

use chebyquad_core::bounds::{lower_bound, upper_bound, LowerBoundReport, UpperBoundReport};
use chebyquad_core::config::{Constants, FORMAT_VERSION};
use chebyquad_core::cylinder::CylinderSpec;
use chebyquad_core::measure::Measure1D;
use chebyquad_core::quadrature::{
    construct_for_measure, construct_quadrature_large_atoms, large_atom_plan, LargeAtomPlan,
    RESIDUAL_TOL,
};
use chebyquad_core::random::{
    density_from_norms, small_ball_from_deviations, DensityEstimate, SmallBallEstimate,
};
use chebyquad_core::verify::{moment_residual, ResidualReport};
use chebyquad_core::{Error, Mode, QuadratureResult};
use clap::{Args, Parser, Subcommand};
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checks::{verify_cylinder, verify_sphere, CheckOptions};
use crate::config::load_constants;
use crate::error::{CliError, Result};
use crate::formats::{
    append_records, node_list, parse_json, parse_node_list, point_list, read_bundle, read_bytes,
    read_measure, to_pretty_json, Bundle, Cubature,
};
use crate::manifest::Artifacts;
use crate::parallel;

/// Largest node count `construct` materializes when `-n` is left to the bound.
pub const MAX_NODES: f64 = 1e8;

#[derive(Debug, Parser)]
#[command(
    name = "chebyquad",
    version,
    about = "Equal-weight quadrature and local cubature constructions"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Frozen-constants TOML file; takes precedence over $CHEBYQUAD_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper and lower bounds on the node count for a measure.
    Bounds(BoundsArgs),
    /// Equal-weight nodes matching the first k moments of a measure.
    Construct(ConstructArgs),
    /// Local cubature on the sphere S^d.
    Sphere(SphereArgs),
    /// Local cubature on the cylinder [-L, L] x W S^(d-2).
    Cylinder(CylinderArgs),
    /// Monte-Carlo small-ball experiments for random cubatures on the cube.
    Randcube(RandcubeArgs),
    /// Checks nodes against a measure, or a cubature bundle against reference integrals.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Measure spec (JSON).
    #[arg(short, long)]
    pub measure: PathBuf,
    #[arg(short)]
    pub k: u32,
    /// Exponent of a known modulus bound R(δ) ≥ c δ^β.
    #[arg(long, requires = "beta_c")]
    pub beta: Option<f64>,
    /// Constant c of the modulus bound.
    #[arg(long, requires = "beta")]
    pub beta_c: Option<f64>,
    /// Atom cap for the large-atom node count.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(short, long)]
    pub measure: PathBuf,
    #[arg(short)]
    pub k: u32,
    /// Node count; defaults to the guaranteed bound.
    #[arg(short)]
    pub n: Option<usize>,
    /// Allow node counts below the guaranteed bound (no certificate).
    #[arg(long)]
    pub best_effort: bool,
    /// Use the large-atom construction with atom cap eps.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Random shifted monomials per region.
    #[arg(long, default_value_t = 20)]
    pub shifts: usize,
    /// Seed for the random shifts and coverage samples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coverage samples (cylinders).
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

impl CheckArgs {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            shifts: self.shifts,
            seed: self.seed,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Args)]
pub struct SphereArgs {
    #[arg(short)]
    pub d: u32,
    #[arg(short)]
    pub k: u32,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub delta: f64,
    /// Nodes per factor; searched for when absent.
    #[arg(short)]
    pub n: Option<usize>,
    /// Check every box against reference integration; exit 2 on failure.
    #[arg(long)]
    pub verify: bool,
    /// Also write every point (points.txt).
    #[arg(long, requires = "out")]
    pub points: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CylinderArgs {
    #[arg(short)]
    pub d: u32,
    #[arg(short)]
    pub k: u32,
    #[arg(short = 'L')]
    pub l: f64,
    #[arg(short = 'W')]
    pub w: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(short)]
    pub n: Option<usize>,
    #[arg(long)]
    pub verify: bool,
    #[arg(long, requires = "out")]
    pub points: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RandcubeArgs {
    /// Experiment config (JSON object or array of objects).
    pub config_file: PathBuf,
    /// Results log; records are appended, one JSON object per line.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, requires_all = ["nodes", "k"], conflicts_with = "bundle")]
    pub measure: Option<PathBuf>,
    /// Node list, one number per line.
    #[arg(long, requires = "measure")]
    pub nodes: Option<PathBuf>,
    #[arg(short)]
    pub k: Option<u32>,
    #[arg(long, default_value_t = RESIDUAL_TOL)]
    pub tol: f64,
    /// Cubature bundle written by `sphere` or `cylinder`.
    #[arg(long, required_unless_present = "measure")]
    pub bundle: Option<PathBuf>,
    #[command(flatten)]
    pub check: CheckArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Context {
    pool: ThreadPool,
    constants: Constants,
    start: Instant,
}

impl Context {
    fn finish(&self, art: Artifacts, name: &str, params: serde_json::Value) -> Result<()> {
        let secs = self.start.elapsed().as_secs_f64();
        art.finish(name, params, self.pool.current_num_threads(), secs)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let pool = parallel::pool(cli.threads)?;
    let loaded = load_constants(cli.config.as_deref())?;
    let source = loaded.source;
    let ctx = Context {
        pool,
        constants: loaded.constants,
        start,
    };
    let config_input = |art: &mut Artifacts| {
        if let Some((p, bytes)) = &source {
            art.input(p, bytes);
        }
    };
    match cli.command {
        Command::Bounds(a) => bounds(&ctx, a),
        Command::Construct(a) => construct(&ctx, a),
        Command::Sphere(a) => sphere(&ctx, a, config_input),
        Command::Cylinder(a) => cylinder(&ctx, a, config_input),
        Command::Randcube(a) => randcube(&ctx, a),
        Command::Verify(a) => verify(&ctx, a, config_input),
    }
}

/// The measure pushed forward to `[0, 1]`; node counts are affine invariant.
fn unit_measure(m: &Measure1D) -> Result<Measure1D> {
    Ok(if m.support() == (0.0, 1.0) {
        m.clone()
    } else {
        m.affine_rescale(0.0, 1.0)?
    })
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    format_version: u32,
    measure_sha256: String,
    k: u32,
    support: (f64, f64),
    /// Upper bound of the measure rescaled to `[0, 1]`.
    upper: Option<UpperBoundReport>,
    referral: Option<String>,
    large_atom: Option<LargeAtomPlan>,
    /// Lower bounds at the largest odd degree `≤ k`.
    lower: Option<LowerBoundReport>,
    lower_le_upper: Option<bool>,
}

fn bounds(ctx: &Context, a: BoundsArgs) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    let mf = read_measure(&a.measure)?;
    art.input(&a.measure, &mf.bytes);
    let m = &mf.measure;
    let unit = unit_measure(m)?;
    let power_law = a.beta_c.zip(a.beta);
    let (upper, referral) = match upper_bound(&unit, a.k, power_law) {
        Ok(r) => (Some(r), None),
        Err(Error::Construction(msg)) => (
            None,
            Some(format!("{msg} (pass --eps EPS to bounds or construct)")),
        ),
        Err(e) => return Err(e.into()),
    };
    let large_atom = a
        .eps
        .map(|eps| large_atom_plan(&unit, a.k as usize, eps))
        .transpose()?;
    let kl = if a.k % 2 == 1 { a.k } else { a.k - 1 };
    let lower = if kl >= 3 {
        Some(lower_bound(m, kl)?)
    } else {
        None
    };
    let best_lower = lower
        .as_ref()
        .map(|l| l.moment_bound.max(l.bernstein_bound.unwrap_or(0.0)));
    let lower_le_upper = best_lower
        .zip(upper.as_ref())
        .map(|(lo, up)| lo <= up.n_guaranteed);

    let report = BoundsReport {
        format_version: FORMAT_VERSION,
        measure_sha256: chebyquad_core::verify::sha256_hex(&m.fingerprint()),
        k: a.k,
        support: m.support(),
        upper,
        referral,
        large_atom,
        lower,
        lower_le_upper,
    };
    art.write("bounds.json", &to_pretty_json(&report))?;

    let mut line = format!("bounds k={}:", a.k);
    if let Some(l) = &report.lower {
        line += &format!(" lower (k={}) moment {:?}", l.k, l.moment_bound);
        if let Some(b) = l.bernstein_bound {
            line += &format!(", Bernstein {b:?}");
        }
        line += ";";
    }
    match (&report.upper, &report.referral) {
        (Some(u), _) => line += &format!(" upper rho {:?}, n = {:?}", u.rho, u.n_guaranteed),
        (None, Some(msg)) => line += &format!(" {msg}"),
        _ => {}
    }
    if let Some(p) = &report.large_atom {
        line += &format!("; large-atom n = {:?}", p.n_required);
    }
    match report.lower_le_upper {
        Some(true) => line += " [lower <= upper]",
        Some(false) => line += " [WARNING: lower > upper]",
        None => {}
    }
    println!("{line}");
    ctx.finish(
        art,
        "bounds",
        json!({"measure": a.measure, "k": a.k, "beta": a.beta, "beta_c": a.beta_c, "eps": a.eps}),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct ConstructRecord {
    format_version: u32,
    /// Nodes in the output node list live on this interval; `result` refers to `[0, 1]`.
    support: (f64, f64),
    result: QuadratureResult,
    report: ResidualReport,
}

fn node_count(n: f64) -> Result<usize> {
    if n.is_finite() && n <= MAX_NODES {
        Ok(n as usize)
    } else {
        Err(CliError::Usage(format!(
            "the guaranteed node count {n:e} exceeds {MAX_NODES:e}; pass -n with --best-effort"
        )))
    }
}

fn construct(ctx: &Context, a: ConstructArgs) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    let mf = read_measure(&a.measure)?;
    art.input(&a.measure, &mf.bytes);
    let unit = unit_measure(&mf.measure)?;
    let k = a.k as usize;
    let mode = if a.best_effort {
        Mode::BestEffort
    } else {
        Mode::Guaranteed
    };
    let (n, res) = match a.eps {
        Some(eps) => {
            let plan = large_atom_plan(&unit, k, eps)?;
            let n = match a.n {
                Some(n) => n,
                None => node_count(plan.n_required)?,
            };
            (n, construct_quadrature_large_atoms(&unit, k, eps, n, mode)?)
        }
        None => {
            let n = match a.n {
                Some(n) => n,
                None => node_count(upper_bound(&unit, a.k, None)?.n_guaranteed)?,
            };
            (n, construct_for_measure(&unit, k, n, mode)?)
        }
    };
    let report = moment_residual(&res.nodes, &unit, a.k);
    let (lo, hi) = mf.measure.support();
    let nodes: Vec<f64> = if (lo, hi) == (0.0, 1.0) {
        res.nodes.clone()
    } else {
        res.nodes
            .iter()
            .map(|x| (lo + (hi - lo) * x).clamp(lo, hi))
            .collect()
    };
    art.write("nodes.txt", node_list(&nodes).as_bytes())?;
    let mode_name = match res.mode {
        Mode::Guaranteed => "guaranteed",
        Mode::BestEffort => "best_effort",
    };
    let ok = report.max <= RESIDUAL_TOL;
    println!(
        "construct k={} n={n}: mode {mode_name}, residual {:e} [{}]",
        a.k,
        report.max,
        if ok { "ok" } else { "FAIL" }
    );
    let record = ConstructRecord {
        format_version: FORMAT_VERSION,
        support: (lo, hi),
        result: res,
        report,
    };
    art.write("result.json", &to_pretty_json(&record))?;
    ctx.finish(
        art,
        "construct",
        json!({
            "measure": a.measure, "k": a.k, "n": n, "eps": a.eps,
            "mode": mode_name, "best_effort": record.result.mode == Mode::BestEffort,
        }),
    )?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "residual {:e} exceeds {RESIDUAL_TOL:e}",
            record.report.max
        )))
    }
}

fn sphere(ctx: &Context, a: SphereArgs, config_input: impl Fn(&mut Artifacts)) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    config_input(&mut art);
    let c = parallel::sphere_cubature(&ctx.pool, a.d, a.k, a.tau, a.delta, a.n)?;
    println!(
        "sphere d={} k={} tau={} delta={}: {} boxes, n = {} per factor ({} points per box), mass {:?}",
        a.d,
        a.k,
        a.tau,
        a.delta,
        c.box_count(),
        c.n,
        c.nodes_per_box(),
        c.partition.total_mass()
    );
    if a.points {
        art.write(
            "points.txt",
            point_list(c.box_count(), |i| c.box_points(i)).as_bytes(),
        )?;
    }
    let verification = if a.verify {
        let v = verify_sphere(&ctx.pool, &c, &ctx.constants, a.check.options())?;
        print_check(
            v.report.max_monomial_error,
            v.report.max_shifted_error,
            c.delta,
            &v.failures,
        );
        art.write("verify.json", &to_pretty_json(&v))?;
        Some(v.failures)
    } else {
        None
    };
    art.write("bundle.json", &Bundle::new(Cubature::Sphere(c)).to_json())?;
    ctx.finish(
        art,
        "sphere",
        json!({
            "d": a.d, "k": a.k, "tau": a.tau, "delta": a.delta, "n": a.n,
            "verify": a.verify, "points": a.points, "check": a.check.options(),
        }),
    )?;
    verdict(verification)
}

fn cylinder(ctx: &Context, a: CylinderArgs, config_input: impl Fn(&mut Artifacts)) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    config_input(&mut art);
    let cc = ctx
        .constants
        .cylinder(a.d)
        .ok_or_else(|| Error::Parameter(format!("no frozen cylinder constants for d = {}", a.d)))?;
    let spec = CylinderSpec {
        d: a.d,
        k: a.k,
        l: a.l,
        w: a.w,
        tau: a.tau,
        delta: a.delta,
    };
    let c = parallel::cylinder_cubature(&ctx.pool, &spec, cc.min_length * a.w, a.n)?;
    println!(
        "cylinder d={} k={} L={} W={} tau={} delta={}: {} cells, n = {} per factor ({} points per cell)",
        a.d,
        a.k,
        a.l,
        a.w,
        a.tau,
        a.delta,
        c.cell_count(),
        c.n,
        c.nodes_per_cell()
    );
    if a.points {
        art.write(
            "points.txt",
            point_list(c.cell_count(), |i| c.cell_points(i)).as_bytes(),
        )?;
    }
    let verification = if a.verify {
        let v = verify_cylinder(&ctx.pool, &c, &ctx.constants, a.check.options())?;
        println!(
            "cell masses: target {:?}, max deviation {:e}; {} cells (limit {:.1}); coverage misses {}/{}",
            v.cell_mass_target, v.max_cell_mass_error, v.cell_count, v.count_limit, v.coverage_failures, a.check.samples
        );
        print_check(
            v.report.max_monomial_error,
            v.report.max_shifted_error,
            spec.delta,
            &v.failures,
        );
        art.write("verify.json", &to_pretty_json(&v))?;
        Some(v.failures)
    } else {
        None
    };
    art.write("bundle.json", &Bundle::new(Cubature::Cylinder(c)).to_json())?;
    ctx.finish(
        art,
        "cylinder",
        json!({
            "d": a.d, "k": a.k, "L": a.l, "W": a.w, "tau": a.tau, "delta": a.delta, "n": a.n,
            "min_length": cc.min_length * a.w, "verify": a.verify, "points": a.points,
            "check": a.check.options(),
        }),
    )?;
    verdict(verification)
}

fn print_check(mono: f64, shifted: f64, delta: f64, failures: &[String]) {
    println!(
        "verify: max error {mono:e} (monomials), {shifted:e} (shifted), delta {delta}: {}",
        if failures.is_empty() { "pass" } else { "FAIL" }
    );
    for f in failures.iter().take(5) {
        println!("  {f}");
    }
    if failures.len() > 5 {
        println!("  ... {} more", failures.len() - 5);
    }
}

fn verdict(failures: Option<Vec<String>>) -> Result<()> {
    match failures {
        Some(f) if !f.is_empty() => {
            let more = if f.len() > 1 {
                format!(" (and {} more)", f.len() - 1)
            } else {
                String::new()
            };
            Err(CliError::Verification(format!("{}{more}", f[0])))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

/// One experiment of a `randcube` config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub n: usize,
    pub k: u32,
    pub d: u32,
    pub eps: OneOrMany<f64>,
    pub reps: u64,
    pub seed: u64,
    /// Radius of the ball for the density probe near the origin.
    #[serde(default)]
    pub density_bin: Option<f64>,
}

impl Experiment {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.n == 0 || self.k == 0 || self.d == 0 || self.reps == 0 {
            return Err("n, k, d and reps must be positive".into());
        }
        if self
            .eps
            .to_vec()
            .iter()
            .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err("eps values must be finite and non-negative".into());
        }
        if self
            .density_bin
            .is_some_and(|r| !(r > 0.0 && r.is_finite()))
        {
            return Err("density_bin must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    One(Experiment),
    Many(Vec<Experiment>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    SmallBall(SmallBallEstimate),
    Density(DensityEstimate),
}

/// One line of the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub format_version: u32,
    pub config_sha256: String,
    pub experiment: usize,
    #[serde(flatten)]
    pub estimate: Estimate,
}

fn randcube(ctx: &Context, a: RandcubeArgs) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    let bytes = read_bytes(&a.config_file)?;
    art.input(&a.config_file, &bytes);
    let experiments = match parse_json::<ConfigFile>(&a.config_file, &bytes)? {
        ConfigFile::One(e) => vec![e],
        ConfigFile::Many(v) => v,
    };
    for (i, e) in experiments.iter().enumerate() {
        e.validate().map_err(|msg| {
            CliError::Usage(format!(
                "{}: experiment {i}: {msg}",
                a.config_file.display()
            ))
        })?;
    }
    let config_sha256 = chebyquad_core::verify::sha256_hex(&bytes);
    let mut records = Vec::new();
    for (i, e) in experiments.iter().enumerate() {
        let dev = parallel::sup_deviations(&ctx.pool, e.n, e.k, e.d, e.reps, e.seed);
        for eps in e.eps.to_vec() {
            let est = small_ball_from_deviations(&dev, e.n, e.k, e.d, eps, e.seed);
            println!(
                "small ball n={} k={} d={} eps={eps}: {:?} in [{:?}, {:?}] ({} of {} reps)",
                e.n,
                e.k,
                e.d,
                est.estimate,
                est.ci_low,
                est.ci_high,
                est.hit_count,
                est.repetitions
            );
            records.push(LogRecord {
                format_version: FORMAT_VERSION,
                config_sha256: config_sha256.clone(),
                experiment: i,
                estimate: Estimate::SmallBall(est),
            });
        }
        if let Some(bin) = e.density_bin {
            let norms = parallel::euclidean_deviations(&ctx.pool, e.n, e.k, e.d, e.reps, e.seed);
            let est = density_from_norms(&norms, e.n, e.k, e.d, bin, e.seed);
            println!(
                "density n={} k={} d={} radius {bin}: {:?} in [{:?}, {:?}]",
                e.n, e.k, e.d, est.estimate, est.ci_low, est.ci_high
            );
            records.push(LogRecord {
                format_version: FORMAT_VERSION,
                config_sha256: config_sha256.clone(),
                experiment: i,
                estimate: Estimate::Density(est),
            });
        }
    }
    append_records(&a.log, &records)?;
    art.external_output(&a.log)?;
    ctx.finish(
        art,
        "randcube",
        json!({"config": a.config_file, "log": a.log, "experiments": experiments}),
    )
}

fn verify(ctx: &Context, a: VerifyArgs, config_input: impl Fn(&mut Artifacts)) -> Result<()> {
    let mut art = Artifacts::new(a.out.as_deref())?;
    if let Some(bundle_path) = &a.bundle {
        config_input(&mut art);
        let (bundle, bytes) = read_bundle(bundle_path)?;
        art.input(bundle_path, &bytes);
        let failures = match &bundle.cubature {
            Cubature::Sphere(c) => {
                let v = verify_sphere(&ctx.pool, c, &ctx.constants, a.check.options())?;
                println!("sphere bundle: {} boxes", c.box_count());
                print_check(
                    v.report.max_monomial_error,
                    v.report.max_shifted_error,
                    c.delta,
                    &v.failures,
                );
                art.write("verify.json", &to_pretty_json(&v))?;
                v.failures
            }
            Cubature::Cylinder(c) => {
                let v = verify_cylinder(&ctx.pool, c, &ctx.constants, a.check.options())?;
                println!("cylinder bundle: {} cells", c.cell_count());
                print_check(
                    v.report.max_monomial_error,
                    v.report.max_shifted_error,
                    c.spec.delta,
                    &v.failures,
                );
                art.write("verify.json", &to_pretty_json(&v))?;
                v.failures
            }
        };
        ctx.finish(
            art,
            "verify",
            json!({"bundle": bundle_path, "check": a.check.options()}),
        )?;
        return verdict(Some(failures));
    }

    let (Some(measure_path), Some(nodes_path), Some(k)) = (&a.measure, &a.nodes, a.k) else {
        return Err(CliError::Usage(
            "verify needs --bundle, or --measure, --nodes and -k".into(),
        ));
    };
    let mf = read_measure(measure_path)?;
    art.input(measure_path, &mf.bytes);
    let nbytes = read_bytes(nodes_path)?;
    art.input(nodes_path, &nbytes);
    let nodes = parse_node_list(nodes_path, &nbytes)?;
    if nodes.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no nodes",
            nodes_path.display()
        )));
    }
    let report = residual_on_unit(&mf.measure, &nodes, k)?;
    let ok = report.max <= a.tol;
    println!(
        "verify k={k} n={}: residual {:e}, tolerance {:e}: {}",
        nodes.len(),
        report.max,
        a.tol,
        if ok { "pass" } else { "FAIL" }
    );
    art.write("verify.json", &to_pretty_json(&report))?;
    ctx.finish(
        art,
        "verify",
        json!({"measure": measure_path, "nodes": nodes_path, "k": k, "tol": a.tol}),
    )?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "residual {:e} exceeds {:e}",
            report.max, a.tol
        )))
    }
}

/// Residual of `nodes` against `m`, both pushed forward to `[0, 1]`.
pub fn residual_on_unit(m: &Measure1D, nodes: &[f64], k: u32) -> Result<ResidualReport> {
    let (lo, hi) = m.support();
    if (lo, hi) == (0.0, 1.0) {
        return Ok(moment_residual(nodes, m, k));
    }
    let unit = m.affine_rescale(0.0, 1.0)?;
    let scaled: Vec<f64> = nodes.iter().map(|x| (x - lo) / (hi - lo)).collect();
    Ok(moment_residual(&scaled, &unit, k))
}
