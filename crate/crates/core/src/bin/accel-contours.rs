use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use accel_contours::compare::{compare, default_inits, write_compare_csv};
use accel_contours::energies::EnergyKind;
use accel_contours::flows::{circle_ode_oracle, FlowConfig, Method, OracleModel};
use accel_contours::io::{encode_pgm_ascii, run_segment, write_pgm, Backend, Input, RunConfig};
use accel_contours::levelset::Shape;
use accel_contours::scene::{generate_scene, SceneKind, SceneSpec};
use accel_contours::verify::run_verify_suite;
use accel_contours::Error;

#[derive(Parser)]
#[command(name = "accel-contours", version, about = "Accelerated active contours on images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image with one flow.
    Segment(SegmentArgs),
    /// Write the reference radius trajectory of a circle under constant force.
    Oracle(OracleArgs),
    /// Run the derivation identity checks.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write a synthetic scene as PGM.
    Scene(SceneArgs),
    /// Final energies of gradient descent and the accelerated flows from
    /// several starting contours.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gradient,
    Sobolev,
    AccelConst,
    AccelFlowable,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gradient => Method::Gradient,
            MethodArg::Sobolev => Method::Sobolev,
            MethodArg::AccelConst => Method::AccelConst,
            MethodArg::AccelFlowable => Method::AccelFlowable,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Parametric,
    Levelset,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Parametric => Backend::Parametric,
            BackendArg::Levelset => Backend::Levelset,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnergyArg {
    ChanVese,
    Geodesic,
}

impl From<EnergyArg> for EnergyKind {
    fn from(e: EnergyArg) -> Self {
        match e {
            EnergyArg::ChanVese => EnergyKind::ChanVese,
            EnergyArg::Geodesic => EnergyKind::Geodesic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    NoisySquare,
    NoisyRectangle,
    Disk,
}

impl From<KindArg> for SceneKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::NoisySquare => SceneKind::NoisySquare,
            KindArg::NoisyRectangle => SceneKind::NoisyRectangle,
            KindArg::Disk => SceneKind::Disk,
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// PGM image to segment instead of the configured input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    energy: Option<EnergyArg>,
    /// Initial contour as JSON, e.g. '{"shape":"circle","center":[128,128],"radius":40}'.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    /// Velocity diffusion coefficient.
    #[arg(long)]
    tau: Option<f64>,
    /// Stochastic forcing coefficient.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "constant")]
    model: ModelArg,
    #[arg(long, default_value_t = 60.0)]
    r0: f64,
    /// Constant normal force.
    #[arg(long, default_value_t = 0.05)]
    force: f64,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 40.0)]
    t_end: f64,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Constant,
    Flowable,
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, value_enum, default_value = "noisy-square")]
    kind: KindArg,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 1.0)]
    contrast: f64,
    #[arg(long, default_value_t = 0.35)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write ASCII (P2) instead of binary (P5).
    #[arg(long)]
    ascii: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum, default_value = "noisy-rectangle")]
    kind: KindArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.35)]
    noise_std: f64,
    #[arg(long, value_enum, default_value = "levelset")]
    backend: BackendArg,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Failures split into configuration problems (exit 2) and runtime ones
/// (exit 1).
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn segment(a: SegmentArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig {
            input: Input::Scene(SceneSpec {
                kind: SceneKind::NoisyRectangle,
                ..Default::default()
            }),
            method: Method::AccelConst,
            backend: Backend::Levelset,
            energy: EnergyKind::ChanVese,
            flow: FlowConfig::default(),
            init: default_inits().swap_remove(0),
            marker_spacing: 1.0,
            outputs: PathBuf::from("out"),
        },
    };
    if let Some(p) = a.input {
        cfg.input = Input::Path(p);
    }
    if let Some(m) = a.method {
        cfg.method = m.into();
    }
    if let Some(b) = a.backend {
        cfg.backend = b.into();
    }
    if let Some(e) = a.energy {
        cfg.energy = e.into();
    }
    if let Some(s) = a.init {
        cfg.init = serde_json::from_str::<Shape>(&s).map_err(|e| usage(format!("--init: {e}")))?;
    }
    let f = &mut cfg.flow;
    let overrides: [(Option<f64>, &mut f64); 6] = [
        (a.k, &mut f.k),
        (a.lambda, &mut f.lambda_action),
        (a.rho, &mut f.rho0),
        (a.g, &mut f.g),
        (a.tau, &mut f.tau_diff),
        (a.noise, &mut f.tau_noise),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(n) = a.steps {
        f.max_steps = n;
    }
    if let Some(s) = a.seed {
        f.seed = s;
    }
    if let Some(o) = a.out {
        cfg.outputs = o;
    }
    cfg.validate().map_err(usage)?;
    if let Input::Path(p) = &cfg.input {
        if !p.exists() {
            return Err(usage(format!("input image {} does not exist", p.display())));
        }
    }
    let out = run_segment(&cfg)?;
    println!(
        "{} steps, final energy {:.6}, stop: {:?}",
        out.log.len(),
        out.energy,
        out.stop
    );
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), Failure> {
    let cfg = FlowConfig {
        k: a.k,
        lambda_action: a.lambda,
        rho0: a.rho,
        t0: Some(a.t0),
        ..Default::default()
    };
    if !(a.t_end > a.t0) || a.samples < 2 {
        return Err(usage("need t-end > t0 and at least 2 samples"));
    }
    let times: Vec<f64> = (0..a.samples)
        .map(|i| a.t0 + (a.t_end - a.t0) * i as f64 / (a.samples - 1) as f64)
        .collect();
    let model = match a.model {
        ModelArg::Constant => OracleModel::ConstantDensity,
        ModelArg::Flowable => OracleModel::Flowable,
    };
    let traj = circle_ode_oracle(a.r0, a.force, &cfg, model, &times, 1e-10).map_err(|e| match e {
        Error::InvalidParameter(_) => usage(e),
        e => Failure::Runtime(e),
    })?;
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    w.write_record(["t", "r", "beta", "rho"]).map_err(Error::from)?;
    for s in &traj.samples {
        w.write_record([s.t, s.r, s.beta, s.rho].map(|v| v.to_string()))
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    match traj.shock_time {
        Some(t) => println!("{} samples, radius collapsed at t = {t}", traj.samples.len()),
        None => println!("{} samples", traj.samples.len()),
    }
    Ok(())
}

fn verify(seed: u64) -> Result<bool, Failure> {
    let checks = run_verify_suite(seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn scene(a: SceneArgs) -> Result<(), Failure> {
    let spec = SceneSpec {
        kind: a.kind.into(),
        size: a.size,
        contrast: a.contrast,
        noise_std: a.noise_std,
        seed: a.seed,
        shape: None,
    };
    spec.validate().map_err(usage)?;
    let img = generate_scene(&spec)?;
    if a.ascii {
        std::fs::write(&a.out, encode_pgm_ascii(&img)).map_err(Error::from)?;
    } else {
        write_pgm(&img, &a.out)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<(), Failure> {
    let spec = SceneSpec {
        kind: a.kind.into(),
        noise_std: a.noise_std,
        seed: a.seed,
        ..Default::default()
    };
    spec.validate().map_err(usage)?;
    let img = generate_scene(&spec)?;
    let cfg = FlowConfig {
        max_steps: a.steps,
        ..Default::default()
    };
    let rows = compare(
        &img,
        &default_inits(),
        &[Method::Gradient, Method::AccelConst],
        a.backend.into(),
        EnergyKind::ChanVese,
        &cfg,
    )?;
    for r in &rows {
        println!("init {} {:?}: energy {:.1} after {} steps ({})", r.init, r.method, r.energy, r.steps, r.stop);
    }
    write_compare_csv(&rows, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn report(r: Result<(), Failure>) -> ExitCode {
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("run `accel-contours --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Segment(a) => report(segment(a)),
        Command::Oracle(a) => report(oracle(a)),
        Command::Verify { seed } => match verify(seed) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => report(Err(e)),
        },
        Command::Scene(a) => report(scene(a)),
        Command::Compare(a) => report(compare_cmd(a)),
    }
}
