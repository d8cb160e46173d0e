//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use accel_contours::compare::{compare, default_inits, energies_of};
use accel_contours::energies::{EnergyKind, ForceField};
use accel_contours::flows::{
    accel_const_step, accel_flowable_step, circle_ode_oracle, kinetic_energy, nesterov_reference,
    run_flow, sobolev_smooth, FlowConfig, FlowState, Method, OracleModel, RunLog,
};
use accel_contours::geometry::{compute_frame, hausdorff, MarkerCurve};
use accel_contours::grid::GridField;
use accel_contours::io::{run_log_csv, run_segment, Backend, Input, RunConfig};
use accel_contours::levelset::{
    accel_const_ls_step, extract_contour, init_signed_distance, run_levelset, ExtendedState, Shape,
};
use accel_contours::scene::{generate_scene, SceneKind, SceneSpec};
use accel_contours::verify::run_verify_suite;
use accel_contours::{Result, Vec2};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

const R0: f64 = 60.0;
const FORCE: f64 = 0.05;
const CENTER: Vec2 = Vec2 { x: 128.0, y: 128.0 };

fn mean_radius(points: &[Vec2]) -> f64 {
    points.iter().map(|p| (*p - CENTER).norm()).sum::<f64>() / points.len() as f64
}

/// Worst relative radius error against the oracle over `(t, r)` samples.
fn oracle_error(cfg: &FlowConfig, ts: &[f64], rs: &[f64]) -> Result<f64> {
    let tr = circle_ode_oracle(R0, FORCE, cfg, OracleModel::ConstantDensity, ts, 1e-10)?;
    Ok(tr
        .samples
        .iter()
        .zip(rs)
        .map(|(s, r)| (r - s.r).abs() / s.r)
        .fold(0.0, f64::max))
}

/// A circle of radius 60 under constant force shrinks until the radius
/// collapses; both backends are followed until the radius reaches a fifth of
/// its start, safely before the collapse.
fn circle_oracle() -> Result<Outcome> {
    let cfg = FlowConfig {
        t0: Some(0.05),
        ..Default::default()
    };
    let stop_radius = 0.2 * R0;

    let clock = Instant::now();
    let mut s = FlowState::at_rest(MarkerCurve::circle(CENTER, R0, 2048)?, Method::AccelConst, &cfg);
    let (mut ts, mut rs) = (Vec::new(), Vec::new());
    loop {
        let f = ForceField::constant(s.curve.len(), FORCE, EnergyKind::ChanVese);
        s = accel_const_step(&s, &f, &cfg)?;
        let r = mean_radius(&s.curve.points);
        ts.push(s.t);
        rs.push(r);
        if r <= stop_radius {
            break;
        }
    }
    let marker_err = oracle_error(&cfg, &ts, &rs)?;
    let marker_time = clock.elapsed();
    let marker_t_end = s.t;

    let clock = Instant::now();
    let psi = init_signed_distance(
        &Shape::Circle {
            center: [CENTER.x, CENTER.y],
            radius: R0,
        },
        256,
        256,
    )?;
    let mut s = ExtendedState::at_rest(psi, Method::AccelConst, &cfg);
    let force = GridField::filled(256, 256, FORCE);
    let (mut ts, mut rs) = (Vec::new(), Vec::new());
    loop {
        s = accel_const_ls_step(&s, &force, &cfg)?;
        let r = mean_radius(&extract_contour(&s.psi)?.points);
        ts.push(s.t);
        rs.push(r);
        if r <= stop_radius {
            break;
        }
    }
    let grid_err = oracle_error(&cfg, &ts, &rs)?;
    let grid_time = clock.elapsed();

    let limit = Duration::from_secs(60);
    outcome(
        marker_err < 0.02 && grid_err < 0.03 && marker_time < limit && grid_time < limit,
        format!(
            "markers {:.2}% over t in [0.05, {marker_t_end:.1}] in {marker_time:.1?}; \
             grid {:.2}% over t in [0.05, {:.1}] in {grid_time:.1?} (limits 2%, 3%, 60 s)",
            100.0 * marker_err,
            100.0 * grid_err,
            s.t
        ),
    )
}

fn relative_mass_drift(log: &RunLog) -> f64 {
    let m0 = log.records[0].mass;
    log.records
        .iter()
        .map(|r| ((r.mass - m0) / m0).abs())
        .fold(0.0, f64::max)
}

/// Flowable runs on the noisy square, started from a circle around the square.
/// Velocity diffusion keeps the flowable dynamics stable on the noisy image.
fn mass_conservation() -> Result<Outcome> {
    let img = generate_scene(&SceneSpec {
        kind: SceneKind::NoisySquare,
        ..Default::default()
    })?;
    let init = Shape::Circle {
        center: [128.0, 128.0],
        radius: 100.0,
    };
    let cfg = FlowConfig {
        max_steps: 500,
        tau_diff: 10.0,
        ..Default::default()
    };
    let p = run_flow(&init.to_curve(1.0)?, &img, Method::AccelFlowable, EnergyKind::ChanVese, &cfg)?;
    let l = run_levelset(
        &init_signed_distance(&init, 256, 256)?,
        &img,
        Method::AccelFlowable,
        EnergyKind::ChanVese,
        &cfg,
    )?;
    let (dp, dl) = (relative_mass_drift(&p.log), relative_mass_drift(&l.log));
    let long = p.log.len() >= 500 && l.log.len() >= 500;
    outcome(
        long && dp < 1e-3 && dl < 1e-2,
        format!(
            "markers drift {dp:.2e} over {} steps, level set {dl:.2e} over {} steps (limits 1e-3, 1e-2)",
            p.log.len(),
            l.log.len()
        ),
    )
}

fn distinct_minima() -> Result<Outcome> {
    let clock = Instant::now();
    let img = generate_scene(&SceneSpec {
        kind: SceneKind::NoisyRectangle,
        seed: 1,
        ..Default::default()
    })?;
    let cfg = FlowConfig {
        max_steps: 1000,
        ..Default::default()
    };
    let rows = compare(
        &img,
        &default_inits(),
        &[Method::Gradient, Method::AccelConst],
        Backend::Levelset,
        EnergyKind::ChanVese,
        &cfg,
    )?;
    let grad = energies_of(&rows, Method::Gradient);
    let accel = energies_of(&rows, Method::AccelConst);
    let mut closest = f64::INFINITY;
    for i in 0..grad.len() {
        for j in i + 1..grad.len() {
            closest = closest.min((grad[i] - grad[j]).abs() / grad[i].min(grad[j]));
        }
    }
    let best = grad.iter().cloned().fold(f64::INFINITY, f64::min);
    let lower = accel.iter().filter(|&&e| e <= 0.8 * best).count();
    let elapsed = clock.elapsed();
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.0}")).collect::<Vec<_>>().join("/");
    outcome(
        closest > 0.05 && lower >= 2 && elapsed < Duration::from_secs(300),
        format!(
            "gradient {} (closest pair {:.1}% apart), accelerated {} ({lower}/3 at least 20% below {best:.0}) in {elapsed:.1?}",
            fmt(&grad),
            100.0 * closest,
            fmt(&accel)
        ),
    )
}

fn nesterov_rate() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 50;
    let b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    // A = B^T B / dim + 0.01 I
    let a: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let bb: f64 = (0..dim).map(|k| b[k][i] * b[k][j]).sum::<f64>() / dim as f64;
                    bb + if i == j { 0.01 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let mul = |x: &[f64]| -> Vec<f64> { a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect() };
    let energy = |x: &[f64]| 0.5 * x.iter().zip(mul(x)).map(|(p, q)| p * q).sum::<f64>();
    // largest eigenvalue by power iteration, padded against its error
    let mut v = vec![1.0; dim];
    let mut top = 0.0;
    for _ in 0..2000 {
        let w = mul(&v);
        top = w.iter().map(|q| q * q).sum::<f64>().sqrt();
        v = w.iter().map(|q| q / top).collect();
    }
    let beta = 1.001 * top;
    let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r2: f64 = x0.iter().map(|q| q * q).sum();
    let iterates = nesterov_reference(&mul, &x0, beta, 200);
    let mut worst = 0.0_f64;
    let mut worst_y = 0.0_f64;
    for (k, it) in iterates.iter().enumerate() {
        let n = (k + 1) as f64;
        let bound = 2.0 * beta * r2 / ((n + 1.0) * (n + 1.0));
        worst = worst.max(energy(&it.x) / bound);
        worst_y = worst_y.max(energy(&it.y) / bound);
    }
    outcome(
        worst <= 1.0,
        format!("largest E(x_n)/bound {worst:.3}, E(y_n)/bound {worst_y:.3} over n <= 200 (limit 1)"),
    )
}

fn sobolev_attenuation() -> Result<Outcome> {
    let lambda = FlowConfig::default().lambda_sobolev;
    let frame = compute_frame(&MarkerCurve::circle(CENTER, 40.0, 512)?)?;
    let l = frame.length;
    let mut worst = 0.0_f64;
    for mode in [1.0, 2.0, 4.0, 8.0] {
        let w = std::f64::consts::TAU * mode / l;
        let g: Vec<f64> = frame.s.iter().map(|s| (w * s).sin()).collect();
        let u = sobolev_smooth(&frame.seg, &g, lambda)?;
        let gain = u.iter().zip(&g).map(|(p, q)| p * q).sum::<f64>() / g.iter().map(|q| q * q).sum::<f64>();
        worst = worst.max((gain - 1.0 / (1.0 + lambda * w * w)).abs());
    }
    outcome(
        worst < 1e-3,
        format!("largest gain error {worst:.2e} for modes 1, 2, 4, 8 (limit 1e-3)"),
    )
}

fn identity_suite() -> Result<Outcome> {
    let checks = run_verify_suite(7)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks passed", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn kinetic_decay(method: Method) -> Result<(usize, f64)> {
    let cfg = FlowConfig {
        t0: Some(1.0),
        ..Default::default()
    };
    let n = 512;
    let th = |i: usize| std::f64::consts::TAU * i as f64 / n as f64;
    let mut curve = MarkerCurve::circle(CENTER, 50.0, n)?.with_beta((0..n).map(|i| 0.3 + 0.2 * th(i).cos()).collect());
    if method == Method::AccelFlowable {
        curve = curve.with_v((0..n).map(|i| 0.2 * (2.0 * th(i)).sin()).collect());
    }
    let mut s = FlowState::at_rest(curve, method, &cfg);
    let mut prev = kinetic_energy(&s.curve, cfg.rho0);
    let start = prev;
    let mut rises = 0;
    for _ in 0..500 {
        let f = ForceField::constant(s.curve.len(), 0.0, EnergyKind::ChanVese);
        s = match method {
            Method::AccelConst => accel_const_step(&s, &f, &cfg)?,
            _ => accel_flowable_step(&s, &f, &cfg)?,
        };
        let ke = kinetic_energy(&s.curve, cfg.rho0);
        if ke > prev * (1.0 + 1e-12) {
            rises += 1;
        }
        prev = ke;
    }
    Ok((rises, prev / start))
}

fn energy_dissipation() -> Result<Outcome> {
    let img = generate_scene(&SceneSpec {
        kind: SceneKind::NoisySquare,
        ..Default::default()
    })?;
    let cfg = FlowConfig {
        max_steps: 500,
        ..Default::default()
    };
    let init = MarkerCurve::circle(CENTER, 70.0, 440)?;
    let r = run_flow(&init, &img, Method::Gradient, EnergyKind::ChanVese, &cfg)?;
    let rises = r.log.energy_increases();
    let largest = rises.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    // the same flow without backtracking, reported for information only
    let unguarded = FlowConfig {
        energy_guard: false,
        ..cfg.clone()
    };
    let raw = run_flow(&init, &img, Method::Gradient, EnergyKind::ChanVese, &unguarded)?.log.energy_increases();
    let raw_largest = raw.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let (const_rises, const_ratio) = kinetic_decay(Method::AccelConst)?;
    let (flow_rises, flow_ratio) = kinetic_decay(Method::AccelFlowable)?;
    outcome(
        rises.len() <= 10 && largest < 1e-9 && const_rises == 0 && flow_rises == 0,
        format!(
            "gradient: {} energy rises (largest {largest:.1e}) in {} steps ({} rises up to {raw_largest:.1e} \
             without backtracking); with zero force the kinetic energy \
             rose {const_rises}x (constant density, final ratio {const_ratio:.2e}) and {flow_rises}x (flowable, {flow_ratio:.2e})",
            rises.len(),
            r.log.len(),
            raw.len()
        ),
    )
}

fn backend_equivalence() -> Result<Outcome> {
    let img = generate_scene(&SceneSpec {
        kind: SceneKind::Disk,
        noise_std: 0.0,
        ..Default::default()
    })?;
    let init = Shape::Circle {
        center: [120.0, 134.0],
        radius: 45.0,
    };
    let mut parts = Vec::new();
    let mut passed = true;
    for method in [Method::Gradient, Method::AccelConst, Method::AccelFlowable] {
        let mut worst = 0.0_f64;
        // the trajectory is compared every 25 steps
        for steps in [25, 50, 75, 100] {
            let cfg = FlowConfig {
                max_steps: steps,
                fixed_dt: Some(0.05),
                t0: Some(1.0),
                energy_guard: false,
                ..Default::default()
            };
            let p = run_flow(&init.to_curve(1.0)?, &img, method, EnergyKind::ChanVese, &cfg)?;
            let l = run_levelset(&init_signed_distance(&init, 256, 256)?, &img, method, EnergyKind::ChanVese, &cfg)?;
            passed &= p.log.len() == steps && l.log.len() == steps;
            worst = worst.max(hausdorff(&p.curve.points, &l.contour.points));
        }
        passed &= worst < 1.0;
        parts.push(format!("{method:?} {worst:.3} px"));
    }
    outcome(passed, format!("largest Hausdorff distance over 100 steps: {} (limit 1 px)", parts.join(", ")))
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut same = 0;
    let mut total = 0;
    for backend in [Backend::Parametric, Backend::Levelset] {
        for noise in [0.0, 0.05] {
            let cfg = RunConfig {
                input: Input::Scene(SceneSpec {
                    kind: SceneKind::NoisySquare,
                    size: 128,
                    seed: 4,
                    ..Default::default()
                }),
                method: Method::AccelFlowable,
                backend,
                energy: EnergyKind::ChanVese,
                flow: FlowConfig {
                    max_steps: 60,
                    tau_noise: noise,
                    tau_diff: 10.0,
                    seed: 11,
                    ..Default::default()
                },
                init: Shape::Circle {
                    center: [64.0, 64.0],
                    radius: 45.0,
                },
                marker_spacing: 1.0,
                outputs: dir.path().join("run"),
            };
            let a = run_log_csv(&run_segment(&cfg)?.log)?;
            let b = std::fs::read_to_string(dir.path().join("run/log.csv"))?;
            let c = run_log_csv(&run_segment(&cfg)?.log)?;
            total += 1;
            if a == b && a == c && a.lines().count() > 1 {
                same += 1;
            }
        }
    }
    outcome(
        same == total,
        format!("{same}/{total} repeated runs wrote identical run logs (both backends, with and without noise)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("1 circle oracle agreement", circle_oracle),
        ("2 mass conservation", mass_conservation),
        ("3 distinct gradient minima, lower accelerated energy", distinct_minima),
        ("4 Nesterov rate", nesterov_rate),
        ("5 Sobolev attenuation", sobolev_attenuation),
        ("6 identity suite", identity_suite),
        ("7 energy dissipation", energy_dissipation),
        ("8 backend equivalence", backend_equivalence),
        ("9 determinism", determinism),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!("{} criterion {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
