use rand::Rng;
use rand_distr::StandardNormal;

use crate::energies::{mass_potential_forces, ForceField};
use crate::error::{Error, Result};
use crate::geometry::{compute_frame, dual_lengths, resample_arclength, CurveFrame, MarkerCurve};
use crate::vec2::Vec2;

use super::gradient::shock;
use super::{channel, check_force, FlowConfig, FlowState};

/// Turning angle (as a cosine) beyond which consecutive segments count as
/// folded over.
const FOLD_COS: f64 = -0.5;

/// Second arclength derivative, three-point nonuniform.
fn d2_ds2<T>(frame: &CurveFrame, q: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = q.len();
    (0..n)
        .map(|i| {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let (h1, h2) = (frame.seg[im], frame.seg[i]);
            let fwd = (q[ip] - q[i]) * (1.0 / h2);
            let back = (q[i] - q[im]) * (1.0 / h1);
            (fwd - back) * (2.0 / (h1 + h2))
        })
        .collect()
}

/// Clock value for this step, starting it when the state is at rest.
fn clock(state: &FlowState, cfg: &FlowConfig, dt_at: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if state.t > 0.0 {
        Ok(state.t)
    } else {
        cfg.start_time(dt_at)
    }
}

/// Checks the moved curve for shocks, resamples on schedule and advances
/// the clock.
fn finish(
    state: &FlowState,
    curve: MarkerCurve,
    t: f64,
    dt: f64,
    h: f64,
    cfg: &FlowConfig,
) -> Result<FlowState> {
    let t = t + dt;
    detect_shock(&curve, h, t)?;
    let mut next = FlowState {
        curve,
        t,
        step: state.step + 1,
        target_spacing: state.target_spacing,
        rng: state.rng.clone(),
    };
    if next.step % cfg.resample_every == 0 {
        next.curve = resample_arclength(&next.curve, next.resample_count())?;
    }
    Ok(next)
}

fn detect_shock(curve: &MarkerCurve, h: f64, t: f64) -> Result<()> {
    if curve.points.iter().any(|p| !p.is_finite()) {
        return Err(Error::Shock {
            t,
            reason: "non-finite marker position".into(),
        });
    }
    curve.validate().map_err(|e| shock(t, e))?;
    let pts = &curve.points;
    let n = pts.len();
    for i in 0..n {
        let a = pts[i] - pts[(i + n - 1) % n];
        let b = pts[(i + 1) % n] - pts[i];
        let (la, lb) = (a.norm(), b.norm());
        if la < 1e-3 * h || lb < 1e-3 * h {
            return Err(Error::Shock {
                t,
                reason: format!("markers collapsed near index {i}"),
            });
        }
        if a.dot(b) < FOLD_COS * la * lb {
            return Err(Error::Shock {
                t,
                reason: format!("curve folded over at marker {i}"),
            });
        }
    }
    Ok(())
}

/// One step of the constant-density accelerated flow
///
/// `d beta/dt = (lambda k^2 t^{k-2} / rho) f + beta^2 kappa / 2 - (k+1)/t beta
///  + tau beta_ss + tau_noise W`, `dC/dt = beta N`.
///
/// The speed is updated first and the markers move with the new speed.
/// Curvature is clamped to twice the inverse marker spacing.
pub fn accel_const_step(state: &FlowState, force: &ForceField, cfg: &FlowConfig) -> Result<FlowState> {
    cfg.validate()?;
    let n = state.curve.len();
    let beta = channel(&state.curve.beta, "beta", n)?;
    check_force(&force.values, n)?;
    let frame = compute_frame(&state.curve)?;
    let kappa = frame.clamped_kappa();
    let h = frame.mean_spacing();
    let beta_ss = if cfg.tau_diff > 0.0 {
        d2_ds2(&frame, beta)
    } else {
        vec![0.0; n]
    };
    let drive_terms = |t: f64| -> Vec<f64> {
        let c = cfg.drive(t) / cfg.rho0;
        (0..n)
            .map(|i| c * force.values[i] + 0.5 * beta[i] * beta[i] * kappa[i] + cfg.tau_diff * beta_ss[i])
            .collect()
    };
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let speed = max_abs(beta);
    let t = clock(state, cfg, |t| cfg.accel_dt(0.0, h, speed, max_abs(&drive_terms(t))))?;
    let drive = drive_terms(t);
    let dt = cfg.accel_dt(t, h, speed, max_abs(&drive))?;
    let fr = cfg.friction(t);

    let mut rng = state.rng.clone();
    let noise_scale = cfg.tau_noise * dt.sqrt();
    let new_beta: Vec<f64> = (0..n)
        .map(|i| {
            let mut b = beta[i] + dt * (drive[i] - fr * beta[i]);
            if cfg.tau_noise > 0.0 {
                let eta: f64 = rng.sample(StandardNormal);
                b += noise_scale * eta;
            }
            b
        })
        .collect();
    let points = (0..n)
        .map(|i| state.curve.points[i] + frame.normal[i] * (dt * new_beta[i]))
        .collect();
    let curve = MarkerCurve {
        points,
        beta: Some(new_beta),
        ..state.curve.clone()
    };
    let mut next = finish(state, curve, t, dt, h, cfg)?;
    next.rng = rng;
    Ok(next)
}

/// One step of the flowable-mass accelerated flow.
///
/// The velocity `V = v T + beta N` is the primary unknown:
/// `dV/dt = (lambda k^2 t^{k-2} / rho) f N - v V_s - (k+1)/t V + tau V_ss
///  + tau_noise W`, markers move with the normal part `(V.N) N` only, and
/// the marker masses `rho ds` are exchanged through upwind fluxes of
/// `rho v`, so the total mass is conserved to round-off.
pub fn accel_flowable_step(
    state: &FlowState,
    force: &ForceField,
    cfg: &FlowConfig,
) -> Result<FlowState> {
    cfg.validate()?;
    let curve = &state.curve;
    let n = curve.len();
    let beta = channel(&curve.beta, "beta", n)?;
    let v = channel(&curve.v, "v", n)?;
    let rho = channel(&curve.rho, "rho", n)?;
    check_force(&force.values, n)?;
    if let Some((i, &r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::DensityBreach { index: i, rho: r });
    }
    let frame = compute_frame(curve)?;
    let h = frame.mean_spacing();
    let ds = frame.ds();
    let vel: Vec<Vec2> = (0..n)
        .map(|i| frame.tangent[i] * v[i] + frame.normal[i] * beta[i])
        .collect();
    let mu: Vec<f64> = rho.iter().zip(&ds).map(|(r, d)| r * d).collect();

    // terms not scaled by the drive coefficient
    let mut transport: Vec<Vec2> = (0..n)
        .map(|i| {
            let vs = if v[i] > 0.0 {
                let im = (i + n - 1) % n;
                (vel[i] - vel[im]) / frame.seg[im]
            } else {
                (vel[(i + 1) % n] - vel[i]) / frame.seg[i]
            };
            -(vs * v[i])
        })
        .collect();
    if cfg.tau_diff > 0.0 {
        for (a, d) in transport.iter_mut().zip(d2_ds2(&frame, &vel)) {
            *a += d * cfg.tau_diff;
        }
    }
    // force per unit mass, before the drive coefficient
    let mut per_mass: Vec<Vec2> = (0..n)
        .map(|i| frame.normal[i] * (force.values[i] / rho[i]))
        .collect();
    if cfg.g > 0.0 {
        for (a, m) in per_mass.iter_mut().zip(mass_potential_accel(curve, &frame, &mu, cfg.g)?) {
            *a += m;
        }
    }
    let drive_terms = |t: f64| -> Vec<Vec2> {
        let c = cfg.drive(t);
        (0..n).map(|i| per_mass[i] * c + transport[i]).collect()
    };
    let max_norm = |v: &[Vec2]| v.iter().fold(0.0_f64, |m, x| m.max(x.norm()));
    let speed = max_norm(&vel);
    let t = clock(state, cfg, |t| cfg.accel_dt(0.0, h, speed, max_norm(&drive_terms(t))))?;
    let drive = drive_terms(t);
    // interface speeds of the mass exchange
    let face: Vec<f64> = (0..n).map(|i| 0.5 * (v[i] + v[(i + 1) % n])).collect();
    let mut dt = cfg.accel_dt(t, h, speed, max_norm(&drive))?;
    if cfg.fixed_dt.is_none() {
        // no marker may lose more than half its mass in one step
        for i in 0..n {
            let out = face[i].max(0.0) + (-face[(i + n - 1) % n]).max(0.0);
            if out > 0.0 {
                dt = dt.min(0.5 * ds[i] / out);
            }
        }
    }
    let fr = cfg.friction(t);

    let mut rng = state.rng.clone();
    let noise_scale = cfg.tau_noise * dt.sqrt();
    let new_vel: Vec<Vec2> = (0..n)
        .map(|i| {
            let mut w = vel[i] + (drive[i] - vel[i] * fr) * dt;
            if cfg.tau_noise > 0.0 {
                let ex: f64 = rng.sample(StandardNormal);
                let ey: f64 = rng.sample(StandardNormal);
                w += Vec2::new(ex, ey) * noise_scale;
            }
            w
        })
        .collect();

    // conservative upwind exchange of mass between neighbouring markers
    let flux: Vec<f64> = (0..n)
        .map(|i| face[i] * if face[i] > 0.0 { rho[i] } else { rho[(i + 1) % n] })
        .collect();
    let new_mu: Vec<f64> = (0..n)
        .map(|i| mu[i] - dt * (flux[i] - flux[(i + n - 1) % n]))
        .collect();

    let points: Vec<Vec2> = (0..n)
        .map(|i| {
            let nn = frame.normal[i];
            curve.points[i] + nn * (dt * new_vel[i].dot(nn))
        })
        .collect();
    let moved = MarkerCurve::new(points.clone()).map_err(|e| shock(t + dt, e))?;
    let new_frame = compute_frame(&moved).map_err(|e| shock(t + dt, e))?;
    let new_ds = new_frame.ds();
    let mut new_rho = Vec::with_capacity(n);
    for i in 0..n {
        let r = new_mu[i] / new_ds[i];
        if !(r > 0.0) {
            return Err(Error::DensityBreach { index: i, rho: r });
        }
        new_rho.push(r);
    }
    let next_curve = MarkerCurve {
        points,
        beta: Some((0..n).map(|i| new_vel[i].dot(new_frame.normal[i])).collect()),
        v: Some((0..n).map(|i| new_vel[i].dot(new_frame.tangent[i])).collect()),
        rho: Some(new_rho),
        alpha: curve.alpha.clone(),
    };
    let mut next = finish(state, next_curve, t, dt, h, cfg)?;
    next.rng = rng;
    Ok(next)
}

/// Acceleration per unit drive coefficient produced by the mass potential.
///
/// Shape part: the normal component of `-dU/dx_j` taken at fixed marker
/// masses, divided by the marker mass. Redistribution part: the pressure
/// `-d/ds (dU/d mu) = -g L rho_s` along the tangent, which moves mass
/// towards uniform density.
fn mass_potential_accel(
    curve: &MarkerCurve,
    frame: &CurveFrame,
    mu: &[f64],
    g: f64,
) -> Result<Vec<Vec2>> {
    let n = curve.len();
    let rho = channel(&curve.rho, "rho", n)?;
    let forces = mass_potential_forces(curve, g)?;
    let length = frame.length;
    let unit: Vec<Vec2> = (0..n)
        .map(|i| (curve.points[(i + 1) % n] - curve.points[i]) / frame.seg[i])
        .collect();
    let rho_s = frame.d_ds(rho);
    Ok((0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            // d rho_i / d x_j at fixed mass contributes g L rho_i^2 d(ds_i)/dx_j
            let chain = (unit[jm] * (rho[j] * rho[j] + rho[jm] * rho[jm])
                - unit[j] * (rho[j] * rho[j] + rho[jp] * rho[jp]))
                * (0.5 * g * length);
            let f = forces.position_force[j] + chain;
            let nn = frame.normal[j];
            nn * (f.dot(nn) / mu[j]) - frame.tangent[j] * (g * length * rho_s[j])
        })
        .collect())
}

/// Kinetic energy `sum rho |V|^2 ds / 2`; the constant density `rho0` is
/// used when the curve has no density channel.
pub fn kinetic_energy(curve: &MarkerCurve, rho0: f64) -> f64 {
    let n = curve.len();
    let ds = curve.dual_lengths();
    (0..n)
        .map(|i| {
            let b = curve.beta.as_ref().map_or(0.0, |b| b[i]);
            let v = curve.v.as_ref().map_or(0.0, |v| v[i]);
            let r = curve.rho.as_ref().map_or(rho0, |r| r[i]);
            0.5 * r * (b * b + v * v) * ds[i]
        })
        .sum()
}

/// Marker masses `mu = rho |C_p|` and parameter-rate flow `xi = v / |C_p|`,
/// taking the marker index as the parameter (so `|C_p|` is the dual length).
pub fn to_parameter_frame(curve: &MarkerCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = curve.len();
    let rho = channel(&curve.rho, "rho", n)?;
    let v = channel(&curve.v, "v", n)?;
    let ds = dual_lengths(&curve.points);
    Ok((
        rho.iter().zip(&ds).map(|(r, d)| r * d).collect(),
        v.iter().zip(&ds).map(|(v, d)| v / d).collect(),
    ))
}

/// Inverse of [`to_parameter_frame`]: returns `(rho, v)`.
pub fn from_parameter_frame(points: &[Vec2], mu: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ds = dual_lengths(points);
    (
        mu.iter().zip(&ds).map(|(m, d)| m / d).collect(),
        xi.iter().zip(&ds).map(|(x, d)| x * d).collect(),
    )
}
