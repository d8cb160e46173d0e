//! Upwind Hamilton-Jacobi steppers for the level-set flows.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::energies::{chan_vese_force_grid, region_means, ImageGrid};
use crate::error::{Error, Result};
use crate::flows::FlowConfig;
use crate::grid::{GridField, GridVectorField};
use crate::vec2::Vec2;

use super::extend::{extend_field, extend_vector_field};
use super::sdf::reinitialize;
use super::{frame_from_outward, ExtendedState, LevelSetField};

/// Densities are floored at this fraction of `rho0` when dividing, so nodes
/// far from the front cannot produce unbounded accelerations.
const RHO_FLOOR: f64 = 1e-3;

/// Builds a grid by evaluating `f` at every node, rows in parallel.
pub(crate) fn par_grid(width: usize, height: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> GridField {
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = f(x, y);
        }
    });
    GridField { width, height, data }
}

fn par_vec_grid(width: usize, height: usize, f: impl Fn(usize, usize) -> Vec2 + Sync) -> GridVectorField {
    let mut xs = vec![0.0; width * height];
    let mut ys = vec![0.0; width * height];
    xs.par_chunks_mut(width)
        .zip(ys.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (rx, ry))| {
            for x in 0..width {
                let v = f(x, y);
                rx[x] = v.x;
                ry[x] = v.y;
            }
        });
    GridVectorField {
        x: GridField { width, height, data: xs },
        y: GridField { width, height, data: ys },
    }
}

/// Godunov approximation of `|grad psi|` for `psi_t + F |grad psi| = 0`,
/// where `speed` holds the outward normal speed `F` (only its sign matters).
/// One-sided differences are second-order ENO.
pub fn upwind_grad_norm(psi: &GridField, speed: &GridField) -> GridField {
    par_grid(psi.width, psi.height, |x, y| {
        let d = psi.one_sided_eno2(x, y);
        let sq = |a: f64| a * a;
        if speed.get(x, y) >= 0.0 {
            (sq(d.xm.max(0.0)) + sq(d.xp.min(0.0)) + sq(d.ym.max(0.0)) + sq(d.yp.min(0.0))).sqrt()
        } else {
            (sq(d.xm.min(0.0)) + sq(d.xp.max(0.0)) + sq(d.ym.min(0.0)) + sq(d.yp.max(0.0))).sqrt()
        }
    })
}

/// Image force extended to every node: the Chan-Vese force with level-set
/// curvature, or `phi kappa - grad phi . N` for the geodesic energy when an
/// edge map `phi` is given.
pub fn ls_force(
    field: &LevelSetField,
    image: &ImageGrid,
    phi: Option<&GridField>,
    alpha_len: f64,
) -> Result<GridField> {
    let kappa = field.curvature();
    match phi {
        None => {
            let (c1, c2) = region_means(image, &field.inside())?;
            Ok(chan_vese_force_grid(image, Some(&kappa), c1, c2, alpha_len))
        }
        Some(phi) => {
            let n = field.outward_normals();
            Ok(par_grid(phi.width, phi.height, |x, y| {
                let i = phi.idx(x, y);
                phi.get(x, y) * kappa.data[i] + phi.central_grad(x, y).dot(n.at(i))
            }))
        }
    }
}

fn check_force(f: &GridField, psi: &LevelSetField) -> Result<()> {
    if f.width != psi.width() || f.height != psi.height() {
        return Err(Error::ChannelLength {
            name: "force",
            got: f.len(),
            expected: psi.psi.len(),
        });
    }
    if !f.all_finite() {
        return Err(Error::NonFinite("force"));
    }
    Ok(())
}

/// Second derivative of `q` along the unit direction `d` at a node.
fn d2_along(q: &GridField, x: usize, y: usize, d: Vec2) -> f64 {
    let c = q.get(x, y);
    let g = |dx, dy| q.ghost(x, y, dx, dy);
    let qxx = g(1, 0) - 2.0 * c + g(-1, 0);
    let qyy = g(0, 1) - 2.0 * c + g(0, -1);
    let qxy = 0.25 * (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1));
    d.x * d.x * qxx + 2.0 * d.x * d.y * qxy + d.y * d.y * qyy
}

/// Advances the step counter and reinitialises on schedule.
fn finish(mut next: ExtendedState, cfg: &FlowConfig) -> Result<ExtendedState> {
    next.step += 1;
    if !next.psi.psi.all_finite() {
        return Err(Error::NonFinite("level-set function"));
    }
    if next.step % cfg.reinit_every == 0 {
        next.psi = reinitialize(&next.psi)?;
        if let Some(b) = &next.beta_hat {
            next.beta_hat = Some(extend_field(&next.psi, b));
        }
        if let Some(v) = &next.v_hat {
            next.v_hat = Some(extend_vector_field(&next.psi, v));
        }
        if let Some(r) = &next.rho_hat {
            next.rho_hat = Some(extend_field(&next.psi, r));
        }
    }
    Ok(next)
}

/// One explicit step of `psi_t = f |grad psi|`: the front moves along the
/// inward normal with speed `f`, the level-set image of the marker
/// gradient flow.
pub fn gradient_ls_step(
    state: &ExtendedState,
    f_hat: &GridField,
    dt: f64,
    cfg: &FlowConfig,
) -> Result<ExtendedState> {
    check_force(f_hat, &state.psi)?;
    let psi = &state.psi.psi;
    let outward = f_hat.map(|f| -f);
    let g = upwind_grad_norm(psi, &outward);
    let mut next = state.clone();
    for ((p, f), gn) in next.psi.psi.data.iter_mut().zip(&f_hat.data).zip(&g.data) {
        *p += dt * f * gn;
    }
    finish(next, cfg)
}

/// Clock for this step, starting it when the state is at rest.
fn clock(state: &ExtendedState, cfg: &FlowConfig, dt_at: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if state.t > 0.0 {
        Ok(state.t)
    } else {
        cfg.start_time(dt_at)
    }
}

fn axpy(y: &GridField, a: f64, x: &GridField) -> GridField {
    GridField {
        width: y.width,
        height: y.height,
        data: y.data.iter().zip(&x.data).map(|(p, q)| p + a * q).collect(),
    }
}

fn average(a: &GridField, b: &GridField) -> GridField {
    GridField {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(p, q)| 0.5 * (p + q)).collect(),
    }
}

fn axpy_vec(y: &GridVectorField, a: f64, x: &GridVectorField) -> GridVectorField {
    GridVectorField {
        x: axpy(&y.x, a, &x.x),
        y: axpy(&y.y, a, &x.y),
    }
}

fn average_vec(a: &GridVectorField, b: &GridVectorField) -> GridVectorField {
    GridVectorField {
        x: average(&a.x, &b.x),
        y: average(&a.y, &b.y),
    }
}

/// Time derivatives of `(psi, beta)` for the constant-density system, and
/// the part of `beta_t` not involving the drive or friction.
struct ConstRates {
    psi: GridField,
    transport: GridField,
}

fn const_rates(psi: &LevelSetField, beta: &GridField, cfg: &FlowConfig) -> ConstRates {
    let (w, h) = (psi.width(), psi.height());
    let n = psi.outward_normals();
    let div = flux_divergence(beta, &n);
    let transport = par_grid(w, h, |x, y| {
        let i = beta.idx(x, y);
        let mut a = div.data[i];
        if cfg.tau_diff > 0.0 {
            let (t, _) = frame_from_outward(n.at(i));
            a += cfg.tau_diff * d2_along(beta, x, y, t);
        }
        a
    });
    let g = upwind_grad_norm(&psi.psi, &beta.map(|b| -b));
    let rate = GridField {
        width: w,
        height: h,
        data: beta.data.iter().zip(&g.data).map(|(b, gn)| b * gn).collect(),
    };
    ConstRates { psi: rate, transport }
}

/// `div(beta^2 n / 2)` in conservation form with Rusanov face fluxes: the
/// central flux plus local Lax-Friedrichs dissipation at the face speed
/// `max |beta n_d|`. Being conservative, the scheme cannot amplify `beta`
/// without bound where fronts converge.
fn flux_divergence(beta: &GridField, n: &GridVectorField) -> GridField {
    let (w, h) = (beta.width, beta.height);
    let face = |x0: usize, y0: usize, x1: usize, y1: usize, comp: &GridField| -> f64 {
        let (i, j) = (beta.idx(x0, y0), beta.idx(x1, y1));
        let (b0, b1) = (beta.data[i], beta.data[j]);
        let (n0, n1) = (comp.data[i], comp.data[j]);
        let speed = (b0 * n0).abs().max((b1 * n1).abs());
        0.25 * (b0 * b0 * n0 + b1 * b1 * n1) + 0.5 * speed * (b1 - b0)
    };
    par_grid(w, h, |x, y| {
        let i = beta.idx(x, y);
        let b = beta.data[i];
        // closed boundary faces carry the node's own flux, so they cancel
        let own_x = 0.5 * b * b * n.x.data[i];
        let own_y = 0.5 * b * b * n.y.data[i];
        let fxp = if x + 1 < w { face(x, y, x + 1, y, &n.x) } else { own_x };
        let fxm = if x > 0 { face(x - 1, y, x, y, &n.x) } else { own_x };
        let fyp = if y + 1 < h { face(x, y, x, y + 1, &n.y) } else { own_y };
        let fym = if y > 0 { face(x, y - 1, x, y, &n.y) } else { own_y };
        fxp - fxm + fyp - fym
    })
}

fn beta_rate(beta: &GridField, f_hat: &GridField, transport: &GridField, t: f64, cfg: &FlowConfig) -> GridField {
    let c = cfg.drive(t) / cfg.rho0;
    let fr = cfg.friction(t);
    GridField {
        width: beta.width,
        height: beta.height,
        data: (0..beta.len())
            .map(|i| c * f_hat.data[i] + transport.data[i] - fr * beta.data[i])
            .collect(),
    }
}

/// One step of the constant-density flow on the grid:
///
/// `beta_t = (lambda k^2 t^{k-2} / rho) f + div(beta^2 n / 2) - (k+1)/t beta
///  + tau beta_TT`, `psi_t = beta |grad psi|`,
///
/// with `n` the regularised outward normal and the divergence in
/// conservation form (see `flux_divergence`). Time integration is Heun's method
/// (two-stage SSP Runge-Kutta) with `f` held fixed over the step; noise is
/// added after the second stage.
pub fn accel_const_ls_step(state: &ExtendedState, f_hat: &GridField, cfg: &FlowConfig) -> Result<ExtendedState> {
    cfg.validate()?;
    state.check_shape()?;
    check_force(f_hat, &state.psi)?;
    let beta = state.beta_hat.as_ref().ok_or(Error::MissingChannel("beta_hat"))?;
    let r1 = const_rates(&state.psi, beta, cfg);
    let speed = beta.max_abs();
    let accel = |t: f64| -> f64 {
        let c = cfg.drive(t) / cfg.rho0;
        f_hat
            .data
            .iter()
            .zip(&r1.transport.data)
            .fold(0.0_f64, |m, (f, r)| m.max((c * f + r).abs()))
    };
    let t = clock(state, cfg, |t| cfg.accel_dt(0.0, 1.0, speed, accel(t)))?;
    let dt = cfg.accel_dt(t, 1.0, speed, accel(t))?;

    let b1 = axpy(beta, dt, &beta_rate(beta, f_hat, &r1.transport, t, cfg));
    let psi1 = LevelSetField {
        psi: axpy(&state.psi.psi, dt, &r1.psi),
    };
    let r2 = const_rates(&psi1, &b1, cfg);
    let b2 = axpy(&b1, dt, &beta_rate(&b1, f_hat, &r2.transport, t + dt, cfg));
    let psi2 = axpy(&psi1.psi, dt, &r2.psi);

    let mut next = state.clone();
    let mut new_beta = average(beta, &b2);
    if cfg.tau_noise > 0.0 {
        let scale = cfg.tau_noise * dt.sqrt();
        for b in new_beta.data.iter_mut() {
            let eta: f64 = next.rng.sample(StandardNormal);
            *b += scale * eta;
        }
    }
    if !new_beta.all_finite() {
        return Err(Error::NonFinite("beta_hat"));
    }
    next.psi.psi = average(&state.psi.psi, &psi2);
    next.beta_hat = Some(new_beta);
    next.t = t + dt;
    finish(next, cfg)
}

/// `-V . grad psi` with upwind ENO differences; linear in `psi`.
pub(crate) fn psi_transport_rate(psi: &GridField, vel: &GridVectorField) -> GridField {
    par_grid(psi.width, psi.height, |x, y| -psi.upwind_dot_eno2(x, y, vel.at(psi.idx(x, y))))
}

struct FlowableRates {
    psi: GridField,
    rho: GridField,
    /// Acceleration per unit drive coefficient.
    per_mass: GridVectorField,
    /// Transport and diffusion of the velocity.
    transport: GridVectorField,
}

fn flowable_rates(psi: &LevelSetField, vel: &GridVectorField, rho: &GridField, f_hat: &GridField, cfg: &FlowConfig) -> FlowableRates {
    let (w, h) = (psi.width(), psi.height());
    let n = psi.outward_normals();
    let kappa = psi.curvature();
    let floor = RHO_FLOOR * cfg.rho0;
    // mass potential: g L rho^2 / 2 integrated along the front
    let potential = (cfg.g > 0.0).then(|| {
        let length = psi.line_integral(None);
        let rho2 = rho.map(|r| r * r);
        (length, psi.line_integral(Some(&rho2)))
    });
    let transport = par_vec_grid(w, h, |x, y| {
        let i = rho.idx(x, y);
        let v = vel.at(i);
        let mut a = -Vec2::new(vel.x.upwind_dot(x, y, v), vel.y.upwind_dot(x, y, v));
        if cfg.tau_diff > 0.0 {
            let (t, _) = frame_from_outward(n.at(i));
            a += Vec2::new(d2_along(&vel.x, x, y, t), d2_along(&vel.y, x, y, t)) * cfg.tau_diff;
        }
        a
    });
    let per_mass = par_vec_grid(w, h, |x, y| {
        let i = rho.idx(x, y);
        let r = rho.data[i].max(floor);
        let (t, nn) = frame_from_outward(n.at(i));
        let mut a = nn * (f_hat.data[i] / r);
        if let Some((length, int_rho2)) = potential {
            let shape = 0.5 * cfg.g * kappa.data[i] * (int_rho2 - length * r * r) / r;
            let rho_t = rho.central_grad(x, y).dot(t);
            a += nn * shape - t * (cfg.g * length * rho_t);
        }
        a
    });
    let rho_rate = par_grid(w, h, |x, y| {
        let i = rho.idx(x, y);
        let (t, _) = frame_from_outward(n.at(i));
        let gx = vel.x.central_grad(x, y);
        let gy = vel.y.central_grad(x, y);
        // T . (grad V) T
        let stretch = t.x * gx.dot(t) + t.y * gy.dot(t);
        -(rho.upwind_dot(x, y, vel.at(i)) + rho.data[i] * stretch)
    });
    FlowableRates {
        psi: psi_transport_rate(&psi.psi, vel),
        rho: rho_rate,
        per_mass,
        transport,
    }
}

fn velocity_rate(vel: &GridVectorField, r: &FlowableRates, t: f64, cfg: &FlowConfig) -> GridVectorField {
    let c = cfg.drive(t);
    let fr = cfg.friction(t);
    let mut out = GridVectorField::zeros(vel.x.width, vel.x.height);
    for i in 0..vel.x.len() {
        out.put(i, r.per_mass.at(i) * c + r.transport.at(i) - vel.at(i) * fr);
    }
    out
}

/// One step of the flowable-mass flow on the grid.
///
/// `V_t = (c/rho) f N - (V . grad) V - (k+1)/t V + tau V_TT (+ mass potential)`,
/// `rho_t = -V . grad rho - rho T.(grad V) T`, `psi_t = -V . grad psi`,
///
/// with `N = -n` and `T` the tangent of the level sets. The transport by the
/// full velocity combines the tangential `v d/ds` of the marker system with
/// the motion of the front through the grid. Time integration is Heun's
/// method with `f` held fixed over the step.
pub fn accel_flowable_ls_step(
    state: &ExtendedState,
    f_hat: &GridField,
    cfg: &FlowConfig,
) -> Result<ExtendedState> {
    cfg.validate()?;
    state.check_shape()?;
    check_force(f_hat, &state.psi)?;
    let vel = state.v_hat.as_ref().ok_or(Error::MissingChannel("v_hat"))?;
    let rho = state.rho_hat.as_ref().ok_or(Error::MissingChannel("rho_hat"))?;
    check_density(&state.psi, rho)?;
    let r1 = flowable_rates(&state.psi, vel, rho, f_hat, cfg);
    let speed = vel.max_norm();
    let n = vel.x.len();
    let accel = |t: f64| -> f64 {
        let c = cfg.drive(t);
        (0..n).fold(0.0_f64, |m, i| m.max((r1.per_mass.at(i) * c + r1.transport.at(i)).norm()))
    };
    let t = clock(state, cfg, |t| cfg.accel_dt(0.0, 1.0, speed, accel(t)))?;
    let dt = cfg.accel_dt(t, 1.0, speed, accel(t))?;

    let v1 = axpy_vec(vel, dt, &velocity_rate(vel, &r1, t, cfg));
    let rho1 = axpy(rho, dt, &r1.rho);
    let psi1 = LevelSetField {
        psi: axpy(&state.psi.psi, dt, &r1.psi),
    };
    let r2 = flowable_rates(&psi1, &v1, &rho1, f_hat, cfg);
    let v2 = axpy_vec(&v1, dt, &velocity_rate(&v1, &r2, t + dt, cfg));
    let rho2 = axpy(&rho1, dt, &r2.rho);
    let psi2 = axpy(&psi1.psi, dt, &r2.psi);

    let mut next = state.clone();
    let mut new_vel = average_vec(vel, &v2);
    if cfg.tau_noise > 0.0 {
        let scale = cfg.tau_noise * dt.sqrt();
        for i in 0..n {
            let ex: f64 = next.rng.sample(StandardNormal);
            let ey: f64 = next.rng.sample(StandardNormal);
            let v = new_vel.at(i) + Vec2::new(ex, ey) * scale;
            new_vel.put(i, v);
        }
    }
    if !new_vel.all_finite() {
        return Err(Error::NonFinite("v_hat"));
    }
    next.psi.psi = average(&state.psi.psi, &psi2);
    next.v_hat = Some(new_vel);
    next.rho_hat = Some(average(rho, &rho2));
    next.t = t + dt;
    let next = finish(next, cfg)?;
    check_density(&next.psi, next.rho_hat.as_ref().expect("density channel"))?;
    Ok(next)
}

fn check_density(psi: &LevelSetField, rho: &GridField) -> Result<()> {
    match psi.band().find(|&i| !(rho.data[i] > 0.0)) {
        Some(i) => Err(Error::DensityBreach { index: i, rho: rho.data[i] }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::Method;
    use crate::levelset::{extract_contour, init_signed_distance, Shape};

    fn circle_state(r: f64, method: Method, cfg: &FlowConfig) -> ExtendedState {
        let psi = init_signed_distance(
            &Shape::Circle {
                center: [48.0, 48.0],
                radius: r,
            },
            96,
            96,
        )
        .unwrap();
        ExtendedState::at_rest(psi, method, cfg)
    }

    fn mean_radius(s: &ExtendedState) -> f64 {
        let c = extract_contour(&s.psi).unwrap();
        c.points.iter().map(|p| (*p - Vec2::new(48.0, 48.0)).norm()).sum::<f64>() / c.len() as f64
    }

    #[test]
    fn godunov_norm_of_simple_fields() {
        let lin = GridField::from_fn(20, 20, |x, _| x as f64);
        for s in [1.0, -1.0] {
            let g = upwind_grad_norm(&lin, &GridField::filled(20, 20, s));
            assert!(g.data.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        let cone = GridField::from_fn(41, 41, |x, y| ((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).sqrt());
        let g = upwind_grad_norm(&cone, &GridField::filled(41, 41, 1.0));
        for y in 0..41 {
            for x in 0..41 {
                if cone.get(x, y) > 3.0 {
                    assert!((g.get(x, y) - 1.0).abs() < 0.2, "{}", g.get(x, y));
                }
            }
        }
    }

    #[test]
    fn godunov_error_shrinks_with_refinement() {
        // psi = |x - c| scaled so the grid resolves the same smooth shape
        let err = |m: usize| -> f64 {
            let s = m as f64 / 32.0;
            let f = GridField::from_fn(m, m, |x, y| {
                let (u, v) = (x as f64 / s - 10.0, y as f64 / s - 10.0);
                s * (0.5 * (u * u + v * v) + 30.0).sqrt()
            });
            let g = upwind_grad_norm(&f, &GridField::filled(m, m, 1.0));
            let exact = GridField::from_fn(m, m, |x, y| {
                let (u, v) = (x as f64 / s - 10.0, y as f64 / s - 10.0);
                (u * u + v * v).sqrt() * 0.5 / (0.5 * (u * u + v * v) + 30.0).sqrt()
            });
            g.data.iter().zip(&exact.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 0.7 * e1, "{e1} {e2}");
    }

    #[test]
    fn zero_force_keeps_psi() {
        let cfg = FlowConfig::default();
        let s = circle_state(20.0, Method::Gradient, &cfg);
        let next = gradient_ls_step(&s, &GridField::filled(96, 96, 0.0), 0.5, &cfg).unwrap();
        assert_eq!(next.psi, s.psi);
    }

    #[test]
    fn unit_force_moves_front_by_dt() {
        let cfg = FlowConfig::default();
        let mut s = circle_state(20.0, Method::Gradient, &cfg);
        let f = GridField::filled(96, 96, 1.0);
        for _ in 0..10 {
            s = gradient_ls_step(&s, &f, 0.5, &cfg).unwrap();
        }
        assert!((mean_radius(&s) - 15.0).abs() < 0.2, "{}", mean_radius(&s));
    }

    #[test]
    fn accelerated_rest_states_are_static() {
        let cfg = FlowConfig {
            t0: Some(1.0),
            ..Default::default()
        };
        let zero = GridField::filled(96, 96, 0.0);
        let s = circle_state(20.0, Method::AccelConst, &cfg);
        let next = accel_const_ls_step(&s, &zero, &cfg).unwrap();
        assert_eq!(next.psi, s.psi);
        let s = circle_state(20.0, Method::AccelFlowable, &cfg);
        let next = accel_flowable_ls_step(&s, &zero, &cfg).unwrap();
        assert_eq!(next.psi, s.psi);
        assert!(next.t > 1.0);
    }

    #[test]
    fn psi_transport_is_linear() {
        let cfg = FlowConfig::default();
        let s = circle_state(20.0, Method::AccelFlowable, &cfg);
        let vel = par_vec_grid(96, 96, |x, y| Vec2::new((y as f64 * 0.1).sin(), 0.3 - x as f64 * 0.01));
        let (a, b) = (2.7, -1.3);
        let step = |p: &GridField| axpy(p, 0.4, &psi_transport_rate(p, &vel));
        let base = step(&s.psi.psi);
        let scaled = step(&s.psi.psi.map(|p| a * p + b));
        for (p, q) in base.data.iter().zip(&scaled.data) {
            assert!((a * p + b - q).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_channels_and_breaches() {
        let cfg = FlowConfig::default();
        let zero = GridField::filled(96, 96, 0.0);
        let s = circle_state(20.0, Method::Gradient, &cfg);
        assert!(matches!(accel_const_ls_step(&s, &zero, &cfg), Err(Error::MissingChannel(_))));
        let mut s = circle_state(20.0, Method::AccelFlowable, &cfg);
        s.rho_hat.as_mut().unwrap().set(68, 48, -1.0);
        assert!(matches!(
            accel_flowable_ls_step(&s, &zero, &cfg),
            Err(Error::DensityBreach { .. })
        ));
    }
}
