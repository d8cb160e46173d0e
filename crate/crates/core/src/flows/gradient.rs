use crate::energies::ForceField;
use crate::error::{Error, Result};
use crate::geometry::{compute_frame, resample_arclength, segment_lengths, MarkerCurve};
use crate::vec2::Vec2;

use super::{check_force, FlowState};

/// One explicit step of `dC/dt = f N`.
///
/// The curve is resampled when the marker spacing drifts more than a factor
/// two away from the target spacing.
pub fn gradient_step(state: &FlowState, force: &ForceField, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let frame = compute_frame(&state.curve)?;
    check_force(&force.values, state.curve.len())?;
    let points = state
        .curve
        .points
        .iter()
        .zip(&frame.normal)
        .zip(&force.values)
        .map(|((&p, &n), &f)| p + n * (dt * f))
        .collect();
    advance(state, points, dt)
}

/// Solves `(Id - lambda d^2/ds^2) u = g` along the closed curve.
///
/// The operator is discretised as the symmetric cyclic system
/// `ds_i u_i - lambda [(u_{i+1}-u_i)/h_i - (u_i-u_{i-1})/h_{i-1}] = ds_i g_i`,
/// with `h_i` the segment lengths and `ds_i` the dual lengths.
pub fn sobolev_smooth(seg: &[f64], g: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = seg.len();
    if g.len() != n {
        return Err(Error::ChannelLength {
            name: "force",
            got: g.len(),
            expected: n,
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Sobolev smoothing must be > 0, got {lambda}"
        )));
    }
    let ds: Vec<f64> = (0..n).map(|i| 0.5 * (seg[(i + n - 1) % n] + seg[i])).collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| ds[i] + lambda * (1.0 / seg[i] + 1.0 / seg[(i + n - 1) % n]))
        .collect();
    let off: Vec<f64> = seg.iter().map(|h| -lambda / h).collect();
    let rhs: Vec<f64> = ds.iter().zip(g).map(|(d, v)| d * v).collect();
    solve_cyclic_symmetric(&diag, &off, &rhs)
}

/// One step of the Sobolev-smoothed flow `dC/dt = u`, where `u` is `f N`
/// smoothed componentwise by [`sobolev_smooth`].
pub fn sobolev_step(
    state: &FlowState,
    force: &ForceField,
    lambda_s: f64,
    dt: f64,
) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let frame = compute_frame(&state.curve)?;
    check_force(&force.values, state.curve.len())?;
    let gx: Vec<f64> = frame.normal.iter().zip(&force.values).map(|(n, f)| f * n.x).collect();
    let gy: Vec<f64> = frame.normal.iter().zip(&force.values).map(|(n, f)| f * n.y).collect();
    let ux = sobolev_smooth(&frame.seg, &gx, lambda_s)?;
    let uy = sobolev_smooth(&frame.seg, &gy, lambda_s)?;
    let points = state
        .curve
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| p + Vec2::new(ux[i], uy[i]) * dt)
        .collect();
    advance(state, points, dt)
}

fn advance(state: &FlowState, points: Vec<Vec2>, dt: f64) -> Result<FlowState> {
    let t = state.t + dt;
    let curve = MarkerCurve {
        points,
        ..state.curve.clone()
    };
    curve.validate().map_err(|e| shock(t, e))?;
    let seg = segment_lengths(&curve.points)?;
    let (lo, hi) = seg
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let mut next = FlowState {
        curve,
        t,
        step: state.step + 1,
        target_spacing: state.target_spacing,
        rng: state.rng.clone(),
    };
    if hi > 2.0 * state.target_spacing || lo < 0.5 * state.target_spacing {
        next.curve = resample_arclength(&next.curve, next.resample_count())?;
    }
    Ok(next)
}

pub(super) fn shock(t: f64, e: Error) -> Error {
    match e {
        Error::Shock { .. } => e,
        other => Error::Shock {
            t,
            reason: other.to_string(),
        },
    }
}

/// Sherman-Morrison solve of a symmetric cyclic tridiagonal system.
/// `off[i]` couples unknowns `i` and `i+1 (mod n)`.
fn solve_cyclic_symmetric(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let corner = off[n - 1];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= corner * corner / gamma;
    let x = thomas(&b, off, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner;
    let z = thomas(&b, off, &u)?;
    let denom = 1.0 + z[0] + corner * z[n - 1] / gamma;
    if denom.abs() < 1e-300 {
        return Err(Error::Singular);
    }
    let fact = (x[0] + corner * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Tridiagonal solve with sub/super diagonal `off` (the cyclic corner of
/// `off[n-1]` is ignored).
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv.abs() < 1e-300 {
        return Err(Error::Singular);
    }
    c[0] = off[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - off[i - 1] * c[i - 1];
        if piv.abs() < 1e-300 {
            return Err(Error::Singular);
        }
        c[i] = if i + 1 < n { off[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
