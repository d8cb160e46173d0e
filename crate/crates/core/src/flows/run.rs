use crate::energies::{
    chan_vese_energy, chan_vese_force, edge_map, geodesic_energy, geodesic_force, region_means,
    EnergyKind, ForceField, ImageGrid,
};
use crate::error::{Error, Result};
use crate::geometry::{compute_frame, CurveFrame, MarkerCurve};
use crate::grid::{GridField, Mask};

use super::{
    accel_const_step, accel_flowable_step, gradient_step, sobolev_step, FlowConfig, FlowState,
    Method, EPS,
};

/// Marker displacement below which a step counts as stalled.
pub const STALL_TOL: f64 = 1e-6;
/// Consecutive stalled steps that end a run.
pub const STALL_STEPS: usize = 50;
/// Step halvings tried before a gradient step is rejected.
const MAX_BACKTRACKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub length: f64,
    pub mass: f64,
    pub max_speed: f64,
}

/// Per-step records of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }

    /// Steps whose energy rose above the previous record, with the rise.
    pub fn energy_increases(&self) -> Vec<(usize, f64)> {
        self.records
            .windows(2)
            .filter(|w| w[1].energy > w[0].energy)
            .map(|w| (w[1].step, w[1].energy - w[0].energy))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxSteps,
    Stagnated,
    Shock { t: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: RunLog,
    pub curve: MarkerCurve,
    /// Energy of the final curve.
    pub energy: f64,
    pub stop: StopReason,
}

/// Image energy and its normal force for marker curves.
pub struct Objective<'a> {
    image: &'a ImageGrid,
    kind: EnergyKind,
    alpha_len: f64,
    phi: Option<GridField>,
}

impl<'a> Objective<'a> {
    pub fn new(image: &'a ImageGrid, kind: EnergyKind, cfg: &FlowConfig) -> Result<Self> {
        let phi = match kind {
            EnergyKind::ChanVese => None,
            EnergyKind::Geodesic => Some(edge_map(image, cfg.edge_sigma)?),
        };
        Ok(Objective {
            image,
            kind,
            alpha_len: cfg.alpha_len,
            phi,
        })
    }

    fn mask(&self, curve: &MarkerCurve) -> Mask {
        Mask::from_polygon(self.image.width(), self.image.height(), &curve.points)
    }

    pub fn energy(&self, curve: &MarkerCurve) -> Result<f64> {
        match &self.phi {
            None => chan_vese_energy(self.image, &self.mask(curve), self.alpha_len, curve.length()),
            Some(phi) => Ok(geodesic_energy(phi, &curve.points)),
        }
    }

    pub fn force(&self, curve: &MarkerCurve, frame: &CurveFrame) -> Result<ForceField> {
        match &self.phi {
            None => {
                let (c1, c2) = region_means(self.image, &self.mask(curve))?;
                Ok(chan_vese_force(
                    self.image,
                    &curve.points,
                    &frame.clamped_kappa(),
                    c1,
                    c2,
                    self.alpha_len,
                ))
            }
            Some(phi) => geodesic_force(phi, frame, curve),
        }
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }
}

/// Explicit step size for first-order flows: the front may move at most a
/// fraction of the marker spacing, and the curvature part of the force is
/// bounded like a diffusion with coefficient `alpha_len`.
fn gradient_dt(frame: &CurveFrame, force: &ForceField, cfg: &FlowConfig) -> f64 {
    if let Some(dt) = cfg.fixed_dt {
        return dt;
    }
    let h = frame.mean_spacing();
    let mut dt = cfg.dt_max.min(h / (force.max_abs() + EPS));
    if cfg.alpha_len > 0.0 {
        dt = dt.min(h * h / (4.0 * cfg.alpha_len));
    }
    cfg.cfl * dt
}

fn max_displacement(a: &MarkerCurve, b: &MarkerCurve) -> Option<f64> {
    (a.len() == b.len()).then(|| {
        a.points
            .iter()
            .zip(&b.points)
            .map(|(p, q)| (*p - *q).norm())
            .fold(0.0, f64::max)
    })
}

fn max_speed(curve: &MarkerCurve) -> f64 {
    let n = curve.len();
    (0..n)
        .map(|i| {
            let b = curve.beta.as_ref().map_or(0.0, |b| b[i]);
            let v = curve.v.as_ref().map_or(0.0, |v| v[i]);
            b.hypot(v)
        })
        .fold(0.0, f64::max)
}

/// Evolves `initial` with the chosen marker flow, recomputing the force every
/// step, until `max_steps`, stagnation or a shock.
///
/// First-order flows backtrack (halve `dt`) when a step would raise the
/// energy and skip the step after repeated failures, so their logged energy
/// never increases when `energy_guard` is on.
pub fn run_flow(
    initial: &MarkerCurve,
    image: &ImageGrid,
    method: Method,
    energy: EnergyKind,
    cfg: &FlowConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    initial.validate()?;
    let objective = Objective::new(image, energy, cfg)?;
    let mut state = FlowState::at_rest(initial.clone(), method, cfg);
    let mut current = objective.energy(&state.curve)?;
    let mut log = RunLog::default();
    let mut stalled = 0;
    let mut stop = StopReason::MaxSteps;
    for _ in 0..cfg.max_steps {
        let frame = compute_frame(&state.curve)?;
        let force = objective.force(&state.curve, &frame)?;
        let attempt = match method {
            Method::Gradient | Method::Sobolev => {
                first_order_step(&state, &force, &frame, &objective, method, current, cfg)
            }
            Method::AccelConst => accel_const_step(&state, &force, cfg)
                .and_then(|s| objective.energy(&s.curve).map(|e| (s, e))),
            Method::AccelFlowable => accel_flowable_step(&state, &force, cfg)
                .and_then(|s| objective.energy(&s.curve).map(|e| (s, e))),
        };
        let (next, e) = match attempt {
            Ok(v) => v,
            Err(Error::Shock { t, reason }) => {
                stop = StopReason::Shock { t, reason };
                break;
            }
            Err(err) => return Err(err),
        };
        let resampled = method.is_accelerated() && next.step % cfg.resample_every == 0;
        match max_displacement(&state.curve, &next.curve) {
            Some(d) if !resampled => {
                if d < STALL_TOL {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
            }
            _ => {}
        }
        let speed = if method.is_accelerated() {
            max_speed(&next.curve)
        } else {
            force.max_abs()
        };
        log.records.push(LogRecord {
            step: next.step,
            t: next.t,
            dt: next.t - state.t,
            energy: e,
            length: next.curve.length(),
            mass: next.curve.mass().unwrap_or(0.0),
            max_speed: speed,
        });
        state = next;
        current = e;
        if stalled >= STALL_STEPS {
            stop = StopReason::Stagnated;
            break;
        }
    }
    Ok(RunResult {
        log,
        curve: state.curve,
        energy: current,
        stop,
    })
}

fn first_order_step(
    state: &FlowState,
    force: &ForceField,
    frame: &CurveFrame,
    objective: &Objective,
    method: Method,
    current: f64,
    cfg: &FlowConfig,
) -> Result<(FlowState, f64)> {
    let mut dt = gradient_dt(frame, force, cfg);
    for _ in 0..=MAX_BACKTRACKS {
        let candidate = match method {
            Method::Sobolev => sobolev_step(state, force, cfg.lambda_sobolev, dt),
            _ => gradient_step(state, force, dt),
        };
        match candidate {
            Ok(next) => {
                let e = objective.energy(&next.curve)?;
                if !cfg.energy_guard || e <= current {
                    return Ok((next, e));
                }
            }
            Err(err @ Error::Shock { .. }) if !cfg.energy_guard => return Err(err),
            Err(Error::Shock { .. }) => {}
            Err(err) => return Err(err),
        }
        dt *= 0.5;
    }
    // rejected: the curve stays put and the step counts as stalled
    let mut next = state.clone();
    next.step += 1;
    Ok((next, current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    fn disk_image() -> ImageGrid {
        ImageGrid::from_fn(64, 64, |x, y| {
            let d = ((x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2)).sqrt();
            if d < 14.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_initial_curve() {
        let img = disk_image();
        let c = MarkerCurve::circle(Vec2::new(32.0, 32.0), 20.0, 64).unwrap();
        let cfg = FlowConfig {
            max_steps: 0,
            ..Default::default()
        };
        let r = run_flow(&c, &img, Method::Gradient, EnergyKind::ChanVese, &cfg).unwrap();
        assert!(r.log.is_empty());
        assert_eq!(r.curve, c);
        assert_eq!(r.stop, StopReason::MaxSteps);
    }

    #[test]
    fn gradient_flow_finds_disk() {
        let img = disk_image();
        let c = MarkerCurve::circle(Vec2::new(30.0, 33.0), 22.0, 96).unwrap();
        let cfg = FlowConfig {
            max_steps: 2000,
            alpha_len: 0.2,
            ..Default::default()
        };
        let r = run_flow(&c, &img, Method::Gradient, EnergyKind::ChanVese, &cfg).unwrap();
        assert!(r.log.energy_increases().is_empty());
        let centre = Vec2::new(32.0, 32.0);
        for p in &r.curve.points {
            let d = (*p - centre).norm();
            assert!((d - 13.5).abs() < 1.5, "{d}");
        }
    }
}
