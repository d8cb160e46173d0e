use crate::energies::{chan_vese_energy, edge_map, EnergyKind, ImageGrid};
use crate::error::{Error, Result};
use crate::flows::{FlowConfig, LogRecord, Method, RunLog, StopReason, EPS};
use crate::geometry::MarkerCurve;
use crate::grid::GridField;

use super::contour::extract_contours;
use super::hj::{accel_const_ls_step, accel_flowable_ls_step, gradient_ls_step, ls_force};
use super::{ExtendedState, LevelSetField};

/// Step halvings tried before a gradient step is rejected.
const MAX_BACKTRACKS: usize = 10;

#[derive(Debug, Clone)]
pub struct LevelSetRun {
    pub log: RunLog,
    pub state: ExtendedState,
    /// Largest component of the final zero set.
    pub contour: MarkerCurve,
    pub energy: f64,
    pub stop: StopReason,
}

struct LsObjective<'a> {
    image: &'a ImageGrid,
    alpha_len: f64,
    phi: Option<GridField>,
}

impl LsObjective<'_> {
    /// Energy of the zero set, with lengths from the smoothed-delta line
    /// integral so that every component counts.
    fn energy(&self, field: &LevelSetField) -> Result<f64> {
        let inside = field.inside();
        let count = inside.count_inside();
        if count == 0 || count == field.psi.len() {
            return Err(Error::NoZeroCrossing);
        }
        match &self.phi {
            None => chan_vese_energy(self.image, &inside, self.alpha_len, field.line_integral(None)),
            Some(phi) => Ok(field.line_integral(Some(phi))),
        }
    }

    fn force(&self, field: &LevelSetField) -> Result<GridField> {
        ls_force(field, self.image, self.phi.as_ref(), self.alpha_len)
    }
}

/// Evolves the level-set function `initial` with the chosen flow until
/// `max_steps`, stagnation of the energy, or a lost front.
///
/// The Sobolev flow has no level-set form and is rejected. Gradient steps
/// backtrack like their marker counterparts when `energy_guard` is on.
pub fn run_levelset(
    initial: &LevelSetField,
    image: &ImageGrid,
    method: Method,
    energy: EnergyKind,
    cfg: &FlowConfig,
) -> Result<LevelSetRun> {
    cfg.validate()?;
    if method == Method::Sobolev {
        return Err(Error::InvalidParameter(
            "the Sobolev flow is only available on marker curves".into(),
        ));
    }
    if initial.width() != image.width() || initial.height() != image.height() {
        return Err(Error::GridShape {
            width: initial.width(),
            height: initial.height(),
            reason: "level-set grid must match the image",
        });
    }
    let objective = LsObjective {
        image,
        alpha_len: cfg.alpha_len,
        phi: match energy {
            EnergyKind::ChanVese => None,
            EnergyKind::Geodesic => Some(edge_map(image, cfg.edge_sigma)?),
        },
    };
    let mut state = ExtendedState::at_rest(initial.clone(), method, cfg);
    let mut current = objective.energy(&state.psi)?;
    let mut log = RunLog::default();
    let mut stop = StopReason::MaxSteps;
    let mut stalled = 0;
    for _ in 0..cfg.max_steps {
        let f = objective.force(&state.psi)?;
        let attempt = match method {
            Method::AccelConst => accel_const_ls_step(&state, &f, cfg),
            Method::AccelFlowable => accel_flowable_ls_step(&state, &f, cfg),
            _ => gradient_with_guard(&state, &f, &objective, current, cfg),
        };
        let next = match attempt {
            Ok(s) => s,
            Err(Error::NoZeroCrossing) => {
                stop = StopReason::Shock {
                    t: state.t,
                    reason: "the zero level set vanished".into(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        let e = match objective.energy(&next.psi) {
            Ok(e) => e,
            Err(Error::NoZeroCrossing) => {
                stop = StopReason::Shock {
                    t: next.t,
                    reason: "the zero level set vanished".into(),
                };
                break;
            }
            Err(err) => return Err(err),
        };
        let length = next.psi.line_integral(None);
        let dt = next.t - state.t;
        log.records.push(LogRecord {
            step: next.step,
            t: next.t,
            dt,
            energy: e,
            length,
            mass: next.band_mass().unwrap_or(0.0),
            max_speed: if method.is_accelerated() {
                next.max_band_speed()
            } else {
                band_max(&next.psi, &f)
            },
        });
        if !method.is_accelerated() {
            let moved = next
                .psi
                .psi
                .data
                .iter()
                .zip(&state.psi.psi.data)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            stalled = if moved < crate::flows::STALL_TOL { stalled + 1 } else { 0 };
        }
        state = next;
        current = e;
        if stalled >= crate::flows::STALL_STEPS {
            stop = StopReason::Stagnated;
            break;
        }
    }
    let contour = extract_contours(&state.psi)?.swap_remove(0);
    Ok(LevelSetRun {
        log,
        state,
        contour,
        energy: current,
        stop,
    })
}

fn band_max(field: &LevelSetField, q: &GridField) -> f64 {
    field.band().map(|i| q.data[i].abs()).fold(0.0, f64::max)
}

/// Front speed bound `h / max|f|` on the band plus the explicit curvature
/// bound `h^2 / (4 alpha)`.
fn gradient_ls_dt(field: &LevelSetField, f: &GridField, cfg: &FlowConfig) -> f64 {
    if let Some(dt) = cfg.fixed_dt {
        return dt;
    }
    let mut dt = cfg.dt_max.min(1.0 / (band_max(field, f) + EPS));
    if cfg.alpha_len > 0.0 {
        dt = dt.min(1.0 / (4.0 * cfg.alpha_len));
    }
    cfg.cfl * dt
}

fn gradient_with_guard(
    state: &ExtendedState,
    f: &GridField,
    objective: &LsObjective,
    current: f64,
    cfg: &FlowConfig,
) -> Result<ExtendedState> {
    let mut dt = gradient_ls_dt(&state.psi, f, cfg);
    for _ in 0..=MAX_BACKTRACKS {
        let mut next = gradient_ls_step(state, f, dt, cfg)?;
        next.t = state.t + dt;
        if !cfg.energy_guard {
            return Ok(next);
        }
        match objective.energy(&next.psi) {
            Ok(e) if e <= current => return Ok(next),
            Ok(_) | Err(Error::NoZeroCrossing) => {}
            Err(err) => return Err(err),
        }
        dt *= 0.5;
    }
    let mut next = state.clone();
    next.step += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{init_signed_distance, Shape};
    use crate::vec2::Vec2;

    fn disk() -> ImageGrid {
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
    fn gradient_flow_finds_disk() {
        let img = disk();
        let psi = init_signed_distance(
            &Shape::Circle {
                center: [30.0, 33.0],
                radius: 22.0,
            },
            64,
            64,
        )
        .unwrap();
        let cfg = FlowConfig {
            max_steps: 400,
            alpha_len: 0.2,
            ..Default::default()
        };
        let r = run_levelset(&psi, &img, Method::Gradient, EnergyKind::ChanVese, &cfg).unwrap();
        assert!(r.log.energy_increases().is_empty());
        for p in &r.contour.points {
            let d = (*p - Vec2::new(32.0, 32.0)).norm();
            assert!((d - 13.5).abs() < 1.5, "{d}");
        }
    }

    #[test]
    fn sobolev_is_rejected() {
        let img = disk();
        let psi = init_signed_distance(
            &Shape::Circle {
                center: [32.0, 32.0],
                radius: 10.0,
            },
            64,
            64,
        )
        .unwrap();
        let cfg = FlowConfig::default();
        assert!(run_levelset(&psi, &img, Method::Sobolev, EnergyKind::ChanVese, &cfg).is_err());
    }
}
