//! Marker-curve time steppers.
//!
//! All flows move markers along the inward normal. The accelerated flows
//! integrate the Euler-Lagrange system of the action
//! `t^{k+1}/k (T - lambda k^2 t^{k-2} U)` with explicit Euler steps whose size
//! follows a CFL rule.

mod accel;
mod gradient;
mod nesterov;
mod oracle;
mod run;

pub use accel::{
    accel_const_step, accel_flowable_step, from_parameter_frame, kinetic_energy,
    to_parameter_frame,
};
pub use gradient::{gradient_step, sobolev_smooth, sobolev_step};
pub use nesterov::{nesterov_lambda, nesterov_reference, NesterovIterate};
pub use oracle::{circle_ode_oracle, OracleModel, OracleSample, OracleTrajectory};
pub use run::{run_flow, LogRecord, Objective, RunLog, RunResult, StopReason, STALL_STEPS, STALL_TOL};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MarkerCurve;

/// Guard added to denominators in step-size bounds.
pub(crate) const EPS: f64 = 1e-12;
/// Steps below this size are treated as a blow-up.
pub const MIN_DT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gradient,
    Sobolev,
    AccelConst,
    AccelFlowable,
}

impl Method {
    pub fn is_accelerated(self) -> bool {
        matches!(self, Method::AccelConst | Method::AccelFlowable)
    }
}

/// Parameters of the action and of the numerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Action exponent `k`.
    pub k: f64,
    /// Potential weight `lambda` in the action.
    pub lambda_action: f64,
    /// Constant density, or initial density for the flowable model.
    pub rho0: f64,
    /// Mass-potential strength (0 disables it).
    pub g: f64,
    /// Velocity diffusion coefficient.
    pub tau_diff: f64,
    /// Stochastic forcing coefficient.
    pub tau_noise: f64,
    pub cfl: f64,
    /// Start of the evolution clock; `None` uses the first step size.
    pub t0: Option<f64>,
    /// Chan-Vese length weight.
    pub alpha_len: f64,
    /// Sobolev smoothing length `lambda_s`.
    pub lambda_sobolev: f64,
    /// Gaussian scale of the geodesic edge map.
    pub edge_sigma: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Overrides the CFL rule when set.
    pub fixed_dt: Option<f64>,
    /// Upper bound on any step.
    pub dt_max: f64,
    /// Marker resampling period of the accelerated flows.
    pub resample_every: usize,
    /// Reinitialisation and extension period of the level-set flows.
    pub reinit_every: usize,
    /// Backtrack gradient and Sobolev steps that would raise the energy.
    pub energy_guard: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            k: 2.0,
            lambda_action: 1.0,
            rho0: 1.0,
            g: 0.0,
            tau_diff: 0.0,
            tau_noise: 0.0,
            cfl: 0.5,
            t0: None,
            alpha_len: 0.5,
            lambda_sobolev: 25.0,
            edge_sigma: 1.5,
            max_steps: 1000,
            seed: 0,
            fixed_dt: None,
            dt_max: 1.0,
            resample_every: 25,
            reinit_every: 10,
            energy_guard: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.k >= 1.0) {
            return bad(format!("k must be >= 1, got {}", self.k));
        }
        if !(self.lambda_action > 0.0) {
            return bad(format!("lambda must be > 0, got {}", self.lambda_action));
        }
        if !(self.rho0 > 0.0) {
            return bad(format!("rho0 must be > 0, got {}", self.rho0));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0) {
                return bad(format!("t0 must be > 0, got {t0}"));
            }
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return bad(format!("fixed_dt must be > 0, got {dt}"));
            }
        }
        for (name, v) in [
            ("g", self.g),
            ("tau_diff", self.tau_diff),
            ("tau_noise", self.tau_noise),
            ("alpha_len", self.alpha_len),
            ("edge_sigma", self.edge_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.lambda_sobolev > 0.0) {
            return bad(format!("lambda_sobolev must be > 0, got {}", self.lambda_sobolev));
        }
        if !(self.dt_max > 0.0) {
            return bad(format!("dt_max must be > 0, got {}", self.dt_max));
        }
        if self.resample_every == 0 || self.reinit_every == 0 {
            return bad("resample_every and reinit_every must be >= 1".into());
        }
        Ok(())
    }

    /// Coefficient `lambda k^2 t^{k-2}` multiplying the potential force.
    pub fn drive(&self, t: f64) -> f64 {
        self.lambda_action * self.k * self.k * t.powf(self.k - 2.0)
    }

    /// Friction rate `(k+1)/t`.
    pub fn friction(&self, t: f64) -> f64 {
        (self.k + 1.0) / t
    }

    /// Combined step-size rule shared by both backends.
    ///
    /// `speed` and `accel` are the largest transport speed and driving
    /// acceleration, `h` the spatial resolution. Friction is only bounded once
    /// the clock has started.
    pub(crate) fn accel_dt(&self, t: f64, h: f64, speed: f64, accel: f64) -> Result<f64> {
        let dt = match self.fixed_dt {
            Some(dt) => dt,
            None => {
                let mut dt = self.dt_max.min(h / (speed + EPS));
                if accel > 0.0 {
                    dt = dt.min((h / accel).sqrt());
                }
                if self.tau_diff > 0.0 {
                    dt = dt.min(h * h / (2.0 * self.tau_diff));
                }
                if t > 0.0 {
                    dt = dt.min(t / (self.k + 1.0));
                }
                self.cfl * dt
            }
        };
        if !(dt >= MIN_DT) {
            return Err(Error::DtUnderflow { dt, t });
        }
        Ok(dt)
    }

    /// Clock value at the first step: `t0` when configured, otherwise the
    /// first admissible step size (found by a short fixed-point iteration,
    /// because the drive coefficient depends on `t` when `k != 2`).
    pub(crate) fn start_time(&self, dt_at: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        if let Some(t0) = self.t0 {
            return Ok(t0);
        }
        let mut t = dt_at(1.0)?;
        for _ in 0..4 {
            t = dt_at(t)?;
        }
        Ok(t)
    }
}

/// A marker curve in motion plus its clock.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub curve: MarkerCurve,
    /// Evolution time; `0` until the first accelerated step starts the clock.
    pub t: f64,
    pub step: usize,
    /// Marker spacing the resampler aims for.
    pub target_spacing: f64,
    pub(crate) rng: ChaCha8Rng,
}

impl FlowState {
    pub fn new(curve: MarkerCurve, seed: u64) -> Self {
        let target_spacing = curve.mean_spacing();
        FlowState {
            curve,
            t: 0.0,
            step: 0,
            target_spacing,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// State at rest with the channels `method` needs: zero normal speed for
    /// the constant-density flow; zero velocity and density `rho0` for the
    /// flowable flow. Existing channels are kept.
    pub fn at_rest(curve: MarkerCurve, method: Method, cfg: &FlowConfig) -> Self {
        let n = curve.len();
        let mut curve = curve;
        match method {
            Method::AccelConst => {
                curve.beta.get_or_insert_with(|| vec![0.0; n]);
            }
            Method::AccelFlowable => {
                curve.beta.get_or_insert_with(|| vec![0.0; n]);
                curve.v.get_or_insert_with(|| vec![0.0; n]);
                curve.rho.get_or_insert_with(|| vec![cfg.rho0; n]);
            }
            Method::Gradient | Method::Sobolev => {}
        }
        FlowState::new(curve, cfg.seed)
    }

    /// Marker count the resampler should use for the current length.
    pub(crate) fn resample_count(&self) -> usize {
        let n = (self.curve.length() / self.target_spacing).round() as usize;
        n.max(crate::geometry::MIN_MARKERS)
    }
}

pub(crate) fn channel<'a>(c: &'a Option<Vec<f64>>, name: &'static str, n: usize) -> Result<&'a [f64]> {
    let ch = c.as_deref().ok_or(Error::MissingChannel(name))?;
    if ch.len() != n {
        return Err(Error::ChannelLength {
            name,
            got: ch.len(),
            expected: n,
        });
    }
    Ok(ch)
}

pub(crate) fn check_force(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::ChannelLength {
            name: "force",
            got: values.len(),
            expected: n,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("force"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_checked() {
        FlowConfig::default().validate().unwrap();
        for cfg in [
            FlowConfig { k: 0.5, ..Default::default() },
            FlowConfig { lambda_action: 0.0, ..Default::default() },
            FlowConfig { rho0: -1.0, ..Default::default() },
            FlowConfig { cfl: 1.5, ..Default::default() },
            FlowConfig { t0: Some(0.0), ..Default::default() },
            FlowConfig { tau_diff: f64::NAN, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn step_rule_bounds() {
        let cfg = FlowConfig { cfl: 1.0, ..Default::default() };
        assert!((cfg.accel_dt(0.0, 0.5, 2.0, 0.0).unwrap() - 0.25).abs() < 1e-9);
        // friction bound t/(k+1)
        assert!((cfg.accel_dt(0.3, 0.5, 0.0, 0.0).unwrap() - 0.1).abs() < 1e-12);
        // acceleration bound sqrt(h/a)
        assert!((cfg.accel_dt(0.0, 0.5, 0.0, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            cfg.accel_dt(1e-14, 0.5, 0.0, 0.0),
            Err(Error::DtUnderflow { .. })
        ));
    }
}
