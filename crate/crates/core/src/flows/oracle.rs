//! Reference solution of the accelerated flows for a circle under a
//! constant force.
//!
//! By symmetry the normal speed and the density are constant along the
//! circle and the tangential flow vanishes, so the flows reduce to ODEs in
//! the radius `R` and speed `beta` (with `dR/dt = -beta`, inward normal):
//!
//! * constant density: `beta' = c(t) f / rho + beta^2 / (2R) - (k+1)/t beta`
//! * flowable mass: `beta' = c(t) f / rho - (k+1)/t beta` with `rho R = rho0 R0`
//!
//! where `c(t) = lambda k^2 t^{k-2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FlowConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleModel {
    ConstantDensity,
    Flowable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub t: f64,
    pub r: f64,
    pub beta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    /// One sample per requested time reached before any shock.
    pub samples: Vec<OracleSample>,
    /// Time at which the radius fell below `1e-3 R0`, if it did.
    pub shock_time: Option<f64>,
}

impl OracleTrajectory {
    pub fn shocked(&self) -> bool {
        self.shock_time.is_some()
    }
}

const SHOCK_FRACTION: f64 = 1e-3;
const MAX_STEPS: usize = 10_000_000;

/// Integrates the reduced circle system from `cfg.t0` (radius `r0`, at rest)
/// with an adaptive Dormand-Prince 5(4) scheme at relative tolerance `rtol`,
/// sampling at the sorted `times`.
pub fn circle_ode_oracle(
    r0: f64,
    f_const: f64,
    cfg: &FlowConfig,
    model: OracleModel,
    times: &[f64],
    rtol: f64,
) -> Result<OracleTrajectory> {
    cfg.validate()?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be > 0, got {r0}")));
    }
    if !f_const.is_finite() {
        return Err(Error::NonFinite("force"));
    }
    if !(rtol > 0.0 && rtol < 1e-2) {
        return Err(Error::InvalidParameter(format!("rtol must lie in (0, 0.01), got {rtol}")));
    }
    let t0 = cfg
        .t0
        .ok_or_else(|| Error::InvalidParameter("the circle oracle needs an explicit t0".into()))?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter(
            "sample times must be sorted and not before t0".into(),
        ));
    }
    let mass_line = cfg.rho0 * r0;
    let rhs = |t: f64, y: [f64; 2]| -> [f64; 2] {
        let (r, beta) = (y[0], y[1]);
        let c = cfg.drive(t);
        let fr = cfg.friction(t);
        let acc = match model {
            OracleModel::ConstantDensity => {
                c * f_const / cfg.rho0 + 0.5 * beta * beta / r - fr * beta
            }
            OracleModel::Flowable => c * f_const * r / mass_line - fr * beta,
        };
        [-beta, acc]
    };
    let density = |r: f64| match model {
        OracleModel::ConstantDensity => cfg.rho0,
        OracleModel::Flowable => mass_line / r,
    };

    // relative control with small absolute floors; the speed starts at zero
    let floor = [1e-3 * r0, 1e-9];
    let mut t = t0;
    let mut y = [r0, 0.0];
    let mut h = 1e-3 * t0.max(1e-6);
    let mut samples = Vec::with_capacity(times.len());
    let mut steps = 0;
    for &target in times {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::InvalidParameter("oracle step budget exhausted".into()));
            }
            let hs = h.min(target - t);
            let (y5, err) = dopri_step(&rhs, t, y, hs);
            let scale = |i: usize| rtol * y[i].abs().max(y5[i].abs()).max(floor[i]);
            let e = (err[0] / scale(0)).abs().max((err[1] / scale(1)).abs());
            if !e.is_finite() || y5[0] < SHOCK_FRACTION * r0 {
                if hs <= 1e-14 * t.max(1.0) {
                    return Ok(OracleTrajectory {
                        samples,
                        shock_time: Some(t),
                    });
                }
                h = hs * 0.25;
                continue;
            }
            if e <= 1.0 {
                t += hs;
                y = y5;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h = hs * factor;
            if h < 1e-14 * t.max(1.0) {
                return Ok(OracleTrajectory {
                    samples,
                    shock_time: Some(t),
                });
            }
        }
        samples.push(OracleSample {
            t: target,
            r: y[0],
            beta: y[1],
            rho: density(y[0]),
        });
    }
    Ok(OracleTrajectory {
        samples,
        shock_time: None,
    })
}

/// One Dormand-Prince step: fifth-order solution and its difference from the
/// embedded fourth-order one.
fn dopri_step(f: &impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut k = [[0.0; 2]; 7];
    k[0] = f(t, y);
    for s in 0..6 {
        let mut ys = y;
        for (j, a) in A[s].iter().enumerate() {
            ys[0] += h * a * k[j][0];
            ys[1] += h * a * k[j][1];
        }
        k[s + 1] = f(t + C[s] * h, ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for d in 0..2 {
            y5[d] += h * B5[s] * k[s][d];
            err[d] += h * (B5[s] - B4[s]) * k[s][d];
        }
    }
    (y5, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FlowConfig {
        FlowConfig {
            t0: Some(0.05),
            ..Default::default()
        }
    }

    #[test]
    fn no_force_keeps_radius() {
        let times: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let tr = circle_ode_oracle(12.0, 0.0, &cfg(), OracleModel::ConstantDensity, &times, 1e-9).unwrap();
        assert!(tr.samples.iter().all(|s| s.r == 12.0 && s.beta == 0.0));
    }

    #[test]
    fn large_circle_speed_has_closed_form() {
        // on a huge circle the density stays rho0 = 1, so for k = 2
        // beta' = 4 f - 3 beta / t, solved by beta = f (t^4 - t0^4) / t^3
        let cfg = cfg();
        let times = [0.5, 1.0, 2.0];
        let tr = circle_ode_oracle(1e9, 0.3, &cfg, OracleModel::Flowable, &times, 1e-10).unwrap();
        let t0: f64 = 0.05;
        for s in &tr.samples {
            let expected = 0.3 * (s.t.powi(4) - t0.powi(4)) / s.t.powi(3);
            assert!((s.beta - expected).abs() < 1e-8 * expected, "{} vs {}", s.beta, expected);
        }
    }

    #[test]
    fn tolerance_refinement_converges() {
        let times: Vec<f64> = (1..=15).map(|i| 0.2 * i as f64).collect();
        for model in [OracleModel::ConstantDensity, OracleModel::Flowable] {
            let a = circle_ode_oracle(20.0, 0.5, &cfg(), model, &times, 1e-6).unwrap();
            let b = circle_ode_oracle(20.0, 0.5, &cfg(), model, &times, 1e-9).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x.r - y.r).abs() < 1e-5 * y.r);
            }
        }
    }

    #[test]
    fn shrinking_circle_hits_shock() {
        let times: Vec<f64> = (1..=100).map(|i| 0.5 * i as f64).collect();
        let tr = circle_ode_oracle(10.0, 1.0, &cfg(), OracleModel::ConstantDensity, &times, 1e-9).unwrap();
        assert!(tr.shocked());
        assert!(tr.samples.len() < times.len());
        assert!(tr.samples.windows(2).all(|w| w[1].r < w[0].r));
    }

    #[test]
    fn flowable_density_follows_radius() {
        let times = [1.0, 2.0];
        let tr = circle_ode_oracle(15.0, -0.4, &cfg(), OracleModel::Flowable, &times, 1e-9).unwrap();
        for s in &tr.samples {
            assert!((s.rho * s.r - 15.0).abs() < 1e-9);
            assert!(s.r > 15.0);
        }
    }

    #[test]
    fn bad_inputs() {
        let times = [1.0];
        let no_t0 = FlowConfig::default();
        assert!(circle_ode_oracle(5.0, 1.0, &no_t0, OracleModel::Flowable, &times, 1e-9).is_err());
        assert!(circle_ode_oracle(-5.0, 1.0, &cfg(), OracleModel::Flowable, &times, 1e-9).is_err());
        assert!(circle_ode_oracle(5.0, 1.0, &cfg(), OracleModel::Flowable, &[2.0, 1.0], 1e-9).is_err());
    }
}
