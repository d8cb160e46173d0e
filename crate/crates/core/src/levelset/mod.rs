//! Implicit grid backend.
//!
//! The contour is the zero level set of `psi`, negative inside. With
//! `n = grad psi / |grad psi|` the outward normal, the inward normal used by
//! the marker backend is `N = -n` and the tangent `T = (N.y, -N.x)`, so a
//! counter-clockwise marker curve and its level-set image share signs.
//! Fronts move inward where the normal speed is positive:
//! `psi_t = beta |grad psi|`.

mod contour;
mod extend;
mod hj;
mod run;
mod sdf;

pub use contour::{extract_contour, extract_contours};
pub use extend::{extend_field, extend_vector_field};
pub use hj::{
    accel_const_ls_step, accel_flowable_ls_step, gradient_ls_step, ls_force, upwind_grad_norm,
};
pub use run::{run_levelset, LevelSetRun};
pub use sdf::{init_signed_distance, reinitialize, Shape};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flows::{FlowConfig, Method};
use crate::grid::{GridField, GridVectorField, Mask};
use crate::vec2::Vec2;

/// Regularisation of `|grad psi|` in normals and curvature.
pub const NORMAL_EPS: f64 = 1e-8;
/// Half-width of the smoothed delta used for line integrals.
pub const DELTA_WIDTH: f64 = 1.5;
/// Half-width of the band on which speeds and densities are checked.
pub const BAND: f64 = 5.0;
/// Level-set curvature is clamped to this magnitude (one over the spacing).
pub const KAPPA_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub psi: GridField,
}

impl LevelSetField {
    pub fn width(&self) -> usize {
        self.psi.width
    }

    pub fn height(&self) -> usize {
        self.psi.height
    }

    pub fn inside(&self) -> Mask {
        Mask::from_fn(self.width(), self.height(), |x, y| self.psi.get(x, y) < 0.0)
    }

    /// Outward unit normals `grad psi / sqrt(|grad psi|^2 + eps^2)`.
    pub fn outward_normals(&self) -> GridVectorField {
        let mut g = self.psi.gradient();
        for i in 0..g.x.len() {
            let v = g.at(i);
            let norm = (v.norm_sq() + NORMAL_EPS * NORMAL_EPS).sqrt();
            g.put(i, v / norm);
        }
        g
    }

    /// Curvature of the level sets, `div(grad psi / |grad psi|)`, from
    /// central differences and clamped to `KAPPA_MAX`.
    pub fn curvature(&self) -> GridField {
        let p = &self.psi;
        GridField::from_fn(p.width, p.height, |x, y| {
            let c = p.get(x, y);
            let g = |dx, dy| p.ghost(x, y, dx, dy);
            let px = 0.5 * (g(1, 0) - g(-1, 0));
            let py = 0.5 * (g(0, 1) - g(0, -1));
            let pxx = g(1, 0) - 2.0 * c + g(-1, 0);
            let pyy = g(0, 1) - 2.0 * c + g(0, -1);
            let pxy = 0.25 * (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1));
            let norm2 = px * px + py * py + NORMAL_EPS * NORMAL_EPS;
            let k = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / norm2.powf(1.5);
            k.clamp(-KAPPA_MAX, KAPPA_MAX)
        })
    }

    /// `sum q delta(psi) |grad psi|` with a cosine delta of half-width
    /// `DELTA_WIDTH`: the line integral of `q` along the zero set.
    pub fn line_integral(&self, q: Option<&GridField>) -> f64 {
        let p = &self.psi;
        let mut total = 0.0;
        for y in 0..p.height {
            for x in 0..p.width {
                let v = p.get(x, y);
                if v.abs() >= DELTA_WIDTH {
                    continue;
                }
                let delta = (1.0 + (std::f64::consts::PI * v / DELTA_WIDTH).cos()) / (2.0 * DELTA_WIDTH);
                let w = q.map_or(1.0, |q| q.get(x, y));
                total += w * delta * p.central_grad(x, y).norm();
            }
        }
        total
    }

    /// Indices of nodes with `|psi| < BAND`.
    pub(crate) fn band(&self) -> impl Iterator<Item = usize> + '_ {
        self.psi
            .data
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() < BAND)
            .map(|(i, _)| i)
    }
}

/// Inward normal and tangent from an outward normal.
#[inline]
pub(crate) fn frame_from_outward(n: Vec2) -> (Vec2, Vec2) {
    let nn = -n;
    (Vec2::new(nn.y, -nn.x), nn)
}

/// A level-set function with the speed channels of an accelerated flow.
#[derive(Debug, Clone)]
pub struct ExtendedState {
    pub psi: LevelSetField,
    /// Normal speed extension (constant-density flow).
    pub beta_hat: Option<GridField>,
    /// Velocity extension (flowable flow).
    pub v_hat: Option<GridVectorField>,
    /// Density extension (flowable flow).
    pub rho_hat: Option<GridField>,
    pub t: f64,
    pub step: usize,
    pub(crate) rng: ChaCha8Rng,
}

impl ExtendedState {
    pub fn new(psi: LevelSetField, seed: u64) -> Self {
        ExtendedState {
            psi,
            beta_hat: None,
            v_hat: None,
            rho_hat: None,
            t: 0.0,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// State at rest with the channels `method` needs.
    pub fn at_rest(psi: LevelSetField, method: Method, cfg: &FlowConfig) -> Self {
        let (w, h) = (psi.width(), psi.height());
        let mut s = ExtendedState::new(psi, cfg.seed);
        match method {
            Method::AccelConst => s.beta_hat = Some(GridField::filled(w, h, 0.0)),
            Method::AccelFlowable => {
                s.v_hat = Some(GridVectorField::zeros(w, h));
                s.rho_hat = Some(GridField::filled(w, h, cfg.rho0));
            }
            Method::Gradient | Method::Sobolev => {}
        }
        s
    }

    /// Mass on the zero set, `sum rho delta(psi) |grad psi|`, or `None`
    /// without a density channel.
    pub fn band_mass(&self) -> Option<f64> {
        self.rho_hat.as_ref().map(|r| self.psi.line_integral(Some(r)))
    }

    /// Largest speed on the band.
    pub fn max_band_speed(&self) -> f64 {
        let at = |i: usize| -> f64 {
            if let Some(b) = &self.beta_hat {
                b.data[i].abs()
            } else if let Some(v) = &self.v_hat {
                v.at(i).norm()
            } else {
                0.0
            }
        };
        self.psi.band().map(at).fold(0.0, f64::max)
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let (w, h) = (self.psi.width(), self.psi.height());
        let bad = |name| {
            Err(Error::ChannelLength {
                name,
                got: 0,
                expected: w * h,
            })
        };
        if self.beta_hat.as_ref().is_some_and(|b| b.width != w || b.height != h) {
            return bad("beta_hat");
        }
        if self.v_hat.as_ref().is_some_and(|v| v.x.width != w || v.x.height != h) {
            return bad("v_hat");
        }
        if self.rho_hat.as_ref().is_some_and(|r| r.width != w || r.height != h) {
            return bad("rho_hat");
        }
        Ok(())
    }
}
