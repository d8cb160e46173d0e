//! Potential energies and the local normal forces they induce.
//!
//! Every force here is the scalar `f` in `dC/dt = f N` with the inward
//! normal `N` of [`crate::geometry`], i.e. the first variation of the energy
//! is `-integral f (dC . N) ds` and `f > 0` pushes the contour inwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurveFrame, MarkerCurve};
use crate::grid::{GridField, Mask};
use crate::vec2::Vec2;

/// Greyscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    field: GridField,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self> {
        if width < 16 || height < 16 {
            return Err(Error::GridShape {
                width,
                height,
                reason: "images must be at least 16x16",
            });
        }
        let field = GridField::from_vec(width, height, intensities)?;
        if !field.all_finite() {
            return Err(Error::NonFinite("image intensities"));
        }
        if field.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(
                "image intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(ImageGrid { field })
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let g = GridField::from_fn(width, height, f);
        ImageGrid::new(width, height, g.data)
    }

    pub fn width(&self) -> usize {
        self.field.width
    }

    pub fn height(&self) -> usize {
        self.field.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.field.get(x, y)
    }

    pub fn sample(&self, p: Vec2) -> f64 {
        self.field.sample(p)
    }

    pub fn as_field(&self) -> &GridField {
        &self.field
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyKind {
    ChanVese,
    Geodesic,
}

/// Per-marker scalar force tagged with the energy that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    pub values: Vec<f64>,
    pub energy: EnergyKind,
}

impl ForceField {
    pub fn constant(n: usize, value: f64, energy: EnergyKind) -> Self {
        ForceField {
            values: vec![value; n],
            energy,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Mean intensity inside (`c1`) and outside (`c2`) the mask.
pub fn region_means(image: &ImageGrid, inside: &Mask) -> Result<(f64, f64)> {
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (v, &m) in image.field.data.iter().zip(&inside.data) {
        if m {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    if n_in == 0 {
        return Err(Error::EmptyRegion("inside"));
    }
    if n_out == 0 {
        return Err(Error::EmptyRegion("outside"));
    }
    Ok((s_in / n_in as f64, s_out / n_out as f64))
}

#[inline]
fn chan_vese_local(i: f64, c1: f64, c2: f64, alpha_len: f64, kappa: f64) -> f64 {
    (i - c1).powi(2) - (i - c2).powi(2) + alpha_len * kappa
}

/// Chan-Vese force `(I - c1)^2 - (I - c2)^2 + alpha_len * kappa` at the
/// markers, with `I` sampled bilinearly.
pub fn chan_vese_force(
    image: &ImageGrid,
    points: &[Vec2],
    kappa: &[f64],
    c1: f64,
    c2: f64,
    alpha_len: f64,
) -> ForceField {
    let values = points
        .iter()
        .zip(kappa)
        .map(|(&p, &k)| chan_vese_local(image.sample(p), c1, c2, alpha_len, k))
        .collect();
    ForceField {
        values,
        energy: EnergyKind::ChanVese,
    }
}

/// The same force evaluated at every pixel (the natural extension used by
/// the level-set backend). `kappa` is the curvature of the level sets.
pub fn chan_vese_force_grid(
    image: &ImageGrid,
    kappa: Option<&GridField>,
    c1: f64,
    c2: f64,
    alpha_len: f64,
) -> GridField {
    let mut out = image.field.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        let k = kappa.map_or(0.0, |g| g.data[i]);
        *v = chan_vese_local(*v, c1, c2, alpha_len, k);
    }
    out
}

/// `sum_in (I - c1)^2 + sum_out (I - c2)^2 + alpha_len * length`, one unit of
/// area per pixel.
pub fn chan_vese_energy(
    image: &ImageGrid,
    inside: &Mask,
    alpha_len: f64,
    length: f64,
) -> Result<f64> {
    let (c1, c2) = region_means(image, inside)?;
    let data: f64 = image
        .field
        .data
        .iter()
        .zip(&inside.data)
        .map(|(&v, &m)| if m { (v - c1).powi(2) } else { (v - c2).powi(2) })
        .sum();
    Ok(data + alpha_len * length)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur truncated at 3 sigma, replicating border pixels.
pub fn gaussian_blur(field: &GridField, sigma: f64) -> GridField {
    if sigma <= 0.0 {
        return field.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (field.width as isize, field.height as isize);
    let mut tmp = field.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let xx = (x + j as isize - r).clamp(0, w - 1);
                acc += kv * field.data[(y * w + xx) as usize];
            }
            tmp.data[(y * w + x) as usize] = acc;
        }
    }
    let mut out = tmp.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let yy = (y + j as isize - r).clamp(0, h - 1);
                acc += kv * tmp.data[(yy * w + x) as usize];
            }
            out.data[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// Edge-stopping function `phi = 1 / (1 + |grad(G_sigma * I)|^2)`.
pub fn edge_map(image: &ImageGrid, sigma: f64) -> Result<GridField> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let smooth = gaussian_blur(&image.field, sigma);
    let (w, h) = (smooth.width, smooth.height);
    Ok(GridField::from_fn(w, h, |x, y| {
        // one-sided at the border, central inside
        let gx = match x {
            0 => smooth.get(1, y) - smooth.get(0, y),
            _ if x == w - 1 => smooth.get(x, y) - smooth.get(x - 1, y),
            _ => 0.5 * (smooth.get(x + 1, y) - smooth.get(x - 1, y)),
        };
        let gy = match y {
            0 => smooth.get(x, 1) - smooth.get(x, 0),
            _ if y == h - 1 => smooth.get(x, y) - smooth.get(x, y - 1),
            _ => 0.5 * (smooth.get(x, y + 1) - smooth.get(x, y - 1)),
        };
        1.0 / (1.0 + gx * gx + gy * gy)
    }))
}

/// Geodesic active contour force `f = phi kappa - grad(phi) . N`.
pub fn geodesic_force(
    phi: &GridField,
    frame: &CurveFrame,
    markers: &MarkerCurve,
) -> Result<ForceField> {
    let grad = phi.gradient();
    let values = markers
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if !phi.contains(p) {
                return Err(Error::OutsideGrid { index: i, x: p.x, y: p.y });
            }
            Ok(phi.sample(p) * frame.kappa[i] - grad.sample(p).dot(frame.normal[i]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForceField {
        values,
        energy: EnergyKind::Geodesic,
    })
}

/// Weighted length `integral phi ds` of a closed polyline (midpoint rule).
pub fn geodesic_energy(phi: &GridField, points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            phi.sample(a.lerp(b, 0.5)) * (b - a).norm()
        })
        .sum()
}

fn rho_channel(curve: &MarkerCurve) -> Result<&Vec<f64>> {
    let rho = curve.rho.as_ref().ok_or(Error::MissingChannel("rho"))?;
    if rho.len() != curve.len() {
        return Err(Error::ChannelLength {
            name: "rho",
            got: rho.len(),
            expected: curve.len(),
        });
    }
    if rho.iter().any(|&r| !(r >= 0.0)) {
        return Err(Error::InvalidParameter("density must be non-negative".into()));
    }
    Ok(rho)
}

/// Mass potential energy `g L sum_i rho_i^2 ds_i / 2` with dual arclength
/// weights `ds_i`. Its minimum over densities of fixed total mass `M` is
/// `g M^2 / 2` for every curve.
pub fn mass_potential_energy(curve: &MarkerCurve, g: f64) -> Result<f64> {
    let rho = rho_channel(curve)?;
    let ds = curve.dual_lengths();
    let length: f64 = ds.iter().sum();
    let q: f64 = rho.iter().zip(&ds).map(|(r, d)| 0.5 * r * r * d).sum();
    Ok(g * length * q)
}

/// Exact gradient of [`mass_potential_energy`].
#[derive(Debug, Clone, PartialEq)]
pub struct MassPotentialForces {
    /// `-dU/dx_j` at fixed densities.
    pub position_force: Vec<Vec2>,
    /// `dU/d rho_j`.
    pub d_rho: Vec<f64>,
}

pub fn mass_potential_forces(curve: &MarkerCurve, g: f64) -> Result<MassPotentialForces> {
    let rho = rho_channel(curve)?;
    let pts = &curve.points;
    let n = pts.len();
    let seg: Vec<f64> = (0..n).map(|i| (pts[(i + 1) % n] - pts[i]).norm()).collect();
    let unit: Vec<Vec2> = (0..n)
        .map(|i| (pts[(i + 1) % n] - pts[i]) / seg[i])
        .collect();
    let length: f64 = seg.iter().sum();
    let ds: Vec<f64> = (0..n).map(|i| 0.5 * (seg[(i + n - 1) % n] + seg[i])).collect();
    // U = g L Q with Q = 1/4 sum_i seg_i (rho_i^2 + rho_{i+1}^2)
    let q: f64 = rho.iter().zip(&ds).map(|(r, d)| 0.5 * r * r * d).sum();
    let position_force = (0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            let dl = unit[jm] - unit[j];
            let dq = unit[jm] * (0.25 * (rho[jm].powi(2) + rho[j].powi(2)))
                - unit[j] * (0.25 * (rho[j].powi(2) + rho[jp].powi(2)));
            -(dl * q + dq * length) * g
        })
        .collect();
    let d_rho = (0..n).map(|j| g * length * rho[j] * ds[j]).collect();
    Ok(MassPotentialForces {
        position_force,
        d_rho,
    })
}
