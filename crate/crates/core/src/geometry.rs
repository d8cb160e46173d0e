//! Closed marker curves and their differential geometry.
//!
//! Curves are stored counterclockwise (positive shoelace area). The unit
//! normal is the tangent rotated by +90 degrees, which points into the
//! enclosed region, and curvature is signed so that a counterclockwise circle
//! of radius `R` has `kappa = +1/R`. With this convention the planar Frenet
//! relation reads `dT/ds = kappa N`.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Smallest number of markers a curve may carry.
pub const MIN_MARKERS: usize = 8;

const MIN_SEGMENT: f64 = 1e-12;

/// A closed polyline `C(p)` with optional per-marker scalar channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerCurve {
    pub points: Vec<Vec2>,
    /// Normal speed.
    pub beta: Option<Vec<f64>>,
    /// Internal (tangential) mass flow speed.
    pub v: Option<Vec<f64>>,
    /// Mass per unit arclength.
    pub rho: Option<Vec<f64>>,
    /// Tangential curve speed.
    pub alpha: Option<Vec<f64>>,
}

impl MarkerCurve {
    /// Builds a curve and checks every invariant.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        let c = MarkerCurve {
            points,
            beta: None,
            v: None,
            rho: None,
            alpha: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Like [`MarkerCurve::new`] but reverses clockwise input.
    pub fn from_polygon(mut points: Vec<Vec2>) -> Result<Self> {
        if points.len() >= 3 && signed_area(&points) < 0.0 {
            points.reverse();
        }
        MarkerCurve::new(points)
    }

    pub fn circle(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        MarkerCurve::ellipse(center, radius, radius, n)
    }

    /// Samples `center + (a cos th, b sin th)` at `n` equally spaced angles.
    pub fn ellipse(center: Vec2, a: f64, b: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / n as f64;
                center + Vec2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        MarkerCurve::new(pts)
    }

    /// Axis-aligned rectangle with markers equally spaced in arclength.
    pub fn rectangle(min: Vec2, max: Vec2, n: usize) -> Result<Self> {
        let corners = vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ];
        let base = MarkerCurve::from_polygon_unchecked(corners);
        resample_points(&base.points, n).and_then(MarkerCurve::from_polygon)
    }

    fn from_polygon_unchecked(points: Vec<Vec2>) -> Self {
        MarkerCurve {
            points,
            beta: None,
            v: None,
            rho: None,
            alpha: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_beta(mut self, beta: Vec<f64>) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_v(mut self, v: Vec<f64>) -> Self {
        self.v = Some(v);
        self
    }

    pub fn with_rho(mut self, rho: Vec<f64>) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n < MIN_MARKERS {
            return Err(Error::TooFewMarkers(n));
        }
        if !self.points.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("curve points"));
        }
        segment_lengths(&self.points)?;
        let area = signed_area(&self.points);
        if area <= 0.0 {
            return Err(Error::Orientation(area));
        }
        for (name, ch) in self.channels() {
            if let Some(ch) = ch {
                if ch.len() != n {
                    return Err(Error::ChannelLength {
                        name,
                        got: ch.len(),
                        expected: n,
                    });
                }
                if !ch.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite(name));
                }
            }
        }
        Ok(())
    }

    fn channels(&self) -> [(&'static str, Option<&Vec<f64>>); 4] {
        [
            ("beta", self.beta.as_ref()),
            ("v", self.v.as_ref()),
            ("rho", self.rho.as_ref()),
            ("alpha", self.alpha.as_ref()),
        ]
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn length(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| (self.points[(i + 1) % n] - self.points[i]).norm())
            .sum()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.length() / self.points.len() as f64
    }

    /// Arclength attributed to each marker: half of each adjacent segment.
    pub fn dual_lengths(&self) -> Vec<f64> {
        dual_lengths(&self.points)
    }

    /// Total mass `sum rho_i ds_i`, or `None` without a density channel.
    pub fn mass(&self) -> Option<f64> {
        let rho = self.rho.as_ref()?;
        Some(
            rho.iter()
                .zip(self.dual_lengths())
                .map(|(r, ds)| r * ds)
                .sum(),
        )
    }
}

/// Shoelace signed area; positive for counterclockwise loops.
pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum::<f64>()
}

/// Length of segment `i -> i+1` (closing segment included).
pub fn segment_lengths(points: &[Vec2]) -> Result<Vec<f64>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let l = (points[(i + 1) % n] - points[i]).norm();
            if l > MIN_SEGMENT {
                Ok(l)
            } else {
                Err(Error::DegenerateSegment {
                    index: i,
                    length: l,
                })
            }
        })
        .collect()
}

pub(crate) fn dual_lengths(points: &[Vec2]) -> Vec<f64> {
    let n = points.len();
    let seg: Vec<f64> = (0..n)
        .map(|i| (points[(i + 1) % n] - points[i]).norm())
        .collect();
    (0..n).map(|i| 0.5 * (seg[(i + n - 1) % n] + seg[i])).collect()
}

/// Unit tangent, inward normal, curvature and arclength at every marker.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFrame {
    pub tangent: Vec<Vec2>,
    pub normal: Vec<Vec2>,
    pub kappa: Vec<f64>,
    /// Cumulative arclength at each marker, starting from 0 at marker 0.
    pub s: Vec<f64>,
    /// Total length.
    pub length: f64,
    /// `seg[i]` is the length of segment `i -> i+1`.
    pub seg: Vec<f64>,
}

impl CurveFrame {
    pub fn mean_spacing(&self) -> f64 {
        self.length / self.seg.len() as f64
    }

    /// Dual (per-marker) arclength weights.
    pub fn ds(&self) -> Vec<f64> {
        let n = self.seg.len();
        (0..n)
            .map(|i| 0.5 * (self.seg[(i + n - 1) % n] + self.seg[i]))
            .collect()
    }

    /// Curvature limited to `|kappa| <= 2 / mean spacing`.
    pub fn clamped_kappa(&self) -> Vec<f64> {
        let lim = 2.0 / self.mean_spacing();
        self.kappa.iter().map(|k| k.clamp(-lim, lim)).collect()
    }

    /// Arclength derivative of a per-marker scalar (three-point, nonuniform).
    pub fn d_ds(&self, q: &[f64]) -> Vec<f64> {
        let n = self.seg.len();
        (0..n)
            .map(|i| {
                let im = (i + n - 1) % n;
                let ip = (i + 1) % n;
                let (h1, h2) = (self.seg[im], self.seg[i]);
                (h1 * h1 * (q[ip] - q[i]) + h2 * h2 * (q[i] - q[im])) / (h1 * h2 * (h1 + h2))
            })
            .collect()
    }
}

/// Frenet frame of a closed curve.
///
/// Derivatives use the three-point formulas on the chord-length
/// parameterisation, which are second order for smooth curves even when the
/// marker spacing is uneven.
pub fn compute_frame(curve: &MarkerCurve) -> Result<CurveFrame> {
    let pts = &curve.points;
    let n = pts.len();
    if n < MIN_MARKERS {
        return Err(Error::TooFewMarkers(n));
    }
    let seg = segment_lengths(pts)?;
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for l in &seg {
        s.push(acc);
        acc += l;
    }
    let mut tangent = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let ip = (i + 1) % n;
        let (h1, h2) = (seg[im], seg[i]);
        let back = pts[i] - pts[im];
        let fwd = pts[ip] - pts[i];
        let d1 = (fwd * (h1 * h1) + back * (h2 * h2)) / (h1 * h2 * (h1 + h2));
        let d2 = (fwd * h1 - back * h2) * (2.0 / (h1 * h2 * (h1 + h2)));
        let speed = d1.norm();
        if speed <= MIN_SEGMENT {
            return Err(Error::DegenerateSegment {
                index: i,
                length: speed,
            });
        }
        let t = d1 / speed;
        tangent.push(t);
        normal.push(t.perp());
        kappa.push(d1.cross(d2) / (speed * speed * speed));
    }
    Ok(CurveFrame {
        tangent,
        normal,
        kappa,
        s,
        length: acc,
        seg,
    })
}

/// Positions of `n` markers equally spaced in arclength along the closed
/// polyline, starting at marker 0, plus the (segment, weight) pair each came
/// from.
pub(crate) fn arclength_stations(points: &[Vec2], n: usize) -> Vec<(usize, f64)> {
    let m = points.len();
    let seg: Vec<f64> = (0..m)
        .map(|i| (points[(i + 1) % m] - points[i]).norm())
        .collect();
    let total: f64 = seg.iter().sum();
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut start = 0.0;
    for j in 0..n {
        let target = j as f64 * step;
        while k + 1 < m && start + seg[k] <= target {
            start += seg[k];
            k += 1;
        }
        let w = if seg[k] > 0.0 {
            ((target - start) / seg[k]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((k, w));
    }
    out
}

fn resample_points(points: &[Vec2], n: usize) -> Result<Vec<Vec2>> {
    if n < MIN_MARKERS {
        return Err(Error::TooFewMarkers(n));
    }
    let m = points.len();
    Ok(arclength_stations(points, n)
        .into_iter()
        .map(|(k, w)| points[k].lerp(points[(k + 1) % m], w))
        .collect())
}

/// Redistributes the curve onto `n` markers equally spaced in arclength.
///
/// Channels are interpolated linearly in arclength; the density is then
/// rescaled so the total mass is unchanged.
pub fn resample_arclength(curve: &MarkerCurve, n: usize) -> Result<MarkerCurve> {
    if n < MIN_MARKERS {
        return Err(Error::TooFewMarkers(n));
    }
    let m = curve.points.len();
    let stations = arclength_stations(&curve.points, n);
    let interp = |ch: &Vec<f64>| -> Vec<f64> {
        stations
            .iter()
            .map(|&(k, w)| ch[k] * (1.0 - w) + ch[(k + 1) % m] * w)
            .collect()
    };
    let points = stations
        .iter()
        .map(|&(k, w)| curve.points[k].lerp(curve.points[(k + 1) % m], w))
        .collect();
    let mut out = MarkerCurve {
        points,
        beta: curve.beta.as_ref().map(interp),
        v: curve.v.as_ref().map(interp),
        rho: curve.rho.as_ref().map(interp),
        alpha: curve.alpha.as_ref().map(interp),
    };
    if let (Some(before), Some(after)) = (curve.mass(), out.mass()) {
        if after > 0.0 {
            let scale = before / after;
            if let Some(rho) = out.rho.as_mut() {
                rho.iter_mut().for_each(|r| *r *= scale);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Finite-difference check of the frame evolution identity
/// `dT/dt = (d beta/ds + alpha kappa) N` under `dC/dt = alpha T + beta N`.
///
/// Takes one Euler step of size `dt`, recomputes the frame and returns the
/// largest marker residual `|dT/dt - (beta_s + alpha kappa) N|`.
pub fn verify_frame_evolution(
    curve: &MarkerCurve,
    alpha: &[f64],
    beta: &[f64],
    dt: f64,
) -> Result<f64> {
    let n = curve.len();
    for (name, ch) in [("alpha", alpha), ("beta", beta)] {
        if ch.len() != n {
            return Err(Error::ChannelLength {
                name,
                got: ch.len(),
                expected: n,
            });
        }
    }
    let f0 = compute_frame(curve)?;
    let beta_s = f0.d_ds(beta);
    let moved: Vec<Vec2> = (0..n)
        .map(|i| curve.points[i] + (f0.tangent[i] * alpha[i] + f0.normal[i] * beta[i]) * dt)
        .collect();
    let f1 = compute_frame(&MarkerCurve {
        points: moved,
        beta: None,
        v: None,
        rho: None,
        alpha: None,
    })?;
    Ok((0..n)
        .map(|i| {
            let dtdt = (f1.tangent[i] - f0.tangent[i]) / dt;
            let predicted = f0.normal[i] * (beta_s[i] + alpha[i] * f0.kappa[i]);
            (dtdt - predicted).norm()
        })
        .fold(0.0, f64::max))
}

/// Symmetric Hausdorff distance between two polylines, measured from each
/// vertex set to the other curve's segments.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    fn one_way(a: &[Vec2], b: &[Vec2]) -> f64 {
        let m = b.len();
        a.iter()
            .map(|&p| {
                (0..m)
                    .map(|j| point_segment_distance(p, b[j], b[(j + 1) % m]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    one_way(a, b).max(one_way(b, a))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    let w = if l2 > 0.0 {
        ((p - a).dot(ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * w)).norm()
}
