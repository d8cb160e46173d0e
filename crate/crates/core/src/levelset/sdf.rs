//! Signed distance construction and reinitialisation by fast sweeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, MarkerCurve};
use crate::grid::{GridField, Mask};
use crate::vec2::Vec2;

use super::LevelSetField;

/// Initial contour description shared by both backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Polyline { points: Vec<[f64; 2]> },
}

impl Shape {
    fn bounds(&self) -> (Vec2, Vec2) {
        match self {
            Shape::Circle { center, radius } => (
                Vec2::new(center[0] - radius, center[1] - radius),
                Vec2::new(center[0] + radius, center[1] + radius),
            ),
            Shape::Rectangle { min, max } => (Vec2::new(min[0], min[1]), Vec2::new(max[0], max[1])),
            Shape::Polyline { points } => points.iter().fold(
                (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                |(lo, hi), p| {
                    (
                        Vec2::new(lo.x.min(p[0]), lo.y.min(p[1])),
                        Vec2::new(hi.x.max(p[0]), hi.y.max(p[1])),
                    )
                },
            ),
        }
    }

    /// True when the shape lies strictly inside the node rectangle of a
    /// `width x height` grid.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        let (lo, hi) = self.bounds();
        lo.x > 0.0 && lo.y > 0.0 && hi.x < (width - 1) as f64 && hi.y < (height - 1) as f64
    }

    /// Marker curve with roughly `spacing` between markers.
    pub fn to_curve(&self, spacing: f64) -> Result<MarkerCurve> {
        let count = |perimeter: f64| ((perimeter / spacing).round() as usize).max(crate::geometry::MIN_MARKERS);
        match self {
            Shape::Circle { center, radius } => MarkerCurve::circle(
                Vec2::new(center[0], center[1]),
                *radius,
                count(std::f64::consts::TAU * radius),
            ),
            Shape::Rectangle { min, max } => MarkerCurve::rectangle(
                Vec2::new(min[0], min[1]),
                Vec2::new(max[0], max[1]),
                count(2.0 * (max[0] - min[0] + max[1] - min[1])),
            ),
            Shape::Polyline { points } => {
                let c = MarkerCurve::from_polygon(points.iter().map(|p| Vec2::new(p[0], p[1])).collect())?;
                crate::geometry::resample_arclength(&c, count(c.length()))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Shape::Circle { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidParameter(format!("circle radius must be > 0, got {radius}")))
            }
            Shape::Rectangle { min, max } if !(max[0] > min[0] && max[1] > min[1]) => Err(
                Error::InvalidParameter("rectangle max must exceed min".into()),
            ),
            Shape::Polyline { points } if points.len() < 3 => Err(Error::InvalidParameter(
                "polyline needs at least 3 points".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Signed distance to `shape`, negative inside.
///
/// Circles and rectangles are exact. Polylines get exact distances on the
/// nodes next to the curve and fast sweeping elsewhere; the sign comes from
/// an even-odd inside test.
pub fn init_signed_distance(shape: &Shape, width: usize, height: usize) -> Result<LevelSetField> {
    shape.validate()?;
    if width < 4 || height < 4 {
        return Err(Error::GridShape {
            width,
            height,
            reason: "level-set grids need at least 4x4 nodes",
        });
    }
    if !shape.fits(width, height) {
        return Err(Error::ShapeOutsideGrid { width, height });
    }
    let psi = match shape {
        Shape::Circle { center, radius } => {
            let c = Vec2::new(center[0], center[1]);
            GridField::from_fn(width, height, |x, y| (Vec2::new(x as f64, y as f64) - c).norm() - radius)
        }
        Shape::Rectangle { min, max } => {
            let c = Vec2::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]));
            let half = Vec2::new(0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1]));
            GridField::from_fn(width, height, |x, y| {
                let qx = (x as f64 - c.x).abs() - half.x;
                let qy = (y as f64 - c.y).abs() - half.y;
                let outside = Vec2::new(qx.max(0.0), qy.max(0.0)).norm();
                outside + qx.max(qy).min(0.0)
            })
        }
        Shape::Polyline { points } => {
            let pts: Vec<Vec2> = points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
            polyline_distance(&pts, width, height)
        }
    };
    Ok(LevelSetField { psi })
}

fn polyline_distance(pts: &[Vec2], width: usize, height: usize) -> GridField {
    let n = pts.len();
    let mut dist = GridField::filled(width, height, f64::INFINITY);
    let mut fixed = vec![false; width * height];
    const REACH: f64 = 1.5;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let x0 = (a.x.min(b.x) - REACH).floor().max(0.0) as usize;
        let x1 = ((a.x.max(b.x) + REACH).ceil() as usize).min(width - 1);
        let y0 = (a.y.min(b.y) - REACH).floor().max(0.0) as usize;
        let y1 = ((a.y.max(b.y) + REACH).ceil() as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = point_segment_distance(Vec2::new(x as f64, y as f64), a, b);
                let k = dist.idx(x, y);
                if d <= REACH && d < dist.data[k] {
                    dist.data[k] = d;
                    fixed[k] = true;
                }
            }
        }
    }
    fast_sweep(&mut dist, &fixed);
    let inside = Mask::from_polygon(width, height, pts);
    for (d, &m) in dist.data.iter_mut().zip(&inside.data) {
        if m {
            *d = -*d;
        }
    }
    dist
}

/// Solves `|grad u| = 1` for the unknown nodes by Gauss-Seidel sweeps in the
/// four diagonal orderings, keeping `fixed` nodes.
pub(crate) fn fast_sweep(u: &mut GridField, fixed: &[bool]) {
    let (w, h) = (u.width, u.height);
    let get = |u: &GridField, x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            f64::INFINITY
        } else {
            u.data[y as usize * w + x as usize]
        }
    };
    for _round in 0..3 {
        let mut changed = false;
        for dir in 0..4 {
            let xs: Vec<usize> = if dir & 1 == 0 { (0..w).collect() } else { (0..w).rev().collect() };
            let ys: Vec<usize> = if dir & 2 == 0 { (0..h).collect() } else { (0..h).rev().collect() };
            for &y in &ys {
                for &x in &xs {
                    let k = y * w + x;
                    if fixed[k] {
                        continue;
                    }
                    let (xi, yi) = (x as isize, y as isize);
                    let a = get(u, xi - 1, yi).min(get(u, xi + 1, yi));
                    let b = get(u, xi, yi - 1).min(get(u, xi, yi + 1));
                    if !a.is_finite() && !b.is_finite() {
                        continue;
                    }
                    let cand = if (a - b).abs() >= 1.0 {
                        a.min(b) + 1.0
                    } else {
                        0.5 * (a + b + (2.0 - (a - b) * (a - b)).sqrt())
                    };
                    if cand < u.data[k] {
                        u.data[k] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Nodes adjacent to a sign change and their distance to the front.
pub(crate) fn front_distances(psi: &GridField) -> (Vec<f64>, Vec<bool>) {
    let (w, h) = (psi.width, psi.height);
    let mut dist = vec![f64::INFINITY; w * h];
    let mut fixed = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let p = psi.data[k];
            let inside = p < 0.0;
            let axis = |nbs: [Option<usize>; 2]| -> f64 {
                nbs.iter()
                    .flatten()
                    .filter(|&&j| (psi.data[j] < 0.0) != inside)
                    .map(|&j| p.abs() / (p - psi.data[j]).abs())
                    .fold(f64::INFINITY, f64::min)
            };
            let dx = axis([
                (x > 0).then(|| k - 1),
                (x + 1 < w).then(|| k + 1),
            ]);
            let dy = axis([
                (y > 0).then(|| k - w),
                (y + 1 < h).then(|| k + w),
            ]);
            let axis_d = match (dx.is_finite(), dy.is_finite()) {
                (true, true) => dx * dy / (dx * dx + dy * dy).sqrt(),
                (true, false) => dx,
                (false, true) => dy,
                (false, false) => continue,
            };
            // |psi| / |grad psi| is second-order on smooth fronts; the axis
            // estimate caps it where the central gradient is unreliable
            let g = psi.central_grad(x, y).norm();
            let d = if g > 0.0 { (p.abs() / g).min(axis_d) } else { axis_d };
            dist[k] = d;
            fixed[k] = true;
        }
    }
    (dist, fixed)
}

/// Replaces `psi` by the signed distance to its zero level set.
pub fn reinitialize(field: &LevelSetField) -> Result<LevelSetField> {
    let psi = &field.psi;
    if !psi.all_finite() {
        return Err(Error::NonFinite("level-set function"));
    }
    let (dist, fixed) = front_distances(psi);
    if !fixed.iter().any(|&f| f) {
        return Err(Error::NoZeroCrossing);
    }
    let mut u = GridField {
        width: psi.width,
        height: psi.height,
        data: dist,
    };
    fast_sweep(&mut u, &fixed);
    for (d, &p) in u.data.iter_mut().zip(&psi.data) {
        if p < 0.0 {
            *d = -*d;
        }
    }
    Ok(LevelSetField { psi: u })
}
