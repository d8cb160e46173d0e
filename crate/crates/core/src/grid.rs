//! Dense row-major scalar and vector grids with unit node spacing.
//!
//! Node `(x, y)` sits at pixel coordinate `(x, y)`; `x` indexes columns.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GridField {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GridField {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height || width < 2 || height < 2 {
            return Err(Error::GridShape {
                width,
                height,
                reason: "data length must equal width*height and both sides must be >= 2",
            });
        }
        Ok(GridField {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True when `p` lies in the closed rectangle spanned by the nodes.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    /// Bilinear interpolation; coordinates are clamped to the node rectangle.
    pub fn sample(&self, p: Vec2) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = p.x.clamp(0.0, xm);
        let y = p.y.clamp(0.0, ym);
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let a = self.get(x0, y0);
        let b = self.get(x0 + 1, y0);
        let c = self.get(x0, y0 + 1);
        let d = self.get(x0 + 1, y0 + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }

    /// Value at an integer offset from node `(x, y)`, linearly extrapolated
    /// one node past the border so one-sided differences stay consistent there.
    #[inline]
    pub fn ghost(&self, x: usize, y: usize, dx: isize, dy: isize) -> f64 {
        let w = self.width as isize;
        let h = self.height as isize;
        let xi = x as isize + dx;
        let yi = y as isize + dy;
        let cx = xi.clamp(0, w - 1);
        let cy = yi.clamp(0, h - 1);
        if cx == xi && cy == yi {
            return self.data[(cy * w + cx) as usize];
        }
        // reflect through the border node: 2*edge - inner
        let rx = if xi < 0 {
            -xi
        } else if xi >= w {
            2 * (w - 1) - xi
        } else {
            xi
        };
        let ry = if yi < 0 {
            -yi
        } else if yi >= h {
            2 * (h - 1) - yi
        } else {
            yi
        };
        let edge = self.data[(cy * w + cx) as usize];
        let inner = self.data[(ry.clamp(0, h - 1) * w + rx.clamp(0, w - 1)) as usize];
        2.0 * edge - inner
    }

    /// Backward and forward differences in x and y at a node.
    #[inline]
    pub fn one_sided(&self, x: usize, y: usize) -> OneSided {
        let c = self.get(x, y);
        OneSided {
            xm: c - self.ghost(x, y, -1, 0),
            xp: self.ghost(x, y, 1, 0) - c,
            ym: c - self.ghost(x, y, 0, -1),
            yp: self.ghost(x, y, 0, 1) - c,
        }
    }

    /// Central-difference gradient at a node.
    #[inline]
    pub fn central_grad(&self, x: usize, y: usize) -> Vec2 {
        Vec2::new(
            0.5 * (self.ghost(x, y, 1, 0) - self.ghost(x, y, -1, 0)),
            0.5 * (self.ghost(x, y, 0, 1) - self.ghost(x, y, 0, -1)),
        )
    }

    /// Central-difference gradient as two grids.
    pub fn gradient(&self) -> GridVectorField {
        let mut gx = GridField::filled(self.width, self.height, 0.0);
        let mut gy = gx.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let g = self.central_grad(x, y);
                let i = self.idx(x, y);
                gx.data[i] = g.x;
                gy.data[i] = g.y;
            }
        }
        GridVectorField { x: gx, y: gy }
    }

    /// Upwind derivative of `self` along velocity `u` at a node: `u . grad(self)`
    /// with one-sided differences taken from the side the flow comes from.
    #[inline]
    pub fn upwind_dot(&self, x: usize, y: usize, u: Vec2) -> f64 {
        let d = self.one_sided(x, y);
        let dx = if u.x > 0.0 { d.xm } else { d.xp };
        let dy = if u.y > 0.0 { d.ym } else { d.yp };
        u.x * dx + u.y * dy
    }

    /// Second-order ENO one-sided differences: the first-order ones corrected
    /// by the smaller (minmod) of the adjacent second differences.
    #[inline]
    pub fn one_sided_eno2(&self, x: usize, y: usize) -> OneSided {
        let g = |dx, dy| self.ghost(x, y, dx, dy);
        let c = g(0, 0);
        let minmod = |a: f64, b: f64| {
            if a * b <= 0.0 {
                0.0
            } else if a.abs() < b.abs() {
                a
            } else {
                b
            }
        };
        let (xm2, xm1, xp1, xp2) = (g(-2, 0), g(-1, 0), g(1, 0), g(2, 0));
        let (ym2, ym1, yp1, yp2) = (g(0, -2), g(0, -1), g(0, 1), g(0, 2));
        let dxx = [xm2 - 2.0 * xm1 + c, xm1 - 2.0 * c + xp1, c - 2.0 * xp1 + xp2];
        let dyy = [ym2 - 2.0 * ym1 + c, ym1 - 2.0 * c + yp1, c - 2.0 * yp1 + yp2];
        OneSided {
            xm: c - xm1 + 0.5 * minmod(dxx[0], dxx[1]),
            xp: xp1 - c - 0.5 * minmod(dxx[1], dxx[2]),
            ym: c - ym1 + 0.5 * minmod(dyy[0], dyy[1]),
            yp: yp1 - c - 0.5 * minmod(dyy[1], dyy[2]),
        }
    }

    /// [`GridField::upwind_dot`] with second-order ENO differences.
    #[inline]
    pub fn upwind_dot_eno2(&self, x: usize, y: usize, u: Vec2) -> f64 {
        let d = self.one_sided_eno2(x, y);
        let dx = if u.x > 0.0 { d.xm } else { d.xp };
        let dy = if u.y > 0.0 { d.ym } else { d.yp };
        u.x * dx + u.y * dy
    }
}

/// Backward (`*m`) and forward (`*p`) differences at a node.
#[derive(Debug, Clone, Copy)]
pub struct OneSided {
    pub xm: f64,
    pub xp: f64,
    pub ym: f64,
    pub yp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    pub x: GridField,
    pub y: GridField,
}

impl GridVectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        GridVectorField {
            x: GridField::filled(width, height, 0.0),
            y: GridField::filled(width, height, 0.0),
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> Vec2 {
        Vec2::new(self.x.data[i], self.y.data[i])
    }

    #[inline]
    pub fn put(&mut self, i: usize, v: Vec2) {
        self.x.data[i] = v.x;
        self.y.data[i] = v.y;
    }

    pub fn sample(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.x.sample(p), self.y.sample(p))
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.x.len()).fold(0.0_f64, |m, i| m.max(self.at(i).norm()))
    }

    pub fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite()
    }
}

/// Boolean pixel mask, `true` = inside the contour.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count_inside(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixels inside a closed polygon (even-odd rule, pixel centres at
    /// integer coordinates).
    pub fn from_polygon(width: usize, height: usize, points: &[Vec2]) -> Self {
        let mut data = vec![false; width * height];
        let n = points.len();
        let mut xs: Vec<f64> = Vec::new();
        for y in 0..height {
            let py = y as f64;
            xs.clear();
            for i in 0..n {
                let a = points[i];
                let b = points[(i + 1) % n];
                if (a.y <= py && b.y > py) || (b.y <= py && a.y > py) {
                    let w = (py - a.y) / (b.y - a.y);
                    xs.push(a.x + w * (b.x - a.x));
                }
            }
            xs.sort_by(|a, b| a.total_cmp(b));
            for pair in xs.chunks_exact(2) {
                let lo = pair[0].ceil().max(0.0);
                let hi = pair[1].min((width - 1) as f64);
                if hi < lo {
                    continue;
                }
                // centres strictly inside [x0, x1)
                let mut x = lo as usize;
                while (x as f64) <= hi {
                    if (x as f64) < pair[1] {
                        data[y * width + x] = true;
                    }
                    x += 1;
                }
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_linear_functions() {
        let g = GridField::from_fn(8, 6, |x, y| 2.0 * x as f64 - 0.5 * y as f64 + 1.0);
        let p = Vec2::new(3.25, 2.75);
        assert!((g.sample(p) - (2.0 * 3.25 - 0.5 * 2.75 + 1.0)).abs() < 1e-12);
        // top-right corner is reachable
        assert!((g.sample(Vec2::new(7.0, 5.0)) - (14.0 - 2.5 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn ghost_extrapolates_linearly() {
        let g = GridField::from_fn(5, 5, |x, _| x as f64);
        assert_eq!(g.ghost(0, 2, -1, 0), -1.0);
        assert_eq!(g.ghost(4, 2, 1, 0), 5.0);
        let d = g.one_sided(0, 0);
        assert_eq!(d.xm, 1.0);
        assert_eq!(d.xp, 1.0);
    }

    #[test]
    fn polygon_mask_of_square() {
        let pts = [
            Vec2::new(2.5, 2.5),
            Vec2::new(6.5, 2.5),
            Vec2::new(6.5, 5.5),
            Vec2::new(2.5, 5.5),
        ];
        let m = Mask::from_polygon(10, 10, &pts);
        assert_eq!(m.count_inside(), 4 * 3);
        assert!(m.get(3, 3) && m.get(6, 5) && !m.get(2, 3) && !m.get(7, 3));
    }
}
