//! Normal extension of grid quantities off the zero level set.

use crate::grid::{GridField, GridVectorField};

use super::sdf::front_distances;
use super::LevelSetField;

/// Extends `q` from the nodes next to the zero set along the normals of
/// `psi` by solving `grad q . grad psi = 0` with fast sweeping.
///
/// Values at nodes adjacent to a sign change are kept; every other node
/// takes the upwind average of its neighbours closer to the front, weighted
/// by the distance decrease. `psi` should be a signed distance.
pub fn extend_field(psi: &LevelSetField, q: &GridField) -> GridField {
    let p = &psi.psi;
    let (w, h) = (p.width, p.height);
    let (_, fixed) = front_distances(p);
    let mut out = q.clone();
    if !fixed.iter().any(|&f| f) {
        return out;
    }
    let dist: Vec<f64> = p.data.iter().map(|v| v.abs()).collect();
    // nodes never reached keep their value; reached ones are overwritten
    let mut known = fixed.clone();
    for _round in 0..2 {
        for dir in 0..4 {
            let xs: Vec<usize> = if dir & 1 == 0 { (0..w).collect() } else { (0..w).rev().collect() };
            let ys: Vec<usize> = if dir & 2 == 0 { (0..h).collect() } else { (0..h).rev().collect() };
            for &y in &ys {
                for &x in &xs {
                    let k = y * w + x;
                    if fixed[k] {
                        continue;
                    }
                    let pick = |a: Option<usize>, b: Option<usize>| -> Option<usize> {
                        [a, b]
                            .into_iter()
                            .flatten()
                            .filter(|&j| known[j] && dist[j] < dist[k])
                            .min_by(|&i, &j| dist[i].total_cmp(&dist[j]))
                    };
                    let nx = pick((x > 0).then(|| k - 1), (x + 1 < w).then(|| k + 1));
                    let ny = pick((y > 0).then(|| k - w), (y + 1 < h).then(|| k + w));
                    let wx = nx.map_or(0.0, |j| dist[k] - dist[j]);
                    let wy = ny.map_or(0.0, |j| dist[k] - dist[j]);
                    let total = wx + wy;
                    if total <= 0.0 {
                        continue;
                    }
                    let vx = nx.map_or(0.0, |j| out.data[j]);
                    let vy = ny.map_or(0.0, |j| out.data[j]);
                    out.data[k] = (wx * vx + wy * vy) / total;
                    known[k] = true;
                }
            }
        }
    }
    out
}

/// Componentwise [`extend_field`].
pub fn extend_vector_field(psi: &LevelSetField, q: &GridVectorField) -> GridVectorField {
    GridVectorField {
        x: extend_field(psi, &q.x),
        y: extend_field(psi, &q.y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{init_signed_distance, Shape};
    use crate::vec2::Vec2;

    fn circle() -> LevelSetField {
        init_signed_distance(
            &Shape::Circle {
                center: [40.0, 40.0],
                radius: 15.0,
            },
            80,
            80,
        )
        .unwrap()
    }

    #[test]
    fn constant_is_unchanged() {
        let q = GridField::filled(80, 80, 2.5);
        assert_eq!(extend_field(&circle(), &q), q);
    }

    #[test]
    fn extension_depends_only_on_angle() {
        let ls = circle();
        let q = GridField::from_fn(80, 80, |x, _| x as f64);
        let e = extend_field(&ls, &q);
        let c = Vec2::new(40.0, 40.0);
        // compare with the value at the front point on the same ray
        for y in 0..80 {
            for x in 0..80 {
                let p = Vec2::new(x as f64, y as f64);
                let d = ls.psi.get(x, y);
                if d.abs() > 5.0 || d.abs() < 1.0 {
                    continue;
                }
                let front = c + (p - c).normalized() * 15.0;
                assert!((e.get(x, y) - front.x).abs() < 1.5, "{x},{y}: {} vs {}", e.get(x, y), front.x);
            }
        }
        // directional derivative along the normal is small on the band
        let n = ls.outward_normals();
        let scale = e.max_abs();
        for y in 1..79 {
            for x in 1..79 {
                let d = ls.psi.get(x, y);
                if d.abs() < 5.0 && d.abs() > 1.5 {
                    let g = e.central_grad(x, y);
                    let i = e.idx(x, y);
                    assert!(g.dot(n.at(i)).abs() < 0.1 * scale, "{}", g.dot(n.at(i)));
                }
            }
        }
    }

    #[test]
    fn vectors_extend_componentwise() {
        let ls = circle();
        let mut v = GridVectorField::zeros(80, 80);
        for i in 0..v.x.len() {
            v.put(i, Vec2::new((i % 80) as f64, (i / 80) as f64));
        }
        let e = extend_vector_field(&ls, &v);
        assert_eq!(e.x, extend_field(&ls, &v.x));
        assert_eq!(e.y, extend_field(&ls, &v.y));
    }
}
