//! Marching squares on the zero level set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{arclength_stations, signed_area, MarkerCurve, MIN_MARKERS};
use crate::vec2::Vec2;

use super::LevelSetField;

/// Points closer than this are merged while tracing.
const MERGE_TOL: f64 = 1e-9;

/// All closed components of the zero level set, each counter-clockwise
/// (positive signed area), sorted by decreasing enclosed area.
///
/// The grid is padded with a positive ring, so components touching the
/// border are closed along it. Ambiguous saddle cells are resolved with the
/// average of the four corners. Components with fewer than eight vertices
/// are resampled to eight.
pub fn extract_contours(field: &LevelSetField) -> Result<Vec<MarkerCurve>> {
    let psi = &field.psi;
    if !psi.all_finite() {
        return Err(Error::NonFinite("level-set function"));
    }
    let (w, h) = (psi.width + 2, psi.height + 2);
    let value = |x: usize, y: usize| -> f64 {
        if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
            1.0
        } else {
            psi.get(x - 1, y - 1)
        }
    };
    let pos = |x: usize, y: usize| Vec2::new(x as f64 - 1.0, y as f64 - 1.0);
    let h_edge = |x: usize, y: usize| 2 * (y * w + x);
    let v_edge = |x: usize, y: usize| 2 * (y * w + x) + 1;

    let mut points: HashMap<usize, Vec2> = HashMap::new();
    let mut links: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut crossing = |id: usize, a: (usize, usize), b: (usize, usize)| {
        points.entry(id).or_insert_with(|| {
            let (va, vb) = (value(a.0, a.1), value(b.0, b.1));
            let t = va / (va - vb);
            pos(a.0, a.1).lerp(pos(b.0, b.1), t)
        });
        id
    };
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let c = [value(x, y), value(x + 1, y), value(x + 1, y + 1), value(x, y + 1)];
            let inside = c.map(|v| v < 0.0);
            let mut mask = 0;
            for (k, &b) in inside.iter().enumerate() {
                if b {
                    mask |= 1 << k;
                }
            }
            if mask == 0 || mask == 15 {
                continue;
            }
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let mut edge = |e: usize| match e {
                0 => crossing(h_edge(x, y), (x, y), (x + 1, y)),
                1 => crossing(v_edge(x + 1, y), (x + 1, y), (x + 1, y + 1)),
                2 => crossing(h_edge(x, y + 1), (x, y + 1), (x + 1, y + 1)),
                _ => crossing(v_edge(x, y), (x, y), (x, y + 1)),
            };
            let pairs: Vec<(usize, usize)> = if mask == 5 || mask == 10 {
                let centre_inside = c.iter().sum::<f64>() < 0.0;
                if centre_inside == inside[0] {
                    // corners 0 and 2 joined through the centre
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(0, 3), (1, 2)]
                }
            } else {
                let crossed: Vec<usize> = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).collect();
                // edge e joins corners e and (e + 1) % 4
                vec![(crossed[0], crossed[1])]
            };
            for (a, b) in pairs {
                let (ia, ib) = (edge(a), edge(b));
                links.entry(ia).or_default().push(ib);
                links.entry(ib).or_default().push(ia);
            }
        }
    }
    if links.is_empty() {
        return Err(Error::NoZeroCrossing);
    }

    let mut keys: Vec<usize> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut used = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for start in keys {
        if used.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start);
        let mut prev = start;
        let mut cur = links[&start][0];
        while cur != start {
            if !used.insert(cur) {
                break;
            }
            chain.push(cur);
            let next = links[&cur].iter().copied().find(|&n| n != prev).unwrap_or(prev);
            prev = cur;
            cur = next;
        }
        let mut pts: Vec<Vec2> = Vec::with_capacity(chain.len());
        for id in chain {
            let p = points[&id];
            if pts.last().is_none_or(|q: &Vec2| (p - *q).norm() > MERGE_TOL) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= MERGE_TOL {
            pts.pop();
        }
        if pts.len() < 3 {
            continue;
        }
        let area = signed_area(&pts);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            pts.reverse();
        }
        if pts.len() < MIN_MARKERS {
            let m = pts.len();
            pts = arclength_stations(&pts, MIN_MARKERS)
                .into_iter()
                .map(|(k, t)| pts[k].lerp(pts[(k + 1) % m], t))
                .collect();
        }
        if let Ok(c) = MarkerCurve::new(pts) {
            loops.push(c);
        }
    }
    if loops.is_empty() {
        return Err(Error::NoZeroCrossing);
    }
    loops.sort_by(|a, b| b.signed_area().total_cmp(&a.signed_area()));
    Ok(loops)
}

/// Largest component of the zero level set.
pub fn extract_contour(field: &LevelSetField) -> Result<MarkerCurve> {
    Ok(extract_contours(field)?.swap_remove(0))
}
