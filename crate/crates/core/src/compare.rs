//! Gradient descent against the accelerated flows from several starting
//! contours on one image.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::energies::{EnergyKind, ImageGrid};
use crate::error::{Error, Result};
use crate::flows::{run_flow, FlowConfig, Method, StopReason};
use crate::io::Backend;
use crate::levelset::{init_signed_distance, run_levelset, Shape};

/// Starting contours for the noisy-rectangle scene at 256 px: a circle
/// inside the rectangle, a large circle crossing its top-right side, and a
/// box around it.
pub fn default_inits() -> Vec<Shape> {
    vec![
        Shape::Circle {
            center: [128.0, 128.0],
            radius: 40.0,
        },
        Shape::Circle {
            center: [160.0, 100.0],
            radius: 70.0,
        },
        Shape::Rectangle {
            min: [40.0, 60.0],
            max: [216.0, 196.0],
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub init: usize,
    pub method: Method,
    pub backend: Backend,
    pub energy: f64,
    pub steps: usize,
    pub stop: String,
}

fn stop_label(s: &StopReason) -> String {
    match s {
        StopReason::MaxSteps => "max-steps".into(),
        StopReason::Stagnated => "stagnated".into(),
        StopReason::Shock { t, reason } => format!("shock at t={t:.3}: {reason}"),
    }
}

/// Runs every method from every init. The parametric backend starts from
/// curves with unit marker spacing.
pub fn compare(
    image: &ImageGrid,
    inits: &[Shape],
    methods: &[Method],
    backend: Backend,
    energy: EnergyKind,
    cfg: &FlowConfig,
) -> Result<Vec<CompareRow>> {
    let jobs: Vec<(usize, Method)> = (0..inits.len())
        .flat_map(|i| methods.iter().map(move |&m| (i, m)))
        .collect();
    jobs.par_iter()
        .map(|&(i, method)| {
            let (w, h) = (image.width(), image.height());
            let (energy, steps, stop) = match backend {
                Backend::Parametric => {
                    if !inits[i].fits(w, h) {
                        return Err(Error::ShapeOutsideGrid { width: w, height: h });
                    }
                    let r = run_flow(&inits[i].to_curve(1.0)?, image, method, energy, cfg)?;
                    (r.energy, r.log.len(), r.stop)
                }
                Backend::Levelset => {
                    let psi = init_signed_distance(&inits[i], w, h)?;
                    let r = run_levelset(&psi, image, method, energy, cfg)?;
                    (r.energy, r.log.len(), r.stop)
                }
            };
            Ok(CompareRow {
                init: i,
                method,
                backend,
                energy,
                steps,
                stop: stop_label(&stop),
            })
        })
        .collect()
}

pub fn compare_csv(rows: &[CompareRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_compare_csv(rows: &[CompareRow], path: &Path) -> Result<()> {
    std::fs::write(path, compare_csv(rows)?)?;
    Ok(())
}

/// Final energies of `method` per init, in init order.
pub fn energies_of(rows: &[CompareRow], method: Method) -> Vec<f64> {
    let mut picked: Vec<&CompareRow> = rows.iter().filter(|r| r.method == method).collect();
    picked.sort_by_key(|r| r.init);
    picked.iter().map(|r| r.energy).collect()
}
