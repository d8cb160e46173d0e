//! CSV files: run logs and marker curves.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{LogRecord, RunLog};
use crate::geometry::MarkerCurve;
use crate::vec2::Vec2;

#[derive(Serialize, Deserialize)]
struct LogRow {
    step: usize,
    t: f64,
    dt: f64,
    energy: f64,
    length: f64,
    mass: f64,
    max_speed: f64,
}

/// Header of run-log files.
pub const RUN_LOG_HEADER: &str = "step,t,dt,energy,length,mass,max_speed";

/// Run log as CSV. Floats use the shortest representation that parses back
/// to the same value, so equal logs give equal bytes.
pub fn run_log_csv(log: &RunLog) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if log.is_empty() {
        w.write_record(RUN_LOG_HEADER.split(','))?;
    }
    for r in &log.records {
        w.serialize(LogRow {
            step: r.step,
            t: r.t,
            dt: r.dt,
            energy: r.energy,
            length: r.length,
            mass: r.mass,
            max_speed: r.max_speed,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_run_log(text: &str) -> Result<RunLog> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let records = r
        .deserialize::<LogRow>()
        .map(|row| {
            row.map(|x| LogRecord {
                step: x.step,
                t: x.t,
                dt: x.dt,
                energy: x.energy,
                length: x.length,
                mass: x.mass,
                max_speed: x.max_speed,
            })
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(RunLog { records })
}

pub fn write_run_log(log: &RunLog, path: &Path) -> Result<()> {
    std::fs::write(path, run_log_csv(log)?)?;
    Ok(())
}

pub fn read_run_log(path: &Path) -> Result<RunLog> {
    parse_run_log(&std::fs::read_to_string(path)?)
}

/// Curve as CSV with columns `x,y` plus whichever of `beta,v,rho` are set.
pub fn curve_csv(curve: &MarkerCurve) -> Result<String> {
    let channels: Vec<(&str, &Vec<f64>)> = [("beta", &curve.beta), ("v", &curve.v), ("rho", &curve.rho)]
        .into_iter()
        .filter_map(|(name, c)| c.as_ref().map(|c| (name, c)))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x", "y"];
    header.extend(channels.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for (i, p) in curve.points.iter().enumerate() {
        let mut row = vec![p.x.to_string(), p.y.to_string()];
        row.extend(channels.iter().map(|(_, c)| c[i].to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a curve CSV; unknown columns are rejected and the curve must
/// satisfy the marker invariants.
pub fn parse_curve_csv(text: &str, path: &Path) -> Result<MarkerCurve> {
    let parse = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() < 2 || header[0] != "x" || header[1] != "y" {
        return Err(parse(format!("expected header starting with x,y, got {}", header.join(","))));
    }
    for name in &header[2..] {
        if !["beta", "v", "rho"].contains(&name.as_str()) {
            return Err(parse(format!("unknown column `{name}`")));
        }
    }
    let mut points = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 2];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let value = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse(format!("row {}: bad `{}` value", line + 1, header[i])))
        };
        points.push(Vec2::new(value(0)?, value(1)?));
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(value(j + 2)?);
        }
    }
    let mut curve = MarkerCurve::new(points)?;
    for (name, col) in header[2..].iter().zip(columns) {
        match name.as_str() {
            "beta" => curve.beta = Some(col),
            "v" => curve.v = Some(col),
            _ => curve.rho = Some(col),
        }
    }
    curve.validate()?;
    Ok(curve)
}

pub fn write_curve_csv(curve: &MarkerCurve, path: &Path) -> Result<()> {
    std::fs::write(path, curve_csv(curve)?)?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<MarkerCurve> {
    parse_curve_csv(&std::fs::read_to_string(path)?, path)
}
