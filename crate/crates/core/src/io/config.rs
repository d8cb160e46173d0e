//! Run configuration and the driver behind `segment`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energies::{EnergyKind, ImageGrid};
use crate::error::{Error, Result};
use crate::flows::{run_flow, FlowConfig, Method, RunLog, StopReason};
use crate::geometry::MarkerCurve;
use crate::levelset::{extract_contours, init_signed_distance, run_levelset, Shape};
use crate::scene::{generate_scene, SceneSpec};

use super::lsf::{write_lsf, write_lsf_preview};
use super::pgm::read_pgm;
use super::svg::export_contour_svg;
use super::tables::{write_curve_csv, write_run_log};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Parametric,
    Levelset,
}

/// Image source: a PGM file or a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Input {
    Path(PathBuf),
    Scene(SceneSpec),
}

impl Input {
    pub fn load(&self) -> Result<ImageGrid> {
        match self {
            Input::Path(p) => read_pgm(p),
            Input::Scene(s) => generate_scene(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Input,
    pub method: Method,
    pub backend: Backend,
    #[serde(default = "default_energy")]
    pub energy: EnergyKind,
    #[serde(default)]
    pub flow: FlowConfig,
    pub init: Shape,
    /// Marker spacing of the initial parametric curve, in pixels.
    #[serde(default = "default_spacing")]
    pub marker_spacing: f64,
    /// Output directory.
    pub outputs: PathBuf,
}

fn default_energy() -> EnergyKind {
    EnergyKind::ChanVese
}

fn default_spacing() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        RunConfig::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.method == Method::Sobolev && self.backend == Backend::Levelset {
            return Err(Error::InvalidParameter(
                "the Sobolev flow is only available with the parametric backend".into(),
            ));
        }
        if !(self.marker_spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "marker_spacing must be > 0, got {}",
                self.marker_spacing
            )));
        }
        if let Input::Scene(s) = &self.input {
            s.validate()?;
        }
        Ok(())
    }
}

/// Files and numbers produced by one segmentation run.
#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub log: RunLog,
    pub curves: Vec<MarkerCurve>,
    pub energy: f64,
    pub stop: StopReason,
    pub files: Vec<PathBuf>,
}

/// Runs `cfg` and writes `log.csv`, `contour.csv`, `overlay.svg` and, for
/// the level-set backend, `psi.lsf` and `psi.pgm` into the output directory.
pub fn run_segment(cfg: &RunConfig) -> Result<SegmentOutcome> {
    cfg.validate()?;
    let image = cfg.input.load()?;
    let (w, h) = (image.width(), image.height());
    std::fs::create_dir_all(&cfg.outputs)?;
    let out = |name: &str| cfg.outputs.join(name);
    let mut files = Vec::new();
    let (log, curves, energy, stop) = match cfg.backend {
        Backend::Parametric => {
            if !cfg.init.fits(w, h) {
                return Err(Error::ShapeOutsideGrid { width: w, height: h });
            }
            let curve = cfg.init.to_curve(cfg.marker_spacing)?;
            let r = run_flow(&curve, &image, cfg.method, cfg.energy, &cfg.flow)?;
            (r.log, vec![r.curve], r.energy, r.stop)
        }
        Backend::Levelset => {
            let psi = init_signed_distance(&cfg.init, w, h)?;
            let r = run_levelset(&psi, &image, cfg.method, cfg.energy, &cfg.flow)?;
            let (lsf, preview) = (out("psi.lsf"), out("psi.pgm"));
            write_lsf(&r.state.psi, r.state.step, &lsf)?;
            write_lsf_preview(&r.state.psi, &preview)?;
            files.extend([lsf, preview]);
            let curves = extract_contours(&r.state.psi)?;
            (r.log, curves, r.energy, r.stop)
        }
    };
    let (log_path, contour_path, svg_path) = (out("log.csv"), out("contour.csv"), out("overlay.svg"));
    write_run_log(&log, &log_path)?;
    write_curve_csv(&curves[0], &contour_path)?;
    export_contour_svg(&curves, Some(&image), &svg_path)?;
    files.extend([log_path, contour_path, svg_path]);
    Ok(SegmentOutcome {
        log,
        curves,
        energy,
        stop,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            input: Input::Scene(SceneSpec::default()),
            method: Method::AccelConst,
            backend: Backend::Levelset,
            energy: EnergyKind::ChanVese,
            flow: FlowConfig::default(),
            init: Shape::Circle {
                center: [128.0, 128.0],
                radius: 40.0,
            },
            marker_spacing: 1.0,
            outputs: "out".into(),
        }
    }

    #[test]
    fn json_round_trip() {
        let c = sample();
        let back = RunConfig::from_json(&c.to_json(), Path::new("c.json")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let text = r#"{
            "input": {"scene": {"kind": "disk", "size": 64}},
            "method": "gradient",
            "backend": "parametric",
            "init": {"shape": "circle", "center": [32, 32], "radius": 20},
            "outputs": "o"
        }"#;
        let c = RunConfig::from_json(text, Path::new("c.json")).unwrap();
        assert_eq!(c.flow, FlowConfig::default());
        assert_eq!(c.energy, EnergyKind::ChanVese);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_bad_combinations() {
        let text = sample().to_json().replace("\"outputs\"", "\"outptus\"");
        assert!(matches!(RunConfig::from_json(&text, Path::new("c.json")), Err(Error::Parse { .. })));
        let mut c = sample();
        c.method = Method::Sobolev;
        assert!(c.validate().is_err());
        c.backend = Backend::Parametric;
        c.validate().unwrap();
    }
}
