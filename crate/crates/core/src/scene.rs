//! Synthetic test images: a bright axis-aligned shape on a dark background
//! with additive Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::energies::ImageGrid;
use crate::error::{Error, Result};
use crate::levelset::{init_signed_distance, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Centred square with half the image side.
    NoisySquare,
    /// Centred rectangle, half the width by 30% of the height.
    NoisyRectangle,
    /// Centred disk with radius a quarter of the side.
    Disk,
    /// The shape given in [`SceneSpec::shape`].
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Side of the square image in pixels.
    pub size: usize,
    /// Foreground minus background intensity, centred on 0.5.
    pub contrast: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Foreground shape of a custom scene.
    pub shape: Option<Shape>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            kind: SceneKind::NoisySquare,
            size: 256,
            contrast: 1.0,
            noise_std: 0.35,
            seed: 0,
            shape: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 64 {
            return Err(Error::InvalidParameter(format!("scene size must be >= 64, got {}", self.size)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise-std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::InvalidParameter(format!(
                "contrast must lie in [0, 1], got {}",
                self.contrast
            )));
        }
        if self.kind == SceneKind::Custom && self.shape.is_none() {
            return Err(Error::InvalidParameter("a custom scene needs a shape".into()));
        }
        Ok(())
    }

    /// Foreground shape of the scene.
    pub fn foreground(&self) -> Shape {
        let s = self.size as f64;
        match self.kind {
            SceneKind::NoisySquare => Shape::Rectangle {
                min: [0.25 * s, 0.25 * s],
                max: [0.75 * s, 0.75 * s],
            },
            SceneKind::NoisyRectangle => Shape::Rectangle {
                min: [0.25 * s, 0.35 * s],
                max: [0.75 * s, 0.65 * s],
            },
            SceneKind::Disk => Shape::Circle {
                center: [0.5 * s, 0.5 * s],
                radius: 0.25 * s,
            },
            SceneKind::Custom => self.shape.clone().expect("validated custom scene"),
        }
    }
}

/// Renders the scene: intensity `0.5 +- contrast/2` inside/outside the
/// foreground plus i.i.d. `N(0, noise_std^2)` noise, clipped to `[0, 1]`.
pub fn generate_scene(spec: &SceneSpec) -> Result<ImageGrid> {
    spec.validate()?;
    let n = spec.size;
    let psi = init_signed_distance(&spec.foreground(), n, n)?.psi;
    let (fg, bg) = (0.5 + 0.5 * spec.contrast, 0.5 - 0.5 * spec.contrast);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let data = psi
        .data
        .iter()
        .map(|&p| {
            let base = if p < 0.0 { fg } else { bg };
            let eta = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (base + eta).clamp(0.0, 1.0)
        })
        .collect();
    ImageGrid::new(n, n, data)
}
