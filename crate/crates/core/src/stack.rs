//! Physical film-stack geometry and the derived resolution metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MM_PER_INCH: f64 = 25.4;

/// Geometry of the printed film stack: `n_films` films of
/// `film_thickness` mm separated by `gap` mm spacers, each film covering
/// `width` x `height` mm in plane. Film k sits at `z = k * pitch` with
/// `pitch = film_thickness + gap`; the first film is at z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmStackSpec {
    pub n_films: usize,
    pub film_thickness: f64,
    pub gap: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for FilmStackSpec {
    fn default() -> Self {
        FilmStackSpec {
            n_films: 20,
            film_thickness: 0.1,
            gap: 0.5,
            width: 35.0,
            height: 35.0,
        }
    }
}

impl FilmStackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_films < 1 {
            return Err(Error::InvalidParameter("n_films must be >= 1".into()));
        }
        for (name, v) in [
            ("film_thickness", self.film_thickness),
            ("gap", self.gap),
            ("width", self.width),
            ("height", self.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Layer-to-layer spacing in mm.
    pub fn pitch(&self) -> f64 {
        self.film_thickness + self.gap
    }

    /// z positions of the films, strictly increasing, uniform pitch.
    pub fn layer_z(&self) -> Vec<f64> {
        (0..self.n_films).map(|k| k as f64 * self.pitch()).collect()
    }
}

/// Derived stack quantities reported by the CLI and asserted in tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StackMetrics {
    pub layer_pitch: f64,
    pub depth_dpi: f64,
    pub total_depth: f64,
}

/// Computes pitch, out-of-plane resolution, and total stack depth.
///
/// Total depth counts every film plus the interior gaps only; there is no
/// film above the outermost gap, so one gap is subtracted.
pub fn stack_metrics(spec: &FilmStackSpec) -> Result<StackMetrics> {
    spec.validate()?;
    let layer_pitch = spec.pitch();
    Ok(StackMetrics {
        layer_pitch,
        depth_dpi: MM_PER_INCH / layer_pitch,
        total_depth: spec.n_films as f64 * layer_pitch - spec.gap,
    })
}
