//! Ray-sum simulation of the patterns seen along projection axes, and
//! crosstalk metrics of simulated views against the original patterns.
//!
//! The volume is a stack of discrete emissive planes, so a projection is a
//! per-plane sum: for every output pixel the ray is intersected with each
//! plane in ascending index order and the plane is sampled bilinearly at
//! the intersection. Out-of-volume samples contribute 0. The fixed
//! summation order keeps results bit-identical under any parallel
//! partitioning of the output.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::design::Volume;
use crate::error::{Error, Result};
use crate::geometry::ProjectionAxis;
use crate::imaging::{bilinear_grid, FloatImage, PatternImage};

/// Rec. 709 luma weights; any fixed convention works for argmax comparisons.
const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Raw (unnormalized) accumulation of a projection.
#[derive(Debug, Clone)]
pub struct ProjectedPattern {
    pub raw: FloatImage,
    /// Number of planes summed; the theoretical per-pixel maximum.
    pub plane_count: usize,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Divide by the plane count: the theoretical maximum of the sum.
    TheoreticalMax,
    /// Divide by the observed maximum over all channels jointly.
    Auto,
}

/// A projection scaled into [0, 1], with the scale that was applied.
#[derive(Debug, Clone)]
pub struct NormalizedProjection {
    pub image: PatternImage,
    pub mode: NormalizeMode,
    pub scale: f64,
}

/// Which family of volume planes a projection walks.
enum StepDim {
    X,
    Y,
    Z,
}

/// Near-perpendicular axes walk the physical z-layers. An axis lying in
/// the film plane is only meaningful as a pure mathematical sum, which is
/// supported for the axis-aligned +-X / +-Y cases; anything else grazing
/// the stack is rejected.
fn step_dim(axis: &ProjectionAxis) -> Result<StepDim> {
    let d = axis.direction;
    if d.z.abs() > 0.05 {
        Ok(StepDim::Z)
    } else if d.x.abs() > 0.999 {
        Ok(StepDim::X)
    } else if d.y.abs() > 0.999 {
        Ok(StepDim::Y)
    } else {
        Err(Error::GrazingAxis(d.z.abs()))
    }
}

/// Simulates the pattern seen along `axis` by summing plane samples along
/// each output pixel's ray. The output raster is `out_w` x `out_h` pixels
/// of `out_pitch_mm`, centred on the axis through the volume centre.
pub fn project_volume(
    vol: &Volume,
    axis: &ProjectionAxis,
    out_w: usize,
    out_h: usize,
    out_pitch_mm: f64,
) -> Result<ProjectedPattern> {
    if out_w < 1 || out_h < 1 {
        return Err(Error::InvalidParameter("output raster must be >= 1x1".into()));
    }
    if !(out_pitch_mm.is_finite() && out_pitch_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "output pitch must be > 0, got {out_pitch_mm}"
        )));
    }
    let sd = step_dim(axis)?;
    let g = vol.grid;
    let d = axis.direction;

    // Plane family along the stepping dim, and the two in-plane dims.
    let (n_planes, plane_pitch) = match sd {
        StepDim::X => (g.nx, g.pitch_x),
        StepDim::Y => (g.ny, g.pitch_y),
        StepDim::Z => (g.nz, g.layer_pitch),
    };
    let (pa_count, pa_pitch, pb_count, pb_pitch) = match sd {
        StepDim::X => (g.ny, g.pitch_y, g.nz, g.layer_pitch),
        StepDim::Y => (g.nx, g.pitch_x, g.nz, g.layer_pitch),
        StepDim::Z => (g.nx, g.pitch_x, g.ny, g.pitch_y),
    };
    let d_step = match sd {
        StepDim::X => d.x,
        StepDim::Y => d.y,
        StepDim::Z => d.z,
    };

    let values = &vol.values;
    let mut raw = FloatImage::zeros(out_w, out_h, out_pitch_mm);
    raw.pixels
        .par_chunks_mut(out_w)
        .enumerate()
        .for_each(|(row, out)| {
            let v = (row as f64 + 0.5 - out_h as f64 / 2.0) * out_pitch_mm;
            for (col, px) in out.iter_mut().enumerate() {
                let u = (col as f64 + 0.5 - out_w as f64 / 2.0) * out_pitch_mm;
                let base = axis.u_basis.scale(u) + axis.v_basis.scale(v);
                let base_step = match sd {
                    StepDim::X => base.x,
                    StepDim::Y => base.y,
                    StepDim::Z => base.z,
                };
                let mut acc = [0.0f64; 3];
                for k in 0..n_planes {
                    let w_k = (k as f64 + 0.5 - n_planes as f64 / 2.0) * plane_pitch;
                    let t = (w_k - base_step) / d_step;
                    let p = base + d.scale(t);
                    let (ca, cb) = match sd {
                        StepDim::X => (p.y, p.z),
                        StepDim::Y => (p.x, p.z),
                        StepDim::Z => (p.x, p.y),
                    };
                    let s = bilinear_grid(pa_count, pb_count, pa_pitch, pb_pitch, ca, cb, |ia, ib| {
                        let (ix, iy, iz) = match sd {
                            StepDim::X => (k, ia, ib),
                            StepDim::Y => (ia, k, ib),
                            StepDim::Z => (ia, ib, k),
                        };
                        values[(iz * g.ny + iy) * g.nx + ix]
                    });
                    acc[0] += s[0];
                    acc[1] += s[1];
                    acc[2] += s[2];
                }
                *px = acc;
            }
        });

    Ok(ProjectedPattern {
        raw,
        plane_count: n_planes,
        label: axis.label.clone(),
    })
}

/// Scales a raw projection into [0, 1].
///
/// Auto mode divides all channels jointly by the observed maximum so hue
/// ratios are preserved; an all-zero image stays zero with scale 1.
pub fn normalize_projection(p: &ProjectedPattern, mode: NormalizeMode) -> NormalizedProjection {
    let scale = match mode {
        NormalizeMode::TheoreticalMax => p.plane_count.max(1) as f64,
        NormalizeMode::Auto => {
            let m = p.raw.max_value();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let image = PatternImage {
        width: p.raw.width,
        height: p.raw.height,
        pixels: p
            .raw
            .pixels
            .iter()
            .map(|px| [px[0] / scale, px[1] / scale, px[2] / scale])
            .collect(),
        pixel_pitch: p.raw.pixel_pitch,
    };
    NormalizedProjection {
        image,
        mode,
        scale,
    }
}

// ---------------------------------------------------------------------------
// Crosstalk metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ViewVerdict {
    pub view: String,
    /// Index of the original with the highest correlation.
    pub best_match: usize,
    pub self_correlation: f64,
    /// True when the best match is the view's own original.
    pub identified: bool,
}

/// Cross-correlation and error matrices of simulated views against the
/// original patterns, `[view][original]`.
#[derive(Debug, Clone, Serialize)]
pub struct CrosstalkReport {
    pub view_labels: Vec<String>,
    pub correlations: Vec<Vec<f64>>,
    pub mse: Vec<Vec<f64>>,
    pub verdicts: Vec<ViewVerdict>,
}

/// Correlates every auto-normalized view against every original.
///
/// Correlation is the normalized cross-correlation of mean-subtracted
/// luminance; a constant image has zero variance and correlates as 0.
/// MSE is the per-channel mean squared difference of the normalized view
/// against the original.
pub fn crosstalk_report(
    views: &[ProjectedPattern],
    originals: &[PatternImage],
) -> Result<CrosstalkReport> {
    if views.is_empty() || views.len() != originals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} views vs {} originals",
            views.len(),
            originals.len()
        )));
    }
    for (v, o) in views.iter().zip(originals) {
        if v.raw.width != o.width || v.raw.height != o.height {
            return Err(Error::DimensionMismatch(format!(
                "view '{}' is {}x{} but original is {}x{}",
                v.label, v.raw.width, v.raw.height, o.width, o.height
            )));
        }
    }

    let normalized: Vec<NormalizedProjection> = views
        .iter()
        .map(|v| normalize_projection(v, NormalizeMode::Auto))
        .collect();
    let view_luma: Vec<Vec<f64>> = normalized.iter().map(|n| luminance(&n.image)).collect();
    let orig_luma: Vec<Vec<f64>> = originals.iter().map(luminance).collect();

    let mut correlations = Vec::with_capacity(views.len());
    let mut mse = Vec::with_capacity(views.len());
    for (n, vl) in normalized.iter().zip(&view_luma) {
        let mut corr_row = Vec::with_capacity(originals.len());
        let mut mse_row = Vec::with_capacity(originals.len());
        for (o, ol) in originals.iter().zip(&orig_luma) {
            corr_row.push(ncc(vl, ol));
            mse_row.push(mean_squared_error(&n.image, o));
        }
        correlations.push(corr_row);
        mse.push(mse_row);
    }

    let verdicts = views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let row = &correlations[i];
            let best_match = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            ViewVerdict {
                view: v.label.clone(),
                best_match,
                self_correlation: row[i],
                identified: best_match == i,
            }
        })
        .collect();

    Ok(CrosstalkReport {
        view_labels: views.iter().map(|v| v.label.clone()).collect(),
        correlations,
        mse,
        verdicts,
    })
}

fn luminance(img: &PatternImage) -> Vec<f64> {
    img.pixels
        .iter()
        .map(|p| LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2])
        .collect()
}

/// Normalized cross-correlation of mean-subtracted signals, clamped into
/// [-1, 1]; zero variance on either side yields 0.
fn ncc(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (num / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

fn mean_squared_error(a: &PatternImage, b: &PatternImage) -> f64 {
    let n = (a.pixels.len() * 3) as f64;
    a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| {
            (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)
        })
        .sum::<f64>()
        / n
}

impl fmt::Display for CrosstalkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "crosstalk correlation (rows: views, cols: originals)")?;
        write!(f, "{:>10}", "view")?;
        for label in &self.view_labels {
            write!(f, "{label:>10}")?;
        }
        writeln!(f, "{:>12}{:>12}", "best", "identified")?;
        for (i, row) in self.correlations.iter().enumerate() {
            write!(f, "{:>10}", self.view_labels[i])?;
            for c in row {
                write!(f, "{c:>10.4}")?;
            }
            let v = &self.verdicts[i];
            writeln!(
                f,
                "{:>12}{:>12}",
                self.view_labels[v.best_match],
                if v.identified { "yes" } else { "NO" }
            )?;
        }
        Ok(())
    }
}
