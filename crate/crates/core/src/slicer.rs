//! Coloured point clouds to per-film cross-section images.
//!
//! A point lands on the film below it: film k covers `[Z_k, Z_k + pitch)`
//! (half-open, so every in-range z has exactly one film). In plane, the
//! stack rectangle is centred on the origin and a point is rasterized at
//! the pixel containing `(x, y)`. Coinciding points combine per channel by
//! maximum: ink deposition saturates rather than sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{PatternImage, PointCloud};
use crate::stack::FilmStackSpec;

/// Film index (0-based, increasing z) receiving a point at height `o_z`,
/// or `None` when the point lies below the first film or at/above the top
/// of the last film's slab.
pub fn assign_film(o_z: f64, spec: &FilmStackSpec) -> Option<usize> {
    let pitch = spec.pitch();
    if !o_z.is_finite() || o_z < 0.0 {
        return None;
    }
    let k = (o_z / pitch).floor();
    if k >= spec.n_films as f64 {
        return None;
    }
    Some(k as usize)
}

/// How points sharing a raster cell combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineRule {
    /// Per-channel maximum: ink deposition saturates. Order-independent.
    #[default]
    Max,
    /// Per-channel mean of the cell's points.
    Mean,
}

/// Per-film assignment counts and discards. Conservation always holds:
/// `assigned_per_film` summed plus both discard counts equals `total_points`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceReport {
    pub total_points: usize,
    pub assigned_per_film: Vec<usize>,
    pub discarded_out_of_range_z: usize,
    pub discarded_out_of_range_xy: usize,
}

impl SliceReport {
    pub fn assigned_total(&self) -> usize {
        self.assigned_per_film.iter().sum()
    }
}

/// Rasterizes a point cloud into `n_films` layer images of
/// `res_x` x `res_y` pixels covering the stack's in-plane extent, cells
/// combining by per-channel maximum.
///
/// Out-of-range points are counted and discarded, never an error; a point
/// out of range in z is not also counted against xy. The result is
/// independent of point order because max is commutative.
pub fn slice_point_cloud(
    cloud: &PointCloud,
    spec: &FilmStackSpec,
    res_x: usize,
    res_y: usize,
) -> Result<(Vec<PatternImage>, SliceReport)> {
    slice_point_cloud_with(cloud, spec, res_x, res_y, CombineRule::Max)
}

/// `slice_point_cloud` with an explicit cell-combine rule. Under
/// `CombineRule::Mean` the result is averaged in input order, so it is
/// deterministic for a given file but not reorder-invariant at the last
/// floating-point digit.
pub fn slice_point_cloud_with(
    cloud: &PointCloud,
    spec: &FilmStackSpec,
    res_x: usize,
    res_y: usize,
    combine: CombineRule,
) -> Result<(Vec<PatternImage>, SliceReport)> {
    spec.validate()?;
    if res_x < 1 || res_y < 1 {
        return Err(Error::InvalidParameter(
            "raster resolution must be >= 1x1".into(),
        ));
    }

    let pitch = spec.width / res_x as f64;
    let mut layers: Vec<PatternImage> = (0..spec.n_films)
        .map(|_| PatternImage::constant(res_x, res_y, pitch, [0.0; 3]))
        .collect();
    let mut cell_counts = match combine {
        CombineRule::Max => Vec::new(),
        CombineRule::Mean => vec![0u32; spec.n_films * res_x * res_y],
    };
    let mut report = SliceReport {
        total_points: cloud.len(),
        assigned_per_film: vec![0; spec.n_films],
        discarded_out_of_range_z: 0,
        discarded_out_of_range_xy: 0,
    };

    for p in &cloud.points {
        let Some(film) = assign_film(p.pos.z, spec) else {
            report.discarded_out_of_range_z += 1;
            continue;
        };
        let fx = (p.pos.x + spec.width / 2.0) / spec.width * res_x as f64;
        let fy = (p.pos.y + spec.height / 2.0) / spec.height * res_y as f64;
        if !(fx >= 0.0 && fx < res_x as f64 && fy >= 0.0 && fy < res_y as f64) {
            report.discarded_out_of_range_xy += 1;
            continue;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        let cell = &mut layers[film].pixels[iy * res_x + ix];
        match combine {
            CombineRule::Max => {
                for c in 0..3 {
                    cell[c] = cell[c].max(p.rgb[c]);
                }
            }
            CombineRule::Mean => {
                for c in 0..3 {
                    cell[c] += p.rgb[c];
                }
                cell_counts[(film * res_y + iy) * res_x + ix] += 1;
            }
        }
        report.assigned_per_film[film] += 1;
    }

    if combine == CombineRule::Mean {
        for (film, layer) in layers.iter_mut().enumerate() {
            for (i, cell) in layer.pixels.iter_mut().enumerate() {
                let count = cell_counts[film * res_x * res_y + i];
                if count > 1 {
                    for c in 0..3 {
                        cell[c] /= count as f64;
                    }
                }
            }
        }
    }

    Ok((layers, report))
}
