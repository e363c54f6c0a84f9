//! Voxel-volume design: each voxel channel is the product of the bilinear
//! samples of every input pattern at the voxel's perpendicular projection
//! onto that pattern's plane. Emission of printable per-film layer images
//! lives here too.

use image::{ImageBuffer, Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_point_to_plane, ProjectionAxis, Vec3};
use crate::imaging::{layer_file_name, quantize16, quantize8, BitDepth, PatternImage};

/// Voxel grid dimensions and physical pitches. The grid is centred on the
/// origin: voxel `(i, j, k)` has its centre at
/// `((i + 0.5 - nx/2) px, (j + 0.5 - ny/2) py, (k + 0.5 - nz/2) pz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub layer_pitch: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 512,
            ny: 512,
            nz: 20,
            pitch_x: 35.0 / 512.0,
            pitch_y: 35.0 / 512.0,
            layer_pitch: 0.6,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 1 || self.ny < 1 || self.nz < 1 {
            return Err(Error::InvalidParameter(
                "grid dimensions must be >= 1".into(),
            ));
        }
        for (name, v) in [
            ("pitch_x", self.pitch_x),
            ("pitch_y", self.pitch_y),
            ("layer_pitch", self.layer_pitch),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The RGB voxel grid, channels in [0, 1]. `values[(k * ny + j) * nx + i]`,
/// so one z-slab is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub grid: GridSpec,
    pub values: Vec<[f64; 3]>,
}

impl Volume {
    pub fn zeros(grid: GridSpec) -> Self {
        Volume {
            values: vec![[0.0; 3]; grid.nx * grid.ny * grid.nz],
            grid,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.grid.ny + j) * self.grid.nx + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.values[self.index(i, j, k)]
    }

    pub fn voxel_centre(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let g = &self.grid;
        Vec3::new(
            (i as f64 + 0.5 - g.nx as f64 / 2.0) * g.pitch_x,
            (j as f64 + 0.5 - g.ny as f64 / 2.0) * g.pitch_y,
            (k as f64 + 0.5 - g.nz as f64 / 2.0) * g.layer_pitch,
        )
    }

    /// z coordinate of layer `k`'s plane (centred grid).
    pub fn layer_z(&self, k: usize) -> f64 {
        (k as f64 + 0.5 - self.grid.nz as f64 / 2.0) * self.grid.layer_pitch
    }

    /// One z-slab as a pattern image (for rendering or saving unquantized).
    /// Requires square in-plane pitch.
    pub fn layer_as_pattern(&self, k: usize) -> Result<PatternImage> {
        let g = &self.grid;
        if (g.pitch_x - g.pitch_y).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "layer_as_pattern requires pitch_x == pitch_y".into(),
            ));
        }
        let slab = &self.values[k * g.nx * g.ny..(k + 1) * g.nx * g.ny];
        Ok(PatternImage {
            width: g.nx,
            height: g.ny,
            pixels: slab.to_vec(),
            pixel_pitch: g.pitch_x,
        })
    }
}

/// One pattern together with its projection axis.
#[derive(Debug, Clone)]
pub struct DesignPattern {
    pub image: PatternImage,
    pub axis: ProjectionAxis,
}

#[derive(Debug, Clone)]
pub struct DesignInput {
    pub patterns: Vec<DesignPattern>,
    pub grid: GridSpec,
}

/// Multiplies factors in ascending value order. Fixing the order makes the
/// product bit-identical under any permutation of the inputs.
#[inline]
fn sorted_product(factors: &mut [f64]) -> f64 {
    factors.sort_unstable_by(f64::total_cmp);
    factors.iter().product()
}

/// Computes the voxel volume whose every channel is the product of all
/// pattern samples at the voxel's perpendicular projections.
///
/// The factors are multiplied in ascending value order, so the output is
/// bit-identical for any ordering of the input patterns. Voxels are
/// computed independently (point sampling at the voxel centre) and the
/// grid may be partitioned arbitrarily across threads without changing
/// the result.
pub fn design_volume(input: &DesignInput) -> Result<Volume> {
    if input.patterns.is_empty() {
        return Err(Error::EmptyPatternList);
    }
    input.grid.validate()?;
    warn_about_axes(&input.patterns);

    let grid = input.grid;
    let mut vol = Volume::zeros(grid);
    let patterns = &input.patterns;
    let nx = grid.nx;
    let ny = grid.ny;

    vol.values
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(row, out)| {
            let k = row / ny;
            let j = row % ny;
            let y = (j as f64 + 0.5 - ny as f64 / 2.0) * grid.pitch_y;
            let z = (k as f64 + 0.5 - grid.nz as f64 / 2.0) * grid.layer_pitch;
            let mut samples = vec![[0.0f64; 3]; patterns.len()];
            let mut factors = vec![0.0f64; patterns.len()];
            for (i, voxel) in out.iter_mut().enumerate() {
                let centre = Vec3::new(
                    (i as f64 + 0.5 - nx as f64 / 2.0) * grid.pitch_x,
                    y,
                    z,
                );
                for (s, p) in samples.iter_mut().zip(patterns) {
                    let (u, v) = project_point_to_plane(centre, &p.axis);
                    *s = p.image.sample(u, v);
                }
                for c in 0..3 {
                    for (f, s) in factors.iter_mut().zip(&samples) {
                        *f = s[c];
                    }
                    voxel[c] = sorted_product(&mut factors);
                }
            }
        });
    Ok(vol)
}

fn warn_about_axes(patterns: &[DesignPattern]) {
    if patterns.len() > 6 {
        log::warn!(
            "{} patterns share one volume; contrast degrades as the count grows",
            patterns.len()
        );
    }
    for a in 0..patterns.len() {
        for b in a + 1..patterns.len() {
            let dot = patterns[a]
                .axis
                .direction
                .dot(patterns[b].axis.direction)
                .clamp(-1.0, 1.0);
            if dot.acos().to_degrees() < 1.0 {
                log::warn!(
                    "projection axes '{}' and '{}' are within 1 degree of each other",
                    patterns[a].axis.label,
                    patterns[b].axis.label
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Layer emission
// ---------------------------------------------------------------------------

pub type Rgb16Image = ImageBuffer<Rgb<u16>, Vec<u16>>;

/// Quantized per-film cross-section images, ordered with increasing z.
#[derive(Debug, Clone)]
pub enum LayerImages {
    Eight(Vec<RgbImage>),
    Sixteen(Vec<Rgb16Image>),
}

impl LayerImages {
    pub fn len(&self) -> usize {
        match self {
            LayerImages::Eight(v) => v.len(),
            LayerImages::Sixteen(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `layer_000.png` ... into `dir`, creating it if needed.
    pub fn save_to_dir(&self, dir: impl AsRef<std::path::Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut paths = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let path = dir.join(layer_file_name(k));
            let res = match self {
                LayerImages::Eight(v) => v[k].save(&path),
                LayerImages::Sixteen(v) => v[k].save(&path),
            };
            res.map_err(|e| Error::Io {
                path: path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Slices the volume into `nz` printable layer images, layer `k` being the
/// `z = k` slab, quantized round-half-up at the requested bit depth.
pub fn emit_layers(vol: &Volume, bit_depth: BitDepth) -> LayerImages {
    let g = &vol.grid;
    let (w, h) = (g.nx as u32, g.ny as u32);
    match bit_depth {
        BitDepth::Eight => LayerImages::Eight(
            (0..g.nz)
                .map(|k| {
                    RgbImage::from_fn(w, h, |x, y| {
                        let p = vol.get(x as usize, y as usize, k);
                        Rgb([quantize8(p[0]), quantize8(p[1]), quantize8(p[2])])
                    })
                })
                .collect(),
        ),
        BitDepth::Sixteen => LayerImages::Sixteen(
            (0..g.nz)
                .map(|k| {
                    Rgb16Image::from_fn(w, h, |x, y| {
                        let p = vol.get(x as usize, y as usize, k);
                        Rgb([quantize16(p[0]), quantize16(p[1]), quantize16(p[2])])
                    })
                })
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::axis_from_rotations;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_pattern(rng: &mut StdRng, w: usize, h: usize, pitch: f64) -> PatternImage {
        let mut img = PatternImage::constant(w, h, pitch, [0.0; 3]);
        for p in img.pixels.iter_mut() {
            *p = [rng.gen(), rng.gen(), rng.gen()];
        }
        img
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            nx: 8,
            ny: 8,
            nz: 4,
            pitch_x: 0.5,
            pitch_y: 0.5,
            layer_pitch: 0.5,
        }
    }

    fn axes_xyz() -> [ProjectionAxis; 3] {
        [
            ProjectionAxis::from_direction(Vec3::new(1.0, 0.0, 0.0), "x").unwrap(),
            ProjectionAxis::from_direction(Vec3::new(0.0, 1.0, 0.0), "y").unwrap(),
            ProjectionAxis::from_direction(Vec3::new(0.0, 0.0, 1.0), "z").unwrap(),
        ]
    }

    #[test]
    fn all_white_patterns_give_unit_volume() {
        let [ax, ay, az] = axes_xyz();
        let input = DesignInput {
            patterns: vec![
                DesignPattern { image: PatternImage::constant(8, 8, 1.0, [1.0; 3]), axis: ax },
                DesignPattern { image: PatternImage::constant(8, 8, 1.0, [1.0; 3]), axis: ay },
                DesignPattern { image: PatternImage::constant(8, 8, 1.0, [1.0; 3]), axis: az },
            ],
            grid: small_grid(),
        };
        let vol = design_volume(&input).unwrap();
        assert!(vol.values.iter().all(|v| *v == [1.0, 1.0, 1.0]));
    }

    #[test]
    fn one_black_pattern_annihilates() {
        let [ax, _, az] = axes_xyz();
        let mut rng = StdRng::seed_from_u64(3);
        let input = DesignInput {
            patterns: vec![
                DesignPattern { image: random_pattern(&mut rng, 8, 8, 1.0), axis: ax },
                DesignPattern { image: PatternImage::constant(8, 8, 1.0, [0.0; 3]), axis: az },
            ],
            grid: small_grid(),
        };
        let vol = design_volume(&input).unwrap();
        assert!(vol.values.iter().all(|v| *v == [0.0, 0.0, 0.0]));
    }

    // Brute-force oracle: plain triple loop, voxel centre recomputed from the
    // documented formula, factors collected per channel and multiplied in
    // ascending value order (the published canonical order).
    fn naive_design(patterns: &[DesignPattern], grid: GridSpec) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0f64; 3]; grid.nx * grid.ny * grid.nz];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let centre = Vec3::new(
                        (i as f64 + 0.5 - grid.nx as f64 / 2.0) * grid.pitch_x,
                        (j as f64 + 0.5 - grid.ny as f64 / 2.0) * grid.pitch_y,
                        (k as f64 + 0.5 - grid.nz as f64 / 2.0) * grid.layer_pitch,
                    );
                    let samples: Vec<[f64; 3]> = patterns
                        .iter()
                        .map(|p| {
                            let (u, v) = project_point_to_plane(centre, &p.axis);
                            p.image.sample(u, v)
                        })
                        .collect();
                    for c in 0..3 {
                        let mut factors: Vec<f64> = samples.iter().map(|s| s[c]).collect();
                        factors.sort_unstable_by(f64::total_cmp);
                        out[(k * grid.ny + j) * grid.nx + i][c] = factors.iter().product();
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_triple_loop_on_axis_aligned_axes() {
        let mut rng = StdRng::seed_from_u64(42);
        let [ax, ay, az] = axes_xyz();
        let input = DesignInput {
            patterns: vec![
                DesignPattern { image: random_pattern(&mut rng, 8, 8, 0.5), axis: ax },
                DesignPattern { image: random_pattern(&mut rng, 8, 8, 0.5), axis: ay },
                DesignPattern { image: random_pattern(&mut rng, 8, 8, 0.5), axis: az },
            ],
            grid: small_grid(),
        };
        let vol = design_volume(&input).unwrap();
        let oracle = naive_design(&input.patterns, input.grid);
        assert_eq!(vol.values, oracle);
    }

    #[test]
    fn matches_naive_triple_loop_on_oblique_axes() {
        let mut rng = StdRng::seed_from_u64(1234);
        for npat in 2..=4 {
            let patterns: Vec<DesignPattern> = (0..npat)
                .map(|n| DesignPattern {
                    image: random_pattern(&mut rng, 8, 8, 0.5),
                    axis: axis_from_rotations(
                        rng.gen_range(-25.0..25.0),
                        rng.gen_range(-25.0..25.0),
                    )
                    .unwrap()
                    .with_label(format!("p{n}")),
                })
                .collect();
            let input = DesignInput { patterns, grid: small_grid() };
            let vol = design_volume(&input).unwrap();
            let oracle = naive_design(&input.patterns, input.grid);
            assert_eq!(vol.values, oracle, "npat={npat}");
        }
    }

    #[test]
    fn permutation_of_patterns_is_bit_identical() {
        let mut rng = StdRng::seed_from_u64(99);
        let patterns: Vec<DesignPattern> = (0..4)
            .map(|n| DesignPattern {
                image: random_pattern(&mut rng, 8, 8, 0.5),
                axis: axis_from_rotations(
                    rng.gen_range(-30.0..30.0),
                    rng.gen_range(-30.0..30.0),
                )
                .unwrap()
                .with_label(format!("p{n}")),
            })
            .collect();
        let grid = small_grid();
        let base = design_volume(&DesignInput { patterns: patterns.clone(), grid }).unwrap();
        for perm in [[1usize, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
            let shuffled: Vec<DesignPattern> =
                perm.iter().map(|&i| patterns[i].clone()).collect();
            let vol = design_volume(&DesignInput { patterns: shuffled, grid }).unwrap();
            assert_eq!(vol.values, base.values);
        }
    }

    #[test]
    fn scaling_one_pattern_scales_voxels_linearly() {
        let mut rng = StdRng::seed_from_u64(5);
        let [ax, _, az] = axes_xyz();
        let a = random_pattern(&mut rng, 8, 8, 0.5);
        let b = random_pattern(&mut rng, 8, 8, 0.5);
        let grid = small_grid();
        let base = design_volume(&DesignInput {
            patterns: vec![
                DesignPattern { image: a.clone(), axis: ax.clone() },
                DesignPattern { image: b.clone(), axis: az.clone() },
            ],
            grid,
        })
        .unwrap();
        for s in [0.5, 0.25, 0.9] {
            let mut scaled = a.clone();
            for p in scaled.pixels.iter_mut() {
                p[0] *= s;
                p[1] *= s;
                p[2] *= s;
            }
            let vol = design_volume(&DesignInput {
                patterns: vec![
                    DesignPattern { image: scaled, axis: ax.clone() },
                    DesignPattern { image: b.clone(), axis: az.clone() },
                ],
                grid,
            })
            .unwrap();
            for (v, b) in vol.values.iter().zip(&base.values) {
                for c in 0..3 {
                    assert!((v[c] - s * b[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn increasing_a_pixel_never_decreases_voxels() {
        let mut rng = StdRng::seed_from_u64(6);
        let [_, _, az] = axes_xyz();
        let a = random_pattern(&mut rng, 4, 4, 1.0);
        let grid = GridSpec { nx: 4, ny: 4, nz: 2, pitch_x: 1.0, pitch_y: 1.0, layer_pitch: 1.0 };
        let axis2 = axis_from_rotations(10.0, -15.0).unwrap();
        let b = random_pattern(&mut rng, 4, 4, 1.0);
        let mk = |a_img: PatternImage| DesignInput {
            patterns: vec![
                DesignPattern { image: a_img, axis: az.clone() },
                DesignPattern { image: b.clone(), axis: axis2.clone() },
            ],
            grid,
        };
        let base = design_volume(&mk(a.clone())).unwrap();
        let mut bumped = a.clone();
        let old = bumped.get(2, 1);
        bumped.set(2, 1, [(old[0] + 0.3).min(1.0), old[1], old[2]]);
        let vol = design_volume(&mk(bumped)).unwrap();
        for (v, b) in vol.values.iter().zip(&base.values) {
            for c in 0..3 {
                assert!(v[c] >= b[c] - 1e-15);
            }
        }
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let mut rng = StdRng::seed_from_u64(7);
        let patterns: Vec<DesignPattern> = (0..3)
            .map(|_| DesignPattern {
                image: random_pattern(&mut rng, 8, 8, 0.5),
                axis: axis_from_rotations(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0))
                    .unwrap(),
            })
            .collect();
        let vol = design_volume(&DesignInput { patterns, grid: small_grid() }).unwrap();
        for v in &vol.values {
            for c in 0..3 {
                assert!((0.0..=1.0).contains(&v[c]));
            }
        }
    }

    #[test]
    fn single_pattern_on_z_gives_constant_columns() {
        let mut rng = StdRng::seed_from_u64(8);
        let [_, _, az] = axes_xyz();
        let img = random_pattern(&mut rng, 10, 10, 0.4);
        // grid raster deliberately different from the pattern raster
        let grid = GridSpec { nx: 7, ny: 6, nz: 5, pitch_x: 0.3, pitch_y: 0.45, layer_pitch: 0.8 };
        let vol = design_volume(&DesignInput {
            patterns: vec![DesignPattern { image: img.clone(), axis: az }],
            grid,
        })
        .unwrap();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let centre = vol.voxel_centre(i, j, 0);
                let expected = img.sample(centre.x, centre.y);
                for k in 0..grid.nz {
                    assert_eq!(vol.get(i, j, k), vol.get(i, j, 0));
                }
                let got = vol.get(i, j, 0);
                for c in 0..3 {
                    assert!((got[c] - expected[c]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn empty_pattern_list_is_rejected() {
        let input = DesignInput { patterns: vec![], grid: small_grid() };
        assert!(matches!(design_volume(&input), Err(Error::EmptyPatternList)));
    }

    #[test]
    fn constant_half_volume_quantizes_to_128() {
        let grid = GridSpec { nx: 3, ny: 3, nz: 2, pitch_x: 1.0, pitch_y: 1.0, layer_pitch: 1.0 };
        let mut vol = Volume::zeros(grid);
        for v in vol.values.iter_mut() {
            *v = [0.5; 3];
        }
        match emit_layers(&vol, BitDepth::Eight) {
            LayerImages::Eight(layers) => {
                assert_eq!(layers.len(), 2);
                for layer in &layers {
                    assert!(layer.pixels().all(|p| p.0 == [128, 128, 128]));
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn twenty_layer_volume_emits_twenty_files() {
        let grid = GridSpec { nx: 4, ny: 4, nz: 20, pitch_x: 1.0, pitch_y: 1.0, layer_pitch: 0.6 };
        let vol = Volume::zeros(grid);
        let layers = emit_layers(&vol, BitDepth::Eight);
        assert_eq!(layers.len(), 20);
        let dir = tempfile::tempdir().unwrap();
        let paths = layers.save_to_dir(dir.path()).unwrap();
        assert_eq!(paths.len(), 20);
        assert!(paths[0].ends_with("layer_000.png"));
        assert!(paths[19].ends_with("layer_019.png"));
        assert!(paths.iter().all(|p| p.exists()));
    }

    #[test]
    fn restacking_layers_reproduces_volume_within_quantization() {
        let mut rng = StdRng::seed_from_u64(9);
        let grid = GridSpec { nx: 6, ny: 5, nz: 3, pitch_x: 1.0, pitch_y: 1.0, layer_pitch: 1.0 };
        let mut vol = Volume::zeros(grid);
        for v in vol.values.iter_mut() {
            *v = [rng.gen(), rng.gen(), rng.gen()];
        }
        match emit_layers(&vol, BitDepth::Eight) {
            LayerImages::Eight(layers) => {
                for k in 0..grid.nz {
                    for j in 0..grid.ny {
                        for i in 0..grid.nx {
                            let px = layers[k].get_pixel(i as u32, j as u32).0;
                            let v = vol.get(i, j, k);
                            for c in 0..3 {
                                let back = px[c] as f64 / 255.0;
                                assert!((back - v[c]).abs() <= 1.0 / 510.0 + 1e-12);
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}
