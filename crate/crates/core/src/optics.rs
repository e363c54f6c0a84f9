//! Optical model of the physical stacked-film display.
//!
//! Each film transmits a fixed fraction of the UV excitation light
//! (`t_uv`, about 0.82 per film) and of the emitted visible light
//! (`t_vis`, about 0.90), so crossing n films scales intensity by `t^n`.
//! Fluorescent emission is the printed ink times a per-channel quantum
//! yield. Sharpness loss on the emission path is modelled as a Gaussian
//! whose sigma grows linearly with the number of films crossed toward the
//! viewer; the excitation path attenuates but does not blur the image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::PatternImage;
use crate::stack::FilmStackSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UvSides {
    OneSided,
    /// UV lamps above and below the stack.
    #[default]
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalModel {
    /// Per-film transmittance at the UV excitation wavelength.
    pub t_uv: f64,
    /// Per-film transmittance in the visible band.
    pub t_vis: f64,
    /// Emission gain per ink channel (R, G, B).
    pub quantum_yield: [f64; 3],
    /// Gaussian sigma in mm added per film crossed on the emission path.
    pub blur_sigma_per_film: f64,
    pub uv_sides: UvSides,
    /// Scale the visible absorption exponent by 1/cos(theta) for oblique
    /// views. Off by default: the measured transmittances are
    /// normal-incidence figures.
    pub oblique_absorption: bool,
}

impl Default for OpticalModel {
    fn default() -> Self {
        OpticalModel {
            t_uv: 0.82,
            t_vis: 0.90,
            quantum_yield: [0.43, 0.85, 0.89],
            blur_sigma_per_film: 0.05,
            uv_sides: UvSides::TwoSided,
            oblique_absorption: false,
        }
    }
}

impl OpticalModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_uv", self.t_uv), ("t_vis", self.t_vis)] {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        for y in self.quantum_yield {
            if !(y.is_finite() && y > 0.0 && y <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "quantum yields must lie in (0, 1], got {y}"
                )));
            }
        }
        if !(self.blur_sigma_per_film.is_finite() && self.blur_sigma_per_film >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blur sigma must be >= 0, got {}",
                self.blur_sigma_per_film
            )));
        }
        Ok(())
    }
}

/// Fraction of UV excitation surviving `n_films_crossed` films: `t_uv^n`.
pub fn uv_excitation_factor(n_films_crossed: usize, model: &OpticalModel) -> f64 {
    model.t_uv.powi(n_films_crossed as i32)
}

/// Fraction of emitted visible light surviving `n_films_crossed` films.
pub fn visible_attenuation_factor(n_films_crossed: usize, model: &OpticalModel) -> f64 {
    model.t_vis.powi(n_films_crossed as i32)
}

/// Per-layer UV excitation factors, indexed from the source side (index 0
/// is the layer nearest a lamp). One-sided: `t_uv^k`. Two-sided:
/// `t_uv^k + t_uv^(n-1-k)`, symmetric about the middle of the stack.
pub fn layer_excitation_profile(spec: &FilmStackSpec, model: &OpticalModel) -> Vec<f64> {
    let n = spec.n_films;
    (0..n)
        .map(|k| match model.uv_sides {
            UvSides::OneSided => model.t_uv.powi(k as i32),
            UvSides::TwoSided => {
                model.t_uv.powi(k as i32) + model.t_uv.powi((n - 1 - k) as i32)
            }
        })
        .collect()
}

/// Renders the stack seen from a viewpoint rotated `theta_deg` about the
/// Y axis, viewer on the +z side (so the last layer is the front one).
///
/// Each layer contributes its emission times the channel quantum yield,
/// its UV excitation factor (for one-sided UV the lamp sits on the viewer
/// side), and `t_vis` per film between it and the viewer; the contribution
/// is blurred by the per-film sigma times the films crossed and laterally
/// shifted by its depth times tan(theta). The sum is normalized by its
/// theoretical maximum for display.
pub fn render_stack_view(
    layers: &[PatternImage],
    spec: &FilmStackSpec,
    model: &OpticalModel,
    theta_deg: f64,
) -> Result<PatternImage> {
    if !theta_deg.is_finite() || theta_deg.abs() >= 60.0 {
        return Err(Error::ViewAngleOutOfRange(theta_deg));
    }
    model.validate()?;
    spec.validate()?;
    let n = layers.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no layers to render".into()));
    }
    if n != spec.n_films {
        return Err(Error::InvalidParameter(format!(
            "{} layers but the stack specifies {} films",
            n, spec.n_films
        )));
    }
    let (w, h, pitch) = (layers[0].width, layers[0].height, layers[0].pixel_pitch);
    for l in layers {
        if l.width != w || l.height != h || (l.pixel_pitch - pitch).abs() > 1e-12 {
            return Err(Error::DimensionMismatch(
                "all layers must share one raster".into(),
            ));
        }
    }

    let profile = layer_excitation_profile(spec, model);
    let tan_theta = theta_deg.to_radians().tan();
    let path_scale = if model.oblique_absorption {
        1.0 / theta_deg.to_radians().cos()
    } else {
        1.0
    };
    let mut acc = vec![[0.0f64; 3]; w * h];
    let mut weight_bound = [0.0f64; 3];

    for (k, layer) in layers.iter().enumerate() {
        let films_to_viewer = n - 1 - k;
        let excitation = profile[films_to_viewer];
        let t_path = if model.oblique_absorption {
            model.t_vis.powf(films_to_viewer as f64 * path_scale)
        } else {
            model.t_vis.powi(films_to_viewer as i32)
        };
        let sigma_px = model.blur_sigma_per_film * films_to_viewer as f64 / pitch;
        let blurred = gaussian_blur(layer, sigma_px);
        let shift = films_to_viewer as f64 * spec.pitch() * tan_theta;
        for c in 0..3 {
            weight_bound[c] += model.quantum_yield[c] * excitation * t_path;
        }
        for j in 0..h {
            let v = (j as f64 + 0.5 - h as f64 / 2.0) * pitch;
            for i in 0..w {
                let u = (i as f64 + 0.5 - w as f64 / 2.0) * pitch;
                let s = blurred.sample(u - shift, v);
                let px = &mut acc[j * w + i];
                for c in 0..3 {
                    px[c] += model.quantum_yield[c] * excitation * t_path * s[c];
                }
            }
        }
    }

    let scale = weight_bound.iter().copied().fold(0.0, f64::max).max(1e-300);
    Ok(PatternImage {
        width: w,
        height: h,
        pixels: acc
            .into_iter()
            .map(|p| [p[0] / scale, p[1] / scale, p[2] / scale])
            .collect(),
        pixel_pitch: pitch,
    })
}

/// The sandwich experiment: a single printed layer behind `n_uv` clear
/// films on the lamp side and `n_vis` clear films on the camera side.
///
/// Output is the pattern times the quantum yields, `t_uv^n_uv` and
/// `t_vis^n_vis`, blurred by sigma = per-film sigma x `n_vis`; only the
/// emission path degrades sharpness.
pub fn simulate_sandwich(
    pattern_layer: &PatternImage,
    n_uv: usize,
    n_vis: usize,
    model: &OpticalModel,
) -> Result<PatternImage> {
    model.validate()?;
    let gain_uv = uv_excitation_factor(n_uv, model);
    let gain_vis = visible_attenuation_factor(n_vis, model);
    let mut out = pattern_layer.clone();
    for p in out.pixels.iter_mut() {
        for c in 0..3 {
            p[c] *= model.quantum_yield[c] * gain_uv * gain_vis;
        }
    }
    let sigma_px = model.blur_sigma_per_film * n_vis as f64 / pattern_layer.pixel_pitch;
    Ok(gaussian_blur(&out, sigma_px))
}

/// Mean over all pixels and channels.
pub fn mean_brightness(img: &PatternImage) -> f64 {
    let n = (img.pixels.len() * 3) as f64;
    img.pixels.iter().map(|p| p[0] + p[1] + p[2]).sum::<f64>() / n
}

/// Separable Gaussian with a normalized kernel of radius 3 sigma and zero
/// padding outside the image, so interior energy is preserved.
pub fn gaussian_blur(img: &PatternImage, sigma_px: f64) -> PatternImage {
    if sigma_px <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma_px).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma_px * sigma_px)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= total;
    }

    let (w, h) = (img.width as i64, img.height as i64);
    let mut tmp = vec![[0.0f64; 3]; img.pixels.len()];
    for j in 0..h {
        for i in 0..w {
            let mut acc = [0.0f64; 3];
            for (t, k) in kernel.iter().enumerate() {
                let x = i + t as i64 - radius;
                if x < 0 || x >= w {
                    continue;
                }
                let p = img.pixels[(j * w + x) as usize];
                for c in 0..3 {
                    acc[c] += k * p[c];
                }
            }
            tmp[(j * w + i) as usize] = acc;
        }
    }
    let mut out = img.clone();
    for j in 0..h {
        for i in 0..w {
            let mut acc = [0.0f64; 3];
            for (t, k) in kernel.iter().enumerate() {
                let y = j + t as i64 - radius;
                if y < 0 || y >= h {
                    continue;
                }
                let p = tmp[(y * w + i) as usize];
                for c in 0..3 {
                    acc[c] += k * p[c];
                }
            }
            out.pixels[(j * w + i) as usize] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{GridSpec, Volume};
    use crate::geometry::{ProjectionAxis, Vec3};
    use crate::patterns::{rgb_circles, smooth_field};
    use crate::projection::project_volume;

    fn unit_model() -> OpticalModel {
        OpticalModel {
            t_uv: 1.0,
            t_vis: 1.0,
            quantum_yield: [1.0; 3],
            blur_sigma_per_film: 0.0,
            uv_sides: UvSides::OneSided,
            oblique_absorption: false,
        }
    }

    // Independent exponentiation: plain repeated multiplication.
    fn pow_loop(t: f64, n: usize) -> f64 {
        let mut acc = 1.0;
        for _ in 0..n {
            acc *= t;
        }
        acc
    }

    #[test]
    fn uv_attenuation_matches_measured_percentages() {
        let model = OpticalModel::default();
        assert_eq!(uv_excitation_factor(0, &model), 1.0);
        let f20 = uv_excitation_factor(20, &model);
        assert!((0.0185..=0.0195).contains(&f20), "t^20 = {f20}");
        assert!(f20 <= 0.02);
        let f25 = uv_excitation_factor(25, &model);
        assert!(f25 < 0.01, "t^25 = {f25}");
        assert!((f20 - pow_loop(0.82, 20)).abs() < 1e-12);
        assert!((f25 - pow_loop(0.82, 25)).abs() < 1e-12);
    }

    #[test]
    fn visible_attenuation_follows_power_law() {
        let model = OpticalModel::default();
        assert_eq!(visible_attenuation_factor(0, &model), 1.0);
        let f10 = visible_attenuation_factor(10, &model);
        assert!((f10 - 0.3487).abs() < 1e-4);
        assert!((f10 - pow_loop(0.9, 10)).abs() < 1e-12);
        for n in 0..30 {
            assert!(
                visible_attenuation_factor(n + 1, &model) < visible_attenuation_factor(n, &model)
            );
        }
    }

    #[test]
    fn attenuation_is_multiplicative() {
        let model = OpticalModel::default();
        for (a, b) in [(3usize, 7usize), (0, 12), (10, 10), (1, 24)] {
            let lhs = uv_excitation_factor(a + b, &model);
            let rhs = uv_excitation_factor(a, &model) * uv_excitation_factor(b, &model);
            assert!((lhs - rhs).abs() < 1e-12);
            let lhs = visible_attenuation_factor(a + b, &model);
            let rhs = visible_attenuation_factor(a, &model) * visible_attenuation_factor(b, &model);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    fn spec_with(n: usize) -> FilmStackSpec {
        FilmStackSpec {
            n_films: n,
            ..FilmStackSpec::default()
        }
    }

    #[test]
    fn excitation_profile_one_sided() {
        let model = OpticalModel {
            t_uv: 0.5,
            uv_sides: UvSides::OneSided,
            ..OpticalModel::default()
        };
        assert_eq!(layer_excitation_profile(&spec_with(3), &model), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn excitation_profile_two_sided_is_symmetric() {
        let model = OpticalModel {
            t_uv: 0.5,
            uv_sides: UvSides::TwoSided,
            ..OpticalModel::default()
        };
        assert_eq!(layer_excitation_profile(&spec_with(3), &model), vec![1.25, 1.0, 1.25]);

        let model = OpticalModel::default();
        let profile = layer_excitation_profile(&spec_with(20), &model);
        for k in 0..20 {
            assert_eq!(profile[k], profile[19 - k]);
        }
    }

    #[test]
    fn single_layer_identity_configuration() {
        let img = smooth_field(50, 24, 24, 0.5);
        let out =
            render_stack_view(std::slice::from_ref(&img), &spec_with(1), &unit_model(), 0.0)
                .unwrap();
        for (a, b) in out.pixels.iter().zip(&img.pixels) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_angle_unit_optics_reduces_to_projection() {
        let grid = GridSpec { nx: 16, ny: 16, nz: 6, pitch_x: 0.5, pitch_y: 0.5, layer_pitch: 0.6 };
        let mut vol = Volume::zeros(grid);
        for (n, v) in vol.values.iter_mut().enumerate() {
            let t = (n % 97) as f64 / 96.0;
            *v = [t, 1.0 - t, 0.5 * t];
        }
        let layers: Vec<PatternImage> =
            (0..6).map(|k| vol.layer_as_pattern(k).unwrap()).collect();
        let spec = spec_with(6);
        let rendered = render_stack_view(&layers, &spec, &unit_model(), 0.0).unwrap();

        let axis = ProjectionAxis::from_direction(Vec3::new(0.0, 0.0, 1.0), "z").unwrap();
        let raw = project_volume(&vol, &axis, 16, 16, 0.5).unwrap().raw;
        // render normalizes by the layer count under unit optics
        for (r, p) in rendered.pixels.iter().zip(&raw.pixels) {
            for c in 0..3 {
                assert!((r[c] * 6.0 - p[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn front_layer_outshines_back_layer_under_front_uv() {
        let model = OpticalModel {
            uv_sides: UvSides::OneSided,
            blur_sigma_per_film: 0.0,
            ..OpticalModel::default()
        };
        let bright = PatternImage::constant(8, 8, 1.0, [1.0; 3]);
        let black = PatternImage::constant(8, 8, 1.0, [0.0; 3]);
        let spec = spec_with(2);
        let front_lit =
            render_stack_view(&[black.clone(), bright.clone()], &spec, &model, 0.0).unwrap();
        let back_lit = render_stack_view(&[bright, black], &spec, &model, 0.0).unwrap();
        assert!(mean_brightness(&front_lit) > mean_brightness(&back_lit));
    }

    #[test]
    fn oblique_view_shifts_deep_layers() {
        let model = unit_model();
        let spec = FilmStackSpec { n_films: 2, film_thickness: 0.5, gap: 4.5, ..spec_with(2) };
        // single lit pixel on the back layer, flat front layer
        let mut back = PatternImage::constant(16, 16, 1.0, [0.0; 3]);
        back.set(8, 8, [1.0; 3]);
        let front = PatternImage::constant(16, 16, 1.0, [0.0; 3]);
        let straight = render_stack_view(&[back.clone(), front.clone()], &spec, &model, 0.0).unwrap();
        let tilted = render_stack_view(&[back, front], &spec, &model, 30.0).unwrap();
        // depth 5 mm at 30 deg -> shift 2.886 mm = 2.886 px
        let peak = |img: &PatternImage| {
            let mut best = (0usize, 0usize, 0.0f64);
            for j in 0..16 {
                for i in 0..16 {
                    if img.get(i, j)[0] > best.2 {
                        best = (i, j, img.get(i, j)[0]);
                    }
                }
            }
            best
        };
        let (i0, j0, _) = peak(&straight);
        let (i1, j1, _) = peak(&tilted);
        assert_eq!((i0, j0), (8, 8));
        assert_eq!(j1, 8);
        assert_eq!(i1, 11); // shifted ~2.9 px toward +u
    }

    #[test]
    fn oblique_absorption_flag_dims_deep_layers() {
        let base = OpticalModel {
            blur_sigma_per_film: 0.0,
            uv_sides: UvSides::OneSided,
            ..OpticalModel::default()
        };
        let scaled_model = OpticalModel {
            oblique_absorption: true,
            ..base.clone()
        };
        // only the back layer lit, so its relative weight after
        // normalization drops when the path through the front film
        // lengthens
        let layers = [
            PatternImage::constant(64, 64, 1.0, [1.0; 3]),
            PatternImage::constant(64, 64, 1.0, [0.0; 3]),
        ];
        let spec = spec_with(2);
        let plain = render_stack_view(&layers, &spec, &base, 20.0).unwrap();
        let scaled = render_stack_view(&layers, &spec, &scaled_model, 20.0).unwrap();
        assert!(mean_brightness(&scaled) < mean_brightness(&plain));
        // inert at normal incidence
        let p0 = render_stack_view(&layers, &spec, &base, 0.0).unwrap();
        let s0 = render_stack_view(&layers, &spec, &scaled_model, 0.0).unwrap();
        for (a, b) in p0.pixels.iter().zip(&s0.pixels) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn view_angle_out_of_range_is_rejected() {
        let img = PatternImage::constant(4, 4, 1.0, [0.5; 3]);
        let err = render_stack_view(&[img], &spec_with(1), &OpticalModel::default(), 80.0);
        assert!(matches!(err, Err(Error::ViewAngleOutOfRange(_))));
    }

    #[test]
    fn sandwich_with_no_films_applies_only_quantum_yield() {
        let model = OpticalModel::default();
        let pattern = rgb_circles(32, 32, 1.0);
        let out = simulate_sandwich(&pattern, 0, 0, &model).unwrap();
        for (o, p) in out.pixels.iter().zip(&pattern.pixels) {
            for c in 0..3 {
                assert!((o[c] - p[c] * model.quantum_yield[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn twenty_uv_films_attenuate_to_two_percent() {
        let model = OpticalModel::default();
        let pattern = rgb_circles(48, 48, 1.0);
        let base = mean_brightness(&simulate_sandwich(&pattern, 0, 0, &model).unwrap());
        let dimmed = mean_brightness(&simulate_sandwich(&pattern, 20, 0, &model).unwrap());
        let ratio = dimmed / base;
        assert!((ratio - 0.82f64.powi(20)).abs() < 1e-9);
        assert!((0.017..=0.021).contains(&ratio));
    }

    #[test]
    fn uv_sweep_decreases_and_faster_than_visible_sweep() {
        let model = OpticalModel::default();
        let pattern = rgb_circles(64, 64, 35.0 / 64.0);
        let sweep = |uv: bool| -> Vec<f64> {
            [0usize, 5, 10, 15, 20, 25]
                .iter()
                .map(|&n| {
                    let img = if uv {
                        simulate_sandwich(&pattern, n, 0, &model).unwrap()
                    } else {
                        simulate_sandwich(&pattern, 0, n, &model).unwrap()
                    };
                    mean_brightness(&img)
                })
                .collect()
        };
        let uv = sweep(true);
        let vis = sweep(false);
        for w in uv.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in vis.windows(2) {
            assert!(w[1] < w[0]);
        }
        // the visible path decays more slowly at every film count
        for (u, v) in uv.iter().zip(&vis).skip(1) {
            assert!(v > u);
        }
    }

    #[test]
    fn blur_preserves_interior_energy() {
        let mut img = PatternImage::constant(64, 64, 1.0, [0.0; 3]);
        img.set(32, 32, [1.0; 3]);
        let blurred = gaussian_blur(&img, 2.0);
        let total: f64 = blurred.pixels.iter().map(|p| p[0]).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let m = OpticalModel { t_uv: 0.0, ..OpticalModel::default() };
        assert!(m.validate().is_err());
        let m = OpticalModel { t_vis: 1.5, ..OpticalModel::default() };
        assert!(m.validate().is_err());
        let m = OpticalModel { blur_sigma_per_film: -0.1, ..OpticalModel::default() };
        assert!(m.validate().is_err());
    }
}
