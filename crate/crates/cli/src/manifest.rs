//! The run manifest: one JSON document holding every pipeline parameter.
//! Every field has a default matching the reference device (20 films of
//! 0.1 mm at 0.5 mm gaps, 35 x 35 mm in plane, 512 x 512 x 20 design
//! grid, measured transmittances and quantum yields), so an empty manifest
//! reproduces that configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use voxfilm::{
    FilmStackSpec, GridSpec, NormalizeMode, OpticalModel, RotationOrder, UvSides,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Manifest {
    pub patterns: Vec<PatternEntry>,
    pub grid: GridSection,
    pub stack: StackSection,
    pub optics: OpticsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub rotation_x_deg: f64,
    #[serde(default)]
    pub rotation_y_deg: f64,
    /// Defaults to stack width / pattern width: the pattern spans the
    /// volume cross-section exactly.
    #[serde(default)]
    pub pixel_pitch_mm: Option<f64>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub rotation_order: RotationOrder,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Defaults per content kind: 512 for pattern designs, 300 for point
    /// clouds.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Defaults to the film count.
    pub nz: Option<usize>,
    /// Defaults to stack width / nx.
    pub pitch_x_mm: Option<f64>,
    /// Defaults to stack height / ny.
    pub pitch_y_mm: Option<f64>,
}

/// What the run rasterizes; picks the in-plane grid default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    /// Multi-pattern volume design: 512 x 512.
    Patterns,
    /// Point-cloud slicing and rendering: 300 x 300.
    PointCloud,
}

impl ContentKind {
    fn default_res(self) -> usize {
        match self {
            ContentKind::Patterns => 512,
            ContentKind::PointCloud => 300,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackSection {
    pub n_films: usize,
    pub film_thickness_mm: f64,
    pub gap_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
    /// In-plane printer resolution cap, reported by `info`.
    pub printer_dpi: [u32; 2],
}

impl Default for StackSection {
    fn default() -> Self {
        StackSection {
            n_films: 20,
            film_thickness_mm: 0.1,
            gap_mm: 0.5,
            width_mm: 35.0,
            height_mm: 35.0,
            printer_dpi: [5760, 1440],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    pub t_uv: f64,
    pub t_vis: f64,
    pub quantum_yield: [f64; 3],
    pub blur_sigma_per_film_mm: f64,
    pub uv_sides: UvSides,
    pub oblique_absorption: bool,
}

impl Default for OpticsSection {
    fn default() -> Self {
        let m = OpticalModel::default();
        OpticsSection {
            t_uv: m.t_uv,
            t_vis: m.t_vis,
            quantum_yield: m.quantum_yield,
            blur_sigma_per_film_mm: m.blur_sigma_per_film,
            uv_sides: m.uv_sides,
            oblique_absorption: m.oblique_absorption,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeOpt {
    /// Divide by the theoretical maximum (the layer count).
    Max,
    /// Divide by the observed maximum.
    Auto,
}

impl NormalizeOpt {
    pub fn to_mode(self) -> NormalizeMode {
        match self {
            NormalizeOpt::Max => NormalizeMode::TheoreticalMax,
            NormalizeOpt::Auto => NormalizeMode::Auto,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub bit_depth: u8,
    pub normalization: NormalizeOpt,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            bit_depth: 8,
            normalization: NormalizeOpt::Auto,
        }
    }
}

/// Manifest after every default has been filled in. This is what reports
/// embed and what the manifest hash covers.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedManifest {
    pub patterns: Vec<ResolvedPattern>,
    pub grid: GridSpec,
    pub stack: FilmStackSpec,
    pub printer_dpi: [u32; 2],
    pub optics: OpticalModel,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPattern {
    pub path: PathBuf,
    pub label: String,
    pub rotation_x_deg: f64,
    pub rotation_y_deg: f64,
    pub rotation_order: RotationOrder,
    /// None until the referenced image has been opened.
    pub pixel_pitch_mm: Option<f64>,
}

pub fn default_label(index: usize) -> String {
    if index < 26 {
        char::from(b'A' + index as u8).to_string()
    } else {
        format!("P{index}")
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }

    /// Fills in every default and validates cross-field constraints.
    pub fn resolve(&self, kind: ContentKind) -> Result<ResolvedManifest, CliError> {
        let stack = FilmStackSpec {
            n_films: self.stack.n_films,
            film_thickness: self.stack.film_thickness_mm,
            gap: self.stack.gap_mm,
            width: self.stack.width_mm,
            height: self.stack.height_mm,
        };
        stack.validate()?;

        let nz = self.grid.nz.unwrap_or(stack.n_films);
        if nz != stack.n_films {
            return Err(CliError::Validation(format!(
                "grid.nz ({nz}) must equal stack.n_films ({}): one printed film per layer",
                stack.n_films
            )));
        }
        let nx = self.grid.nx.unwrap_or(kind.default_res());
        let ny = self.grid.ny.unwrap_or(kind.default_res());
        let grid = GridSpec {
            nx,
            ny,
            nz,
            pitch_x: self.grid.pitch_x_mm.unwrap_or(stack.width / nx as f64),
            pitch_y: self.grid.pitch_y_mm.unwrap_or(stack.height / ny as f64),
            layer_pitch: stack.pitch(),
        };
        grid.validate()?;

        let optics = OpticalModel {
            t_uv: self.optics.t_uv,
            t_vis: self.optics.t_vis,
            quantum_yield: self.optics.quantum_yield,
            blur_sigma_per_film: self.optics.blur_sigma_per_film_mm,
            uv_sides: self.optics.uv_sides,
            oblique_absorption: self.optics.oblique_absorption,
        };
        optics.validate()?;

        if !matches!(self.output.bit_depth, 8 | 16) {
            return Err(CliError::Validation(format!(
                "output.bit_depth must be 8 or 16, got {}",
                self.output.bit_depth
            )));
        }

        let mut labels = std::collections::HashSet::new();
        let patterns = self
            .patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let label = p.label.clone().unwrap_or_else(|| default_label(i));
                // labels become file names
                if label.is_empty()
                    || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c))
                {
                    return Err(CliError::Validation(format!(
                        "pattern label '{label}' must be non-empty ASCII alphanumeric, '-' or '_'"
                    )));
                }
                if !labels.insert(label.clone()) {
                    return Err(CliError::Validation(format!(
                        "duplicate pattern label '{label}'"
                    )));
                }
                Ok(ResolvedPattern {
                    path: p.path.clone(),
                    label,
                    rotation_x_deg: p.rotation_x_deg,
                    rotation_y_deg: p.rotation_y_deg,
                    rotation_order: p.rotation_order,
                    pixel_pitch_mm: p.pixel_pitch_mm,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        Ok(ResolvedManifest {
            patterns,
            grid,
            stack,
            printer_dpi: self.stack.printer_dpi,
            optics,
            output: self.output.clone(),
        })
    }
}

impl ResolvedManifest {
    /// SHA-256 over the canonical JSON of the resolved manifest.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("resolved manifest serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Default pitch rule: the pattern spans the stack width exactly.
    pub fn pattern_pitch(&self, entry: &ResolvedPattern, image_width: usize) -> f64 {
        entry
            .pixel_pitch_mm
            .unwrap_or(self.stack.width / image_width as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_resolves_to_reference_configuration() {
        let m: Manifest = serde_json::from_str("{}").unwrap();
        let r = m.resolve(ContentKind::Patterns).unwrap();
        assert_eq!(r.grid.nx, 512);
        assert_eq!(r.grid.nz, 20);
        assert!((r.grid.pitch_x - 35.0 / 512.0).abs() < 1e-15);
        assert!((r.grid.layer_pitch - 0.6).abs() < 1e-15);
        assert_eq!(r.stack.n_films, 20);
        assert!((r.optics.t_uv - 0.82).abs() < 1e-15);
        assert_eq!(r.optics.quantum_yield, [0.43, 0.85, 0.89]);
        assert_eq!(r.output.bit_depth, 8);
        assert_eq!(r.printer_dpi, [5760, 1440]);
    }

    #[test]
    fn point_cloud_grid_defaults_to_three_hundred() {
        let m: Manifest = serde_json::from_str("{}").unwrap();
        let r = m.resolve(ContentKind::PointCloud).unwrap();
        assert_eq!((r.grid.nx, r.grid.ny), (300, 300));
        assert!((r.grid.pitch_x - 35.0 / 300.0).abs() < 1e-15);
        // explicit values win for either kind
        let m: Manifest = serde_json::from_str(r#"{"grid": {"nx": 128, "ny": 96}}"#).unwrap();
        let r = m.resolve(ContentKind::PointCloud).unwrap();
        assert_eq!((r.grid.nx, r.grid.ny), (128, 96));
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let m: Manifest = serde_json::from_str(
            r#"{"optics": {"t_uv": 0.99}, "grid": {"nx": 64, "ny": 64, "nz": 4},
                "stack": {"n_films": 4}}"#,
        )
        .unwrap();
        let r = m.resolve(ContentKind::Patterns).unwrap();
        assert!((r.optics.t_uv - 0.99).abs() < 1e-15);
        assert!((r.optics.t_vis - 0.90).abs() < 1e-15);
        assert_eq!(r.grid.nz, 4);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e: Result<Manifest, _> = serde_json::from_str(r#"{"gird": {}}"#);
        assert!(e.is_err());
    }

    #[test]
    fn nz_film_count_mismatch_is_rejected() {
        let m: Manifest =
            serde_json::from_str(r#"{"grid": {"nz": 10}}"#).unwrap();
        assert!(matches!(m.resolve(ContentKind::Patterns), Err(CliError::Validation(_))));
    }

    #[test]
    fn labels_default_to_letters_and_must_be_unique() {
        assert_eq!(default_label(0), "A");
        assert_eq!(default_label(3), "D");
        let m: Manifest = serde_json::from_str(
            r#"{"patterns": [{"path": "a.png", "label": "X"}, {"path": "b.png", "label": "X"}]}"#,
        )
        .unwrap();
        assert!(matches!(m.resolve(ContentKind::Patterns), Err(CliError::Validation(_))));
    }

    #[test]
    fn labels_unfit_for_file_names_are_rejected() {
        for bad in ["", "a/b", "x y", "dots."] {
            let m: Manifest = serde_json::from_str(&format!(
                r#"{{"patterns": [{{"path": "a.png", "label": "{bad}"}}]}}"#
            ))
            .unwrap();
            assert!(matches!(m.resolve(ContentKind::Patterns), Err(CliError::Validation(_))), "{bad:?}");
        }
        let m: Manifest = serde_json::from_str(
            r#"{"patterns": [{"path": "a.png", "label": "left_30-deg"}]}"#,
        )
        .unwrap();
        assert!(m.resolve(ContentKind::Patterns).is_ok());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = Manifest::default().resolve(ContentKind::Patterns).unwrap();
        let b = Manifest::default().resolve(ContentKind::Patterns).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        let mut m = Manifest::default();
        m.stack.gap_mm = 0.4;
        assert_ne!(m.resolve(ContentKind::Patterns).unwrap().sha256(), a.sha256());
    }
}
