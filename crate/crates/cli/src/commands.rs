//! Subcommand implementations and their report documents.
//!
//! Every run writes its artifacts plus a JSON report embedding the
//! resolved manifest and its SHA-256, so outputs are attributable to an
//! exact configuration. All artifact files are byte-deterministic for a
//! given manifest and inputs regardless of `--threads`; wall-clock fields
//! under `timings_ms` are the one documented exception.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use voxfilm::imaging::layer_file_name;
use voxfilm::{
    crosstalk_report, design_volume, emit_layers, load_pattern, load_point_cloud,
    normalize_projection, project_volume, render_stack_view, simulate_sandwich,
    slice_point_cloud_with, stack_metrics, BitDepth, CombineRule, CrosstalkReport, DesignInput,
    DesignPattern, OpticalModel, PatternImage, ProjectedPattern, SliceReport, StackMetrics,
    Volume,
};

use crate::manifest::{NormalizeOpt, ResolvedManifest};
use crate::{CliError, SweepKind};

const SWEEP_COUNTS: [usize; 6] = [0, 5, 10, 15, 20, 25];
const HISTOGRAM_BINS: usize = 16;

#[derive(Serialize)]
struct Timings {
    compute_ms: u64,
    write_ms: u64,
}

#[derive(Serialize)]
struct Histogram {
    bins: usize,
    r: Vec<u64>,
    g: Vec<u64>,
    b: Vec<u64>,
}

#[derive(Serialize)]
struct DesignReport<'a> {
    manifest_sha256: String,
    stack_metrics: StackMetrics,
    layer_files: Vec<String>,
    voxel_histogram: Histogram,
    timings_ms: Timings,
    resolved_manifest: &'a ResolvedManifest,
}

#[derive(Serialize)]
struct ProjectReport<'a> {
    manifest_sha256: String,
    view_files: Vec<String>,
    normalization_mode: NormalizeOpt,
    normalization_scales: Vec<f64>,
    timings_ms: Timings,
    resolved_manifest: &'a ResolvedManifest,
}

#[derive(Serialize)]
struct SliceRunReport<'a> {
    manifest_sha256: String,
    combine: CombineRule,
    stack_metrics: StackMetrics,
    layer_files: Vec<String>,
    slice: &'a SliceReport,
    resolved_manifest: &'a ResolvedManifest,
}

#[derive(Serialize)]
struct SweepEntry {
    n_uv: usize,
    n_vis: usize,
    mean_brightness: f64,
    file: String,
}

#[derive(Serialize)]
struct BrightnessReport<'a> {
    sweep: &'a str,
    film_counts: Vec<usize>,
    mean_brightness: Vec<f64>,
    entries: Vec<SweepEntry>,
    optics: &'a OpticalModel,
}

pub fn design(resolved: &ResolvedManifest) -> Result<(), CliError> {
    let mut resolved = resolved.clone();
    let (patterns, _) = load_design_patterns(&mut resolved)?;

    let t0 = Instant::now();
    let vol = design_volume(&DesignInput {
        patterns,
        grid: resolved.grid,
    })?;
    let compute_ms = t0.elapsed().as_millis() as u64;

    let t1 = Instant::now();
    let layers = emit_layers(&vol, bit_depth(&resolved));
    let layer_dir = resolved.output.directory.join("layers");
    let files = layers.save_to_dir(&layer_dir)?;
    let write_ms = t1.elapsed().as_millis() as u64;
    log::info!(
        "wrote {} layers to {} ({} ms design, {} ms write)",
        layers.len(),
        layer_dir.display(),
        compute_ms,
        write_ms
    );

    let report = DesignReport {
        manifest_sha256: resolved.sha256(),
        stack_metrics: stack_metrics(&resolved.stack)?,
        layer_files: file_names(&files),
        voxel_histogram: histogram(&vol),
        timings_ms: Timings { compute_ms, write_ms },
        resolved_manifest: &resolved,
    };
    write_json(&resolved.output.directory.join("design_report.json"), &report)
}

pub fn project(resolved: &ResolvedManifest, views: &[String]) -> Result<(), CliError> {
    let mut resolved = resolved.clone();
    let (patterns, originals) = load_design_patterns(&mut resolved)?;
    let selected = select_views(&resolved, views)?;

    let t0 = Instant::now();
    let vol = design_volume(&DesignInput {
        patterns: patterns.clone(),
        grid: resolved.grid,
    })?;
    let projections: Vec<ProjectedPattern> = selected
        .iter()
        .map(|&i| {
            let img = &patterns[i].image;
            project_volume(&vol, &patterns[i].axis, img.width, img.height, img.pixel_pitch)
        })
        .collect::<voxfilm::Result<_>>()?;
    let compute_ms = t0.elapsed().as_millis() as u64;

    let t1 = Instant::now();
    let dir = resolved.output.directory.join("projections");
    ensure_dir(&dir)?;
    let mode = resolved.output.normalization;
    let mut view_files = Vec::new();
    let mut scales = Vec::new();
    for p in &projections {
        let n = normalize_projection(p, mode.to_mode());
        let path = dir.join(format!("view_{}.png", p.label));
        voxfilm::save_image(&n.image, &path, bit_depth(&resolved))?;
        view_files.push(path.file_name().unwrap().to_string_lossy().into_owned());
        scales.push(n.scale);
    }
    let write_ms = t1.elapsed().as_millis() as u64;

    let selected_originals: Vec<PatternImage> =
        selected.iter().map(|&i| originals[i].clone()).collect();
    let crosstalk: CrosstalkReport = crosstalk_report(&projections, &selected_originals)?;
    print!("{crosstalk}");
    write_json(&resolved.output.directory.join("crosstalk.json"), &crosstalk)?;

    let report = ProjectReport {
        manifest_sha256: resolved.sha256(),
        view_files,
        normalization_mode: mode,
        normalization_scales: scales,
        timings_ms: Timings { compute_ms, write_ms },
        resolved_manifest: &resolved,
    };
    write_json(&resolved.output.directory.join("project_report.json"), &report)
}

pub fn slice(
    resolved: &ResolvedManifest,
    cloud_path: &Path,
    combine: CombineRule,
) -> Result<(), CliError> {
    let cloud = load_point_cloud(cloud_path)?;
    let (layers, report) = slice_point_cloud_with(
        &cloud,
        &resolved.stack,
        resolved.grid.nx,
        resolved.grid.ny,
        combine,
    )?;

    let dir = resolved.output.directory.join("layers");
    ensure_dir(&dir)?;
    let mut files = Vec::new();
    for (k, layer) in layers.iter().enumerate() {
        let path = dir.join(layer_file_name(k));
        voxfilm::save_image(layer, &path, bit_depth(resolved))?;
        files.push(path);
    }
    log::info!(
        "sliced {} points: {} assigned, {} out of range in z, {} in xy",
        report.total_points,
        report.assigned_total(),
        report.discarded_out_of_range_z,
        report.discarded_out_of_range_xy
    );

    let run = SliceRunReport {
        manifest_sha256: resolved.sha256(),
        combine,
        stack_metrics: stack_metrics(&resolved.stack)?,
        layer_files: file_names(&files),
        slice: &report,
        resolved_manifest: resolved,
    };
    write_json(&resolved.output.directory.join("slice_report.json"), &run)
}

pub fn simulate_views(
    resolved: &ResolvedManifest,
    thetas: &[f64],
    cloud_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut resolved = resolved.clone();
    let layers: Vec<PatternImage> = match cloud_path {
        Some(path) => {
            let cloud = load_point_cloud(path)?;
            let (layers, report) = slice_point_cloud_with(
                &cloud,
                &resolved.stack,
                resolved.grid.nx,
                resolved.grid.ny,
                CombineRule::Max,
            )?;
            log::info!(
                "sliced {} points for rendering ({} assigned)",
                report.total_points,
                report.assigned_total()
            );
            layers
        }
        None => {
            let (patterns, _) = load_design_patterns(&mut resolved)?;
            let vol = design_volume(&DesignInput {
                patterns,
                grid: resolved.grid,
            })?;
            (0..resolved.grid.nz)
                .map(|k| vol.layer_as_pattern(k))
                .collect::<voxfilm::Result<_>>()?
        }
    };

    let dir = resolved.output.directory.join("views");
    ensure_dir(&dir)?;
    for &theta in thetas {
        let img = render_stack_view(&layers, &resolved.stack, &resolved.optics, theta)?;
        let path = dir.join(format!("view_theta_{theta}.png"));
        voxfilm::save_image(&img, &path, bit_depth(&resolved))?;
        log::info!("rendered theta = {theta} deg -> {}", path.display());
    }
    Ok(())
}

pub fn simulate_sweep(resolved: &ResolvedManifest, kind: SweepKind) -> Result<(), CliError> {
    let chart = voxfilm::patterns::rgb_circles(
        resolved.grid.nx,
        resolved.grid.ny,
        resolved.stack.width / resolved.grid.nx as f64,
    );
    let dir = resolved.output.directory.join("sweep");
    ensure_dir(&dir)?;
    let name = match kind {
        SweepKind::Uv => "uv",
        SweepKind::Vis => "vis",
    };
    let mut entries = Vec::new();
    for &n in &SWEEP_COUNTS {
        let (n_uv, n_vis) = match kind {
            SweepKind::Uv => (n, 0),
            SweepKind::Vis => (0, n),
        };
        let img = simulate_sandwich(&chart, n_uv, n_vis, &resolved.optics)?;
        let path = dir.join(format!("sandwich_{name}_{n:02}.png"));
        voxfilm::save_image(&img, &path, bit_depth(resolved))?;
        entries.push(SweepEntry {
            n_uv,
            n_vis,
            mean_brightness: voxfilm::mean_brightness(&img),
            file: path.file_name().unwrap().to_string_lossy().into_owned(),
        });
    }
    let report = BrightnessReport {
        sweep: name,
        film_counts: SWEEP_COUNTS.to_vec(),
        mean_brightness: entries.iter().map(|e| e.mean_brightness).collect(),
        entries,
        optics: &resolved.optics,
    };
    write_json(&dir.join(format!("brightness_{name}.json")), &report)
}

pub fn info(resolved: &ResolvedManifest) -> Result<(), CliError> {
    let m = stack_metrics(&resolved.stack)?;
    let s = &resolved.stack;
    let g = &resolved.grid;
    println!(
        "film stack : {} films, {:.3} mm thick, {:.3} mm gaps, {:.1} x {:.1} mm",
        s.n_films, s.film_thickness, s.gap, s.width, s.height
    );
    println!("layer pitch: {:.3} mm", m.layer_pitch);
    println!("depth res  : {:.2} dpi", m.depth_dpi);
    println!("total depth: {:.3} mm", m.total_depth);
    println!(
        "printer cap: {} x {} dpi (in plane)",
        resolved.printer_dpi[0], resolved.printer_dpi[1]
    );
    println!(
        "grid       : {} x {} x {} voxels, pitch {:.4} x {:.4} x {:.3} mm",
        g.nx, g.ny, g.nz, g.pitch_x, g.pitch_y, g.layer_pitch
    );
    let o = &resolved.optics;
    println!(
        "optics     : t_uv {:.2}, t_vis {:.2}, yields [{:.2}, {:.2}, {:.2}], blur {:.3} mm/film, {:?} UV",
        o.t_uv, o.t_vis, o.quantum_yield[0], o.quantum_yield[1], o.quantum_yield[2],
        o.blur_sigma_per_film, o.uv_sides
    );
    if resolved.patterns.is_empty() {
        println!("patterns   : none");
    }
    for p in &resolved.patterns {
        println!(
            "pattern {}  : {} rot=({}, {}) deg order={:?}",
            p.label,
            p.path.display(),
            p.rotation_x_deg,
            p.rotation_y_deg,
            p.rotation_order
        );
    }
    println!("manifest   : sha256 {}", resolved.sha256());
    Ok(())
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

/// Loads every manifest pattern, fills the resolved pixel pitches in place,
/// and builds the design inputs.
fn load_design_patterns(
    resolved: &mut ResolvedManifest,
) -> Result<(Vec<DesignPattern>, Vec<PatternImage>), CliError> {
    if resolved.patterns.is_empty() {
        return Err(CliError::Validation(
            "the manifest lists no patterns".into(),
        ));
    }
    let mut design = Vec::with_capacity(resolved.patterns.len());
    let mut originals = Vec::with_capacity(resolved.patterns.len());
    for idx in 0..resolved.patterns.len() {
        let entry = resolved.patterns[idx].clone();
        // pitch needs the image width, so load first and fix up after
        let mut image = load_pattern(&entry.path, entry.pixel_pitch_mm.unwrap_or(1.0))?;
        let pitch = resolved.pattern_pitch(&entry, image.width);
        image.pixel_pitch = pitch;
        resolved.patterns[idx].pixel_pitch_mm = Some(pitch);
        let axis = voxfilm::axis_from_rotations_ordered(
            entry.rotation_x_deg,
            entry.rotation_y_deg,
            entry.rotation_order,
        )?
        .with_label(entry.label.clone());
        originals.push(image.clone());
        design.push(DesignPattern { image, axis });
    }
    Ok((design, originals))
}

/// Indices of the requested view labels in manifest order; all patterns
/// when the list is empty.
fn select_views(resolved: &ResolvedManifest, views: &[String]) -> Result<Vec<usize>, CliError> {
    if views.is_empty() {
        return Ok((0..resolved.patterns.len()).collect());
    }
    for v in views {
        if !resolved.patterns.iter().any(|p| &p.label == v) {
            return Err(CliError::Validation(format!("unknown view label '{v}'")));
        }
    }
    Ok(resolved
        .patterns
        .iter()
        .enumerate()
        .filter(|(_, p)| views.contains(&p.label))
        .map(|(i, _)| i)
        .collect())
}

fn bit_depth(resolved: &ResolvedManifest) -> BitDepth {
    match resolved.output.bit_depth {
        16 => BitDepth::Sixteen,
        _ => BitDepth::Eight,
    }
}

fn histogram(vol: &Volume) -> Histogram {
    let mut h = Histogram {
        bins: HISTOGRAM_BINS,
        r: vec![0; HISTOGRAM_BINS],
        g: vec![0; HISTOGRAM_BINS],
        b: vec![0; HISTOGRAM_BINS],
    };
    for v in &vol.values {
        for (c, counts) in [&mut h.r, &mut h.g, &mut h.b].into_iter().enumerate() {
            let bin = ((v[c] * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
    }
    h
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text.as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect()
}
