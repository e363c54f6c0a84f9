//! Design and simulation of voxel volumes that project multiple
//! full-colour 2D patterns in different directions, realized as a stack of
//! printed transparent films.
//!
//! The pipeline:
//!
//! 1. [`geometry`] builds projection axes and maps voxels to pattern
//!    planes.
//! 2. [`design`] computes the voxel grid whose every channel is the
//!    product of all pattern samples along the voxel's perpendiculars,
//!    and slices it into printable per-film layer images.
//! 3. [`projection`] simulates what each viewpoint sees by summing voxel
//!    values along rays and quantifies crosstalk between views.
//! 4. [`slicer`] turns coloured point clouds into per-film cross-sections
//!    for plain 3D content.
//! 5. [`optics`] models the physical stack: UV excitation attenuation,
//!    quantum-yield-weighted emission, visible-path attenuation and blur.
//! 6. [`stack`] holds the film-stack geometry and derived metrics such as
//!    the depth resolution in dpi.

// RGB channels are addressed as `for c in 0..3` throughout; an iterator
// over zipped triples reads worse.
#![allow(clippy::needless_range_loop)]

pub mod design;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod optics;
pub mod patterns;
pub mod projection;
pub mod slicer;
pub mod stack;

pub use design::{design_volume, emit_layers, DesignInput, DesignPattern, GridSpec, Volume};
pub use error::{Error, Result};
pub use geometry::{
    axis_from_rotations, axis_from_rotations_ordered, plane_basis, project_point_to_plane,
    ProjectionAxis, RotationOrder, Vec3,
};
pub use imaging::{
    load_pattern, load_point_cloud, save_image, BitDepth, CloudPoint, FloatImage, PatternImage,
    PointCloud,
};
pub use optics::{
    layer_excitation_profile, mean_brightness, render_stack_view, simulate_sandwich,
    uv_excitation_factor, visible_attenuation_factor, OpticalModel, UvSides,
};
pub use projection::{
    crosstalk_report, normalize_projection, project_volume, CrosstalkReport, NormalizeMode,
    NormalizedProjection, ProjectedPattern,
};
pub use slicer::{assign_film, slice_point_cloud, slice_point_cloud_with, CombineRule, SliceReport};
pub use stack::{stack_metrics, FilmStackSpec, StackMetrics};
