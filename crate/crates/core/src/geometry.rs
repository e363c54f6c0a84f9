//! Projection-axis construction and point-to-plane mapping.
//!
//! Every pattern is attached to a `ProjectionAxis`: a unit viewing direction
//! plus an orthonormal `(u, v)` basis spanning the pattern plane. The plane
//! passes through the world origin, which is also the volume centre, so a
//! 3D point maps to plane coordinates by plain dot products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-length and orthogonality invariants of a basis.
pub const BASIS_TOL: f64 = 1e-12;

/// When |up . direction| exceeds this, the up vector is unusable and the
/// basis construction falls back to the +X axis.
const UP_DEGENERATE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::ZeroDirection);
        }
        Ok(Vec3::new(self.x / n, self.y / n, self.z / n))
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Row-major 3x3 matrix, only what the rotation construction needs.
#[derive(Debug, Clone, Copy)]
struct Mat3([[f64; 3]; 3]);

impl Mat3 {
    fn rot_x(rad: f64) -> Mat3 {
        let (s, c) = rad.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    fn rot_y(rad: f64) -> Mat3 {
        let (s, c) = rad.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    fn apply(self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y + self.0[0][2] * v.z,
            self.0[1][0] * v.x + self.0[1][1] * v.y + self.0[1][2] * v.z,
            self.0[2][0] * v.x + self.0[2][1] * v.y + self.0[2][2] * v.z,
        )
    }
}

/// Order in which the two rotations are applied to the +Z axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RotationOrder {
    /// direction = R_y(rot_y) . R_x(rot_x) . z
    #[default]
    #[serde(rename = "yx")]
    YThenX,
    /// direction = R_x(rot_x) . R_y(rot_y) . z
    #[serde(rename = "xy")]
    XThenY,
}

/// A unit viewing direction with the orthonormal basis of its pattern plane.
///
/// `(u_basis, v_basis, direction)` is right-handed; `v_basis` is the
/// projection of global +Y onto the plane (falling back to +X when the
/// direction is nearly vertical), so `v` tracks "up" whenever that is
/// meaningful.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionAxis {
    pub direction: Vec3,
    pub u_basis: Vec3,
    pub v_basis: Vec3,
    pub label: String,
}

impl ProjectionAxis {
    pub fn from_direction(direction: Vec3, label: impl Into<String>) -> Result<ProjectionAxis> {
        let direction = direction.normalized()?;
        let (u_basis, v_basis) = plane_basis(direction)?;
        Ok(ProjectionAxis {
            direction,
            u_basis,
            v_basis,
            label: label.into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Builds the axis whose direction is the +Z axis rotated by `rot_x_deg`
/// about X and `rot_y_deg` about Y, in the order given by `order`.
///
/// Angles must lie strictly inside (-90, 90) degrees; a grazing axis never
/// crosses the film stack usefully.
pub fn axis_from_rotations_ordered(
    rot_x_deg: f64,
    rot_y_deg: f64,
    order: RotationOrder,
) -> Result<ProjectionAxis> {
    for a in [rot_x_deg, rot_y_deg] {
        if !a.is_finite() || a.abs() >= 90.0 {
            return Err(Error::AngleOutOfRange(a));
        }
    }
    let rx = Mat3::rot_x(rot_x_deg.to_radians());
    let ry = Mat3::rot_y(rot_y_deg.to_radians());
    let m = match order {
        RotationOrder::YThenX => ry.mul(rx),
        RotationOrder::XThenY => rx.mul(ry),
    };
    let direction = m.apply(Vec3::new(0.0, 0.0, 1.0));
    ProjectionAxis::from_direction(direction, String::new())
}

/// `axis_from_rotations_ordered` with the default Y-then-X order.
pub fn axis_from_rotations(rot_x_deg: f64, rot_y_deg: f64) -> Result<ProjectionAxis> {
    axis_from_rotations_ordered(rot_x_deg, rot_y_deg, RotationOrder::default())
}

/// Deterministic orthonormal plane basis for a unit direction.
///
/// `v = normalize(Y - (Y.d) d)` with global up `Y = (0,1,0)`; when the
/// direction is within ~2.5 degrees of vertical the up vector degenerates
/// and `X = (1,0,0)` is used instead. `u = v x d` closes the right-handed
/// triple.
pub fn plane_basis(direction: Vec3) -> Result<(Vec3, Vec3)> {
    let d = direction;
    if d.norm() < 1e-300 {
        return Err(Error::ZeroDirection);
    }
    let up = Vec3::new(0.0, 1.0, 0.0);
    let reference = if up.dot(d).abs() > UP_DEGENERATE {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        up
    };
    let v_basis = (reference - d.scale(reference.dot(d))).normalized()?;
    let u_basis = v_basis.cross(d);
    Ok((u_basis, v_basis))
}

/// Maps a 3D point to the pattern-plane coordinates of `axis`.
///
/// The plane origin is the volume centre (the world origin), so the result
/// is independent of any displacement of `p` along the axis direction.
pub fn project_point_to_plane(p: Vec3, axis: &ProjectionAxis) -> (f64, f64) {
    (p.dot(axis.u_basis), p.dot(axis.v_basis))
}
