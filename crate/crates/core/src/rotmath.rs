//! Rotation representations and the geometric kernels used by the fusion
//! pipeline: quaternion algebra, Slerp, swing-twist splitting about world Z,
//! tilt-and-torsion extraction and exact gyro integration.
//!
//! World frame convention: Z points up (opposite gravity). A
//! [`RotationMatrix`] maps sensor-frame vectors into the world frame.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Maximum entry-wise deviation of `RᵀR` from identity accepted as a rotation.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Below this inter-quaternion angle Slerp falls back to normalized lerp.
pub const SLERP_LERP_THRESHOLD: f64 = 1e-6;

const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
}

/// Unit quaternion `w + xi + yj + zk` (Hamilton convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a unit quaternion, renormalizing the input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, RotationError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < DEGENERATE_EPS {
            return Err(RotationError::InvalidRotation(format!(
                "quaternion norm {n} cannot be normalized"
            )));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Rotation of `angle` radians about `axis`. A zero axis yields identity.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < DEGENERATE_EPS {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let u = axis / n;
        Self::normalized_unchecked(c, s * u.x, s * u.y, s * u.z)
    }

    fn normalized_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Sign representative with `w ≥ 0` (first nonzero vector component
    /// positive when `w == 0`).
    pub fn canonical(&self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            self.negated()
        } else {
            *self
        }
    }

    /// Rotation angle (rad, in `[0, π]`) taking `self` onto `other`.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let rel = self.conjugate() * *other;
        let v = (rel.x * rel.x + rel.y * rel.y + rel.z * rel.z).sqrt();
        2.0 * v.atan2(rel.w.abs())
    }

    /// Rotates a vector by this quaternion.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        matrix_from_quat(self).apply(v)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::normalized_unchecked(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

/// Proper orthonormal 3×3 matrix mapping sensor/body vectors to the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`ORTHONORMAL_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, RotationError> {
        let r = Self(m);
        r.check()?;
        Ok(r)
    }

    #[cfg(test)]
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Exponential map of the rotation vector `v` (Rodrigues formula).
    pub fn exp(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Self::identity();
        }
        let k = skew(&(v / angle));
        let s = angle.sin();
        let half = (0.5 * angle).sin();
        let one_minus_cos = 2.0 * half * half;
        Self(Matrix3::identity() + k * s + k * k * one_minus_cos)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < DEGENERATE_EPS {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Minimal rotation taking unit direction `from` onto `to`.
    pub fn between(from: &Vector3<f64>, to: &Vector3<f64>) -> Self {
        let a = from.normalize();
        let b = to.normalize();
        let axis = a.cross(&b);
        let s = axis.norm();
        let c = a.dot(&b);
        if s < DEGENERATE_EPS {
            if c > 0.0 {
                return Self::identity();
            }
            // antiparallel: any perpendicular axis works
            let trial = if a.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            return Self::from_axis_angle(&a.cross(&trial), PI);
        }
        Self::from_axis_angle(&axis, s.atan2(c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `max |RᵀR − I|` entry-wise.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    fn check(&self) -> Result<(), RotationError> {
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(RotationError::InvalidRotation(
                "non-finite matrix entry".into(),
            ));
        }
        let err = self.orthonormality_error();
        let det = self.0.determinant();
        if err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(RotationError::InvalidRotation(format!(
                "not a proper rotation (orthonormality error {err:e}, det {det})"
            )));
        }
        Ok(())
    }

    /// Gram-Schmidt re-orthonormalization of the columns.
    pub fn orthonormalized(&self) -> Self {
        let c0 = self.0.column(0).normalize();
        let c1 = self.0.column(1) - c0 * c0.dot(&self.0.column(1));
        let c1 = c1.normalize();
        let c2 = c0.cross(&c1);
        Self(Matrix3::from_columns(&[c0, c1, c2]))
    }

    /// Rotation vector `log(R)` with angle in `[0, π]`.
    pub fn log(&self) -> Vector3<f64> {
        let q = quat_from_matrix_unchecked(self);
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < DEGENERATE_EPS {
            return v * 2.0;
        }
        v * (2.0 * s.atan2(q.w) / s)
    }

    /// Geodesic distance (rad) between two rotations.
    pub fn angle_to(&self, other: &RotationMatrix) -> f64 {
        (self.transpose() * *other).log().norm()
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Azimuth / tilt / torsion parametrization, recomposed as
/// `R = Rz(azimuth) · Ry(tilt) · Rz(torsion − azimuth)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltTorsion {
    /// Direction of tilt, in `(−π, π]`.
    pub azimuth: f64,
    /// Angle between body Z and world Z, in `[0, π]`.
    pub tilt: f64,
    /// In `(−π, π]`.
    pub torsion: f64,
}

impl TiltTorsion {
    pub fn to_rotation(&self) -> RotationMatrix {
        RotationMatrix::rot_z(self.azimuth)
            * RotationMatrix::rot_y(self.tilt)
            * RotationMatrix::rot_z(self.torsion - self.azimuth)
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn quat_from_matrix_unchecked(r: &RotationMatrix) -> Quaternion {
    let m = &r.0;
    let (m00, m01, m02) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (m10, m11, m12) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (m20, m21, m22) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let trace = m00 + m11 + m22;
    let (w, x, y, z) = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        (0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    } else if m00 > m11 && m00 > m22 {
        let s = (1.0 + m00 - m11 - m22).sqrt() * 2.0;
        ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
    } else if m11 > m22 {
        let s = (1.0 + m11 - m00 - m22).sqrt() * 2.0;
        ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
    } else {
        let s = (1.0 + m22 - m00 - m11).sqrt() * 2.0;
        ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
    };
    Quaternion::normalized_unchecked(w, x, y, z).canonical()
}

/// Converts a rotation matrix to its hemisphere-canonical (`w ≥ 0`) quaternion.
pub fn quat_from_matrix(r: &RotationMatrix) -> Result<Quaternion, RotationError> {
    r.check()?;
    Ok(quat_from_matrix_unchecked(r))
}

pub fn matrix_from_quat(q: &Quaternion) -> RotationMatrix {
    // re-normalize: the public constructors keep |q| = 1 but products drift
    let q = Quaternion::normalized_unchecked(q.w, q.x, q.y, q.z);
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    RotationMatrix(Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    ))
}

/// Spherical linear interpolation along the shortest arc; `t` is clamped to `[0, 1]`.
pub fn slerp(q0: &Quaternion, q1: &Quaternion, t: f64) -> Quaternion {
    let t = t.clamp(0.0, 1.0);
    let mut target = *q1;
    let mut d = q0.dot(q1);
    if d < 0.0 {
        target = target.negated();
        d = -d;
    }
    // half-angle between the two, computed from the chord for accuracy
    let perp = [
        target.w - d * q0.w,
        target.x - d * q0.x,
        target.y - d * q0.y,
        target.z - d * q0.z,
    ];
    let sin_half = perp.iter().map(|v| v * v).sum::<f64>().sqrt();
    let half = sin_half.atan2(d);

    if 2.0 * half < SLERP_LERP_THRESHOLD {
        return Quaternion::normalized_unchecked(
            q0.w + t * (target.w - q0.w),
            q0.x + t * (target.x - q0.x),
            q0.y + t * (target.y - q0.y),
            q0.z + t * (target.z - q0.z),
        );
    }
    let s = half.sin();
    let a = ((1.0 - t) * half).sin() / s;
    let b = (t * half).sin() / s;
    Quaternion::normalized_unchecked(
        a * q0.w + b * target.w,
        a * q0.x + b * target.x,
        a * q0.y + b * target.y,
        a * q0.z + b * target.z,
    )
}

/// Splits `R = Rz · Rxy` where `Rz` is a pure rotation about world Z and
/// `Rxy` carries no twist about world Z.
///
/// When the twist is undefined (a half-turn about a horizontal axis) the
/// whole rotation is assigned to `Rxy` and `Rz = I`.
pub fn decompose_z_xy(r: &RotationMatrix) -> (RotationMatrix, RotationMatrix) {
    let q = quat_from_matrix_unchecked(r);
    let n = q.w.hypot(q.z);
    if n < DEGENERATE_EPS {
        return (RotationMatrix::identity(), *r);
    }
    let (c, s) = (q.w / n, q.z / n);
    // twist quaternion (c, 0, 0, s) is a rotation of 2·atan2(s, c) about Z
    let cos_t = c * c - s * s;
    let sin_t = 2.0 * c * s;
    let rz = RotationMatrix(Matrix3::new(
        cos_t, -sin_t, 0.0, sin_t, cos_t, 0.0, 0.0, 0.0, 1.0,
    ));
    let rxy = rz.transpose() * *r;
    (rz, rxy)
}

/// Segment elevation: the angle between the current world image of the
/// calibrated vertical axis `v0` and world vertical, `acos((R·v0)·ẑ)`.
///
/// `v0` is the sensor-frame axis that pointed straight up in the calibration
/// pose, so this is also the angle between the segment's current long axis
/// and its hanging direction.
pub fn elevation_from_rotation(r: &RotationMatrix, v0: &Vector3<f64>) -> f64 {
    let up = r.apply(v0);
    up.z.clamp(-1.0, 1.0).acos()
}

pub fn tilt_torsion_from_rotation(r: &RotationMatrix) -> TiltTorsion {
    let m = &r.0;
    let s = m[(0, 2)].hypot(m[(1, 2)]);
    let tilt = s.atan2(m[(2, 2)]);
    let azimuth = if s < DEGENERATE_EPS {
        0.0
    } else {
        wrap_angle(m[(1, 2)].atan2(m[(0, 2)]))
    };
    let residual =
        RotationMatrix::rot_y(tilt).transpose() * RotationMatrix::rot_z(azimuth).transpose() * *r;
    let psi = residual.0[(1, 0)].atan2(residual.0[(0, 0)]);
    TiltTorsion {
        azimuth,
        tilt,
        torsion: wrap_angle(azimuth + psi),
    }
}

/// Advances `r_prev` by the body-frame angular velocity `omega` held for `dt`
/// seconds, using the exact exponential map.
pub fn integrate_gyro(r_prev: &RotationMatrix, omega: &Vector3<f64>, dt: f64) -> RotationMatrix {
    if omega.norm() == 0.0 {
        return *r_prev;
    }
    *r_prev * RotationMatrix::exp(&(omega * dt))
}
