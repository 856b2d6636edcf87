//! WGS84 coordinate conversions and 3-2-1 Euler attitude math.
//!
//! Angles are radians internally. Geodetic positions carry degrees because
//! every file format in this toolkit does; conversion happens once at the
//! edge.
//!
//! Local frames are North-East-Down. The down axis points along the inward
//! ellipsoid normal at the anchor, so a point above the anchor has a negative
//! `down` component.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// WGS84 semi-major axis (meters).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS84 semi-minor axis (meters).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);
/// WGS84 first eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

const MIN_ALTITUDE_M: f64 = -1_000.0;
const MAX_ALTITUDE_M: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid attitude: {0}")]
    InvalidAttitude(String),
}

/// Geodetic position on the WGS84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    /// Geodetic latitude in degrees, [-90, 90].
    pub latitude: f64,
    /// Longitude in degrees, [-180, 180).
    pub longitude: f64,
    /// Height above the ellipsoid in meters.
    pub altitude: f64,
}

impl GeodeticPosition {
    /// Builds a validated position. Longitude 180 is folded onto -180.
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self, GeodesyError> {
        let longitude = if longitude == 180.0 { -180.0 } else { longitude };
        let p = Self {
            latitude,
            longitude,
            altitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeodesyError> {
        if !(self.latitude.is_finite() && self.longitude.is_finite() && self.altitude.is_finite()) {
            return Err(GeodesyError::InvalidCoordinate(format!(
                "non-finite component in ({}, {}, {})",
                self.latitude, self.longitude, self.altitude
            )));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(GeodesyError::InvalidCoordinate(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !(-180.0..180.0).contains(&self.longitude) {
            return Err(GeodesyError::InvalidCoordinate(format!(
                "longitude {} outside [-180, 180)",
                self.longitude
            )));
        }
        if !(MIN_ALTITUDE_M..=MAX_ALTITUDE_M).contains(&self.altitude) {
            return Err(GeodesyError::InvalidCoordinate(format!(
                "altitude {} m outside [{MIN_ALTITUDE_M}, {MAX_ALTITUDE_M}]",
                self.altitude
            )));
        }
        Ok(())
    }
}

/// Earth-centered Earth-fixed position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ecef {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Ecef {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A vector in a local North-East-Down frame, meters.
///
/// The same type carries body-frame vectors (forward, right, down) where the
/// alignment solver needs them; the field names then read as x/y/z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalVector {
    pub north: f64,
    pub east: f64,
    pub down: f64,
}

impl LocalVector {
    pub const ZERO: Self = Self {
        north: 0.0,
        east: 0.0,
        down: 0.0,
    };

    pub fn new(north: f64, east: f64, down: f64) -> Self {
        Self { north, east, down }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.north, self.east, self.down)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.north, self.east, self.down]
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.north.is_finite() && self.east.is_finite() && self.down.is_finite()
    }
}

/// Yaw/pitch/roll of a 3-2-1 sequence relative to NED, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAttitude {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAttitude {
    /// Validated constructor; yaw and roll must already lie in [-π, π).
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Result<Self, GeodesyError> {
        let a = Self { yaw, pitch, roll };
        a.validate()?;
        Ok(a)
    }

    /// Wraps yaw and roll into [-π, π) before validating pitch.
    pub fn wrapped(yaw: f64, pitch: f64, roll: f64) -> Result<Self, GeodesyError> {
        Self::new(wrap_angle(yaw), pitch, wrap_angle(roll))
    }

    pub fn validate(&self) -> Result<(), GeodesyError> {
        if !(self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()) {
            return Err(GeodesyError::InvalidAttitude("non-finite angle".into()));
        }
        if !(-PI..PI).contains(&self.yaw) {
            return Err(GeodesyError::InvalidAttitude(format!(
                "yaw {} outside [-pi, pi)",
                self.yaw
            )));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&self.pitch) {
            return Err(GeodesyError::InvalidAttitude(format!(
                "pitch {} outside [-pi/2, pi/2]",
                self.pitch
            )));
        }
        if !(-PI..PI).contains(&self.roll) {
            return Err(GeodesyError::InvalidAttitude(format!(
                "roll {} outside [-pi, pi)",
                self.roll
            )));
        }
        Ok(())
    }
}

/// Wraps an angle in radians into [-π, π).
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Wraps an angle in degrees into [-180, 180).
pub fn wrap_degrees(a: f64) -> f64 {
    if (-180.0..180.0).contains(&a) {
        return a;
    }
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// A 3×3 matrix that is usually, but not necessarily, a proper rotation.
/// Serializes as an array of rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix3(pub Matrix3<f64>);

impl From<[[f64; 3]; 3]> for RotationMatrix3 {
    fn from(rows: [[f64; 3]; 3]) -> Self {
        Self::from_rows(rows)
    }
}

impl From<RotationMatrix3> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix3) -> Self {
        r.rows()
    }
}

impl RotationMatrix3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Row-major entries R11, R12, ..., R33.
    pub fn to_row_major(&self) -> [f64; 9] {
        let r = self.rows();
        [
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        ]
    }

    pub fn from_row_major(v: &[f64]) -> Self {
        assert_eq!(v.len(), 9, "row-major rotation needs nine entries");
        Self(Matrix3::from_row_slice(v))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Largest entry of |RᵀR − I|.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.determinant() - 1.0).abs() <= tol
    }
}

// Elemental rotations of the 3-2-1 sequence.

pub fn rotation_about_x(roll: f64) -> Matrix3<f64> {
    let (s, c) = roll.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_about_y(pitch: f64) -> Matrix3<f64> {
    let (s, c) = pitch.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_about_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-NED rotation `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn euler_to_rotation(a: &EulerAttitude) -> RotationMatrix3 {
    RotationMatrix3(rotation_about_z(a.yaw) * rotation_about_y(a.pitch) * rotation_about_x(a.roll))
}

pub fn apply_rotation(r: &RotationMatrix3, v: &LocalVector) -> LocalVector {
    LocalVector::from_vector(r.0 * v.to_vector())
}

pub fn transpose_apply(r: &RotationMatrix3, v: &LocalVector) -> LocalVector {
    LocalVector::from_vector(r.0.tr_mul(&v.to_vector()))
}

pub fn geodetic_to_ecef(p: &GeodeticPosition) -> Result<Ecef, GeodesyError> {
    p.validate()?;
    Ok(geodetic_to_ecef_unchecked(p))
}

pub(crate) fn geodetic_to_ecef_unchecked(p: &GeodeticPosition) -> Ecef {
    let (sin_lat, cos_lat) = p.latitude.to_radians().sin_cos();
    let (sin_lon, cos_lon) = p.longitude.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    Ecef::new(
        (n + p.altitude) * cos_lat * cos_lon,
        (n + p.altitude) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + p.altitude) * sin_lat,
    )
}

/// Inverse WGS84 conversion by fixed-point iteration on latitude.
///
/// Converges to machine precision within a handful of iterations for points
/// near the Earth's surface. The result is not range-checked, so callers can
/// convert intermediate points of any height.
pub fn ecef_to_geodetic(p: &Ecef) -> Result<GeodeticPosition, GeodesyError> {
    if !p.is_finite() {
        return Err(GeodesyError::InvalidCoordinate(format!("non-finite ECEF {p:?}")));
    }
    let rho = p.x.hypot(p.y);
    let lon = p.y.atan2(p.x);
    if rho < 1e-9 {
        let lat = if p.z >= 0.0 { 90.0 } else { -90.0 };
        return Ok(GeodeticPosition {
            latitude: lat,
            longitude: 0.0,
            altitude: p.z.abs() - WGS84_B,
        });
    }
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    for _ in 0..16 {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
        let next = (p.z + WGS84_E2 * n * s).atan2(rho);
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    let (s, c) = lat.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
    // Pick the better-conditioned height formula for the latitude band.
    let h = if c.abs() > 0.7 {
        rho / c - n
    } else {
        p.z / s - n * (1.0 - WGS84_E2)
    };
    let mut lon_deg = lon.to_degrees();
    if lon_deg >= 180.0 {
        lon_deg -= 360.0;
    }
    Ok(GeodeticPosition {
        latitude: lat.to_degrees(),
        longitude: lon_deg,
        altitude: h,
    })
}

/// Rotation taking ECEF difference vectors into NED at `anchor`.
pub fn ecef_to_ned_rotation(anchor: &GeodeticPosition) -> Matrix3<f64> {
    let (sl, cl) = anchor.latitude.to_radians().sin_cos();
    let (so, co) = anchor.longitude.to_radians().sin_cos();
    Matrix3::new(
        -sl * co, -sl * so, cl, //
        -so, co, 0.0, //
        -cl * co, -cl * so, -sl,
    )
}

pub fn ecef_to_ned(p: &Ecef, anchor: &GeodeticPosition) -> Result<LocalVector, GeodesyError> {
    if !p.is_finite() {
        return Err(GeodesyError::InvalidCoordinate(format!("non-finite ECEF {p:?}")));
    }
    let frame = LocalFrame::new(*anchor)?;
    Ok(frame.to_local(p))
}

/// A NED tangent frame with its rotation and origin precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    anchor: GeodeticPosition,
    origin: Ecef,
    rotation: Matrix3<f64>,
}

impl LocalFrame {
    pub fn new(anchor: GeodeticPosition) -> Result<Self, GeodesyError> {
        let origin = geodetic_to_ecef(&anchor)?;
        Ok(Self {
            anchor,
            origin,
            rotation: ecef_to_ned_rotation(&anchor),
        })
    }

    pub fn anchor(&self) -> &GeodeticPosition {
        &self.anchor
    }

    pub fn to_local(&self, p: &Ecef) -> LocalVector {
        if *p == self.origin {
            return LocalVector::ZERO;
        }
        LocalVector::from_vector(self.rotation * (p.to_vector() - self.origin.to_vector()))
    }

    pub fn to_ecef(&self, v: &LocalVector) -> Ecef {
        Ecef::from_vector(self.origin.to_vector() + self.rotation.tr_mul(&v.to_vector()))
    }

    pub fn geodetic_to_local(&self, p: &GeodeticPosition) -> Result<LocalVector, GeodesyError> {
        Ok(self.to_local(&geodetic_to_ecef(p)?))
    }

    pub fn local_to_geodetic(&self, v: &LocalVector) -> Result<GeodeticPosition, GeodesyError> {
        ecef_to_geodetic(&self.to_ecef(v))
    }
}
