//! Direction-of-arrival types and conversions.
//!
//! Frame convention: x points to the front, y to the left, z up. Azimuth grows
//! counter-clockwise seen from above, so 90 degrees is the left axis.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Azimuth/elevation pair in degrees.
///
/// Azimuth is stored in `[-180, 180)`; an input of `180` is the same direction
/// as `-180` and is stored as the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spherical<T> {
    azimuth_deg: T,
    elevation_deg: T,
}

/// Unit direction vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cartesian<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Spherical<T> {
    pub fn new(azimuth_deg: T, elevation_deg: T) -> Result<Self> {
        let half_turn = T::lit(180.0);
        let quarter_turn = T::lit(90.0);
        if !azimuth_deg.is_finite() || azimuth_deg < -half_turn || azimuth_deg > half_turn {
            return Err(Error::OutOfRange {
                what: "azimuth",
                value: azimuth_deg.as_f64(),
            });
        }
        if !elevation_deg.is_finite()
            || elevation_deg < -quarter_turn
            || elevation_deg > quarter_turn
        {
            return Err(Error::OutOfRange {
                what: "elevation",
                value: elevation_deg.as_f64(),
            });
        }
        let azimuth_deg = if azimuth_deg == half_turn {
            -half_turn
        } else {
            azimuth_deg
        };
        Ok(Self {
            azimuth_deg,
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> T {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> T {
        self.elevation_deg
    }

    pub fn to_cartesian(&self) -> Cartesian<T> {
        let azi = self.azimuth_deg.to_radians();
        let ele = self.elevation_deg.to_radians();
        Cartesian {
            x: ele.cos() * azi.cos(),
            y: ele.cos() * azi.sin(),
            z: ele.sin(),
        }
    }

    /// True when both angles are whole degrees.
    pub fn is_integral(&self) -> bool {
        self.azimuth_deg.fract() == T::zero() && self.elevation_deg.fract() == T::zero()
    }

    /// Rounds both angles to whole degrees (half away from zero).
    pub fn rounded(&self) -> Self {
        Self::new(self.azimuth_deg.round(), self.elevation_deg.round())
            .expect("rounding keeps angles inside their closed ranges")
    }
}

impl<T: Scalar> Cartesian<T> {
    /// Builds a unit vector by normalizing `(x, y, z)`.
    pub fn new(x: T, y: T, z: T) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm <= T::min_positive_value() {
            return Err(Error::DegenerateDirection);
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Wraps components that the caller already knows to be unit-norm.
    pub fn new_unchecked(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn front() -> Self {
        Self::new_unchecked(T::one(), T::zero(), T::zero())
    }

    pub fn left() -> Self {
        Self::new_unchecked(T::zero(), T::one(), T::zero())
    }

    pub fn up() -> Self {
        Self::new_unchecked(T::zero(), T::zero(), T::one())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> [T; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    /// Azimuth/elevation of this direction. Azimuth is 0 at the poles.
    pub fn to_spherical(&self) -> Result<Spherical<T>> {
        let unit = Self::new(self.x, self.y, self.z)?;
        let horizontal = unit.x.hypot(unit.y);
        let elevation = unit.z.atan2(horizontal).to_degrees();
        let pole_tolerance = T::epsilon() * T::lit(4.0);
        let mut azimuth = if horizontal <= pole_tolerance {
            T::zero()
        } else {
            unit.y.atan2(unit.x).to_degrees()
        };
        if azimuth >= T::lit(180.0) {
            azimuth -= T::lit(360.0);
        }
        let elevation = elevation.max(T::lit(-90.0)).min(T::lit(90.0));
        Spherical::new(azimuth.max(T::lit(-180.0)), elevation)
    }

    /// Rotates by `angle_rad` about the unit `axis` (right-hand rule).
    pub fn rotated_about(&self, axis: &Self, angle_rad: T) -> Self {
        let (sin, cos) = angle_rad.sin_cos();
        let k_cross_v = axis.cross(self);
        let k_dot_v = axis.dot(self);
        let v = self.to_array();
        let k = axis.to_array();
        let mut out = [T::zero(); 3];
        for i in 0..3 {
            out[i] = v[i] * cos + k_cross_v[i] * sin + k[i] * k_dot_v * (T::one() - cos);
        }
        Self::new(out[0], out[1], out[2]).unwrap_or(*self)
    }

    /// Any unit vector orthogonal to this one, chosen deterministically.
    pub fn orthogonal(&self) -> Self {
        let helper = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Self::front()
        } else if self.y.abs() <= self.z.abs() {
            Self::left()
        } else {
            Self::up()
        };
        let c = self.cross(&helper);
        Self::new(c[0], c[1], c[2]).expect("helper axis is never parallel")
    }
}

/// Great-circle angle between two unit directions, in degrees within `[0, 180]`.
///
/// Evaluated as `atan2(|a × b|, a · b)`, which equals `acos(a · b)` for unit
/// vectors but stays exact for identical inputs and never sees an argument
/// outside the domain.
pub fn angular_distance<T: Scalar>(a: &Cartesian<T>, b: &Cartesian<T>) -> T {
    let c = a.cross(b);
    let sine = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    sine.atan2(a.dot(b)).to_degrees()
}
