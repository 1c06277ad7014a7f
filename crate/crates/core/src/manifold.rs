//! Exponential and logarithm maps of the unit dual quaternions, and the
//! `⊞`/`⊟` pair used by the optimizer.
//!
//! The tangent vector is ordered `[omega; nu]`: rotation first, then
//! translation. `Exp(omega, nu)` rotates by `‖omega‖` about `omega` and then
//! translates by `nu`; `nu` is the rigid translation, not a screw moment.
//! Increments are applied on the LEFT: `q ⊞ v = Exp(v) ⊠ q`, and the
//! difference is the matching left difference `q₂ ⊟ q₁ = Log(q₂ ⊠ q₁^{2*})`,
//! so that `(q ⊞ v) ⊟ q = v`.

use std::ops::{Add, Mul, Neg};

use nalgebra::Vector6;

use crate::dq::{DqError, Quaternion, RigidTransform, UnitDualQuaternion, Vec3};

/// Below this rotation angle the trigonometric ratios switch to their
/// fourth-order Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// `Log` refuses rotation angles this close to π.
pub const LOG_PI_MARGIN: f64 = 1e-6;

/// Side of the increment in the retraction. Jacobian columns are
/// perturbations on this side.
pub const INCREMENT_SIDE: IncrementSide = IncrementSide::Left;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementSide {
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangentVector {
    /// Rotation vector in radians.
    pub omega: Vec3,
    /// Translational part in meters.
    pub nu: Vec3,
}

impl TangentVector {
    pub const ZERO: TangentVector = TangentVector {
        omega: Vec3::new(0.0, 0.0, 0.0),
        nu: Vec3::new(0.0, 0.0, 0.0),
    };

    pub fn new(omega: Vec3, nu: Vec3) -> Self {
        Self { omega, nu }
    }

    /// Unit vector along tangent axis `j` in `[omega; nu]` order, scaled by `h`.
    pub fn basis(j: usize, h: f64) -> Self {
        let mut a = [0.0; 6];
        a[j] = h;
        Self::from_array(a)
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            omega: Vec3::new(a[0], a[1], a[2]),
            nu: Vec3::new(a[3], a[4], a[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.nu.x,
            self.nu.y,
            self.nu.z,
        ]
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.to_array())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::from_array([v[0], v[1], v[2], v[3], v[4], v[5]])
    }

    pub fn norm(&self) -> f64 {
        (self.omega.norm_squared() + self.nu.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

impl Add for TangentVector {
    type Output = TangentVector;

    fn add(self, b: TangentVector) -> TangentVector {
        TangentVector::new(self.omega + b.omega, self.nu + b.nu)
    }
}

impl Mul<f64> for TangentVector {
    type Output = TangentVector;

    fn mul(self, s: f64) -> TangentVector {
        TangentVector::new(self.omega * s, self.nu * s)
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;

    fn neg(self) -> TangentVector {
        self * -1.0
    }
}

/// `sin(θ/2)/θ`.
fn half_sinc(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        0.5 - t2 / 48.0 + t2 * t2 / 3840.0
    } else {
        (0.5 * theta).sin() / theta
    }
}

pub fn dq_exp(v: &TangentVector) -> UnitDualQuaternion {
    let theta = v.omega.norm();
    let r = v.omega * half_sinc(theta);
    let rotation = Quaternion::new((0.5 * theta).cos(), r.x, r.y, r.z);
    UnitDualQuaternion::from_rigid(&RigidTransform::new(rotation, v.nu))
}

pub fn dq_log(q: &UnitDualQuaternion) -> Result<TangentVector, DqError> {
    let q = q.canonical();
    let p = q.primary();
    let s = p.vector().norm();
    let theta = 2.0 * s.atan2(p.w);
    if std::f64::consts::PI - theta < LOG_PI_MARGIN {
        return Err(DqError::AmbiguousLog { angle: theta });
    }
    // theta / sin(theta/2)
    let scale = if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        2.0 + t2 / 12.0 + 7.0 * t2 * t2 / 2880.0
    } else {
        theta / s
    };
    Ok(TangentVector {
        omega: p.vector() * scale,
        nu: q.translation(),
    })
}

/// `q ⊞ v = Exp(v) ⊠ q`, re-projected onto the unit set.
pub fn boxplus(q: &UnitDualQuaternion, v: &TangentVector) -> UnitDualQuaternion {
    let raw = dq_exp(v) * *q;
    UnitDualQuaternion::normalize(raw.as_dq())
        .expect("product of unit dual quaternions has a unit primary part")
        .canonical()
}

/// `q₂ ⊟ q₁ = Log(q₂ ⊠ q₁^{2*})`.
pub fn boxminus(
    q2: &UnitDualQuaternion,
    q1: &UnitDualQuaternion,
) -> Result<TangentVector, DqError> {
    dq_log(&(*q2 * q1.inverse()))
}
