//! Quaternion and dual-quaternion algebra.
//!
//! Conventions, fixed for the whole crate:
//!
//! * components are stored `(w, x, y, z)` with `w` the real part;
//! * multiplication is the Hamilton product, `i² = j² = k² = ijk = −1`;
//! * a rigid motion with rotation `r` and translation `t` is the unit dual
//!   quaternion `r + ε ½ t ⊗ r`;
//! * constructors of unit quantities canonicalize the sign so that the real
//!   part of the rotation is non-negative. `q` and `−q` encode the same motion
//!   and comparisons go through [`UnitDualQuaternion::distance_mod_sign`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance used by the unit-norm invariants.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DqError {
    #[error("expected a pure quaternion, real part is {0}")]
    NotPure(f64),
    #[error("cannot normalize a quaternion with norm {0}")]
    ZeroNorm(f64),
    #[error("not a unit dual quaternion (norm error {norm_error:e}, orthogonality error {orthogonality_error:e})")]
    NotUnit {
        norm_error: f64,
        orthogonality_error: f64,
    },
    #[error("rotation angle {angle} rad is too close to pi, the logarithm axis is ambiguous")]
    AmbiguousLog { angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Embeds a 3-vector as a pure quaternion (`w == 0` exactly).
    pub fn pure(v: &Vec3) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    /// Unit quaternion for a rotation of `angle` radians about `axis`.
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis * (s / n);
        Self::new(c, a.x, a.y, a.z)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_pure(&self) -> bool {
        self.w == 0.0
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Result<Self, DqError> {
        let n = self.norm();
        if !(n > f64::MIN_POSITIVE) || !n.is_finite() {
            return Err(DqError::ZeroNorm(n));
        }
        Ok(*self * (1.0 / n))
    }

    /// Flips the sign so that `w >= 0`.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            -*self
        } else {
            *self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotates a vector by this (assumed unit) quaternion, `q ⊗ v ⊗ q*`.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        (*self * Self::pure(v) * self.conjugate()).vector()
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Unit quaternion from a proper rotation matrix (Shepperd's method),
    /// canonicalized to `w >= 0`.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        let n = q.norm();
        (q * (1.0 / n)).canonical()
    }
}

/// Quaternion cross product `(a ⊗ b − b ⊗ a) / 2`, defined on pure quaternions.
pub fn quat_cross(a: &Quaternion, b: &Quaternion) -> Result<Quaternion, DqError> {
    if !a.is_pure() {
        return Err(DqError::NotPure(a.w));
    }
    if !b.is_pure() {
        return Err(DqError::NotPure(b.w));
    }
    let c = (*a * *b - *b * *a) * 0.5;
    // the real parts cancel analytically; force the exact zero
    Ok(Quaternion::new(0.0, c.x, c.y, c.z))
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion::new(self.w + b.w, self.x + b.x, self.y + b.y, self.z + b.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;

    fn sub(self, b: Quaternion) -> Quaternion {
        Quaternion::new(self.w - b.w, self.x - b.x, self.y - b.y, self.z - b.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

/// Which of the three dual-quaternion conjugates to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugate {
    /// `p − ε d`
    Dual,
    /// `p* + ε d*`; the inverse of a unit dual quaternion.
    Full,
    /// `p* − ε d*`; used on the right of the point sandwich.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualQuaternion {
    pub primary: Quaternion,
    pub dual: Quaternion,
}

impl DualQuaternion {
    pub const IDENTITY: DualQuaternion = DualQuaternion::new(Quaternion::IDENTITY, Quaternion::ZERO);

    pub const fn new(primary: Quaternion, dual: Quaternion) -> Self {
        Self { primary, dual }
    }

    /// Point embedding `1 + ε p̃` used by the transform sandwich.
    pub fn from_point(p: &Vec3) -> Self {
        Self::new(Quaternion::IDENTITY, Quaternion::pure(p))
    }

    pub fn to_array(&self) -> [f64; 8] {
        let p = self.primary;
        let d = self.dual;
        [p.w, p.x, p.y, p.z, d.w, d.x, d.y, d.z]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self::new(
            Quaternion::new(a[0], a[1], a[2], a[3]),
            Quaternion::new(a[4], a[5], a[6], a[7]),
        )
    }

    pub fn conjugate(&self, kind: Conjugate) -> Self {
        match kind {
            Conjugate::Dual => Self::new(self.primary, -self.dual),
            Conjugate::Full => Self::new(self.primary.conjugate(), self.dual.conjugate()),
            Conjugate::Real => Self::new(self.primary.conjugate(), -self.dual.conjugate()),
        }
    }

    /// `|‖primary‖ − 1|` and `|⟨primary, dual⟩|`.
    pub fn unit_errors(&self) -> (f64, f64) {
        (
            (self.primary.norm() - 1.0).abs(),
            self.primary.dot(&self.dual).abs(),
        )
    }

    pub fn is_unit(&self, tolerance: f64) -> bool {
        let (n, o) = self.unit_errors();
        n <= tolerance && o <= tolerance
    }

    pub fn is_finite(&self) -> bool {
        self.primary.is_finite() && self.dual.is_finite()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Mul for DualQuaternion {
    type Output = DualQuaternion;

    /// `(p₁ + ε d₁)(p₂ + ε d₂) = p₁p₂ + ε (p₁d₂ + d₁p₂)`.
    fn mul(self, b: DualQuaternion) -> DualQuaternion {
        DualQuaternion::new(
            self.primary * b.primary,
            self.primary * b.dual + self.dual * b.primary,
        )
    }
}

impl Mul<f64> for DualQuaternion {
    type Output = DualQuaternion;

    fn mul(self, s: f64) -> DualQuaternion {
        DualQuaternion::new(self.primary * s, self.dual * s)
    }
}

impl Add for DualQuaternion {
    type Output = DualQuaternion;

    fn add(self, b: DualQuaternion) -> DualQuaternion {
        DualQuaternion::new(self.primary + b.primary, self.dual + b.dual)
    }
}

impl Sub for DualQuaternion {
    type Output = DualQuaternion;

    fn sub(self, b: DualQuaternion) -> DualQuaternion {
        DualQuaternion::new(self.primary - b.primary, self.dual - b.dual)
    }
}

impl Neg for DualQuaternion {
    type Output = DualQuaternion;

    fn neg(self) -> DualQuaternion {
        DualQuaternion::new(-self.primary, -self.dual)
    }
}

/// A dual quaternion satisfying the unit invariants: `‖primary‖ = 1` and
/// `⟨primary, dual⟩ = 0`, each within [`UNIT_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDualQuaternion(DualQuaternion);

impl Default for UnitDualQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitDualQuaternion {
    pub const IDENTITY: UnitDualQuaternion = UnitDualQuaternion(DualQuaternion::IDENTITY);

    /// Checks the invariants and canonicalizes the sign.
    pub fn try_new(dq: DualQuaternion) -> Result<Self, DqError> {
        let (norm_error, orthogonality_error) = dq.unit_errors();
        if !(norm_error <= UNIT_TOLERANCE && orthogonality_error <= UNIT_TOLERANCE) {
            return Err(DqError::NotUnit {
                norm_error,
                orthogonality_error,
            });
        }
        Ok(Self(dq).canonical())
    }

    /// Projects an arbitrary dual quaternion with non-zero primary part
    /// onto the unit set: scales by `1/‖p‖` and removes the dual component
    /// parallel to the primary part. Sign is left untouched.
    pub fn normalize(dq: &DualQuaternion) -> Result<Self, DqError> {
        let n = dq.primary.norm();
        if !(n > f64::MIN_POSITIVE) || !n.is_finite() {
            return Err(DqError::ZeroNorm(n));
        }
        let inv = 1.0 / n;
        let p = dq.primary * inv;
        let d = dq.dual * inv;
        let d = d - p * p.dot(&d);
        Ok(Self(DualQuaternion::new(p, d)))
    }

    pub fn from_rigid(t: &RigidTransform) -> Self {
        let r = t.rotation;
        let d = Quaternion::pure(&t.translation) * r * 0.5;
        Self(DualQuaternion::new(r, d))
    }

    pub fn from_rotation_translation(rotation: Quaternion, translation: Vec3) -> Self {
        Self::from_rigid(&RigidTransform::new(rotation, translation))
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::from_rigid(&RigidTransform::from_translation(t))
    }

    pub fn to_rigid(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.0.primary,
            translation: self.translation(),
        }
    }

    /// `t = 2 𝒟 ⊗ 𝒫*`.
    pub fn translation(&self) -> Vec3 {
        (self.0.dual * self.0.primary.conjugate() * 2.0).vector()
    }

    pub fn rotation(&self) -> Quaternion {
        self.0.primary
    }

    pub fn primary(&self) -> Quaternion {
        self.0.primary
    }

    pub fn dual(&self) -> Quaternion {
        self.0.dual
    }

    pub fn as_dq(&self) -> &DualQuaternion {
        &self.0
    }

    pub fn canonical(&self) -> Self {
        if self.0.primary.w < 0.0 {
            Self(-self.0)
        } else {
            *self
        }
    }

    /// The same motion with the opposite sign.
    pub fn negated(&self) -> Self {
        Self(-self.0)
    }

    /// Full conjugate, which is the inverse for unit dual quaternions.
    pub fn inverse(&self) -> Self {
        Self(self.0.conjugate(Conjugate::Full))
    }

    /// Applies this motion to a point through the sandwich
    /// `q̂ ⊠ (1 + ε p̃) ⊠ q̂^{3*}` and reads the dual part.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        let sandwich = self.0 * DualQuaternion::from_point(p) * self.0.conjugate(Conjugate::Real);
        sandwich.dual.vector()
    }

    /// `min(‖a − b‖, ‖a + b‖)` over the eight components.
    pub fn distance_mod_sign(&self, other: &Self) -> f64 {
        let a = self.0.to_array();
        let b = other.0.to_array();
        let minus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        let plus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x + y).powi(2)).sum();
        minus.min(plus).sqrt()
    }
}

impl Mul for UnitDualQuaternion {
    type Output = UnitDualQuaternion;

    fn mul(self, b: UnitDualQuaternion) -> UnitDualQuaternion {
        UnitDualQuaternion(self.0 * b.0)
    }
}

impl From<UnitDualQuaternion> for DualQuaternion {
    fn from(q: UnitDualQuaternion) -> Self {
        q.0
    }
}

impl TryFrom<DualQuaternion> for UnitDualQuaternion {
    type Error = DqError;

    fn try_from(dq: DualQuaternion) -> Result<Self, DqError> {
        Self::try_new(dq)
    }
}

/// Rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Quaternion,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Quaternion::IDENTITY,
        translation: Vector3::new(0.0, 0.0, 0.0),
    };

    /// Normalizes and canonicalizes the rotation. Panics on a zero quaternion.
    pub fn new(rotation: Quaternion, translation: Vec3) -> Self {
        let rotation = rotation
            .normalized()
            .expect("rotation quaternion must be non-zero")
            .canonical();
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Quaternion::IDENTITY,
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        Self::new(Quaternion::from_axis_angle(axis, angle), translation)
    }

    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation: Quaternion::from_rotation_matrix(rotation),
            translation,
        }
    }

    /// Inverse of `to_unit_dq`; rejects non-unit input.
    pub fn try_from_dq(dq: &DualQuaternion) -> Result<Self, DqError> {
        Ok(UnitDualQuaternion::try_new(*dq)?.to_rigid())
    }

    pub fn to_unit_dq(&self) -> UnitDualQuaternion {
        UnitDualQuaternion::from_rigid(self)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.conjugate();
        RigidTransform {
            rotation: r,
            translation: -r.rotate(&self.translation),
        }
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let q = self.rotation.canonical();
        2.0 * q.vector().norm().atan2(q.w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn imaginary_units() {
        let i = q(0.0, 1.0, 0.0, 0.0);
        let j = q(0.0, 0.0, 1.0, 0.0);
        let k = q(0.0, 0.0, 0.0, 1.0);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        assert_eq!(i * i, q(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(i * j * k, q(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(j * i, -k);
    }

    #[test]
    fn identity_is_neutral() {
        let a = q(1.0, 2.0, 3.0, 4.0);
        assert_eq!(a * Quaternion::IDENTITY, a);
        assert_eq!(Quaternion::IDENTITY * a, a);
    }

    #[test]
    fn cross_product() {
        let x = Quaternion::pure(&Vec3::x());
        let y = Quaternion::pure(&Vec3::y());
        assert_eq!(quat_cross(&x, &y).unwrap(), Quaternion::pure(&Vec3::z()));
        let a = Quaternion::pure(&Vec3::new(1.0, 2.0, 3.0));
        let b = Quaternion::pure(&Vec3::new(4.0, 5.0, 6.0));
        assert_eq!(quat_cross(&a, &a).unwrap(), Quaternion::ZERO);
        assert_eq!(
            quat_cross(&a, &b).unwrap().vector(),
            Vec3::new(-3.0, 6.0, -3.0)
        );
        assert!(matches!(
            quat_cross(&q(1.0, 0.0, 0.0, 0.0), &b),
            Err(DqError::NotPure(_))
        ));
    }

    #[test]
    fn translation_composition() {
        let a = UnitDualQuaternion::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let b = UnitDualQuaternion::from_translation(Vec3::new(-0.5, 4.0, 1.0));
        let c = a * b;
        assert!((c.translation() - Vec3::new(0.5, 6.0, 4.0)).norm() < 1e-15);
        assert_eq!(UnitDualQuaternion::IDENTITY * a, a);
    }

    #[test]
    fn to_unit_dq_examples() {
        let t = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let dq = t.to_unit_dq();
        assert_eq!(dq.primary(), Quaternion::IDENTITY);
        assert_eq!(dq.dual(), q(0.0, 0.5, 1.0, 1.5));

        let r = RigidTransform::from_axis_angle(&Vec3::z(), FRAC_PI_2, Vec3::zeros());
        assert_eq!(r.to_unit_dq().dual(), Quaternion::ZERO);
    }

    #[test]
    fn conjugates() {
        let t = RigidTransform::from_axis_angle(&Vec3::new(1.0, -2.0, 0.5), 0.7, Vec3::new(0.3, 1.0, -2.0));
        let dq = t.to_unit_dq();
        let ident = *dq.as_dq() * dq.as_dq().conjugate(Conjugate::Full);
        assert!(ident.max_abs_diff(&DualQuaternion::IDENTITY) < 1e-15);
        let twice = dq.as_dq().conjugate(Conjugate::Real).conjugate(Conjugate::Real);
        assert_eq!(twice, *dq.as_dq());
        let dual = dq.as_dq().conjugate(Conjugate::Dual);
        assert_eq!(dual.primary, dq.primary());
        assert_eq!(dual.dual, -dq.dual());
    }

    #[test]
    fn non_unit_rejected() {
        let dq = DualQuaternion::new(q(2.0, 0.0, 0.0, 0.0), Quaternion::ZERO);
        assert!(matches!(
            RigidTransform::try_from_dq(&dq),
            Err(DqError::NotUnit { .. })
        ));
        let skew = DualQuaternion::new(Quaternion::IDENTITY, q(0.1, 0.0, 0.0, 0.0));
        assert!(UnitDualQuaternion::try_new(skew).is_err());
        let fixed = UnitDualQuaternion::normalize(&skew).unwrap();
        assert!(fixed.as_dq().is_unit(1e-15));
    }

    #[test]
    fn transform_point_examples() {
        let p = Vec3::new(0.3, -1.0, 2.0);
        assert_eq!(UnitDualQuaternion::IDENTITY.transform_point(&p), p);
        let t = UnitDualQuaternion::from_translation(Vec3::x());
        assert_eq!(t.transform_point(&Vec3::zeros()), Vec3::x());
    }

    #[test]
    fn canonical_sign() {
        let r = RigidTransform::new(q(-0.5, 0.5, 0.5, 0.5), Vec3::zeros());
        assert!(r.rotation.w > 0.0);
        let dq = UnitDualQuaternion::try_new(-*r.to_unit_dq().as_dq()).unwrap();
        assert!(dq.primary().w > 0.0);
        assert_eq!(dq.distance_mod_sign(&dq.negated()), 0.0);
    }

    #[test]
    fn rotation_matrix_round_trip() {
        for (axis, angle) in [
            (Vec3::x(), 0.3),
            (Vec3::new(1.0, 1.0, 0.0), 3.0),
            (Vec3::new(0.2, -1.0, 0.4), -2.9),
            (Vec3::z(), std::f64::consts::PI),
        ] {
            let qa = Quaternion::from_axis_angle(&axis, angle).canonical();
            let back = Quaternion::from_rotation_matrix(&qa.to_rotation_matrix());
            let d = (back - qa).norm().min((back + qa).norm());
            assert!(d < 1e-14, "{axis:?} {angle}: {d}");
        }
    }
}
