//! SO(3) primitives.
//!
//! Rotations are stored as 3×3 matrices. The Lie algebra 𝔰𝔬(3) is
//! identified with ℝ³ through the basis
//!
//! ```text
//! Y1 = [[0,0,0],[0,0,-1],[0,1,0]]   Y2 = [[0,0,1],[0,0,0],[-1,0,0]]   Y3 = [[0,-1,0],[1,0,0],[0,0,0]]
//! ```
//!
//! which is orthonormal for `⟨u, v⟩ = tr(u vᵀ)/2`. Every norm, gradient and
//! Gaussian in the crate uses that inner product, so a rotation vector `v`
//! and its hat matrix have the same length.
//!
//! Tangent vectors at a rotation `r` are plain matrices of the form
//! `r · hat(v)`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::tabulated::{linspace, TabulatedCdf};
use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rodrigues falls back to its Taylor expansion below this angle.
const EXP_TAYLOR_ANGLE: f64 = 1e-8;
/// The logarithm uses its series expansion below this angle.
const LOG_TAYLOR_ANGLE: f64 = 1e-6;
/// Largest asymmetry accepted by [`vee_checked`] and [`expmap`].
pub const SKEW_TOL: f64 = 1e-8;
/// Tolerance used when validating user-supplied rotation matrices.
pub const ROTATION_TOL: f64 = 1e-8;

/// Default grid size for the uniform-angle inverse CDF.
pub const DEFAULT_UNIFORM_GRID: usize = 1000;

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates `m` as a rotation (orthonormal, det 1, within [`ROTATION_TOL`]).
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let r = Rotation(m);
        let err = r.orthonormality_error();
        let det = m.determinant();
        if !m.iter().all(|x| x.is_finite()) || err > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidInput(format!(
                "not a rotation matrix (|RᵀR − I| = {err:.3e}, det = {det})"
            )));
        }
        Ok(r)
    }

    /// Wraps `m` without checking it. Callers guarantee `m ∈ SO(3)`.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Row-major constructor, validated.
    pub fn from_row_slice(rows: &[f64; 9]) -> Result<Self> {
        Rotation::from_matrix(Mat3::from_row_slice(rows))
    }

    /// Rotation by `angle` radians about the unit vector `axis`.
    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        exp_vec(&(axis * angle))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)], m[(0, 1)], m[(0, 2)],
            m[(1, 0)], m[(1, 1)], m[(1, 2)],
            m[(2, 0)], m[(2, 1)], m[(2, 2)],
        ]
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// `selfᵀ · other`, the rotation taking `self` to `other`.
    pub fn relative_to(&self, other: &Rotation) -> Rotation {
        Rotation(self.0.tr_mul(&other.0))
    }

    /// Max-abs entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.tr_mul(&self.0) - Mat3::identity()).amax()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Projects onto the nearest rotation (Frobenius norm) via the polar
    /// decomposition.
    pub fn renormalize(&self) -> Rotation {
        let svd = self.0.svd(true, true);
        let (mut u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        if (u * v_t).determinant() < 0.0 {
            u.column_mut(2).neg_mut();
        }
        Rotation(u * v_t)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// An element of 𝔰𝔬(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMat(Mat3);

impl SkewMat {
    pub fn zero() -> Self {
        SkewMat(Mat3::zeros())
    }

    /// Accepts `m` if `|m + mᵀ|∞ ≤ SKEW_TOL`.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let asymmetry = asymmetry(&m);
        if asymmetry > SKEW_TOL {
            return Err(Error::NotSkew { asymmetry });
        }
        Ok(SkewMat(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }
}

/// Max-abs entry of `m + mᵀ`.
fn asymmetry(m: &Mat3) -> f64 {
    (m + m.transpose()).amax()
}

/// `v₁Y₁ + v₂Y₂ + v₃Y₃`.
pub fn hat(v: &Vec3) -> SkewMat {
    SkewMat(hat_matrix(v))
}

pub(crate) fn hat_matrix(v: &Vec3) -> Mat3 {
    Mat3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Inverse of [`hat`]. Reads the antisymmetric part, so `vee(hat(v)) == v`
/// bit for bit.
pub fn vee(a: &SkewMat) -> Vec3 {
    vee_matrix(&a.0)
}

pub(crate) fn vee_matrix(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// [`vee`] for an arbitrary matrix, rejecting non-skew input.
pub fn vee_checked(m: &Mat3) -> Result<Vec3> {
    SkewMat::from_matrix(*m).map(|s| vee(&s))
}

/// `⟨u, v⟩ = tr(u vᵀ)/2`.
pub fn inner(u: &Mat3, v: &Mat3) -> f64 {
    0.5 * u.component_mul(v).sum()
}

/// Norm induced by [`inner`].
pub fn norm(u: &Mat3) -> f64 {
    inner(u, u).sqrt()
}

/// Rodrigues' formula.
pub fn exp_so3(a: &SkewMat) -> Rotation {
    let v = vee(a);
    let theta = v.norm();
    let a = &a.0;
    let a2 = a * a;
    if theta < EXP_TAYLOR_ANGLE {
        return Rotation(Mat3::identity() + a + a2 * 0.5);
    }
    let (s, c) = theta.sin_cos();
    Rotation(Mat3::identity() + a * (s / theta) + a2 * ((1.0 - c) / (theta * theta)))
}

/// `exp_so3(hat(v))`.
pub fn exp_vec(v: &Vec3) -> Rotation {
    exp_so3(&hat(v))
}

/// Principal logarithm, angle in `[0, π]`.
pub fn log_so3(r: &Rotation) -> SkewMat {
    hat(&log_vec(r))
}

/// Rotation vector (axis × angle) of `r`, computed through the quaternion so
/// the axis stays well defined as the angle approaches π.
pub fn log_vec(r: &Rotation) -> Vec3 {
    let q = quat_from_rotation(r);
    let v = Vec3::new(q.b, q.c, q.d);
    let n = v.norm();
    // canonical sign gives a >= 0, so the angle lies in [0, π]
    let theta = 2.0 * n.atan2(q.a);
    if theta < LOG_TAYLOR_ANGLE {
        // 2·atan(n/a)/n = (2/a)(1 − n²/(3a²) + …)
        let a = q.a;
        v * (2.0 / a) * (1.0 - n * n / (3.0 * a * a))
    } else {
        v * (theta / n)
    }
}

/// `arccos(clamp((tr r − 1)/2))`.
pub fn rotation_angle(r: &Rotation) -> f64 {
    ((r.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Exponential map at `r0`: `r0 · exp(r0ᵀ tangent)`.
pub fn expmap(r0: &Rotation, tangent: &Mat3) -> Result<Rotation> {
    let skew = r0.0.tr_mul(tangent);
    let asymmetry = asymmetry(&skew);
    if asymmetry > SKEW_TOL {
        return Err(Error::NotTangent { asymmetry });
    }
    Ok(r0 * &exp_vec(&vee_matrix(&skew)))
}

/// Tangent vector `r0 · hat(δ)` with `δ ~ N(0, I₃)`.
pub fn sample_tangent_gaussian<R: Rng + ?Sized>(r0: &Rotation, rng: &mut R) -> Mat3 {
    r0.0 * hat_matrix(&standard_normal_vec(rng))
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// A direction uniform on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = standard_normal_vec(rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Angle CDF of the Haar measure, `(ω − sin ω)/π`.
pub fn uniform_angle_cdf(omega: f64) -> f64 {
    (omega - omega.sin()) / PI
}

/// Haar-uniform sampler on SO(3): the angle is inverted from an M-point
/// trapezoidal CDF of `(1 − cos ω)/π`, the axis is uniform on the sphere.
#[derive(Debug, Clone)]
pub struct UniformSo3Sampler {
    angle_cdf: TabulatedCdf,
}

impl UniformSo3Sampler {
    pub fn new(grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::InvalidInput(format!("uniform grid needs M >= 2, got {grid}")));
        }
        let omega = linspace(0.0, PI, grid);
        let pdf: Vec<f64> = omega.iter().map(|w| (1.0 - w.cos()) / PI).collect();
        let angle_cdf = TabulatedCdf::from_pdf(omega, &pdf).expect("uniform angle density has mass");
        Ok(UniformSo3Sampler { angle_cdf })
    }

    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.angle_cdf.quantile(rng.random::<f64>())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let omega = self.sample_angle(rng);
        let axis = random_unit_vector(rng);
        exp_vec(&(axis * omega))
    }
}

impl Default for UniformSo3Sampler {
    fn default() -> Self {
        UniformSo3Sampler::new(DEFAULT_UNIFORM_GRID).unwrap()
    }
}

/// One Haar-uniform rotation. Rebuilds the angle table; prefer
/// [`UniformSo3Sampler`] for repeated draws.
pub fn sample_uniform_so3<R: Rng + ?Sized>(rng: &mut R, grid: usize) -> Result<Rotation> {
    Ok(UniformSo3Sampler::new(grid)?.sample(rng))
}

/// Unit quaternion `a + bi + cj + dk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        UnitQuaternion { a: 1.0, b: 0.0, c: 0.0, d: 0.0 }
    }

    /// Normalizes `(a, b, c, d)`; fails on a zero or non-finite input.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = (a * a + b * b + c * c + d * d).sqrt();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::InvalidInput(format!("cannot normalize quaternion ({a}, {b}, {c}, {d})")));
        }
        Ok(UnitQuaternion { a: a / n, b: b / n, c: c / n, d: d / n })
    }

    pub fn negate(&self) -> Self {
        UnitQuaternion { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    /// Representative of `±q` whose first nonzero component is positive.
    pub fn canonical(&self) -> Self {
        for x in [self.a, self.b, self.c, self.d] {
            if x > 0.0 {
                return *self;
            }
            if x < 0.0 {
                return self.negate();
            }
        }
        *self
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// Quaternion of `r` by Shepperd's method, in canonical sign.
pub fn quat_from_rotation(r: &Rotation) -> UnitQuaternion {
    let m = &r.0;
    let (m00, m11, m22) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    let tr = m00 + m11 + m22;
    let (a, b, c, d) = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        (0.25 * s, (m[(2, 1)] - m[(1, 2)]) / s, (m[(0, 2)] - m[(2, 0)]) / s, (m[(1, 0)] - m[(0, 1)]) / s)
    } else if m00 > m11 && m00 > m22 {
        let s = (1.0 + m00 - m11 - m22).sqrt() * 2.0;
        ((m[(2, 1)] - m[(1, 2)]) / s, 0.25 * s, (m[(0, 1)] + m[(1, 0)]) / s, (m[(0, 2)] + m[(2, 0)]) / s)
    } else if m11 > m22 {
        let s = (1.0 + m11 - m00 - m22).sqrt() * 2.0;
        ((m[(0, 2)] - m[(2, 0)]) / s, (m[(0, 1)] + m[(1, 0)]) / s, 0.25 * s, (m[(1, 2)] + m[(2, 1)]) / s)
    } else {
        let s = (1.0 + m22 - m00 - m11).sqrt() * 2.0;
        ((m[(1, 0)] - m[(0, 1)]) / s, (m[(0, 2)] + m[(2, 0)]) / s, (m[(1, 2)] + m[(2, 1)]) / s, 0.25 * s)
    };
    UnitQuaternion::new(a, b, c, d)
        .expect("rotation matrix yields a nonzero quaternion")
        .canonical()
}

/// The double-cover map; `q` and `−q` give the same rotation.
pub fn rotation_from_quat(q: &UnitQuaternion) -> Rotation {
    let UnitQuaternion { a, b, c, d } = *q;
    Rotation(Mat3::new(
        a * a + b * b - c * c - d * d,
        2.0 * (b * c - a * d),
        2.0 * (b * d + a * c),
        2.0 * (b * c + a * d),
        a * a - b * b + c * c - d * d,
        2.0 * (c * d - a * b),
        2.0 * (b * d - a * c),
        2.0 * (c * d + a * b),
        a * a - b * b - c * c + d * d,
    ))
}

/// Axis–angle pair with angle in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    /// The identity maps to angle 0 about the x-axis.
    pub fn from_rotation(r: &Rotation) -> Self {
        let v = log_vec(r);
        let angle = v.norm();
        if angle > 0.0 {
            AxisAngle { axis: v / angle, angle }
        } else {
            AxisAngle { axis: Vec3::x(), angle: 0.0 }
        }
    }

    pub fn to_rotation(&self) -> Rotation {
        Rotation::about_axis(&self.axis, self.angle)
    }
}
