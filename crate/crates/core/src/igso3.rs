//! The isotropic Gaussian on SO(3) (IGSO3), i.e. the transition density of
//! Brownian motion on SO(3) under the `tr(uvᵀ)/2` metric.
//!
//! The density with respect to the normalized Haar measure depends only on
//! the rotation angle `ω` of `r0ᵀ rt`:
//!
//! ```text
//! f(ω, t) = Σ_{ℓ=0}^{L-1} (2ℓ+1) e^{-ℓ(ℓ+1)t/2} sin((ℓ+½)ω) / sin(ω/2)
//! ```
//!
//! The character ratio is evaluated through the identity
//! `sin((ℓ+½)ω)/sin(ω/2) = 1 + 2 Σ_{k=1}^{ℓ} cos(kω)`, which has no 0/0 at the
//! origin and differentiates termwise to `−2 Σ k sin(kω)`. Terms whose
//! heat weight has underflowed far below machine precision are skipped; `L`
//! stays the hard cap.

use std::f64::consts::PI;

use rand::Rng;

use crate::so3::{
    exp_vec, hat_matrix, log_vec, random_unit_vector, rotation_angle, Mat3, Rotation, Vec3,
};
use crate::tabulated::{linspace, trapezoid, TabulatedCdf};
use crate::{Error, Result};

/// Terms with `ℓ(ℓ+1)t/2` above this exponent contribute less than 1e-24
/// even after the `(2ℓ+1)³` growth of the derivative terms.
const HEAT_EXPONENT_CUTOFF: f64 = 80.0;

/// Largest share of table mass that may be lost to negative truncation lobes.
const MAX_CLAMPED_MASS: f64 = 1e-6;

/// Angles within this distance outside `[0, π]` are clamped instead of rejected.
const ANGLE_SLACK: f64 = 1e-9;

/// Series truncation and grid settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncationConfig {
    /// Number of series terms `L`.
    pub series_terms: usize,
    /// Number of points `M` in the angle grid of a table.
    pub angle_grid: usize,
    /// Below this angle the analytic `ω → 0` limits are used.
    pub omega_eps: f64,
    /// Smallest diffusion time accepted.
    pub t_min: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            series_terms: 2000,
            angle_grid: 1000,
            omega_eps: 1e-6,
            t_min: 0.01,
        }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.series_terms < 1 {
            return Err(Error::InvalidInput("series_terms must be >= 1".into()));
        }
        if self.angle_grid < 2 {
            return Err(Error::InvalidInput("angle_grid must be >= 2".into()));
        }
        if !(self.omega_eps > 0.0 && self.omega_eps < 1e-3) {
            return Err(Error::InvalidInput(format!(
                "omega_eps must lie in (0, 1e-3), got {}",
                self.omega_eps
            )));
        }
        if !(self.t_min > 0.0) {
            return Err(Error::InvalidInput(format!("t_min must be positive, got {}", self.t_min)));
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("diffusion time must be finite, got {t}")));
        }
        if t < self.t_min {
            return Err(Error::TimeBelowFloor { t, t_min: self.t_min });
        }
        Ok(())
    }
}

fn check_angle(omega: f64) -> Result<f64> {
    if !(-ANGLE_SLACK..=PI + ANGLE_SLACK).contains(&omega) {
        return Err(Error::InvalidInput(format!("angle {omega} outside [0, π]")));
    }
    Ok(omega.clamp(0.0, PI))
}

/// `(f, ∂ωf)` of the truncated series. No argument checks.
fn series(omega: f64, t: f64, cfg: &TruncationConfig) -> (f64, f64) {
    let small = omega < cfg.omega_eps;
    let mut f = 0.0;
    let mut df = 0.0;
    // running character value and its ω-derivative
    let mut chi = 0.0;
    let mut dchi = 0.0;
    for l in 0..cfg.series_terms {
        let lf = l as f64;
        let exponent = lf * (lf + 1.0) * t / 2.0;
        if exponent > HEAT_EXPONENT_CUTOFF {
            break;
        }
        if l == 0 {
            chi = 1.0;
        } else if small {
            chi += 2.0;
        } else {
            let (s, c) = (lf * omega).sin_cos();
            chi += 2.0 * c;
            dchi -= 2.0 * lf * s;
        }
        let w = (2.0 * lf + 1.0) * (-exponent).exp();
        f += w * chi;
        df += w * dchi;
    }
    (f, df)
}

/// Truncated heat-kernel series `f(ω, t)`.
pub fn f_igso3(omega: f64, t: f64, cfg: &TruncationConfig) -> Result<f64> {
    Ok(f_and_df(omega, t, cfg)?.0)
}

/// Termwise `∂f/∂ω`; zero below `omega_eps` since `f` is even in `ω`.
pub fn df_igso3_domega(omega: f64, t: f64, cfg: &TruncationConfig) -> Result<f64> {
    Ok(f_and_df(omega, t, cfg)?.1)
}

/// `f` and `∂ωf` in one pass over the series.
pub fn f_and_df(omega: f64, t: f64, cfg: &TruncationConfig) -> Result<(f64, f64)> {
    cfg.check_time(t)?;
    let omega = check_angle(omega)?;
    Ok(series(omega, t, cfg))
}

/// IGSO3 density of `rt` around `r0` w.r.t. the normalized Haar measure.
pub fn igso3_density(r0: &Rotation, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<f64> {
    f_igso3(rotation_angle(&r0.relative_to(rt)), t, cfg)
}

/// Body-frame coefficients `c` of the conditional score, so that the score
/// is `rt · hat(c)`. Zero when `rt` is within `omega_eps` of `r0`.
pub fn conditional_score_coeffs(
    r0: &Rotation,
    rt: &Rotation,
    t: f64,
    cfg: &TruncationConfig,
) -> Result<Vec3> {
    cfg.check_time(t)?;
    let v = log_vec(&r0.relative_to(rt));
    let omega = v.norm();
    if omega < cfg.omega_eps {
        return Ok(Vec3::zeros());
    }
    let (f, df) = series(omega.min(PI), t, cfg);
    if !(f > 0.0) {
        return Err(Error::NonPositiveDensity { omega, t, value: f });
    }
    Ok(v * (df / (f * omega)))
}

/// `∇_{rt} log IGSO3(rt; r0, t) = (rt/ω) · log(r0ᵀ rt) · ∂ωf/f`, a tangent
/// vector at `rt`.
pub fn conditional_score(r0: &Rotation, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<Mat3> {
    let c = conditional_score_coeffs(r0, rt, t, cfg)?;
    Ok(rt.matrix() * hat_matrix(&c))
}

/// Central finite-difference Riemannian gradient of `f` at `r`, assembled
/// as `r · hat(coefficients)`.
pub fn riemannian_gradient_fd(f: impl Fn(&Rotation) -> f64, r: &Rotation, h: f64) -> Mat3 {
    let mut coeffs = Vec3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        let plus = f(&(r * &exp_vec(&e)));
        let minus = f(&(r * &exp_vec(&(-e))));
        coeffs[i] = (plus - minus) / (2.0 * h);
    }
    r.matrix() * hat_matrix(&coeffs)
}

/// SU(2) analogue: `Σ_{ℓ=1}^{L} ℓ² e^{-(ℓ²-1)t/8} sin(ℓω)/sin(ω)`.
///
/// The ratio `sin(ℓω)/sin ω` is the Chebyshev polynomial `U_{ℓ-1}(cos ω)`,
/// evaluated by its three-term recurrence; below `omega_eps` the limit `ℓ`
/// is used.
pub fn igsu2_density(omega: f64, t: f64, cfg: &TruncationConfig) -> Result<f64> {
    cfg.check_time(t)?;
    let omega = check_angle(omega)?;
    let small = omega < cfg.omega_eps;
    let x = omega.cos();
    let (mut u_prev, mut u) = (0.0, 1.0); // U_{-1}, U_0
    let mut sum = 0.0;
    for l in 1..=cfg.series_terms {
        let lf = l as f64;
        let exponent = (lf * lf - 1.0) * t / 8.0;
        if exponent > HEAT_EXPONENT_CUTOFF {
            break;
        }
        let ratio = if small { lf } else { u };
        sum += lf * lf * (-exponent).exp() * ratio;
        let next = 2.0 * x * u - u_prev;
        u_prev = u;
        u = next;
    }
    Ok(sum)
}

/// Tabulated IGSO3 for one diffusion time: `f`, `∂ωf` and the angle CDF on a
/// uniform grid over `[0, π]`.
#[derive(Debug, Clone)]
pub struct Igso3Table {
    t: f64,
    series_terms: usize,
    omega: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    cdf: TabulatedCdf,
    mass: f64,
}

impl Igso3Table {
    pub fn build(t: f64, cfg: &TruncationConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.check_time(t)?;
        let omega = linspace(0.0, PI, cfg.angle_grid);
        let (f, df): (Vec<f64>, Vec<f64>) = omega.iter().map(|&w| series(w, t, cfg)).unzip();
        Igso3Table::assemble(t, cfg.series_terms, omega, f, df)
    }

    /// Rebuilds a table from stored grids (e.g. a cache file). The CDF is
    /// recomputed from `f` so that it always matches the stored density.
    pub fn from_parts(t: f64, series_terms: usize, omega: Vec<f64>, f: Vec<f64>, df: Vec<f64>) -> Result<Self> {
        let n = omega.len();
        if n < 2 || f.len() != n || df.len() != n {
            return Err(Error::InvalidInput("table grids must share a length >= 2".into()));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) || omega[0] != 0.0 || (omega[n - 1] - PI).abs() > 1e-12 {
            return Err(Error::InvalidInput("table angle grid must increase from 0 to π".into()));
        }
        Igso3Table::assemble(t, series_terms, omega, f, df)
    }

    fn assemble(t: f64, series_terms: usize, omega: Vec<f64>, f: Vec<f64>, df: Vec<f64>) -> Result<Self> {
        let raw: Vec<f64> = omega.iter().zip(&f).map(|(w, v)| v * (1.0 - w.cos()) / PI).collect();
        let pdf: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
        let negative: Vec<f64> = raw.iter().map(|v| (-v).max(0.0)).collect();
        let mass = trapezoid(&omega, &pdf);
        let clamped = trapezoid(&omega, &negative);
        if !(mass > 0.0) || !mass.is_finite() || clamped > MAX_CLAMPED_MASS * mass {
            return Err(Error::BadTable { t, clamped: clamped / mass.max(f64::MIN_POSITIVE) });
        }
        let cdf = TabulatedCdf::from_pdf(omega.clone(), &pdf).ok_or(Error::BadTable { t, clamped })?;
        Ok(Igso3Table { t, series_terms, omega, f, df, cdf, mass })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn series_terms(&self) -> usize {
        self.series_terms
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    pub fn df_values(&self) -> &[f64] {
        &self.df
    }

    pub fn cdf_values(&self) -> &[f64] {
        self.cdf.values()
    }

    /// Trapezoidal integral of the angle marginal before normalization;
    /// equals 1 up to quadrature and truncation error.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Angle CDF at `omega`, linear between grid points.
    pub fn angle_cdf(&self, omega: f64) -> f64 {
        self.cdf.cdf(omega)
    }

    /// Normalized angle density `f(ω)(1 − cos ω)/π` at a grid index.
    pub fn angle_pdf_at(&self, i: usize) -> f64 {
        self.f[i].max(0.0) * (1.0 - self.omega[i].cos()) / PI / self.mass
    }

    /// `f(ω)` by cubic Hermite interpolation of the tabulated `f` and `∂ωf`.
    pub fn density_at(&self, omega: f64) -> f64 {
        let n = self.omega.len();
        let omega = omega.clamp(0.0, PI);
        let i = self.omega.partition_point(|&w| w <= omega).clamp(1, n - 1);
        let (x0, x1) = (self.omega[i - 1], self.omega[i]);
        let h = x1 - x0;
        let s = (omega - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.f[i - 1] + h10 * h * self.df[i - 1] + h01 * self.f[i] + h11 * h * self.df[i]
    }

    /// Inverse-transform draw of the rotation angle.
    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.cdf.quantile(rng.random::<f64>())
    }

    /// `r0 · exp(ω · hat(axis))` with `ω` from the table and a uniform axis.
    pub fn sample<R: Rng + ?Sized>(&self, r0: &Rotation, rng: &mut R) -> Rotation {
        let omega = self.sample_angle(rng);
        let axis = random_unit_vector(rng);
        r0 * &exp_vec(&(axis * omega))
    }

    /// `E‖∇ log p_{t|0}‖²` under the table's angle law, by trapezoid.
    ///
    /// The squared score norm at angle `ω` is `(∂ωf/f)²`; grid points where
    /// `f` has decayed to roundoff level carry no mass and are skipped.
    pub fn expected_score_norm_sq(&self) -> f64 {
        let f_max = self.f.iter().cloned().fold(0.0, f64::max);
        let floor = 1e-12 * f_max;
        let integrand: Vec<f64> = (0..self.omega.len())
            .map(|i| {
                let f = self.f[i];
                if f <= floor {
                    0.0
                } else {
                    let ratio = self.df[i] / f;
                    ratio * ratio * self.angle_pdf_at(i)
                }
            })
            .collect();
        trapezoid(&self.omega, &integrand)
    }
}

/// Builds the table for time `t`.
pub fn build_table(t: f64, cfg: &TruncationConfig) -> Result<Igso3Table> {
    Igso3Table::build(t, cfg)
}

/// One IGSO3(·; r0, t) draw using a prebuilt table.
pub fn sample_igso3<R: Rng + ?Sized>(r0: &Rotation, table: &Igso3Table, rng: &mut R) -> Rotation {
    table.sample(r0, rng)
}

/// `E‖∇ log p_{t|0}‖²`, the reciprocal of the rotation DSM weight.
pub fn expected_score_norm_sq(t: f64, cfg: &TruncationConfig) -> Result<f64> {
    Ok(build_table(t, cfg)?.expected_score_norm_sq())
}
