//! C ABI over `se3-diffuse`.
//!
//! Conventions: matrices are row-major `double[9]`, vectors `double[3]`.
//! Every fallible call returns an [`Se3dStatus`]; on failure
//! [`se3d_last_error`] describes the problem for the calling thread.
//! Handles come from `*_new`/`*_build` and must be released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use se3_diffuse::backbone::{atom2frame, frame_to_atoms, IdealGeometry, Psi, ResidueAtoms};
use se3_diffuse::igso3::{conditional_score, f_and_df, Igso3Table, TruncationConfig};
use se3_diffuse::rng::{stream, SimRng};
use se3_diffuse::schedules::{RotationSchedule, RotationScheduleKind, TranslationSchedule};
use se3_diffuse::se3::Frame;
use se3_diffuse::so3::{exp_vec, log_vec, rotation_angle, Mat3, Rotation, Vec3};
use se3_diffuse::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Se3dStatus {
    Ok = 0,
    InvalidInput = 1,
    Numerical = 2,
    Io = 3,
    NullPointer = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> Se3dStatus {
    match e {
        Error::Io { .. } | Error::Parse { .. } => Se3dStatus::Io,
        Error::NotSkew { .. } | Error::NotTangent { .. } => Se3dStatus::Numerical,
        e if e.is_numerical() => Se3dStatus::Numerical,
        _ => Se3dStatus::InvalidInput,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> Se3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            Se3dStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            Se3dStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic");
            Se3dStatus::Panic
        }
    }
}

unsafe fn read<const N: usize>(p: *const f64, what: &'static str) -> Result<[f64; N], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(std::slice::from_raw_parts(p, N));
    Ok(out)
}

unsafe fn write(p: *mut f64, values: &[f64], what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    std::slice::from_raw_parts_mut(p, values.len()).copy_from_slice(values);
    Ok(())
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn read_vec(p: *const f64, what: &'static str) -> Result<Vec3, Fail> {
    Ok(Vec3::from(read::<3>(p, what)?))
}

unsafe fn read_rotation(p: *const f64, what: &'static str) -> Result<Rotation, Fail> {
    Ok(Rotation::from_row_slice(&read::<9>(p, what)?)?)
}

fn truncation(terms: usize) -> Result<TruncationConfig, Error> {
    let mut cfg = TruncationConfig::default();
    if terms != 0 {
        cfg.series_terms = terms;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Message for the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn se3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn se3d_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior NUL"),
    };
    VERSION.as_ptr()
}

/// `exp(hat(v))` for a rotation vector `v`.
///
/// # Safety
/// `v` must point to 3 doubles and `out` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_so3_exp(v: *const f64, out: *mut f64) -> Se3dStatus {
    guard(|| {
        let r = exp_vec(&read_vec(v, "v")?);
        write(out, &r.to_row_array(), "out")
    })
}

/// Rotation vector of `r` with norm in `[0, π]`.
///
/// # Safety
/// `r` must point to 9 doubles and `out` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_so3_log(r: *const f64, out: *mut f64) -> Se3dStatus {
    guard(|| {
        let v = log_vec(&read_rotation(r, "r")?);
        write(out, v.as_slice(), "out")
    })
}

/// Rotation angle of `r` in `[0, π]`.
///
/// # Safety
/// `r` must point to 9 doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn se3d_so3_angle(r: *const f64, out: *mut f64) -> Se3dStatus {
    guard(|| {
        *out_ref(out, "out")? = rotation_angle(&read_rotation(r, "r")?);
        Ok(())
    })
}

/// Heat-kernel density `f(ω, t)` and `∂f/∂ω`. `terms = 0` selects the
/// default truncation.
///
/// # Safety
/// `f` and `df` must each point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_f(omega: f64, t: f64, terms: usize, f: *mut f64, df: *mut f64) -> Se3dStatus {
    guard(|| {
        let (fv, dfv) = f_and_df(omega, t, &truncation(terms)?)?;
        *out_ref(f, "f")? = fv;
        *out_ref(df, "df")? = dfv;
        Ok(())
    })
}

/// Conditional score `∇_{rt} log IGSO3(rt; r0, t)`, a 3×3 tangent at `rt`.
///
/// # Safety
/// `r0` and `rt` must point to 9 doubles, `out` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_score(
    r0: *const f64,
    rt: *const f64,
    t: f64,
    terms: usize,
    out: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let s: Mat3 = conditional_score(&read_rotation(r0, "r0")?, &read_rotation(rt, "rt")?, t, &truncation(terms)?)?;
        write(out, s.transpose().as_slice(), "out")
    })
}

/// Opaque random stream.
pub struct Se3dRng(SimRng);

/// Stream `index` of `seed`. Never null.
#[no_mangle]
pub extern "C" fn se3d_rng_new(seed: u64, index: u64) -> *mut Se3dRng {
    Box::into_raw(Box::new(Se3dRng(stream(seed, index))))
}

/// # Safety
/// `rng` must come from [`se3d_rng_new`] and not be used afterwards; null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn se3d_rng_free(rng: *mut Se3dRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Opaque IGSO3 sampling table for one diffusion time.
pub struct Se3dIgso3Table(Igso3Table);

/// Builds a table at time `t` with `terms` series terms and `grid` angles
/// (0 selects the defaults).
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_table_build(
    t: f64,
    terms: usize,
    grid: usize,
    out: *mut *mut Se3dIgso3Table,
) -> Se3dStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let mut cfg = truncation(terms)?;
        if grid != 0 {
            cfg.angle_grid = grid;
        }
        cfg.validate()?;
        let table = Igso3Table::build(t, &cfg)?;
        *slot = Box::into_raw(Box::new(Se3dIgso3Table(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`se3d_igso3_table_build`] and not be used
/// afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_table_free(table: *mut Se3dIgso3Table) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Draw from IGSO3 centred at `r0`.
///
/// # Safety
/// `table` and `rng` must be live handles, `r0` 9 doubles, `out` 9
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_table_sample(
    table: *const Se3dIgso3Table,
    r0: *const f64,
    rng: *mut Se3dRng,
    out: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let table = table.as_ref().ok_or(Fail::Null("table"))?;
        let rng = out_ref(rng, "rng")?;
        let r = table.0.sample(&read_rotation(r0, "r0")?, &mut rng.0);
        write(out, &r.to_row_array(), "out")
    })
}

/// Interpolated density `f(ω)` from the table.
///
/// # Safety
/// `table` must be a live handle and `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_table_density(
    table: *const Se3dIgso3Table,
    omega: f64,
    out: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let table = table.as_ref().ok_or(Fail::Null("table"))?;
        if !(0.0..=std::f64::consts::PI).contains(&omega) {
            return Err(Error::InvalidInput(format!("angle {omega} outside [0, pi]")).into());
        }
        *out_ref(out, "out")? = table.0.density_at(omega);
        Ok(())
    })
}

/// `E‖∇ log p_{t|0}‖²` under the table's law.
///
/// # Safety
/// `table` must be a live handle and `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn se3d_igso3_table_expected_score_norm_sq(
    table: *const Se3dIgso3Table,
    out: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let table = table.as_ref().ok_or(Fail::Null("table"))?;
        *out_ref(out, "out")? = table.0.expected_score_norm_sq();
        Ok(())
    })
}

/// Schedule parameters; `logarithmic` nonzero selects the logarithmic
/// rotation schedule.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3dScheduleParams {
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub logarithmic: i32,
}

/// Both schedules evaluated at one time.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Se3dScheduleValues {
    pub beta: f64,
    pub g_x: f64,
    pub trans_var: f64,
    pub sigma_r: f64,
    pub rot_var: f64,
    pub g_r: f64,
}

#[no_mangle]
pub extern "C" fn se3d_schedule_default_params() -> Se3dScheduleParams {
    let tr = TranslationSchedule::default();
    let rot = RotationSchedule::default();
    Se3dScheduleParams {
        beta_min: tr.beta_min,
        beta_max: tr.beta_max,
        sigma_min: rot.sigma_min,
        sigma_max: rot.sigma_max,
        logarithmic: (rot.kind == RotationScheduleKind::Logarithmic) as i32,
    }
}

/// Evaluates the schedules at `s ∈ [0, 1]`.
///
/// # Safety
/// `params` must point to a parameter struct and `out` to a writable one.
#[no_mangle]
pub unsafe extern "C" fn se3d_schedule_eval(
    params: *const Se3dScheduleParams,
    s: f64,
    out: *mut Se3dScheduleValues,
) -> Se3dStatus {
    guard(|| {
        let p = params.as_ref().ok_or(Fail::Null("params"))?;
        let slot = out_ref(out, "out")?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!("schedule time {s} outside [0, 1]")).into());
        }
        let kind = if p.logarithmic != 0 { RotationScheduleKind::Logarithmic } else { RotationScheduleKind::Linear };
        let tr = TranslationSchedule::new(p.beta_min, p.beta_max)?;
        let rot = RotationSchedule::new(p.sigma_min, p.sigma_max, kind)?;
        *slot = Se3dScheduleValues {
            beta: tr.beta(s),
            g_x: tr.integrated(s),
            trans_var: tr.variance(s),
            sigma_r: rot.sigma(s),
            rot_var: rot.variance(s),
            g_r: rot.diffusion(s),
        };
        Ok(())
    })
}

/// Residue frame from N, CA, C positions (nm).
///
/// # Safety
/// `n`, `ca`, `c` must point to 3 doubles; `rotation` to 9 and
/// `translation` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_atom2frame(
    n: *const f64,
    ca: *const f64,
    c: *const f64,
    rotation: *mut f64,
    translation: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let res = ResidueAtoms {
            n: read_vec(n, "n")?,
            ca: read_vec(ca, "ca")?,
            c: read_vec(c, "c")?,
            o: Vec3::zeros(),
        };
        let f = atom2frame(&res)?;
        write(rotation, &f.rotation.to_row_array(), "rotation")?;
        write(translation, f.translation.as_slice(), "translation")
    })
}

/// N, CA, C, O positions (12 doubles, in that order) of the bundled ideal
/// residue placed by the frame, with the oxygen turned by `psi` radians.
///
/// # Safety
/// `rotation` must point to 9 doubles, `translation` to 3, `out` to 12
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn se3d_frame_to_atoms(
    rotation: *const f64,
    translation: *const f64,
    psi: f64,
    out: *mut f64,
) -> Se3dStatus {
    guard(|| {
        let f = Frame::new(read_rotation(rotation, "rotation")?, read_vec(translation, "translation")?);
        if !psi.is_finite() {
            return Err(Error::InvalidInput("psi must be finite".into()).into());
        }
        let atoms = frame_to_atoms(&f, &Psi::from_angle(psi), &IdealGeometry::default());
        let flat: Vec<f64> = atoms.atoms().iter().flat_map(|a| a.iter().copied()).collect();
        write(out, &flat, "out")
    })
}
