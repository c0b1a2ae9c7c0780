//! C interface to the roict reconstruction library.
//!
//! Objects are opaque handles created by `*_new` / `*_from_toml` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`RoictStatus`]; the message of the last failure on the calling thread is
//! available through [`roict_last_error`]. Arrays are caller-allocated,
//! row-major `double` buffers whose lengths are passed explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use roict::config::{GeometryConfig, Method, RunConfig};
use roict::grid::Image;
use roict::pipeline::{build_problem, reconstruct, RunOptions};
use roict::tomo::{fbp, Geometry, Sinogram};
use roict::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoictStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Format = 3,
    Config = 4,
    InvalidParam = 5,
    InvalidGeometry = 6,
    StepSize = 7,
    Shape = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoictMethod {
    Fbp = 0,
    TvHier = 1,
    Rdbfb = 2,
    Unrolled = 3,
}

impl From<RoictMethod> for Method {
    fn from(m: RoictMethod) -> Self {
        match m {
            RoictMethod::Fbp => Method::Fbp,
            RoictMethod::TvHier => Method::TvHier,
            RoictMethod::Rdbfb => Method::Rdbfb,
            RoictMethod::Unrolled => Method::Unrolled,
        }
    }
}

/// Scanner geometry: image lattice, support and ROI disks, detector and
/// angles.
pub struct RoictGeometry {
    inner: Geometry,
}

/// Parsed run configuration (geometry, stencil and solver settings).
pub struct RoictConfig {
    inner: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RoictStatus {
    match e {
        Error::Io(_) => RoictStatus::Io,
        Error::Format(_) => RoictStatus::Format,
        Error::Config(_) => RoictStatus::Config,
        Error::InvalidParam(_) => RoictStatus::InvalidParam,
        Error::InvalidGeometry(_) => RoictStatus::InvalidGeometry,
        Error::StepSize(_) => RoictStatus::StepSize,
        Error::Shape(_) => RoictStatus::Shape,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Run `f`, record any failure and map it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RoictStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RoictStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RoictStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            RoictStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn copy_out(src: &[f64], dst: &mut [f64], what: &str) -> Result<(), Failure> {
    if src.len() != dst.len() {
        return Err(Error::Shape(format!("{what}: buffer holds {} values, result has {}", dst.len(), src.len())).into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn roict_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn roict_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Create a geometry. Lengths are in the same unit; diameters are those of
/// the reconstruction support and of the ROI.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn roict_geometry_new(
    width: usize,
    pixel_size: f64,
    grid_diameter: f64,
    roi_diameter: f64,
    n_bins: usize,
    bin_size: f64,
    n_angles: usize,
    subrays: usize,
    out: *mut *mut RoictGeometry,
) -> RoictStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let gc = GeometryConfig { width, pixel_size, grid_diameter, roi_diameter, n_bins, bin_size, n_angles, subrays };
        let g = Box::new(RoictGeometry { inner: gc.geometry()? });
        *out = Box::into_raw(g);
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or a handle from [`roict_geometry_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roict_geometry_free(g: *mut RoictGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of image values (`width²`).
///
/// # Safety
/// `g` must be a valid geometry handle.
#[no_mangle]
pub unsafe extern "C" fn roict_geometry_image_len(g: *const RoictGeometry) -> usize {
    g.as_ref().map_or(0, |g| g.inner.grid().len())
}

/// Number of sinogram values (`n_angles · n_bins`).
///
/// # Safety
/// `g` must be a valid geometry handle.
#[no_mangle]
pub unsafe extern "C" fn roict_geometry_sinogram_len(g: *const RoictGeometry) -> usize {
    g.as_ref().map_or(0, |g| g.inner.sinogram_len())
}

/// Projection of the support-restricted image.
///
/// # Safety
/// `image` must hold `image_len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn roict_project(
    g: *const RoictGeometry,
    image: *const f64,
    image_len: usize,
    out: *mut f64,
    out_len: usize,
) -> RoictStatus {
    guard(|| {
        let g = &handle(g, "geometry")?.inner;
        let x = Image::from_vec(g.grid().width(), slice(image, image_len, "image")?.to_vec())?;
        let s = g.project(&x)?;
        copy_out(s.as_slice(), slice_mut(out, out_len, "out")?, "sinogram")
    })
}

/// Adjoint of [`roict_project`].
///
/// # Safety
/// `sino` must hold `sino_len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn roict_backproject(
    g: *const RoictGeometry,
    sino: *const f64,
    sino_len: usize,
    out: *mut f64,
    out_len: usize,
) -> RoictStatus {
    guard(|| {
        let g = &handle(g, "geometry")?.inner;
        let s = Sinogram::from_vec(g.n_angles(), g.n_bins(), slice(sino, sino_len, "sinogram")?.to_vec())?;
        let x = g.backproject(&s)?;
        copy_out(x.as_slice(), slice_mut(out, out_len, "out")?, "image")
    })
}

/// Filtered backprojection.
///
/// # Safety
/// `sino` must hold `sino_len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn roict_fbp(
    g: *const RoictGeometry,
    sino: *const f64,
    sino_len: usize,
    out: *mut f64,
    out_len: usize,
) -> RoictStatus {
    guard(|| {
        let g = &handle(g, "geometry")?.inner;
        let s = Sinogram::from_vec(g.n_angles(), g.n_bins(), slice(sino, sino_len, "sinogram")?.to_vec())?;
        let x = fbp(g, &s)?;
        copy_out(x.as_slice(), slice_mut(out, out_len, "out")?, "image")
    })
}

/// Parse a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roict_config_from_toml(toml: *const c_char, out: *mut *mut RoictConfig) -> RoictStatus {
    guard(|| {
        if toml.is_null() {
            return Err(Failure::Null("toml"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::from_toml(text)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(RoictConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle from [`roict_config_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roict_config_free(c: *mut RoictConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Geometry described by a configuration, as a new handle.
///
/// # Safety
/// `c` must be a valid configuration handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn roict_config_geometry(c: *const RoictConfig, out: *mut *mut RoictGeometry) -> RoictStatus {
    guard(|| {
        let c = &handle(c, "config")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = Box::into_raw(Box::new(RoictGeometry { inner: c.geometry.geometry()? }));
        Ok(())
    })
}

/// Reconstruct the support image from a sinogram with `method`. Step sizes
/// that fail validation are rejected unless `override_steps` is nonzero.
///
/// # Safety
/// `sino` must hold `sino_len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn roict_reconstruct(
    c: *const RoictConfig,
    method: RoictMethod,
    sino: *const f64,
    sino_len: usize,
    override_steps: i32,
    out: *mut f64,
    out_len: usize,
) -> RoictStatus {
    guard(|| {
        let cfg = &handle(c, "config")?.inner;
        let gc = &cfg.geometry;
        let y = Sinogram::from_vec(gc.n_angles, gc.n_bins, slice(sino, sino_len, "sinogram")?.to_vec())?;
        let problem = build_problem(cfg, y)?;
        let opts = RunOptions { override_steps: override_steps != 0, ..Default::default() };
        let rec = reconstruct(cfg, &problem, method.into(), opts)?;
        copy_out(rec.x.as_slice(), slice_mut(out, out_len, "out")?, "image")
    })
}
