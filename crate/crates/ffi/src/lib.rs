//! C ABI over the domain-stability library.
//!
//! Objects cross the boundary as opaque handles created by `ds_*_new` style
//! constructors and released with the matching `ds_*_free`. Every fallible
//! call returns a [`DsStatus`]; on failure the message is available from
//! [`ds_last_error_message`] on the same thread until the next failing call.
//! Structured inputs (shapes, coefficients, loads, run configs) are JSON
//! strings in the same format the command-line tool reads.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use domain_stability::cli::{run, Overrides, RunConfig};
use domain_stability::fem::{
    assemble, solve_dirichlet, AmbientSystem, CoefficientField, CoefficientSpec, DirichletSystem, LoadSpec,
    Quadrature,
};
use domain_stability::geometry::{dilate, erode, hausdorff_distances, rasterize, GridGeometry, RasterSet, ShapeSpec};
use domain_stability::spectral::eigens;
use domain_stability::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    BufferTooSmall = 4,
    Panic = 5,
    DomainError = 10,
    EmptyDomain = 11,
    MarginError = 12,
    ModulusError = 13,
    CoefficientError = 14,
    NumericsError = 15,
    StateError = 16,
    RankError = 17,
    ResolutionError = 18,
    InapplicableError = 19,
    GapError = 20,
    ConfigError = 21,
    IoError = 22,
}

impl From<&Error> for DsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => DsStatus::DomainError,
            Error::EmptyDomain(_) => DsStatus::EmptyDomain,
            Error::Margin(_) => DsStatus::MarginError,
            Error::Modulus(_) => DsStatus::ModulusError,
            Error::Coefficient(_) => DsStatus::CoefficientError,
            Error::Numerics(_) => DsStatus::NumericsError,
            Error::State(_) => DsStatus::StateError,
            Error::Rank(_) => DsStatus::RankError,
            Error::Resolution(_) => DsStatus::ResolutionError,
            Error::Inapplicable(_) => DsStatus::InapplicableError,
            Error::Gap(_) => DsStatus::GapError,
            Error::Config(_) => DsStatus::ConfigError,
            Error::Io(_) => DsStatus::IoError,
        }
    }
}

/// Raster grid on a square box.
pub struct DsGrid(GridGeometry);

/// Raster domain on a grid.
pub struct DsDomain(RasterSet);

/// Assembled stiffness and mass matrices on the whole box.
pub struct DsSystem(Arc<AmbientSystem>);

/// The four Hausdorff-type distances between two domains.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsHausdorff {
    /// Hausdorff distance of the closures.
    pub closed: f64,
    /// Hausdorff distance of the complements.
    pub open: f64,
    /// Maximum of `closed` and `open`.
    pub pompeiu: f64,
    /// Weakest of the four distances.
    pub weakest: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), DsStatus>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(DsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib<T>(r: domain_stability::Result<T>) -> Result<T, DsStatus> {
    r.map_err(|e| fail((&e).into(), format!("{}: {e}", e.name())))
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> Result<&'a T, DsStatus> {
    p.as_ref().ok_or_else(|| fail(DsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DsStatus> {
    p.as_mut().ok_or_else(|| fail(DsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, DsStatus> {
    if p.is_null() {
        return Err(fail(DsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(DsStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T, DsStatus> {
    serde_json::from_str(s).map_err(|e| fail(DsStatus::InvalidJson, format!("{what}: {e}")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn write_slice(values: &[f64], out: *mut f64, cap: usize, written: *mut usize) -> Result<(), DsStatus> {
    *out_ptr(written, "written")? = values.len();
    if values.len() > cap {
        return Err(fail(
            DsStatus::BufferTooSmall,
            format!("need {} entries, buffer holds {cap}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(fail(DsStatus::NullPointer, "output buffer is null"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clears the last error message of this thread.
#[no_mangle]
pub extern "C" fn ds_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Grid of `n × n` square cells covering `[x0, x0 + side] × [y0, y0 + side]`.
#[no_mangle]
pub unsafe extern "C" fn ds_grid_new(x0: f64, y0: f64, side: f64, n: usize, out: *mut *mut DsGrid) -> DsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(DsGrid(lib(GridGeometry::new([x0, y0], side, n))?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_grid_free(grid: *mut DsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Mesh width of the grid, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_grid_h(grid: *const DsGrid) -> f64 {
    grid.as_ref().map_or(f64::NAN, |g| g.0.h())
}

/// Rasterizes a shape given as JSON, e.g.
/// `{"kind":"disk","center":[0.5,0.5],"radius":0.3}`.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_from_shape(
    grid: *const DsGrid,
    shape_json: *const c_char,
    out: *mut *mut DsDomain,
) -> DsStatus {
    guard(|| {
        let grid = href(grid, "grid")?;
        let shape: ShapeSpec = json(text(shape_json, "shape_json")?, "shape")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(DsDomain(lib(rasterize(&shape, &grid.0))?));
        Ok(())
    })
}

/// Domain from a row-major cell mask of `n × n` bytes, nonzero meaning inside.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_from_mask(
    grid: *const DsGrid,
    mask: *const u8,
    len: usize,
    out: *mut *mut DsDomain,
) -> DsStatus {
    guard(|| {
        let grid = href(grid, "grid")?;
        if mask.is_null() && len > 0 {
            return Err(fail(DsStatus::NullPointer, "mask is null"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(mask, len) };
        let set = lib(RasterSet::from_mask(grid.0, bytes.iter().map(|&b| b != 0).collect()))?;
        *out_ptr(out, "out")? = boxed(DsDomain(set));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_domain_free(domain: *mut DsDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Number of cells in the domain, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_cell_count(domain: *const DsDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.0.count())
}

/// Area of the domain, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_area(domain: *const DsDomain) -> f64 {
    domain.as_ref().map_or(f64::NAN, |d| d.0.area())
}

/// Points within `eps` of the domain.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_dilate(domain: *const DsDomain, eps: f64, out: *mut *mut DsDomain) -> DsStatus {
    guard(|| {
        let d = href(domain, "domain")?;
        *out_ptr(out, "out")? = boxed(DsDomain(lib(dilate(&d.0, eps))?));
        Ok(())
    })
}

/// Points whose `eps`-neighbourhood lies in the domain.
#[no_mangle]
pub unsafe extern "C" fn ds_domain_erode(domain: *const DsDomain, eps: f64, out: *mut *mut DsDomain) -> DsStatus {
    guard(|| {
        let d = href(domain, "domain")?;
        *out_ptr(out, "out")? = boxed(DsDomain(lib(erode(&d.0, eps))?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_hausdorff(x: *const DsDomain, y: *const DsDomain, out: *mut DsHausdorff) -> DsStatus {
    guard(|| {
        let (x, y) = (href(x, "x")?, href(y, "y")?);
        let d = lib(hausdorff_distances(&x.0, &y.0))?;
        *out_ptr(out, "out")? =
            DsHausdorff { closed: d.closed, open: d.open, pompeiu: d.pompeiu, weakest: d.weakest };
        Ok(())
    })
}

/// Assembles `−div(A∇u)` on the whole box. `coefficient_json` may be NULL
/// for the identity, otherwise e.g. `{"kind":"diagonal","values":[1,4]}`.
#[no_mangle]
pub unsafe extern "C" fn ds_system_new(
    grid: *const DsGrid,
    coefficient_json: *const c_char,
    out: *mut *mut DsSystem,
) -> DsStatus {
    guard(|| {
        let grid = href(grid, "grid")?;
        let spec: CoefficientSpec = if coefficient_json.is_null() {
            CoefficientSpec::default()
        } else {
            json(text(coefficient_json, "coefficient_json")?, "coefficient")?
        };
        let coeff = lib(CoefficientField::from_spec(&spec, &grid.0))?;
        let amb = lib(assemble(&grid.0, &coeff, Quadrature::Gauss2))?;
        *out_ptr(out, "out")? = boxed(DsSystem(amb));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_system_free(system: *mut DsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of interior nodes of the box, i.e. the length of nodal vectors.
#[no_mangle]
pub unsafe extern "C" fn ds_system_dim(system: *const DsSystem) -> usize {
    system.as_ref().map_or(0, |s| s.0.dim())
}

/// Friedrichs constant `1/λ_min` of the whole box.
#[no_mangle]
pub unsafe extern "C" fn ds_system_friedrichs(system: *const DsSystem, out: *mut f64) -> DsStatus {
    guard(|| {
        let s = href(system, "system")?;
        *out_ptr(out, "out")? = lib(s.0.friedrichs_constant())?;
        Ok(())
    })
}

/// The `k` smallest Dirichlet eigenvalues on `domain`, ascending. `written`
/// receives the number of values produced even when the buffer is too small.
#[no_mangle]
pub unsafe extern "C" fn ds_eigenvalues(
    system: *const DsSystem,
    domain: *const DsDomain,
    k: usize,
    values: *mut f64,
    cap: usize,
    written: *mut usize,
) -> DsStatus {
    guard(|| {
        let (s, d) = (href(system, "system")?, href(domain, "domain")?);
        let sys = lib(DirichletSystem::restrict(&s.0, &d.0))?;
        let res = lib(eigens(&sys, k))?;
        write_slice(&res.values, values, cap, written)
    })
}

/// Solves the Dirichlet problem on `domain` for a load given as JSON, e.g.
/// `{"kind":"constant","value":1}`. The zero-extended nodal solution has
/// `ds_system_dim` entries; `energy` (may be NULL) receives its energy norm.
#[no_mangle]
pub unsafe extern "C" fn ds_solve(
    system: *const DsSystem,
    domain: *const DsDomain,
    load_json: *const c_char,
    u: *mut f64,
    cap: usize,
    written: *mut usize,
    energy: *mut f64,
) -> DsStatus {
    guard(|| {
        let (s, d) = (href(system, "system")?, href(domain, "domain")?);
        let load: LoadSpec = json(text(load_json, "load_json")?, "load")?;
        lib(load.validate())?;
        let f = lib(load.sample(&s.0))?;
        let sys = lib(DirichletSystem::restrict(&s.0, &d.0))?;
        let sol = lib(solve_dirichlet(&sys, &f))?;
        write_slice(&sol.u, u, cap, written)?;
        if let Some(e) = energy.as_mut() {
            *e = sol.energy;
        }
        Ok(())
    })
}

/// Executes a run config (the JSON read by `domain-stability run`). A
/// non-NULL `out_dir` overrides the output directory of the config.
#[no_mangle]
pub unsafe extern "C" fn ds_run_config(config_json: *const c_char, out_dir: *const c_char) -> DsStatus {
    guard(|| {
        let mut config = lib(RunConfig::from_json(text(config_json, "config_json")?))?;
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(text(out_dir, "out_dir")?)) };
        config.apply(&Overrides { out, seed: None, resolution_check: false });
        lib(run(&config)).map(|_| ())
    })
}
