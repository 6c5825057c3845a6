//! C interface to `fiberscat`.
//!
//! Objects are opaque handles created by `fs_*_new`-style calls and released with
//! the matching `fs_*_free`. Every call returns an [`FsStatus`]; on failure the
//! message is available from [`fs_last_error_message`] on the same thread.
//! Complex vectors cross the boundary as interleaved `(re, im)` doubles with the
//! vacuum amplitude first.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fiberscat::model::Coupling;
use fiberscat::scattering::propagate;
use fiberscat::spectral::{mass_shell, sigma_ess};
use fiberscat::{ArrowheadFiberOperator, DispersionModel, EigenDecomposition, Error, FiberState, MomentumGrid, C64};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Dimension = 3,
    Numerical = 4,
    Domain = 5,
    Convergence = 6,
    Boundary = 7,
    Internal = 8,
    Panic = 9,
}

/// Dispersion relations and coupling.
pub struct FsModel(DispersionModel);
/// Periodic momentum grid.
pub struct FsGrid(MomentumGrid);
/// Discretized fiber operator at one total momentum.
pub struct FsFiber(ArrowheadFiberOperator);
/// Eigendecomposition of a fiber operator.
pub struct FsEigen(EigenDecomposition);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FsStatus {
    match e {
        Error::Config(_) | Error::UnsupportedOrder { .. } => FsStatus::Config,
        Error::Dimension { .. } => FsStatus::Dimension,
        Error::Numerical(_) => FsStatus::Numerical,
        Error::Domain(_) | Error::Unsupported(_) => FsStatus::Domain,
        Error::Convergence(_) => FsStatus::Convergence,
        Error::BoundaryBreach { .. } => FsStatus::Boundary,
        Error::Invariant(_) | Error::Io(_) => FsStatus::Internal,
    }
}

struct Failure(FsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            FsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn need(len: usize, capacity: usize) -> Result<(), Failure> {
    if capacity < len {
        return Err(Error::Dimension { expected: len, got: capacity }.into());
    }
    Ok(())
}

fn to_state(data: &[f64]) -> Result<FiberState, Failure> {
    if data.len() < 2 || !data.len().is_multiple_of(2) {
        return Err(Failure(FsStatus::Dimension, format!("interleaved state has odd or short length {}", data.len())));
    }
    let mut amps = data.chunks_exact(2).map(|c| C64::new(c[0], c[1]));
    let vacuum = amps.next().expect("length checked");
    Ok(FiberState::new(vacuum, amps.collect()))
}

fn write_state(psi: &FiberState, out: &mut [f64]) {
    let amps = std::iter::once(&psi.vacuum).chain(&psi.field);
    for (c, z) in out.chunks_exact_mut(2).zip(amps) {
        c[0] = z.re;
        c[1] = z.im;
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Preset model `"polaron"`, `"nelson"` or `"relativistic"` in `nu` dimensions.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_model_preset(name: *const c_char, nu: usize, out: *mut *mut FsModel) -> FsStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| Failure(FsStatus::Config, "name is not UTF-8".into()))?;
        let model = DispersionModel::preset(name, nu)?;
        model.check_params()?;
        write(out, Box::into_raw(Box::new(FsModel(model))), "out")
    })
}

/// Replaces the coupling by `g exp(-sigma^2 k^2 / 2)`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_model_set_gaussian_coupling(model: *mut FsModel, g: f64, sigma: f64) -> FsStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let updated = m.0.clone().with_coupling(Coupling::Gaussian { g, sigma });
        updated.check_params()?;
        m.0 = updated;
        Ok(())
    })
}

/// Bottom of the essential spectrum of the fiber at `p[0..p_len]`.
///
/// # Safety
/// Handles must be live, `p` readable for `p_len` values and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_model_sigma_ess(
    model: *const FsModel,
    p: *const f64,
    p_len: usize,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = slice(p, p_len, "p")?;
        write(out, sigma_ess(&m.0, p)?, "out")
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_model_free(model: *mut FsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Grid of `n` points per axis on `[-kmax, kmax)` in `nu` dimensions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_grid_new(nu: usize, n: usize, kmax: f64, out: *mut *mut FsGrid) -> FsStatus {
    guard(|| {
        let grid = MomentumGrid::new(nu, n, kmax)?;
        write(out, Box::into_raw(Box::new(FsGrid(grid))), "out")
    })
}

/// Number of grid points, `n^nu`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_grid_len(grid: *const FsGrid, out: *mut usize) -> FsStatus {
    guard(|| write(out, deref(grid, "grid")?.0.len(), "out"))
}

/// # Safety
/// See [`fs_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fs_grid_free(grid: *mut FsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Fiber operator at total momentum `p[0..p_len]`.
///
/// # Safety
/// Handles must be live, `p` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_fiber_assemble(
    model: *const FsModel,
    grid: *const FsGrid,
    p: *const f64,
    p_len: usize,
    out: *mut *mut FsFiber,
) -> FsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(grid, "grid")?;
        let op = fiberscat::assemble_fiber(&m.0, &g.0, slice(p, p_len, "p")?)?;
        write(out, Box::into_raw(Box::new(FsFiber(op))), "out")
    })
}

/// Dimension of the fiber space: grid points plus the vacuum.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_fiber_dim(fiber: *const FsFiber, out: *mut usize) -> FsStatus {
    guard(|| write(out, deref(fiber, "fiber")?.0.diag.len() + 1, "out"))
}

/// `H(P) psi` for interleaved states of `2 * dim` doubles.
///
/// # Safety
/// `psi` readable and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_fiber_apply(fiber: *const FsFiber, psi: *const f64, out: *mut f64, len: usize) -> FsStatus {
    guard(|| {
        let f = deref(fiber, "fiber")?;
        let dim = f.0.diag.len() + 1;
        if len != 2 * dim {
            return Err(Error::Dimension { expected: 2 * dim, got: len }.into());
        }
        let state = to_state(slice(psi, len, "psi")?)?;
        let image = f.0.apply(&state)?;
        write_state(&image, slice_mut(out, len, "out")?);
        Ok(())
    })
}

/// Mass-shell energy at `p`; `found` is set to 0 when there is no bound state.
///
/// # Safety
/// Handles must be live, `p` readable, `energy` and `found` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_mass_shell(
    model: *const FsModel,
    grid: *const FsGrid,
    p: *const f64,
    p_len: usize,
    energy: *mut f64,
    found: *mut i32,
) -> FsStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(grid, "grid")?;
        match mass_shell(&m.0, &g.0, slice(p, p_len, "p")?)? {
            Some(s) => {
                write(energy, s.energy, "energy")?;
                write(found, 1, "found")
            }
            None => {
                write(energy, f64::NAN, "energy")?;
                write(found, 0, "found")
            }
        }
    })
}

/// # Safety
/// See [`fs_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fs_fiber_free(fiber: *mut FsFiber) {
    if !fiber.is_null() {
        drop(Box::from_raw(fiber));
    }
}

/// Eigendecomposition of a fiber operator by the secular-equation solver.
///
/// # Safety
/// `fiber` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_new(fiber: *const FsFiber, out: *mut *mut FsEigen) -> FsStatus {
    guard(|| {
        let f = deref(fiber, "fiber")?;
        let d = EigenDecomposition::secular(&f.0)?;
        write(out, Box::into_raw(Box::new(FsEigen(d))), "out")
    })
}

/// Number of eigenvalues.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_len(eigen: *const FsEigen, out: *mut usize) -> FsStatus {
    guard(|| write(out, deref(eigen, "eigen")?.0.len(), "out"))
}

/// Copies the ascending eigenvalues into `out`, which holds `capacity` doubles.
///
/// # Safety
/// `out` must be writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_values(eigen: *const FsEigen, out: *mut f64, capacity: usize) -> FsStatus {
    guard(|| {
        let ev = deref(eigen, "eigen")?.0.eigenvalues();
        need(ev.len(), capacity)?;
        slice_mut(out, ev.len(), "out")?.copy_from_slice(ev);
        Ok(())
    })
}

/// Eigenvector `index` as `2 * len` interleaved doubles.
///
/// # Safety
/// `out` must be writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_vector(
    eigen: *const FsEigen,
    index: usize,
    out: *mut f64,
    capacity: usize,
) -> FsStatus {
    guard(|| {
        let d = &deref(eigen, "eigen")?.0;
        if index >= d.len() {
            return Err(Failure(FsStatus::Domain, format!("eigenvector index {index} out of range 0..{}", d.len())));
        }
        need(2 * d.len(), capacity)?;
        write_state(&d.eigenvector(index), slice_mut(out, 2 * d.len(), "out")?);
        Ok(())
    })
}

/// `e^{-itH} psi` for interleaved states of `len = 2 * dim` doubles; `out` may alias `psi`.
///
/// # Safety
/// `psi` readable and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_propagate(
    eigen: *const FsEigen,
    psi: *const f64,
    t: f64,
    out: *mut f64,
    len: usize,
) -> FsStatus {
    guard(|| {
        let d = &deref(eigen, "eigen")?.0;
        if len != 2 * d.len() {
            return Err(Error::Dimension { expected: 2 * d.len(), got: len }.into());
        }
        if !t.is_finite() {
            return Err(Error::Domain(format!("time must be finite, got {t}")).into());
        }
        let state = to_state(slice(psi, len, "psi")?)?;
        let moved = propagate(d, &state, t);
        write_state(&moved, slice_mut(out, len, "out")?);
        Ok(())
    })
}

/// # Safety
/// See [`fs_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fs_eigen_free(eigen: *mut FsEigen) {
    if !eigen.is_null() {
        drop(Box::from_raw(eigen));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, FsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(fs_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "panic: boom");
    }

    #[test]
    fn error_kinds_map_to_distinct_codes() {
        assert_eq!(status_of(&Error::Config("x".into())), FsStatus::Config);
        assert_eq!(status_of(&Error::Convergence("x".into())), FsStatus::Convergence);
        assert_eq!(status_of(&Error::BoundaryBreach { time: 1.0, mass: 0.1 }), FsStatus::Boundary);
        assert_eq!(status_of(&Error::Invariant("x".into())), FsStatus::Internal);
    }

    #[test]
    fn interleaved_states_round_trip() {
        let data = [1.0, -2.0, 0.5, 0.25, 3.0, 0.0];
        let psi = to_state(&data).ok().unwrap();
        assert_eq!(psi.vacuum, C64::new(1.0, -2.0));
        let mut out = [0.0; 6];
        write_state(&psi, &mut out);
        assert_eq!(out, data);
        assert!(to_state(&data[..5]).is_err());
    }
}
