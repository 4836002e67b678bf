//! C ABI for the gridfisher library: opaque lattice handles, status codes,
//! and a thread-local last-error message. The header `include/gridfisher.h`
//! is generated at build time by cbindgen.

#![allow(non_camel_case_types)]

use gridfisher::fisher::{fisher_functional, FiringField};
use gridfisher::lattice::{
    named_lattice, LatticeNd, LatticeParams2D, LatticeParams3D, NamedLattice,
};
use gridfisher::quadrature::QuadSpec;
use gridfisher::theta::{q_value, theta_translated, ThetaParams};
use gridfisher::Error;
use nalgebra::SVector;
use std::cell::RefCell;
use std::os::raw::{c_char, c_int};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum gf_status {
    GF_OK = 0,
    GF_ERR_INVALID_ARGUMENT = 1,
    GF_ERR_TRUNCATION = 2,
    GF_ERR_NUMERICAL = 3,
    GF_ERR_NULL_POINTER = 4,
}

/// Opaque lattice handle (dimension 2 or 3).
pub struct gf_lattice {
    inner: LatticeNd,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: gf_status, message: impl Into<String>) -> gf_status {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn fail_with(err: Error) -> gf_status {
    let status = match &err {
        Error::Truncation { .. } => gf_status::GF_ERR_TRUNCATION,
        Error::Evaluation(_) | Error::SingularFisher => gf_status::GF_ERR_NUMERICAL,
        _ => gf_status::GF_ERR_INVALID_ARGUMENT,
    };
    fail(status, err.to_string())
}

/// Copies the last error message (UTF-8, NUL-terminated, truncated to `len`)
/// of the calling thread into `buf`; returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn gf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn put_lattice(out: *mut *mut gf_lattice, lat: LatticeNd) -> gf_status {
    if out.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "out pointer is null");
    }
    unsafe {
        *out = Box::into_raw(Box::new(gf_lattice { inner: lat }));
    }
    gf_status::GF_OK
}

/// Builds a named lattice: "A2", "Z2", "Z3", "D3" or "D3star".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_named(
    name: *const c_char,
    out: *mut *mut gf_lattice,
) -> gf_status {
    if name.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "name pointer is null");
    }
    let name = match std::ffi::CStr::from_ptr(name).to_str() {
        Ok(s) => s,
        Err(_) => return fail(gf_status::GF_ERR_INVALID_ARGUMENT, "name is not UTF-8"),
    };
    match NamedLattice::parse(name) {
        Ok(n) => put_lattice(out, named_lattice(n)),
        Err(e) => fail_with(e),
    }
}

/// Unit-covolume 2D lattice from fundamental-domain coordinates.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_from_params2d(
    x: f64,
    y: f64,
    out: *mut *mut gf_lattice,
) -> gf_status {
    match LatticeParams2D::new(x, y) {
        Ok(p) => put_lattice(out, LatticeNd::Two(p.to_lattice())),
        Err(e) => fail_with(e),
    }
}

/// Unit-covolume 3D lattice from the five-parameter chart.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_from_params3d(
    u: f64,
    v: f64,
    x: f64,
    y: f64,
    z: f64,
    out: *mut *mut gf_lattice,
) -> gf_status {
    match LatticeParams3D::new(u, v, x, y, z) {
        Ok(p) => put_lattice(out, LatticeNd::Three(p.to_lattice())),
        Err(e) => fail_with(e),
    }
}

/// Dual lattice `L*` (basis: inverse transpose).
///
/// # Safety
/// `lattice` must come from a gf_lattice constructor; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_dual(
    lattice: *const gf_lattice,
    out: *mut *mut gf_lattice,
) -> gf_status {
    if lattice.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "lattice pointer is null");
    }
    let dual = match &(*lattice).inner {
        LatticeNd::Two(l) => LatticeNd::Two(l.dual()),
        LatticeNd::Three(l) => LatticeNd::Three(l.dual()),
    };
    put_lattice(out, dual)
}

/// Releases a lattice handle; null is a no-op.
///
/// # Safety
/// `lattice` must come from a gf_lattice constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_free(lattice: *mut gf_lattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Lattice dimension (2 or 3); 0 for a null handle.
///
/// # Safety
/// `lattice` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_dim(lattice: *const gf_lattice) -> c_int {
    if lattice.is_null() {
        return 0;
    }
    (*lattice).inner.dim() as c_int
}

/// Covolume |det basis|; NaN for a null handle.
///
/// # Safety
/// `lattice` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_covolume(lattice: *const gf_lattice) -> f64 {
    if lattice.is_null() {
        return f64::NAN;
    }
    match &(*lattice).inner {
        LatticeNd::Two(l) => l.covolume(),
        LatticeNd::Three(l) => l.covolume(),
    }
}

/// Copies the basis matrix into `out` (dim*dim entries, column-major).
///
/// # Safety
/// `out` must point to at least dim*dim writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_lattice_basis(
    lattice: *const gf_lattice,
    out: *mut f64,
) -> gf_status {
    if lattice.is_null() || out.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "null pointer");
    }
    match &(*lattice).inner {
        LatticeNd::Two(l) => {
            for j in 0..2 {
                for i in 0..2 {
                    *out.add(j * 2 + i) = l.basis()[(i, j)];
                }
            }
        }
        LatticeNd::Three(l) => {
            for j in 0..3 {
                for i in 0..3 {
                    *out.add(j * 3 + i) = l.basis()[(i, j)];
                }
            }
        }
    }
    gf_status::GF_OK
}

/// Translated theta sum at `y` (dim entries): value and, when `gradient` is
/// not null, the analytic gradient (dim entries).
///
/// # Safety
/// `y` must point to dim doubles; `value` must be valid; `gradient` must be
/// null or point to dim writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_theta(
    lattice: *const gf_lattice,
    y: *const f64,
    alpha: f64,
    value: *mut f64,
    gradient: *mut f64,
) -> gf_status {
    if lattice.is_null() || y.is_null() || value.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "null pointer");
    }
    let p = match ThetaParams::new(alpha) {
        Ok(p) => p,
        Err(e) => return fail_with(e),
    };
    match &(*lattice).inner {
        LatticeNd::Two(l) => {
            let yv = SVector::<f64, 2>::new(*y, *y.add(1));
            match theta_translated(l, &yv, &p) {
                Ok(t) => {
                    *value = t.value;
                    if !gradient.is_null() {
                        for i in 0..2 {
                            *gradient.add(i) = t.gradient[i];
                        }
                    }
                    gf_status::GF_OK
                }
                Err(e) => fail_with(e),
            }
        }
        LatticeNd::Three(l) => {
            let yv = SVector::<f64, 3>::new(*y, *y.add(1), *y.add(2));
            match theta_translated(l, &yv, &p) {
                Ok(t) => {
                    *value = t.value;
                    if !gradient.is_null() {
                        for i in 0..3 {
                            *gradient.add(i) = t.gradient[i];
                        }
                    }
                    gf_status::GF_OK
                }
                Err(e) => fail_with(e),
            }
        }
    }
}

/// Per-point Fisher density `Q(y) = |grad theta|^2 / (4 theta)`.
///
/// # Safety
/// `y` must point to dim doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gf_q_value(
    lattice: *const gf_lattice,
    y: *const f64,
    alpha: f64,
    out: *mut f64,
) -> gf_status {
    if lattice.is_null() || y.is_null() || out.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "null pointer");
    }
    let p = match ThetaParams::new(alpha) {
        Ok(p) => p,
        Err(e) => return fail_with(e),
    };
    let r = match &(*lattice).inner {
        LatticeNd::Two(l) => q_value(l, &SVector::<f64, 2>::new(*y, *y.add(1)), &p),
        LatticeNd::Three(l) => q_value(l, &SVector::<f64, 3>::new(*y, *y.add(1), *y.add(2)), &p),
    };
    match r {
        Ok(q) => {
            *out = q;
            gf_status::GF_OK
        }
        Err(e) => fail_with(e),
    }
}

/// Fisher functional over the uniform ball field `B_radius` with the default
/// quadrature rule; `normalize != 0` divides by the field mass.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gf_fisher(
    lattice: *const gf_lattice,
    radius: f64,
    alpha: f64,
    normalize: c_int,
    out: *mut f64,
) -> gf_status {
    if lattice.is_null() || out.is_null() {
        return fail(gf_status::GF_ERR_NULL_POINTER, "null pointer");
    }
    let p = match ThetaParams::new(alpha) {
        Ok(p) => p,
        Err(e) => return fail_with(e),
    };
    let result = match &(*lattice).inner {
        LatticeNd::Two(l) => FiringField::<2>::uniform(radius)
            .map(|f| f.with_normalize(normalize != 0))
            .and_then(|f| {
                let quad = f.quadrature(&QuadSpec::default())?;
                fisher_functional(l, &f, &p, &quad)
            }),
        LatticeNd::Three(l) => FiringField::<3>::uniform(radius)
            .map(|f| f.with_normalize(normalize != 0))
            .and_then(|f| {
                let quad = f.quadrature(&QuadSpec::default_3d())?;
                fisher_functional(l, &f, &p, &quad)
            }),
    };
    match result {
        Ok(v) => {
            *out = v;
            gf_status::GF_OK
        }
        Err(e) => fail_with(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::ptr;

    fn named(name: &str) -> *mut gf_lattice {
        let cname = std::ffi::CString::new(name).unwrap();
        let mut out: *mut gf_lattice = ptr::null_mut();
        let st = unsafe { gf_lattice_named(cname.as_ptr(), &mut out) };
        assert_eq!(st, gf_status::GF_OK);
        out
    }

    #[test]
    fn lattice_lifecycle_and_metadata() {
        let l = named("D3");
        unsafe {
            assert_eq!(gf_lattice_dim(l), 3);
            assert!((gf_lattice_covolume(l) - 1.0).abs() <= 1e-12);
            let mut basis = [0.0; 9];
            assert_eq!(gf_lattice_basis(l, basis.as_mut_ptr()), gf_status::GF_OK);
            assert!((basis[0] - 2f64.powf(-1.0 / 3.0)).abs() <= 1e-15);
            let mut dual: *mut gf_lattice = ptr::null_mut();
            assert_eq!(gf_lattice_dual(l, &mut dual), gf_status::GF_OK);
            assert!((gf_lattice_covolume(dual) - 1.0).abs() <= 1e-12);
            gf_lattice_free(dual);
            gf_lattice_free(l);
            gf_lattice_free(ptr::null_mut());
        }
    }

    #[test]
    fn theta_matches_the_library() {
        let l = named("Z2");
        let y = [0.0, 0.0];
        let mut value = 0.0;
        let mut grad = [1.0, 1.0];
        let st = unsafe { gf_theta(l, y.as_ptr(), 10.0 / PI, &mut value, grad.as_mut_ptr()) };
        assert_eq!(st, gf_status::GF_OK);
        assert!((value - 1.000181607963650).abs() <= 1e-12);
        assert!(grad[0].abs() <= 1e-15 && grad[1].abs() <= 1e-15);
        let mut q = 1.0;
        let y2 = [0.5, 0.0];
        let st = unsafe { gf_q_value(l, y2.as_ptr(), 10.0 / PI, &mut q) };
        assert_eq!(st, gf_status::GF_OK);
        assert!(q <= 1e-20);
        unsafe { gf_lattice_free(l) };
    }

    #[test]
    fn fisher_matches_the_reference_value() {
        let a2 = named("A2");
        let z2 = named("Z2");
        let mut fa = 0.0;
        let mut fz = 0.0;
        unsafe {
            assert_eq!(gf_fisher(a2, 0.5, 10.0 / PI, 0, &mut fa), gf_status::GF_OK);
            assert_eq!(gf_fisher(z2, 0.5, 10.0 / PI, 0, &mut fz), gf_status::GF_OK);
            gf_lattice_free(a2);
            gf_lattice_free(z2);
        }
        assert!((fa - 1.8947268345755297).abs() / fa <= 1e-9);
        assert!(fa > fz);
    }

    #[test]
    fn error_paths_set_status_and_message() {
        let mut out: *mut gf_lattice = ptr::null_mut();
        let bad = std::ffi::CString::new("nonsense").unwrap();
        let st = unsafe { gf_lattice_named(bad.as_ptr(), &mut out) };
        assert_eq!(st, gf_status::GF_ERR_INVALID_ARGUMENT);
        let mut buf = [0 as c_char; 128];
        let n = unsafe { gf_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 0);
        let msg = unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }
            .to_string_lossy()
            .to_string();
        assert!(msg.contains("nonsense"), "{msg}");

        // Truncation cap maps to its own status.
        let l = named("Z2");
        let y = [0.0, 0.0];
        let mut value = 0.0;
        let st = unsafe { gf_theta(l, y.as_ptr(), 1e-4, &mut value, ptr::null_mut()) };
        assert_eq!(st, gf_status::GF_ERR_TRUNCATION);
        unsafe { gf_lattice_free(l) };

        // Null pointers are reported, not dereferenced.
        let st = unsafe { gf_theta(ptr::null(), y.as_ptr(), 1.0, &mut value, ptr::null_mut()) };
        assert_eq!(st, gf_status::GF_ERR_NULL_POINTER);
        // Invalid chart parameters.
        let st = unsafe { gf_lattice_from_params2d(0.1, -1.0, &mut out) };
        assert_eq!(st, gf_status::GF_ERR_INVALID_ARGUMENT);
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { std::ffi::CStr::from_ptr(gf_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn generated_header_exposes_the_surface() {
        let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gridfisher.h");
        let text = std::fs::read_to_string(header).expect("cbindgen header exists");
        for symbol in [
            "gf_lattice_named",
            "gf_lattice_from_params2d",
            "gf_lattice_from_params3d",
            "gf_lattice_dual",
            "gf_lattice_free",
            "gf_theta",
            "gf_q_value",
            "gf_fisher",
            "gf_last_error",
            "GF_ERR_TRUNCATION",
        ] {
            assert!(text.contains(symbol), "missing {symbol}");
        }
        // Opaque handle: declared but not defined.
        assert!(text.contains("typedef struct gf_lattice gf_lattice;"));
    }
}
