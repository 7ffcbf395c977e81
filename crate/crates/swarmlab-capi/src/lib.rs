//! C ABI for the swarmlab simulation laboratory.
//!
//! Kernels are opaque handles created and freed through this interface;
//! experiments run from TOML config files and write their artifacts to disk
//! exactly like the `swarmlab` binary. All functions return an [`SlStatus`]
//! code; `sl_last_error_message` exposes the failure text for the current
//! thread.

// `!(x >= 0.0)` rejects NaN in argument guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use swarmlab::diagnostics::fits::{fit_points, FitModel};
use swarmlab::kernels::KernelSpec;
use swarmlab::linalg::SymMat;
use swarmlab::runner::{self, RunContext};

/// Status code returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Utf8Error = 3,
    ConfigError = 4,
    RunFailed = 5,
    /// The run finished but at least one enabled check failed.
    ChecksFailed = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: SlStatus, msg: impl std::fmt::Display) -> SlStatus {
    set_error(msg.to_string());
    status
}

/// Message of the last failure on this thread; valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static null-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque communication-kernel handle.
pub struct SlKernel {
    inner: KernelSpec,
}

fn export_kernel(out: *mut *mut SlKernel, spec: KernelSpec) -> SlStatus {
    if out.is_null() {
        return fail(SlStatus::NullPointer, "out pointer is null");
    }
    unsafe {
        *out = Box::into_raw(Box::new(SlKernel { inner: spec }));
    }
    SlStatus::Ok
}

/// Create a heavy-tail kernel `c_k (1 + r)^-beta`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_heavy_tail(
    beta: f64,
    c_k: f64,
    r_scale: f64,
    dim: usize,
    out: *mut *mut SlKernel,
) -> SlStatus {
    match KernelSpec::heavy_tail(beta, c_k, r_scale, dim) {
        Ok(spec) => export_kernel(out, spec),
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

/// Create a singular-head kernel `r^-(d + 2 s p)` with a heavy tail of order
/// `beta`, regularized below `eps_sing`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_singular(
    s: f64,
    p: f64,
    beta: f64,
    r_scale: f64,
    dim: usize,
    eps_sing: f64,
    out: *mut *mut SlKernel,
) -> SlStatus {
    match KernelSpec::singular(s, p, beta, r_scale, dim, eps_sing) {
        Ok(spec) => export_kernel(out, spec),
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

/// Create a matrix kernel `c_k (1 + r)^-beta A` from a row-major `dim x dim`
/// symmetric positive-definite profile.
///
/// # Safety
/// `aniso` must point to `dim * dim` readable doubles; `out` to one pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_matrix(
    beta: f64,
    c_k: f64,
    aniso: *const f64,
    dim: usize,
    out: *mut *mut SlKernel,
) -> SlStatus {
    if aniso.is_null() {
        return fail(SlStatus::NullPointer, "aniso pointer is null");
    }
    if !(1..=3).contains(&dim) {
        return fail(SlStatus::InvalidArgument, "dim must be 1, 2 or 3");
    }
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| *aniso.add(i * dim + j)).collect())
        .collect();
    let Some(mat) = SymMat::new(dim, &rows) else {
        return fail(
            SlStatus::InvalidArgument,
            "aniso must be a symmetric dim x dim matrix",
        );
    };
    match KernelSpec::matrix(beta, c_k, mat, 1.0, dim) {
        Ok(spec) => export_kernel(out, spec),
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

/// Create a tabulated kernel from parallel `(r, phi)` arrays with strictly
/// increasing `r`.
///
/// # Safety
/// `rs` and `phis` must point to `len` readable doubles; `out` to one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_tabulated(
    rs: *const f64,
    phis: *const f64,
    len: usize,
    dim: usize,
    out: *mut *mut SlKernel,
) -> SlStatus {
    if rs.is_null() || phis.is_null() {
        return fail(SlStatus::NullPointer, "table pointer is null");
    }
    let table: Vec<(f64, f64)> = (0..len).map(|i| (*rs.add(i), *phis.add(i))).collect();
    match KernelSpec::tabulated(table, dim) {
        Ok(spec) => export_kernel(out, spec),
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

/// Destroy a kernel handle. Passing null is a no-op.
///
/// # Safety
/// `kernel` must be a pointer previously returned by a `sl_kernel_*`
/// constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_free(kernel: *mut SlKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Evaluate a scalar kernel at points `x`, `y` of the kernel's dimension.
///
/// # Safety
/// `x` and `y` must point to at least `dim` readable doubles; `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_evaluate(
    kernel: *const SlKernel,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> SlStatus {
    let Some(k) = kernel.as_ref() else {
        return fail(SlStatus::NullPointer, "kernel handle is null");
    };
    if x.is_null() || y.is_null() || out.is_null() {
        return fail(SlStatus::NullPointer, "point or out pointer is null");
    }
    let d = k.inner.dim();
    let xs = std::slice::from_raw_parts(x, d);
    let ys = std::slice::from_raw_parts(y, d);
    match k.inner.evaluate(xs, ys) {
        Ok(v) => {
            *out = v;
            SlStatus::Ok
        }
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

/// Decreasing envelope `k(r)` of a kernel.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_kernel_envelope(
    kernel: *const SlKernel,
    r: f64,
    out: *mut f64,
) -> SlStatus {
    let Some(k) = kernel.as_ref() else {
        return fail(SlStatus::NullPointer, "kernel handle is null");
    };
    if out.is_null() {
        return fail(SlStatus::NullPointer, "out pointer is null");
    }
    if !(r >= 0.0) {
        return fail(SlStatus::InvalidArgument, "r must be >= 0");
    }
    *out = k.inner.decreasing_envelope(r);
    SlStatus::Ok
}

fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SlStatus> {
    if ptr.is_null() {
        return Err(fail(SlStatus::NullPointer, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|e| fail(SlStatus::Utf8Error, format!("{what}: {e}")))
}

/// Run one experiment config file; artifacts (trace CSV, report JSON,
/// resolved config, manifest) are written under `out_dir` (or the config's
/// own output directory when `out_dir` is null). `threads = 0` uses all
/// cores; any value yields bitwise-identical traces. `all_pass` receives
/// whether every enabled check passed.
///
/// # Safety
/// `config_path` must be a readable null-terminated path; `out_dir` null or
/// null-terminated; `all_pass` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sl_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    threads: usize,
    all_pass: *mut bool,
) -> SlStatus {
    let path = match cstr_arg(config_path, "config_path") {
        Ok(p) => PathBuf::from(p),
        Err(s) => return s,
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(SlStatus::ConfigError, format!("cannot read {path:?}: {e}")),
    };
    let cfg = match swarmlab::config::ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(SlStatus::ConfigError, e),
    };
    let mut ctx = RunContext {
        out_dir: None,
        threads: (threads > 0).then_some(threads),
        seed_override: None,
        base_dir: path.parent().map(PathBuf::from).unwrap_or_default(),
    };
    if !out_dir.is_null() {
        match cstr_arg(out_dir, "out_dir") {
            Ok(d) => ctx.out_dir = Some(PathBuf::from(d)),
            Err(s) => return s,
        }
    }
    match runner::run_experiment(&cfg, &ctx) {
        Ok(summary) => {
            if !all_pass.is_null() {
                *all_pass = summary.ok;
            }
            if summary.ok {
                SlStatus::Ok
            } else {
                fail(SlStatus::ChecksFailed, "one or more enabled checks failed")
            }
        }
        Err(e) => fail(SlStatus::RunFailed, e),
    }
}

/// Run a built-in suite (`paper-props`, `conservation`, `decay-rates`).
///
/// # Safety
/// `name` must be null-terminated; `out_dir` null or null-terminated;
/// `all_pass` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sl_run_suite(
    name: *const c_char,
    out_dir: *const c_char,
    threads: usize,
    all_pass: *mut bool,
) -> SlStatus {
    let suite = match cstr_arg(name, "name") {
        Ok(s) => s.to_string(),
        Err(s) => return s,
    };
    let mut ctx = RunContext {
        out_dir: None,
        threads: (threads > 0).then_some(threads),
        seed_override: None,
        base_dir: PathBuf::from("."),
    };
    if !out_dir.is_null() {
        match cstr_arg(out_dir, "out_dir") {
            Ok(d) => ctx.out_dir = Some(PathBuf::from(d)),
            Err(s) => return s,
        }
    }
    match runner::run_suite(&suite, &ctx) {
        Ok(summary) => {
            if !all_pass.is_null() {
                *all_pass = summary.all_pass;
            }
            if summary.all_pass {
                SlStatus::Ok
            } else {
                fail(SlStatus::ChecksFailed, "suite has failing members")
            }
        }
        Err(e) => fail(SlStatus::RunFailed, e),
    }
}

/// Least-squares power-law fit `y ~ amplitude * t^exponent` over raw points
/// (t > 0, y > 0); `residual` receives the RMS of the log-log fit.
///
/// # Safety
/// `ts` and `ys` must point to `len` readable doubles; the three out
/// pointers must each be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sl_fit_power_law(
    ts: *const f64,
    ys: *const f64,
    len: usize,
    exponent: *mut f64,
    amplitude: *mut f64,
    residual: *mut f64,
) -> SlStatus {
    if ts.is_null() || ys.is_null() {
        return fail(SlStatus::NullPointer, "series pointer is null");
    }
    let pts: Vec<(f64, f64)> = (0..len).map(|i| (*ts.add(i), *ys.add(i))).collect();
    match fit_points(&pts, FitModel::ParetoPower, 1.0) {
        Ok(fit) => {
            if !exponent.is_null() {
                *exponent = fit.exponent;
            }
            if !amplitude.is_null() {
                *amplitude = fit.amplitude;
            }
            if !residual.is_null() {
                *residual = fit.residual;
            }
            SlStatus::Ok
        }
        Err(e) => fail(SlStatus::InvalidArgument, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_lifecycle_and_evaluation() {
        unsafe {
            let mut k: *mut SlKernel = std::ptr::null_mut();
            assert_eq!(sl_kernel_heavy_tail(1.0, 2.0, 1.0, 1, &mut k), SlStatus::Ok);
            let mut v = 0.0;
            let x = [0.0f64];
            let y = [1.0f64];
            assert_eq!(
                sl_kernel_evaluate(k, x.as_ptr(), y.as_ptr(), &mut v),
                SlStatus::Ok
            );
            assert_eq!(v, 1.0);
            let mut env = 0.0;
            assert_eq!(sl_kernel_envelope(k, 0.0, &mut env), SlStatus::Ok);
            assert_eq!(env, 2.0);
            sl_kernel_free(k);
            sl_kernel_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn invalid_arguments_set_error_message() {
        unsafe {
            let mut k: *mut SlKernel = std::ptr::null_mut();
            assert_eq!(
                sl_kernel_heavy_tail(-1.0, 1.0, 1.0, 1, &mut k),
                SlStatus::InvalidArgument
            );
            let msg = CStr::from_ptr(sl_last_error_message())
                .to_string_lossy()
                .into_owned();
            assert!(msg.contains("beta"), "{msg}");

            let aniso = [1.0, 2.0, 2.0, 1.0]; // indefinite
            assert_eq!(
                sl_kernel_matrix(0.5, 1.0, aniso.as_ptr(), 2, &mut k),
                SlStatus::InvalidArgument
            );
        }
    }

    #[test]
    fn power_law_fit_through_the_abi() {
        let ts: Vec<f64> = (1..60).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * t.powf(-1.5)).collect();
        let (mut e, mut a, mut r) = (0.0, 0.0, 0.0);
        unsafe {
            assert_eq!(
                sl_fit_power_law(ts.as_ptr(), ys.as_ptr(), ts.len(), &mut e, &mut a, &mut r),
                SlStatus::Ok
            );
        }
        assert!((e + 1.5).abs() < 1e-9);
        assert!((a - 2.0).abs() < 1e-9);
    }

    #[test]
    fn run_config_from_file() {
        let dir = std::env::temp_dir().join(format!("swarmlab-capi-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("exp.toml");
        std::fs::write(
            &cfg,
            r#"
mode = "agents"

[kernel]
family = "heavy_tail"

[agents]
p = 1.0
dim = 2
n = 2
t_end = 1.0
dt = 0.01

[agents.init]
kind = "explicit"
positions = [[0.0, 0.0], [1.0, 0.0]]
velocities = [[1.0, 0.0], [-1.0, 0.0]]

[checks]
enabled = ["conservation", "riccati"]
"#,
        )
        .unwrap();
        let cfg_c = CString::new(cfg.to_str().unwrap()).unwrap();
        let out_c = CString::new(dir.join("run").to_str().unwrap()).unwrap();
        let mut ok = false;
        let status = unsafe { sl_run_config(cfg_c.as_ptr(), out_c.as_ptr(), 2, &mut ok) };
        assert_eq!(status, SlStatus::Ok);
        assert!(ok);
        assert!(dir.join("run").join("report.json").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn version_is_null_terminated() {
        let v = unsafe { CStr::from_ptr(sl_version()) };
        assert!(!v.to_bytes().is_empty());
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("swarmlab.h");
        let text = std::fs::read_to_string(header).expect("header generated at build time");
        for sym in [
            "sl_version",
            "sl_kernel_heavy_tail",
            "sl_kernel_singular",
            "sl_kernel_matrix",
            "sl_kernel_tabulated",
            "sl_kernel_free",
            "sl_kernel_evaluate",
            "sl_kernel_envelope",
            "sl_run_config",
            "sl_run_suite",
            "sl_fit_power_law",
            "sl_last_error_message",
            "SlStatus",
            "SlKernel",
        ] {
            assert!(text.contains(sym), "header missing {sym}");
        }
    }
}
