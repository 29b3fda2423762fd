//! C ABI for the ssmrot toolkit: opaque handles, status codes, and flat
//! array outputs so other languages can drive the model → equilibrium →
//! SSM → backbone/FRC pipeline. The generated header lives in
//! `include/ssmrot.h` (regenerated by the build script).
//!
//! Conventions: every function returns `SsmrotStatus`; outputs go through
//! pointers; handles are freed with the matching `_free`; string and array
//! buffers are caller-allocated. `ssmrot_last_error` returns a
//! thread-local, NUL-terminated description of the most recent failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ssmrot::model::beam::{build_rotating_beam, BeamSpec};
use ssmrot::model::io::load_tensor_model;
use ssmrot::model::{
    apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec,
    EquilibriumOptions, SecondOrderModel, ShiftedModel, TangentMethod,
};
use ssmrot::reduced::backbone::backbone;
use ssmrot::reduced::continuation::{continue_frc, FrcOptions};
use ssmrot::spectral::{select_master, solve_spectrum, to_first_order, FirstOrderSystem, MasterSelection};
use ssmrot::ssm::{compute_autonomous_ssm, serialize as ssm_serialize, SSMModel, SsmOptions};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmrotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Computation = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque second-order model handle.
pub struct SsmrotModel {
    model: SecondOrderModel,
}

/// Opaque reduced-order model handle: the shifted system, its first-order
/// embedding, and the autonomous SSM expansion.
pub struct SsmrotRom {
    shifted: ShiftedModel,
    sys: FirstOrderSystem,
    ssm: SSMModel,
}

/// Rotating-cantilever parameters (mirrors the beam builder).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsmrotBeamParams {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub youngs_modulus: f64,
    pub poisson: f64,
    pub density: f64,
    pub hub_offset: f64,
    pub spin_speed: f64,
    pub n_elements: u32,
    pub tip_spring_stiffness: f64,
    pub include_coriolis: bool,
    pub asymmetry_preload: f64,
}

/// Reduction parameters. Set `damping_xi1` or `damping_alpha` to a negative
/// value to disable that entry (both negative = undamped); `n_master_pairs`
/// of 0 selects resonant pairs automatically.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsmrotReduceParams {
    pub order: u32,
    pub damping_xi1: f64,
    pub damping_alpha: f64,
    pub n_master_pairs: u32,
    pub inner_tol: f64,
    pub ext_tol: f64,
}

fn guard<F: FnOnce() -> SsmrotStatus>(f: F) -> SsmrotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SsmrotStatus::Panic
        }
    }
}

/// Library version string (static storage).
#[no_mangle]
pub extern "C" fn ssmrot_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Thread-local description of the last error.
#[no_mangle]
pub extern "C" fn ssmrot_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a rotating cantilever model.
///
/// # Safety
/// `params` and `out` must be valid pointers; `*out` receives an owned
/// handle to release with [`ssmrot_model_free`].
#[no_mangle]
pub unsafe extern "C" fn ssmrot_model_beam(
    params: *const SsmrotBeamParams,
    out: *mut *mut SsmrotModel,
) -> SsmrotStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let p = unsafe { &*params };
        let spec = BeamSpec {
            length: p.length,
            width: p.width,
            thickness: p.thickness,
            youngs_modulus: p.youngs_modulus,
            poisson: p.poisson,
            density: p.density,
            hub_offset: p.hub_offset,
            spin_speed: p.spin_speed,
            n_elements: p.n_elements as usize,
            tip_spring_stiffness: p.tip_spring_stiffness,
            include_coriolis: p.include_coriolis,
            asymmetry_preload: p.asymmetry_preload,
        };
        match build_rotating_beam(&spec) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(SsmrotModel { model })) };
                SsmrotStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SsmrotStatus::InvalidArgument
            }
        }
    })
}

/// Load a tensor-backed model from a JSON manifest path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in
/// [`ssmrot_model_beam`].
#[no_mangle]
pub unsafe extern "C" fn ssmrot_model_load_manifest(
    path: *const c_char,
    out: *mut *mut SsmrotModel,
) -> SsmrotStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let cpath = unsafe { CStr::from_ptr(path) };
        let Ok(path_str) = cpath.to_str() else {
            set_error("path is not valid UTF-8");
            return SsmrotStatus::InvalidArgument;
        };
        match load_tensor_model(Path::new(path_str)) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(SsmrotModel { model })) };
                SsmrotStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SsmrotStatus::Io
            }
        }
    })
}

/// # Safety
/// `model` must come from a ssmrot constructor (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn ssmrot_model_free(model: *mut SsmrotModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of displacement DOFs, 0 on null input.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_model_dofs(model: *const SsmrotModel) -> usize {
    if model.is_null() {
        0
    } else {
        unsafe { &*model }.model.n
    }
}

/// Solve the equilibrium, shift, eigenanalyze, and expand the SSM.
///
/// # Safety
/// `model`, `params`, `out` must be valid; `*out` receives an owned handle
/// for [`ssmrot_rom_free`].
#[no_mangle]
pub unsafe extern "C" fn ssmrot_reduce(
    model: *const SsmrotModel,
    params: *const SsmrotReduceParams,
    out: *mut *mut SsmrotRom,
) -> SsmrotStatus {
    guard(|| {
        if model.is_null() || params.is_null() || out.is_null() {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let m = unsafe { &*model };
        let p = unsafe { &*params };
        if p.order < 2 {
            set_error("order must be at least 2");
            return SsmrotStatus::InvalidArgument;
        }
        let result = (|| -> ssmrot::Result<SsmrotRom> {
            let u0 = solve_static_equilibrium(&m.model, &EquilibriumOptions::default())?;
            let mut shifted = shift_to_equilibrium(&m.model, &u0, TangentMethod::Auto)?;
            let damping = if p.damping_alpha >= 0.0 {
                DampingSpec::Alpha(p.damping_alpha)
            } else if p.damping_xi1 >= 0.0 {
                DampingSpec::Xi1(p.damping_xi1)
            } else {
                DampingSpec::None
            };
            apply_damping(&mut shifted, damping)?;
            let sys = to_first_order(&shifted)?;
            let k = 12.min(sys.dim());
            let spectrum = solve_spectrum(&sys, k)?;
            let selection = if p.n_master_pairs == 0 {
                MasterSelection::default()
            } else {
                MasterSelection::Pairs((0..p.n_master_pairs as usize).collect())
            };
            let master = select_master(&spectrum, &selection)?;
            let opts = SsmOptions {
                inner_tol: if p.inner_tol > 0.0 { p.inner_tol } else { 0.05 },
                inner_tol_floor: 1e-3,
                ext_tol: if p.ext_tol > 0.0 { p.ext_tol } else { 0.1 },
            };
            let ssm = compute_autonomous_ssm(&sys, &master, p.order, &opts)?;
            Ok(SsmrotRom { shifted, sys, ssm })
        })();
        match result {
            Ok(rom) => {
                unsafe { *out = Box::into_raw(Box::new(rom)) };
                SsmrotStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SsmrotStatus::Computation
            }
        }
    })
}

/// # Safety
/// `rom` must come from [`ssmrot_reduce`] (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_free(rom: *mut SsmrotRom) {
    if !rom.is_null() {
        drop(unsafe { Box::from_raw(rom) });
    }
}

/// Expansion order of the ROM, 0 on null input.
///
/// # Safety
/// `rom` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_order(rom: *const SsmrotRom) -> u32 {
    if rom.is_null() {
        0
    } else {
        unsafe { &*rom }.ssm.order
    }
}

/// Master-subspace linear frequencies [rad/s]. Writes up to `cap` values
/// and stores the available count in `n_out`.
///
/// # Safety
/// `rom` live; `freqs` points to `cap` doubles; `n_out` valid.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_frequencies(
    rom: *const SsmrotRom,
    freqs: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> SsmrotStatus {
    guard(|| {
        if rom.is_null() || n_out.is_null() || (cap > 0 && freqs.is_null()) {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let r = unsafe { &*rom };
        let n = r.ssm.master.n_pairs();
        unsafe { *n_out = n };
        if cap < n {
            set_error("frequency buffer too small");
            return SsmrotStatus::BufferTooSmall;
        }
        for (i, pair) in r.ssm.master.pairs.iter().enumerate() {
            unsafe { *freqs.add(i) = pair.lambda.im };
        }
        SsmrotStatus::Ok
    })
}

/// Backbone curve on a uniform reduced-amplitude grid: fills `n` entries of
/// (rho, response frequency [rad/s], physical amplitude at the model's
/// first output DOF).
///
/// # Safety
/// `rom` live; `rho`, `omega`, `amp` point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_backbone(
    rom: *const SsmrotRom,
    rho_max: f64,
    n: usize,
    rho: *mut f64,
    omega: *mut f64,
    amp: *mut f64,
) -> SsmrotStatus {
    guard(|| {
        if rom.is_null() || rho.is_null() || omega.is_null() || amp.is_null() {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        if n == 0 || rho_max <= 0.0 {
            set_error("need n > 0 and rho_max > 0");
            return SsmrotStatus::InvalidArgument;
        }
        let r = unsafe { &*rom };
        let out_dof = r
            .shifted
            .model
            .output_dofs
            .first()
            .map(|d| d.index)
            .unwrap_or(0);
        let grid: Vec<f64> = (1..=n).map(|i| rho_max * i as f64 / n as f64).collect();
        match backbone(&r.ssm, &grid, out_dof) {
            Ok(curve) => {
                for (i, pt) in curve.points.iter().enumerate() {
                    unsafe {
                        *rho.add(i) = pt.rho;
                        *omega.add(i) = pt.omega_hat;
                        *amp.add(i) = pt.amplitude;
                    }
                }
                SsmrotStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SsmrotStatus::Computation
            }
        }
    })
}

/// Forced response curve over [omega_lo, omega_hi] at forcing scale `eps`.
/// Writes up to `cap` points of (Ω, amplitude at the first output DOF,
/// stability flag) and stores the produced count in `n_out`. Returns
/// `BufferTooSmall` (with `n_out` set) when the branch holds more points
/// than `cap`.
///
/// # Safety
/// `rom` live; `omega`, `amp` point to `cap` doubles; `stable` to `cap`
/// int32; `n_out` valid.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_frc(
    rom: *const SsmrotRom,
    omega_lo: f64,
    omega_hi: f64,
    eps: f64,
    cap: usize,
    omega: *mut f64,
    amp: *mut f64,
    stable: *mut i32,
    n_out: *mut usize,
) -> SsmrotStatus {
    guard(|| {
        if rom.is_null() || omega.is_null() || amp.is_null() || stable.is_null() || n_out.is_null()
        {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let r = unsafe { &*rom };
        let frc = match continue_frc(
            &r.sys,
            &r.ssm,
            eps,
            (omega_lo, omega_hi),
            &r.shifted.model.output_dofs,
            &FrcOptions::default(),
        ) {
            Ok(f) => f,
            Err(e) => {
                set_error(&e.to_string());
                return SsmrotStatus::Computation;
            }
        };
        unsafe { *n_out = frc.points.len() };
        if frc.points.len() > cap {
            set_error("FRC buffer too small");
            return SsmrotStatus::BufferTooSmall;
        }
        for (i, pt) in frc.points.iter().enumerate() {
            unsafe {
                *omega.add(i) = pt.omega;
                *amp.add(i) = pt.amplitudes.first().copied().unwrap_or(f64::NAN);
                *stable.add(i) = if pt.stable { 1 } else { 0 };
            }
        }
        SsmrotStatus::Ok
    })
}

/// Serialize the ROM to ssm.json at `path`.
///
/// # Safety
/// `rom` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ssmrot_rom_save_json(
    rom: *const SsmrotRom,
    path: *const c_char,
) -> SsmrotStatus {
    guard(|| {
        if rom.is_null() || path.is_null() {
            set_error("null pointer");
            return SsmrotStatus::NullPointer;
        }
        let r = unsafe { &*rom };
        let cpath = unsafe { CStr::from_ptr(path) };
        let Ok(path_str) = cpath.to_str() else {
            set_error("path is not valid UTF-8");
            return SsmrotStatus::InvalidArgument;
        };
        let hash = ssmrot::pipeline::model_hash(&r.shifted.model);
        match ssm_serialize::to_json(&r.ssm, &hash)
            .and_then(|text| Ok(std::fs::write(path_str, text)?))
        {
            Ok(()) => SsmrotStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                SsmrotStatus::Io
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam_params() -> SsmrotBeamParams {
        SsmrotBeamParams {
            length: 1.0,
            width: 0.03,
            thickness: 0.02,
            youngs_modulus: 104e9,
            poisson: 0.3,
            density: 4400.0,
            hub_offset: 0.1,
            spin_speed: 104.7,
            n_elements: 6,
            tip_spring_stiffness: 0.0,
            include_coriolis: true,
            asymmetry_preload: 0.0,
        }
    }

    #[test]
    fn beam_roundtrip_through_the_c_abi() {
        unsafe {
            let mut model: *mut SsmrotModel = std::ptr::null_mut();
            let st = ssmrot_model_beam(&beam_params(), &mut model);
            assert_eq!(st, SsmrotStatus::Ok);
            assert_eq!(ssmrot_model_dofs(model), 18);

            let rp = SsmrotReduceParams {
                order: 3,
                damping_xi1: 0.001,
                damping_alpha: -1.0,
                n_master_pairs: 1,
                inner_tol: 0.05,
                ext_tol: 0.1,
            };
            let mut rom: *mut SsmrotRom = std::ptr::null_mut();
            let st = ssmrot_reduce(model, &rp, &mut rom);
            assert_eq!(st, SsmrotStatus::Ok, "{:?}", CStr::from_ptr(ssmrot_last_error()));
            assert_eq!(ssmrot_rom_order(rom), 3);

            let mut freqs = [0.0_f64; 4];
            let mut nf = 0usize;
            let st = ssmrot_rom_frequencies(rom, freqs.as_mut_ptr(), 4, &mut nf);
            assert_eq!(st, SsmrotStatus::Ok);
            assert_eq!(nf, 1);
            assert!(freqs[0] > 0.0);

            let n = 8usize;
            let mut rho = vec![0.0; n];
            let mut om = vec![0.0; n];
            let mut am = vec![0.0; n];
            let st =
                ssmrot_rom_backbone(rom, 0.5, n, rho.as_mut_ptr(), om.as_mut_ptr(), am.as_mut_ptr());
            assert_eq!(st, SsmrotStatus::Ok);
            assert!(om[0] > 0.0 && am[n - 1] > 0.0);

            ssmrot_rom_free(rom);
            ssmrot_model_free(model);
        }
    }

    #[test]
    fn null_inputs_are_rejected() {
        unsafe {
            let mut model: *mut SsmrotModel = std::ptr::null_mut();
            assert_eq!(
                ssmrot_model_beam(std::ptr::null(), &mut model),
                SsmrotStatus::NullPointer
            );
            assert_eq!(ssmrot_model_dofs(std::ptr::null()), 0);
            ssmrot_model_free(std::ptr::null_mut());
            ssmrot_rom_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn bad_spec_reports_error_string() {
        unsafe {
            let mut p = beam_params();
            p.n_elements = 1;
            let mut model: *mut SsmrotModel = std::ptr::null_mut();
            let st = ssmrot_model_beam(&p, &mut model);
            assert_eq!(st, SsmrotStatus::InvalidArgument);
            let msg = CStr::from_ptr(ssmrot_last_error()).to_string_lossy().into_owned();
            assert!(msg.contains("n_elements"), "message: {msg}");
        }
    }
}
