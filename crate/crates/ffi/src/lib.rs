//! C interface to the separation toolkit.
//!
//! Results live behind opaque handles that the caller frees. Every function
//! returns a [`SparsesepStatus`]; on failure [`sparsesep_last_error`] gives
//! a message for the calling thread. Matrices cross the boundary as flat
//! `double` arrays whose layout is stated per function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use sparsesep::config::{separate, Method, SeparateConfig};
use sparsesep::learn::{learn_dictionary, BlockStructure, LearnMethod, LearnParams};
use sparsesep::mixing::MixtureSet;
use sparsesep::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsesepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverError = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Sources and mixing matrix estimated by [`sparsesep_separate`].
pub struct SparsesepSeparation {
    sources: DMatrix<f64>,
    mixing: DMatrix<f64>,
    iterations: usize,
}

/// Dictionary learned by [`sparsesep_learn_dictionary`].
pub struct SparsesepDictionary {
    atoms: DMatrix<f64>,
    blocks: BlockStructure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SparsesepStatus, msg: impl Into<String>) -> SparsesepStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SparsesepStatus {
    let status = match e {
        Error::InvalidArgument(_) | Error::Dimension(_) | Error::Parse(_) => SparsesepStatus::InvalidArgument,
        _ => SparsesepStatus::SolverError,
    };
    fail(status, e.to_string())
}

/// Runs `body`, turning a panic into [`SparsesepStatus::Panic`].
fn guarded(body: impl FnOnce() -> SparsesepStatus) -> SparsesepStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SparsesepStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SparsesepStatus> {
    if p.is_null() {
        return Err(fail(SparsesepStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SparsesepStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], SparsesepStatus> {
    if p.is_null() {
        return Err(fail(SparsesepStatus::NullPointer, format!("{what} is null")));
    }
    if len == 0 {
        return Err(fail(SparsesepStatus::InvalidArgument, format!("{what} is empty")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `m` in row-major order into `buf`.
unsafe fn copy_row_major(m: &DMatrix<f64>, buf: *mut f64, len: usize) -> SparsesepStatus {
    if buf.is_null() {
        return fail(SparsesepStatus::NullPointer, "output buffer is null");
    }
    if len < m.len() {
        return fail(
            SparsesepStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", m.len()),
        );
    }
    let out = std::slice::from_raw_parts_mut(buf, m.len());
    for (dst, src) in out.iter_mut().zip(m.transpose().iter()) {
        *dst = *src;
    }
    SparsesepStatus::Ok
}

/// Message describing the last failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sparsesep_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sparsesep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Separates `m` mixture channels of `t` samples each, given row-major in
/// `data` (`m * t` values).
///
/// `method` is one of `fastica`, `mca`, `mmca`, `gmca`, `fgmca`,
/// `ksvd-mmca`, `bksvd-mmca`. `config_json` may be null for the defaults.
/// `n_sources` overrides the config when nonzero. On success `*out` owns a
/// handle to release with [`sparsesep_separation_free`].
///
/// # Safety
/// `method` and a non-null `config_json` must be NUL-terminated strings,
/// `data` must point to `m * t` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_separate(
    method: *const c_char,
    data: *const f64,
    m: usize,
    t: usize,
    n_sources: usize,
    config_json: *const c_char,
    out: *mut *mut SparsesepSeparation,
) -> SparsesepStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SparsesepStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let method: Method = match text(method, "method").map(str::parse) {
            Ok(Ok(m)) => m,
            Ok(Err(e)) => return from_error(e),
            Err(s) => return s,
        };
        let mut cfg = if config_json.is_null() {
            SeparateConfig::default()
        } else {
            match text(config_json, "config").map(SeparateConfig::from_json) {
                Ok(Ok(c)) => c,
                Ok(Err(e)) => return from_error(e),
                Err(s) => return s,
            }
        };
        if n_sources > 0 {
            cfg.n_sources = n_sources;
        }
        let Some(len) = m.checked_mul(t) else {
            return fail(SparsesepStatus::InvalidArgument, "m * t overflows");
        };
        let values = match slice(data, len, "data") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let x = MixtureSet::new(DMatrix::from_row_slice(m, t, values));
        match separate(method, &x, &cfg) {
            Ok(r) => {
                let res = r.result;
                *out = Box::into_raw(Box::new(SparsesepSeparation {
                    sources: res.s_hat.into_inner(),
                    mixing: res.a_hat.data().clone(),
                    iterations: res.iterations_run,
                }));
                SparsesepStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sizes of a separation result. Any output pointer may be null.
///
/// # Safety
/// `sep` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_separation_dims(
    sep: *const SparsesepSeparation,
    n_sources: *mut usize,
    n_channels: *mut usize,
    n_samples: *mut usize,
    iterations: *mut usize,
) -> SparsesepStatus {
    let Some(s) = sep.as_ref() else {
        return fail(SparsesepStatus::NullPointer, "separation handle is null");
    };
    for (p, v) in [
        (n_sources, s.sources.nrows()),
        (n_channels, s.mixing.nrows()),
        (n_samples, s.sources.ncols()),
        (iterations, s.iterations),
    ] {
        if !p.is_null() {
            *p = v;
        }
    }
    SparsesepStatus::Ok
}

/// Copies the estimated sources, row-major `n_sources x n_samples`.
///
/// # Safety
/// `sep` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_separation_copy_sources(
    sep: *const SparsesepSeparation,
    buf: *mut f64,
    len: usize,
) -> SparsesepStatus {
    match sep.as_ref() {
        Some(s) => copy_row_major(&s.sources, buf, len),
        None => fail(SparsesepStatus::NullPointer, "separation handle is null"),
    }
}

/// Copies the estimated mixing matrix, row-major `n_channels x n_sources`,
/// unit-norm columns.
///
/// # Safety
/// `sep` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_separation_copy_mixing(
    sep: *const SparsesepSeparation,
    buf: *mut f64,
    len: usize,
) -> SparsesepStatus {
    match sep.as_ref() {
        Some(s) => copy_row_major(&s.mixing, buf, len),
        None => fail(SparsesepStatus::NullPointer, "separation handle is null"),
    }
}

/// Releases a separation handle; null is ignored.
///
/// # Safety
/// `sep` must come from [`sparsesep_separate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_separation_free(sep: *mut SparsesepSeparation) {
    if !sep.is_null() {
        drop(Box::from_raw(sep));
    }
}

/// Learns `atoms` unit-norm atoms from `count` training signals of length
/// `dim`, stored one after another in `signals` (`dim * count` values).
///
/// `method` is `ksvd` or `sac-bksvd`. `sparsity` counts atoms per signal
/// for K-SVD and blocks per signal for block K-SVD; `block_size` bounds the
/// blocks and is ignored by K-SVD. Learning starts from the overcomplete
/// DCT, so `dim` must be a perfect square.
///
/// # Safety
/// `method` must be a NUL-terminated string, `signals` must point to
/// `dim * count` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_learn_dictionary(
    method: *const c_char,
    signals: *const f64,
    dim: usize,
    count: usize,
    atoms: usize,
    sparsity: usize,
    block_size: usize,
    iterations: usize,
    out: *mut *mut SparsesepDictionary,
) -> SparsesepStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SparsesepStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let method = match text(method, "method") {
            Ok("ksvd") => LearnMethod::Ksvd,
            Ok("sac-bksvd" | "sac_bksvd") => LearnMethod::SacBksvd,
            Ok(other) => return fail(SparsesepStatus::InvalidArgument, format!("unknown learning method '{other}'")),
            Err(s) => return s,
        };
        let Some(len) = dim.checked_mul(count) else {
            return fail(SparsesepStatus::InvalidArgument, "dim * count overflows");
        };
        let values = match slice(signals, len, "signals") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let y = DMatrix::from_column_slice(dim, count, values);
        match learn_dictionary(&y, method, &LearnParams::new(atoms, sparsity, block_size, iterations)) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(SparsesepDictionary {
                    atoms: o.state.dict.atoms().clone(),
                    blocks: o.blocks,
                }));
                SparsesepStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Signal length, atom count and block count of a dictionary. Any output
/// pointer may be null.
///
/// # Safety
/// `dict` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_dictionary_dims(
    dict: *const SparsesepDictionary,
    dim: *mut usize,
    atoms: *mut usize,
    blocks: *mut usize,
) -> SparsesepStatus {
    let Some(d) = dict.as_ref() else {
        return fail(SparsesepStatus::NullPointer, "dictionary handle is null");
    };
    for (p, v) in [(dim, d.atoms.nrows()), (atoms, d.atoms.ncols()), (blocks, d.blocks.n_blocks())] {
        if !p.is_null() {
            *p = v;
        }
    }
    SparsesepStatus::Ok
}

/// Copies the atoms one after another (`dim * atoms` values).
///
/// # Safety
/// `dict` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_dictionary_copy_atoms(
    dict: *const SparsesepDictionary,
    buf: *mut f64,
    len: usize,
) -> SparsesepStatus {
    match dict.as_ref() {
        // atom-after-atom is the row-major layout of the transpose
        Some(d) => copy_row_major(&d.atoms.transpose(), buf, len),
        None => fail(SparsesepStatus::NullPointer, "dictionary handle is null"),
    }
}

/// Block index of `atom`.
///
/// # Safety
/// `dict` must be a live handle and `block` writable.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_dictionary_block_of(
    dict: *const SparsesepDictionary,
    atom: usize,
    block: *mut usize,
) -> SparsesepStatus {
    let Some(d) = dict.as_ref() else {
        return fail(SparsesepStatus::NullPointer, "dictionary handle is null");
    };
    if block.is_null() {
        return fail(SparsesepStatus::NullPointer, "block is null");
    }
    if atom >= d.blocks.n_atoms() {
        return fail(SparsesepStatus::InvalidArgument, format!("atom {atom} out of range"));
    }
    *block = d.blocks.block_of(atom);
    SparsesepStatus::Ok
}

/// Releases a dictionary handle; null is ignored.
///
/// # Safety
/// `dict` must come from [`sparsesep_learn_dictionary`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn sparsesep_dictionary_free(dict: *mut SparsesepDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}
