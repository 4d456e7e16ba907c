//! C ABI over `attnmle`.
//!
//! Sequences and models are opaque heap handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`AttnStatus`]; on failure `attn_last_error_message` describes the error
//! for the calling thread. Vectors cross the boundary as `(pointer, length)`
//! pairs of `double`; `T x d` matrices are row-major. Indices are 0-based.
//!
//! Output buffers must be at least as long as the result; a shorter buffer
//! yields `ATTN_STATUS_BUFFER_TOO_SMALL` and leaves the buffer untouched.

use std::cell::RefCell;
use std::ffi::{CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::ptr;

use attnmle::{
    AttentionConfig, Error, GaussianAttentionModel, KeyValueSequence, MaxEntAttentionModel,
    RealVector,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttnStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    EmptySequence = 3,
    NonFiniteInput = 4,
    ZeroVector = 5,
    IndexOutOfRange = 6,
    Overflow = 7,
    InvalidParameter = 8,
    DidNotConverge = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for AttnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => AttnStatus::DimensionMismatch,
            Error::EmptySequence => AttnStatus::EmptySequence,
            Error::NonFiniteInput => AttnStatus::NonFiniteInput,
            Error::ZeroVector => AttnStatus::ZeroVector,
            Error::IndexOutOfRange { .. } => AttnStatus::IndexOutOfRange,
            Error::Overflow { .. } => AttnStatus::Overflow,
            Error::InvalidParameter { .. } => AttnStatus::InvalidParameter,
            Error::DidNotConverge { .. } => AttnStatus::DidNotConverge,
        }
    }
}

/// Key/value sequence handle.
pub struct AttnSequence(KeyValueSequence);

/// Gaussian attention model handle.
pub struct AttnGaussianModel(GaussianAttentionModel);

/// Maximum-entropy model handle.
pub struct AttnMaxEntModel(MaxEntAttentionModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(AttnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(AttnStatus::from(&e), e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> AttnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AttnStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            AttnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AttnStatus::NullPointer, format!("`{what}` is NULL"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn vector(ptr: *const f64, len: usize, what: &str) -> FfiResult<RealVector> {
    Ok(RealVector::try_from(unsafe { slice(ptr, len, what)? })?)
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> FfiResult<&'a T> {
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write_out(src: &[f64], out: *mut f64, out_len: usize) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < src.len() {
        return Err(Failure(
            AttnStatus::BufferTooSmall,
            format!("output buffer holds {out_len} values, {} needed", src.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

unsafe fn write_scalar<T>(value: T, out: *mut T) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn attn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `x` and `y` must each point to `len` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_inner_product(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe {
        let x = vector(x, len, "x")?;
        let y = vector(y, len, "y")?;
        write_scalar(attnmle::inner_product(&x, &y)?, out)
    })
}

/// # Safety
/// `logits` must point to `len` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_softmax(
    logits: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe {
        let logits = vector(logits, len, "logits")?;
        write_out(attnmle::softmax(&logits).as_slice(), out, out_len)
    })
}

/// Builds a sequence from row-major `len x dim` key and value matrices.
///
/// # Safety
/// `keys` and `values` must each point to `len * dim` doubles; `out` must be
/// a valid location for the new handle.
#[no_mangle]
pub unsafe extern "C" fn attn_sequence_new(
    keys: *const f64,
    values: *const f64,
    len: usize,
    dim: usize,
    out: *mut *mut AttnSequence,
) -> AttnStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = len.checked_mul(dim).ok_or(Error::EmptySequence)?;
        let keys = slice(keys, n, "keys")?;
        let values = slice(values, n, "values")?;
        let seq = KeyValueSequence::from_rows(keys, values, len, dim)?;
        out.write(Box::into_raw(Box::new(AttnSequence(seq))));
        Ok(())
    })
}

/// # Safety
/// `seq` must be NULL or a handle from `attn_sequence_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn attn_sequence_free(seq: *mut AttnSequence) {
    if !seq.is_null() {
        drop(unsafe { Box::from_raw(seq) });
    }
}

/// Sequence length `T`, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn attn_sequence_len(seq: *const AttnSequence) -> usize {
    unsafe { seq.as_ref() }.map_or(0, |s| s.0.len())
}

/// Vector dimension `d`, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn attn_sequence_dim(seq: *const AttnSequence) -> usize {
    unsafe { seq.as_ref() }.map_or(0, |s| s.0.dim())
}

/// Softmax weights `w_i(q)`; writes `T` values.
///
/// # Safety
/// `seq` must be a live handle, `query` must point to `dim` doubles and
/// `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_attention_weights(
    seq: *const AttnSequence,
    query: *const f64,
    dim: usize,
    alpha: f64,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe {
        let seq = handle(seq, "seq")?;
        let q = vector(query, dim, "query")?;
        let cfg = AttentionConfig::new(alpha)?;
        let w = attnmle::attention_weights(&q, seq.0.keys(), &cfg)?;
        write_out(w.as_slice(), out, out_len)
    })
}

/// Context vector `Σ_i w_i(q) v_i`; writes `d` values.
///
/// # Safety
/// As for `attn_attention_weights`.
#[no_mangle]
pub unsafe extern "C" fn attn_context_vector(
    seq: *const AttnSequence,
    query: *const f64,
    dim: usize,
    alpha: f64,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe {
        let seq = handle(seq, "seq")?;
        let q = vector(query, dim, "query")?;
        let cfg = AttentionConfig::new(alpha)?;
        let c = attnmle::context_vector(&q, &seq.0, &cfg)?;
        write_out(c.as_slice(), out, out_len)
    })
}

/// Self-attention over `T` row-major queries; writes `T * d` values and the
/// number of inner products evaluated (`T²`).
///
/// # Safety
/// `queries` must point to `num_queries * dim` doubles, `out` to `out_len`
/// doubles and `inner_products` to one `uint64_t` (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn attn_self_attention(
    seq: *const AttnSequence,
    queries: *const f64,
    num_queries: usize,
    dim: usize,
    alpha: f64,
    out: *mut f64,
    out_len: usize,
    inner_products: *mut u64,
) -> AttnStatus {
    guard(|| unsafe {
        let seq = handle(seq, "seq")?;
        if dim == 0 {
            return Err(Error::EmptySequence.into());
        }
        let n = num_queries.checked_mul(dim).ok_or(Error::EmptySequence)?;
        let rows = slice(queries, n, "queries")?
            .chunks_exact(dim)
            .map(RealVector::try_from)
            .collect::<attnmle::Result<Vec<_>>>()?;
        let cfg = AttentionConfig::new(alpha)?;
        let result = attnmle::self_attention(&rows, &seq.0, &cfg)?;
        let flat: Vec<f64> = result.rows.iter().flat_map(|r| r.iter().copied()).collect();
        write_out(&flat, out, out_len)?;
        if !inner_products.is_null() {
            inner_products.write(result.inner_products);
        }
        Ok(())
    })
}

/// # Safety
/// `seq` must be a live handle (it is copied, not retained), `query` must
/// point to `dim` doubles and `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_new(
    alpha: f64,
    beta: f64,
    query: *const f64,
    dim: usize,
    seq: *const AttnSequence,
    out: *mut *mut AttnGaussianModel,
) -> AttnStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        let seq = handle(seq, "seq")?;
        let q = vector(query, dim, "query")?;
        let model = GaussianAttentionModel::new(alpha, beta, q, seq.0.clone())?;
        out.write(Box::into_raw(Box::new(AttnGaussianModel(model))));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle from `attn_gaussian_new`.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_free(model: *mut AttnGaussianModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// `θ(i, q) = exp(α qᵗk_i)`.
///
/// # Safety
/// `model` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_precision(
    model: *const AttnGaussianModel,
    i: usize,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe { write_scalar(handle(model, "model")?.0.precision(i)?, out) })
}

/// # Safety
/// `model` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_log_density(
    model: *const AttnGaussianModel,
    i: usize,
    coord: usize,
    v: f64,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe { write_scalar(handle(model, "model")?.0.log_density(i, coord, v)?, out) })
}

/// # Safety
/// `v` must point to `dim` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_log_likelihood(
    model: *const AttnGaussianModel,
    v: *const f64,
    dim: usize,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe {
        let m = handle(model, "model")?;
        write_scalar(m.0.log_likelihood(&vector(v, dim, "v")?)?, out)
    })
}

/// Gradient of the log-likelihood at `v`; writes `d` values.
///
/// # Safety
/// `v` must point to `dim` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_gradient(
    model: *const AttnGaussianModel,
    v: *const f64,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe {
        let m = handle(model, "model")?;
        let g = m.0.log_likelihood_gradient(&vector(v, dim, "v")?)?;
        write_out(g.as_slice(), out, out_len)
    })
}

/// Closed-form maximum-likelihood estimate; writes `d` values.
///
/// # Safety
/// `model` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_closed_form(
    model: *const AttnGaussianModel,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe { write_out(handle(model, "model")?.0.closed_form_mle().as_slice(), out, out_len) })
}

/// Gradient-ascent estimate from `init`; writes `d` values and, if
/// `iterations` is non-NULL, the iteration count.
///
/// # Safety
/// `init` must point to `dim` doubles, `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_gaussian_numerical(
    model: *const AttnGaussianModel,
    init: *const f64,
    dim: usize,
    tol: f64,
    max_iters: usize,
    out: *mut f64,
    out_len: usize,
    iterations: *mut usize,
) -> AttnStatus {
    guard(|| unsafe {
        let m = handle(model, "model")?;
        let ascent = m.0.numerical_mle(&vector(init, dim, "init")?, tol, max_iters)?;
        write_out(ascent.estimate.as_slice(), out, out_len)?;
        if !iterations.is_null() {
            iterations.write(ascent.iterations);
        }
        Ok(())
    })
}

/// # Safety
/// `lambdas` must point to `len` doubles, `query` to `dim` doubles; `seq`
/// must be a live handle whose keys are used (copied).
#[no_mangle]
pub unsafe extern "C" fn attn_maxent_new(
    lambdas: *const f64,
    len: usize,
    query: *const f64,
    dim: usize,
    seq: *const AttnSequence,
    out: *mut *mut AttnMaxEntModel,
) -> AttnStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        let seq = handle(seq, "seq")?;
        let lambdas = slice(lambdas, len, "lambdas")?.to_vec();
        let q = vector(query, dim, "query")?;
        let model = MaxEntAttentionModel::new(lambdas, q, seq.0.keys().to_vec())?;
        out.write(Box::into_raw(Box::new(AttnMaxEntModel(model))));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle from `attn_maxent_new`.
#[no_mangle]
pub unsafe extern "C" fn attn_maxent_free(model: *mut AttnMaxEntModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// `p(y | q)` for every key index; writes `T` values.
///
/// # Safety
/// `model` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn attn_maxent_probability(
    model: *const AttnMaxEntModel,
    out: *mut f64,
    out_len: usize,
) -> AttnStatus {
    guard(|| unsafe {
        let p = handle(model, "model")?.0.conditional_probability()?;
        write_out(p.as_slice(), out, out_len)
    })
}

/// `f_i(q, y)`.
///
/// # Safety
/// `model` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_maxent_feature(
    model: *const AttnMaxEntModel,
    i: usize,
    y: usize,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe { write_scalar(handle(model, "model")?.0.feature(i, y)?, out) })
}

/// `E_p[f_i]`.
///
/// # Safety
/// `model` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn attn_maxent_expected_feature(
    model: *const AttnMaxEntModel,
    i: usize,
    out: *mut f64,
) -> AttnStatus {
    guard(|| unsafe { write_scalar(handle(model, "model")?.0.expected_feature(i)?, out) })
}
