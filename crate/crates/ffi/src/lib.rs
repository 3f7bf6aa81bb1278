//! C ABI over `featsel`.
//!
//! Objects are opaque handles created by `fs_*` constructors and released
//! with the matching `*_free`. Every fallible function returns an
//! [`FsStatus`]; on failure a message is available from
//! [`fs_last_error_message`] on the same thread until the next failing call.
//! Panics never cross the boundary and are reported as `FS_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use featsel::dataset::{self, Dataset};
use featsel::evaluation::Method;
use featsel::filter::{rank_top_k, FeatureScores};
use featsel::stats::{self, FriedmanReport, ResultMatrix};
use featsel::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Structure = 5,
    Argument = 6,
    Config = 7,
    Domain = 8,
    Io = 9,
    Run = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque dataset handle.
pub struct FsDataset(Dataset);

/// Opaque Friedman test result.
pub struct FsFriedman(FriedmanReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FsStatus {
    match e {
        Error::Parse { .. } => FsStatus::Parse,
        Error::Validation(_) => FsStatus::Validation,
        Error::Structure(_) => FsStatus::Structure,
        Error::Argument(_) => FsStatus::Argument,
        Error::Config(_) => FsStatus::Config,
        Error::Domain(_) => FsStatus::Domain,
        Error::Io { .. } => FsStatus::Io,
        Error::Run { .. } => FsStatus::Run,
    }
}

struct Failure(FsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_last_error(format!("panic: {message}"));
            FsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FsStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FsStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn need_len(have: usize, need: usize, what: &str) -> FfiResult {
    if have < need {
        return Err(Failure(
            FsStatus::BufferTooSmall,
            format!("`{what}` holds {have} elements, {need} required"),
        ));
    }
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV dataset (header row, class in the last column).
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_load_csv(path: *const c_char, out: *mut *mut FsDataset) -> FsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_ptr(out, "out")?;
        let ds = dataset::load_csv(path)?;
        *out = Box::into_raw(Box::new(FsDataset(ds)));
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_free(ds: *mut FsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Writes sample, feature and class counts. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_dims(
    ds: *const FsDataset,
    n_samples: *mut usize,
    n_features: *mut usize,
    n_classes: *mut usize,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        if let Some(p) = n_samples.as_mut() {
            *p = ds.n_samples();
        }
        if let Some(p) = n_features.as_mut() {
            *p = ds.n_features();
        }
        if let Some(p) = n_classes.as_mut() {
            *p = ds.n_classes();
        }
        Ok(())
    })
}

/// Copies feature `index`'s name into `buf` with a terminating nul.
/// `required` (optional) receives the needed size including the nul; a
/// short buffer yields `FS_STATUS_BUFFER_TOO_SMALL`.
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_feature_name(
    ds: *const FsDataset,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    required: *mut usize,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let name = ds.feature_names().get(index).ok_or_else(|| {
            Failure(
                FsStatus::Argument,
                format!("feature index {index} outside [0, {})", ds.n_features()),
            )
        })?;
        let bytes = name.as_bytes();
        if let Some(r) = required.as_mut() {
            *r = bytes.len() + 1;
        }
        need_len(buf_len, bytes.len() + 1, "buf")?;
        let out = slice_out(buf.cast::<u8>(), buf_len, "buf")?;
        out[..bytes.len()].copy_from_slice(bytes);
        out[bytes.len()] = 0;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fs_dataset_export_csv(ds: *const FsDataset, path: *const c_char) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        dataset::export_csv(ds, str_arg(path, "path")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fs_dataset_export_arff(
    ds: *const FsDataset,
    relation: *const c_char,
    path: *const c_char,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        dataset::export_arff(ds, str_arg(relation, "relation")?, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Equal-width discretization into `bins` codes per feature; a new handle.
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_discretize(
    ds: *const FsDataset,
    bins: usize,
    out: *mut *mut FsDataset,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let out = out_ptr(out, "out")?;
        let coded = dataset::discretize_equal_width(ds, bins)?;
        *out = Box::into_raw(Box::new(FsDataset(coded)));
        Ok(())
    })
}

/// Keeps the listed feature columns, in the given order; a new handle.
#[no_mangle]
pub unsafe extern "C" fn fs_dataset_reduce(
    ds: *const FsDataset,
    indices: *const usize,
    n_indices: usize,
    out: *mut *mut FsDataset,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let indices = slice_arg(indices, n_indices, "indices")?;
        let out = out_ptr(out, "out")?;
        let reduced = dataset::reduce_to_features(ds, indices)?;
        *out = Box::into_raw(Box::new(FsDataset(reduced)));
        Ok(())
    })
}

/// Scores every feature with a named method using its default parameters.
/// Larger scores are better. `scores_len` must be at least the feature
/// count. Subset-search methods (mrmr, sfs, sbs, ga) have no score vector
/// and yield `FS_STATUS_ARGUMENT`.
#[no_mangle]
pub unsafe extern "C" fn fs_score(
    ds: *const FsDataset,
    method: *const c_char,
    seed: u64,
    scores: *mut f64,
    scores_len: usize,
) -> FsStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let name = str_arg(method, "method")?;
        let method = Method::from_name(name)?;
        need_len(scores_len, ds.n_features(), "scores")?;
        let out = slice_out(scores, scores_len, "scores")?;
        let result = method.score(ds, seed)?.ok_or_else(|| {
            Failure(
                FsStatus::Argument,
                format!("method `{name}` selects subsets and has no score vector"),
            )
        })?;
        for (slot, &s) in out.iter_mut().zip(&result.scores) {
            *slot = if result.higher_is_better { s } else { -s };
        }
        Ok(())
    })
}

/// Indices of the `k` best scores (larger is better, ties to lower index).
#[no_mangle]
pub unsafe extern "C" fn fs_rank_top_k(
    scores: *const f64,
    n_scores: usize,
    k: usize,
    out_indices: *mut usize,
    out_len: usize,
) -> FsStatus {
    guard(|| {
        let scores = slice_arg(scores, n_scores, "scores")?;
        need_len(out_len, k, "out_indices")?;
        let out = slice_out(out_indices, out_len, "out_indices")?;
        let ranked = rank_top_k(&FeatureScores::new("external", scores.to_vec()), k)?;
        out[..k].copy_from_slice(&ranked);
        Ok(())
    })
}

/// Friedman test on a row-major `n_datasets x n_methods` matrix. `alphas`
/// may be null with `n_alphas == 0` to use 0.01, 0.05 and 0.1.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman(
    values: *const f64,
    n_datasets: usize,
    n_methods: usize,
    lower_is_better: c_int,
    alphas: *const f64,
    n_alphas: usize,
    out: *mut *mut FsFriedman,
) -> FsStatus {
    guard(|| {
        let total = n_datasets.checked_mul(n_methods).ok_or_else(|| {
            Failure(FsStatus::Argument, "matrix dimensions overflow".to_owned())
        })?;
        let values = slice_arg(values, total, "values")?;
        let alphas = slice_arg(alphas, n_alphas, "alphas")?;
        let out = out_ptr(out, "out")?;
        let rows: Vec<Vec<f64>> = if n_methods == 0 {
            Vec::new()
        } else {
            values.chunks(n_methods).map(<[f64]>::to_vec).collect()
        };
        let matrix = ResultMatrix::new(
            (1..=n_methods).map(|j| format!("method{j}")).collect(),
            (1..=n_datasets).map(|i| format!("dataset{i}")).collect(),
            rows,
            lower_is_better != 0,
        )?;
        let alphas = if alphas.is_empty() {
            &stats::DEFAULT_ALPHAS[..]
        } else {
            alphas
        };
        let report = stats::friedman_test(&matrix, alphas)?;
        *out = Box::into_raw(Box::new(FsFriedman(report)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fs_friedman_free(report: *mut FsFriedman) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Chi-square, Iman-Davenport F (may be +infinity), whether F is infinite,
/// and both degrees of freedom. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman_statistics(
    report: *const FsFriedman,
    chi_square: *mut f64,
    f_statistic: *mut f64,
    f_is_infinite: *mut c_int,
    dof1: *mut usize,
    dof2: *mut usize,
) -> FsStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        if let Some(p) = chi_square.as_mut() {
            *p = r.chi_square;
        }
        if let Some(p) = f_statistic.as_mut() {
            *p = r.iman_davenport_f;
        }
        if let Some(p) = f_is_infinite.as_mut() {
            *p = c_int::from(r.f_is_infinite);
        }
        if let Some(p) = dof1.as_mut() {
            *p = r.dof1;
        }
        if let Some(p) = dof2.as_mut() {
            *p = r.dof2;
        }
        Ok(())
    })
}

/// Copies the average ranks (one per method) into `out`.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman_average_ranks(
    report: *const FsFriedman,
    out: *mut f64,
    out_len: usize,
) -> FsStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        need_len(out_len, r.average_ranks.len(), "out")?;
        let out = slice_out(out, out_len, "out")?;
        out[..r.average_ranks.len()].copy_from_slice(&r.average_ranks);
        Ok(())
    })
}

/// Index of the method with the smallest average rank.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman_best_method(report: *const FsFriedman, out: *mut usize) -> FsStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        *out_ptr(out, "out")? = r.best_method;
        Ok(())
    })
}

/// Number of significance levels in the report.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman_n_levels(report: *const FsFriedman, out: *mut usize) -> FsStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        *out_ptr(out, "out")? = r.entries.len();
        Ok(())
    })
}

/// Significance level `index`: alpha, F and chi-square critical values and
/// the verdict (1 significant, 0 not). Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn fs_friedman_level(
    report: *const FsFriedman,
    index: usize,
    alpha: *mut f64,
    f_critical: *mut f64,
    chi_critical: *mut f64,
    significant: *mut c_int,
) -> FsStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let e = r.entries.get(index).ok_or_else(|| {
            Failure(
                FsStatus::Argument,
                format!("level index {index} outside [0, {})", r.entries.len()),
            )
        })?;
        if let Some(p) = alpha.as_mut() {
            *p = e.alpha;
        }
        if let Some(p) = f_critical.as_mut() {
            *p = e.f_critical;
        }
        if let Some(p) = chi_critical.as_mut() {
            *p = e.chi_critical;
        }
        if let Some(p) = significant.as_mut() {
            *p = c_int::from(e.significant);
        }
        Ok(())
    })
}

/// Upper-tail critical value of F(d1, d2) at level `alpha`.
#[no_mangle]
pub unsafe extern "C" fn fs_f_critical_value(d1: usize, d2: usize, alpha: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = stats::f_critical_value(d1, d2, alpha)?;
        Ok(())
    })
}

/// Upper-tail critical value of chi-square(df) at level `alpha`.
#[no_mangle]
pub unsafe extern "C" fn fs_chi_square_critical_value(df: usize, alpha: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = stats::chi_square_critical_value(df, alpha)?;
        Ok(())
    })
}
