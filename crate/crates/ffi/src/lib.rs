//! C ABI over the split-forge core.
//!
//! Conventions:
//! * every fallible function returns an [`SfStatus`]; outputs go through
//!   pointer arguments and are written only on `SF_STATUS_OK`,
//! * the message of the most recent failure on the calling thread is
//!   available from [`sf_last_error_message`],
//! * handles are opaque and released with their matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use split_forge::dataset::{ConceptSet, DatasetBundle, EmbeddingFormat};
use split_forge::embedding_ops::{cosine_similarity, kmeans};
use split_forge::grouping::{Grouping, PairList, Strategy};
use split_forge::metrics::{f1_score, pearson};
use split_forge::pipeline::{build_grouping, Inputs, RunConfig};
use split_forge::splitter::{assign_split, Side, SplitConstraints};
use split_forge::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Validation = 6,
    Infeasible = 7,
    Numerical = 8,
    Llm = 9,
    Panic = 10,
}

/// Grouping strategies, in the order used by the report tables.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStrategy {
    Random = 0,
    Llm = 1,
    Similarity = 2,
    Clustering = 3,
    Supercategory = 4,
}

impl From<SfStrategy> for Strategy {
    fn from(s: SfStrategy) -> Self {
        match s {
            SfStrategy::Random => Strategy::Random,
            SfStrategy::Llm => Strategy::Llm,
            SfStrategy::Similarity => Strategy::Similarity,
            SfStrategy::Clustering => Strategy::Clustering,
            SfStrategy::Supercategory => Strategy::Supercategory,
        }
    }
}

/// Loaded embeddings, attributes and optional supercategories.
pub struct SfDataset {
    bundle: DatasetBundle,
}

/// A partition of the dataset's concepts into groups.
pub struct SfGrouping {
    grouping: Grouping,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::Io { .. } => SfStatus::Io,
        Error::Format { .. } | Error::Json(_) => SfStatus::Format,
        Error::Validation(_) => SfStatus::Validation,
        Error::InvalidArgument(_) => SfStatus::InvalidArgument,
        Error::Config(_) => SfStatus::Config,
        Error::Infeasible(_) => SfStatus::Infeasible,
        Error::Numerical(_) => SfStatus::Numerical,
        Error::Llm(_) => SfStatus::Llm,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SfStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            SfStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SfStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last failure on this thread, empty after a success. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a dataset. The embeddings format follows the file extension
/// (`.bin`/`.sftn` binary tensor, otherwise CSV). `supercategories_path`
/// may be NULL.
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_load(
    embeddings_path: *const c_char,
    attributes_path: *const c_char,
    supercategories_path: *const c_char,
    out: *mut *mut SfDataset,
) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let emb = path_arg(embeddings_path, "embeddings_path")?;
        let attrs = path_arg(attributes_path, "attributes_path")?;
        let sc = if supercategories_path.is_null() {
            None
        } else {
            Some(path_arg(supercategories_path, "supercategories_path")?)
        };
        let bundle = DatasetBundle::load(&emb, EmbeddingFormat::from_path(&emb), &attrs, sc.as_deref())?;
        *out = Box::into_raw(Box::new(SfDataset { bundle }));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`sf_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_free(ds: *mut SfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of concepts, or 0 for a NULL handle.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_n_concepts(ds: *const SfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.bundle.concept_set.len())
}

/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_dim(ds: *const SfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.bundle.concept_set.dim())
}

/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_n_attributes(ds: *const SfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.bundle.attributes.n_attributes())
}

/// Copies the labels of attribute `attribute` into `out_labels` (length
/// `n_concepts`).
///
/// # Safety
/// `ds` must be live; `out_labels` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_attribute_labels(
    ds: *const SfDataset,
    attribute: usize,
    out_labels: *mut u8,
    len: usize,
) -> SfStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or(Failure::Null("ds"))?;
        if out_labels.is_null() {
            return Err(Failure::Null("out_labels"));
        }
        let am = &ds.bundle.attributes;
        if attribute >= am.n_attributes() || len != am.n_concepts() {
            return Err(Error::InvalidArgument(format!(
                "attribute {attribute} of {}, buffer {len} for {} concepts",
                am.n_attributes(),
                am.n_concepts()
            ))
            .into());
        }
        std::slice::from_raw_parts_mut(out_labels, len).copy_from_slice(&am.column(attribute));
        Ok(())
    })
}

/// Builds a grouping with default settings for everything not passed in.
/// `k` is used by clustering, `top_pairs` by similarity, `pairs_path` by the
/// LLM strategy (NULL otherwise).
///
/// # Safety
/// `ds` must be live; `pairs_path` NULL or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_grouping_build(
    ds: *const SfDataset,
    strategy: SfStrategy,
    k: usize,
    top_pairs: usize,
    seed: u64,
    pairs_path: *const c_char,
    out: *mut *mut SfGrouping,
) -> SfStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or(Failure::Null("ds"))?;
        let out = out_arg(out, "out")?;
        let cfg = RunConfig {
            strategy: strategy.into(),
            k,
            top_pairs,
            seed: Some(seed),
            ..RunConfig::default()
        };
        cfg.validate()?;
        let mut inputs = Inputs::new(ds.bundle.clone(), "ffi");
        if !pairs_path.is_null() {
            inputs.pairs = Some(PairList::load(&path_arg(pairs_path, "pairs_path")?)?);
        }
        let grouping = build_grouping(&cfg, &inputs)?.grouping;
        *out = Box::into_raw(Box::new(SfGrouping { grouping }));
        Ok(())
    })
}

/// # Safety
/// `g` must come from [`sf_grouping_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_grouping_free(g: *mut SfGrouping) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_grouping_n_groups(g: *const SfGrouping) -> usize {
    g.as_ref().map_or(0, |g| g.grouping.len())
}

/// Fraction of concepts in groups of two or more; NaN for a NULL handle.
///
/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_grouping_coverage(g: *const SfGrouping) -> f64 {
    g.as_ref().map_or(f64::NAN, |g| g.grouping.coverage)
}

/// Writes the group index of every concept into `out_group_of`.
///
/// # Safety
/// `g` must be live; `out_group_of` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sf_grouping_group_of(g: *const SfGrouping, out_group_of: *mut usize, len: usize) -> SfStatus {
    guard(|| {
        let g = g.as_ref().ok_or(Failure::Null("g"))?;
        if out_group_of.is_null() {
            return Err(Failure::Null("out_group_of"));
        }
        let group_of = g.grouping.group_of();
        if len != group_of.len() {
            return Err(Error::InvalidArgument(format!("buffer {len} for {} concepts", group_of.len())).into());
        }
        std::slice::from_raw_parts_mut(out_group_of, len).copy_from_slice(&group_of);
        Ok(())
    })
}

/// Splits one attribute under default constraints. `out_train_mask[i]` is 1
/// for training concepts. A split that misses a hard constraint is still
/// written, with `*out_feasible` set to false.
///
/// # Safety
/// `g` must be live; `labels` and `out_train_mask` must hold `n` bytes;
/// `out_penalty` and `out_feasible` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_assign_split(
    g: *const SfGrouping,
    labels: *const u8,
    n: usize,
    seed: u64,
    out_train_mask: *mut u8,
    out_penalty: *mut f64,
    out_feasible: *mut bool,
) -> SfStatus {
    guard(|| {
        let g = g.as_ref().ok_or(Failure::Null("g"))?;
        let labels = slice_arg(labels, n, "labels")?;
        if out_train_mask.is_null() {
            return Err(Failure::Null("out_train_mask"));
        }
        let penalty = out_arg(out_penalty, "out_penalty")?;
        let feasible = out_arg(out_feasible, "out_feasible")?;
        let sa = assign_split(&g.grouping, labels, &SplitConstraints::default(), seed)?;
        let mask = std::slice::from_raw_parts_mut(out_train_mask, n);
        for (m, s) in mask.iter_mut().zip(&sa.side) {
            *m = (*s == Side::Train) as u8;
        }
        *penalty = sa.penalty;
        *feasible = sa.feasible;
        Ok(())
    })
}

/// # Safety
/// `u` and `v` must hold `d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_cosine_similarity(u: *const f64, v: *const f64, d: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        let (u, v) = (slice_arg(u, d, "u")?, slice_arg(v, d, "v")?);
        *out_arg(out, "out")? = cosine_similarity(u, v)?;
        Ok(())
    })
}

/// K-Means over a row-major `n x d` matrix.
///
/// # Safety
/// `values` must hold `n * d` doubles, `out_assignment` `n` elements;
/// `out_inertia` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_kmeans(
    values: *const f64,
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
    out_assignment: *mut usize,
    out_inertia: *mut f64,
) -> SfStatus {
    guard(|| {
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Error::InvalidArgument("n * d overflows".into()))?;
        let values = slice_arg(values, len, "values")?;
        if out_assignment.is_null() {
            return Err(Failure::Null("out_assignment"));
        }
        let inertia = out_arg(out_inertia, "out_inertia")?;
        let names = (0..n).map(|i| format!("row{i}")).collect();
        let cs = ConceptSet::from_flat(names, values.to_vec(), d)?;
        let ca = kmeans(&cs, k, seed, max_iter)?;
        std::slice::from_raw_parts_mut(out_assignment, n).copy_from_slice(&ca.assignment);
        *inertia = ca.inertia;
        Ok(())
    })
}

/// # Safety
/// `y_true` and `y_pred` must hold `n` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_f1_score(y_true: *const u8, y_pred: *const u8, n: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        let (t, p) = (slice_arg(y_true, n, "y_true")?, slice_arg(y_pred, n, "y_pred")?);
        *out_arg(out, "out")? = f1_score(t, p)?;
        Ok(())
    })
}

/// # Safety
/// `x` and `y` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        let (x, y) = (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?);
        *out_arg(out, "out")? = pearson(x, y)?;
        Ok(())
    })
}
