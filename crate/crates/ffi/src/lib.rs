//! C ABI for gazeatt.
//!
//! Every fallible entry point returns a [`GazeattStatus`]. On failure the
//! message is kept per thread and can be read with [`gazeatt_last_error`]
//! until the next failing call on that thread. Handles are opaque and must be
//! released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gazeatt::checkpoint::Checkpoint;
use gazeatt::data::{generate_corpus, write_corpus, AttentionSample, Domain, FaceBox, GeneratorConfig};
use gazeatt::model::Model;
use gazeatt::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GazeattStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Checkpoint = 6,
    Undefined = 7,
    NonFinite = 8,
    Panic = 9,
}

/// Synthetic data domains.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GazeattDomain {
    GazeFollow = 0,
    Eyediap = 1,
    SynHead = 2,
    Mmdb = 3,
}

impl From<GazeattDomain> for Domain {
    fn from(d: GazeattDomain) -> Self {
        match d {
            GazeattDomain::GazeFollow => Domain::GazeFollowLike,
            GazeattDomain::Eyediap => Domain::EyediapLike,
            GazeattDomain::SynHead => Domain::SynHeadLike,
            GazeattDomain::Mmdb => Domain::MmdbLike,
        }
    }
}

/// A trained model loaded from a checkpoint.
pub struct GazeattModel {
    model: Model,
}

/// An in-memory synthetic corpus.
pub struct GazeattCorpus {
    samples: Vec<AttentionSample>,
}

/// Summary of one inference.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GazeattEstimate {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    /// Probability that the gaze target lies inside the frame.
    pub likelihood: f64,
    /// Row-major index of the most probable heatmap cell.
    pub argmax_cell: u32,
    /// Heatmap side; the heatmap has `grid * grid` cells.
    pub grid: u32,
}

/// Labels of one generated sample. Absent labels have their `has_` flag
/// cleared and zeroed values.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GazeattSampleInfo {
    /// Normalized `x, y, w, h`.
    pub face_bbox: [f64; 4],
    pub has_angle: bool,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub has_target: bool,
    pub target: [f64; 2],
    /// 1 inside, 0 outside, -1 unlabelled.
    pub inside: i32,
}

struct Failure(GazeattStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) | Error::Input(_) => GazeattStatus::InvalidArgument,
            Error::Config(_) => GazeattStatus::Config,
            Error::Parse { .. } => GazeattStatus::Parse,
            Error::Checkpoint(_) => GazeattStatus::Checkpoint,
            Error::NonFinite { .. } => GazeattStatus::NonFinite,
            Error::Undefined(_) => GazeattStatus::Undefined,
            Error::Io { .. } | Error::Image { .. } => GazeattStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GazeattStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(GazeattStatus::NullPointer, format!("{name} is null"))
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> GazeattStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GazeattStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            GazeattStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn labels_arg(p: *const u8, n: usize) -> Result<Vec<bool>, Failure> {
    slice_arg(p, n, "labels")?
        .iter()
        .map(|&l| match l {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(invalid(format!("label {v} is not 0 or 1"))),
        })
        .collect()
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gazeatt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gazeatt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint written by `gazeatt train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_model_load(path: *const c_char, out: *mut *mut GazeattModel) -> GazeattStatus {
    run(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let path = path_arg(path, "path")?;
        let model = Checkpoint::load(&path)?.into_model()?;
        *out = Box::into_raw(Box::new(GazeattModel { model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`gazeatt_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_model_free(model: *mut GazeattModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Heatmap side of a loaded model.
///
/// # Safety
/// `model` must be a live handle and `grid` writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_model_heatmap_grid(model: *const GazeattModel, grid: *mut u32) -> GazeattStatus {
    run(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out_arg(grid, "grid")? = m.model.config().heatmap_grid as u32;
        Ok(())
    })
}

/// Runs the model on one RGB scene.
///
/// `rgb` holds `width * height * 3` bytes, row-major, no padding.
/// `face_bbox` points to normalized `x, y, w, h`. When `heatmap` is not null
/// the fixation map (heatmap scaled by the likelihood) is written to it;
/// `heatmap_len` must then be at least `grid * grid`.
///
/// # Safety
/// All pointers must be valid for the sizes given.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_model_infer(
    model: *const GazeattModel,
    rgb: *const u8,
    width: u32,
    height: u32,
    face_bbox: *const f64,
    out: *mut GazeattEstimate,
    heatmap: *mut f64,
    heatmap_len: usize,
) -> GazeattStatus {
    run(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_arg(out, "out")?;
        if width == 0 || height == 0 {
            return Err(invalid("image has zero size"));
        }
        let n = width as usize * height as usize * 3;
        let pixels = slice_arg(rgb, n, "rgb")?.to_vec();
        let scene = image::RgbImage::from_raw(width, height, pixels).ok_or_else(|| invalid("bad image buffer"))?;
        let b = slice_arg(face_bbox, 4, "face_bbox")?;
        let est = gazeatt::cli::infer_image(&m.model, &scene, &FaceBox::new(b[0], b[1], b[2], b[3]))?;
        let grid = m.model.config().heatmap_grid;
        if !heatmap.is_null() {
            if heatmap_len < grid * grid {
                return Err(invalid(format!("heatmap buffer holds {heatmap_len} values, need {}", grid * grid)));
            }
            std::slice::from_raw_parts_mut(heatmap, grid * grid).copy_from_slice(&est.fixation_map);
        }
        *out = GazeattEstimate {
            yaw_deg: est.angle.yaw_deg(),
            pitch_deg: est.angle.pitch_deg(),
            likelihood: est.fixation_likelihood,
            argmax_cell: est.argmax_cell() as u32,
            grid: grid as u32,
        };
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `auc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_roc_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    auc: *mut f64,
) -> GazeattStatus {
    run(|| {
        let out = out_arg(auc, "auc")?;
        let s = slice_arg(scores, n, "scores")?;
        let l = labels_arg(labels, n)?;
        let scored: Vec<(f64, bool)> = s.iter().copied().zip(l).collect();
        *out = gazeatt::eval::roc_auc(&scored)?;
        Ok(())
    })
}

/// Average precision of fixation likelihoods against 0/1 inside labels.
///
/// # Safety
/// `likelihoods` and `labels` must hold `n` values; `ap` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_fixation_ap(
    likelihoods: *const f64,
    labels: *const u8,
    n: usize,
    ap: *mut f64,
) -> GazeattStatus {
    run(|| {
        let out = out_arg(ap, "ap")?;
        let s = slice_arg(likelihoods, n, "likelihoods")?;
        let l = labels_arg(labels, n)?;
        *out = gazeatt::eval::fixation_ap(s, &l)?;
        Ok(())
    })
}

/// Generates `count` samples of `domain` with default generator settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_corpus_generate(
    domain: GazeattDomain,
    seed: u64,
    count: usize,
    out: *mut *mut GazeattCorpus,
) -> GazeattStatus {
    run(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = GeneratorConfig::for_domain(domain.into(), seed, count);
        let samples = generate_corpus(&cfg)?;
        *out = Box::into_raw(Box::new(GazeattCorpus { samples }));
        Ok(())
    })
}

/// Number of samples in a corpus.
///
/// # Safety
/// `corpus` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_corpus_len(corpus: *const GazeattCorpus, len: *mut usize) -> GazeattStatus {
    run(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        *out_arg(len, "len")? = c.samples.len();
        Ok(())
    })
}

/// Labels of sample `index`.
///
/// # Safety
/// `corpus` must be a live handle and `info` writable.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_corpus_sample(
    corpus: *const GazeattCorpus,
    index: usize,
    info: *mut GazeattSampleInfo,
) -> GazeattStatus {
    run(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let info = out_arg(info, "info")?;
        let s = c
            .samples
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range for {} samples", c.samples.len())))?;
        *info = GazeattSampleInfo {
            face_bbox: s.face_bbox.as_array(),
            has_angle: s.gaze.is_some(),
            yaw_deg: s.gaze.map_or(0.0, |g| g.yaw_deg()),
            pitch_deg: s.gaze.map_or(0.0, |g| g.pitch_deg()),
            has_target: s.target.is_some(),
            target: s.target.map_or([0.0; 2], |t| [t.x, t.y]),
            inside: s.inside.map_or(-1, i32::from),
        };
        Ok(())
    })
}

/// Writes images, manifest and in/out sidecar under `dir`.
///
/// # Safety
/// `corpus` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_corpus_write(corpus: *const GazeattCorpus, dir: *const c_char) -> GazeattStatus {
    run(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let dir = path_arg(dir, "dir")?;
        write_corpus(&dir, &c.samples)?;
        Ok(())
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must come from [`gazeatt_corpus_generate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gazeatt_corpus_free(corpus: *mut GazeattCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}
