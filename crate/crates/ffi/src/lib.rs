//! C ABI over `resilience-core`.
//!
//! Every function returns a [`ResStatus`]; outputs go through pointer
//! arguments. On failure a message is kept per thread and can be read with
//! [`res_last_error`]. Panels are opaque handles released with
//! [`res_panel_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use resilience_core::config::RunConfig;
use resilience_core::index::{classify, compute_record, ResilienceClass};
use resilience_core::panel::RowOutcome;
use resilience_core::pipeline::{compute_panel, load_inputs, LoadOptions, PipelineError};
use resilience_core::series::{LevelMode, NotComputableReason, ShockWindow};
use resilience_core::stats::t_quantile;
use resilience_core::{Panel, SignConvention};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The window yields no record; the message names the reason.
    NotComputable = 3,
    /// Configuration failed validation.
    Config = 4,
    /// Input data could not be read or parsed.
    Data = 5,
    /// A built panel violated an invariant.
    Invariant = 6,
    Io = 7,
    OutOfRange = 8,
    /// A panic was caught at the boundary.
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResClass {
    Low = 1,
    Medium = 2,
    High = 3,
}

impl From<ResilienceClass> for ResClass {
    fn from(c: ResilienceClass) -> Self {
        match c {
            ResilienceClass::Low => ResClass::Low,
            ResilienceClass::Medium => ResClass::Medium,
            ResilienceClass::High => ResClass::High,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResReason {
    /// The row is computed.
    None = 0,
    InsufficientReference = 1,
    InsufficientPerformance = 2,
    GapAtShock = 3,
    NoData = 4,
    DegenerateLevels = 5,
}

impl From<NotComputableReason> for ResReason {
    fn from(r: NotComputableReason) -> Self {
        match r {
            NotComputableReason::InsufficientReference => ResReason::InsufficientReference,
            NotComputableReason::InsufficientPerformance => ResReason::InsufficientPerformance,
            NotComputableReason::GapAtShock => ResReason::GapAtShock,
            NotComputableReason::NoData => ResReason::NoData,
            NotComputableReason::DegenerateLevels => ResReason::DegenerateLevels,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResRecord {
    pub r_en: f64,
    pub r_ec: f64,
    pub r_ev: f64,
    /// +1 or -1.
    pub direction: i8,
    pub i_r: f64,
    pub class_: ResClass,
}

/// One panel row. `record` is meaningful only when `reason` is `None`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResRow {
    pub shock_year: i32,
    pub reason: ResReason,
    pub record: ResRecord,
}

/// Opaque panel handle.
pub struct ResPanel {
    panel: Panel,
    /// NUL-terminated country codes, one per row.
    countries: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: ResStatus, msg: impl Into<String>) -> ResStatus {
    set_error(msg);
    status
}

/// Clears the last error, runs `f` and turns a panic into `Internal`.
fn guard(f: impl FnOnce() -> ResStatus) -> ResStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ResStatus::Internal, msg)
        }
    }
}

fn pipeline_status(e: &PipelineError) -> ResStatus {
    match e.exit_code() {
        2 => ResStatus::Config,
        4 => ResStatus::Invariant,
        _ => ResStatus::Data,
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize) -> Option<&'a [f64]> {
    if data.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, ResStatus> {
    if path.is_null() {
        return Err(fail(ResStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path).to_str().map(Path::new).map_err(|_| fail(ResStatus::InvalidArgument, "path is not UTF-8"))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn res_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn res_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Computes the record for one window given as its reference values (up to
/// and including the shock year) and performance values. `as_printed`
/// selects the alternative sign convention for the ecological component.
#[no_mangle]
pub unsafe extern "C" fn res_compute_record(
    reference: *const f64,
    reference_len: usize,
    performance: *const f64,
    performance_len: usize,
    as_printed: bool,
    out: *mut ResRecord,
) -> ResStatus {
    guard(|| {
        let (Some(r), Some(p)) = (slice(reference, reference_len), slice(performance, performance_len)) else {
            return fail(ResStatus::NullPointer, "value array is null");
        };
        if out.is_null() {
            return fail(ResStatus::NullPointer, "out is null");
        }
        if r.iter().chain(p).any(|v| !v.is_finite()) {
            return fail(ResStatus::InvalidArgument, "values must be finite");
        }
        let window = match ShockWindow::from_segments(0, r, p, LevelMode::Max) {
            Ok(w) => w,
            Err(e) => return fail(ResStatus::NotComputable, e.to_string()),
        };
        let convention = if as_printed { SignConvention::AsPrinted } else { SignConvention::Corrected };
        match compute_record(&window, convention) {
            Ok(rec) => {
                *out = ResRecord {
                    r_en: rec.vector.r_en,
                    r_ec: rec.vector.r_ec,
                    r_ev: rec.vector.r_ev,
                    direction: rec.vector.direction,
                    i_r: rec.i_r,
                    class_: rec.class.into(),
                };
                ResStatus::Ok
            }
            Err(e) => fail(ResStatus::NotComputable, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn res_classify(i_r: f64, out: *mut ResClass) -> ResStatus {
    guard(|| {
        if out.is_null() {
            return fail(ResStatus::NullPointer, "out is null");
        }
        match classify(i_r) {
            Ok(c) => {
                *out = c.into();
                ResStatus::Ok
            }
            Err(e) => fail(ResStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn res_t_quantile(p: f64, df: f64, out: *mut f64) -> ResStatus {
    guard(|| {
        if out.is_null() {
            return fail(ResStatus::NullPointer, "out is null");
        }
        match t_quantile(p, df) {
            Ok(q) => {
                *out = q;
                ResStatus::Ok
            }
            Err(e) => fail(ResStatus::InvalidArgument, e.to_string()),
        }
    })
}

fn into_handle(panel: Panel) -> *mut ResPanel {
    let countries = panel.rows.iter().map(|r| CString::new(r.country_code.as_str()).unwrap_or_default()).collect();
    Box::into_raw(Box::new(ResPanel { panel, countries }))
}

/// Builds a panel from a run config file without touching the network.
/// Fetch sources must already be cached.
#[no_mangle]
pub unsafe extern "C" fn res_panel_from_config(config_path: *const c_char, out: *mut *mut ResPanel) -> ResStatus {
    guard(|| {
        if out.is_null() {
            return fail(ResStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match path_arg(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                let e = PipelineError::from(e);
                return fail(pipeline_status(&e), e.to_string());
            }
        };
        let opts = LoadOptions {
            cache_dir: Some(resilience_core::pipeline::default_cache_dir(&cfg)),
            allow_fetch: false,
            ..LoadOptions::default()
        };
        let panel = load_inputs(&cfg, &opts, None).and_then(|inputs| compute_panel(&cfg, &inputs));
        match panel {
            Ok(p) => {
                *out = into_handle(p);
                ResStatus::Ok
            }
            Err(e) => fail(pipeline_status(&e), e.to_string()),
        }
    })
}

/// Loads a panel previously written as `panel.json`.
#[no_mangle]
pub unsafe extern "C" fn res_panel_from_json(path: *const c_char, out: *mut *mut ResPanel) -> ResStatus {
    guard(|| {
        if out.is_null() {
            return fail(ResStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(ResStatus::Io, format!("{}: {e}", path.display())),
        };
        match Panel::from_json_str(&text) {
            Ok(p) => {
                *out = into_handle(p);
                ResStatus::Ok
            }
            Err(e) => fail(ResStatus::Data, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn res_panel_row_count(panel: *const ResPanel, out: *mut usize) -> ResStatus {
    guard(|| {
        let (Some(h), false) = (panel.as_ref(), out.is_null()) else {
            return fail(ResStatus::NullPointer, "null argument");
        };
        *out = h.panel.rows.len();
        ResStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn res_panel_row(panel: *const ResPanel, index: usize, out: *mut ResRow) -> ResStatus {
    guard(|| {
        let (Some(h), false) = (panel.as_ref(), out.is_null()) else {
            return fail(ResStatus::NullPointer, "null argument");
        };
        let Some(row) = h.panel.rows.get(index) else {
            return fail(ResStatus::OutOfRange, format!("row {index} of {}", h.panel.rows.len()));
        };
        let (reason, record) = match row.outcome {
            RowOutcome::Computed(rec) => (
                ResReason::None,
                ResRecord {
                    r_en: rec.vector.r_en,
                    r_ec: rec.vector.r_ec,
                    r_ev: rec.vector.r_ev,
                    direction: rec.vector.direction,
                    i_r: rec.i_r,
                    class_: rec.class.into(),
                },
            ),
            RowOutcome::NotComputable { reason } => (
                reason.into(),
                ResRecord {
                    r_en: f64::NAN,
                    r_ec: f64::NAN,
                    r_ev: f64::NAN,
                    direction: 0,
                    i_r: f64::NAN,
                    class_: ResClass::Low,
                },
            ),
        };
        *out = ResRow { shock_year: row.shock_year, reason, record };
        ResStatus::Ok
    })
}

/// Country code of a row. The string is owned by the panel and lives until
/// [`res_panel_free`].
#[no_mangle]
pub unsafe extern "C" fn res_panel_row_country(
    panel: *const ResPanel,
    index: usize,
    out: *mut *const c_char,
) -> ResStatus {
    guard(|| {
        let (Some(h), false) = (panel.as_ref(), out.is_null()) else {
            return fail(ResStatus::NullPointer, "null argument");
        };
        match h.countries.get(index) {
            Some(s) => {
                *out = s.as_ptr();
                ResStatus::Ok
            }
            None => fail(ResStatus::OutOfRange, format!("row {index} of {}", h.countries.len())),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn res_panel_write_csv(panel: *const ResPanel, path: *const c_char) -> ResStatus {
    guard(|| {
        let Some(h) = panel.as_ref() else {
            return fail(ResStatus::NullPointer, "panel is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return fail(ResStatus::Io, format!("{}: {e}", path.display())),
        };
        match h.panel.write_csv(std::io::BufWriter::new(file)) {
            Ok(()) => ResStatus::Ok,
            Err(e) => fail(ResStatus::Io, e.to_string()),
        }
    })
}

/// Releases a panel. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn res_panel_free(panel: *mut ResPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}
