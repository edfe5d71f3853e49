//! C ABI over `ecosim-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`EcoStatus`]; the message for the most recent failure on the calling
//! thread is available from [`eco_last_error`]. Strings handed out by the
//! library must be released with [`eco_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ecosim_core::evolution::fitness;
use ecosim_core::semantic::{apply_filter, parse_groups, AttributeTuple, FilterMap};
use ecosim_core::sim::metrics::final_rate;
use ecosim_core::sim::{Scenario, ScenarioConfig, Simulation, StepRecord};
use ecosim_core::EcoError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Runtime = 4,
    Finished = 5,
}

/// One attribute tuple, both fields in 1..=100.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EcoTuple {
    pub id: u8,
    pub value: u8,
}

/// One request event of a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EcoStepRecord {
    pub step: u64,
    pub user: usize,
    pub match_percent: f64,
    pub generations: usize,
}

impl From<StepRecord> for EcoStepRecord {
    fn from(r: StepRecord) -> Self {
        EcoStepRecord { step: r.step, user: r.user, match_percent: r.match_percent, generations: r.generations }
    }
}

/// Scenario configuration.
pub struct EcoConfig {
    inner: ScenarioConfig,
}

/// A simulation run in progress.
pub struct EcoSimulation {
    inner: Simulation,
    steps: usize,
    done: usize,
    series: Vec<f64>,
}

/// Parsed semantic filter map.
pub struct EcoFilterMap {
    inner: FilterMap,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EcoStatus, msg: impl Into<String>) -> EcoStatus {
    set_error(msg);
    status
}

fn from_core(e: EcoError) -> EcoStatus {
    let status = if e.is_config() { EcoStatus::Config } else { EcoStatus::Runtime };
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, EcoStatus> {
    if p.is_null() {
        return Err(fail(EcoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(EcoStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! handle {
    ($p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(h) => h,
            None => return fail(EcoStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eco_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed yet.
#[no_mangle]
pub unsafe extern "C" fn eco_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration (baseline scenario).
#[no_mangle]
pub extern "C" fn eco_config_new() -> *mut EcoConfig {
    Box::into_raw(Box::new(EcoConfig { inner: ScenarioConfig::default() }))
}

/// # Safety
/// `cfg` must be null or a handle from [`eco_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eco_config_free(cfg: *mut EcoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one configuration key, with the same keys and value syntax as the
/// config file.
///
/// # Safety
/// `cfg` must be a live config handle; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eco_config_set(cfg: *mut EcoConfig, key: *const c_char, value: *const c_char) -> EcoStatus {
    let cfg = handle!(cfg, "config");
    let key = try_ffi!(str_arg(key, "key"));
    let value = try_ffi!(str_arg(value, "value"));
    match cfg.inner.set(key, value) {
        Ok(()) => EcoStatus::Ok,
        Err(e) => from_core(e),
    }
}

/// Applies a whole `key = value` config text.
///
/// # Safety
/// `cfg` must be a live config handle; `text` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eco_config_apply(cfg: *mut EcoConfig, text: *const c_char) -> EcoStatus {
    let cfg = handle!(cfg, "config");
    let text = try_ffi!(str_arg(text, "config text"));
    match cfg.inner.apply(text) {
        Ok(()) => EcoStatus::Ok,
        Err(e) => from_core(e),
    }
}

/// Starts run `run` of the configured scenario and writes the handle to
/// `out`.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_new(cfg: *const EcoConfig, run: usize, out: *mut *mut EcoSimulation) -> EcoStatus {
    let Some(cfg) = cfg.as_ref() else {
        return fail(EcoStatus::NullPointer, "config is null");
    };
    if out.is_null() {
        return fail(EcoStatus::NullPointer, "output pointer is null");
    }
    match Simulation::new(&cfg.inner, run) {
        Ok(sim) => {
            let steps = cfg.inner.steps;
            *out = Box::into_raw(Box::new(EcoSimulation { inner: sim, steps, done: 0, series: Vec::with_capacity(steps) }));
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// # Safety
/// `sim` must be null or a handle from [`eco_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_free(sim: *mut EcoSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs one request event. Returns `ECO_STATUS_FINISHED` once the configured
/// number of steps has been run. `record` may be null.
///
/// # Safety
/// `sim` must be a live simulation handle; `record` null or writable.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_step(sim: *mut EcoSimulation, record: *mut EcoStepRecord) -> EcoStatus {
    let sim = handle!(sim, "simulation");
    if sim.done >= sim.steps {
        return EcoStatus::Finished;
    }
    match sim.inner.step() {
        Ok(r) => {
            sim.done += 1;
            sim.series.push(r.match_percent);
            if !record.is_null() {
                *record = r.into();
            }
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// Mean match percent over the last 100 steps run so far (fewer if the run
/// is shorter).
///
/// # Safety
/// `sim` must be a live simulation handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_final_rate(sim: *const EcoSimulation, out: *mut f64) -> EcoStatus {
    let Some(sim) = sim.as_ref() else {
        return fail(EcoStatus::NullPointer, "simulation is null");
    };
    if out.is_null() {
        return fail(EcoStatus::NullPointer, "output pointer is null");
    }
    match final_rate(&sim.series) {
        Ok(r) => {
            *out = r;
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// Agent instances currently hosted across all habitats.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_instances(sim: *const EcoSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.network().total_instances())
}

/// Topology snapshot as CSV (`from,to,p_forward,p_backward`). Free the
/// result with [`eco_string_free`].
///
/// # Safety
/// `sim` must be a live simulation handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eco_simulation_topology(sim: *const EcoSimulation, out: *mut *mut c_char) -> EcoStatus {
    let Some(sim) = sim.as_ref() else {
        return fail(EcoStatus::NullPointer, "simulation is null");
    };
    if out.is_null() {
        return fail(EcoStatus::NullPointer, "output pointer is null");
    }
    *out = CString::new(sim.inner.network().topology_csv()).expect("csv has no NUL").into_raw();
    EcoStatus::Ok
}

/// Scenario name for `index` in 0..5, or null.
#[no_mangle]
pub extern "C" fn eco_scenario_name(index: usize) -> *const c_char {
    const NAMES: [&CStr; 5] = [c"baseline", c"migration-control", c"pattern-control", c"targeted-nn", c"targeted-svm"];
    debug_assert!(NAMES.iter().zip(Scenario::ALL).all(|(n, s)| n.to_str() == Ok(s.name())));
    NAMES.get(index).map_or(ptr::null(), |n| n.as_ptr())
}

/// Raw match fitness of `attrs` against `request`, in (0, 1].
///
/// # Safety
/// `attrs` and `request` must point to `n_attrs` and `n_request` tuples;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eco_fitness(
    attrs: *const EcoTuple,
    n_attrs: usize,
    request: *const EcoTuple,
    n_request: usize,
    out: *mut f64,
) -> EcoStatus {
    if attrs.is_null() || request.is_null() || out.is_null() {
        return fail(EcoStatus::NullPointer, "null argument");
    }
    let conv = |p: *const EcoTuple, n: usize| -> Vec<AttributeTuple> {
        std::slice::from_raw_parts(p, n).iter().map(|t| AttributeTuple { id: t.id, value: t.value }).collect()
    };
    let (a, r) = (conv(attrs, n_attrs), conv(request, n_request));
    if let Some(bad) = a.iter().chain(&r).find(|t| !t.is_valid()) {
        return from_core(EcoError::TupleOutOfRange(*bad));
    }
    match fitness(&a, &r) {
        Ok(f) => {
            *out = f;
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// Parses a filter map (`id<TAB>Label`, `id,value<TAB>Text` lines).
///
/// # Safety
/// `text` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eco_filter_map_parse(text: *const c_char, out: *mut *mut EcoFilterMap) -> EcoStatus {
    let text = try_ffi!(str_arg(text, "filter map text"));
    if out.is_null() {
        return fail(EcoStatus::NullPointer, "output pointer is null");
    }
    match FilterMap::parse(text) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(EcoFilterMap { inner: m }));
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// # Safety
/// `map` must be null or a handle from [`eco_filter_map_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eco_filter_map_free(map: *mut EcoFilterMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Renders one input line (a description or a request) through the map,
/// one output line per tuple group. Free the result with
/// [`eco_string_free`].
///
/// # Safety
/// `map` must be a live handle, `line` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eco_filter_render(map: *const EcoFilterMap, line: *const c_char, out: *mut *mut c_char) -> EcoStatus {
    let Some(map) = map.as_ref() else {
        return fail(EcoStatus::NullPointer, "filter map is null");
    };
    let line = try_ffi!(str_arg(line, "line"));
    if out.is_null() {
        return fail(EcoStatus::NullPointer, "output pointer is null");
    }
    match parse_groups(line) {
        Ok(groups) => {
            let text: Vec<String> = groups.iter().map(|g| apply_filter(g, &map.inner)).collect();
            *out = CString::new(text.join("\n")).expect("rendered text has no NUL").into_raw();
            EcoStatus::Ok
        }
        Err(e) => from_core(e),
    }
}
