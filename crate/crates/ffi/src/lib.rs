//! C ABI over `fdas-core`.
//!
//! Every object crosses the boundary as an opaque pointer that the caller
//! releases with the matching `*_free`. Fallible calls return an
//! [`FdasStatus`]; on failure `fdas_last_error()` describes what went wrong
//! on the calling thread. Panics never unwind into C.
//!
//! Pointer arguments must be null or valid for the access the signature
//! implies; handles must come from this library and be freed at most once.
//! Enum arguments must hold one of the declared values.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fdas_core::model::{self, Buffering, DeviceModel, Scheme, StageTiming};
use fdas_core::{
    io, pipeline, ComplexSeries, Complex32, ConvStrategy, FdasConfig, FdasError, FilterBank,
    HarmonicStrategy, Injection, RunOptions,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdasStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Structure = 5,
    Unsupported = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdasConv {
    NaiveTd = 0,
    OlaTd = 1,
    NaiveFd = 2,
    OlsFd = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdasHm {
    Single = 0,
    NaiveMulti = 1,
    MultiN = 2,
    MultiR = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdasScheme {
    SingleInput = 0,
    MultiInput = 1,
    MultiConfig = 2,
}

/// Zero in `conv_param`, `hm_cols` or `hm_ppi` picks the library default;
/// zero threads means all cores.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdasRunOptions {
    pub conv: FdasConv,
    pub conv_param: usize,
    pub engines: u8,
    pub hm: FdasHm,
    pub hm_cols: usize,
    pub hm_ppi: usize,
    pub filters_per_launch: usize,
    pub threads: usize,
    pub threshold_factor: f32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdasInjection {
    pub channel: usize,
    pub harmonics: usize,
    pub amplitude: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdasCandidate {
    pub harmonic: u32,
    pub template: i32,
    pub channel: u32,
    pub power: f32,
}

/// Stage latencies in milliseconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdasStageTimes {
    pub t_ft: f64,
    pub t_fop: f64,
    pub t_hm: f64,
}

pub struct FdasConfigHandle(FdasConfig);

pub struct FdasSeries(ComplexSeries);

pub struct FdasResult {
    candidates: Vec<FdasCandidate>,
    fop: Vec<f32>,
    n_temp: usize,
    n_chan: usize,
    timing: StageTiming,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(FdasStatus, String);

impl From<FdasError> for Fail {
    fn from(e: FdasError) -> Self {
        let status = match &e {
            FdasError::ConfigParse { .. } | FdasError::Json(_) | FdasError::Csv(_) => FdasStatus::Parse,
            FdasError::Io { .. } => FdasStatus::Io,
            FdasError::Structure { .. } | FdasError::WrongPlane(_) => FdasStatus::Structure,
            FdasError::Unsupported(_) => FdasStatus::Unsupported,
            _ => FdasStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FdasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FdasStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FdasStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(FdasStatus::NullArgument, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn stages(t: &FdasStageTimes) -> Result<StageTiming, Fail> {
    let st = StageTiming::from_stages(t.t_ft, t.t_fop, t.t_hm);
    st.validate()?;
    Ok(st)
}

fn buffering(depth: u32) -> Result<Buffering, Fail> {
    Buffering::from_depth(depth as usize).map_err(|e| Fail(FdasStatus::InvalidArgument, e.to_string()))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fdas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn fdas_config_desk(out: *mut *mut FdasConfigHandle) -> FdasStatus {
    guard(|| put(out, Box::into_raw(Box::new(FdasConfigHandle(FdasConfig::desk_scale()))), "out"))
}

/// Full-scale defaults overridden by the keys present in `json`.
#[no_mangle]
pub unsafe extern "C" fn fdas_config_from_json(json: *const c_char, out: *mut *mut FdasConfigHandle) -> FdasStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(FdasStatus::Parse, format!("config is not UTF-8: {e}")))?;
        let cfg = io::parse_config(text)?;
        put(out, Box::into_raw(Box::new(FdasConfigHandle(cfg))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_config_dims(
    cfg: *const FdasConfigHandle,
    n_temp: *mut usize,
    n_chan: *mut usize,
    n_hp: *mut usize,
    n_cand: *mut usize,
) -> FdasStatus {
    guard(|| {
        let c = &deref(cfg, "cfg")?.0;
        put(n_temp, c.n_temp, "n_temp")?;
        put(n_chan, c.n_chan, "n_chan")?;
        put(n_hp, c.n_hp, "n_hp")?;
        put(n_cand, c.n_cand, "n_cand")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_config_free(cfg: *mut FdasConfigHandle) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Synthetic input: Gaussian noise of deviation `noise` plus the given
/// injections. `injections` may be null when `n_injections` is zero.
#[no_mangle]
pub unsafe extern "C" fn fdas_series_generate(
    cfg: *const FdasConfigHandle,
    injections: *const FdasInjection,
    n_injections: usize,
    noise: f64,
    seed: u64,
    out: *mut *mut FdasSeries,
) -> FdasStatus {
    guard(|| {
        let c = &deref(cfg, "cfg")?.0;
        let inj: Vec<Injection> = if n_injections == 0 {
            Vec::new()
        } else {
            if injections.is_null() {
                return Err(null("injections"));
            }
            std::slice::from_raw_parts(injections, n_injections)
                .iter()
                .map(|i| Injection { channel: i.channel, harmonics: i.harmonics, amplitude: i.amplitude })
                .collect()
        };
        let x = fdas_core::signal::generate_input(c, &inj, noise, seed)?;
        put(out, Box::into_raw(Box::new(FdasSeries(x))), "out")
    })
}

/// Copies `len` complex samples stored as interleaved (re, im) pairs.
#[no_mangle]
pub unsafe extern "C" fn fdas_series_from_interleaved(
    data: *const f32,
    len: usize,
    out: *mut *mut FdasSeries,
) -> FdasStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let raw = std::slice::from_raw_parts(data, 2 * len);
        let x: Vec<Complex32> = raw.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
        put(out, Box::into_raw(Box::new(FdasSeries(ComplexSeries(x)))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_series_len(series: *const FdasSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn fdas_series_free(series: *mut FdasSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

#[no_mangle]
pub extern "C" fn fdas_run_options_default() -> FdasRunOptions {
    FdasRunOptions {
        conv: FdasConv::NaiveFd,
        conv_param: 0,
        engines: 1,
        hm: FdasHm::NaiveMulti,
        hm_cols: 0,
        hm_ppi: 0,
        filters_per_launch: 2,
        threads: 0,
        threshold_factor: pipeline::DEFAULT_THRESHOLD_FACTOR,
    }
}

fn or(v: usize, default: usize) -> usize {
    if v == 0 {
        default
    } else {
        v
    }
}

fn run_options(o: &FdasRunOptions) -> RunOptions {
    let conv = match o.conv {
        FdasConv::NaiveTd => ConvStrategy::NaiveTd,
        FdasConv::OlaTd => ConvStrategy::OlaTd { n_paral: or(o.conv_param, 128) },
        FdasConv::NaiveFd => ConvStrategy::NaiveFd,
        FdasConv::OlsFd => ConvStrategy::OlsFd { chunk: or(o.conv_param, 2048), engines: o.engines },
    };
    let hm = match o.hm {
        FdasHm::Single => HarmonicStrategy::SingleHp { n_paral: or(o.hm_cols, 16) },
        FdasHm::NaiveMulti => HarmonicStrategy::NaiveMultipleHp,
        FdasHm::MultiN => HarmonicStrategy::MultipleHpN { cols_per_group: or(o.hm_cols, 64) },
        FdasHm::MultiR => HarmonicStrategy::MultipleHpR {
            cols_per_group: or(o.hm_cols, 64),
            points_per_item: or(o.hm_ppi, 4),
        },
    };
    RunOptions {
        conv,
        hm,
        filters_per_launch: o.filters_per_launch,
        threads: o.threads,
        threshold_factor: o.threshold_factor,
        ..RunOptions::default()
    }
}

/// Convolves `series` with the synthetic template bank, prepares the plane
/// and harmonic-sums it. `opts` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn fdas_run(
    cfg: *const FdasConfigHandle,
    series: *const FdasSeries,
    opts: *const FdasRunOptions,
    out: *mut *mut FdasResult,
) -> FdasStatus {
    guard(|| {
        let c = &deref(cfg, "cfg")?.0;
        let x = &deref(series, "series")?.0;
        let o = opts.as_ref().copied().unwrap_or_else(|| fdas_run_options_default());
        let opts = run_options(&o);
        opts.conv.validate(c.n_tap)?;
        opts.hm.validate()?;
        let bank = FilterBank::synthetic(c.n_temp, c.n_tap)?;
        let r = pipeline::run(c, x, &bank, &opts)?;
        let candidates = r
            .candidates
            .entries()
            .into_iter()
            .map(|c| FdasCandidate { harmonic: c.harmonic, template: c.template, channel: c.channel, power: c.power })
            .collect();
        let res = FdasResult {
            candidates,
            n_temp: r.fop.n_temp(),
            n_chan: r.fop.n_chan(),
            fop: r.fop.into_values(),
            timing: r.timing,
        };
        put(out, Box::into_raw(Box::new(res)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_result_candidate_count(res: *const FdasResult) -> usize {
    res.as_ref().map_or(0, |r| r.candidates.len())
}

/// Copies candidates in canonical order (harmonic, then power descending,
/// channel and template ascending). `*written` receives the total count even
/// when `cap` is too small.
#[no_mangle]
pub unsafe extern "C" fn fdas_result_candidates(
    res: *const FdasResult,
    buf: *mut FdasCandidate,
    cap: usize,
    written: *mut usize,
) -> FdasStatus {
    guard(|| {
        let r = deref(res, "res")?;
        put(written, r.candidates.len(), "written")?;
        copy_out(&r.candidates, buf, cap)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail(FdasStatus::BufferTooSmall, format!("need {} elements, have {cap}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Template-major FOP, row 0 being the most negative template.
#[no_mangle]
pub unsafe extern "C" fn fdas_result_fop(
    res: *const FdasResult,
    buf: *mut f32,
    cap: usize,
    n_temp: *mut usize,
    n_chan: *mut usize,
) -> FdasStatus {
    guard(|| {
        let r = deref(res, "res")?;
        put(n_temp, r.n_temp, "n_temp")?;
        put(n_chan, r.n_chan, "n_chan")?;
        copy_out(&r.fop, buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_result_timing(res: *const FdasResult, out: *mut FdasStageTimes) -> FdasStatus {
    guard(|| {
        let t = &deref(res, "res")?.timing;
        put(out, FdasStageTimes { t_ft: t.t_ft, t_fop: t.t_fop, t_hm: t.t_hm }, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_result_free(res: *mut FdasResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fdas_model_total_latency(t: *const FdasStageTimes, out: *mut f64) -> FdasStatus {
    guard(|| put(out, model::total_latency(&stages(deref(t, "t")?)?), "out"))
}

/// Buffer depth (1, 2 or 3) the model picks for these stages.
#[no_mangle]
pub unsafe extern "C" fn fdas_model_choose_buffering(t: *const FdasStageTimes, depth: *mut u32) -> FdasStatus {
    guard(|| put(depth, model::choose_buffering(&stages(deref(t, "t")?)?).depth() as u32, "depth"))
}

#[no_mangle]
pub unsafe extern "C" fn fdas_model_ideal_period(t: *const FdasStageTimes, depth: u32, out: *mut f64) -> FdasStatus {
    guard(|| put(out, model::ideal_period(&stages(deref(t, "t")?)?, buffering(depth)?), "out"))
}

/// Period under shared-memory contention on the default device, with every
/// stage demanding the full device bandwidth scaled by `demand`.
#[no_mangle]
pub unsafe extern "C" fn fdas_model_contended_period(
    t: *const FdasStageTimes,
    depth: u32,
    demand: *const FdasStageTimes,
    out: *mut f64,
) -> FdasStatus {
    guard(|| {
        let mut st = stages(deref(t, "t")?)?;
        let dev = DeviceModel::default();
        if let Some(d) = demand.as_ref() {
            let bw = dev.global_memory_bandwidth;
            st.bandwidth_demand.ft = d.t_ft * bw;
            st.bandwidth_demand.fop = d.t_fop * bw;
            st.bandwidth_demand.hm = d.t_hm * bw;
        }
        put(out, model::contended_period(&st, &dev, buffering(depth)?)?, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdas_model_multi_device_period(
    t: *const FdasStageTimes,
    n_devices: usize,
    scheme: FdasScheme,
    handoff_ms: f64,
    out: *mut f64,
) -> FdasStatus {
    guard(|| {
        let scheme = match scheme {
            FdasScheme::SingleInput => Scheme::SingleInput,
            FdasScheme::MultiInput => Scheme::MultiInput,
            FdasScheme::MultiConfig => Scheme::MultiConfig,
        };
        let st = stages(deref(t, "t")?)?;
        put(out, model::multi_device_period(&st, n_devices, scheme, handoff_ms)?, "out")
    })
}
