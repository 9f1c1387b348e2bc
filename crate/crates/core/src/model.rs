//! Analytic pipeline model: stage latency composition, buffering choice,
//! global-memory bandwidth contention and multi-device partitioning.
//!
//! All times are milliseconds; bandwidths are bytes per second.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::FtTiming;
use crate::error::{FdasError, Result};
use crate::harmonic::HmStats;
use crate::prep::PrepTiming;

/// Global-memory bandwidth each kernel needs to run at its ideal speed.
/// Per-transform demands fall back to `fop` when unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageDemand {
    pub ft: f64,
    pub fop: f64,
    pub hm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transpose: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reorder: Option<f64>,
}

/// Latencies of the three pipeline stages for one input array.
///
/// When `per_launch` is non-empty, `t_ft` must equal
/// `sum(per_launch) + n_ft_launch * t_klo`; when any of `b1..b3` is set,
/// `t_fop` must equal `b1*t_discard + b2*t_transpose + b3*t_reorder`.
/// Records without a breakdown carry stage totals only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageTiming {
    pub t_ft: f64,
    pub per_launch: Vec<f64>,
    pub t_klo: f64,
    pub n_ft_launch: usize,
    pub t_discard: f64,
    pub t_transpose: f64,
    pub t_reorder: f64,
    pub b1: bool,
    pub b2: bool,
    pub b3: bool,
    pub t_fop: f64,
    pub t_hm: f64,
    pub bandwidth_demand: StageDemand,
}

const REL_EPS: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_EPS * a.abs().max(b.abs()).max(1.0)
}

impl StageTiming {
    /// Totals-only record.
    pub fn from_stages(t_ft: f64, t_fop: f64, t_hm: f64) -> Self {
        Self {
            t_ft,
            t_fop,
            t_hm,
            ..Self::default()
        }
    }

    /// Builds a record from breakdown parts; totals are derived.
    pub fn from_parts(
        per_launch: Vec<f64>,
        t_klo: f64,
        fop: [(bool, f64); 3],
        t_hm: f64,
    ) -> Self {
        let n = per_launch.len();
        let t_ft = per_launch.iter().sum::<f64>() + n as f64 * t_klo;
        let [(b1, d), (b2, t), (b3, r)] = fop;
        let t_fop = [(b1, d), (b2, t), (b3, r)]
            .iter()
            .map(|&(b, v)| if b { v } else { 0.0 })
            .sum();
        Self {
            t_ft,
            per_launch,
            t_klo,
            n_ft_launch: n,
            t_discard: d,
            t_transpose: t,
            t_reorder: r,
            b1,
            b2,
            b3,
            t_fop,
            t_hm,
            bandwidth_demand: StageDemand::default(),
        }
    }

    /// Record from measured stage runs. Demands are bytes moved over the
    /// measured duration.
    pub fn from_measurements(ft: &FtTiming, prep: &PrepTiming, hm: &HmStats) -> Self {
        let mut st = Self::from_parts(
            ft.per_launch.clone(),
            ft.t_klo,
            [
                (prep.steps.discard, prep.t_discard),
                (prep.steps.transpose, prep.t_transpose),
                (prep.steps.reorder, prep.t_reorder),
            ],
            hm.t_hm,
        );
        let rate = |bytes: u64, ms: f64| if ms > 0.0 { bytes as f64 / (ms * 1e-3) } else { 0.0 };
        st.bandwidth_demand = StageDemand {
            ft: rate(ft.bytes_read + ft.bytes_written, st.t_ft),
            fop: rate(prep.bytes_moved, st.t_fop),
            hm: rate((hm.plane_reads + hm.plane_writes) * 4, st.t_hm),
            ..StageDemand::default()
        };
        st
    }

    pub fn validate(&self) -> Result<()> {
        let times = [
            ("t_ft", self.t_ft),
            ("t_klo", self.t_klo),
            ("t_discard", self.t_discard),
            ("t_transpose", self.t_transpose),
            ("t_reorder", self.t_reorder),
            ("t_fop", self.t_fop),
            ("t_hm", self.t_hm),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FdasError::InvalidTiming(format!("{name} = {v}")));
            }
        }
        if self.per_launch.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FdasError::InvalidTiming("negative launch time".into()));
        }
        if !self.per_launch.is_empty() {
            if self.n_ft_launch != self.per_launch.len() {
                return Err(FdasError::InvalidTiming(format!(
                    "n_ft_launch {} but {} launch times",
                    self.n_ft_launch,
                    self.per_launch.len()
                )));
            }
            let sum = self.per_launch.iter().sum::<f64>() + self.n_ft_launch as f64 * self.t_klo;
            if !close(sum, self.t_ft) {
                return Err(FdasError::InvalidTiming(format!(
                    "t_ft {} differs from launch sum {sum}",
                    self.t_ft
                )));
            }
        }
        if self.b1 || self.b2 || self.b3 {
            let sum = self.fop_sum();
            if !close(sum, self.t_fop) {
                return Err(FdasError::InvalidTiming(format!(
                    "t_fop {} differs from transform sum {sum}",
                    self.t_fop
                )));
            }
        }
        let d = &self.bandwidth_demand;
        let demands = [Some(d.ft), Some(d.fop), Some(d.hm), d.discard, d.transpose, d.reorder];
        if demands.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FdasError::InvalidTiming("negative bandwidth demand".into()));
        }
        Ok(())
    }

    fn fop_sum(&self) -> f64 {
        [
            (self.b1, self.t_discard),
            (self.b2, self.t_transpose),
            (self.b3, self.t_reorder),
        ]
        .iter()
        .map(|&(b, v)| if b { v } else { 0.0 })
        .sum()
    }

    pub fn stages(&self) -> [f64; 3] {
        [self.t_ft, self.t_fop, self.t_hm]
    }

    pub fn max_stage(&self) -> f64 {
        self.t_ft.max(self.t_fop).max(self.t_hm)
    }

    pub fn t_fdas(&self) -> f64 {
        total_latency(self)
    }
}

/// `t_FDAS = t_FT + t_FOP + t_HM`.
pub fn total_latency(st: &StageTiming) -> f64 {
    st.t_ft + st.t_fop + st.t_hm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Buffering {
    Single = 1,
    Double = 2,
    Triple = 3,
}

impl Buffering {
    pub fn depth(self) -> usize {
        self as usize
    }

    pub fn from_depth(depth: usize) -> Result<Self> {
        match depth {
            1 => Ok(Buffering::Single),
            2 => Ok(Buffering::Double),
            3 => Ok(Buffering::Triple),
            d => Err(FdasError::Unsupported(format!("buffering depth {d}"))),
        }
    }
}

/// Triple buffering when the slowest stage is under half the serial
/// latency, double otherwise.
pub fn choose_buffering(st: &StageTiming) -> Buffering {
    if 2.0 * st.max_stage() < st.t_fdas() {
        Buffering::Triple
    } else {
        Buffering::Double
    }
}

/// Steady-state time between successive inputs without contention.
/// Double buffering with three stages runs the slowest stage against the
/// other two, so its period is `max(m, t_fdas - m)`.
pub fn ideal_period(st: &StageTiming, buffering: Buffering) -> f64 {
    let m = st.max_stage();
    let t = st.t_fdas();
    match buffering {
        Buffering::Single => t,
        Buffering::Double => m.max(t - m),
        Buffering::Triple => m,
    }
}

/// Memory system of one accelerator card.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceModel {
    /// Bytes per second.
    pub global_memory_bandwidth: f64,
    /// Bytes.
    pub off_chip_capacity: f64,
    /// Bytes per second.
    pub host_link_bandwidth: f64,
    /// Milliseconds.
    pub reconfig_time: f64,
}

impl Default for DeviceModel {
    /// Two DDR3 banks (2 x 72-bit), 8 GB on-card memory, PCIe Gen3 x8, and a
    /// full reconfiguration of a little over one second.
    fn default() -> Self {
        Self {
            global_memory_bandwidth: 34.1e9,
            off_chip_capacity: 8.0 * 1024.0 * 1024.0 * 1024.0,
            host_link_bandwidth: 7.88e9,
            reconfig_time: 1200.0,
        }
    }
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("global_memory_bandwidth", self.global_memory_bandwidth),
            ("off_chip_capacity", self.off_chip_capacity),
            ("host_link_bandwidth", self.host_link_bandwidth),
            ("reconfig_time", self.reconfig_time),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(FdasError::InvalidConfig {
                    field: name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Milliseconds to move `bytes` over the host link.
    pub fn transfer_ms(&self, bytes: f64) -> f64 {
        bytes / self.host_link_bandwidth * 1e3
    }
}

/// One kernel in a contention schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub label: String,
    /// Duration when running alone, milliseconds.
    pub work: f64,
    /// Bytes per second needed to run at full speed.
    pub demand: f64,
}

/// Kernels executed back to back on one input.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Task {
    pub kernels: Vec<Kernel>,
}

impl Task {
    pub fn work(&self) -> f64 {
        self.kernels.iter().map(|k| k.work).sum()
    }
}

fn ft_kernels(st: &StageTiming) -> Vec<Kernel> {
    let d = st.bandwidth_demand.ft;
    if st.per_launch.is_empty() {
        return vec![Kernel {
            label: "ft".into(),
            work: st.t_ft,
            demand: d,
        }];
    }
    st.per_launch
        .iter()
        .enumerate()
        .map(|(i, t)| Kernel {
            label: format!("ft{}", i + 1),
            work: t + st.t_klo,
            demand: d,
        })
        .collect()
}

fn fop_kernels(st: &StageTiming) -> Vec<Kernel> {
    let d = &st.bandwidth_demand;
    if !(st.b1 || st.b2 || st.b3) {
        return vec![Kernel {
            label: "fop".into(),
            work: st.t_fop,
            demand: d.fop,
        }];
    }
    [
        (st.b1, "discard", st.t_discard, d.discard),
        (st.b2, "transpose", st.t_transpose, d.transpose),
        (st.b3, "reorder", st.t_reorder, d.reorder),
    ]
    .into_iter()
    .filter(|(on, ..)| *on)
    .map(|(_, label, work, demand)| Kernel {
        label: label.into(),
        work,
        demand: demand.unwrap_or(d.fop),
    })
    .collect()
}

fn hm_kernels(st: &StageTiming) -> Vec<Kernel> {
    vec![Kernel {
        label: "hm".into(),
        work: st.t_hm,
        demand: st.bandwidth_demand.hm,
    }]
}

/// Concurrent tasks of one steady-state pipeline period. Triple buffering
/// runs the three stages side by side on different inputs; double
/// buffering runs the slowest stage against the other two in pipeline
/// order; single buffering runs everything in sequence.
pub fn period_tasks(st: &StageTiming, buffering: Buffering) -> Vec<Task> {
    let stages = [ft_kernels(st), fop_kernels(st), hm_kernels(st)];
    let tasks: Vec<Vec<Kernel>> = match buffering {
        Buffering::Single => vec![stages.concat()],
        Buffering::Triple => stages.to_vec(),
        Buffering::Double => {
            let totals = st.stages();
            // first stage achieving the maximum
            let slow = (0..3)
                .fold(0, |best, s| if totals[s] > totals[best] { s } else { best });
            let rest: Vec<Kernel> = (0..3)
                .filter(|&s| s != slow)
                .flat_map(|s| stages[s].clone())
                .collect();
            vec![stages[slow].clone(), rest]
        }
    };
    tasks
        .into_iter()
        .map(|kernels| Task {
            kernels: kernels.into_iter().filter(|k| k.work > 0.0).collect(),
        })
        .collect()
}

/// Progress rates of concurrently active kernels sharing `bandwidth`.
///
/// A kernel whose demand alone reaches the bandwidth saturates memory: while
/// any saturating kernel runs, all others are stalled, and saturating kernels
/// share the bus in proportion (each capped at the full bandwidth). Without
/// saturating kernels, all kernels slow down by `sum(demand) / bandwidth`
/// when that exceeds one.
pub fn contention_rates(demands: &[f64], bandwidth: f64) -> Vec<f64> {
    let saturating: Vec<bool> = demands.iter().map(|&d| d >= bandwidth).collect();
    if saturating.iter().any(|&s| s) {
        let load: f64 = demands
            .iter()
            .zip(&saturating)
            .filter(|(_, &s)| s)
            .map(|(&d, _)| d.min(bandwidth))
            .sum::<f64>()
            / bandwidth;
        saturating
            .iter()
            .map(|&s| if s { 1.0 / load.max(1.0) } else { 0.0 })
            .collect()
    } else {
        let load = demands.iter().sum::<f64>() / bandwidth;
        vec![1.0 / load.max(1.0); demands.len()]
    }
}

/// Execution interval of one kernel in a contention schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Span {
    pub task: usize,
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Schedule {
    pub spans: Vec<Span>,
    pub makespan: f64,
}

/// Exact piecewise-constant-rate schedule of concurrently started tasks
/// under [`contention_rates`]. Advances from one kernel completion to the
/// next.
pub fn fluid_schedule(tasks: &[Task], bandwidth: f64) -> Result<Schedule> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(FdasError::InvalidConfig {
            field: "global_memory_bandwidth",
            reason: "must be positive".into(),
        });
    }
    let mut next = vec![0usize; tasks.len()];
    let mut remaining: Vec<f64> = tasks
        .iter()
        .map(|t| t.kernels.first().map_or(0.0, |k| k.work))
        .collect();
    let mut started = vec![0.0f64; tasks.len()];
    let mut schedule = Schedule::default();
    let mut now = 0.0;
    loop {
        let active: Vec<usize> = (0..tasks.len())
            .filter(|&t| next[t] < tasks[t].kernels.len())
            .collect();
        if active.is_empty() {
            break;
        }
        let demands: Vec<f64> = active
            .iter()
            .map(|&t| tasks[t].kernels[next[t]].demand)
            .collect();
        let rates = contention_rates(&demands, bandwidth);
        let dt = active
            .iter()
            .zip(&rates)
            .filter(|(_, &r)| r > 0.0)
            .map(|(&t, &r)| remaining[t] / r)
            .fold(f64::INFINITY, f64::min);
        debug_assert!(dt.is_finite(), "some active kernel always progresses");
        now += dt;
        for (&t, &r) in active.iter().zip(&rates) {
            remaining[t] -= r * dt;
            let kernel = &tasks[t].kernels[next[t]];
            if r > 0.0 && remaining[t] <= 1e-12 * kernel.work.max(1.0) {
                schedule.spans.push(Span {
                    task: t,
                    label: kernel.label.clone(),
                    start: started[t],
                    end: now,
                });
                next[t] += 1;
                started[t] = now;
                remaining[t] = tasks[t].kernels.get(next[t]).map_or(0.0, |k| k.work);
            }
        }
    }
    schedule.makespan = now;
    Ok(schedule)
}

/// Contention schedule of one steady-state period.
pub fn contention_schedule(
    st: &StageTiming,
    dev: &DeviceModel,
    buffering: Buffering,
) -> Result<Schedule> {
    fluid_schedule(&period_tasks(st, buffering), dev.global_memory_bandwidth)
}

/// Steady-state period when concurrently running stages compete for global
/// memory bandwidth. Never below [`ideal_period`].
pub fn contended_period(st: &StageTiming, dev: &DeviceModel, buffering: Buffering) -> Result<f64> {
    Ok(contention_schedule(st, dev, buffering)?.makespan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Same bitstream everywhere; harmonic summing split across devices.
    SingleInput,
    /// Same bitstream everywhere; each device takes its own input array.
    MultiInput,
    /// One stage per device, planes handed over the host link.
    MultiConfig,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::SingleInput, Scheme::MultiInput, Scheme::MultiConfig];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SingleInput => "single-input",
            Scheme::MultiInput => "multi-input",
            Scheme::MultiConfig => "multi-config",
        }
    }
}

/// Ideal period on `n` devices. `handoff` is the time to move one plane
/// between devices (MultiConfig only).
pub fn multi_device_period(st: &StageTiming, n: usize, scheme: Scheme, handoff: f64) -> Result<f64> {
    if n == 0 {
        return Err(FdasError::InvalidConfig {
            field: "n_devices",
            reason: "must be >= 1".into(),
        });
    }
    let nf = n as f64;
    let single_input = st.t_ft.max(st.t_fop).max(st.t_hm / nf);
    let multi_input = st.max_stage() / nf;
    debug_assert!(multi_input <= single_input * (1.0 + 1e-12));
    Ok(match scheme {
        Scheme::SingleInput => single_input,
        Scheme::MultiInput => multi_input,
        Scheme::MultiConfig => {
            let handoffs = n.min(3) - 1;
            st.max_stage() + handoffs as f64 * handoff
        }
    })
}

/// Buffering and device plan for one combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelinePlan {
    pub buffering: Buffering,
    /// Buffering the stage balance asked for, before the capacity check.
    pub preferred_buffering: Buffering,
    /// True when triple buffering did not fit in device memory.
    pub degraded: bool,
    pub n_devices: usize,
    pub scheme: Scheme,
    pub period: f64,
    pub t_fdas: f64,
    /// Reconfiguring between stages cannot meet `t_limit`.
    pub reconfig_rejected: Option<bool>,
}

/// Picks the buffering (degrading triple to double when `depth * plane_bytes`
/// exceeds device memory) and the period for the chosen device scheme.
pub fn plan(
    st: &StageTiming,
    dev: &DeviceModel,
    plane_bytes: f64,
    n_devices: usize,
    scheme: Scheme,
    t_limit: Option<f64>,
) -> Result<PipelinePlan> {
    st.validate()?;
    dev.validate()?;
    let preferred = choose_buffering(st);
    let mut buffering = preferred;
    if buffering == Buffering::Triple && 3.0 * plane_bytes > dev.off_chip_capacity {
        buffering = Buffering::Double;
    }
    let period = if n_devices <= 1 {
        ideal_period(st, buffering)
    } else {
        multi_device_period(st, n_devices, scheme, dev.transfer_ms(plane_bytes))?
    };
    Ok(PipelinePlan {
        buffering,
        preferred_buffering: preferred,
        degraded: buffering != preferred,
        n_devices: n_devices.max(1),
        scheme,
        period,
        t_fdas: st.t_fdas(),
        reconfig_rejected: t_limit.map(|limit| dev.reconfig_time > limit),
    })
}

/// One evaluated combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub combination: String,
    pub t_ft: f64,
    pub t_fop: f64,
    pub t_hm: f64,
    pub t_fdas: f64,
    pub buffering: usize,
    pub degraded: bool,
    pub period_ideal: f64,
    pub period_contended: f64,
    pub period_multidevice: BTreeMap<String, f64>,
}

/// Evaluates every combination and ranks by contended period (stable for
/// ties, so equal rows keep their input order).
pub fn sweep(
    combinations: &[(String, StageTiming)],
    dev: &DeviceModel,
    n_devices: usize,
    plane_bytes: f64,
) -> Result<Vec<ReportRow>> {
    if combinations.is_empty() {
        return Err(FdasError::Empty("combination list"));
    }
    dev.validate()?;
    let mut rows = combinations
        .par_iter()
        .map(|(name, st)| {
            let plan = plan(st, dev, plane_bytes, 1, Scheme::SingleInput, None)?;
            let handoff = dev.transfer_ms(plane_bytes);
            let period_multidevice = Scheme::ALL
                .iter()
                .map(|&s| Ok((s.name().to_string(), multi_device_period(st, n_devices, s, handoff)?)))
                .collect::<Result<_>>()?;
            Ok(ReportRow {
                combination: name.clone(),
                t_ft: st.t_ft,
                t_fop: st.t_fop,
                t_hm: st.t_hm,
                t_fdas: st.t_fdas(),
                buffering: plan.buffering.depth(),
                degraded: plan.degraded,
                period_ideal: plan.period,
                period_contended: contended_period(st, dev, plan.buffering)?,
                period_multidevice,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.period_contended.total_cmp(&b.period_contended));
    Ok(rows)
}
