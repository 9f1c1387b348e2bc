//! Reference implementations used only by the test suites. None of them
//! call into the library's numeric code.
#![allow(dead_code)]

use std::f64::consts::PI;

use fdas_core::harmonic::Candidate;
use fdas_core::Complex32;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_series(rng: &mut impl Rng, n: usize) -> Vec<Complex32> {
    (0..n)
        .map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// O(N^2) DFT in double precision, unnormalised forward or 1/N inverse.
pub fn direct_dft(x: &[Complex32], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = sign * 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                acc += Complex64::new(v.re as f64, v.im as f64) * Complex64::from_polar(1.0, a);
            }
            acc * scale
        })
        .collect()
}

/// Causal linear convolution truncated to the input length, double precision.
pub fn direct_conv(x: &[Complex32], h: &[Complex32]) -> Vec<Complex64> {
    (0..x.len())
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, c) in h.iter().enumerate().take(i + 1) {
                let xv = x[i - m];
                acc += Complex64::new(xv.re as f64, xv.im as f64) * Complex64::new(c.re as f64, c.im as f64);
            }
            acc
        })
        .collect()
}

pub fn power(y: &[Complex64]) -> Vec<f64> {
    y.iter().map(|c| c.norm_sqr()).collect()
}

/// `|a - b| <= rel * max(|b|, floor)` elementwise; returns the first violation.
pub fn check_close(a: &[f32], b: &[f64], rel: f64, floor: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("length {} vs {}", a.len(), b.len()));
    }
    for (p, (&x, &y)) in a.iter().zip(b).enumerate() {
        if (x as f64 - y).abs() > rel * y.abs().max(floor) {
            return Err(format!("index {p}: {x} vs {y}"));
        }
    }
    Ok(())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Signed template of storage row `r` for `n` templates (row 0 is the most
/// negative template).
pub fn template_of(r: usize, n: usize) -> i32 {
    r as i32 - (n / 2) as i32
}

pub fn row_of(i: i32, n: usize) -> usize {
    (i + (n / 2) as i32) as usize
}

/// Brute-force harmonic summing over a template-major plane: builds every
/// harmonic plane by explicit stretching and accumulation, collects all
/// threshold exceedances, keeps the best `n_cand` per harmonic by
/// (power desc, channel asc, template asc), and returns them ordered by
/// harmonic then that ranking.
pub fn brute_force_candidates(
    plane: &[f32],
    n_temp: usize,
    n_chan: usize,
    n_hp: usize,
    n_cand: usize,
    threshold: impl Fn(usize, i32) -> f32,
) -> Vec<Candidate> {
    let fop = |i: i32, j: usize| plane[row_of(i, n_temp) * n_chan + j];
    let mut hp = vec![0.0f32; n_temp * n_chan];
    let mut out = Vec::new();
    for k in 1..=n_hp {
        let mut found = Vec::new();
        for r in 0..n_temp {
            let i = template_of(r, n_temp);
            for j in 0..n_chan {
                // truncation toward zero on templates, floor on channels
                let sp = fop(i / k as i32, j / k);
                hp[r * n_chan + j] += sp;
                let v = hp[r * n_chan + j];
                if v > threshold(k, i) {
                    found.push(Candidate {
                        harmonic: k as u32,
                        template: i,
                        channel: j as u32,
                        power: v,
                    });
                }
            }
        }
        found.sort_by(|a, b| {
            b.power
                .total_cmp(&a.power)
                .then(a.channel.cmp(&b.channel))
                .then(a.template.cmp(&b.template))
        });
        found.truncate(n_cand);
        out.extend(found);
    }
    out
}

/// Harmonic planes `HP_1..=HP_n_hp` computed as independent sums
/// `sum_{m<=k} SP_m`, each in ascending `m`.
pub fn harmonic_planes(plane: &[f32], n_temp: usize, n_chan: usize, n_hp: usize) -> Vec<Vec<f32>> {
    (1..=n_hp)
        .map(|k| {
            let mut out = vec![0.0f32; n_temp * n_chan];
            for r in 0..n_temp {
                let i = template_of(r, n_temp);
                for j in 0..n_chan {
                    let mut s = 0.0f32;
                    for m in 1..=k {
                        s += plane[row_of(i / m as i32, n_temp) * n_chan + j / m];
                    }
                    out[r * n_chan + j] = s;
                }
            }
            out
        })
        .collect()
}

/// A kernel in the discrete-event oracle: work in nominal time units and
/// bandwidth demand in units of the device bandwidth.
#[derive(Clone, Debug)]
pub struct DesKernel {
    pub label: String,
    pub work: f64,
    pub demand: f64,
}

#[derive(Clone, Debug)]
pub struct DesSpan {
    pub stream: usize,
    pub label: String,
    pub start: f64,
    pub end: f64,
}

/// Fixed-step simulation of a multiple-buffered pipeline.
///
/// Each stream is the kernel sequence one buffer slot executes per cycle.
/// Cycles end at a barrier once every stream finished its sequence; input
/// `n` occupies stream `s` in cycle `n + s`, so running `cycles` cycles
/// processes a stream of inputs with `streams - 1` fill cycles. Memory is
/// shared per step: any kernel whose demand reaches the full bandwidth
/// holds the bus and everything else waits; with several such kernels they
/// split it evenly; otherwise all slow down together when total demand
/// exceeds one.
///
/// Returns the mean cycle length after fill and the spans of the last cycle.
pub fn des_pipeline(streams: &[Vec<DesKernel>], cycles: usize, dt: f64) -> (f64, Vec<DesSpan>) {
    let fill = streams.len().saturating_sub(1);
    let mut t = 0.0f64;
    let mut steady = Vec::new();
    let mut last_spans = Vec::new();
    for cycle in 0..cycles {
        let start = t;
        let mut idx = vec![0usize; streams.len()];
        let mut done = vec![0.0f64; streams.len()];
        let mut begun = vec![t; streams.len()];
        let mut spans = Vec::new();
        // skip empty kernels
        for s in 0..streams.len() {
            while idx[s] < streams[s].len() && streams[s][idx[s]].work <= 0.0 {
                idx[s] += 1;
            }
        }
        while (0..streams.len()).any(|s| idx[s] < streams[s].len()) {
            let active: Vec<usize> = (0..streams.len()).filter(|&s| idx[s] < streams[s].len()).collect();
            let demand = |s: usize| streams[s][idx[s]].demand;
            let hogs: Vec<usize> = active.iter().copied().filter(|&s| demand(s) >= 1.0).collect();
            let total: f64 = active.iter().map(|&s| demand(s)).sum();
            t += dt;
            for &s in &active {
                let speed = if !hogs.is_empty() {
                    if hogs.contains(&s) {
                        1.0 / hogs.len() as f64
                    } else {
                        0.0
                    }
                } else if total > 1.0 {
                    1.0 / total
                } else {
                    1.0
                };
                done[s] += speed * dt;
                let k = &streams[s][idx[s]];
                if done[s] >= k.work - 1e-12 {
                    spans.push(DesSpan {
                        stream: s,
                        label: k.label.clone(),
                        start: begun[s],
                        end: t,
                    });
                    done[s] = 0.0;
                    begun[s] = t;
                    idx[s] += 1;
                    while idx[s] < streams[s].len() && streams[s][idx[s]].work <= 0.0 {
                        idx[s] += 1;
                    }
                }
            }
        }
        if cycle >= fill {
            steady.push(t - start);
        }
        last_spans = spans
            .into_iter()
            .map(|mut sp| {
                sp.start -= start;
                sp.end -= start;
                sp
            })
            .collect();
    }
    (mean(&steady), last_spans)
}

/// One row of the combined-kernel latency table: serial latency, buffering
/// label, pipeline period, and the three-device period when reported.
#[derive(Clone, Copy, Debug)]
pub struct LatencyRow {
    pub name: &'static str,
    pub serial: f64,
    pub triple: bool,
    pub period: f64,
    pub three_devices: Option<f64>,
}

pub const LATENCY_TABLE: &[LatencyRow] = &[
    LatencyRow { name: "ola-128+naive-multiplehp", serial: 2121.0, triple: false, period: 1698.0, three_devices: Some(568.0) },
    LatencyRow { name: "ola-256+naive-multiplehp", serial: 1278.0, triple: false, period: 854.0, three_devices: Some(286.0) },
    LatencyRow { name: "ola-128+multiplehp-n-1", serial: 2916.0, triple: false, period: 2219.0, three_devices: Some(742.0) },
    LatencyRow { name: "ola-128+multiplehp-r-16-4", serial: 3917.0, triple: false, period: 1935.0, three_devices: Some(647.0) },
    LatencyRow { name: "ola-128+multiplehp-r-16-4 (host prep)", serial: 2727.0, triple: false, period: 2052.0, three_devices: Some(686.0) },
    LatencyRow { name: "ola-128+singlehp-8", serial: 2662.0, triple: false, period: 1966.0, three_devices: Some(657.0) },
    LatencyRow { name: "aols-2048+naive-multiplehp", serial: 856.0, triple: false, period: 570.0, three_devices: Some(190.0) },
    LatencyRow { name: "aols-2048+multiplehp-n-1", serial: 976.0, triple: false, period: 661.0, three_devices: Some(224.0) },
    LatencyRow { name: "aols-2048+multiplehp-r-16-4", serial: 8780.0, triple: false, period: 6630.0, three_devices: Some(2219.0) },
    LatencyRow { name: "aols-2048+multiplehp-r-16-4 (host prep)", serial: 972.0, triple: false, period: 633.0, three_devices: None },
    LatencyRow { name: "aols-2048+singlehp-8", serial: 786.0, triple: false, period: 682.0, three_devices: Some(237.0) },
];

/// FT latency of the overlap-save filter on the discrete-card system.
pub const AOLS_FT_MS: f64 = 190.0;

/// Stage split of a double-buffered row: the slowest stage `m` satisfies
/// `period = max(m, serial - m)`, so `m = max(period, serial - period)`;
/// the remaining latency is split evenly between the other two stages.
pub fn double_row_stages(row: &LatencyRow) -> (f64, f64, f64) {
    let m = row.period.max(row.serial - row.period);
    let rest = (row.serial - m) / 2.0;
    (m, rest, rest)
}

/// Stages of the one-third harmonic-summing rows, rebuilt from their
/// single-device parents: the parent's period is its harmonic-summing
/// latency (split three ways), and the FT latency is the measured AOLS one.
pub fn third_row_stages(parent: &LatencyRow) -> (f64, f64, f64) {
    let t_hm = parent.period;
    let t_fop = parent.serial - t_hm - AOLS_FT_MS;
    (AOLS_FT_MS, t_fop, t_hm / 3.0)
}
