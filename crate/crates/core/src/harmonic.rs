//! Harmonic summing and candidate detection.
//!
//! Stretch plane `SP_k(i, j) = FOP(trunc(i / k), floor(j / k))`; harmonic
//! plane `HP_k = HP_{k-1} + SP_k` with `HP_0 = 0`. Every strategy adds the
//! stretch values in ascending `k` per point, so all strategies produce the
//! same single-precision sums as the brute-force oracle.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FdasError, Result};
use crate::prep::{PreparedPlane, RFop};
use crate::signal::{max_template, min_template, row_to_template, template_to_row, Fop, Layout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HarmonicStrategy {
    /// One harmonic plane at a time, each fully materialised;
    /// `n_paral` columns per work item.
    SingleHp { n_paral: usize },
    /// All harmonics per point, reading the FOP directly.
    NaiveMultipleHp,
    /// All harmonics for groups of columns, loading each needed FOP point
    /// once per group.
    MultipleHpN { cols_per_group: usize },
    /// All harmonics streamed from a reordered FOP.
    MultipleHpR {
        cols_per_group: usize,
        points_per_item: usize,
    },
}

impl HarmonicStrategy {
    pub fn name(&self) -> String {
        match self {
            HarmonicStrategy::SingleHp { n_paral } => format!("singlehp-{n_paral}"),
            HarmonicStrategy::NaiveMultipleHp => "naive-multiplehp".into(),
            HarmonicStrategy::MultipleHpN { cols_per_group } => {
                format!("multiplehp-n-{cols_per_group}")
            }
            HarmonicStrategy::MultipleHpR {
                cols_per_group,
                points_per_item,
            } => format!("multiplehp-r-{cols_per_group}-{points_per_item}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            HarmonicStrategy::SingleHp { n_paral } => n_paral >= 1,
            HarmonicStrategy::NaiveMultipleHp => true,
            HarmonicStrategy::MultipleHpN { cols_per_group } => cols_per_group >= 1,
            HarmonicStrategy::MultipleHpR {
                cols_per_group,
                points_per_item,
            } => cols_per_group >= 1 && points_per_item >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(FdasError::Unsupported(format!(
                "{}: parameters must be >= 1",
                self.name()
            )))
        }
    }

    /// Whether intermediate harmonic planes are written out.
    pub fn materializes_planes(&self) -> bool {
        matches!(self, HarmonicStrategy::SingleHp { .. })
    }
}

/// Detection thresholds `TA(k, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdTable {
    n_hp: usize,
    n_temp: usize,
    values: Vec<f32>,
}

impl ThresholdTable {
    /// `values[(k - 1) * n_temp + row]`.
    pub fn new(n_hp: usize, n_temp: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_hp * n_temp {
            return Err(FdasError::LengthMismatch {
                expected: n_hp * n_temp,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FdasError::InvalidConfig {
                field: "thresholds",
                reason: "entries must be finite and positive".into(),
            });
        }
        Ok(Self {
            n_hp,
            n_temp,
            values,
        })
    }

    /// Same threshold for every template of harmonic `k` (`per_harmonic[k-1]`).
    pub fn constant(per_harmonic: &[f32], n_temp: usize) -> Result<Self> {
        let values = per_harmonic
            .iter()
            .flat_map(|&t| std::iter::repeat_n(t, n_temp))
            .collect();
        Self::new(per_harmonic.len(), n_temp, values)
    }

    /// `factor * k * mean(FOP)` per harmonic: a noise-floor-relative default
    /// for runs without configured thresholds.
    pub fn from_mean_power(fop: &Fop, n_hp: usize, factor: f32) -> Result<Self> {
        let n = fop.values().len().max(1) as f64;
        let mean = fop.values().iter().map(|&v| v as f64).sum::<f64>() / n;
        Self::from_mean(mean, n_hp, fop.n_temp(), factor)
    }

    pub fn from_mean(mean: f64, n_hp: usize, n_temp: usize, factor: f32) -> Result<Self> {
        let base = (factor * mean as f32).max(f32::MIN_POSITIVE);
        let taus: Vec<f32> = (1..=n_hp).map(|k| base * k as f32).collect();
        Self::constant(&taus, n_temp)
    }

    pub fn n_hp(&self) -> usize {
        self.n_hp
    }

    pub fn n_temp(&self) -> usize {
        self.n_temp
    }

    #[inline]
    fn at_row(&self, k: usize, row: usize) -> f32 {
        self.values[(k - 1) * self.n_temp + row]
    }

    pub fn get(&self, k: usize, i: i32) -> Option<f32> {
        let row = template_to_row(i, self.n_temp)?;
        (1..=self.n_hp).contains(&k).then(|| self.at_row(k, row))
    }

    /// Table with every entry multiplied by `factor` (must stay positive).
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.n_hp,
            self.n_temp,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub harmonic: u32,
    pub template: i32,
    pub channel: u32,
    pub power: f32,
}

/// Ranking within one harmonic plane: higher power first, then lower
/// channel, then lower template.
#[derive(Clone, Copy, Debug)]
struct Ranked(Candidate);

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .power
            .total_cmp(&other.0.power)
            .then_with(|| other.0.channel.cmp(&self.0.channel))
            .then_with(|| other.0.template.cmp(&self.0.template))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

/// Canonical order: harmonic ascending, power descending, channel, template.
pub fn canonical_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.harmonic
        .cmp(&b.harmonic)
        .then_with(|| Ranked(*b).cmp(&Ranked(*a)))
}

/// Top-`n_cand` candidates per harmonic plane.
#[derive(Clone, Debug)]
pub struct CandidateList {
    n_cand: usize,
    per_k: Vec<BinaryHeap<Reverse<Ranked>>>,
}

impl CandidateList {
    pub fn new(n_hp: usize, n_cand: usize) -> Self {
        Self {
            n_cand,
            per_k: (0..n_hp).map(|_| BinaryHeap::with_capacity(n_cand + 1)).collect(),
        }
    }

    pub fn n_cand(&self) -> usize {
        self.n_cand
    }

    pub fn n_hp(&self) -> usize {
        self.per_k.len()
    }

    /// Offers a harmonic-plane value. It is kept only if it strictly exceeds
    /// `threshold`; when plane `k` already holds `n_cand` entries it replaces
    /// the lowest-ranked one only if it ranks higher.
    pub fn offer(&mut self, k: usize, i: i32, j: usize, power: f32, threshold: f32) {
        // written so that NaN never passes
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(power > threshold) || self.n_cand == 0 {
            return;
        }
        let cand = Ranked(Candidate {
            harmonic: k as u32,
            template: i,
            channel: j as u32,
            power,
        });
        let heap = &mut self.per_k[k - 1];
        if heap.len() < self.n_cand {
            heap.push(Reverse(cand));
        } else if let Some(mut worst) = heap.peek_mut() {
            if cand > worst.0 {
                *worst = Reverse(cand);
            }
        }
    }

    /// Threshold test and insertion against a [`ThresholdTable`].
    pub fn detect(&mut self, power: f32, k: usize, i: i32, j: usize, thresholds: &ThresholdTable) {
        if let Some(ta) = thresholds.get(k, i) {
            self.offer(k, i, j, power, ta);
        }
    }

    pub fn count(&self, k: usize) -> usize {
        self.per_k.get(k - 1).map_or(0, BinaryHeap::len)
    }

    pub fn len(&self) -> usize {
        self.per_k.iter().map(BinaryHeap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries in canonical order.
    pub fn entries(&self) -> Vec<Candidate> {
        let mut out: Vec<Candidate> = self
            .per_k
            .iter()
            .flat_map(|h| h.iter().map(|r| r.0 .0))
            .collect();
        out.sort_by(canonical_cmp);
        out
    }

    /// Union, then keep the best `n_cand` per harmonic.
    pub fn merge(mut self, other: CandidateList) -> CandidateList {
        for (mine, theirs) in self.per_k.iter_mut().zip(other.per_k) {
            for Reverse(c) in theirs {
                if mine.len() < self.n_cand {
                    mine.push(Reverse(c));
                } else if let Some(mut worst) = mine.peek_mut() {
                    if c > worst.0 {
                        *worst = Reverse(c);
                    }
                }
            }
        }
        self
    }

    pub fn contains_channel(&self, channel: usize) -> bool {
        self.per_k
            .iter()
            .any(|h| h.iter().any(|r| r.0 .0.channel as usize == channel))
    }
}

impl PartialEq for CandidateList {
    fn eq(&self, other: &Self) -> bool {
        self.n_cand == other.n_cand
            && self.n_hp() == other.n_hp()
            && self
                .entries()
                .iter()
                .zip(other.entries().iter())
                .all(|(a, b)| a == b && a.power.to_bits() == b.power.to_bits())
            && self.len() == other.len()
    }
}

/// `SP_k(i, j)` read straight from the FOP.
pub fn stretch_lookup(fop: &Fop, k: usize, i: i32, j: usize) -> Result<f32> {
    if k == 0 {
        return Err(FdasError::OutOfRange("harmonic index 0".into()));
    }
    if i < fop.min_template() || i > fop.max_template() {
        return Err(FdasError::OutOfRange(format!(
            "template {i} outside {}..={}",
            fop.min_template(),
            fop.max_template()
        )));
    }
    if j >= fop.n_chan() {
        return Err(FdasError::OutOfRange(format!(
            "channel {j} >= {}",
            fop.n_chan()
        )));
    }
    Ok(fop
        .get(i / k as i32, j / k)
        .expect("stretched index inside the plane"))
}

fn check_dims(n_temp: usize, thresholds: &ThresholdTable, n_hp: usize, n_cand: usize) -> Result<()> {
    if n_hp == 0 || n_cand == 0 {
        return Err(FdasError::InvalidConfig {
            field: if n_hp == 0 { "n_hp" } else { "n_cand" },
            reason: "must be >= 1".into(),
        });
    }
    if thresholds.n_hp() != n_hp || thresholds.n_temp() != n_temp {
        return Err(FdasError::Structure {
            what: "threshold table",
            reason: format!(
                "is {}x{}, plane needs {n_hp}x{n_temp}",
                thresholds.n_hp(),
                thresholds.n_temp()
            ),
        });
    }
    Ok(())
}

/// Brute-force harmonic summing: materialises every `HP_k` (k = 1..=n_hp)
/// and detects over each. This is the reference for all other strategies.
pub fn harmonic_sum_naive(
    fop: &Fop,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
) -> Result<(Vec<Fop>, CandidateList)> {
    let n_temp = fop.n_temp();
    let n_chan = fop.n_chan();
    check_dims(n_temp, thresholds, n_hp, n_cand)?;
    let mut cl = CandidateList::new(n_hp, n_cand);
    let mut planes: Vec<Fop> = Vec::with_capacity(n_hp);
    let mut prev = vec![0.0f32; n_temp * n_chan];
    for k in 1..=n_hp {
        let mut cur = vec![0.0f32; n_temp * n_chan];
        for i in min_template(n_temp)..=max_template(n_temp) {
            let row = template_to_row(i, n_temp).expect("loop stays in range");
            for j in 0..n_chan {
                let sp = stretch_lookup(fop, k, i, j)?;
                let hp = prev[row * n_chan + j] + sp;
                cur[row * n_chan + j] = hp;
                cl.detect(hp, k, i, j, thresholds);
            }
        }
        planes.push(Fop::from_parts_unchecked(n_temp, n_chan, Layout::TemplateMajor, cur.clone()));
        prev = cur;
    }
    Ok((planes, cl))
}

/// Access and timing statistics of one harmonic-summing run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HmStats {
    pub strategy: String,
    /// Milliseconds.
    pub t_hm: f64,
    /// Values read from the input plane (FOP or rFOP, padding included) and,
    /// for SingleHP, from the previously materialised harmonic plane.
    pub plane_reads: u64,
    /// Harmonic-plane values written to plane storage.
    pub plane_writes: u64,
    pub materialized_bytes: u64,
}

/// Storage row of `trunc(i / k)` for every storage row, per harmonic.
fn stretched_rows(n_temp: usize, n_hp: usize) -> Vec<Vec<usize>> {
    (1..=n_hp)
        .map(|k| {
            (0..n_temp)
                .map(|row| {
                    let i = row_to_template(row, n_temp);
                    template_to_row(i / k as i32, n_temp).expect("stretched template in range")
                })
                .collect()
        })
        .collect()
}

/// Runs `strategy` over a prepared plane. Candidate lists equal those of
/// [`harmonic_sum_naive`] on the same logical FOP for every strategy and any
/// thread count.
pub fn harmonic_sum(
    plane: &PreparedPlane,
    strategy: HarmonicStrategy,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
    threads: usize,
) -> Result<(CandidateList, HmStats)> {
    strategy.validate()?;
    check_dims(plane.n_temp(), thresholds, n_hp, n_cand)?;
    let pool = crate::conv::thread_pool(threads)?;
    let start = Instant::now();
    let (cl, mut stats) = pool.install(|| match (strategy, plane) {
        (HarmonicStrategy::SingleHp { n_paral }, PreparedPlane::Fop(fop)) => {
            Ok(single_hp(fop, n_paral, thresholds, n_hp, n_cand))
        }
        (HarmonicStrategy::NaiveMultipleHp, PreparedPlane::Fop(fop)) => {
            Ok(naive_multiple_hp(fop, thresholds, n_hp, n_cand))
        }
        (HarmonicStrategy::MultipleHpN { cols_per_group }, PreparedPlane::Fop(fop)) => {
            Ok(multiple_hp_n(fop, cols_per_group, thresholds, n_hp, n_cand))
        }
        (
            HarmonicStrategy::MultipleHpR {
                cols_per_group,
                points_per_item,
            },
            PreparedPlane::RFop(rfop),
        ) => multiple_hp_r(rfop, cols_per_group, points_per_item, thresholds, n_hp, n_cand),
        (HarmonicStrategy::MultipleHpR { .. }, PreparedPlane::Fop(_)) => Err(FdasError::WrongPlane(
            "MultipleHP-R needs a reordered FOP".into(),
        )),
        (s, PreparedPlane::RFop(_)) => Err(FdasError::WrongPlane(format!(
            "{} reads a standard FOP, not a reordered one",
            s.name()
        ))),
    })?;
    stats.strategy = strategy.name();
    stats.t_hm = start.elapsed().as_secs_f64() * 1e3;
    Ok((cl, stats))
}

fn single_hp(
    fop: &Fop,
    n_paral: usize,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
) -> (CandidateList, HmStats) {
    let n_temp = fop.n_temp();
    let n_chan = fop.n_chan();
    let srows = stretched_rows(n_temp, n_hp);
    let mut hp = vec![0.0f32; n_temp * n_chan];
    let mut cl = CandidateList::new(n_hp, n_cand);
    let mut stats = HmStats::default();
    for k in 1..=n_hp {
        let srow = &srows[k - 1];
        let part = hp
            .par_chunks_mut(n_chan)
            .enumerate()
            .fold(
                || CandidateList::new(n_hp, n_cand),
                |mut local, (row, plane_row)| {
                    let i = row_to_template(row, n_temp);
                    for cols in (0..n_chan).step_by(n_paral) {
                        #[allow(clippy::needless_range_loop)]
                        for j in cols..(cols + n_paral).min(n_chan) {
                            let v = plane_row[j] + fop.at(srow[row], j / k);
                            plane_row[j] = v;
                            local.offer(k, i, j, v, thresholds.at_row(k, row));
                        }
                    }
                    local
                },
            )
            .reduce(|| CandidateList::new(n_hp, n_cand), CandidateList::merge);
        cl = cl.merge(part);
        let points = (n_temp * n_chan) as u64;
        stats.plane_reads += points + if k > 1 { points } else { 0 };
        stats.plane_writes += points;
    }
    stats.materialized_bytes = stats.plane_writes * 4;
    (cl, stats)
}

fn naive_multiple_hp(
    fop: &Fop,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
) -> (CandidateList, HmStats) {
    let n_temp = fop.n_temp();
    let n_chan = fop.n_chan();
    let srows = stretched_rows(n_temp, n_hp);
    let cl = (0..n_temp)
        .into_par_iter()
        .fold(
            || CandidateList::new(n_hp, n_cand),
            |mut local, row| {
                let i = row_to_template(row, n_temp);
                for j in 0..n_chan {
                    let mut acc = 0.0f32;
                    for k in 1..=n_hp {
                        acc += fop.at(srows[k - 1][row], j / k);
                        local.offer(k, i, j, acc, thresholds.at_row(k, row));
                    }
                }
                local
            },
        )
        .reduce(|| CandidateList::new(n_hp, n_cand), CandidateList::merge);
    let stats = HmStats {
        plane_reads: (n_hp * n_temp * n_chan) as u64,
        ..HmStats::default()
    };
    (cl, stats)
}

/// Distinct source columns feeding output columns `lo..hi` over all
/// harmonics, ascending.
fn group_source_columns(lo: usize, hi: usize, n_hp: usize) -> Vec<usize> {
    let base = lo / n_hp;
    let mut needed = vec![false; hi - base];
    for k in 1..=n_hp {
        for s in lo / k..=(hi - 1) / k {
            needed[s - base] = true;
        }
    }
    needed
        .iter()
        .enumerate()
        .filter_map(|(d, &n)| n.then_some(base + d))
        .collect()
}

fn multiple_hp_n(
    fop: &Fop,
    cols_per_group: usize,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
) -> (CandidateList, HmStats) {
    let n_temp = fop.n_temp();
    let n_chan = fop.n_chan();
    let srows = stretched_rows(n_temp, n_hp);
    let groups = n_chan.div_ceil(cols_per_group);
    let (cl, reads) = (0..groups)
        .into_par_iter()
        .fold(
            || (CandidateList::new(n_hp, n_cand), 0u64),
            |(mut local, mut reads), g| {
                let lo = g * cols_per_group;
                let hi = (lo + cols_per_group).min(n_chan);
                let cols = group_source_columns(lo, hi, n_hp);
                let base = lo / n_hp;
                // local copy of every needed point: [row][col - base]
                let width = hi - base;
                let mut slot = vec![usize::MAX; width];
                for (idx, &c) in cols.iter().enumerate() {
                    slot[c - base] = idx;
                }
                let mut buf = vec![0.0f32; n_temp * cols.len()];
                for row in 0..n_temp {
                    for (idx, &c) in cols.iter().enumerate() {
                        buf[row * cols.len() + idx] = fop.at(row, c);
                    }
                }
                reads += buf.len() as u64;
                #[allow(clippy::needless_range_loop)]
                for row in 0..n_temp {
                    let i = row_to_template(row, n_temp);
                    for j in lo..hi {
                        let mut acc = 0.0f32;
                        for k in 1..=n_hp {
                            let src = srows[k - 1][row];
                            acc += buf[src * cols.len() + slot[j / k - base]];
                            local.offer(k, i, j, acc, thresholds.at_row(k, row));
                        }
                    }
                }
                (local, reads)
            },
        )
        .reduce(
            || (CandidateList::new(n_hp, n_cand), 0),
            |(a, ra), (b, rb)| (a.merge(b), ra + rb),
        );
    let stats = HmStats {
        plane_reads: reads,
        ..HmStats::default()
    };
    (cl, stats)
}

fn multiple_hp_r(
    rfop: &RFop,
    cols_per_group: usize,
    points_per_item: usize,
    thresholds: &ThresholdTable,
    n_hp: usize,
    n_cand: usize,
) -> Result<(CandidateList, HmStats)> {
    if rfop.block_cols() != cols_per_group || rfop.n_hp() != n_hp {
        return Err(FdasError::WrongPlane(format!(
            "rFOP built for {} columns x {} harmonics, strategy needs {cols_per_group} x {n_hp}",
            rfop.block_cols(),
            rfop.n_hp()
        )));
    }
    let n_temp = rfop.n_temp();
    let n_chan = rfop.n_chan();
    let cl = (0..rfop.block_count())
        .into_par_iter()
        .fold(
            || CandidateList::new(n_hp, n_cand),
            |mut local, b| {
                let block = rfop.block(b);
                let lo = b * cols_per_group;
                let hi = (lo + cols_per_group).min(n_chan);
                let segs: Vec<_> = (1..=n_hp).map(|k| rfop.segment(b, k)).collect();
                for row in 0..n_temp {
                    let i = row_to_template(row, n_temp);
                    for item in (lo..hi).step_by(points_per_item) {
                        for j in item..(item + points_per_item).min(hi) {
                            let mut acc = 0.0f32;
                            for (k, seg) in (1..=n_hp).zip(&segs) {
                                acc += block[seg.offset + row * seg.src_len + (j / k - seg.src_start)];
                                local.offer(k, i, j, acc, thresholds.at_row(k, row));
                            }
                        }
                    }
                }
                local
            },
        )
        .reduce(|| CandidateList::new(n_hp, n_cand), CandidateList::merge);
    let stats = HmStats {
        plane_reads: rfop.len() as u64,
        ..HmStats::default()
    };
    Ok((cl, stats))
}
