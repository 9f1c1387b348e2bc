//! FOP preparation: the discard, transpose and reorder transforms that adapt
//! a convolution output plane to the input a harmonic-summing strategy
//! expects.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{ConvFamily, ConvOutput, ConvStrategy, RawChunks};
use crate::error::{FdasError, Result};
use crate::harmonic::HarmonicStrategy;
use crate::signal::{min_template, template_to_row, Fop, Layout};

/// Removes the first `overlap` points of every chunk, concatenates the rest
/// and truncates each row to `valid_len`. Output is row-major,
/// `rows * valid_len` points.
pub fn discard<T: Copy>(raw: &RawChunks<T>) -> Result<Vec<T>> {
    let bad = |reason: String| FdasError::Structure {
        what: "chunked output",
        reason,
    };
    if raw.overlap >= raw.chunk_len {
        return Err(bad(format!(
            "overlap {} does not fit in chunk {}",
            raw.overlap, raw.chunk_len
        )));
    }
    if raw.data.len() != raw.rows * raw.row_len() {
        return Err(bad(format!(
            "{} rows of {} chunks x {} points need {} values, got {}",
            raw.rows,
            raw.chunk_count,
            raw.chunk_len,
            raw.rows * raw.row_len(),
            raw.data.len()
        )));
    }
    if raw.chunk_count * raw.advance() < raw.valid_len {
        return Err(bad(format!(
            "{} chunks yield {} valid points, fewer than {}",
            raw.chunk_count,
            raw.chunk_count * raw.advance(),
            raw.valid_len
        )));
    }
    let mut out = Vec::with_capacity(raw.rows * raw.valid_len);
    for row in raw.data.chunks_exact(raw.row_len().max(1)).take(raw.rows) {
        let start = out.len();
        for chunk in row.chunks_exact(raw.chunk_len) {
            out.extend_from_slice(&chunk[raw.overlap..]);
        }
        out.truncate(start + raw.valid_len);
    }
    Ok(out)
}

/// [`discard`] for chunked power output, giving a template-major FOP.
pub fn discard_fop(raw: &RawChunks<f32>) -> Result<Fop> {
    let values = discard(raw)?;
    Fop::from_values(raw.rows, raw.valid_len, values)
}

const TILE: usize = 32;

/// Physical transpose. The logical plane is unchanged; only the layout flips.
pub fn transpose(fop: &Fop) -> Fop {
    let (rows, cols) = (fop.rows(), fop.cols());
    let src = fop.values();
    let mut out = vec![0.0f32; src.len()];
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    let layout = match fop.layout() {
        Layout::TemplateMajor => Layout::ChannelMajor,
        Layout::ChannelMajor => Layout::TemplateMajor,
    };
    Fop::from_parts_unchecked(fop.n_temp(), fop.n_chan(), layout, out)
}

/// Where one harmonic's source points sit inside an rFOP block: `n_temp`
/// stretched rows of `src_len` source columns starting at column
/// `src_start`, beginning at `offset` within the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RfopSegment {
    pub offset: usize,
    pub src_start: usize,
    pub src_len: usize,
}

/// Reordered and padded FOP. Block `b` holds, contiguously, every FOP point
/// needed to evaluate all harmonic planes over output columns
/// `[b * block_cols, (b + 1) * block_cols)`, ordered harmonic-major, then
/// stretched template row, then source column, and padded at the tail with
/// `pad_value` to a common power-of-two length.
#[derive(Clone, Debug, PartialEq)]
pub struct RFop {
    n_temp: usize,
    n_chan: usize,
    block_cols: usize,
    n_hp: usize,
    block_len: usize,
    pad_value: f32,
    blocks: Vec<f32>,
    segments: Vec<RfopSegment>,
}

/// Block layout for the given plane shape: segments (block-major, one per
/// harmonic) and the common padded block length.
pub fn rfop_geometry(
    n_temp: usize,
    n_chan: usize,
    block_cols: usize,
    n_hp: usize,
) -> Result<(Vec<RfopSegment>, usize)> {
    if block_cols == 0 || n_hp == 0 || n_temp == 0 || n_chan == 0 {
        return Err(FdasError::Structure {
            what: "rFOP",
            reason: "block columns, harmonics and plane dimensions must be >= 1".into(),
        });
    }
    let block_count = n_chan.div_ceil(block_cols);
    let mut segments = Vec::with_capacity(block_count * n_hp);
    let mut longest = 0;
    for b in 0..block_count {
        let lo = b * block_cols;
        let hi = ((b + 1) * block_cols).min(n_chan);
        let mut offset = 0;
        for k in 1..=n_hp {
            let src_start = lo / k;
            let src_len = (hi - 1) / k - src_start + 1;
            segments.push(RfopSegment {
                offset,
                src_start,
                src_len,
            });
            offset += n_temp * src_len;
        }
        longest = longest.max(offset);
    }
    Ok((segments, longest.next_power_of_two()))
}

impl RFop {
    pub fn n_temp(&self) -> usize {
        self.n_temp
    }

    pub fn n_chan(&self) -> usize {
        self.n_chan
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    pub fn n_hp(&self) -> usize {
        self.n_hp
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len() / self.block_len
    }

    pub fn pad_value(&self) -> f32 {
        self.pad_value
    }

    pub fn block(&self, b: usize) -> &[f32] {
        &self.blocks[b * self.block_len..(b + 1) * self.block_len]
    }

    pub fn blocks(&self) -> &[f32] {
        &self.blocks
    }

    pub fn segment(&self, block: usize, k: usize) -> RfopSegment {
        self.segments[block * self.n_hp + k - 1]
    }

    /// Total stored points including duplication and padding.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Offset within block `j / block_cols` of the source point feeding
    /// harmonic `k` at signed template `i`, channel `j`.
    pub fn locate(&self, k: usize, i: i32, j: usize) -> Option<usize> {
        if k == 0 || k > self.n_hp || j >= self.n_chan {
            return None;
        }
        let row = template_to_row(i, self.n_temp)?;
        let seg = self.segment(j / self.block_cols, k);
        Some(seg.offset + row * seg.src_len + (j / k - seg.src_start))
    }

    /// Stretch-plane value `SP_k(i, j)` read from the reordered layout.
    pub fn value(&self, k: usize, i: i32, j: usize) -> Option<f32> {
        let off = self.locate(k, i, j)?;
        Some(self.block(j / self.block_cols)[off])
    }

    /// Rebuilds an rFOP from serialized blocks; the layout descriptor is
    /// recomputed from the plane shape.
    pub fn from_blocks(
        n_temp: usize,
        n_chan: usize,
        block_cols: usize,
        n_hp: usize,
        block_len: usize,
        blocks: Vec<f32>,
    ) -> Result<Self> {
        let (segments, expected_len) = rfop_geometry(n_temp, n_chan, block_cols, n_hp)?;
        let block_count = n_chan.div_ceil(block_cols);
        if block_len != expected_len || blocks.len() != block_count * block_len {
            return Err(FdasError::Structure {
                what: "rFOP",
                reason: format!(
                    "expected {block_count} blocks of {expected_len} points, got block length {block_len} and {} values",
                    blocks.len()
                ),
            });
        }
        Ok(Self {
            n_temp,
            n_chan,
            block_cols,
            n_hp,
            block_len,
            pad_value: 0.0,
            blocks,
            segments,
        })
    }
}

/// Builds the reordered FOP for blocks of `block_cols` output columns and
/// harmonics `1..=n_hp`. Stretching uses truncation toward zero on the
/// signed template axis and floor on the channel axis.
pub fn reorder(fop: &Fop, block_cols: usize, n_hp: usize) -> Result<RFop> {
    let n_temp = fop.n_temp();
    let n_chan = fop.n_chan();
    let (segments, block_len) = rfop_geometry(n_temp, n_chan, block_cols, n_hp)?;
    let block_count = n_chan.div_ceil(block_cols);
    let lo_template = min_template(n_temp);
    let mut blocks = vec![0.0f32; block_count * block_len];
    blocks
        .par_chunks_mut(block_len)
        .enumerate()
        .for_each(|(b, block)| {
            for k in 1..=n_hp {
                let seg = segments[b * n_hp + k - 1];
                let mut pos = seg.offset;
                for row in 0..n_temp {
                    let i = row as i32 + lo_template;
                    let src_row = template_to_row(i / k as i32, n_temp)
                        .expect("stretched template stays in range");
                    for s in seg.src_start..seg.src_start + seg.src_len {
                        block[pos] = fop.at(src_row, s);
                        pos += 1;
                    }
                }
            }
        });
    Ok(RFop {
        n_temp,
        n_chan,
        block_cols,
        n_hp,
        block_len,
        pad_value: 0.0,
        blocks,
        segments,
    })
}

/// Which preparation transforms fire (the B1, B2, B3 flags).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepSteps {
    pub discard: bool,
    pub transpose: bool,
    pub reorder: bool,
}

impl PrepSteps {
    pub const NONE: PrepSteps = PrepSteps {
        discard: false,
        transpose: false,
        reorder: false,
    };

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.discard {
            parts.push("discard");
        }
        if self.transpose {
            parts.push("transpose");
        }
        if self.reorder {
            parts.push("reorder");
        }
        if parts.is_empty() {
            "-".into()
        } else {
            parts.join("+")
        }
    }

    /// Parses `discard+transpose`, `transpose,reorder`, `none` or `-`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut steps = PrepSteps::NONE;
        let s = s.trim();
        if s.is_empty() || s == "-" || s.eq_ignore_ascii_case("none") {
            return Ok(steps);
        }
        for part in s.split(['+', ',']) {
            match part.trim() {
                "discard" => steps.discard = true,
                "transpose" => steps.transpose = true,
                "reorder" => steps.reorder = true,
                other => {
                    return Err(FdasError::Unsupported(format!(
                        "unknown preparation step `{other}`"
                    )))
                }
            }
        }
        Ok(steps)
    }
}

/// Transforms needed between a convolution strategy and a harmonic-summing
/// strategy. Time-domain and overlap-save rows follow the measured kernel
/// combinations; the naive frequency-domain filter emits a full plane with
/// no overlap slices, so it matches overlap-save without the discard.
pub fn required_steps(from: ConvStrategy, to: HarmonicStrategy) -> PrepSteps {
    use HarmonicStrategy as H;
    let (transpose, reorder) = match (from.family(), to) {
        (ConvFamily::TimeDomain, H::SingleHp { .. } | H::NaiveMultipleHp) => (false, false),
        (ConvFamily::TimeDomain, H::MultipleHpN { .. }) => (true, false),
        (ConvFamily::TimeDomain, H::MultipleHpR { .. }) => (true, true),
        (ConvFamily::FrequencyDomain, H::SingleHp { .. }) => (false, false),
        (ConvFamily::FrequencyDomain, H::NaiveMultipleHp | H::MultipleHpN { .. }) => (true, false),
        (ConvFamily::FrequencyDomain, H::MultipleHpR { .. }) => (true, true),
    };
    PrepSteps {
        discard: matches!(from, ConvStrategy::OlsFd { .. }),
        transpose,
        reorder,
    }
}

/// Where the preparation runs. Numerics are identical; only timing
/// attribution differs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepPath {
    #[default]
    Device,
    Host,
}

/// Plane handed to harmonic summing.
#[derive(Clone, Debug, PartialEq)]
pub enum PreparedPlane {
    Fop(Fop),
    RFop(RFop),
}

impl PreparedPlane {
    pub fn n_temp(&self) -> usize {
        match self {
            PreparedPlane::Fop(f) => f.n_temp(),
            PreparedPlane::RFop(r) => r.n_temp(),
        }
    }

    pub fn n_chan(&self) -> usize {
        match self {
            PreparedPlane::Fop(f) => f.n_chan(),
            PreparedPlane::RFop(r) => r.n_chan(),
        }
    }
}

/// Measured preparation cost in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepTiming {
    pub steps: PrepSteps,
    pub path: PrepPath,
    pub t_discard: f64,
    pub t_transpose: f64,
    pub t_reorder: f64,
    pub bytes_moved: u64,
}

impl PrepTiming {
    pub fn t_fop(&self) -> f64 {
        let b = |on: bool, t: f64| if on { t } else { 0.0 };
        b(self.steps.discard, self.t_discard)
            + b(self.steps.transpose, self.t_transpose)
            + b(self.steps.reorder, self.t_reorder)
    }
}

/// Runs the transforms required between `from` and `to`, in the order
/// discard, transpose, reorder. `requested`, when given, must equal the
/// required set.
pub fn prepare(
    input: ConvOutput,
    from: ConvStrategy,
    to: HarmonicStrategy,
    path: PrepPath,
    n_hp: usize,
    requested: Option<PrepSteps>,
) -> Result<(PreparedPlane, PrepTiming)> {
    let steps = required_steps(from, to);
    if let Some(req) = requested {
        if req != steps {
            return Err(FdasError::Unsupported(format!(
                "{} -> {} needs preparation `{}`, not `{}`",
                from.name(),
                to.name(),
                steps.describe(),
                req.describe()
            )));
        }
    }
    let mut timing = PrepTiming {
        steps,
        path,
        ..PrepTiming::default()
    };
    let mut fop = match (input, steps.discard) {
        (ConvOutput::Raw(raw), true) => {
            let t = Instant::now();
            let fop = discard_fop(&raw)?;
            timing.t_discard = ms(t);
            timing.bytes_moved += (raw.data.len() + fop.values().len()) as u64 * 4;
            fop
        }
        (ConvOutput::Fop(fop), false) => fop,
        (ConvOutput::Raw(_), false) => {
            return Err(FdasError::WrongPlane(
                "chunked output needs a discard step".into(),
            ))
        }
        (ConvOutput::Fop(_), true) => {
            return Err(FdasError::WrongPlane(
                "discard needs chunked convolution output".into(),
            ))
        }
    };
    if steps.transpose {
        let t = Instant::now();
        fop = transpose(&fop);
        timing.t_transpose = ms(t);
        timing.bytes_moved += fop.values().len() as u64 * 8;
    }
    let plane = if steps.reorder {
        let HarmonicStrategy::MultipleHpR { cols_per_group, .. } = to else {
            unreachable!("reorder only feeds MultipleHP-R")
        };
        let t = Instant::now();
        let rfop = reorder(&fop, cols_per_group, n_hp)?;
        timing.t_reorder = ms(t);
        timing.bytes_moved += (fop.values().len() + rfop.len()) as u64 * 4;
        PreparedPlane::RFop(rfop)
    } else {
        PreparedPlane::Fop(fop)
    };
    Ok((plane, timing))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discard_two_chunks() {
        let raw = RawChunks {
            rows: 1,
            chunk_len: 8,
            overlap: 3,
            chunk_count: 2,
            valid_len: 10,
            data: (0..16).collect::<Vec<i32>>(),
        };
        assert_eq!(discard(&raw).unwrap(), vec![3, 4, 5, 6, 7, 11, 12, 13, 14, 15]);
    }

    #[test]
    fn discard_without_overlap_concatenates() {
        let raw = RawChunks {
            rows: 2,
            chunk_len: 4,
            overlap: 0,
            chunk_count: 2,
            valid_len: 8,
            data: (0..16).collect::<Vec<i32>>(),
        };
        assert_eq!(discard(&raw).unwrap(), (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn discard_rejects_inconsistent_metadata() {
        let mut raw = RawChunks {
            rows: 1,
            chunk_len: 8,
            overlap: 3,
            chunk_count: 2,
            valid_len: 10,
            data: vec![0.0f32; 15],
        };
        assert!(discard(&raw).is_err());
        raw.data.push(0.0);
        raw.valid_len = 11;
        assert!(discard(&raw).is_err());
        raw.valid_len = 10;
        raw.overlap = 8;
        assert!(discard(&raw).is_err());
    }

    #[test]
    fn transpose_small() {
        let f = Fop::from_values(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let t = transpose(&f);
        assert_eq!((t.rows(), t.cols()), (3, 2));
        assert_eq!(t.values(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(t.get(-1, 2), Some(3.0));
        assert_eq!(transpose(&t), f);
        let one = Fop::from_values(1, 1, vec![7.]).unwrap();
        assert_eq!(transpose(&one).values(), one.values());
    }

    #[test]
    fn reorder_degenerate_is_row_major() {
        let values: Vec<f32> = (0..4 * 8).map(|v| v as f32).collect();
        let f = Fop::from_values(4, 8, values.clone()).unwrap();
        let r = reorder(&f, 8, 1).unwrap();
        assert_eq!(r.block_count(), 1);
        assert_eq!(r.block(0), &values[..]);
    }

    #[test]
    fn reorder_duplicates_and_pads() {
        let f = Fop::from_values(3, 4, (0..12).map(|v| v as f32).collect()).unwrap();
        let r = reorder(&f, 2, 2).unwrap();
        assert_eq!(r.block_count(), 2);
        // k=1: 3 rows x 2 cols, k=2: 3 rows x 1 col -> 9, padded to 16
        assert_eq!(r.block_len(), 16);
        assert!(r.len() > 12);
        assert!(r.block(0)[9..].iter().all(|&v| v == 0.0));
        // FOP(trunc(-1/2) = 0, floor(1/2) = 0) lives in row index 1
        assert_eq!(r.value(2, -1, 1), Some(f.get(0, 0).unwrap()));
        assert_eq!(r.value(1, 1, 3), Some(f.get(1, 3).unwrap()));
    }

    #[test]
    fn combination_matrix() {
        let ola = ConvStrategy::OlaTd { n_paral: 128 };
        let aols = ConvStrategy::OlsFd { chunk: 2048, engines: 1 };
        let r = HarmonicStrategy::MultipleHpR {
            cols_per_group: 16,
            points_per_item: 4,
        };
        let n = HarmonicStrategy::MultipleHpN { cols_per_group: 1 };
        let s = HarmonicStrategy::SingleHp { n_paral: 8 };
        let naive = HarmonicStrategy::NaiveMultipleHp;
        assert_eq!(required_steps(aols, r).describe(), "discard+transpose+reorder");
        assert_eq!(required_steps(aols, naive).describe(), "discard+transpose");
        assert_eq!(required_steps(aols, n).describe(), "discard+transpose");
        assert_eq!(required_steps(aols, s).describe(), "discard");
        assert_eq!(required_steps(ola, naive).describe(), "-");
        assert_eq!(required_steps(ola, n).describe(), "transpose");
        assert_eq!(required_steps(ola, r).describe(), "transpose+reorder");
        assert_eq!(required_steps(ola, s).describe(), "-");
        assert_eq!(required_steps(ConvStrategy::NaiveFd, s).describe(), "-");
    }

    #[test]
    fn steps_parse() {
        assert_eq!(PrepSteps::parse("none").unwrap(), PrepSteps::NONE);
        let s = PrepSteps::parse("discard+transpose").unwrap();
        assert!(s.discard && s.transpose && !s.reorder);
        assert!(PrepSteps::parse("shuffle").is_err());
    }

    #[test]
    fn prepare_rejects_mismatched_request() {
        let f = Fop::zeros(3, 8);
        let err = prepare(
            ConvOutput::Fop(f),
            ConvStrategy::NaiveTd,
            HarmonicStrategy::MultipleHpR {
                cols_per_group: 2,
                points_per_item: 4,
            },
            PrepPath::Host,
            2,
            Some(PrepSteps::parse("transpose").unwrap()),
        );
        assert!(matches!(err, Err(FdasError::Unsupported(_))));
    }

    #[test]
    fn prepare_identity_costs_nothing() {
        let f = Fop::from_values(3, 4, (0..12).map(|v| v as f32).collect()).unwrap();
        let (plane, t) = prepare(
            ConvOutput::Fop(f.clone()),
            ConvStrategy::OlaTd { n_paral: 128 },
            HarmonicStrategy::NaiveMultipleHp,
            PrepPath::Device,
            8,
            None,
        )
        .unwrap();
        assert_eq!(plane, PreparedPlane::Fop(f));
        assert_eq!(t.t_fop(), 0.0);
        assert!(t.steps.is_none());
    }
}
