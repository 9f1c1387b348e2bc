//! File formats: JSON configuration, binary planes and series, candidate
//! CSV, timing records and sweep reports.
//!
//! Binary files are little-endian: a 4-byte magic, `u32` header fields, then
//! `f32` payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{FdasError, Result};
use crate::harmonic::Candidate;
use crate::model::{ReportRow, StageTiming};
use crate::prep::RFop;
use crate::signal::{ComplexSeries, Complex32, FdasConfig, Fop};

const FOP_MAGIC: &[u8; 4] = b"FOP1";
const RFOP_MAGIC: &[u8; 4] = b"RFP1";
const SERIES_MAGIC: &[u8; 4] = b"CSR1";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| FdasError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FdasError::io(path, e))
}

/// Parses a JSON config. Missing keys take their defaults; a key with the
/// wrong type is reported by name. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<FdasConfig> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(map) = value else {
        return Err(FdasError::ConfigParse {
            field: "<root>".into(),
            reason: "expected a JSON object".into(),
        });
    };
    let mut cfg = FdasConfig::default();
    for (key, v) in &map {
        let err = |reason: String| FdasError::ConfigParse {
            field: key.clone(),
            reason,
        };
        macro_rules! take {
            ($field:ident) => {
                cfg.$field = serde_json::from_value(v.clone()).map_err(|e| err(e.to_string()))?
            };
        }
        match key.as_str() {
            "n_beams" => take!(n_beams),
            "n_dm_trial" => take!(n_dm_trial),
            "t_obs" => take!(t_obs),
            "n_temp" => take!(n_temp),
            "n_chan" => take!(n_chan),
            "n_tap" => take!(n_tap),
            "n_hp" => take!(n_hp),
            "n_cand" => take!(n_cand),
            "t_limit" => take!(t_limit),
            "thresholds" => take!(thresholds),
            _ => return Err(err("unknown key".into())),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<FdasConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FdasError::io(path, e))?;
    parse_config(&text)
}

pub fn save_config(path: &Path, cfg: &FdasConfig) -> Result<()> {
    write_json(path, cfg)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| FdasError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| FdasError::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

struct Cursor<'a> {
    what: &'static str,
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn short(&self, need: usize) -> FdasError {
        FdasError::Structure {
            what: self.what,
            reason: format!("truncated: needed {need} more bytes, {} left", self.bytes.len()),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(self.short(n));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(FdasError::Structure {
                what: self.what,
                reason: format!("bad magic, expected {}", String::from_utf8_lossy(magic)),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let need = count.checked_mul(4).ok_or_else(|| self.short(usize::MAX))?;
        if self.bytes.len() != need {
            return Err(FdasError::Structure {
                what: self.what,
                reason: format!("payload of {} bytes, header implies {need}", self.bytes.len()),
            });
        }
        Ok(self
            .take(need)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

fn header_u32(what: &'static str, v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| FdasError::Structure {
            what,
            reason: format!("dimension {v} does not fit in 32 bits"),
        })
}

fn write_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a FOP as `FOP1`, templates, channels, then template-major values.
pub fn save_fop(path: &Path, fop: &Fop) -> Result<()> {
    let fop = &fop.to_template_major();
    let mut w = create(path)?;
    let head = [
        header_u32("FOP", fop.rows())?,
        header_u32("FOP", fop.cols())?,
    ];
    (|| {
        w.write_all(FOP_MAGIC)?;
        head.iter().try_for_each(|h| w.write_all(h))?;
        write_f32s(&mut w, fop.values())?;
        w.flush()
    })()
    .map_err(|e| FdasError::io(path, e))
}

/// Decodes a FOP file. Dimensions are the stored rows and columns; the plane
/// is taken as template-major.
pub fn decode_fop(bytes: &[u8]) -> Result<Fop> {
    let mut c = Cursor { what: "FOP", bytes };
    c.magic(FOP_MAGIC)?;
    let rows = c.u32()?;
    let cols = c.u32()?;
    let values = c.f32s(rows * cols)?;
    Fop::from_values(rows, cols, values)
}

pub fn load_fop(path: &Path) -> Result<Fop> {
    decode_fop(&read_file(path)?)
}

/// Writes an rFOP as `RFP1`, block columns, harmonics, block length, block
/// count, then the blocks.
pub fn save_rfop(path: &Path, rfop: &RFop) -> Result<()> {
    let mut w = create(path)?;
    let head = [
        header_u32("rFOP", rfop.block_cols())?,
        header_u32("rFOP", rfop.n_hp())?,
        header_u32("rFOP", rfop.block_len())?,
        header_u32("rFOP", rfop.block_count())?,
    ];
    (|| {
        w.write_all(RFOP_MAGIC)?;
        head.iter().try_for_each(|h| w.write_all(h))?;
        write_f32s(&mut w, rfop.blocks())?;
        w.flush()
    })()
    .map_err(|e| FdasError::io(path, e))
}

/// Decodes an rFOP file. The header does not carry the plane shape, so the
/// caller supplies it and the segment layout is recomputed.
pub fn decode_rfop(bytes: &[u8], n_temp: usize, n_chan: usize) -> Result<RFop> {
    let mut c = Cursor {
        what: "rFOP",
        bytes,
    };
    c.magic(RFOP_MAGIC)?;
    let block_cols = c.u32()?;
    let n_hp = c.u32()?;
    let block_len = c.u32()?;
    let block_count = c.u32()?;
    let blocks = c.f32s(block_len * block_count)?;
    RFop::from_blocks(n_temp, n_chan, block_cols, n_hp, block_len, blocks)
}

pub fn load_rfop(path: &Path, n_temp: usize, n_chan: usize) -> Result<RFop> {
    decode_rfop(&read_file(path)?, n_temp, n_chan)
}

/// Writes a complex series as `CSR1`, length, then interleaved re/im.
pub fn save_series(path: &Path, series: &ComplexSeries) -> Result<()> {
    let mut w = create(path)?;
    let len = header_u32("series", series.len())?;
    (|| {
        w.write_all(SERIES_MAGIC)?;
        w.write_all(&len)?;
        for c in series.as_slice() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| FdasError::io(path, e))
}

pub fn decode_series(bytes: &[u8]) -> Result<ComplexSeries> {
    let mut c = Cursor {
        what: "series",
        bytes,
    };
    c.magic(SERIES_MAGIC)?;
    let len = c.u32()?;
    let flat = c.f32s(len * 2)?;
    let series = ComplexSeries(
        flat.chunks_exact(2)
            .map(|p| Complex32::new(p[0], p[1]))
            .collect(),
    );
    if !series.is_finite() {
        return Err(FdasError::Structure {
            what: "series",
            reason: "non-finite sample".into(),
        });
    }
    Ok(series)
}

pub fn load_series(path: &Path) -> Result<ComplexSeries> {
    decode_series(&read_file(path)?)
}

/// Candidates as CSV with header `harmonic,template,channel,power`.
pub fn write_candidates<W: Write>(w: W, cands: &[Candidate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in cands {
        out.serialize(c)?;
    }
    out.flush().map_err(|e| FdasError::Csv(e.into()))?;
    Ok(())
}

pub fn save_candidates(path: &Path, cands: &[Candidate]) -> Result<()> {
    write_candidates(create(path)?, cands)
}

pub fn read_candidates<R: Read>(r: R) -> Result<Vec<Candidate>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(FdasError::from))
        .collect()
}

/// A named timing record, as stored in sweep input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTiming {
    pub combination: String,
    #[serde(flatten)]
    pub timing: StageTiming,
}

/// Reads a JSON array of named timing records and validates each.
pub fn load_timings(path: &Path) -> Result<Vec<(String, StageTiming)>> {
    let records: Vec<NamedTiming> = read_json(path)?;
    records
        .into_iter()
        .map(|r| {
            r.timing.validate().map_err(|e| {
                FdasError::InvalidTiming(format!("{}: {e}", r.combination))
            })?;
            Ok((r.combination, r.timing))
        })
        .collect()
}

/// Report rows as CSV, one column per multi-device scheme.
pub fn write_report_csv<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let schemes: Vec<String> = rows
        .first()
        .map(|r| r.period_multidevice.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "rank",
        "combination",
        "t_ft",
        "t_fop",
        "t_hm",
        "t_fdas",
        "buffering",
        "degraded",
        "period_ideal",
        "period_contended",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(schemes.iter().map(|s| format!("period_{s}")));
    out.write_record(&header)?;
    for (rank, r) in rows.iter().enumerate() {
        let mut rec = vec![
            (rank + 1).to_string(),
            r.combination.clone(),
            r.t_ft.to_string(),
            r.t_fop.to_string(),
            r.t_hm.to_string(),
            r.t_fdas.to_string(),
            r.buffering.to_string(),
            r.degraded.to_string(),
            r.period_ideal.to_string(),
            r.period_contended.to_string(),
        ];
        rec.extend(schemes.iter().map(|s| r.period_multidevice[s].to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| FdasError::Csv(e.into()))?;
    Ok(())
}
