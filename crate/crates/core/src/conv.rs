//! FIR filter-bank convolution: naive and overlap-add time-domain filters,
//! naive and overlap-save frequency-domain filters, and the bank driver that
//! turns one input series into a filter-output plane.
//!
//! All filters use a causal zero history: `x[i - j] = 0` for `i < j`. Outputs
//! are truncated to the input length.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{DftPlan, Direction};
use crate::error::{FdasError, Result};
use crate::signal::{Complex32, ComplexSeries, FilterBank, Fop, Layout};

/// Largest transform the naive frequency-domain filter will plan.
pub const MAX_FD_SIZE: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvStrategy {
    NaiveTd,
    /// Coefficients split into sub-filters of `n_paral` taps.
    OlaTd { n_paral: usize },
    NaiveFd,
    /// Input split into `chunk`-point blocks overlapping by `taps - 1`.
    /// `engines` is 1 for the area-efficient and 2 for the time-efficient
    /// variant; it only matters to the latency model.
    OlsFd { chunk: usize, engines: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvFamily {
    TimeDomain,
    FrequencyDomain,
}

impl ConvStrategy {
    pub fn family(&self) -> ConvFamily {
        match self {
            ConvStrategy::NaiveTd | ConvStrategy::OlaTd { .. } => ConvFamily::TimeDomain,
            ConvStrategy::NaiveFd | ConvStrategy::OlsFd { .. } => ConvFamily::FrequencyDomain,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConvStrategy::NaiveTd => "naive-td".into(),
            ConvStrategy::OlaTd { n_paral } => format!("ola-{n_paral}"),
            ConvStrategy::NaiveFd => "naive-fd".into(),
            ConvStrategy::OlsFd { chunk, engines: 2 } => format!("tols-{chunk}"),
            ConvStrategy::OlsFd { chunk, .. } => format!("aols-{chunk}"),
        }
    }

    /// Checks strategy parameters against the longest template.
    pub fn validate(&self, max_taps: usize) -> Result<()> {
        match *self {
            ConvStrategy::OlaTd { n_paral } if !n_paral.is_power_of_two() => {
                Err(FdasError::Unsupported(format!(
                    "OLA parallelism {n_paral} is not a power of two"
                )))
            }
            ConvStrategy::OlsFd { chunk, engines } => {
                if !(engines == 1 || engines == 2) {
                    return Err(FdasError::Unsupported(format!(
                        "{engines} FFT engines (expected 1 or 2)"
                    )));
                }
                if chunk < 2 || !chunk.is_power_of_two() {
                    return Err(FdasError::BadTransformSize { size: chunk });
                }
                if chunk <= max_taps.saturating_sub(1) {
                    return Err(FdasError::ChunkTooSmall {
                        chunk,
                        overlap: max_taps - 1,
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Chunked convolution output that still carries the invalid overlap prefix
/// of every chunk. Each of the `rows` streams holds `chunk_count * chunk_len`
/// points; the first `overlap` points of every chunk are not valid output.
#[derive(Clone, Debug, PartialEq)]
pub struct RawChunks<T> {
    pub rows: usize,
    pub chunk_len: usize,
    pub overlap: usize,
    pub chunk_count: usize,
    /// Points that survive discard and truncation per row.
    pub valid_len: usize,
    pub data: Vec<T>,
}

impl<T> RawChunks<T> {
    /// Valid points contributed by each chunk.
    pub fn advance(&self) -> usize {
        self.chunk_len - self.overlap
    }

    pub fn row_len(&self) -> usize {
        self.chunk_count * self.chunk_len
    }
}

/// Number of `chunk`-point blocks needed to cover `len` samples with an
/// overlap of `overlap` points.
pub fn ols_chunk_count(len: usize, chunk: usize, overlap: usize) -> usize {
    len.div_ceil(chunk - overlap)
}

/// Sub-filter launches and zero-padded coefficient length for overlap-add.
pub fn ola_launches(taps: usize, n_paral: usize) -> (usize, usize) {
    let launches = taps.div_ceil(n_paral);
    (launches, launches * n_paral)
}

fn check_inputs(x: &[Complex32], h: &[Complex32]) -> Result<()> {
    if x.is_empty() {
        return Err(FdasError::Empty("input series"));
    }
    if h.is_empty() {
        return Err(FdasError::Empty("coefficient array"));
    }
    Ok(())
}

#[inline]
fn widen(c: Complex32) -> Complex<f64> {
    Complex::new(c.re as f64, c.im as f64)
}

#[inline]
fn narrow(c: Complex<f64>) -> Complex32 {
    Complex32::new(c.re as f32, c.im as f32)
}

/// Accumulates `sum_m x[i - delay - m] * h[m]` into `acc` (double precision).
fn accumulate_td(acc: &mut [Complex<f64>], x: &[Complex32], h: &[Complex32], delay: usize) {
    let hw: Vec<Complex<f64>> = h.iter().copied().map(widen).collect();
    for (i, out) in acc.iter_mut().enumerate().skip(delay) {
        let base = i - delay;
        let mut s = Complex::new(0.0, 0.0);
        for (m, hm) in hw.iter().enumerate().take(base + 1) {
            s += widen(x[base - m]) * hm;
        }
        *out += s;
    }
}

/// Direct-form FIR: `y[i] = sum_j x[i - j] h[j]`, accumulated in double
/// precision.
pub fn fir_naive_td(x: &[Complex32], h: &[Complex32]) -> Result<Vec<Complex32>> {
    check_inputs(x, h)?;
    let mut acc = vec![Complex::new(0.0, 0.0); x.len()];
    accumulate_td(&mut acc, x, h, 0);
    Ok(acc.into_iter().map(narrow).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlaOutput {
    pub series: Vec<Complex32>,
    pub launch_count: usize,
    pub padded_len: usize,
}

/// Overlap-add FIR: the coefficients are split into `n_paral`-tap
/// sub-filters (the last one zero-padded), each applied with its delay and
/// the partial outputs summed.
pub fn fir_ola_td(x: &[Complex32], h: &[Complex32], n_paral: usize) -> Result<OlaOutput> {
    check_inputs(x, h)?;
    ConvStrategy::OlaTd { n_paral }.validate(h.len())?;
    let (launch_count, padded_len) = ola_launches(h.len(), n_paral);
    let mut padded = h.to_vec();
    padded.resize(padded_len, Complex32::new(0.0, 0.0));
    let mut acc = vec![Complex::new(0.0, 0.0); x.len()];
    for (s, sub) in padded.chunks_exact(n_paral).enumerate() {
        accumulate_td(&mut acc, x, sub, s * n_paral);
    }
    Ok(OlaOutput {
        series: acc.into_iter().map(narrow).collect(),
        launch_count,
        padded_len,
    })
}

fn pointwise_mul(buf: &mut [Complex32], spectrum: &[Complex32]) {
    buf.iter_mut().zip(spectrum).for_each(|(a, b)| *a *= b);
}

fn padded_spectrum(h: &[Complex32], plan: &DftPlan) -> Result<Vec<Complex32>> {
    let mut buf = h.to_vec();
    buf.resize(plan.size(), Complex32::new(0.0, 0.0));
    plan.process(&mut buf)?;
    Ok(buf)
}

fn naive_fd_size(len: usize, taps: usize) -> Result<usize> {
    let required = (len + taps - 1).next_power_of_two().max(2);
    if required > MAX_FD_SIZE {
        return Err(FdasError::TransformTooLarge {
            required,
            max: MAX_FD_SIZE,
        });
    }
    Ok(required)
}

/// Whole-signal convolution theorem filter: one transform of the next
/// power-of-two size covering the full linear convolution.
pub fn fir_naive_fd(x: &[Complex32], h: &[Complex32]) -> Result<Vec<Complex32>> {
    check_inputs(x, h)?;
    let size = naive_fd_size(x.len(), h.len())?;
    let fwd = DftPlan::new(size, Direction::Forward)?;
    let inv = DftPlan::new(size, Direction::Inverse)?;
    let spec = padded_spectrum(h, &fwd)?;
    let mut buf = padded_spectrum(x, &fwd)?;
    pointwise_mul(&mut buf, &spec);
    inv.process(&mut buf)?;
    buf.truncate(x.len());
    Ok(buf)
}

/// Forward spectra of every overlap-save input chunk. The first chunk starts
/// `overlap` points before the signal, which reads as zeros.
fn ols_input_spectra(
    x: &[Complex32],
    chunk: usize,
    overlap: usize,
    plan: &DftPlan,
) -> Result<Vec<Vec<Complex32>>> {
    let count = ols_chunk_count(x.len(), chunk, overlap);
    let step = chunk - overlap;
    (0..count)
        .map(|c| {
            let start = (c * step) as isize - overlap as isize;
            let mut buf: Vec<Complex32> = (0..chunk as isize)
                .map(|m| {
                    let idx = start + m;
                    if idx >= 0 && (idx as usize) < x.len() {
                        x[idx as usize]
                    } else {
                        Complex32::new(0.0, 0.0)
                    }
                })
                .collect();
            plan.process(&mut buf)?;
            Ok(buf)
        })
        .collect()
}

/// Overlap-save FIR. Returns the assembled output (after discarding the
/// `taps - 1` invalid points of every chunk) together with the raw per-chunk
/// output that still contains them.
pub fn fir_ols_fd(
    x: &[Complex32],
    h: &[Complex32],
    chunk: usize,
) -> Result<(Vec<Complex32>, RawChunks<Complex32>)> {
    check_inputs(x, h)?;
    ConvStrategy::OlsFd { chunk, engines: 1 }.validate(h.len())?;
    let overlap = h.len() - 1;
    let fwd = DftPlan::new(chunk, Direction::Forward)?;
    let inv = DftPlan::new(chunk, Direction::Inverse)?;
    let spec = padded_spectrum(h, &fwd)?;
    let chunks = ols_input_spectra(x, chunk, overlap, &fwd)?;
    let mut data = Vec::with_capacity(chunks.len() * chunk);
    for mut buf in chunks.iter().cloned() {
        pointwise_mul(&mut buf, &spec);
        inv.process(&mut buf)?;
        data.extend_from_slice(&buf);
    }
    let raw = RawChunks {
        rows: 1,
        chunk_len: chunk,
        overlap,
        chunk_count: chunks.len(),
        valid_len: x.len(),
        data,
    };
    let assembled = crate::prep::discard(&raw)?;
    Ok((assembled, raw))
}

/// `|y|^2` per point.
pub fn power_spectrum(y: &[Complex32]) -> Vec<f32> {
    y.iter().map(|c| c.re * c.re + c.im * c.im).collect()
}

/// Execution options for [`convolve_bank`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BankOptions {
    /// Templates processed together per kernel launch.
    pub filters_per_launch: usize,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
}

impl Default for BankOptions {
    fn default() -> Self {
        Self {
            filters_per_launch: 1,
            threads: 0,
        }
    }
}

/// Convolution output: a finished plane, or chunked power still carrying the
/// overlap-save prefixes.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvOutput {
    Fop(Fop),
    Raw(RawChunks<f32>),
}

/// Measured cost of one bank application. Times are in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FtTiming {
    pub per_launch: Vec<f64>,
    pub t_klo: f64,
    pub n_ft_launch: usize,
    /// Forward transforms of input data (computed once, reused per template).
    pub input_transforms: usize,
    pub template_transforms: usize,
    pub inverse_transforms: usize,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

impl FtTiming {
    pub fn t_ft(&self) -> f64 {
        self.per_launch.iter().sum::<f64>() + self.n_ft_launch as f64 * self.t_klo
    }
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FdasError::Unsupported(format!("thread pool: {e}")))
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Applies every template of `bank` to `x`.
///
/// Frequency-domain strategies transform the input once and reuse it for
/// every template; template spectra are computed once per call. Templates
/// are grouped `filters_per_launch` at a time and each group (or each
/// overlap-add sub-filter pass of a group) is timed as one launch.
pub fn convolve_bank(
    x: &ComplexSeries,
    bank: &FilterBank,
    strategy: ConvStrategy,
    opts: BankOptions,
) -> Result<(ConvOutput, FtTiming)> {
    let x = x.as_slice();
    if x.is_empty() {
        return Err(FdasError::Empty("input series"));
    }
    if bank.is_empty() {
        return Err(FdasError::Empty("filter bank"));
    }
    let max_taps = bank.max_taps();
    strategy.validate(max_taps)?;
    let fpl = opts.filters_per_launch.max(1);
    let pool = thread_pool(opts.threads)?;
    let n = x.len();
    let n_temp = bank.len();
    let templates = bank.templates();
    let groups: Vec<std::ops::Range<usize>> = (0..n_temp)
        .step_by(fpl)
        .map(|s| s..(s + fpl).min(n_temp))
        .collect();

    let wall = Instant::now();
    let mut timing = FtTiming {
        bytes_read: (n_temp * n * 8) as u64,
        ..FtTiming::default()
    };

    let output = match strategy {
        ConvStrategy::NaiveTd => {
            let mut values = vec![0.0f32; n_temp * n];
            for g in &groups {
                let t = Instant::now();
                let rows: Vec<Vec<f32>> = pool.install(|| {
                    g.clone()
                        .into_par_iter()
                        .map(|r| fir_naive_td(x, &templates[r]).map(|y| power_spectrum(&y)))
                        .collect::<Result<_>>()
                })?;
                for (r, row) in g.clone().zip(rows) {
                    values[r * n..(r + 1) * n].copy_from_slice(&row);
                }
                timing.per_launch.push(elapsed_ms(t));
            }
            ConvOutput::Fop(Fop::from_parts_unchecked(n_temp, n, Layout::TemplateMajor, values))
        }
        ConvStrategy::OlaTd { n_paral } => {
            let (launches, padded_len) = ola_launches(max_taps, n_paral);
            let mut values = vec![0.0f32; n_temp * n];
            for g in &groups {
                let mut acc = vec![vec![Complex::new(0.0, 0.0); n]; g.len()];
                let padded: Vec<Vec<Complex32>> = g
                    .clone()
                    .map(|r| {
                        let mut h = templates[r].clone();
                        h.resize(padded_len, Complex32::new(0.0, 0.0));
                        h
                    })
                    .collect();
                for s in 0..launches {
                    let t = Instant::now();
                    pool.install(|| {
                        acc.par_iter_mut().zip(&padded).for_each(|(a, h)| {
                            let sub = &h[s * n_paral..(s + 1) * n_paral];
                            accumulate_td(a, x, sub, s * n_paral);
                        })
                    });
                    timing.per_launch.push(elapsed_ms(t));
                }
                for (r, a) in g.clone().zip(acc) {
                    let y: Vec<Complex32> = a.into_iter().map(narrow).collect();
                    values[r * n..(r + 1) * n].copy_from_slice(&power_spectrum(&y));
                }
            }
            ConvOutput::Fop(Fop::from_parts_unchecked(n_temp, n, Layout::TemplateMajor, values))
        }
        ConvStrategy::NaiveFd => {
            let size = naive_fd_size(n, max_taps)?;
            let fwd = DftPlan::new(size, Direction::Forward)?;
            let inv = DftPlan::new(size, Direction::Inverse)?;
            let input = padded_spectrum(x, &fwd)?;
            timing.input_transforms = 1;
            let spectra: Vec<Vec<Complex32>> = pool.install(|| {
                templates
                    .par_iter()
                    .map(|h| padded_spectrum(h, &fwd))
                    .collect::<Result<_>>()
            })?;
            timing.template_transforms = n_temp;
            let mut values = vec![0.0f32; n_temp * n];
            for g in &groups {
                let t = Instant::now();
                let rows: Vec<Vec<f32>> = pool.install(|| {
                    g.clone()
                        .into_par_iter()
                        .map(|r| {
                            let mut buf = input.clone();
                            pointwise_mul(&mut buf, &spectra[r]);
                            inv.process(&mut buf)?;
                            Ok(power_spectrum(&buf[..n]))
                        })
                        .collect::<Result<_>>()
                })?;
                timing.inverse_transforms += g.len();
                for (r, row) in g.clone().zip(rows) {
                    values[r * n..(r + 1) * n].copy_from_slice(&row);
                }
                timing.per_launch.push(elapsed_ms(t));
            }
            ConvOutput::Fop(Fop::from_parts_unchecked(n_temp, n, Layout::TemplateMajor, values))
        }
        ConvStrategy::OlsFd { chunk, .. } => {
            let overlap = max_taps - 1;
            let fwd = DftPlan::new(chunk, Direction::Forward)?;
            let inv = DftPlan::new(chunk, Direction::Inverse)?;
            let inputs = ols_input_spectra(x, chunk, overlap, &fwd)?;
            let count = inputs.len();
            timing.input_transforms = count;
            let spectra: Vec<Vec<Complex32>> = pool.install(|| {
                templates
                    .par_iter()
                    .map(|h| padded_spectrum(h, &fwd))
                    .collect::<Result<_>>()
            })?;
            timing.template_transforms = n_temp;
            let row_len = count * chunk;
            let mut data = vec![0.0f32; n_temp * row_len];
            for g in &groups {
                let t = Instant::now();
                let rows: Vec<Vec<f32>> = pool.install(|| {
                    g.clone()
                        .into_par_iter()
                        .map(|r| {
                            let mut row = Vec::with_capacity(row_len);
                            for input in &inputs {
                                let mut buf = input.clone();
                                pointwise_mul(&mut buf, &spectra[r]);
                                inv.process(&mut buf)?;
                                row.extend(power_spectrum(&buf));
                            }
                            Ok(row)
                        })
                        .collect::<Result<_>>()
                })?;
                timing.inverse_transforms += g.len() * count;
                for (r, row) in g.clone().zip(rows) {
                    data[r * row_len..(r + 1) * row_len].copy_from_slice(&row);
                }
                timing.per_launch.push(elapsed_ms(t));
            }
            ConvOutput::Raw(RawChunks {
                rows: n_temp,
                chunk_len: chunk,
                overlap,
                chunk_count: count,
                valid_len: n,
                data,
            })
        }
    };

    timing.n_ft_launch = timing.per_launch.len();
    let kernel: f64 = timing.per_launch.iter().sum();
    timing.t_klo = ((elapsed_ms(wall) - kernel) / timing.n_ft_launch as f64).max(0.0);
    timing.bytes_written = match &output {
        ConvOutput::Fop(f) => f.values().len() as u64 * 4,
        ConvOutput::Raw(r) => r.data.len() as u64 * 4,
    };
    Ok((output, timing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f32, im: f32) -> Complex32 {
        Complex32::new(re, im)
    }

    fn real(v: &[f32]) -> Vec<Complex32> {
        v.iter().map(|&r| c(r, 0.0)).collect()
    }

    #[test]
    fn identity_filter() {
        let x = real(&[1., 2., 3., 4.]);
        assert_eq!(fir_naive_td(&x, &real(&[1.])).unwrap(), x);
    }

    #[test]
    fn impulse_reproduces_taps() {
        let h = vec![c(1., 2.), c(-3., 0.5), c(0.25, -1.)];
        let y = fir_naive_td(&real(&[1., 0., 0., 0.]), &h).unwrap();
        assert_eq!(y, vec![h[0], h[1], h[2], c(0., 0.)]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(fir_naive_td(&[], &real(&[1.])), Err(FdasError::Empty(_))));
        assert!(matches!(fir_naive_td(&real(&[1.]), &[]), Err(FdasError::Empty(_))));
        assert!(fir_ola_td(&[], &real(&[1.]), 4).is_err());
        assert!(fir_naive_fd(&real(&[1.]), &[]).is_err());
    }

    #[test]
    fn ola_launch_arithmetic() {
        assert_eq!(ola_launches(421, 128), (4, 512));
        assert_eq!(ola_launches(421, 256), (2, 512));
        assert_eq!(ola_launches(128, 128), (1, 128));
        assert_eq!(ola_launches(1, 32), (1, 32));
    }

    #[test]
    fn ola_single_subarray_is_exactly_naive() {
        let x: Vec<Complex32> = (0..300).map(|i| c((i as f32).sin(), (i as f32 * 0.3).cos())).collect();
        let h: Vec<Complex32> = (0..128).map(|i| c(1.0 / (1.0 + i as f32), (i as f32).cos())).collect();
        let ola = fir_ola_td(&x, &h, 128).unwrap();
        assert_eq!(ola.launch_count, 1);
        assert_eq!(ola.series, fir_naive_td(&x, &h).unwrap());
    }

    #[test]
    fn naive_fd_two_tap() {
        let mut x = real(&[0.; 8]);
        x[0] = c(1., 0.);
        let y = fir_naive_fd(&x, &real(&[1., 1.])).unwrap();
        let want = [1., 1., 0., 0., 0., 0., 0., 0.];
        for (a, b) in y.iter().zip(want) {
            assert!((a.re - b).abs() < 1e-6 && a.im.abs() < 1e-6);
        }
    }

    #[test]
    fn naive_fd_identity() {
        let x: Vec<Complex32> = (0..100).map(|i| c(i as f32 * 0.1, -(i as f32) * 0.05)).collect();
        let y = fir_naive_fd(&x, &real(&[1.])).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() <= 1e-6 * 10.0, "{a} vs {b}");
        }
    }

    #[test]
    fn ols_rejects_small_chunk() {
        let x = real(&[1.; 64]);
        let h = real(&[1.; 16]);
        assert!(matches!(
            fir_ols_fd(&x, &h, 8),
            Err(FdasError::ChunkTooSmall { chunk: 8, overlap: 15 })
        ));
        assert!(fir_ols_fd(&x, &h, 24).is_err());
    }

    #[test]
    fn ols_chunk_accounting() {
        assert_eq!(2048 - 420, 1628);
        assert_eq!(ols_chunk_count(1 << 21, 2048, 420), 1289);
        assert_eq!(ols_chunk_count(1628, 2048, 420), 1);
    }

    #[test]
    fn power_of_three_four_i() {
        assert_eq!(power_spectrum(&[c(3., 4.)]), vec![25.0]);
        assert_eq!(power_spectrum(&[c(0., 0.); 3]), vec![0.0; 3]);
    }

    #[test]
    fn strategy_validation() {
        assert!(ConvStrategy::OlaTd { n_paral: 100 }.validate(421).is_err());
        assert!(ConvStrategy::OlsFd { chunk: 512, engines: 1 }.validate(421).is_ok());
        assert!(ConvStrategy::OlsFd { chunk: 256, engines: 1 }.validate(421).is_err());
        assert!(ConvStrategy::OlsFd { chunk: 512, engines: 3 }.validate(421).is_err());
        assert_eq!(ConvStrategy::OlsFd { chunk: 2048, engines: 1 }.name(), "aols-2048");
    }

    #[test]
    fn bank_launch_count_follows_grouping() {
        let x: ComplexSeries = real(&[1.; 256]).into();
        let bank = FilterBank::synthetic(42, 17).unwrap();
        let opts = BankOptions {
            filters_per_launch: 2,
            threads: 1,
        };
        let (_, t) = convolve_bank(&x, &bank, ConvStrategy::OlsFd { chunk: 64, engines: 1 }, opts).unwrap();
        assert_eq!(t.n_ft_launch, 21);
        assert_eq!(t.template_transforms, 42);
        // input chunks transformed once, not once per template
        assert_eq!(t.input_transforms, ols_chunk_count(256, 64, 16));
        assert_eq!(t.inverse_transforms, 42 * t.input_transforms);
        assert!((t.t_ft() - t.per_launch.iter().sum::<f64>() - 21.0 * t.t_klo).abs() < 1e-9);

        let (_, t) = convolve_bank(&x, &bank, ConvStrategy::OlaTd { n_paral: 4 }, opts).unwrap();
        assert_eq!(t.n_ft_launch, 21 * 5);
    }
}
