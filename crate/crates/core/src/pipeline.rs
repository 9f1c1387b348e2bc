//! One input array through convolution, preparation and harmonic summing.

use crate::conv::{convolve_bank, BankOptions, ConvOutput, ConvStrategy, FtTiming};
use crate::error::{FdasError, Result};
use crate::harmonic::{harmonic_sum, CandidateList, HarmonicStrategy, HmStats, ThresholdTable};
use crate::model::StageTiming;
use crate::prep::{discard_fop, prepare, PrepPath, PrepSteps, PrepTiming, PreparedPlane};
use crate::signal::{ComplexSeries, FdasConfig, FilterBank, Fop};

/// Default threshold multiple of the mean plane power, per harmonic.
pub const DEFAULT_THRESHOLD_FACTOR: f32 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub conv: ConvStrategy,
    pub hm: HarmonicStrategy,
    pub filters_per_launch: usize,
    pub threads: usize,
    pub prep_path: PrepPath,
    /// Must match the required preparation when given.
    pub prep: Option<PrepSteps>,
    /// Used only when the config carries no thresholds.
    pub threshold_factor: f32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            conv: ConvStrategy::NaiveFd,
            hm: HarmonicStrategy::NaiveMultipleHp,
            filters_per_launch: 1,
            threads: 0,
            prep_path: PrepPath::Device,
            prep: None,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub candidates: CandidateList,
    /// Template-major plane after discard, before any layout change.
    pub fop: Fop,
    pub plane: PreparedPlane,
    pub thresholds: ThresholdTable,
    pub ft: FtTiming,
    pub prep: PrepTiming,
    pub hm: HmStats,
    pub timing: StageTiming,
}

/// Runs the full chain on one frequency series. The filter bank must have
/// `config.n_temp` templates and the series `config.n_chan` points.
pub fn run(
    config: &FdasConfig,
    input: &ComplexSeries,
    bank: &FilterBank,
    opts: &RunOptions,
) -> Result<RunOutput> {
    if input.len() != config.n_chan {
        return Err(FdasError::LengthMismatch {
            expected: config.n_chan,
            actual: input.len(),
        });
    }
    if bank.len() != config.n_temp {
        return Err(FdasError::LengthMismatch {
            expected: config.n_temp,
            actual: bank.len(),
        });
    }
    opts.hm.validate()?;
    let (conv_out, ft) = convolve_bank(
        input,
        bank,
        opts.conv,
        BankOptions {
            filters_per_launch: opts.filters_per_launch,
            threads: opts.threads,
        },
    )?;
    let fop = match &conv_out {
        ConvOutput::Fop(f) => f.clone(),
        ConvOutput::Raw(raw) => discard_fop(raw)?,
    };
    let thresholds = match &config.thresholds {
        Some(t) => ThresholdTable::constant(t, config.n_temp)?,
        None => ThresholdTable::from_mean_power(&fop, config.n_hp, opts.threshold_factor)?,
    };
    let (plane, prep) = prepare(
        conv_out,
        opts.conv,
        opts.hm,
        opts.prep_path,
        config.n_hp,
        opts.prep,
    )?;
    let (candidates, hm) = harmonic_sum(
        &plane,
        opts.hm,
        &thresholds,
        config.n_hp,
        config.n_cand,
        opts.threads,
    )?;
    let timing = StageTiming::from_measurements(&ft, &prep, &hm);
    Ok(RunOutput {
        candidates,
        fop,
        plane,
        thresholds,
        ft,
        prep,
        hm,
        timing,
    })
}

/// Convolution x harmonic-summing grid evaluated by desk-scale sweeps.
/// Strategy parameters are scaled to the desk configuration.
pub fn desk_combinations(config: &FdasConfig) -> Vec<(ConvStrategy, HarmonicStrategy)> {
    let chunk = (4 * config.n_tap).next_power_of_two().min(config.n_chan).max(2);
    let convs = [
        ConvStrategy::NaiveTd,
        ConvStrategy::OlaTd { n_paral: 16 },
        ConvStrategy::NaiveFd,
        ConvStrategy::OlsFd { chunk, engines: 1 },
    ];
    let hms = [
        HarmonicStrategy::SingleHp { n_paral: 16 },
        HarmonicStrategy::NaiveMultipleHp,
        HarmonicStrategy::MultipleHpN { cols_per_group: 64 },
        HarmonicStrategy::MultipleHpR {
            cols_per_group: 64,
            points_per_item: 4,
        },
    ];
    convs
        .iter()
        .flat_map(|&c| hms.iter().map(move |&h| (c, h)))
        .collect()
}

/// Display name of a combination, e.g. `aols-512+multiplehp-r-64-4`.
pub fn combination_name(conv: ConvStrategy, hm: HarmonicStrategy) -> String {
    format!("{}+{}", conv.name(), hm.name())
}

/// Runs the chain `reps` times and keeps the repetition with the median
/// serial latency, so the breakdown stays internally consistent.
pub fn measure(
    config: &FdasConfig,
    input: &ComplexSeries,
    bank: &FilterBank,
    opts: &RunOptions,
    reps: usize,
) -> Result<StageTiming> {
    let mut runs = (0..reps.max(1))
        .map(|_| run(config, input, bank, opts).map(|o| o.timing))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.t_fdas().total_cmp(&b.t_fdas()));
    Ok(runs.swap_remove(runs.len() / 2))
}
