//! Shared data types: run configuration, input series, filter bank and the
//! filter-output plane (FOP), plus synthetic input generation.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dft::{Direction, DftPlan};
use crate::error::{FdasError, Result};

pub type Complex32 = Complex<f32>;

/// Run parameters. Defaults are the full-scale search parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdasConfig {
    pub n_beams: u32,
    pub n_dm_trial: u32,
    /// Observation length in seconds.
    pub t_obs: f64,
    pub n_temp: usize,
    pub n_chan: usize,
    pub n_tap: usize,
    pub n_hp: usize,
    pub n_cand: usize,
    /// Per-input processing deadline in milliseconds. No default exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_limit: Option<f64>,
    /// Constant detection threshold per harmonic plane (`thresholds[k-1]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f32>>,
}

impl Default for FdasConfig {
    fn default() -> Self {
        Self {
            n_beams: 2000,
            n_dm_trial: 6000,
            t_obs: 540.0,
            n_temp: 85,
            n_chan: 1 << 21,
            n_tap: 421,
            n_hp: 8,
            n_cand: 200,
            t_limit: None,
            thresholds: None,
        }
    }
}

impl FdasConfig {
    /// Small configuration used by the CLI and the oracle suite: every
    /// brute-force check finishes in seconds at this size.
    pub fn desk_scale() -> Self {
        Self {
            n_temp: 9,
            n_chan: 1 << 12,
            n_tap: 33,
            n_hp: 8,
            n_cand: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(FdasError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n_temp.is_multiple_of(2) {
            return bad("n_temp", "must be odd");
        }
        if !self.n_chan.is_power_of_two() {
            return bad("n_chan", "must be a power of two");
        }
        if self.n_tap == 0 {
            return bad("n_tap", "must be >= 1");
        }
        if self.n_hp == 0 {
            return bad("n_hp", "must be >= 1");
        }
        if self.n_cand == 0 {
            return bad("n_cand", "must be >= 1");
        }
        if !(self.t_obs.is_finite() && self.t_obs > 0.0) {
            return bad("t_obs", "must be positive");
        }
        if let Some(t) = self.t_limit {
            if !(t.is_finite() && t > 0.0) {
                return bad("t_limit", "must be positive");
            }
        }
        if let Some(ta) = &self.thresholds {
            if ta.len() != self.n_hp {
                return bad("thresholds", "needs one entry per harmonic plane");
            }
            if ta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return bad("thresholds", "entries must be finite and positive");
            }
        }
        Ok(())
    }

    /// Bytes of one single-precision FOP with this configuration.
    pub fn fop_bytes(&self) -> u64 {
        self.n_temp as u64 * self.n_chan as u64 * 4
    }
}

/// One complex single-precision series.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ComplexSeries(pub Vec<Complex32>);

impl ComplexSeries {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex32::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex32] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl From<Vec<Complex32>> for ComplexSeries {
    fn from(v: Vec<Complex32>) -> Self {
        Self(v)
    }
}

/// Bank of FIR templates. Template `t` in storage order corresponds to the
/// signed template index `t - len/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    templates: Vec<Vec<Complex32>>,
}

impl FilterBank {
    pub fn new(templates: Vec<Vec<Complex32>>) -> Result<Self> {
        if templates.is_empty() {
            return Err(FdasError::Empty("filter bank"));
        }
        for (t, h) in templates.iter().enumerate() {
            if h.is_empty() {
                return Err(FdasError::Structure {
                    what: "filter bank",
                    reason: format!("template {t} has no coefficients"),
                });
            }
            if h.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(FdasError::Structure {
                    what: "filter bank",
                    reason: format!("template {t} has a non-finite coefficient"),
                });
            }
        }
        Ok(Self { templates })
    }

    /// Synthetic acceleration templates. The zero-acceleration template is a
    /// unit impulse; the others are unit-energy chirps whose length grows with
    /// |i| up to `n_tap` and whose sweep direction follows the sign of `i`.
    pub fn synthetic(n_temp: usize, n_tap: usize) -> Result<Self> {
        if n_temp == 0 {
            return Err(FdasError::Empty("filter bank"));
        }
        if n_tap == 0 {
            return Err(FdasError::Empty("template"));
        }
        let lo = min_template(n_temp);
        let hi = max_template(n_temp);
        let half = lo.unsigned_abs().max(hi.unsigned_abs()).max(1) as usize;
        let templates = (lo..=hi)
            .map(|i| {
                if i == 0 {
                    return vec![Complex32::new(1.0, 0.0)];
                }
                let a = i.unsigned_abs() as usize;
                let len = 1 + (a * (n_tap - 1)).div_ceil(half);
                let sign = f64::from(i.signum());
                let norm = (len as f64).sqrt();
                (0..len)
                    .map(|m| {
                        let phase = sign * PI * (m * m) as f64 / len as f64;
                        Complex32::new(
                            (phase.cos() / norm) as f32,
                            (phase.sin() / norm) as f32,
                        )
                    })
                    .collect()
            })
            .collect();
        Self::new(templates)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Vec<Complex32>] {
        &self.templates
    }

    pub fn max_taps(&self) -> usize {
        self.templates.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Smallest signed template index of a plane with `n_temp` rows.
pub fn min_template(n_temp: usize) -> i32 {
    -((n_temp / 2) as i32)
}

/// Largest signed template index of a plane with `n_temp` rows.
pub fn max_template(n_temp: usize) -> i32 {
    (n_temp - 1 - n_temp / 2) as i32
}

/// Storage row of signed template `i`, if it lies in the plane.
pub fn template_to_row(i: i32, n_temp: usize) -> Option<usize> {
    if i < min_template(n_temp) || i > max_template(n_temp) {
        return None;
    }
    Some((i - min_template(n_temp)) as usize)
}

pub fn row_to_template(row: usize, n_temp: usize) -> i32 {
    row as i32 + min_template(n_temp)
}

/// Physical storage order of a [`Fop`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// One row per template (the natural output of the convolution).
    TemplateMajor,
    /// One row per channel (after an explicit transpose).
    ChannelMajor,
}

/// Filter-output plane: `n_temp` x `n_chan` non-negative powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Fop {
    n_temp: usize,
    n_chan: usize,
    layout: Layout,
    values: Vec<f32>,
}

impl Fop {
    pub fn zeros(n_temp: usize, n_chan: usize) -> Self {
        Self {
            n_temp,
            n_chan,
            layout: Layout::TemplateMajor,
            values: vec![0.0; n_temp * n_chan],
        }
    }

    /// Template-major plane from row-major values.
    pub fn from_values(n_temp: usize, n_chan: usize, values: Vec<f32>) -> Result<Self> {
        Self::with_layout(n_temp, n_chan, Layout::TemplateMajor, values)
    }

    pub fn with_layout(
        n_temp: usize,
        n_chan: usize,
        layout: Layout,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != n_temp * n_chan {
            return Err(FdasError::Structure {
                what: "FOP",
                reason: format!(
                    "{n_temp}x{n_chan} plane needs {} values, got {}",
                    n_temp * n_chan,
                    values.len()
                ),
            });
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FdasError::Structure {
                what: "FOP",
                reason: format!("value at flat index {pos} is negative or not finite"),
            });
        }
        Ok(Self {
            n_temp,
            n_chan,
            layout,
            values,
        })
    }

    pub fn n_temp(&self) -> usize {
        self.n_temp
    }

    pub fn n_chan(&self) -> usize {
        self.n_chan
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Physical row count.
    pub fn rows(&self) -> usize {
        match self.layout {
            Layout::TemplateMajor => self.n_temp,
            Layout::ChannelMajor => self.n_chan,
        }
    }

    /// Physical column count.
    pub fn cols(&self) -> usize {
        match self.layout {
            Layout::TemplateMajor => self.n_chan,
            Layout::ChannelMajor => self.n_temp,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn min_template(&self) -> i32 {
        min_template(self.n_temp)
    }

    pub fn max_template(&self) -> i32 {
        max_template(self.n_temp)
    }

    #[inline]
    fn offset(&self, row: usize, chan: usize) -> usize {
        match self.layout {
            Layout::TemplateMajor => row * self.n_chan + chan,
            Layout::ChannelMajor => chan * self.n_temp + row,
        }
    }

    /// Value at storage row `row` and channel `chan`, whatever the layout.
    #[inline]
    pub fn at(&self, row: usize, chan: usize) -> f32 {
        self.values[self.offset(row, chan)]
    }

    /// Value at signed template `i` and channel `j`.
    pub fn get(&self, i: i32, j: usize) -> Option<f32> {
        let row = template_to_row(i, self.n_temp)?;
        (j < self.n_chan).then(|| self.at(row, j))
    }

    /// Template-major copy of one template row.
    pub fn row(&self, row: usize) -> Vec<f32> {
        (0..self.n_chan).map(|c| self.at(row, c)).collect()
    }

    /// Same logical plane in template-major layout.
    pub fn to_template_major(&self) -> Fop {
        match self.layout {
            Layout::TemplateMajor => self.clone(),
            Layout::ChannelMajor => crate::prep::transpose(self),
        }
    }

    pub(crate) fn from_parts_unchecked(
        n_temp: usize,
        n_chan: usize,
        layout: Layout,
        values: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(values.len(), n_temp * n_chan);
        Self {
            n_temp,
            n_chan,
            layout,
            values,
        }
    }
}

/// A periodic signal injected into a synthetic series: power lands at
/// `channel` and at `channel / m` for `m = 2..=harmonics`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub channel: usize,
    pub harmonics: usize,
    pub amplitude: f64,
}

/// Channels that carry power for one injection, highest first.
pub fn injection_channels(inj: &Injection) -> Vec<usize> {
    (1..=inj.harmonics.max(1)).map(|m| inj.channel / m).collect()
}

/// Builds a deterministic frequency series: tones plus complex Gaussian noise
/// in the time domain, forward transformed. A tone of amplitude `a` gives
/// power `(a * n_chan)^2` in its channel; noise of deviation `sigma` per
/// component gives mean power `2 * sigma^2 * n_chan` per channel.
pub fn generate_input(
    config: &FdasConfig,
    injections: &[Injection],
    noise_sigma: f64,
    seed: u64,
) -> Result<ComplexSeries> {
    let n = config.n_chan;
    if !n.is_power_of_two() || n < 2 {
        return Err(FdasError::InvalidConfig {
            field: "n_chan",
            reason: "must be a power of two >= 2".into(),
        });
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(FdasError::InvalidConfig {
            field: "noise_sigma",
            reason: "must be finite and >= 0".into(),
        });
    }
    for inj in injections {
        if inj.channel >= n {
            return Err(FdasError::OutOfRange(format!(
                "injection channel {} >= n_chan {n}",
                inj.channel
            )));
        }
        if !(inj.amplitude.is_finite() && inj.amplitude > 0.0) {
            return Err(FdasError::InvalidConfig {
                field: "amplitude",
                reason: "must be finite and positive".into(),
            });
        }
    }

    let mut time = vec![Complex::<f64>::new(0.0, 0.0); n];
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
        for v in time.iter_mut() {
            *v = Complex::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    for inj in injections {
        for chan in injection_channels(inj) {
            for (t, v) in time.iter_mut().enumerate() {
                // exact phase reduction keeps large n accurate
                let phase = 2.0 * PI * ((chan * t) % n) as f64 / n as f64;
                *v += Complex::from_polar(inj.amplitude, phase);
            }
        }
    }

    let mut buf: Vec<Complex32> = time
        .iter()
        .map(|c| Complex32::new(c.re as f32, c.im as f32))
        .collect();
    DftPlan::new(n, Direction::Forward)?.process(&mut buf)?;
    Ok(ComplexSeries(buf))
}
