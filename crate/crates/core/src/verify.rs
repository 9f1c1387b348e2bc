//! Cross-strategy equivalence checks run by `fdas verify`.

use crate::conv::{convolve_bank, fir_naive_td, fir_ols_fd, BankOptions, ConvOutput, ConvStrategy};
use crate::error::{FdasError, Result};
use crate::harmonic::{harmonic_sum, harmonic_sum_naive, stretch_lookup, HarmonicStrategy, ThresholdTable};
use crate::prep::{discard_fop, prepare, reorder, PrepPath};
use crate::signal::{generate_input, max_template, min_template, FdasConfig, FilterBank, Fop, Injection};

/// Relative tolerance for plane and series comparisons.
pub const REL_TOL: f32 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub check: &'static str,
    pub pair: String,
    pub seed: u64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub n_chan: usize,
    pub n_temp: usize,
    pub n_tap: usize,
    pub seed: u64,
    pub cases: usize,
    pub threads: usize,
    /// Fault hook: overwrite one plane value before the harmonic comparison.
    pub corrupt: bool,
}

impl VerifyOptions {
    /// `n_chan` in `2^10 ..= 2^14`; the template count grows with it from 9 to 17.
    pub fn at_scale(n_chan: usize, seed: u64) -> Result<Self> {
        if !n_chan.is_power_of_two() || !(1 << 10..=1 << 14).contains(&n_chan) {
            return Err(FdasError::InvalidConfig {
                field: "scale",
                reason: format!("{n_chan} is not a power of two in 1024..=16384"),
            });
        }
        let log = n_chan.trailing_zeros() as usize;
        Ok(Self {
            n_chan,
            n_temp: 9 + 2 * (log - 10),
            n_tap: 33,
            seed,
            cases: 2,
            threads: 0,
            corrupt: false,
        })
    }
}

/// Largest violation of `|a - b| <= tol * max(|b|, floor)`, if any.
/// `floor` keeps near-zero points from demanding impossible relative accuracy.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN counts as a mismatch
pub fn first_mismatch(a: &[f32], b: &[f32], tol: f32, floor: f32) -> Option<(usize, f32, f32)> {
    if a.len() != b.len() {
        return Some((a.len().min(b.len()), f32::NAN, f32::NAN));
    }
    a.iter()
        .zip(b)
        .position(|(x, y)| !((x - y).abs() <= tol * y.abs().max(floor)))
        .map(|p| (p, a[p], b[p]))
}

fn mean(v: &[f32]) -> f32 {
    (v.iter().map(|&x| x as f64).sum::<f64>() / v.len().max(1) as f64) as f32
}

fn plane_of(out: ConvOutput) -> Result<Fop> {
    match out {
        ConvOutput::Fop(f) => Ok(f),
        ConvOutput::Raw(raw) => discard_fop(&raw),
    }
}

fn conv_strategies(n_chan: usize) -> Vec<ConvStrategy> {
    let mut v = vec![
        ConvStrategy::OlaTd { n_paral: 32 },
        ConvStrategy::OlaTd { n_paral: 64 },
        ConvStrategy::OlaTd { n_paral: 128 },
        ConvStrategy::NaiveFd,
    ];
    v.extend(
        [1024, 2048, 4096]
            .into_iter()
            .filter(|&c| c <= n_chan)
            .map(|chunk| ConvStrategy::OlsFd { chunk, engines: 1 }),
    );
    v
}

fn hm_strategies() -> Vec<HarmonicStrategy> {
    vec![
        HarmonicStrategy::SingleHp { n_paral: 1 },
        HarmonicStrategy::SingleHp { n_paral: 16 },
        HarmonicStrategy::NaiveMultipleHp,
        HarmonicStrategy::MultipleHpN { cols_per_group: 1 },
        HarmonicStrategy::MultipleHpN { cols_per_group: 64 },
        HarmonicStrategy::MultipleHpR {
            cols_per_group: 16,
            points_per_item: 1,
        },
        HarmonicStrategy::MultipleHpR {
            cols_per_group: 64,
            points_per_item: 4,
        },
    ]
}

/// Runs every check for every case. Results are in a fixed order and carry
/// no timing, so the table is reproducible.
pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let cfg = FdasConfig {
        n_temp: opts.n_temp,
        n_chan: opts.n_chan,
        n_tap: opts.n_tap,
        ..FdasConfig::desk_scale()
    };
    cfg.validate()?;
    let bank = FilterBank::synthetic(cfg.n_temp, cfg.n_tap)?;
    let bank_opts = BankOptions {
        filters_per_launch: 2,
        threads: opts.threads,
    };
    let mut results = Vec::new();
    for case in 0..opts.cases.max(1) {
        let seed = opts.seed.wrapping_add(case as u64);
        let inj = Injection {
            channel: cfg.n_chan / 4 + 3 * case,
            harmonics: 4,
            amplitude: 0.05,
        };
        let x = generate_input(&cfg, &[inj], 1.0, seed)?;

        let reference = plane_of(convolve_bank(&x, &bank, ConvStrategy::NaiveTd, bank_opts)?.0)?;
        let floor = mean(reference.values());
        for s in conv_strategies(cfg.n_chan) {
            let fop = plane_of(convolve_bank(&x, &bank, s, bank_opts)?.0)?;
            let bad = first_mismatch(fop.values(), reference.values(), REL_TOL, floor);
            results.push(CheckResult {
                check: "conv",
                pair: format!("naive-td vs {}", s.name()),
                seed,
                passed: bad.is_none(),
                detail: bad.map_or_else(String::new, |(p, a, b)| format!("index {p}: {a} vs {b}")),
            });
        }

        for chunk in [1024usize, 2048, 4096].into_iter().filter(|&c| c <= cfg.n_chan) {
            let mut bad = None;
            for (t, h) in bank.templates().iter().enumerate() {
                let want = fir_naive_td(x.as_slice(), h)?;
                let (got, _) = fir_ols_fd(x.as_slice(), h, chunk)?;
                let flat = |v: &[crate::signal::Complex32]| -> Vec<f32> {
                    v.iter().flat_map(|c| [c.re, c.im]).collect()
                };
                let (w, g) = (flat(&want), flat(&got));
                let scale = (w.iter().map(|v| v * v).sum::<f32>() / w.len() as f32).sqrt();
                if let Some(m) = first_mismatch(&g, &w, REL_TOL, scale) {
                    bad = Some((t, m));
                    break;
                }
            }
            results.push(CheckResult {
                check: "discard",
                pair: format!("naive-td vs discard(ols-{chunk})"),
                seed,
                passed: bad.is_none(),
                detail: bad.map_or_else(String::new, |(t, (p, a, b))| {
                    format!("template row {t}, index {p}: {a} vs {b}")
                }),
            });
        }

        let (conv_out, _) = convolve_bank(&x, &bank, ConvStrategy::NaiveFd, bank_opts)?;
        let fop = plane_of(conv_out)?;
        let ta = ThresholdTable::from_mean_power(&fop, cfg.n_hp, 4.0)?;
        let (_, oracle) = harmonic_sum_naive(&fop, &ta, cfg.n_hp, cfg.n_cand)?;
        let fed = if opts.corrupt {
            let mut v = fop.values().to_vec();
            v[(cfg.n_temp / 2) * cfg.n_chan + cfg.n_chan / 3] = 1e30;
            Fop::from_values(cfg.n_temp, cfg.n_chan, v)?
        } else {
            fop.clone()
        };
        for hm in hm_strategies() {
            let (plane, _) = prepare(
                ConvOutput::Fop(fed.clone()),
                ConvStrategy::NaiveFd,
                hm,
                PrepPath::Device,
                cfg.n_hp,
                None,
            )?;
            let (got, _) = harmonic_sum(&plane, hm, &ta, cfg.n_hp, cfg.n_cand, opts.threads)?;
            let detail = if got == oracle {
                String::new()
            } else {
                format!("{} vs {} candidates differ", got.len(), oracle.len())
            };
            results.push(CheckResult {
                check: "harmonic",
                pair: format!("naive vs {}", hm.name()),
                seed,
                passed: detail.is_empty(),
                detail,
            });
        }

        for cols in [16usize, 64] {
            let rfop = reorder(&fop, cols, cfg.n_hp)?;
            let mut bad = None;
            'scan: for k in 1..=cfg.n_hp {
                for i in min_template(cfg.n_temp)..=max_template(cfg.n_temp) {
                    for j in 0..cfg.n_chan {
                        let want = stretch_lookup(&fop, k, i, j)?;
                        if rfop.value(k, i, j).map(f32::to_bits) != Some(want.to_bits()) {
                            bad = Some((k, i, j));
                            break 'scan;
                        }
                    }
                }
            }
            results.push(CheckResult {
                check: "rfop",
                pair: format!("stretch vs rfop-{cols}"),
                seed,
                passed: bad.is_none(),
                detail: bad.map_or_else(String::new, |(k, i, j)| format!("k={k} i={i} j={j}")),
            });
        }
    }
    Ok(results)
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:<9} {:<36} seed={:<6} {}\n",
            r.check,
            r.pair,
            r.seed,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
