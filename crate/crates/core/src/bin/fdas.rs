use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fdas_core::conv::ConvStrategy;
use fdas_core::harmonic::HarmonicStrategy;
use fdas_core::io;
use fdas_core::model::{self, DeviceModel, PipelinePlan, Scheme};
use fdas_core::pipeline::{self, RunOptions, DEFAULT_THRESHOLD_FACTOR};
use fdas_core::prep::{required_steps, PrepPath, PrepSteps, PreparedPlane};
use fdas_core::signal::{generate_input, ComplexSeries, FdasConfig, FilterBank, Injection};
use fdas_core::verify::{self, VerifyOptions};
use fdas_core::StageTiming;

#[derive(Parser)]
#[command(name = "fdas", version, about = "Fourier-domain acceleration search harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic frequency series.
    Gen(GenArgs),
    /// Run one convolution x harmonic-summing combination end to end.
    Run(RunArgs),
    /// Cross-check every strategy against its reference.
    Verify(VerifyArgs),
    /// Rank combinations with the pipeline model.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SignalArgs {
    /// JSON config; desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Injected signal as CHANNEL[:HARMONICS[:AMPLITUDE]]; repeatable.
    #[arg(long, value_parser = parse_injection)]
    inject: Vec<Injection>,
    /// Noise deviation per time-domain component.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvKind {
    NaiveTd,
    OlaTd,
    NaiveFd,
    OlsFd,
}

#[derive(Clone, Copy, ValueEnum)]
enum HmKind {
    Single,
    NaiveMulti,
    MultiN,
    MultiR,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    SingleInput,
    MultiInput,
    MultiConfig,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::SingleInput => Scheme::SingleInput,
            SchemeArg::MultiInput => Scheme::MultiInput,
            SchemeArg::MultiConfig => Scheme::MultiConfig,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Device,
    Host,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    signal: SignalArgs,
    /// Series file from `fdas gen`; generated from --seed when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "naive-fd")]
    conv: ConvKind,
    /// OLA sub-filter length or OLS chunk size.
    #[arg(long)]
    conv_param: Option<usize>,
    /// FFT engines for OLS (1 area-efficient, 2 time-efficient).
    #[arg(long, default_value_t = 1)]
    engines: u8,
    /// Templates per convolution launch.
    #[arg(long, default_value_t = 2)]
    filters_per_launch: usize,
    #[arg(long, value_enum, default_value = "naive-multi")]
    hm: HmKind,
    /// Columns per work item (single) or per group (multi-n, multi-r).
    #[arg(long)]
    hm_cols: Option<usize>,
    /// Points per work item (multi-r).
    #[arg(long, default_value_t = 4)]
    hm_ppi: usize,
    /// Preparation steps, e.g. `discard+transpose` or `-`; must match the
    /// steps the combination needs.
    #[arg(long)]
    prep: Option<String>,
    #[arg(long, value_enum, default_value = "device")]
    prep_path: PathArg,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_FACTOR)]
    threshold_factor: f32,
    #[arg(long, default_value_t = 1)]
    devices: usize,
    #[arg(long, value_enum, default_value = "single-input")]
    scheme: SchemeArg,
    /// Device model JSON.
    #[arg(long)]
    device: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Channels per series, a power of two in 1024..=16384.
    #[arg(long, default_value_t = 1024)]
    scale: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON array of named stage timings.
    #[arg(long, conflicts_with = "measure", required_unless_present = "measure")]
    timings: Option<PathBuf>,
    /// Measure every desk-scale combination instead.
    #[arg(long)]
    measure: bool,
    /// Config for --measure; desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repetitions per measured combination (median kept).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    devices: usize,
    /// Multi-device schemes to report; all when omitted.
    #[arg(long, value_enum)]
    scheme: Vec<SchemeArg>,
    #[arg(long)]
    device: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Exit 2 for bad specs, 1 for failures while running.
enum Failure {
    Spec(anyhow::Error),
    Run(anyhow::Error),
}

type Outcome<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn spec(self) -> Outcome<T>;
    fn run(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn spec(self) -> Outcome<T> {
        self.map_err(|e| Failure::Spec(e.into()))
    }
    fn run(self) -> Outcome<T> {
        self.map_err(|e| Failure::Run(e.into()))
    }
}

fn parse_injection(s: &str) -> Result<Injection, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.is_empty() || parts.len() > 3 {
        return Err("expected CHANNEL[:HARMONICS[:AMPLITUDE]]".into());
    }
    let num = |p: &str| p.parse::<usize>().map_err(|e| format!("{p}: {e}"));
    Ok(Injection {
        channel: num(parts[0])?,
        harmonics: parts.get(1).map(|p| num(p)).transpose()?.unwrap_or(1),
        amplitude: parts
            .get(2)
            .map(|p| p.parse::<f64>().map_err(|e| format!("{p}: {e}")))
            .transpose()?
            .unwrap_or(0.05),
    })
}

fn load_config(path: Option<&Path>) -> Outcome<FdasConfig> {
    match path {
        Some(p) => io::load_config(p).spec(),
        None => Ok(FdasConfig::desk_scale()),
    }
}

fn load_device(path: Option<&Path>) -> Outcome<DeviceModel> {
    let dev = match path {
        Some(p) => io::read_json(p).spec()?,
        None => DeviceModel::default(),
    };
    dev.validate().spec()?;
    Ok(dev)
}

fn make_dir(out: &Path) -> Outcome {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .run()
}

fn signal(args: &SignalArgs, cfg: &FdasConfig) -> Outcome<ComplexSeries> {
    for inj in &args.inject {
        if inj.channel >= cfg.n_chan {
            return Err(Failure::Spec(anyhow!(
                "injection channel {} >= n_chan {}",
                inj.channel,
                cfg.n_chan
            )));
        }
    }
    generate_input(cfg, &args.inject, args.noise, args.seed).spec()
}

fn cmd_gen(args: GenArgs) -> Outcome {
    let cfg = load_config(args.signal.config.as_deref())?;
    let x = signal(&args.signal, &cfg)?;
    make_dir(&args.out)?;
    io::save_series(&args.out.join("input.csr"), &x).run()?;
    io::save_config(&args.out.join("config.json"), &cfg).run()?;
    Ok(())
}

fn strategies(args: &RunArgs, cfg: &FdasConfig) -> Outcome<(ConvStrategy, HarmonicStrategy)> {
    let conv = match args.conv {
        ConvKind::NaiveTd => ConvStrategy::NaiveTd,
        ConvKind::OlaTd => ConvStrategy::OlaTd {
            n_paral: args.conv_param.unwrap_or(128),
        },
        ConvKind::NaiveFd => ConvStrategy::NaiveFd,
        ConvKind::OlsFd => ConvStrategy::OlsFd {
            chunk: args.conv_param.unwrap_or(2048),
            engines: args.engines,
        },
    };
    let cols = args.hm_cols;
    let hm = match args.hm {
        HmKind::Single => HarmonicStrategy::SingleHp {
            n_paral: cols.unwrap_or(16),
        },
        HmKind::NaiveMulti => HarmonicStrategy::NaiveMultipleHp,
        HmKind::MultiN => HarmonicStrategy::MultipleHpN {
            cols_per_group: cols.unwrap_or(64),
        },
        HmKind::MultiR => HarmonicStrategy::MultipleHpR {
            cols_per_group: cols.unwrap_or(64),
            points_per_item: args.hm_ppi,
        },
    };
    conv.validate(cfg.n_tap).spec()?;
    hm.validate().spec()?;
    Ok((conv, hm))
}

#[derive(Serialize)]
struct PlanReport<'a> {
    combination: String,
    plan: &'a PipelinePlan,
    period_contended: f64,
    device: &'a DeviceModel,
}

fn cmd_run(args: RunArgs) -> Outcome {
    let cfg = load_config(args.signal.config.as_deref())?;
    let (conv, hm) = strategies(&args, &cfg)?;
    let prep = match &args.prep {
        Some(s) => {
            let steps = PrepSteps::parse(s).spec()?;
            let needed = required_steps(conv, hm);
            if steps != needed {
                return Err(Failure::Spec(anyhow!(
                    "{} -> {} needs preparation `{}`, not `{}`",
                    conv.name(),
                    hm.name(),
                    needed.describe(),
                    steps.describe()
                )));
            }
            Some(steps)
        }
        None => None,
    };
    if args.devices == 0 {
        return Err(Failure::Spec(anyhow!("--devices must be >= 1")));
    }
    let dev = load_device(args.device.as_deref())?;
    let x = match &args.input {
        Some(p) => io::load_series(p).run()?,
        None => signal(&args.signal, &cfg)?,
    };
    let bank = FilterBank::synthetic(cfg.n_temp, cfg.n_tap).run()?;
    let opts = RunOptions {
        conv,
        hm,
        filters_per_launch: args.filters_per_launch,
        threads: args.threads,
        prep_path: match args.prep_path {
            PathArg::Device => PrepPath::Device,
            PathArg::Host => PrepPath::Host,
        },
        prep,
        threshold_factor: args.threshold_factor,
    };
    let out = pipeline::run(&cfg, &x, &bank, &opts).run()?;

    let plan = model::plan(
        &out.timing,
        &dev,
        cfg.fop_bytes() as f64,
        args.devices,
        args.scheme.into(),
        cfg.t_limit,
    )
    .run()?;
    let contended = model::contended_period(&out.timing, &dev, plan.buffering).run()?;

    make_dir(&args.out)?;
    io::save_fop(&args.out.join("fop.bin"), &out.fop).run()?;
    if let PreparedPlane::RFop(r) = &out.plane {
        io::save_rfop(&args.out.join("rfop.bin"), r).run()?;
    }
    let cands = out.candidates.entries();
    io::save_candidates(&args.out.join("candidates.csv"), &cands).run()?;
    io::write_json(&args.out.join("timing.json"), &out.timing).run()?;
    let combination = pipeline::combination_name(conv, hm);
    io::write_json(
        &args.out.join("plan.json"),
        &PlanReport {
            combination: combination.clone(),
            plan: &plan,
            period_contended: contended,
            device: &dev,
        },
    )
    .run()?;
    println!(
        "{combination}: {} candidates, t_fdas {:.3} ms, {:?} buffering, period {:.3} ms",
        cands.len(),
        plan.t_fdas,
        plan.buffering,
        plan.period
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Outcome {
    let mut opts = VerifyOptions::at_scale(args.scale, args.seed).spec()?;
    opts.cases = args.cases;
    opts.threads = args.threads;
    opts.corrupt = args.corrupt;
    let results = verify::run_checks(&opts).run()?;
    print!("{}", verify::format_table(&results));
    if let Some(f) = results.iter().find(|r| !r.passed) {
        return Err(Failure::Run(anyhow!(
            "{} check failed: {} (seed {}) {}",
            f.check,
            f.pair,
            f.seed,
            f.detail
        )));
    }
    Ok(())
}

fn measured_timings(args: &SweepArgs) -> Outcome<Vec<(String, StageTiming)>> {
    let cfg = load_config(args.config.as_deref())?;
    let inj = Injection {
        channel: cfg.n_chan / 4,
        harmonics: 4,
        amplitude: 0.05,
    };
    let x = generate_input(&cfg, &[inj], 1.0, args.seed).spec()?;
    let bank = FilterBank::synthetic(cfg.n_temp, cfg.n_tap).run()?;
    pipeline::desk_combinations(&cfg)
        .into_iter()
        .map(|(conv, hm)| {
            let opts = RunOptions {
                conv,
                hm,
                filters_per_launch: 2,
                threads: args.threads,
                ..RunOptions::default()
            };
            let st = pipeline::measure(&cfg, &x, &bank, &opts, args.reps)?;
            Ok((pipeline::combination_name(conv, hm), st))
        })
        .collect::<fdas_core::Result<_>>()
        .run()
}

fn cmd_sweep(args: SweepArgs) -> Outcome {
    if args.devices == 0 {
        return Err(Failure::Spec(anyhow!("--devices must be >= 1")));
    }
    let dev = load_device(args.device.as_deref())?;
    let (timings, plane_bytes) = match &args.timings {
        Some(p) => (io::load_timings(p).spec()?, FdasConfig::default().fop_bytes()),
        None => (
            measured_timings(&args)?,
            load_config(args.config.as_deref())?.fop_bytes(),
        ),
    };
    if timings.is_empty() {
        return Err(Failure::Spec(anyhow!("empty combination list")));
    }
    let mut rows = model::sweep(&timings, &dev, args.devices, plane_bytes as f64).run()?;
    if !args.scheme.is_empty() {
        let keep: Vec<&str> = args.scheme.iter().map(|&s| Scheme::from(s).name()).collect();
        for r in &mut rows {
            r.period_multidevice.retain(|k, _| keep.contains(&k.as_str()));
        }
    }
    make_dir(&args.out)?;
    io::write_json(&args.out.join("report.json"), &rows).run()?;
    let file = std::fs::File::create(args.out.join("report.csv"))
        .context("creating report.csv")
        .run()?;
    io::write_report_csv(file, &rows).run()?;
    for (rank, r) in rows.iter().enumerate() {
        println!(
            "{:>2} {:<40} t_fdas {:>10.3}  x{}  period {:>10.3}  contended {:>10.3}",
            rank + 1,
            r.combination,
            r.t_fdas,
            r.buffering,
            r.period_ideal,
            r.period_contended
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

