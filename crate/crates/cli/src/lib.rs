//! Command-line harness: synthetic data generation, training, ablations and
//! stationarity diagnostics, all emitting JSON.

pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fan_core::data::{self, SeriesFrame, SplitRatios, SyntheticSpec};
use fan_core::models::BackboneKind;
use fan_core::normalizers::NormalizerKind;
use fan_core::spectral;
use fan_core::training::{self, KChoice, NonstatMode, TrainConfig};
use fan_core::{Exec, FanError, Result};
use ndarray::{s, ArrayView2};

use report::{
    AblationReport, DataFingerprint, Diagnostics, MetricsReport, RunManifest, SeedHistory, SeedMetrics,
    SpectralVariance, SynthManifest, Timing, VariantReport, TOOL_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "fan", version, about = "Frequency adaptive normalization for forecasting")]
pub struct Cli {
    /// Execution mode of the data-parallel stages.
    #[arg(long, global = true, value_enum, default_value_t = ExecMode::Parallel)]
    pub exec: ExecMode,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl From<ExecMode> for Exec {
    fn from(m: ExecMode) -> Exec {
        match m {
            ExecMode::Sequential => Exec::Sequential,
            ExecMode::Parallel => Exec::Parallel,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a composite-sinusoid dataset as CSV.
    Synth(SynthArgs),
    /// Train one configuration over one or more seeds.
    Train(TrainArgs),
    /// Train several ablation variants under identical seeds and budget.
    Ablate(AblateArgs),
    /// Spectral stationarity diagnostics for a dataset.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<String>,
    /// JSON generator spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the series length.
    #[arg(long)]
    pub length: Option<usize>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Flags shared by `train` and `ablate`.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = BackboneKind::Dlinear)]
    pub backbone: BackboneKind,
    #[arg(long, default_value_t = 96)]
    pub lookback: usize,
    #[arg(long, default_value_t = 96)]
    pub horizon: usize,
    /// Number of kept frequencies, or `auto`.
    #[arg(long, default_value = "auto")]
    pub k: KChoice,
    #[arg(long = "seeds", alias = "seed", value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    /// Moving-average kernel of the DLinear backbone.
    #[arg(long, default_value_t = 25)]
    pub kernel: usize,
    /// Hidden widths of the non-stationary predictor.
    #[arg(long, value_delimiter = ',', default_value = "64,128")]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long, default_value_t = NormalizerKind::Fan)]
    pub normalizer: NormalizerKind,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long, value_delimiter = ',', default_value = "full,no-predict,pure-backbone,no-backbone")]
    pub variants: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "auto")]
    pub k: KChoice,
    #[arg(long, default_value_t = 96)]
    pub lookback: usize,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Ablation variants of the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoPredict,
    PureBackbone,
    NoBackbone,
    Fixed,
}

pub const VARIANT_NAMES: [&str; 5] = ["full", "no-predict", "pure-backbone", "no-backbone", "fixed"];

impl std::str::FromStr for Variant {
    type Err = FanError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Variant::Full,
            "no-predict" => Variant::NoPredict,
            "pure-backbone" => Variant::PureBackbone,
            "no-backbone" => Variant::NoBackbone,
            "fixed" => Variant::Fixed,
            other => {
                return Err(FanError::InvalidParameter(format!(
                    "unknown variant `{other}` (valid: {})",
                    VARIANT_NAMES.join(", ")
                )))
            }
        })
    }
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoPredict => "no-predict",
            Variant::PureBackbone => "pure-backbone",
            Variant::NoBackbone => "no-backbone",
            Variant::Fixed => "fixed",
        }
    }

    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        c.normalizer = NormalizerKind::Fan;
        c.nonstat = NonstatMode::Predict;
        match self {
            Variant::Full => {}
            Variant::NoPredict => c.nonstat = NonstatMode::Tile,
            Variant::PureBackbone => c.normalizer = NormalizerKind::None,
            Variant::NoBackbone => c.backbone = BackboneKind::Zero,
            Variant::Fixed => c.normalizer = NormalizerKind::FanFixed,
        }
        c
    }
}

/// Parses a variant list, dropping repeats with a warning.
pub fn parse_variants(names: &[String]) -> Result<Vec<Variant>> {
    let mut out: Vec<Variant> = Vec::new();
    for name in names {
        let v: Variant = name.trim().parse()?;
        if out.contains(&v) {
            log::warn!("variant `{}` listed more than once; running it once", v.name());
        } else {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(FanError::InvalidParameter("no variants given".into()));
    }
    Ok(out)
}

impl RunFlags {
    pub fn config(&self, normalizer: NormalizerKind) -> TrainConfig {
        TrainConfig {
            lookback: self.lookback,
            horizon: self.horizon,
            k: self.k,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seeds.first().copied().unwrap_or(1),
            normalizer,
            backbone: self.backbone,
            kernel: self.kernel,
            predictor_hidden: self.hidden.clone(),
            nonstat: NonstatMode::Predict,
        }
    }
}

/// Results of training one configuration on each seed.
#[derive(Debug, Clone)]
pub struct SeedRuns {
    pub report: MetricsReport,
    pub histories: Vec<SeedHistory>,
    pub checkpoints: Vec<(u64, fan_core::models::Checkpoint)>,
}

/// Scales `frame`, trains `config` once per seed and evaluates on the test
/// windows.
pub fn train_seeds(frame: &SeriesFrame, config: &TrainConfig, seeds: &[u64], exec: Exec) -> Result<SeedRuns> {
    if seeds.is_empty() {
        return Err(FanError::InvalidParameter("no seeds given".into()));
    }
    config.validate()?;
    let ratios = SplitRatios::default();
    let (_, splits) = training::prepare(frame, config.lookback, config.horizon, &ratios)?;
    if splits.test.is_empty() {
        let (lo, hi) = splits.bounds[2];
        return Err(FanError::InvalidInput(format!(
            "series too short: the test split has {} rows but one window needs L + H = {} (N={}, L={}, H={})",
            hi - lo,
            config.lookback + config.horizon,
            frame.len(),
            config.lookback,
            config.horizon
        )));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut epochs = Vec::with_capacity(seeds.len());
    let mut histories = Vec::with_capacity(seeds.len());
    let mut checkpoints = Vec::with_capacity(seeds.len());
    let mut k_resolved = 0;
    for &seed in seeds {
        let mut c = config.clone();
        c.seed = seed;
        let outcome = training::train(&c, &splits, exec)?;
        let m = training::evaluate(&outcome.pipeline, &splits.test, exec)?;
        log::info!("seed {seed}: test mse {:.6}, mae {:.6}", m.mse, m.mae);
        k_resolved = outcome.k;
        per_seed.push(SeedMetrics {
            seed,
            mae: m.mae,
            mse: m.mse,
        });
        epochs.push(outcome.history.epochs.len());
        checkpoints.push((seed, outcome.pipeline.checkpoint()));
        histories.push(SeedHistory {
            seed,
            history: outcome.history,
        });
    }
    let mut shown = config.clone();
    shown.seed = seeds[0];
    Ok(SeedRuns {
        report: MetricsReport::new(shown, k_resolved, per_seed, epochs),
        histories,
        checkpoints,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| FanError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn load_with_fingerprint(path: &Path) -> Result<(SeriesFrame, DataFingerprint)> {
    let bytes = report::read_bytes(path)?;
    let frame = data::read_csv(bytes.as_slice(), &path.display().to_string())?;
    let fp = DataFingerprint {
        path: path.display().to_string(),
        sha256: report::sha256_hex(&bytes),
        rows: frame.len(),
        channels: frame.channels(),
    };
    Ok((frame, fp))
}

fn write_runs(dir: &Path, runs: &SeedRuns, prefix: &str) -> Result<()> {
    report::write_json(&dir.join(format!("{prefix}history.json")), &runs.histories)?;
    for (seed, ck) in &runs.checkpoints {
        ck.save(&dir.join(format!("{prefix}checkpoint-seed{seed}.txt")))?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SynthManifest> {
    let mut spec = match (&args.preset, &args.spec) {
        (Some(name), _) => SyntheticSpec::preset(name, args.seed.unwrap_or(1))?,
        (None, Some(path)) => {
            let bytes = report::read_bytes(path)?;
            serde_json::from_slice::<SyntheticSpec>(&bytes)
                .map_err(|e| FanError::Format(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(FanError::InvalidParameter("give --preset or --spec".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.length {
        spec.length = n;
    }
    if let Some(noise) = args.noise {
        spec.noise_std = noise;
    }
    let frame = data::generate_synthetic(&spec, &SplitRatios::default())?;
    let mut csv = Vec::new();
    data::write_csv(&frame, &mut csv).map_err(|source| FanError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    report::write_text(&args.out, std::str::from_utf8(&csv).expect("csv is utf-8"))?;
    let manifest = SynthManifest {
        tool: "fan".into(),
        version: TOOL_VERSION.into(),
        spec,
        rows: frame.len(),
        sha256: report::sha256_hex(&csv),
    };
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".manifest.json");
    report::write_json(Path::new(&sidecar), &manifest)?;
    Ok(manifest)
}

pub fn cmd_train(args: &TrainArgs, exec: Exec) -> Result<MetricsReport> {
    let (frame, fp) = load_with_fingerprint(&args.run.data)?;
    let config = args.run.config(args.normalizer);
    let start = Instant::now();
    let runs = train_seeds(&frame, &config, &args.run.seeds, exec)?;
    let elapsed = start.elapsed().as_secs_f64();
    let dir = &args.run.out;
    create_dir(dir)?;
    report::write_json(&dir.join("metrics.json"), &runs.report)?;
    report::write_json(
        &dir.join("manifest.json"),
        &RunManifest {
            tool: "fan".into(),
            version: TOOL_VERSION.into(),
            command: "train".into(),
            data: fp,
            configs: vec![runs.report.config.clone()],
            k_resolved: runs.report.k_resolved,
            seeds: runs.report.seeds.clone(),
        },
    )?;
    report::write_json(&dir.join("timing.json"), &Timing { wall_time_seconds: elapsed })?;
    write_runs(dir, &runs, "")?;
    Ok(runs.report)
}

pub fn cmd_ablate(args: &AblateArgs, exec: Exec) -> Result<AblationReport> {
    let variants = parse_variants(&args.variants)?;
    let (frame, fp) = load_with_fingerprint(&args.run.data)?;
    let base = args.run.config(NormalizerKind::Fan);
    let start = Instant::now();
    let dir = &args.run.out;
    create_dir(dir)?;
    let mut sections = Vec::with_capacity(variants.len());
    for v in &variants {
        log::info!("variant {}", v.name());
        let runs = train_seeds(&frame, &v.apply(&base), &args.run.seeds, exec)?;
        write_runs(dir, &runs, &format!("{}-", v.name()))?;
        sections.push(VariantReport {
            variant: v.name().into(),
            metrics: runs.report,
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    let out = AblationReport {
        seeds: args.run.seeds.clone(),
        variants: sections,
    };
    report::write_json(&dir.join("ablation.json"), &out)?;
    report::write_json(
        &dir.join("manifest.json"),
        &RunManifest {
            tool: "fan".into(),
            version: TOOL_VERSION.into(),
            command: "ablate".into(),
            data: fp,
            configs: out.variants.iter().map(|v| v.metrics.config.clone()).collect(),
            k_resolved: out.variants[0].metrics.k_resolved,
            seeds: out.seeds.clone(),
        },
    )?;
    report::write_json(&dir.join("timing.json"), &Timing { wall_time_seconds: elapsed })?;
    Ok(out)
}

/// Stride-1 windows of `lookback` rows over `values[lo..hi]`.
fn windows_in(values: ArrayView2<'_, f64>, lo: usize, hi: usize, lookback: usize) -> Vec<ArrayView2<'_, f64>> {
    if hi < lo + lookback {
        return Vec::new();
    }
    (lo..=hi - lookback).map(|s| values.slice_move(s![s..s + lookback, ..])).collect()
}

pub fn cmd_diagnose(args: &DiagnoseArgs, exec: Exec) -> Result<Diagnostics> {
    let frame = data::load_csv(&args.data)?;
    diagnose(&frame, args.k, args.lookback, exec)
}

pub fn diagnose(frame: &SeriesFrame, k: KChoice, lookback: usize, exec: Exec) -> Result<Diagnostics> {
    if lookback < 2 {
        return Err(FanError::InvalidParameter(format!("lookback must be at least 2, got {lookback}")));
    }
    let ratios = SplitRatios::default();
    let [(lo, hi), _, _] = ratios.bounds(frame.len())?;
    let values = frame.values();
    let k_resolved = match k {
        KChoice::Fixed(k) => k,
        KChoice::Auto => {
            let train = windows_in(values, lo, hi, lookback);
            if train.is_empty() {
                return Err(FanError::InvalidInput(format!(
                    "series too short: the train split has {} rows, fewer than L={lookback}",
                    hi - lo
                )));
            }
            spectral::select_k_by_amplitude_rule(&train, training::AUTO_K_RATIO)?
        }
    };
    let all = windows_in(values, 0, frame.len(), lookback);
    if all.len() < 2 {
        return Err(FanError::InvalidInput(format!(
            "series too short: N={} gives {} windows of L={lookback}, need 2",
            frame.len(),
            all.len()
        )));
    }
    let residuals = exec.map_slice(&all, |w| spectral::frl_decompose(*w, k_resolved).map(|d| d.x_res));
    let residuals = residuals.into_iter().collect::<Result<Vec<_>>>()?;
    let res_views: Vec<_> = residuals.iter().map(|r| r.view()).collect();
    Ok(Diagnostics {
        lookback,
        k_resolved,
        windows: all.len(),
        spectral_variance: SpectralVariance {
            before: spectral::spectral_variance_with(&all, exec)?,
            after: spectral::spectral_variance_with(&res_views, exec)?,
        },
        selection_density: spectral::frequency_selection_density(&all, k_resolved)?,
        dataset_stats: data::dataset_stats(frame, &ratios, lookback)?,
    })
}

/// Applies `FAN_THREADS` to the global pool, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| FanError::InvalidParameter(format!("FAN_THREADS must be a positive integer, got `{raw}`")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialized; FAN_THREADS ignored");
    }
    Ok(())
}

/// Runs a parsed command, printing its JSON result to stdout.
pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let exec = Exec::from(cli.exec);
    let json = match &cli.command {
        Command::Synth(a) => report::to_json(&cmd_synth(a)?)?,
        Command::Train(a) => report::to_json(&cmd_train(a, exec)?)?,
        Command::Ablate(a) => report::to_json(&cmd_ablate(a, exec)?)?,
        Command::Diagnose(a) => {
            let d = cmd_diagnose(a, exec)?;
            let text = report::to_json(&d)?;
            if let Some(path) = &a.out {
                report::write_text(path, &text)?;
            }
            text
        }
    };
    print!("{json}");
    Ok(())
}

/// One-line rendering of an error and its sources.
pub fn error_line(e: &FanError) -> String {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        let part = s.to_string();
        if !msg.contains(&part) {
            msg.push_str(": ");
            msg.push_str(&part);
        }
        src = s.source();
    }
    format!("error[{}]: {}", e.category(), msg.replace('\n', " "))
}
