//! Windowing, scaling, the dual loss, Adam and the training loop.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{SeriesFrame, SplitRatios};
use crate::error::{shape_err, FanError, Result};
use crate::exec::Exec;
use crate::models::{Backbone, BackboneKind, Checkpoint, DenseLayer, Predictor, PredictorConfig};
use crate::normalizers::{
    compute_y_non_rows, Fan, Identity, MaskPolicy, NonstatForecast, Normalizer, NormalizerKind, Revin,
};
use crate::spectral::{self, FrequencyMask};

/// One input/target pair. `x` covers rows `[anchor − L, anchor)` of the
/// source frame and `y` covers `[anchor, anchor + H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub anchor: usize,
}

/// Stride-1 windows confined to one chronological split of a series.
#[derive(Debug, Clone)]
pub struct WindowSet {
    data: Arc<Array2<f64>>,
    starts: Vec<usize>,
    lookback: usize,
    horizon: usize,
}

impl WindowSet {
    /// Every window whose input and target both lie inside rows `[lo, hi)`.
    pub fn over(data: Arc<Array2<f64>>, lo: usize, hi: usize, lookback: usize, horizon: usize) -> Self {
        let span = lookback + horizon;
        let starts = if hi >= lo + span { (lo..=hi - span).collect() } else { Vec::new() };
        WindowSet {
            data,
            starts,
            lookback,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn anchor(&self, i: usize) -> usize {
        self.starts[i] + self.lookback
    }

    pub fn x(&self, i: usize) -> ArrayView2<'_, f64> {
        let s0 = self.starts[i];
        self.data.slice(s![s0..s0 + self.lookback, ..])
    }

    pub fn y(&self, i: usize) -> ArrayView2<'_, f64> {
        let s0 = self.starts[i] + self.lookback;
        self.data.slice(s![s0..s0 + self.horizon, ..])
    }

    pub fn pair(&self, i: usize) -> WindowPair {
        WindowPair {
            x: self.x(i).to_owned(),
            y: self.y(i).to_owned(),
            anchor: self.anchor(i),
        }
    }

    pub fn x_views(&self) -> Vec<ArrayView2<'_, f64>> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Input and target rows for the listed windows: row `b·D + d` is channel
    /// `d` of window `idx[b]`.
    pub fn rows(&self, idx: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let dims = self.channels();
        let n = idx.len() * dims;
        let mut x = Array2::zeros((n, self.lookback));
        let mut y = Array2::zeros((n, self.horizon));
        for (b, &i) in idx.iter().enumerate() {
            let xv = self.x(i);
            let yv = self.y(i);
            for d in 0..dims {
                x.row_mut(b * dims + d).assign(&xv.column(d));
                y.row_mut(b * dims + d).assign(&yv.column(d));
            }
        }
        (x, y)
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    /// Raw row ranges of the three splits.
    pub bounds: [(usize, usize); 3],
}

/// Splits the raw index range chronologically and builds stride-1 windows
/// inside each part.
pub fn make_windows(frame: &SeriesFrame, lookback: usize, horizon: usize, ratios: &SplitRatios) -> Result<Splits> {
    windows_over(Arc::new(frame.values().to_owned()), lookback, horizon, ratios)
}

pub fn windows_over(data: Arc<Array2<f64>>, lookback: usize, horizon: usize, ratios: &SplitRatios) -> Result<Splits> {
    let n = data.nrows();
    if lookback < 2 || horizon < 1 {
        return Err(FanError::InvalidParameter(format!(
            "lookback must be ≥ 2 and horizon ≥ 1, got L={lookback}, H={horizon}"
        )));
    }
    if n < lookback + horizon + 10 {
        return Err(FanError::InvalidInput(format!(
            "series too short: N={n} rows, L={lookback}, H={horizon} need N ≥ L + H + 10"
        )));
    }
    let bounds = ratios.bounds(n)?;
    let mk = |(lo, hi): (usize, usize)| WindowSet::over(data.clone(), lo, hi, lookback, horizon);
    let splits = Splits {
        train: mk(bounds[0]),
        val: mk(bounds[1]),
        test: mk(bounds[2]),
        bounds,
    };
    // an empty test split is tolerated; evaluating it reports the problem
    for (name, set, (lo, hi)) in [("train", &splits.train, bounds[0]), ("val", &splits.val, bounds[1])] {
        if set.is_empty() {
            return Err(FanError::InvalidInput(format!(
                "series too short: the {name} split has {} rows but one window needs L + H = {} (N={n}, L={lookback}, H={horizon})",
                hi - lo,
                lookback + horizon
            )));
        }
    }
    Ok(splits)
}

/// Per-channel z-score fitted on the training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const SCALER_MIN_STD: f64 = 1e-8;

impl Scaler {
    pub fn fit(train: ArrayView2<'_, f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(FanError::InvalidInput("cannot fit a scaler on zero rows".into()));
        }
        let mean = train.mean_axis(Axis(0)).expect("rows");
        let std = train.std_axis(Axis(0), 0.0).mapv(|s| s.max(SCALER_MIN_STD));
        Ok(Scaler {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        Ok((&x - &mean) / &std)
    }

    pub fn inverse_transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        Ok(&x * &std + &mean)
    }

    fn check(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.mean.len() {
            return Err(shape_err(format!(
                "scaler fitted on {} channels, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

/// Fits the scaler on the training rows, scales the whole frame and windows it.
pub fn prepare(frame: &SeriesFrame, lookback: usize, horizon: usize, ratios: &SplitRatios) -> Result<(Scaler, Splits)> {
    let bounds = ratios.bounds(frame.len())?;
    let scaler = Scaler::fit(frame.values().slice(s![bounds[0].0..bounds[0].1, ..]))?;
    let scaled = scaler.transform(frame.values())?;
    let splits = windows_over(Arc::new(scaled), lookback, horizon, ratios)?;
    Ok((scaler, splits))
}

pub fn mse(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(shape_err(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(FanError::InvalidInput("mse of empty arrays".into()));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub forecast: f64,
    pub nonstat: f64,
}

/// `MSE(ŷ, y) + MSE(ŷ_non, y_non)`, unweighted.
pub fn dual_loss(
    y_hat: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    y_non_hat: ArrayView2<'_, f64>,
    y_non: ArrayView2<'_, f64>,
) -> Result<LossParts> {
    let forecast = mse(y_hat, y)?;
    let nonstat = mse(y_non_hat, y_non)?;
    Ok(LossParts {
        total: forecast + nonstat,
        forecast,
        nonstat,
    })
}

/// Gradients of the total dual loss with respect to `ŷ` and `ŷ_non`, taken
/// as independent arguments.
pub fn dual_loss_grads(
    y_hat: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    y_non_hat: ArrayView2<'_, f64>,
    y_non: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if y_hat.dim() != y.dim() || y_non_hat.dim() != y_non.dim() {
        return Err(shape_err("dual loss arguments differ in shape"));
    }
    let gf = (&y_hat - &y) * (2.0 / y.len() as f64);
    let gn = (&y_non_hat - &y_non) * (2.0 / y_non.len() as f64);
    Ok((gf, gn))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

/// Bias-corrected Adam over a fixed, ordered list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(FanError::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                config.learning_rate
            )));
        }
        Ok(Adam {
            config,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, layers: &mut [&mut DenseLayer]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = layers
                .iter()
                .map(|l| Moments {
                    m_w: Array2::zeros(l.weight.dim()),
                    v_w: Array2::zeros(l.weight.dim()),
                    m_b: Array1::zeros(l.bias.len()),
                    v_b: Array1::zeros(l.bias.len()),
                })
                .collect();
        }
        if self.moments.len() != layers.len()
            || self
                .moments
                .iter()
                .zip(layers.iter())
                .any(|(m, l)| m.m_w.dim() != l.weight.dim() || m.m_b.len() != l.bias.len())
        {
            return Err(shape_err("optimizer state does not match the parameter list"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.grad_weight.iter().chain(l.grad_bias.iter()).any(|g| !g.is_finite()) {
                return Err(FanError::NonFinite(format!(
                    "gradient of parameter tensor {i} is not finite"
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        };
        for (l, mo) in layers.iter_mut().zip(self.moments.iter_mut()) {
            ndarray::Zip::from(&mut l.weight)
                .and(&l.grad_weight)
                .and(&mut mo.m_w)
                .and(&mut mo.v_w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.bias)
                .and(&l.grad_bias)
                .and(&mut mo.m_b)
                .and(&mut mo.v_b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

/// Non-stationary component forecaster choice for FAN pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonstatMode {
    Predict,
    /// Reuse `x_non` periodically (ablation).
    Tile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub k: usize,
    pub normalizer: NormalizerKind,
    pub backbone: BackboneKind,
    pub kernel: usize,
    pub predictor_hidden: Vec<usize>,
    pub nonstat: NonstatMode,
}

/// Normalizer plus backbone: `ŷ = denormalize(g(normalize(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    config: PipelineConfig,
    normalizer: Normalizer,
    backbone: Backbone,
}

/// Forecast rows plus, for FAN, the non-stationary part on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct RowForecast {
    pub y_hat: Array2<f64>,
    pub y_non_hat: Option<Array2<f64>>,
}

impl Pipeline {
    /// Initializes parameters from `seed`: predictor first, then backbone.
    /// `global_mask` is required for the fixed-mask normalizer.
    pub fn init(config: PipelineConfig, global_mask: Option<FrequencyMask>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(config, global_mask, &mut rng)
    }

    fn init_with(config: PipelineConfig, global_mask: Option<FrequencyMask>, rng: &mut ChaCha8Rng) -> Result<Self> {
        if config.k < 1 {
            return Err(FanError::InvalidParameter("k must be at least 1".into()));
        }
        let normalizer = match config.normalizer {
            NormalizerKind::Fan | NormalizerKind::FanFixed => {
                if config.horizon < 2 {
                    return Err(FanError::InvalidParameter(
                        "FAN needs a horizon of at least 2".into(),
                    ));
                }
                let policy = if config.normalizer == NormalizerKind::FanFixed {
                    let mask = global_mask.ok_or_else(|| {
                        FanError::InvalidParameter("fixed-mask FAN needs a global mask".into())
                    })?;
                    MaskPolicy::Fixed(mask)
                } else {
                    MaskPolicy::InstanceWise { k: config.k }
                };
                let nonstat = match config.nonstat {
                    NonstatMode::Predict => {
                        let pc = PredictorConfig {
                            lookback: config.lookback,
                            horizon: config.horizon,
                            hidden: config.predictor_hidden.clone(),
                        };
                        NonstatForecast::Predictor(Predictor::init(pc, rng)?)
                    }
                    NonstatMode::Tile => NonstatForecast::Tile,
                };
                Normalizer::Fan(Fan::new(policy, nonstat, config.horizon)?)
            }
            NormalizerKind::Revin => Normalizer::Revin(Revin),
            NormalizerKind::None => Normalizer::Identity(Identity),
        };
        let backbone = Backbone::init(config.backbone, config.lookback, config.horizon, config.kernel, rng)?;
        Ok(Pipeline {
            config,
            normalizer,
            backbone,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn backbone_mut(&mut self) -> &mut Backbone {
        &mut self.backbone
    }

    pub fn fan_mut(&mut self) -> Option<&mut Fan> {
        match &mut self.normalizer {
            Normalizer::Fan(f) => Some(f),
            _ => None,
        }
    }

    /// Forecast for row batches (`n × L → n × H`).
    pub fn forward_rows(&self, x: ArrayView2<'_, f64>, exec: Exec) -> Result<RowForecast> {
        match &self.normalizer {
            Normalizer::Fan(fan) => {
                let (x_res, x_non, _) = fan.normalize_rows(x, exec)?;
                let y_res = self.backbone.forward_rows(x_res.view())?;
                let y_non = fan.forecast_nonstat_rows(x_non.view(), x)?;
                Ok(RowForecast {
                    y_hat: y_res + &y_non,
                    y_non_hat: Some(y_non),
                })
            }
            Normalizer::Revin(_) => {
                let (mean, std) = Revin::stats_rows(x);
                let mean = mean.insert_axis(Axis(1));
                let std = std.insert_axis(Axis(1));
                let xn = (&x - &mean) / &std;
                let yn = self.backbone.forward_rows(xn.view())?;
                Ok(RowForecast {
                    y_hat: yn * &std + &mean,
                    y_non_hat: None,
                })
            }
            Normalizer::Identity(_) => Ok(RowForecast {
                y_hat: self.backbone.forward_rows(x)?,
                y_non_hat: None,
            }),
        }
    }

    /// Forecast for one `L × D` window.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_rows(x.t(), Exec::Sequential)?.y_hat.reversed_axes())
    }

    /// Forward, dual loss and backward for one row batch. Gradients are reset
    /// first and left in the layers' buffers.
    pub fn train_batch(&mut self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, exec: Exec) -> Result<LossParts> {
        if y.ncols() != self.config.horizon || y.nrows() != x.nrows() {
            return Err(shape_err(format!(
                "targets {:?} for inputs {:?} and horizon {}",
                y.dim(),
                x.dim(),
                self.config.horizon
            )));
        }
        self.zero_grad();
        let k = self.config.k;
        match &mut self.normalizer {
            Normalizer::Fan(fan) => {
                let (x_res, x_non, _) = fan.normalize_rows(x, exec)?;
                let y_res = self.backbone.forward_rows(x_res.view())?;
                let y_non_hat = fan.forecast_nonstat_rows_cached(x_non.view(), x)?;
                let y_hat = y_res + &y_non_hat;
                let y_non = compute_y_non_rows(y, k, exec)?;
                let parts = dual_loss(y_hat.view(), y, y_non_hat.view(), y_non.view())?;
                let (g_y, g_non) = dual_loss_grads(y_hat.view(), y, y_non_hat.view(), y_non.view())?;
                // the forecast term reaches the predictor through ŷ = ŷ_res + ŷ_non
                let g_pred = &g_y + &g_non;
                self.backbone.accumulate_rows(x_res.view(), g_y.view())?;
                fan.backward_nonstat_rows(g_pred.view())?;
                Ok(parts)
            }
            Normalizer::Revin(_) => {
                let (mean, std) = Revin::stats_rows(x);
                let mean = mean.insert_axis(Axis(1));
                let std = std.insert_axis(Axis(1));
                let xn = (&x - &mean) / &std;
                let yn = self.backbone.forward_rows(xn.view())?;
                let y_hat = yn * &std + &mean;
                let forecast = mse(y_hat.view(), y)?;
                let g = (&y_hat - &y) * (2.0 / y.len() as f64) * &std;
                self.backbone.accumulate_rows(xn.view(), g.view())?;
                Ok(LossParts {
                    total: forecast,
                    forecast,
                    nonstat: 0.0,
                })
            }
            Normalizer::Identity(_) => {
                let y_hat = self.backbone.forward_rows(x)?;
                let forecast = mse(y_hat.view(), y)?;
                let g = (&y_hat - &y) * (2.0 / y.len() as f64);
                self.backbone.accumulate_rows(x, g.view())?;
                Ok(LossParts {
                    total: forecast,
                    forecast,
                    nonstat: 0.0,
                })
            }
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(p) = self.fan_mut().and_then(Fan::predictor_mut) {
            p.zero_grad();
        }
        self.backbone.zero_grad();
    }

    /// Trainable layers in a fixed order: predictor layers, then backbone.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut out: Vec<&DenseLayer> = match &self.normalizer {
            Normalizer::Fan(f) => f.predictor().map(|p| p.layers().iter().collect()).unwrap_or_default(),
            _ => Vec::new(),
        };
        out.extend(self.backbone.layers());
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = match &mut self.normalizer {
            Normalizer::Fan(f) => f
                .predictor_mut()
                .map(|p| p.layers_mut().iter_mut().collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        out.extend(self.backbone.layers_mut());
        out
    }

    fn layer_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if let Normalizer::Fan(f) = &self.normalizer {
            if let Some(p) = f.predictor() {
                names.extend((0..p.layers().len()).map(|i| format!("predictor.layer{}", i + 1)));
            }
        }
        names.extend(self.backbone.layer_names().iter().map(|n| format!("backbone.{n}")));
        names
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        for (name, layer) in self.layer_names().iter().zip(self.layers()) {
            ck.push_layer(name, layer);
        }
        ck
    }

    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let names = self.layer_names();
        for (name, layer) in names.iter().zip(self.layers_mut()) {
            ck.load_layer(name, layer)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
}

/// Windows per evaluation chunk; chunks are the unit of parallel work.
const EVAL_CHUNK: usize = 64;

/// MAE and MSE over every window, step and channel. Chunk sums are reduced in
/// window order, so the result does not depend on `exec`.
pub fn evaluate(pipeline: &Pipeline, windows: &WindowSet, exec: Exec) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(FanError::InvalidInput("no windows to evaluate".into()));
    }
    let chunks = windows.len().div_ceil(EVAL_CHUNK);
    let partial = exec.map_range(chunks, |c| -> Result<(f64, f64)> {
        let idx: Vec<usize> = (c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(windows.len())).collect();
        let (x, y) = windows.rows(&idx);
        let f = pipeline.forward_rows(x.view(), Exec::Sequential)?;
        let mut abs = 0.0;
        let mut sq = 0.0;
        for (a, b) in f.y_hat.iter().zip(y.iter()) {
            let e = a - b;
            abs += e.abs();
            sq += e * e;
        }
        Ok((abs, sq))
    });
    let (mut abs, mut sq) = (0.0, 0.0);
    for p in partial {
        let (a, s) = p?;
        abs += a;
        sq += s;
    }
    let count = (windows.len() * windows.horizon() * windows.channels()) as f64;
    Ok(Metrics {
        mae: abs / count,
        mse: sq / count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KChoice {
    Fixed(usize),
    /// Bins above 10% of the peak averaged training amplitude.
    Auto,
}

impl std::str::FromStr for KChoice {
    type Err = FanError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(FanError::InvalidParameter(format!(
                "k must be a positive integer or `auto`, got `{s}`"
            ))),
        }
    }
}

pub const AUTO_K_RATIO: f64 = 0.1;

pub fn resolve_k(choice: KChoice, train: &WindowSet) -> Result<usize> {
    match choice {
        KChoice::Fixed(k) if k >= 1 => Ok(k),
        KChoice::Fixed(_) => Err(FanError::InvalidParameter("k must be at least 1".into())),
        KChoice::Auto => spectral::select_k_by_amplitude_rule(&train.x_views(), AUTO_K_RATIO),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub k: KChoice,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub normalizer: NormalizerKind,
    pub backbone: BackboneKind,
    pub kernel: usize,
    pub predictor_hidden: Vec<usize>,
    pub nonstat: NonstatMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lookback: 96,
            horizon: 96,
            k: KChoice::Auto,
            batch_size: 32,
            learning_rate: 3e-4,
            max_epochs: 100,
            patience: 5,
            seed: 1,
            normalizer: NormalizerKind::Fan,
            backbone: BackboneKind::Dlinear,
            kernel: 25,
            predictor_hidden: vec![64, 128],
            nonstat: NonstatMode::Predict,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FanError::InvalidParameter(m.into()));
        if self.lookback < 2 {
            return bad("lookback must be at least 2");
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch size must be positive");
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be positive");
        }
        if self.patience < 1 {
            return bad("patience must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if let KChoice::Fixed(0) = self.k {
            return bad("k must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossParts,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Patience counter over a validation metric (lower is better).
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records an epoch's score; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score < self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub pipeline: Pipeline,
    pub history: History,
    pub k: usize,
}

/// Trains with validation MSE driving early stopping; returns the
/// best-validation parameters.
pub fn train(config: &TrainConfig, splits: &Splits, exec: Exec) -> Result<TrainOutcome> {
    train_with_validator(config, splits, exec, |p, _| Ok(evaluate(p, &splits.val, exec)?.mse))
}

/// [`train`] with a caller-supplied validation score.
pub fn train_with_validator<F>(config: &TrainConfig, splits: &Splits, exec: Exec, mut validate: F) -> Result<TrainOutcome>
where
    F: FnMut(&Pipeline, usize) -> Result<f64>,
{
    config.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(FanError::InvalidInput("training needs nonempty train and val windows".into()));
    }
    if splits.train.lookback() != config.lookback || splits.train.horizon() != config.horizon {
        return Err(shape_err(format!(
            "windows are L={}, H={} but the config says L={}, H={}",
            splits.train.lookback(),
            splits.train.horizon(),
            config.lookback,
            config.horizon
        )));
    }
    let k = resolve_k(config.k, &splits.train)?;
    let global_mask = match config.normalizer {
        NormalizerKind::FanFixed => Some(spectral::global_mask(&splits.train.x_views(), k)?),
        _ => None,
    };
    let pc = PipelineConfig {
        lookback: config.lookback,
        horizon: config.horizon,
        k,
        normalizer: config.normalizer,
        backbone: config.backbone,
        kernel: config.kernel,
        predictor_hidden: config.predictor_hidden.clone(),
        nonstat: config.nonstat,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pipeline = Pipeline::init_with(pc, global_mask, &mut rng)?;
    let mut adam = Adam::new(AdamConfig::new(config.learning_rate))?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = pipeline.clone();
    let mut history = History::default();
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let trainable = pipeline.parameter_count() > 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sums = LossParts::default();
        let mut rows_seen = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = splits.train.rows(idx);
            let parts = pipeline.train_batch(x.view(), y.view(), exec)?;
            if !parts.total.is_finite() {
                return Err(FanError::NonFinite(format!(
                    "loss is {} at epoch {epoch}, batch {}",
                    parts.total,
                    b + 1
                )));
            }
            if trainable {
                adam.step(&mut pipeline.layers_mut()).map_err(|e| match e {
                    FanError::NonFinite(m) => FanError::NonFinite(format!("{m} at epoch {epoch}, batch {}", b + 1)),
                    other => other,
                })?;
            }
            let w = x.nrows() as f64;
            sums.total += parts.total * w;
            sums.forecast += parts.forecast * w;
            sums.nonstat += parts.nonstat * w;
            rows_seen += x.nrows();
        }
        let n = rows_seen as f64;
        let train_loss = LossParts {
            total: sums.total / n,
            forecast: sums.forecast / n,
            nonstat: sums.nonstat / n,
        };
        let val = validate(&pipeline, epoch)?;
        if !val.is_finite() {
            return Err(FanError::NonFinite(format!("validation MSE is {val} at epoch {epoch}")));
        }
        log::info!(
            "epoch {epoch}: train {:.6} (forecast {:.6}, nonstat {:.6}), val mse {val:.6}",
            train_loss.total,
            train_loss.forecast,
            train_loss.nonstat
        );
        history.epochs.push(EpochRecord {
            epoch,
            train: train_loss,
            val_mse: val,
        });
        if stopper.observe(epoch, val) {
            best = pipeline.clone();
        }
        if stopper.should_stop() {
            history.stopped_early = epoch < config.max_epochs;
            break;
        }
        if !trainable {
            // nothing to learn; later epochs would repeat this one
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok(TrainOutcome {
        pipeline: best,
        history,
        k,
    })
}
