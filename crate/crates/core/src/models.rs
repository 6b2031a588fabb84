//! Small differentiable building blocks with hand-written reverse mode.
//!
//! Every model works on row batches: an `n × in` matrix whose rows are
//! single-channel windows. Channels of a multivariate window become separate
//! rows, so parameters are shared across channels.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Dimension, ArrayBase, Data};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FanError, Result};

/// Affine map `y = W x + b` with gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub grad_weight: Array2<f64>,
    pub grad_bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
            grad_weight: Array2::zeros((outputs, inputs)),
            grad_bias: Array1::zeros(outputs),
        }
    }

    /// Weights uniform in `±1/√inputs`, biases zero.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        layer
            .weight
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..=bound));
        layer
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(shape_err(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        let (o, i) = weight.dim();
        Ok(DenseLayer {
            weight,
            bias,
            grad_weight: Array2::zeros((o, i)),
            grad_bias: Array1::zeros(o),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.inputs() {
            return Err(shape_err(format!(
                "layer expects {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        Ok(self.weight.dot(&x) + &self.bias)
    }

    /// Accumulates parameter gradients and returns `Wᵀ grad_out`.
    pub fn backward(&mut self, x: ArrayView1<'_, f64>, grad_out: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.inputs() || grad_out.len() != self.outputs() {
            return Err(shape_err(format!(
                "backward through {}→{} layer with input {} and gradient {}",
                self.inputs(),
                self.outputs(),
                x.len(),
                grad_out.len()
            )));
        }
        let g = grad_out.insert_axis(Axis(1));
        let xr = x.insert_axis(Axis(0));
        self.grad_weight += &g.dot(&xr);
        self.grad_bias += &grad_out;
        Ok(self.weight.t().dot(&grad_out))
    }

    /// Row-batched forward: `(n × in) → (n × out)`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.inputs() {
            return Err(shape_err(format!(
                "layer expects {} inputs, got rows of {}",
                self.inputs(),
                x.ncols()
            )));
        }
        let mut out = x.dot(&self.weight.t());
        out += &self.bias;
        Ok(out)
    }

    /// Row-batched backward; accumulates gradients summed over rows and
    /// returns the `n × in` input gradient.
    pub fn backward_batch(&mut self, x: ArrayView2<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.accumulate_batch(x, grad_out)?;
        Ok(grad_out.dot(&self.weight))
    }

    /// Like [`Self::backward_batch`] without the input gradient.
    pub fn accumulate_batch(&mut self, x: ArrayView2<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.inputs() || grad_out.ncols() != self.outputs() || x.nrows() != grad_out.nrows() {
            return Err(shape_err(format!(
                "backward through {}→{} layer with input {:?} and gradient {:?}",
                self.inputs(),
                self.outputs(),
                x.dim(),
                grad_out.dim()
            )));
        }
        ndarray::linalg::general_mat_mul(1.0, &grad_out.t(), &x, 1.0, &mut self.grad_weight);
        self.grad_bias += &grad_out.sum_axis(Axis(0));
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

pub fn relu<S, D>(x: &ArrayBase<S, D>) -> ndarray::Array<f64, D>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    x.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient passes where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward<S, T, D>(x: &ArrayBase<S, D>, grad_out: &ArrayBase<T, D>) -> Result<ndarray::Array<f64, D>>
where
    S: Data<Elem = f64>,
    T: Data<Elem = f64>,
    D: Dimension,
{
    if x.shape() != grad_out.shape() {
        return Err(shape_err(format!(
            "relu input {:?} vs gradient {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let mut g = grad_out.to_owned();
    g.zip_mut_with(x, |g, &v| {
        if v <= 0.0 {
            *g = 0.0
        }
    });
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub lookback: usize,
    pub horizon: usize,
    /// First entry is the width of the layer fed by `x_non`; the raw input is
    /// concatenated onto its activations before the next layer.
    pub hidden: Vec<usize>,
}

impl PredictorConfig {
    pub fn new(lookback: usize, horizon: usize) -> Self {
        PredictorConfig {
            lookback,
            horizon,
            hidden: vec![64, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PredictorCache {
    x_non: Array2<f64>,
    concat: Array2<f64>,
    /// Pre-activations of every hidden layer.
    pre: Vec<Array2<f64>>,
    /// Post-activation output of every hidden layer.
    post: Vec<Array2<f64>>,
}

/// MLP forecasting the horizon's principal component from the input's
/// principal component and the raw input:
/// `W₃ ReLU(W₂ [ReLU(W₁ x_non); x])` for the default two hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    config: PredictorConfig,
    layers: Vec<DenseLayer>,
    cache: Option<PredictorCache>,
}

impl Predictor {
    pub fn init<R: Rng>(config: PredictorConfig, rng: &mut R) -> Result<Self> {
        Self::build(config, |i, o| DenseLayer::init(i, o, rng))
    }

    pub fn zeros(config: PredictorConfig) -> Result<Self> {
        Self::build(config, DenseLayer::zeros)
    }

    fn build(config: PredictorConfig, mut make: impl FnMut(usize, usize) -> DenseLayer) -> Result<Self> {
        if config.hidden.is_empty() || config.hidden.contains(&0) {
            return Err(FanError::InvalidParameter(
                "predictor needs at least one nonzero hidden size".into(),
            ));
        }
        if config.lookback == 0 || config.horizon == 0 {
            return Err(FanError::InvalidParameter(
                "predictor lookback and horizon must be positive".into(),
            ));
        }
        let l = config.lookback;
        let h = &config.hidden;
        let mut layers = vec![make(l, h[0])];
        let mut width = h[0] + l;
        for &next in &h[1..] {
            layers.push(make(width, next));
            width = next;
        }
        layers.push(make(width, config.horizon));
        Ok(Predictor {
            config,
            layers,
            cache: None,
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    fn check_rows(&self, x_non: &ArrayView2<'_, f64>, x: &ArrayView2<'_, f64>) -> Result<()> {
        let l = self.config.lookback;
        if x_non.ncols() != l || x.ncols() != l || x_non.nrows() != x.nrows() {
            return Err(shape_err(format!(
                "predictor with lookback {l} got x_non {:?} and x {:?}",
                x_non.dim(),
                x.dim()
            )));
        }
        Ok(())
    }

    fn run(&self, x_non: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, PredictorCache)> {
        self.check_rows(&x_non, &x)?;
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(last);
        let mut post = Vec::with_capacity(last);
        let a0 = self.layers[0].forward_batch(x_non)?;
        let h0 = relu(&a0);
        pre.push(a0);
        let concat = concatenate(Axis(1), &[h0.view(), x])
            .map_err(|e| shape_err(e.to_string()))?;
        post.push(h0);
        let mut current = concat.clone();
        for layer in &self.layers[1..last] {
            let a = layer.forward_batch(current.view())?;
            let h = relu(&a);
            pre.push(a);
            post.push(h.clone());
            current = h;
        }
        let out = self.layers[last].forward_batch(current.view())?;
        Ok((
            out,
            PredictorCache {
                x_non: x_non.to_owned(),
                concat,
                pre,
                post,
            },
        ))
    }

    /// Row-batched forward without caching.
    pub fn forward_rows(&self, x_non: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.run(x_non, x).map(|(out, _)| out)
    }

    /// Row-batched forward that caches activations for [`Self::backward_rows`].
    pub fn forward_rows_cached(&mut self, x_non: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (out, cache) = self.run(x_non, x)?;
        self.cache = Some(cache);
        Ok(out)
    }

    /// Forward on one `L × D` window, applied per channel with shared
    /// parameters; returns `H × D`.
    pub fn forward(&self, x_non: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x_non.dim() != x.dim() {
            return Err(shape_err("x_non and x differ in shape"));
        }
        Ok(self.forward_rows(x_non.t(), x.t())?.reversed_axes())
    }

    /// Accumulates parameter gradients from the cached forward and returns the
    /// gradients with respect to `(x_non, x)`.
    pub fn backward_rows(&mut self, grad_out: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| FanError::State("predictor backward without a cached forward".into()))?;
        let last = self.layers.len() - 1;
        if grad_out.ncols() != self.config.horizon || grad_out.nrows() != cache.x_non.nrows() {
            return Err(shape_err(format!(
                "gradient {:?} does not match predictor output ({}, {})",
                grad_out.dim(),
                cache.x_non.nrows(),
                self.config.horizon
            )));
        }
        let top_input = if last == 1 { &cache.concat } else { &cache.post[last - 1] };
        let mut g = self.layers[last].backward_batch(top_input.view(), grad_out)?;
        for i in (1..last).rev() {
            g = relu_backward(&cache.pre[i], &g)?;
            let input = if i == 1 { &cache.concat } else { &cache.post[i - 1] };
            g = self.layers[i].backward_batch(input.view(), g.view())?;
        }
        let h0 = self.config.hidden[0];
        let g_h0 = g.slice(s![.., ..h0]);
        let g_x = g.slice(s![.., h0..]).to_owned();
        let g_a0 = relu_backward(&cache.pre[0], &g_h0)?;
        let g_x_non = self.layers[0].backward_batch(cache.x_non.view(), g_a0.view())?;
        Ok((g_x_non, g_x))
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::zero_grad);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    Dlinear,
    /// Repeats the last observed value (zero parameters).
    Naive,
    /// Always forecasts zero; pairs with FAN for the "no backbone" ablation.
    Zero,
}

impl std::str::FromStr for BackboneKind {
    type Err = FanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dlinear" => Ok(BackboneKind::Dlinear),
            "naive" => Ok(BackboneKind::Naive),
            "zero" => Ok(BackboneKind::Zero),
            other => Err(FanError::InvalidParameter(format!(
                "unknown backbone `{other}` (expected dlinear, naive or zero)"
            ))),
        }
    }
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackboneKind::Dlinear => "dlinear",
            BackboneKind::Naive => "naive",
            BackboneKind::Zero => "zero",
        })
    }
}

/// Moving-average trend plus remainder, each mapped `L → H` by its own layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DLinear {
    pub trend: DenseLayer,
    pub seasonal: DenseLayer,
    kernel: usize,
    /// `L × L` replicate-padded moving-average operator.
    average: Array2<f64>,
}

impl DLinear {
    pub fn init<R: Rng>(lookback: usize, horizon: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        let average = moving_average_matrix(lookback, kernel)?;
        Ok(DLinear {
            trend: DenseLayer::init(lookback, horizon, rng),
            seasonal: DenseLayer::init(lookback, horizon, rng),
            kernel,
            average,
        })
    }

    pub fn zeros(lookback: usize, horizon: usize, kernel: usize) -> Result<Self> {
        Ok(DLinear {
            trend: DenseLayer::zeros(lookback, horizon),
            seasonal: DenseLayer::zeros(lookback, horizon),
            kernel,
            average: moving_average_matrix(lookback, kernel)?,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// Splits rows into (trend, remainder).
    pub fn decompose_rows(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
        let trend = x.dot(&self.average.t());
        let seasonal = &x - &trend;
        (trend, seasonal)
    }
}

/// Row `t` averages the `kernel` samples centred on `t`, with the first and
/// last samples repeated past the edges.
fn moving_average_matrix(len: usize, kernel: usize) -> Result<Array2<f64>> {
    if kernel == 0 || kernel % 2 == 0 || kernel > len {
        return Err(FanError::InvalidParameter(format!(
            "moving-average kernel must be odd and at most the lookback {len}, got {kernel}"
        )));
    }
    let half = (kernel / 2) as isize;
    let w = 1.0 / kernel as f64;
    let mut m = Array2::zeros((len, len));
    for t in 0..len as isize {
        for o in -half..=half {
            let src = (t + o).clamp(0, len as isize - 1) as usize;
            m[[t as usize, src]] += w;
        }
    }
    Ok(m)
}

/// Forecasting model applied to the normalized (residual) input.
#[derive(Debug, Clone, PartialEq)]
pub enum Backbone {
    Dlinear(DLinear),
    Naive { lookback: usize, horizon: usize },
    Zero { lookback: usize, horizon: usize },
}

impl Backbone {
    pub fn init<R: Rng>(kind: BackboneKind, lookback: usize, horizon: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        if lookback == 0 || horizon == 0 {
            return Err(FanError::InvalidParameter(
                "backbone lookback and horizon must be positive".into(),
            ));
        }
        Ok(match kind {
            BackboneKind::Dlinear => Backbone::Dlinear(DLinear::init(lookback, horizon, kernel, rng)?),
            BackboneKind::Naive => Backbone::Naive { lookback, horizon },
            BackboneKind::Zero => Backbone::Zero { lookback, horizon },
        })
    }

    pub fn kind(&self) -> BackboneKind {
        match self {
            Backbone::Dlinear(_) => BackboneKind::Dlinear,
            Backbone::Naive { .. } => BackboneKind::Naive,
            Backbone::Zero { .. } => BackboneKind::Zero,
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            Backbone::Dlinear(d) => d.trend.inputs(),
            Backbone::Naive { lookback, .. } | Backbone::Zero { lookback, .. } => *lookback,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Backbone::Dlinear(d) => d.trend.outputs(),
            Backbone::Naive { horizon, .. } | Backbone::Zero { horizon, .. } => *horizon,
        }
    }

    fn check(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.lookback() {
            return Err(shape_err(format!(
                "backbone expects rows of {}, got {}",
                self.lookback(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        let n = x.nrows();
        Ok(match self {
            Backbone::Dlinear(d) => {
                let (trend, seasonal) = d.decompose_rows(x);
                d.trend.forward_batch(trend.view())? + d.seasonal.forward_batch(seasonal.view())?
            }
            Backbone::Naive { lookback, horizon } => {
                let last = x.column(lookback - 1);
                Array2::from_shape_fn((n, *horizon), |(r, _)| last[r])
            }
            Backbone::Zero { horizon, .. } => Array2::zeros((n, *horizon)),
        })
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward_rows(&mut self, x: ArrayView2<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        if grad_out.dim() != (x.nrows(), self.horizon()) {
            return Err(shape_err(format!(
                "backbone gradient {:?}, expected {:?}",
                grad_out.dim(),
                (x.nrows(), self.horizon())
            )));
        }
        Ok(match self {
            Backbone::Dlinear(d) => {
                let (trend, seasonal) = d.decompose_rows(x);
                let g_trend = d.trend.backward_batch(trend.view(), grad_out)?;
                let g_seasonal = d.seasonal.backward_batch(seasonal.view(), grad_out)?;
                (&g_trend - &g_seasonal).dot(&d.average) + g_seasonal
            }
            Backbone::Naive { lookback, .. } => {
                let mut g = Array2::zeros(x.dim());
                g.column_mut(*lookback - 1).assign(&grad_out.sum_axis(Axis(1)));
                g
            }
            Backbone::Zero { .. } => Array2::zeros(x.dim()),
        })
    }

    /// Parameter-update path used during training: skips the input gradient.
    pub fn accumulate_rows(&mut self, x: ArrayView2<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Result<()> {
        match self {
            Backbone::Dlinear(d) => {
                let (trend, seasonal) = d.decompose_rows(x);
                d.trend.accumulate_batch(trend.view(), grad_out)?;
                d.seasonal.accumulate_batch(seasonal.view(), grad_out)?;
                Ok(())
            }
            _ => {
                self.check(&x)?;
                Ok(())
            }
        }
    }

    /// `L × D → H × D`, channels handled independently with shared weights.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_rows(x.t())?.reversed_axes())
    }

    pub fn layers(&self) -> Vec<&DenseLayer> {
        match self {
            Backbone::Dlinear(d) => vec![&d.trend, &d.seasonal],
            _ => Vec::new(),
        }
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        match self {
            Backbone::Dlinear(d) => vec![&mut d.trend, &mut d.seasonal],
            _ => Vec::new(),
        }
    }

    pub fn layer_names(&self) -> &'static [&'static str] {
        match self {
            Backbone::Dlinear(_) => &["trend", "seasonal"],
            _ => &[],
        }
    }

    pub fn zero_grad(&mut self) {
        self.layers_mut().into_iter().for_each(DenseLayer::zero_grad);
    }
}

/// Named tensors written as text: a `fan-checkpoint 1` line, then for each
/// tensor a `tensor <name> <rows> <cols>` header followed by `rows` lines of
/// space-separated IEEE-754 bit patterns in 16-digit hex. Round trips bitwise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Array2<f64>)>,
}

const CHECKPOINT_MAGIC: &str = "fan-checkpoint 1";

impl Checkpoint {
    pub fn push_layer(&mut self, prefix: &str, layer: &DenseLayer) {
        self.tensors.push((format!("{prefix}.weight"), layer.weight.clone()));
        let bias = layer.bias.clone().insert_axis(Axis(0));
        self.tensors.push((format!("{prefix}.bias"), bias));
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies `prefix.weight` / `prefix.bias` into `layer`.
    pub fn load_layer(&self, prefix: &str, layer: &mut DenseLayer) -> Result<()> {
        let missing = |n: String| FanError::Format(format!("checkpoint lacks tensor `{n}`"));
        let w = self
            .get(&format!("{prefix}.weight"))
            .ok_or_else(|| missing(format!("{prefix}.weight")))?;
        let b = self
            .get(&format!("{prefix}.bias"))
            .ok_or_else(|| missing(format!("{prefix}.bias")))?;
        if w.dim() != layer.weight.dim() || b.len() != layer.bias.len() {
            return Err(shape_err(format!("checkpoint tensor `{prefix}` has the wrong shape")));
        }
        layer.weight.assign(w);
        layer.bias.assign(&b.row(0));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(CHECKPOINT_MAGIC);
        out.push('\n');
        for (name, t) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", t.nrows(), t.ncols());
            for row in t.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == CHECKPOINT_MAGIC => {}
            _ => return Err(FanError::Format("missing checkpoint header".into())),
        }
        let mut tensors = Vec::new();
        while let Some((ln, header)) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = header.split_whitespace().collect();
            let bad = || FanError::Format(format!("line {}: malformed tensor header", ln + 1));
            if parts.len() != 4 || parts[0] != "tensor" {
                return Err(bad());
            }
            let rows: usize = parts[2].parse().map_err(|_| bad())?;
            let cols: usize = parts[3].parse().map_err(|_| bad())?;
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| FanError::Format(format!("tensor `{}` is truncated", parts[1])))?;
                let before = values.len();
                for tok in line.split_whitespace() {
                    let bits = u64::from_str_radix(tok, 16).map_err(|_| {
                        FanError::Format(format!("line {}: bad value `{tok}`", ln + 1))
                    })?;
                    values.push(f64::from_bits(bits));
                }
                if values.len() - before != cols {
                    return Err(FanError::Format(format!(
                        "line {}: expected {cols} values",
                        ln + 1
                    )));
                }
            }
            let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| FanError::Format(e.to_string()))?;
            tensors.push((parts[1].to_string(), t));
        }
        Ok(Checkpoint { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| FanError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}
