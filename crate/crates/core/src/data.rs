//! Series containers, CSV I/O, the composite-sinusoid generator and dataset
//! characterization statistics.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FanError, Result};
use crate::exec::Exec;
use crate::spectral;

/// `N × D` multivariate series with named channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    values: Array2<f64>,
    channel_names: Vec<String>,
    source: String,
}

impl SeriesFrame {
    pub fn new(values: Array2<f64>, channel_names: Vec<String>, source: impl Into<String>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(FanError::InvalidInput(format!(
                "a series needs at least 2 rows, got {}",
                values.nrows()
            )));
        }
        if channel_names.len() != values.ncols() || values.ncols() == 0 {
            return Err(FanError::InvalidInput(format!(
                "{} channel names for {} columns",
                channel_names.len(),
                values.ncols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = channel_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(FanError::InvalidInput(format!("duplicate channel name `{dup}`")));
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FanError::InvalidInput(format!(
                "non-finite value at row {r}, channel {c}"
            )));
        }
        Ok(SeriesFrame {
            values,
            channel_names,
            source: source.into(),
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Chronological train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(FanError::InvalidParameter(format!(
                "split ratios must be positive and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Half-open row ranges `[train, val, test]` for a series of `n` rows.
    pub fn bounds(&self, n: usize) -> Result<[(usize, usize); 3]> {
        self.validate()?;
        // the epsilon keeps 1000 × (0.7 + 0.2) from flooring to 899
        let cut = |r: f64| ((n as f64 * r + 1e-9).floor() as usize).min(n);
        let train_end = cut(self.train);
        let val_end = cut(self.train + self.val);
        Ok([(0, train_end), (train_end, val_end), (val_end, n)])
    }
}

pub fn load_csv(path: &Path) -> Result<SeriesFrame> {
    let file = std::fs::File::open(path).map_err(|source| FanError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, &path.display().to_string())
}

/// Parses CSV with a mandatory header. A first column whose first data cell
/// is not numeric (a timestamp, say) is skipped.
pub fn read_csv<R: std::io::Read>(reader: R, source: &str) -> Result<SeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| FanError::Format(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FanError::Format(e.to_string()))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    let first = rows
        .first()
        .ok_or_else(|| FanError::InvalidInput(format!("{source} has no data rows")))?;
    let skip = usize::from(first.get(0).is_some_and(|c| c.trim().parse::<f64>().is_err()));
    let names: Vec<String> = header[skip.min(header.len())..].to_vec();
    let width = header.len();
    let dims = names.len();
    if dims == 0 {
        return Err(FanError::Format("no data columns".into()));
    }
    let mut values = Vec::with_capacity(rows.len() * dims);
    for (i, rec) in rows.iter().enumerate() {
        // row numbers count the header as row 1
        let row = i + 2;
        if rec.len() != width {
            return Err(FanError::Format(format!(
                "row {row} has {} fields, header has {width}",
                rec.len()
            )));
        }
        for (c, cell) in rec.iter().enumerate().skip(skip) {
            let v: f64 = cell.trim().parse().map_err(|_| FanError::Parse {
                row,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(FanError::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
    }
    let values = Array2::from_shape_vec((rows.len(), dims), values).expect("rectangular");
    SeriesFrame::new(values, names, source)
}

/// Shortest decimal that survives rounding to 12 significant digits.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_csv<W: Write>(frame: &SeriesFrame, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", frame.channel_names.join(","))?;
    for row in frame.values.rows() {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_csv(frame: &SeriesFrame, path: &Path) -> Result<()> {
    let io = |source| FanError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(frame, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// One sinusoid with a piecewise-linear amplitude path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    /// Period in samples.
    pub periodicity: f64,
    /// Amplitude at the series start, the train/val boundary, the val/test
    /// boundary and the last sample.
    pub amplitude_anchors: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub signals: Vec<Signal>,
    /// Channel `i` (1-based) sums the first `i` signals.
    pub dims: usize,
    pub length: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

pub const DEFAULT_SYNTHETIC_LENGTH: usize = 10_000;

/// Periods and amplitude anchors of the nine benchmark signals.
pub const BENCHMARK_SIGNALS: [(f64, [f64; 4]); 9] = [
    (12.0, [0.0, 1.0, 2.0, 4.0]),
    (16.0, [1.0, 3.0, 5.0, 6.0]),
    (24.0, [3.0, 4.0, 6.0, 8.0]),
    (36.0, [1.0, 2.0, 4.0, 5.0]),
    (48.0, [1.0, 3.0, 5.0, 6.0]),
    (60.0, [1.0, 3.0, 5.0, 6.0]),
    (72.0, [1.0, 3.0, 5.0, 6.0]),
    (84.0, [1.0, 3.0, 5.0, 6.0]),
    (96.0, [1.0, 3.0, 5.0, 6.0]),
];

pub const PRESETS: [&str; 5] = ["syn5", "syn6", "syn7", "syn8", "syn9"];

impl SyntheticSpec {
    /// `synD` uses the first `D` benchmark signals over `D` channels.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let dims = match name {
            "syn5" => 5,
            "syn6" => 6,
            "syn7" => 7,
            "syn8" => 8,
            "syn9" => 9,
            other => {
                return Err(FanError::InvalidParameter(format!(
                    "unknown preset `{other}` (valid: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(SyntheticSpec {
            signals: BENCHMARK_SIGNALS[..dims]
                .iter()
                .map(|&(periodicity, amplitude_anchors)| Signal {
                    periodicity,
                    amplitude_anchors,
                })
                .collect(),
            dims,
            length: DEFAULT_SYNTHETIC_LENGTH,
            noise_std: 0.0,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FanError::InvalidParameter(m));
        if self.dims == 0 || self.dims > self.signals.len() {
            return bad(format!(
                "dims must be in 1..={}, got {}",
                self.signals.len(),
                self.dims
            ));
        }
        if self.length < 2 {
            return bad(format!("length must be at least 2, got {}", self.length));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be finite and nonnegative, got {}", self.noise_std));
        }
        for (j, s) in self.signals.iter().enumerate() {
            if !(s.periodicity.is_finite() && s.periodicity > 0.0) {
                return bad(format!("signal {} has periodicity {}", j + 1, s.periodicity));
            }
            if s.amplitude_anchors.iter().any(|a| !a.is_finite()) {
                return bad(format!("signal {} has a non-finite amplitude anchor", j + 1));
            }
        }
        Ok(())
    }
}

/// Piecewise-linear interpolation through `(positions[i], values[i])`.
pub fn amplitude_path(t: f64, positions: &[f64; 4], values: &[f64; 4]) -> f64 {
    if t <= positions[0] {
        return values[0];
    }
    for i in 0..3 {
        let (p0, p1) = (positions[i], positions[i + 1]);
        if t <= p1 {
            if p1 == p0 {
                return values[i + 1];
            }
            return values[i] + (values[i + 1] - values[i]) * (t - p0) / (p1 - p0);
        }
    }
    values[3]
}

/// Anchor positions `{0, N·r_train, N·(r_train + r_val), N − 1}`.
pub fn anchor_positions(length: usize, ratios: &SplitRatios) -> [f64; 4] {
    let n = length as f64;
    [0.0, n * ratios.train, n * (ratios.train + ratios.val), n - 1.0]
}

/// Contribution of one signal over `length` samples.
pub fn signal_values(signal: &Signal, length: usize, ratios: &SplitRatios) -> Vec<f64> {
    let pos = anchor_positions(length, ratios);
    (0..length)
        .map(|t| {
            let tf = t as f64;
            amplitude_path(tf, &pos, &signal.amplitude_anchors)
                * (2.0 * std::f64::consts::PI * tf / signal.periodicity).sin()
        })
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec, ratios: &SplitRatios) -> Result<SeriesFrame> {
    spec.validate()?;
    ratios.validate()?;
    let n = spec.length;
    let mut values = Array2::zeros((n, spec.dims));
    let mut running = vec![0.0; n];
    for (j, signal) in spec.signals.iter().take(spec.dims).enumerate() {
        for (acc, v) in running.iter_mut().zip(signal_values(signal, n, ratios)) {
            *acc += v;
        }
        values.column_mut(j).iter_mut().zip(&running).for_each(|(o, v)| *o = *v);
    }
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| FanError::InvalidParameter(e.to_string()))?;
        values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    let names = (1..=spec.dims).map(|i| format!("x{i}")).collect();
    SeriesFrame::new(values, names, format!("synthetic:{}x{}", n, spec.dims))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub trend_variation: Vec<f64>,
    pub seasonality_variation: f64,
}

/// Trend variation per channel, `|mean(train) − mean(val ∪ test)| / |mean(train)|`,
/// and seasonality variation: for each channel the bin-averaged cross-window
/// variance of spectral amplitudes divided by the mean amplitude, summed over
/// channels. Windows are all stride-1 windows of length `lookback`.
pub fn dataset_stats(frame: &SeriesFrame, ratios: &SplitRatios, lookback: usize) -> Result<DatasetStats> {
    let [train, val, test] = ratios.bounds(frame.len())?;
    for (name, (lo, hi)) in [("train", train), ("val", val), ("test", test)] {
        if hi - lo < lookback + 1 {
            return Err(FanError::InvalidInput(format!(
                "{name} split has {} rows; at least {} are needed for 2 windows of length {lookback}",
                hi - lo,
                lookback + 1
            )));
        }
    }
    if lookback < 2 {
        return Err(FanError::InvalidLength(format!("lookback must be at least 2, got {lookback}")));
    }
    let v = frame.values();
    let train_mean = v.slice(s![train.0..train.1, ..]).mean_axis(Axis(0)).expect("rows");
    let rest_mean = v.slice(s![val.0..test.1, ..]).mean_axis(Axis(0)).expect("rows");
    let trend_variation = train_mean
        .iter()
        .zip(rest_mean.iter())
        .enumerate()
        .map(|(d, (&m_tr, &m_rest))| {
            let diff = (m_tr - m_rest).abs();
            if m_tr == 0.0 {
                if diff == 0.0 {
                    0.0
                } else {
                    log::warn!("channel {d}: train mean is zero, trend variation reported as +inf");
                    f64::INFINITY
                }
            } else {
                diff / m_tr.abs()
            }
        })
        .collect();

    let count = frame.len() - lookback + 1;
    let windows: Vec<ArrayView2<'_, f64>> = (0..count).map(|i| v.slice(s![i..i + lookback, ..])).collect();
    let mean_amp = spectral::mean_amplitude_per_channel(&windows, Exec::default())?;
    let amps = Exec::default().map_slice(&windows, |w| {
        w.axis_iter(Axis(1))
            .map(|col| spectral::amplitude(&spectral::rdft(&col.to_vec()).expect("finite"), lookback))
            .collect::<Vec<_>>()
    });
    let bins = mean_amp[0].len();
    let mut seasonality_variation = 0.0;
    for d in 0..frame.channels() {
        let mut var = 0.0;
        for a in &amps {
            for w in 0..bins {
                var += (a[d][w] - mean_amp[d][w]).powi(2);
            }
        }
        let var = var / (count * bins) as f64;
        let scale = mean_amp[d].iter().sum::<f64>() / bins as f64;
        if var == 0.0 {
            continue;
        }
        if scale == 0.0 {
            log::warn!("channel {d}: zero mean amplitude, seasonality variation reported as +inf");
            seasonality_variation = f64::INFINITY;
        } else {
            seasonality_variation += var / scale;
        }
    }
    Ok(DatasetStats {
        trend_variation,
        seasonality_variation,
    })
}
