//! Reversible instance normalizers.
//!
//! A normalizer strips instance-specific non-stationary structure from an
//! `L × D` input window before the backbone and puts a forecast of it back on
//! the backbone's `H × D` output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FanError, Result};
use crate::exec::Exec;
use crate::models::{DenseLayer, Predictor};
use crate::spectral::{self, FrequencyMask};

/// Standard-deviation floor for RevIN.
pub const REVIN_EPS: f64 = 1e-5;

pub trait ReversibleNormalizer {
    type State;

    /// Returns the normalized window and the state needed to invert it.
    fn normalize(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Self::State)>;

    /// Maps a backbone forecast back to the original scale.
    fn denormalize(&self, y_res: ArrayView2<'_, f64>, state: &mut Self::State) -> Result<Array2<f64>>;

    fn trainable_layers(&self) -> Vec<&DenseLayer>;
}

/// How FAN picks the frequencies it removes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaskPolicy {
    /// Top-`k` bins of every window and channel.
    InstanceWise { k: usize },
    /// One mask per channel, shared by every window.
    Fixed(FrequencyMask),
}

impl MaskPolicy {
    pub fn k(&self) -> usize {
        match self {
            MaskPolicy::InstanceWise { k } => *k,
            MaskPolicy::Fixed(m) => m.k(),
        }
    }

    fn fixed(&self) -> Option<&FrequencyMask> {
        match self {
            MaskPolicy::Fixed(m) => Some(m),
            MaskPolicy::InstanceWise { .. } => None,
        }
    }
}

/// Source of the horizon's non-stationary component.
#[derive(Debug, Clone, PartialEq)]
pub enum NonstatForecast {
    Predictor(Predictor),
    /// Periodic continuation of `x_non` (the "no predict" ablation).
    Tile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanState {
    pub x_non: Array2<f64>,
    pub x: Array2<f64>,
    pub mask: FrequencyMask,
    pub y_non_hat: Option<Array2<f64>>,
}

/// Frequency adaptive normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Fan {
    pub policy: MaskPolicy,
    pub nonstat: NonstatForecast,
    horizon: usize,
}

impl Fan {
    pub fn new(policy: MaskPolicy, nonstat: NonstatForecast, horizon: usize) -> Result<Self> {
        if policy.k() < 1 {
            return Err(FanError::InvalidParameter("k must be at least 1".into()));
        }
        if let NonstatForecast::Predictor(p) = &nonstat {
            if p.config().horizon != horizon {
                return Err(shape_err(format!(
                    "predictor horizon {} differs from {horizon}",
                    p.config().horizon
                )));
            }
        }
        Ok(Fan {
            policy,
            nonstat,
            horizon,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Row-batched split into `(x_res, x_non)`. Row `r` is channel
    /// `r % channels` of some window.
    pub fn normalize_rows(
        &self,
        x: ArrayView2<'_, f64>,
        exec: Exec,
    ) -> Result<(Array2<f64>, Array2<f64>, Vec<Vec<usize>>)> {
        let (x_non, masks) = spectral::frl_rows(x, self.policy.k(), self.policy.fixed(), exec)?;
        let x_res = &x - &x_non;
        Ok((x_res, x_non, masks))
    }

    /// Forecast of the horizon's non-stationary component for row batches.
    pub fn forecast_nonstat_rows(&self, x_non: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match &self.nonstat {
            NonstatForecast::Predictor(p) => p.forward_rows(x_non, x),
            NonstatForecast::Tile => Ok(tile_rows(x_non, self.horizon)),
        }
    }

    pub(crate) fn forecast_nonstat_rows_cached(
        &mut self,
        x_non: ArrayView2<'_, f64>,
        x: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        match &mut self.nonstat {
            NonstatForecast::Predictor(p) => p.forward_rows_cached(x_non, x),
            NonstatForecast::Tile => Ok(tile_rows(x_non, self.horizon)),
        }
    }

    pub(crate) fn backward_nonstat_rows(&mut self, grad: ArrayView2<'_, f64>) -> Result<()> {
        if let NonstatForecast::Predictor(p) = &mut self.nonstat {
            p.backward_rows(grad)?;
        }
        Ok(())
    }

    pub fn predictor(&self) -> Option<&Predictor> {
        match &self.nonstat {
            NonstatForecast::Predictor(p) => Some(p),
            NonstatForecast::Tile => None,
        }
    }

    pub fn predictor_mut(&mut self) -> Option<&mut Predictor> {
        match &mut self.nonstat {
            NonstatForecast::Predictor(p) => Some(p),
            NonstatForecast::Tile => None,
        }
    }
}

/// Repeats each row with period `L` until it spans `horizon` steps.
pub fn tile_rows(x: ArrayView2<'_, f64>, horizon: usize) -> Array2<f64> {
    let len = x.ncols();
    Array2::from_shape_fn((x.nrows(), horizon), |(r, j)| x[[r, j % len]])
}

impl ReversibleNormalizer for Fan {
    type State = FanState;

    fn normalize(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, FanState)> {
        let d = match &self.policy {
            MaskPolicy::InstanceWise { k } => spectral::frl_decompose(x, *k)?,
            MaskPolicy::Fixed(m) => spectral::frl_decompose_masked(x, m)?,
        };
        Ok((
            d.x_res,
            FanState {
                x_non: d.x_non,
                x: x.to_owned(),
                mask: d.mask,
                y_non_hat: None,
            },
        ))
    }

    fn denormalize(&self, y_res: ArrayView2<'_, f64>, state: &mut FanState) -> Result<Array2<f64>> {
        if y_res.dim() != (self.horizon, state.x.ncols()) {
            return Err(shape_err(format!(
                "forecast {:?}, expected ({}, {})",
                y_res.dim(),
                self.horizon,
                state.x.ncols()
            )));
        }
        let y_non = self
            .forecast_nonstat_rows(state.x_non.t(), state.x.t())?
            .reversed_axes();
        let y = &y_res + &y_non;
        state.y_non_hat = Some(y_non);
        Ok(y)
    }

    fn trainable_layers(&self) -> Vec<&DenseLayer> {
        self.predictor().map(|p| p.layers().iter().collect()).unwrap_or_default()
    }
}

/// Ground truth for the prior loss: the horizon's own top-`k` reconstruction.
pub fn compute_y_non(y: ArrayView2<'_, f64>, k: usize) -> Result<Array2<f64>> {
    if y.nrows() < 2 {
        return Err(FanError::InvalidLength(format!(
            "horizon must be at least 2, got {}",
            y.nrows()
        )));
    }
    Ok(spectral::frl_decompose(y, k)?.x_non)
}

/// Row-batched [`compute_y_non`].
pub fn compute_y_non_rows(y: ArrayView2<'_, f64>, k: usize, exec: Exec) -> Result<Array2<f64>> {
    if y.ncols() < 2 {
        return Err(FanError::InvalidLength(format!(
            "horizon must be at least 2, got {}",
            y.ncols()
        )));
    }
    Ok(spectral::frl_rows(y, k, None, exec)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevinState {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

/// Per-instance z-score (no learnable affine).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Revin;

impl Revin {
    /// Row-batched statistics: one `(mean, std)` per row.
    pub fn stats_rows(x: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
        let mean = x.mean_axis(Axis(1)).expect("nonempty rows");
        let std = x.std_axis(Axis(1), 0.0).mapv(|s| s.max(REVIN_EPS));
        (mean, std)
    }
}

impl ReversibleNormalizer for Revin {
    type State = RevinState;

    fn normalize(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, RevinState)> {
        if x.nrows() < 2 {
            return Err(FanError::InvalidLength(format!(
                "RevIN needs at least 2 time steps, got {}",
                x.nrows()
            )));
        }
        let (mean, std) = Revin::stats_rows(x.t());
        let norm = (&x - &mean) / &std;
        Ok((norm, RevinState { mean, std }))
    }

    fn denormalize(&self, y: ArrayView2<'_, f64>, state: &mut RevinState) -> Result<Array2<f64>> {
        if y.ncols() != state.mean.len() {
            return Err(shape_err(format!(
                "forecast has {} channels, state has {}",
                y.ncols(),
                state.mean.len()
            )));
        }
        Ok(&y * &state.std + &state.mean)
    }

    fn trainable_layers(&self) -> Vec<&DenseLayer> {
        Vec::new()
    }
}

/// Pass-through; the "pure backbone" configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Identity;

impl ReversibleNormalizer for Identity {
    type State = ();

    fn normalize(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ())> {
        Ok((x.to_owned(), ()))
    }

    fn denormalize(&self, y: ArrayView2<'_, f64>, _: &mut ()) -> Result<Array2<f64>> {
        Ok(y.to_owned())
    }

    fn trainable_layers(&self) -> Vec<&DenseLayer> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerKind {
    Fan,
    FanFixed,
    Revin,
    None,
}

impl std::str::FromStr for NormalizerKind {
    type Err = FanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan" => Ok(NormalizerKind::Fan),
            "fan-fixed" => Ok(NormalizerKind::FanFixed),
            "revin" => Ok(NormalizerKind::Revin),
            "none" => Ok(NormalizerKind::None),
            other => Err(FanError::InvalidParameter(format!(
                "unknown normalizer `{other}` (expected fan, fan-fixed, revin or none)"
            ))),
        }
    }
}

impl std::fmt::Display for NormalizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormalizerKind::Fan => "fan",
            NormalizerKind::FanFixed => "fan-fixed",
            NormalizerKind::Revin => "revin",
            NormalizerKind::None => "none",
        })
    }
}

/// Runtime-selected normalizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalizer {
    Fan(Fan),
    Revin(Revin),
    Identity(Identity),
}
