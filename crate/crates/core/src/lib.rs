//! Frequency adaptive normalization (FAN) for non-stationary time-series
//! forecasting.
//!
//! Each input window is split per channel into the reconstruction of its
//! top-K Fourier components (`x_non`) and a residual (`x_res`). A
//! forecasting backbone sees only the residual; a small MLP forecasts how
//! the removed components evolve over the horizon, and the two forecasts are
//! summed.
//!
//! Modules:
//! - [`spectral`]: real DFT, amplitude/phase, top-K masks, frequency residual
//!   decomposition and stationarity diagnostics.
//! - [`models`]: dense layers, the non-stationary predictor, DLinear and
//!   naive backbones, checkpoints.
//! - [`normalizers`]: FAN, FAN with a fixed global mask, RevIN, identity.
//! - [`training`]: windowing, scaling, the dual loss, Adam, the training loop
//!   and evaluation.
//! - [`data`]: CSV ingestion, the composite-sinusoid generator and dataset
//!   statistics.
//!
//! Batch work (per-row transforms, evaluation) runs on rayon when the
//! `parallel` feature is enabled; see [`exec::Exec`].

pub mod data;
pub mod error;
pub mod exec;
pub mod models;
pub mod normalizers;
pub mod spectral;
pub mod training;

pub use error::{FanError, Result};
pub use exec::Exec;
