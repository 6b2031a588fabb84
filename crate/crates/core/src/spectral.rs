//! Real DFT, amplitude/phase, top-K frequency masks and frequency residual
//! decomposition.
//!
//! Conventions: the forward transform is unnormalized (`z[0] = Σ x[t]`), the
//! inverse carries the `1/L` factor, and amplitudes are `|z[w]| / L`. Only the
//! `⌊L/2⌋ + 1` non-redundant bins of a real signal are stored; selecting a bin
//! implicitly selects its conjugate partner.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FanError, Result};
use crate::exec::Exec;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Number of half-spectrum bins for a real signal of length `len`.
pub fn bin_count(len: usize) -> usize {
    len / 2 + 1
}

/// Forward real DFT returning the `⌊L/2⌋ + 1` half-spectrum.
pub fn rdft(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.len() < 2 {
        return Err(FanError::InvalidLength(format!(
            "rdft needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if let Some(t) = x.iter().position(|v| !v.is_finite()) {
        return Err(FanError::InvalidInput(format!(
            "non-finite sample at index {t}"
        )));
    }
    Ok(rdft_unchecked(x))
}

fn rdft_unchecked(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(x.len(), false).process(&mut buf);
    buf.truncate(bin_count(x.len()));
    buf
}

/// Inverse of [`rdft`]. Imaginary parts of bin 0 (and of bin `L/2` for even
/// `L`) are ignored, as they carry no information for a real signal.
pub fn irdft(z: &[Complex64], len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(FanError::InvalidLength(format!(
            "irdft needs a length of at least 2, got {len}"
        )));
    }
    if z.len() != bin_count(len) {
        return Err(shape_err(format!(
            "{} bins given, a length-{len} signal has {}",
            z.len(),
            bin_count(len)
        )));
    }
    let mut out = vec![0.0; len];
    irdft_into(z, &mut out);
    Ok(out)
}

fn irdft_into(z: &[Complex64], out: &mut [f64]) {
    let len = out.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[0] = Complex64::new(z[0].re, 0.0);
    for w in 1..z.len() {
        if 2 * w == len {
            buf[w] = Complex64::new(z[w].re, 0.0);
        } else {
            buf[w] = z[w];
            buf[len - w] = z[w].conj();
        }
    }
    plan(len, true).process(&mut buf);
    let scale = 1.0 / len as f64;
    for (o, c) in out.iter_mut().zip(&buf) {
        *o = c.re * scale;
    }
}

/// Amplitude `|z[w]| / L` per bin.
pub fn amplitude(z: &[Complex64], len: usize) -> Vec<f64> {
    let scale = 1.0 / len as f64;
    z.iter().map(|c| c.norm() * scale).collect()
}

/// Phase `atan2(im, re)` per bin, in `(-π, π]`; a zero coefficient has phase 0.
pub fn phase(z: &[Complex64]) -> Vec<f64> {
    z.iter()
        .map(|c| {
            if c.re == 0.0 && c.im == 0.0 {
                0.0
            } else {
                let p = c.im.atan2(c.re);
                // atan2(-0.0, negative) yields -π
                if p == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    p
                }
            }
        })
        .collect()
}

/// Indices of the `min(k, len)` largest amplitudes, ties going to the lower
/// index, returned in ascending order.
pub fn top_k_indices(amp: &[f64], k: usize) -> Result<Vec<usize>> {
    if k < 1 {
        return Err(FanError::InvalidParameter("k must be at least 1".into()));
    }
    if let Some(i) = amp.iter().position(|a| !a.is_finite() || *a < 0.0) {
        return Err(FanError::InvalidInput(format!(
            "amplitude at bin {i} is {} (must be finite and nonnegative)",
            amp[i]
        )));
    }
    Ok(top_k_unchecked(amp, k))
}

fn top_k_unchecked(amp: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..amp.len()).collect();
    let by_amp = |a: &usize, b: &usize| amp[*b].total_cmp(&amp[*a]).then(a.cmp(b));
    let k = k.min(amp.len());
    if k < order.len() {
        order.select_nth_unstable_by(k, by_amp);
        order.truncate(k);
    }
    order.sort_unstable();
    order
}

/// Keeps the bins listed in `mask`, zeroing the rest.
pub fn filter_spectrum(z: &[Complex64], mask: &[usize]) -> Result<Vec<Complex64>> {
    let mut kept = vec![Complex64::new(0.0, 0.0); z.len()];
    for &w in mask {
        if w >= z.len() {
            return Err(FanError::Index(format!(
                "bin {w} outside a {}-bin spectrum",
                z.len()
            )));
        }
        kept[w] = z[w];
    }
    Ok(kept)
}

/// Per-channel half-spectra of an `L × D` window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Vec<Complex64>>,
    origin_len: usize,
}

impl Spectrum {
    /// Transforms each column of an `L × D` window.
    pub fn of_window(x: ArrayView2<'_, f64>) -> Result<Self> {
        let coeffs = x
            .axis_iter(Axis(1))
            .map(|col| rdft(&col.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Spectrum {
            coeffs,
            origin_len: x.nrows(),
        })
    }

    pub fn from_coeffs(coeffs: Vec<Vec<Complex64>>, origin_len: usize) -> Result<Self> {
        let bins = bin_count(origin_len);
        if coeffs.is_empty() {
            return Err(FanError::InvalidInput("spectrum needs at least one channel".into()));
        }
        if let Some(c) = coeffs.iter().position(|c| c.len() != bins) {
            return Err(shape_err(format!(
                "channel {c} has {} bins, expected {bins}",
                coeffs[c].len()
            )));
        }
        Ok(Spectrum { coeffs, origin_len })
    }

    pub fn channel(&self, d: usize) -> &[Complex64] {
        &self.coeffs[d]
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    pub fn bins(&self) -> usize {
        bin_count(self.origin_len)
    }

    pub fn origin_len(&self) -> usize {
        self.origin_len
    }

    /// Inverse transform back to an `L × D` window.
    pub fn to_window(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.origin_len, self.channels()));
        let mut col = vec![0.0; self.origin_len];
        for (d, z) in self.coeffs.iter().enumerate() {
            irdft_into(z, &mut col);
            out.column_mut(d).iter_mut().zip(&col).for_each(|(o, v)| *o = *v);
        }
        out
    }

    /// Per-channel amplitudes, `D` vectors of `B` entries.
    pub fn amplitudes(&self) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|z| amplitude(z, self.origin_len))
            .collect()
    }
}

/// Per-channel set of selected bins, each channel strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyMask {
    indices: Vec<Vec<usize>>,
    k: usize,
}

impl FrequencyMask {
    pub fn new(indices: Vec<Vec<usize>>, k: usize, bins: usize) -> Result<Self> {
        if k < 1 {
            return Err(FanError::InvalidParameter("k must be at least 1".into()));
        }
        let want = k.min(bins);
        for (d, ch) in indices.iter().enumerate() {
            if ch.len() != want {
                return Err(FanError::InvalidInput(format!(
                    "channel {d} selects {} bins, expected {want}",
                    ch.len()
                )));
            }
            if ch.windows(2).any(|p| p[0] >= p[1]) {
                return Err(FanError::InvalidInput(format!(
                    "channel {d} indices are not strictly ascending"
                )));
            }
            if let Some(&w) = ch.iter().find(|&&w| w >= bins) {
                return Err(FanError::Index(format!("bin {w} outside {bins} bins")));
            }
        }
        Ok(FrequencyMask { indices, k })
    }

    pub fn channel(&self, d: usize) -> &[usize] {
        &self.indices[d]
    }

    pub fn channels(&self) -> usize {
        self.indices.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn contains(&self, d: usize, bin: usize) -> bool {
        self.indices[d].binary_search(&bin).is_ok()
    }
}

/// Split of a window into its top-K reconstruction and the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub x_non: Array2<f64>,
    pub x_res: Array2<f64>,
    pub mask: FrequencyMask,
}

fn check_window(x: &ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() < 2 {
        return Err(FanError::InvalidLength(format!(
            "window needs at least 2 time steps, got {}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(FanError::InvalidInput("window has no channels".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FanError::InvalidInput("window contains non-finite values".into()));
    }
    Ok(())
}

/// Reconstructs the selected bins of `row` into `out_non`. When `fixed` is
/// `None` the top-`k` bins of the row itself are selected. Returns the mask.
pub(crate) fn decompose_row(
    row: &[f64],
    k: usize,
    fixed: Option<&[usize]>,
    out_non: &mut [f64],
) -> Vec<usize> {
    let z = rdft_unchecked(row);
    let mask = match fixed {
        Some(m) => m.to_vec(),
        None => {
            // ranking by |z| equals ranking by |z| / L
            let mags: Vec<f64> = z.iter().map(|c| c.norm()).collect();
            top_k_unchecked(&mags, k)
        }
    };
    let mut kept = vec![Complex64::new(0.0, 0.0); z.len()];
    for &w in &mask {
        kept[w] = z[w];
    }
    irdft_into(&kept, out_non);
    mask
}

/// Frequency residual decomposition of an `L × D` window, choosing each
/// channel's mask from that channel's own amplitudes.
pub fn frl_decompose(x: ArrayView2<'_, f64>, k: usize) -> Result<Decomposition> {
    if k < 1 {
        return Err(FanError::InvalidParameter("k must be at least 1".into()));
    }
    check_window(&x)?;
    decompose_window(x, k, None)
}

/// Decomposition with a caller-supplied mask, shared by every window.
pub fn frl_decompose_masked(x: ArrayView2<'_, f64>, mask: &FrequencyMask) -> Result<Decomposition> {
    check_window(&x)?;
    if mask.channels() != x.ncols() {
        return Err(shape_err(format!(
            "mask has {} channels, window has {}",
            mask.channels(),
            x.ncols()
        )));
    }
    let bins = bin_count(x.nrows());
    if mask.indices.iter().flatten().any(|&w| w >= bins) {
        return Err(FanError::Index(format!(
            "mask selects a bin outside {bins} bins"
        )));
    }
    decompose_window(x, mask.k(), Some(mask))
}

fn decompose_window(
    x: ArrayView2<'_, f64>,
    k: usize,
    fixed: Option<&FrequencyMask>,
) -> Result<Decomposition> {
    let (len, dims) = x.dim();
    let mut x_non = Array2::zeros((len, dims));
    let mut masks = Vec::with_capacity(dims);
    let mut buf = vec![0.0; len];
    for d in 0..dims {
        let col = x.column(d).to_vec();
        let m = decompose_row(&col, k, fixed.map(|f| f.channel(d)), &mut buf);
        x_non.column_mut(d).iter_mut().zip(&buf).for_each(|(o, v)| *o = *v);
        masks.push(m);
    }
    let x_res = &x - &x_non;
    let mask = match fixed {
        Some(f) => f.clone(),
        None => FrequencyMask::new(masks, k, bin_count(len))?,
    };
    Ok(Decomposition { x_non, x_res, mask })
}

/// Row-wise decomposition of an `n × L` matrix whose rows are single-channel
/// windows. Row `r` belongs to channel `r % channels`; with `fixed` set, that
/// channel's mask is used instead of the row's own top-`k`.
pub fn frl_rows(
    rows: ArrayView2<'_, f64>,
    k: usize,
    fixed: Option<&FrequencyMask>,
    exec: Exec,
) -> Result<(Array2<f64>, Vec<Vec<usize>>)> {
    if k < 1 {
        return Err(FanError::InvalidParameter("k must be at least 1".into()));
    }
    let (n, len) = rows.dim();
    if len < 2 {
        return Err(FanError::InvalidLength(format!(
            "rows need at least 2 samples, got {len}"
        )));
    }
    if let Some(f) = fixed {
        let bins = bin_count(len);
        if f.indices.iter().flatten().any(|&w| w >= bins) {
            return Err(FanError::Index(format!(
                "mask selects a bin outside {bins} bins"
            )));
        }
    }
    let rows = rows.as_standard_layout();
    let src = rows.as_slice().expect("standard layout");
    let parts = exec.map_range(n, |r| {
        let mut buf = vec![0.0; len];
        let fm = fixed.map(|f| f.channel(r % f.channels()));
        let m = decompose_row(&src[r * len..(r + 1) * len], k, fm, &mut buf);
        (buf, m)
    });
    let mut x_non = Array2::zeros((n, len));
    let mut masks = Vec::with_capacity(n);
    for (mut dst, (buf, m)) in x_non.rows_mut().into_iter().zip(parts) {
        dst.iter_mut().zip(&buf).for_each(|(o, v)| *o = *v);
        masks.push(m);
    }
    Ok((x_non, masks))
}

/// Amplitude profile averaged over windows and channels, one value per bin.
fn mean_amplitude(windows: &[ArrayView2<'_, f64>], exec: Exec) -> Result<Vec<f64>> {
    let per_channel = mean_amplitude_per_channel(windows, exec)?;
    let dims = per_channel.len() as f64;
    let bins = per_channel[0].len();
    Ok((0..bins)
        .map(|w| per_channel.iter().map(|c| c[w]).sum::<f64>() / dims)
        .collect())
}

/// Amplitude profile averaged over windows, `D` vectors of `B` bins.
pub fn mean_amplitude_per_channel(
    windows: &[ArrayView2<'_, f64>],
    exec: Exec,
) -> Result<Vec<Vec<f64>>> {
    let amps = all_amplitudes(windows, exec)?;
    let mut acc = vec![vec![0.0; amps[0][0].len()]; amps[0].len()];
    for a in &amps {
        for (accd, ad) in acc.iter_mut().zip(a) {
            accd.iter_mut().zip(ad).for_each(|(s, v)| *s += v);
        }
    }
    let n = windows.len() as f64;
    acc.iter_mut().flatten().for_each(|v| *v /= n);
    Ok(acc)
}

/// Per-window, per-channel amplitudes after checking that all windows share
/// one shape.
fn all_amplitudes(windows: &[ArrayView2<'_, f64>], exec: Exec) -> Result<Vec<Vec<Vec<f64>>>> {
    let first = windows
        .first()
        .ok_or_else(|| FanError::InvalidInput("no windows given".into()))?;
    let (len, dims) = first.dim();
    for w in windows {
        if w.dim() != (len, dims) {
            return Err(shape_err(format!(
                "window shape {:?} differs from {:?}",
                w.dim(),
                (len, dims)
            )));
        }
        check_window(w)?;
    }
    Ok(exec.map_slice(windows, |w| window_amplitudes(w)))
}

fn window_amplitudes(w: &ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    let len = w.nrows();
    w.axis_iter(Axis(1))
        .map(|col| amplitude(&rdft_unchecked(&col.to_vec()), len))
        .collect()
}

/// Number of bins whose window- and channel-averaged amplitude reaches
/// `ratio` times the largest averaged amplitude. Always at least 1.
pub fn select_k_by_amplitude_rule(windows: &[ArrayView2<'_, f64>], ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FanError::InvalidParameter(format!(
            "ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let profile = mean_amplitude(windows, Exec::default())?;
    let max = profile.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        // all-zero data: every bin ties with the maximum
        return Ok(profile.len());
    }
    Ok(profile.iter().filter(|&&a| a >= ratio * max).count().max(1))
}

/// Global per-channel mask: top-`k` bins of the window-averaged amplitudes.
pub fn global_mask(windows: &[ArrayView2<'_, f64>], k: usize) -> Result<FrequencyMask> {
    if k < 1 {
        return Err(FanError::InvalidParameter("k must be at least 1".into()));
    }
    let per_channel = mean_amplitude_per_channel(windows, Exec::default())?;
    let bins = per_channel[0].len();
    let indices = per_channel
        .iter()
        .map(|a| top_k_unchecked(a, k))
        .collect();
    FrequencyMask::new(indices, k, bins)
}

/// Cross-window variance of per-bin amplitudes, summed over bins and averaged
/// over channels. Smaller values mean a more stationary spectrum.
pub fn spectral_variance(windows: &[ArrayView2<'_, f64>]) -> Result<f64> {
    spectral_variance_with(windows, Exec::default())
}

pub fn spectral_variance_with(windows: &[ArrayView2<'_, f64>], exec: Exec) -> Result<f64> {
    if windows.len() < 2 {
        return Err(FanError::InvalidInput(format!(
            "spectral variance needs at least 2 windows, got {}",
            windows.len()
        )));
    }
    let amps = all_amplitudes(windows, exec)?;
    let (dims, bins) = (amps[0].len(), amps[0][0].len());
    let n = windows.len() as f64;
    // deviations are taken from the first window so identical windows give
    // exactly zero instead of rounding noise
    let base = &amps[0];
    let mut shift = vec![vec![0.0; bins]; dims];
    for a in &amps {
        for d in 0..dims {
            for w in 0..bins {
                shift[d][w] += a[d][w] - base[d][w];
            }
        }
    }
    shift.iter_mut().flatten().for_each(|v| *v /= n);
    let mut sq = vec![vec![0.0; bins]; dims];
    for a in &amps {
        for d in 0..dims {
            for w in 0..bins {
                let dev = a[d][w] - base[d][w] - shift[d][w];
                sq[d][w] += dev * dev;
            }
        }
    }
    let total: f64 = sq.iter().map(|c| c.iter().sum::<f64>() / n).sum();
    Ok(total / dims as f64)
}

/// Fraction of windows whose top-`k` mask contains each bin, per channel.
pub fn frequency_selection_density(
    windows: &[ArrayView2<'_, f64>],
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    if k < 1 {
        return Err(FanError::InvalidParameter("k must be at least 1".into()));
    }
    let first = windows
        .first()
        .ok_or_else(|| FanError::InvalidInput("no windows given".into()))?;
    let (len, dims) = first.dim();
    let bins = bin_count(len);
    let masks = Exec::default().map_slice(windows, |w| -> Result<Vec<Vec<usize>>> {
        if w.dim() != (len, dims) {
            return Err(shape_err("windows differ in shape"));
        }
        check_window(w)?;
        Ok(window_amplitudes(w)
            .iter()
            .map(|a| top_k_unchecked(a, k))
            .collect())
    });
    let mut counts = vec![vec![0usize; bins]; dims];
    for m in masks {
        for (d, ch) in m?.iter().enumerate() {
            for &w in ch {
                counts[d][w] += 1;
            }
        }
    }
    let n = windows.len() as f64;
    Ok(counts
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / n).collect())
        .collect())
}
