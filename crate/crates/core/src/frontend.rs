//! Time records to per-frequency narrowband snapshot sets, sample
//! covariances and eigenvalue-gap bin selection.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::{SnapshotData, SnapshotMatrix};

/// Plans reused across frames of equal length.
pub struct FftCache {
    planner: FftPlanner<f64>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl Default for FftCache {
    fn default() -> Self {
        Self {
            planner: FftPlanner::new(),
            forward: HashMap::new(),
            inverse: HashMap::new(),
        }
    }
}

impl FftCache {
    fn forward(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.forward
            .entry(n)
            .or_insert_with(|| planner.plan_fft_forward(n))
            .clone()
    }

    /// Unnormalised transform with kernel `exp(+i 2 pi k n / N)`.
    fn positive(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.inverse
            .entry(n)
            .or_insert_with(|| planner.plan_fft_inverse(n))
            .clone()
    }

    /// Circularly advances a real sequence by `shift` (fractional) samples:
    /// `y[i] = x(i + shift)` for the band-limited periodic extension.
    pub fn fractional_shift(&mut self, x: &[f64], shift: f64) -> Vec<f64> {
        let n = x.len();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(n).process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let kk = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
            if 2 * k == n {
                *v *= (PI * shift).cos();
            } else {
                *v *= Complex64::from_polar(1.0, 2.0 * PI * kk * shift / n as f64);
            }
        }
        self.positive(n).process(&mut buf);
        buf.iter().map(|v| v.re / n as f64).collect()
    }
}

/// DFT probe `[1, z, ..., z^(N-1)]` with `z = exp(i 2 pi l / N)`.
pub fn dft_vector(l: usize, n: usize) -> Result<DVector<Complex64>> {
    if l >= n {
        return Err(Error::invalid(format!("bin {l} out of range for length {n}")));
    }
    Ok(DVector::from_fn(n, |i, _| {
        // reduce the exponent first so large indices keep full precision
        let e = (l as u128 * i as u128 % n as u128) as f64;
        Complex64::from_polar(1.0, 2.0 * PI * e / n as f64)
    }))
}

/// Selected DFT bins of a fixed transform length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBinSet {
    dft_len: usize,
    sample_rate: f64,
    indices: Vec<usize>,
}

impl FrequencyBinSet {
    pub fn new(dft_len: usize, sample_rate: f64, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("bin set is empty"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("bin indices must be distinct and ascending"));
        }
        if indices.iter().any(|&l| l >= dft_len) {
            return Err(Error::invalid("bin index beyond transform length"));
        }
        Ok(Self {
            dft_len,
            sample_rate,
            indices,
        })
    }

    /// Bins at `lo, lo + spacing, ..., <= hi` Hz, each rounded to the nearest
    /// DFT index.
    pub fn from_band(dft_len: usize, sample_rate: f64, lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && lo > 0.0 && hi >= lo && hi < sample_rate / 2.0) {
            return Err(Error::invalid(format!(
                "band [{lo}, {hi}] step {spacing} invalid for rate {sample_rate}"
            )));
        }
        let res = sample_rate / dft_len as f64;
        let count = ((hi - lo) / spacing + 1e-9).floor() as usize;
        let mut idx: Vec<usize> = (0..=count)
            .map(|i| ((lo + i as f64 * spacing) / res).round() as usize)
            .collect();
        idx.dedup();
        Self::new(dft_len, sample_rate, idx)
    }

    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&l| l as f64 * self.sample_rate / self.dft_len as f64)
            .collect()
    }

    /// Subset at the given positions (ascending positions into `indices`).
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let mut picked: Vec<usize> = positions.iter().map(|&p| self.indices[p]).collect();
        picked.sort_unstable();
        Self::new(self.dft_len, self.sample_rate, picked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

/// Per-bin narrowband snapshots: one `M x F` matrix per selected bin.
#[derive(Debug, Clone)]
pub struct BinSnapshots {
    pub bins: FrequencyBinSet,
    pub frame_len: usize,
    pub hop: usize,
    pub per_bin: Vec<DMatrix<Complex64>>,
}

impl BinSnapshots {
    pub fn frame_count(&self) -> usize {
        self.per_bin.first().map_or(0, |z| z.ncols())
    }
}

/// `floor((total - frame_len) / hop) + 1`, or an error when the record is
/// shorter than a frame.
pub fn frame_count(total: usize, frame_len: usize, hop: usize) -> Result<usize> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::invalid("frame length and hop must be positive"));
    }
    if total < frame_len {
        return Err(Error::invalid(format!(
            "record of {total} samples is shorter than one {frame_len}-sample frame"
        )));
    }
    Ok((total - frame_len) / hop + 1)
}

/// Frames every channel and correlates each frame with the DFT probe of
/// every selected bin: `Z[m, l] = frame_m^T v_l`.
pub fn band_transform(
    record: &SnapshotMatrix,
    frame_len: usize,
    hop: usize,
    bins: &FrequencyBinSet,
    window: Window,
) -> Result<BinSnapshots> {
    let SnapshotData::Time(data) = record.data() else {
        return Err(Error::invalid("band transform needs a time-domain record"));
    };
    if frame_len != bins.dft_len() {
        return Err(Error::invalid(format!(
            "frame length {frame_len} differs from DFT length {}",
            bins.dft_len()
        )));
    }
    let frames = frame_count(data.ncols(), frame_len, hop)?;
    let m = data.nrows();
    let taper: Vec<f64> = match window {
        Window::Rectangular => vec![1.0; frame_len],
        Window::Hann => (0..frame_len)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / frame_len as f64).cos())
            .collect(),
    };
    let mut cache = FftCache::default();
    let fft = cache.positive(frame_len);
    let mut per_bin = vec![DMatrix::zeros(m, frames); bins.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    for f in 0..frames {
        let start = f * hop;
        for ch in 0..m {
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(data[(ch, start + i)] * taper[i], 0.0);
            }
            fft.process(&mut buf);
            for (b, &l) in bins.indices().iter().enumerate() {
                per_bin[b][(ch, f)] = buf[l];
            }
        }
    }
    Ok(BinSnapshots {
        bins: bins.clone(),
        frame_len,
        hop,
        per_bin,
    })
}

/// Hermitian sample covariance with the number of frames behind it.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: DMatrix<Complex64>,
    frames: usize,
}

impl CovarianceEstimate {
    /// Validates squareness, finiteness, Hermitian symmetry (1e-12 relative)
    /// and positive semi-definiteness (-1e-10 of the largest eigenvalue).
    pub fn new(mut matrix: DMatrix<Complex64>, frames: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        if matrix.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        if linalg::hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::invalid("covariance is not Hermitian"));
        }
        linalg::hermitize(&mut matrix);
        let eig = linalg::hermitian_eigen(&matrix);
        let top = eig.values[0].max(0.0);
        if eig.values.iter().any(|&v| v < -1e-10 * top) {
            return Err(Error::invalid("covariance is not positive semi-definite"));
        }
        Ok(Self { matrix, frames })
    }

    pub(crate) fn from_parts(matrix: DMatrix<Complex64>, frames: usize) -> Self {
        Self { matrix, frames }
    }

    /// Rank-one covariance `z z^H` of a single snapshot.
    pub fn from_snapshot(z: &DVector<Complex64>) -> Self {
        Self::from_parts(z * z.adjoint(), 1)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.matrix)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(&self.matrix * Complex64::new(factor, 0.0), self.frames)
    }
}

/// `(1/F) sum_f z_f z_f^H` over the columns of `snapshots`.
pub fn sample_covariance(snapshots: &DMatrix<Complex64>) -> Result<CovarianceEstimate> {
    let f = snapshots.ncols();
    if f == 0 {
        return Err(Error::invalid("no frames to average"));
    }
    let mut r = snapshots * snapshots.adjoint() / Complex64::new(f as f64, 0.0);
    linalg::hermitize(&mut r);
    Ok(CovarianceEstimate::from_parts(r, f))
}

/// Eigenvalue-gap score `lambda_K / lambda_{K+1}` (descending eigenvalues).
/// A vanishing `lambda_{K+1}` scores infinity.
pub fn gap_score(cov: &CovarianceEstimate, k: usize) -> Result<f64> {
    let m = cov.dim();
    if k == 0 || k >= m {
        return Err(Error::invalid(format!("need 1 <= K < M, got K = {k}, M = {m}")));
    }
    let values = linalg::hermitian_eigen(cov.matrix()).values;
    let top = values[0].abs().max(f64::MIN_POSITIVE);
    let (num, den) = (values[k - 1], values[k]);
    if den <= 1e-15 * top {
        return Ok(if num > 1e-15 * top { f64::INFINITY } else { 1.0 });
    }
    Ok(num / den)
}

/// Keeps the `count` bins with the largest gap score; ties go to the lower
/// bin index. The result is returned in ascending bin order.
pub fn select_bins(
    covariances: &[CovarianceEstimate],
    bins: &FrequencyBinSet,
    k: usize,
    count: usize,
) -> Result<FrequencyBinSet> {
    if covariances.len() != bins.len() {
        return Err(Error::invalid("one covariance per bin is required"));
    }
    if count == 0 || count > bins.len() {
        return Err(Error::invalid(format!(
            "cannot select {count} of {} bins",
            bins.len()
        )));
    }
    let scores = covariances
        .iter()
        .map(|c| gap_score(c, k))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..bins.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count);
    bins.subset(&order)
}

/// Sample covariance of one bin, tagged with the bin frequency.
#[derive(Debug, Clone)]
pub struct BinCovariance {
    pub frequency_hz: f64,
    pub cov: CovarianceEstimate,
}

/// Frame-averaged covariance of every bin.
pub fn bin_covariances(snapshots: &BinSnapshots) -> Result<Vec<BinCovariance>> {
    snapshots
        .bins
        .frequencies()
        .into_iter()
        .zip(&snapshots.per_bin)
        .map(|(frequency_hz, z)| {
            Ok(BinCovariance {
                frequency_hz,
                cov: sample_covariance(z)?,
            })
        })
        .collect()
}
