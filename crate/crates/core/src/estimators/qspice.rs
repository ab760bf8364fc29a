//! Sparse covariance fitting: SPICE and q-SPICE by majorization-minimization.
//!
//! The fitted model is `R = A diag(p) A^H + diag(sigma)` and the criterion
//! `tr(R^-1 Rhat) + ||W_p p||_r + ||W_s sigma||_q`. With `r = q = 1` this is
//! classical SPICE.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EstimatorKind, SpatialSpectrum};
use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::frontend::CovarianceEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Norm order of the signal-power penalty.
    pub r: f64,
    /// Norm order of the noise-power penalty.
    pub q: f64,
    pub max_iter: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    /// Smallest noise power, as a fraction of the initial total power.
    pub power_floor: f64,
    pub fit: CovarianceFit,
    pub method: SolverMethod,
}

/// Iteration scheme; both minimise the same criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Projected Newton with coordinate-descent warm start and fallback.
    #[default]
    Newton,
    /// Majorization-minimization with squared extrapolation.
    Mm,
}

/// How a multi-frame covariance enters the fit term.
///
/// Both forms equal `z^H R^-1 z` when `Rhat = z z^H`. With more frames the
/// unconstrained minimiser of the linear form is proportional to
/// `Rhat^(1/2)` rather than `Rhat`, which flattens the eigenvalue spread and
/// merges closely spaced sources; the squared form
/// `tr(R^-1 Rhat^2) / tr(Rhat)` is minimised by `R = Rhat` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceFit {
    /// `tr(R^-1 Rhat)`.
    Linear,
    /// `tr(R^-1 Rhat^2) / tr(Rhat)`.
    #[default]
    Squared,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            q: 2.0,
            max_iter: 500,
            rel_tol: 1e-12,
            power_floor: 1e-12,
            fit: CovarianceFit::default(),
            method: SolverMethod::default(),
        }
    }
}

impl SolverConfig {
    pub fn spice() -> Self {
        Self {
            q: 1.0,
            ..Self::default()
        }
    }

    pub fn with_orders(r: f64, q: f64) -> Self {
        Self {
            r,
            q,
            ..Self::default()
        }
    }

    /// `r >= 1` and `1 <= q <= 2`; orders above 2 on the noise block are
    /// outside the range where the noise profile stays meaningful.
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 1.0) {
            return Err(Error::Config(format!("solver order r must be >= 1, got {}", self.r)));
        }
        if !(self.q >= 1.0 && self.q <= 2.0) {
            return Err(Error::Config(format!("solver order q must lie in [1, 2], got {}", self.q)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        if !(self.power_floor > 0.0 && self.power_floor < 1.0) {
            return Err(Error::Config("power_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn is_spice(&self) -> bool {
        self.r == 1.0 && self.q == 1.0
    }

    pub fn kind(&self) -> EstimatorKind {
        if self.is_spice() {
            EstimatorKind::Spice
        } else {
            EstimatorKind::Qspice
        }
    }
}

/// Signal powers on the grid followed by per-sensor noise powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
}

impl PowerVector {
    pub fn new(signal: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        if signal.iter().chain(&noise).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("powers must be finite and nonnegative"));
        }
        Ok(Self { signal, noise })
    }

    pub fn total(&self) -> f64 {
        self.signal.iter().sum::<f64>() + self.noise.iter().sum::<f64>()
    }
}

/// Diagonal penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiceWeights {
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
}

/// `w_g = ||a_g||^2 / tr(Rhat)` and `w_m = 1 / tr(Rhat)`; for a single
/// snapshot `tr(Rhat) = z^H z`.
pub fn spice_weights(dict: &SteeringDictionary, cov: &CovarianceEstimate) -> Result<SpiceWeights> {
    let energy = cov.trace();
    if !energy.is_finite() {
        return Err(Error::invalid("data has non-finite energy"));
    }
    if energy <= 0.0 {
        return Err(Error::DegenerateInput("data has zero energy".into()));
    }
    let signal = (0..dict.len())
        .map(|g| dict.column(g).iter().map(|a| a.norm_sqr()).sum::<f64>() / energy)
        .collect();
    Ok(SpiceWeights {
        signal,
        noise: vec![1.0 / energy; dict.element_count()],
    })
}

/// `(sum_k (w_k x_k)^t)^(1/t)`.
pub fn weighted_norm(x: &[f64], w: &[f64], t: f64) -> f64 {
    if t == 1.0 {
        return x.iter().zip(w).map(|(x, w)| w * x).sum();
    }
    let top = x.iter().zip(w).map(|(x, w)| w * x).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().zip(w).map(|(x, w)| (w * x / top).powf(t)).sum();
    top * s.powf(1.0 / t)
}

/// Minimiser over `x >= 0` of `sum_k c2_k / x_k + ||W x||_t`.
///
/// Stationarity gives `x_k = y_k N^((t-1)/(t+1))` with
/// `y_k = (c2_k / w_k^t)^(1/(t+1))` and `N` the penalty value; substituting
/// back resolves `N = S^((t+1)/2)` for `S = ||W y||_t`, so no inner
/// iteration is needed.
pub fn block_minimizer(c2: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    if t == 1.0 {
        return c2.iter().zip(w).map(|(c, w)| (c / w).sqrt()).collect();
    }
    let y: Vec<f64> = c2
        .iter()
        .zip(w)
        .map(|(c, w)| (c / w.powf(t)).powf(1.0 / (t + 1.0)))
        .collect();
    let s = weighted_norm(&y, w, t);
    let scale = s.powf((t - 1.0) / 2.0);
    y.into_iter().map(|y| y * scale).collect()
}

/// Result of one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub power: PowerVector,
    /// Objective at the initial point and after every update.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.objective.len() - 1
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective trace is never empty")
    }
}

/// Model covariance and the quantities derived from its factorisation.
struct Fit {
    /// `tr(R^-1 Rhat)`.
    fit: f64,
    /// `R^-1 Rhat R^-1`, column-major.
    f: DMatrix<Complex64>,
}

fn model_covariance(dict: &SteeringDictionary, p: &[f64], sigma: &[f64]) -> DMatrix<Complex64> {
    let m = dict.element_count();
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    {
        let rs = r.as_mut_slice();
        for (g, &pg) in p.iter().enumerate() {
            if pg == 0.0 {
                continue;
            }
            let a = dict.column(g);
            for j in 0..m {
                let aj = a[j].conj() * pg;
                let col = &mut rs[j * m..(j + 1) * m];
                for i in j..m {
                    col[i] += a[i] * aj;
                }
            }
        }
    }
    for j in 0..m {
        r[(j, j)] = Complex64::new(r[(j, j)].re + sigma[j], 0.0);
        for i in j + 1..m {
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    r
}

fn factor(dict: &SteeringDictionary, cov: &CovarianceEstimate, p: &[f64], sigma: &[f64]) -> Result<Fit> {
    let r = model_covariance(dict, p, sigma);
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Estimator("model covariance lost positive definiteness".into()))?;
    let x = chol.solve(cov.matrix());
    let fit = (0..x.nrows()).map(|i| x[(i, i)].re).sum();
    let f = chol.solve(&x.adjoint());
    Ok(Fit { fit, f })
}

/// `a^H F a` for Hermitian `F`.
fn hermitian_form(f: &[Complex64], m: usize, a: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..m {
        let col = &f[j * m..(j + 1) * m];
        acc += col[j].re * a[j].norm_sqr();
        let mut s = Complex64::new(0.0, 0.0);
        for i in j + 1..m {
            s += a[i].conj() * col[i];
        }
        acc += 2.0 * (s * a[j]).re;
    }
    acc
}

/// Gradient-side quantities `d_k = b_k^H R^-1 Rhat R^-1 b_k`.
fn curvature(dict: &SteeringDictionary, f: &DMatrix<Complex64>) -> (Vec<f64>, Vec<f64>) {
    let m = dict.element_count();
    let fs = f.as_slice();
    let signal = (0..dict.len()).map(|g| hermitian_form(fs, m, dict.column(g)).max(0.0)).collect();
    let noise = (0..m).map(|i| f[(i, i)].re.max(0.0)).collect();
    (signal, noise)
}

fn check_inputs(cov: &CovarianceEstimate, dict: &SteeringDictionary) -> Result<()> {
    if dict.is_empty() {
        return Err(Error::invalid("empty dictionary"));
    }
    if cov.dim() != dict.element_count() {
        return Err(Error::invalid(format!(
            "covariance is {0}x{0} but dictionary has {1} elements",
            cov.dim(),
            dict.element_count()
        )));
    }
    if cov.matrix().iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    Ok(())
}

/// Matrix standing in for `Rhat` in the fit term; weights always come from
/// the original covariance.
fn fit_target<'a>(cov: &'a CovarianceEstimate, cfg: &SolverConfig) -> Cow<'a, CovarianceEstimate> {
    match cfg.fit {
        CovarianceFit::Linear => Cow::Borrowed(cov),
        CovarianceFit::Squared if cov.frames() <= 1 => Cow::Borrowed(cov),
        CovarianceFit::Squared => {
            let m = cov.matrix();
            let mut sq = m * m / Complex64::new(cov.trace(), 0.0);
            crate::linalg::hermitize(&mut sq);
            Cow::Owned(CovarianceEstimate::from_parts(sq, cov.frames()))
        }
    }
}

/// Criterion value at `power`.
pub fn objective(
    cov: &CovarianceEstimate,
    dict: &SteeringDictionary,
    weights: &SpiceWeights,
    cfg: &SolverConfig,
    power: &PowerVector,
) -> Result<f64> {
    check_inputs(cov, dict)?;
    let fit = factor(dict, &fit_target(cov, cfg), &power.signal, &power.noise)?;
    Ok(fit.fit + penalty(weights, cfg, power))
}

fn penalty(weights: &SpiceWeights, cfg: &SolverConfig, power: &PowerVector) -> f64 {
    weighted_norm(&power.signal, &weights.signal, cfg.r) + weighted_norm(&power.noise, &weights.noise, cfg.q)
}

/// Gradient of one penalty block, `w_k^t x_k^(t-1) N^(1-t)`.
fn penalty_gradient(x: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    if t == 1.0 {
        return w.to_vec();
    }
    let n = weighted_norm(x, w, t);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter()
        .zip(w)
        .map(|(x, w)| w * (w * x / n).powf(t - 1.0))
        .collect()
}

/// Scaled projected-gradient stationarity measure: for positive entries the
/// complementarity term `x_k |grad_k|`, for zero entries the negative part of
/// the gradient times the mean noise level, all relative to the objective.
pub fn kkt_residual(
    cov: &CovarianceEstimate,
    dict: &SteeringDictionary,
    cfg: &SolverConfig,
    power: &PowerVector,
) -> Result<f64> {
    check_inputs(cov, dict)?;
    let weights = spice_weights(dict, cov)?;
    let fit = factor(dict, &fit_target(cov, cfg), &power.signal, &power.noise)?;
    let (ds, dn) = curvature(dict, &fit.f);
    let gs = penalty_gradient(&power.signal, &weights.signal, cfg.r);
    let gn = penalty_gradient(&power.noise, &weights.noise, cfg.q);
    let scale = cov.trace() / cov.dim() as f64;
    let mut acc = 0.0;
    let blocks = [(&power.signal, &ds, &gs), (&power.noise, &dn, &gn)];
    for (x, d, g) in blocks {
        for k in 0..x.len() {
            let grad = g[k] - d[k];
            let term = if x[k] > 0.0 {
                x[k] * grad
            } else {
                grad.min(0.0) * scale
            };
            acc += term * term;
        }
    }
    Ok(acc.sqrt() / (fit.fit + penalty(&weights, cfg, power)))
}

/// Starting point: CBF powers on the grid, `tr(Rhat) / 2M` per sensor.
pub fn initial_power(cov: &CovarianceEstimate, dict: &SteeringDictionary) -> PowerVector {
    let m = dict.element_count();
    let r = cov.matrix().as_slice();
    let norm = (m * m) as f64;
    let signal = (0..dict.len())
        .map(|g| (hermitian_form(r, m, dict.column(g)) / norm).max(0.0))
        .collect();
    PowerVector {
        signal,
        noise: vec![cov.trace() / (2 * m) as f64; m],
    }
}

/// Solves from the default starting point.
pub fn qspice_solve(cov: &CovarianceEstimate, dict: &SteeringDictionary, cfg: &SolverConfig) -> Result<SolveReport> {
    check_inputs(cov, dict)?;
    qspice_solve_from(cov, dict, cfg, initial_power(cov, dict))
}

/// Single-snapshot form `z^H R^-1 z + ...`.
pub fn qspice_solve_snapshot(
    z: &nalgebra::DVector<Complex64>,
    dict: &SteeringDictionary,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::invalid("snapshot has non-finite entries"));
    }
    qspice_solve(&CovarianceEstimate::from_snapshot(z), dict, cfg)
}

/// One majorization-minimization step from `power`, whose factorisation is `fit`.
///
/// Writing `c_k = x_k b_k^H R^-1 Rhat^(1/2)` majorises the fit term by
/// `sum_k |c_k|^2 / x_k` with equality at the current point; the surrogate
/// plus the penalties is then minimised block by block.
fn mm_step(
    dict: &SteeringDictionary,
    weights: &SpiceWeights,
    cfg: &SolverConfig,
    power: &PowerVector,
    fit: &Fit,
    floor: f64,
) -> PowerVector {
    let (ds, dn) = curvature(dict, &fit.f);
    let c2s: Vec<f64> = power.signal.iter().zip(&ds).map(|(x, d)| x * x * d).collect();
    let c2n: Vec<f64> = power.noise.iter().zip(&dn).map(|(x, d)| x * x * d).collect();
    PowerVector {
        signal: block_minimizer(&c2s, &weights.signal, cfg.r),
        noise: block_minimizer(&c2n, &weights.noise, cfg.q)
            .into_iter()
            .map(|s| s.max(floor))
            .collect(),
    }
}

fn log_powers(p: &PowerVector) -> Vec<f64> {
    p.signal.iter().chain(&p.noise).map(|&x| x.max(f64::MIN_POSITIVE).ln()).collect()
}

/// Solves from an explicit starting point with the configured method.
pub fn qspice_solve_from(
    cov: &CovarianceEstimate,
    dict: &SteeringDictionary,
    cfg: &SolverConfig,
    start: PowerVector,
) -> Result<SolveReport> {
    match cfg.method {
        SolverMethod::Newton => solve_newton(cov, dict, cfg, start),
        SolverMethod::Mm => solve_mm(cov, dict, cfg, start),
    }
}

/// Majorization-minimization.
///
/// Plain MM steps are slow once the spectrum turns sparse, so every pair of
/// steps is followed by a squared extrapolation in log-power space
/// (SQUAREM). The extrapolated point is kept only if one further MM step
/// from it beats the plain iterate, which keeps the objective trace
/// non-increasing.
fn solve_mm(
    cov: &CovarianceEstimate,
    dict: &SteeringDictionary,
    cfg: &SolverConfig,
    start: PowerVector,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_inputs(cov, dict)?;
    let weights = spice_weights(dict, cov)?;
    let target = fit_target(cov, cfg);
    let cov = target.as_ref();
    if start.signal.len() != dict.len() || start.noise.len() != dict.element_count() {
        return Err(Error::invalid("starting point does not match the dictionary"));
    }
    let floor = cfg.power_floor * start.total();
    let mut power = start;
    for s in &mut power.noise {
        *s = s.max(floor);
    }
    let evaluate = |p: &PowerVector| -> Result<(f64, Fit)> {
        let fit = factor(dict, cov, &p.signal, &p.noise)?;
        let value = fit.fit + penalty(&weights, cfg, p);
        if !value.is_finite() {
            return Err(Error::Estimator("objective became non-finite".into()));
        }
        Ok((value, fit))
    };
    let (mut value, mut fit) = evaluate(&power)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut max_step = 1.0;
    while trace.len() <= cfg.max_iter {
        let cycle_start = value;
        let p1 = mm_step(dict, &weights, cfg, &power, &fit, floor);
        let (v1, f1) = evaluate(&p1)?;
        trace.push(v1);
        if trace.len() > cfg.max_iter {
            power = p1;
            break;
        }
        let p2 = mm_step(dict, &weights, cfg, &p1, &f1, floor);
        let (v2, f2) = evaluate(&p2)?;
        trace.push(v2);
        if trace.len() <= cfg.max_iter {
            if let Some((p3, v3, f3)) = squarem(&power, &p1, &p2, v2, floor, &mut max_step, &evaluate, |p, f| {
                mm_step(dict, &weights, cfg, p, f, floor)
            }) {
                trace.push(v3);
                (power, value, fit) = (p3, v3, f3);
                if (cycle_start - value).abs() <= cfg.rel_tol * value.abs() {
                    converged = true;
                    break;
                }
                continue;
            }
        }
        (power, value, fit) = (p2, v2, f2);
        if (cycle_start - value).abs() <= cfg.rel_tol * value.abs() {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        power,
        objective: trace,
        converged,
    })
}

/// Squared extrapolation through three successive iterates in log-power
/// space, stabilised by one MM step. The step length is capped by
/// `max_step`, which grows after full-length successes and shrinks after
/// failures, and is halved towards the plain iterate until the result
/// improves on `v2`.
fn squarem(
    p0: &PowerVector,
    p1: &PowerVector,
    p2: &PowerVector,
    v2: f64,
    floor: f64,
    max_step: &mut f64,
    evaluate: &impl Fn(&PowerVector) -> Result<(f64, Fit)>,
    step: impl Fn(&PowerVector, &Fit) -> PowerVector,
) -> Option<(PowerVector, f64, Fit)> {
    let (l0, l1, l2) = (log_powers(p0), log_powers(p1), log_powers(p2));
    let r: Vec<f64> = l1.iter().zip(&l0).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = l2.iter().zip(&l1).zip(&r).map(|((c, b), r)| c - b - r).collect();
    let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(vn > 0.0 && rn.is_finite()) {
        return None;
    }
    let g = p0.signal.len();
    let full = (rn / vn).min(*max_step);
    let mut alpha = -full;
    for _ in 0..3 {
        if alpha >= -1.0 {
            break;
        }
        let mut out: Vec<f64> = l0
            .iter()
            .zip(&r)
            .zip(&v)
            .map(|((l, r), v)| (l - 2.0 * alpha * r + alpha * alpha * v).exp())
            .collect();
        let tried = alpha;
        alpha = (alpha - 1.0) / 2.0;
        if out.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let noise = out.split_off(g).into_iter().map(|s| s.max(floor)).collect();
        let p = PowerVector { signal: out, noise };
        let Ok((_, fe)) = evaluate(&p) else { continue };
        let p3 = step(&p, &fe);
        if let Ok((v3, f3)) = evaluate(&p3) {
            if v3 < v2 {
                if tried == -*max_step {
                    *max_step *= 4.0;
                }
                return Some((p3, v3, f3));
            }
        }
    }
    *max_step = (*max_step / 4.0).max(1.0);
    None
}

/// Signal powers of a solve as a spatial spectrum.
pub fn qspice_spectrum(cov: &CovarianceEstimate, dict: &SteeringDictionary, cfg: &SolverConfig) -> Result<SpatialSpectrum> {
    let report = qspice_solve(cov, dict, cfg)?;
    spectrum_from_report(&report, dict, cfg.kind())
}

pub(crate) fn spectrum_from_report(
    report: &SolveReport,
    dict: &SteeringDictionary,
    kind: EstimatorKind,
) -> Result<SpatialSpectrum> {
    let top = report.power.signal.iter().copied().fold(0.0, f64::max);
    let floor = if top > 0.0 { top * 1e-12 } else { f64::MIN_POSITIVE };
    SpatialSpectrum::new(
        dict.angles().to_vec(),
        report.power.signal.clone(),
        kind,
        Some(dict.frequency_hz()),
        floor,
    )
}


/// Minimiser over `y >= lo` of `-(y - x) gamma / (1 + (y - x) beta) + pen(y)`
/// with `pen(y) = (rest + (w y)^t)^(1/t)`: the exact line search along one
/// power when the rest of the model is held fixed.
fn coordinate_min(x: f64, beta: f64, gamma: f64, w: f64, rest: f64, t: f64, lo: f64) -> f64 {
    if t == 1.0 {
        let y = x + ((gamma / w).sqrt() - 1.0) / beta;
        return y.max(lo);
    }
    let slope = |y: f64| {
        let d = 1.0 + (y - x) * beta;
        let wy = (w * y).powf(t);
        let pen = if wy == 0.0 { 0.0 } else { w.powf(t) * y.powf(t - 1.0) * (rest + wy).powf(1.0 / t - 1.0) };
        pen - gamma / (d * d)
    };
    if slope(lo) >= 0.0 {
        return lo;
    }
    let mut hi = (x.max(lo) * 2.0).max(lo + 1e-300);
    while slope(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut a = lo;
    for _ in 0..200 {
        let mid = 0.5 * (a + hi);
        if mid <= a || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            a = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (a + hi)
}

/// `R^-1`, `R^-1 T R^-1` and `tr(R^-1 T)`.
fn inverses(
    dict: &SteeringDictionary,
    target: &CovarianceEstimate,
    power: &PowerVector,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, f64)> {
    let r = model_covariance(dict, &power.signal, &power.noise);
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Estimator("model covariance lost positive definiteness".into()))?;
    let rinv = chol.inverse();
    let x = &rinv * target.matrix();
    let fit = (0..x.nrows()).map(|i| x[(i, i)].re).sum();
    let q = &x * &rinv;
    Ok((rinv, q, fit))
}

fn matvec(m: &DMatrix<Complex64>, b: &[Complex64], out: &mut [Complex64]) {
    let n = m.nrows();
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    let s = m.as_slice();
    for (j, bj) in b.iter().enumerate() {
        let col = &s[j * n..(j + 1) * n];
        for i in 0..n {
            out[i] += col[i] * bj;
        }
    }
}

/// Applies `R += delta b b^H` to `R^-1` and `R^-1 T R^-1`.
#[allow(clippy::too_many_arguments)]
fn rank_one_update(
    rinv: &mut DMatrix<Complex64>,
    q: &mut DMatrix<Complex64>,
    u: &[Complex64],
    v: &[Complex64],
    beta: f64,
    gamma: f64,
    delta: f64,
) {
    let n = rinv.nrows();
    let c = delta / (1.0 + delta * beta);
    let cc = c * c * gamma;
    let rs = rinv.as_mut_slice();
    let qs = q.as_mut_slice();
    for j in 0..n {
        let uj = u[j].conj();
        let vj = v[j].conj();
        for i in 0..n {
            let k = j * n + i;
            rs[k] -= u[i] * uj * c;
            qs[k] += -(u[i] * vj + v[i] * uj) * c + u[i] * uj * cc;
        }
    }
}

fn block_sum(x: &[f64], w: &[f64], t: f64) -> f64 {
    if t == 1.0 {
        return 0.0;
    }
    x.iter().zip(w).map(|(x, w)| (w * x).powf(t)).sum()
}

/// One cyclic pass of exact coordinate minimisations over the listed grid
/// powers and then every noise power, keeping `rinv` and `q` current through
/// rank-one updates.
#[allow(clippy::too_many_arguments)]
fn cd_sweep(
    dict: &SteeringDictionary,
    weights: &SpiceWeights,
    cfg: &SolverConfig,
    floor: f64,
    indices: &[usize],
    power: &mut PowerVector,
    rinv: &mut DMatrix<Complex64>,
    q: &mut DMatrix<Complex64>,
) {
    let m = dict.element_count();
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    let mut sig_sum = block_sum(&power.signal, &weights.signal, cfg.r);
    for &g in indices {
        let a = dict.column(g);
        matvec(rinv, a, &mut u);
        matvec(q, a, &mut v);
        let beta: f64 = a.iter().zip(&u).map(|(a, u)| (a.conj() * u).re).sum();
        let gamma: f64 = a.iter().zip(&v).map(|(a, v)| (a.conj() * v).re).sum::<f64>().max(0.0);
        let x = power.signal[g];
        let own = if cfg.r == 1.0 { 0.0 } else { (weights.signal[g] * x).powf(cfg.r) };
        let rest = (sig_sum - own).max(0.0);
        let y = coordinate_min(x, beta, gamma, weights.signal[g], rest, cfg.r, 0.0);
        if y != x {
            rank_one_update(rinv, q, &u, &v, beta, gamma, y - x);
            power.signal[g] = y;
            if cfg.r != 1.0 {
                sig_sum = rest + (weights.signal[g] * y).powf(cfg.r);
            }
        }
    }
    let mut noise_sum = block_sum(&power.noise, &weights.noise, cfg.q);
    for k in 0..m {
        for i in 0..m {
            u[i] = rinv[(i, k)];
            v[i] = q[(i, k)];
        }
        let beta = u[k].re;
        let gamma = v[k].re.max(0.0);
        let x = power.noise[k];
        let own = if cfg.q == 1.0 { 0.0 } else { (weights.noise[k] * x).powf(cfg.q) };
        let rest = (noise_sum - own).max(0.0);
        let y = coordinate_min(x, beta, gamma, weights.noise[k], rest, cfg.q, floor);
        if y != x {
            rank_one_update(rinv, q, &u, &v, beta, gamma, y - x);
            power.noise[k] = y;
            if cfg.q != 1.0 {
                noise_sum = rest + (weights.noise[k] * y).powf(cfg.q);
            }
        }
    }
}

/// Adds the Hessian of `||W x||_t` restricted to `free` (positions into the
/// block given by `offset`) onto `h`.
fn add_penalty_hessian(h: &mut DMatrix<f64>, free: &[usize], offset: usize, len: usize, x: &[f64], w: &[f64], t: f64) {
    if t == 1.0 {
        return;
    }
    let n = weighted_norm(x, w, t);
    if n == 0.0 {
        return;
    }
    let grad: Vec<f64> = free
        .iter()
        .map(|&k| match k.checked_sub(offset) {
            Some(i) if i < len => w[i].powf(t) * x[i].powf(t - 1.0) * n.powf(1.0 - t),
            _ => 0.0,
        })
        .collect();
    for (a, &ka) in free.iter().enumerate() {
        let Some(i) = ka.checked_sub(offset).filter(|&i| i < len) else { continue };
        for (b, &kb) in free.iter().enumerate() {
            if kb.checked_sub(offset).filter(|&j| j < len).is_none() {
                continue;
            }
            h[(a, b)] += (1.0 - t) * grad[a] * grad[b] / n;
        }
        if x[i] > 0.0 {
            h[(a, a)] += (t - 1.0) * w[i].powf(t) * x[i].powf(t - 2.0) * n.powf(1.0 - t);
        }
    }
}

const WARM_SWEEPS: usize = 10;

/// Projected Newton on the nonnegative orthant.
///
/// A few coordinate sweeps first zero out most grid powers; each further
/// step solves the damped Newton system on the free coordinates (those off
/// their bound or with a descending gradient) and backtracks along the
/// projection arc. Any step that fails to descend is replaced by a full
/// coordinate sweep, so the objective trace is non-increasing.
fn solve_newton(
    cov: &CovarianceEstimate,
    dict: &SteeringDictionary,
    cfg: &SolverConfig,
    start: PowerVector,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_inputs(cov, dict)?;
    let weights = spice_weights(dict, cov)?;
    if start.signal.len() != dict.len() || start.noise.len() != dict.element_count() {
        return Err(Error::invalid("starting point does not match the dictionary"));
    }
    let target = fit_target(cov, cfg);
    let m = dict.element_count();
    let g = dict.len();
    let floor = cfg.power_floor * start.total();
    let mut power = start;
    for s in &mut power.noise {
        *s = s.max(floor);
    }
    let evaluate = |p: &PowerVector| -> Result<(f64, DMatrix<Complex64>, DMatrix<Complex64>)> {
        let (rinv, q, fit) = inverses(dict, &target, p)?;
        let value = fit + penalty(&weights, cfg, p);
        if !value.is_finite() {
            return Err(Error::Estimator("objective became non-finite".into()));
        }
        Ok((value, rinv, q))
    };
    let (mut value, mut rinv, mut q) = evaluate(&power)?;
    let mut trace = vec![value];
    let mut converged = false;
    let all: Vec<usize> = (0..g).collect();
    let done = |prev: f64, value: f64| (prev - value).abs() <= cfg.rel_tol * value.abs();

    for _ in 0..WARM_SWEEPS {
        if trace.len() > cfg.max_iter {
            break;
        }
        cd_sweep(dict, &weights, cfg, floor, &all, &mut power, &mut rinv, &mut q);
        let prev = value;
        (value, rinv, q) = evaluate(&power)?;
        trace.push(value);
        if done(prev, value) {
            converged = true;
            break;
        }
    }

    let mut damping = 1e-8;
    while !converged && trace.len() <= cfg.max_iter {
        let x: Vec<f64> = power.signal.iter().chain(&power.noise).copied().collect();
        let lower = |k: usize| if k < g { 0.0 } else { floor };
        let (ds, dn) = curvature(dict, &q);
        let grad: Vec<f64> = penalty_gradient(&power.signal, &weights.signal, cfg.r)
            .into_iter()
            .zip(&ds)
            .chain(penalty_gradient(&power.noise, &weights.noise, cfg.q).into_iter().zip(&dn))
            .map(|(p, d)| p - d)
            .collect();
        // A coordinate stays on its bound when a diagonal Newton step from
        // it would reach the bound anyway.
        let (bs, bn) = curvature(dict, &rinv);
        let diag: Vec<f64> = bs.iter().zip(&ds).chain(bn.iter().zip(&dn)).map(|(b, d)| 2.0 * b * d).collect();
        let free: Vec<usize> = (0..g + m)
            .filter(|&k| grad[k] < 0.0 || x[k] - lower(k) > grad[k] / diag[k].max(f64::MIN_POSITIVE))
            .collect();
        let pinned: Vec<usize> = (0..g + m)
            .filter(|&k| x[k] > lower(k) && grad[k] >= 0.0 && x[k] - lower(k) <= grad[k] / diag[k].max(f64::MIN_POSITIVE))
            .collect();
        if free.is_empty() && pinned.is_empty() {
            converged = true;
            break;
        }
        let nf = free.len();
        let mut basis = DMatrix::<Complex64>::zeros(m, nf);
        for (c, &k) in free.iter().enumerate() {
            if k < g {
                basis.column_mut(c).copy_from_slice(dict.column(k));
            } else {
                basis[(k - g, c)] = Complex64::new(1.0, 0.0);
            }
        }
        let bh = basis.adjoint();
        let rb = &bh * (&rinv * &basis);
        let qb = &bh * (&q * &basis);
        let mut h = DMatrix::<f64>::from_fn(nf, nf, |i, j| 2.0 * (rb[(i, j)] * qb[(i, j)].conj()).re);
        add_penalty_hessian(&mut h, &free, 0, g, &power.signal, &weights.signal, cfg.r);
        add_penalty_hessian(&mut h, &free, g, m, &power.noise, &weights.noise, cfg.q);
        let scale = (0..nf).map(|i| h[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let rhs = nalgebra::DVector::from_iterator(nf, free.iter().map(|&k| -grad[k]));
        let mut step = None;
        for _ in 0..8 {
            let mut hd = h.clone();
            for i in 0..nf {
                hd[(i, i)] += damping * h[(i, i)].max(1e-300 * scale);
            }
            if let Some(chol) = hd.cholesky() {
                step = Some(chol.solve(&rhs));
                break;
            }
            damping *= 100.0;
        }

        let prev = value;
        let mut accepted = false;
        if let Some(d) = step {
            let mut alpha = 1.0;
            for _ in 0..30 {
                let mut trial = x.clone();
                for &k in &pinned {
                    trial[k] = (x[k] - alpha * grad[k] / diag[k]).max(lower(k));
                }
                for (c, &k) in free.iter().enumerate() {
                    trial[k] = (x[k] + alpha * d[c]).max(lower(k));
                }
                let pred: f64 = (0..g + m).map(|k| grad[k] * (trial[k] - x[k])).sum();
                if pred >= 0.0 {
                    break;
                }
                let noise = trial.split_off(g);
                let candidate = PowerVector { signal: trial, noise };
                if let Ok((v, ri, qq)) = evaluate(&candidate) {
                    if v <= prev + 1e-4 * pred {
                        (power, value, rinv, q) = (candidate, v, ri, qq);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted && alpha == 1.0 {
                damping = (damping / 10.0).max(1e-12);
            } else if alpha < 0.1 {
                damping *= 10.0;
            }
        }
        if !accepted {
            damping *= 100.0;
            cd_sweep(dict, &weights, cfg, floor, &all, &mut power, &mut rinv, &mut q);
            (value, rinv, q) = evaluate(&power)?;
        }
        trace.push(value);
        if done(prev, value) {
            converged = true;
        }
    }
    Ok(SolveReport {
        power,
        objective: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{build_dictionary, ArrayGeometry};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surrogate(c2: &[f64], w: &[f64], t: f64, x: &[f64]) -> f64 {
        c2.iter().zip(x).map(|(c, x)| c / x).sum::<f64>() + weighted_norm(x, w, t)
    }

    /// Cyclic golden-section descent on each coordinate; slow but independent
    /// of the stationarity algebra.
    fn numeric_block_min(c2: &[f64], w: &[f64], t: f64) -> Vec<f64> {
        let mut x = vec![1.0; c2.len()];
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            for k in 0..x.len() {
                let (mut lo, mut hi) = (1e-9, 100.0);
                for _ in 0..120 {
                    let a = hi - g * (hi - lo);
                    let b = lo + g * (hi - lo);
                    let mut xa = x.clone();
                    xa[k] = a;
                    let mut xb = x.clone();
                    xb[k] = b;
                    if surrogate(c2, w, t, &xa) < surrogate(c2, w, t, &xb) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                x[k] = 0.5 * (lo + hi);
            }
        }
        x
    }

    #[test]
    fn block_minimizer_matches_numeric_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &t in &[1.0, 1.3, 1.5, 2.0] {
            for _ in 0..4 {
                let c2: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
                let closed = block_minimizer(&c2, &w, t);
                let numeric = numeric_block_min(&c2, &w, t);
                let fc = surrogate(&c2, &w, t, &closed);
                let fn_ = surrogate(&c2, &w, t, &numeric);
                assert!(fc <= fn_ * (1.0 + 1e-9), "t={t}: {fc} vs {fn_}");
                for (a, b) in closed.iter().zip(&numeric) {
                    assert!((a - b).abs() < 1e-4 * a.max(1.0), "t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn block_minimizer_zero_data_gives_zero() {
        assert_eq!(block_minimizer(&[0.0, 0.0], &[1.0, 2.0], 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn weights_follow_energy() {
        let geom = ArrayGeometry::uniform(4, 0.25, 1500.0).unwrap();
        let dict = build_dictionary(&geom, 3000.0, &[-10.0, 0.0, 10.0]).unwrap();
        let z = DVector::from_fn(4, |i, _| Complex64::new(1.0 + i as f64, -0.5));
        let w1 = spice_weights(&dict, &CovarianceEstimate::from_snapshot(&z)).unwrap();
        let energy = z.norm_squared();
        for &w in &w1.signal {
            assert!((w - 4.0 / energy).abs() < 1e-15);
        }
        let z2 = &z * Complex64::new(2.0, 0.0);
        let w2 = spice_weights(&dict, &CovarianceEstimate::from_snapshot(&z2)).unwrap();
        for (a, b) in w1.signal.iter().chain(&w1.noise).zip(w2.signal.iter().chain(&w2.noise)) {
            assert!((a / 4.0 - b).abs() < 1e-15);
        }
        let zero = DVector::zeros(4);
        assert!(matches!(
            spice_weights(&dict, &CovarianceEstimate::from_snapshot(&zero)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn config_rejects_large_q() {
        assert!(SolverConfig::with_orders(1.0, 2.5).validate().is_err());
        assert!(SolverConfig::with_orders(0.5, 1.0).validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::spice().is_spice());
    }

    #[test]
    fn zero_snapshot_is_degenerate() {
        let geom = ArrayGeometry::uniform(3, 0.25, 1500.0).unwrap();
        let dict = build_dictionary(&geom, 3000.0, &[0.0, 20.0]).unwrap();
        let err = qspice_solve_snapshot(&DVector::zeros(3), &dict, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }
}
