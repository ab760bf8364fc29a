//! Grid-neighbourhood refinement (GNR²): re-solve on successively finer
//! local grids around the current peaks.

use serde::{Deserialize, Serialize};

use crate::array::{angle_grid, AngleConvention, ArrayGeometry};
use crate::error::{Error, Result};
use crate::estimators::{peak_pick, peak_pick_where, EstimatorKind, SolverConfig, SpatialSpectrum};
use crate::frontend::BinCovariance;
use crate::pipeline::solve_fused;

/// Angles closer than this are the same grid point.
const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Coarse grid step, degrees.
    pub initial_step: f64,
    pub refine_factor: u32,
    /// Stop once the grid step reaches this, degrees.
    pub target_step: f64,
    /// Half-width of each local grid in units of the step being refined.
    pub neighborhood_halfwidth: f64,
    pub max_rounds: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            refine_factor: 4,
            target_step: 0.05,
            neighborhood_halfwidth: 2.0,
            max_rounds: 8,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.initial_step, self.target_step, self.neighborhood_halfwidth]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(Error::Config("refinement steps and half-width must be positive".into()));
        }
        if self.target_step >= self.initial_step {
            return Err(Error::Config("target_step must be below initial_step".into()));
        }
        if self.refine_factor < 2 {
            return Err(Error::Config("refine_factor must be at least 2".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid step after `round` refinements.
    pub fn step_after(&self, round: usize) -> f64 {
        (self.initial_step / f64::from(self.refine_factor).powi(round as i32)).max(self.target_step)
    }
}

#[derive(Debug, Clone)]
pub struct Gnr2Result {
    /// Ascending estimates on the final grid.
    pub angles: Vec<f64>,
    pub spectrum: SpatialSpectrum,
    /// Refinement rounds completed after the coarse solve.
    pub rounds: usize,
    /// Grid step the estimates are resolved to.
    pub final_step: f64,
    /// Fewer than `K` peaks were found.
    pub shortfall: bool,
    /// Dictionary size of every solve, coarse first.
    pub grid_sizes: Vec<usize>,
}

/// Closed angle interval that a refined round may place estimates in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
}

/// The coarse skeleton plus, around each estimate, a grid of `step` spacing
/// and half-width `half`. Overlapping neighbourhoods merge into one segment
/// laid out from its first estimate; every estimate stays an exact point.
pub fn refined_grid(
    coarse: &[f64],
    estimates: &[f64],
    half: f64,
    step: f64,
    sector: (f64, f64),
) -> (Vec<f64>, Vec<Segment>) {
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    // (lo, hi, anchor)
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for &e in &sorted {
        match groups.last_mut() {
            Some(g) if e - half <= g.1 + MERGE_TOL => g.1 = e + half,
            _ => groups.push((e - half, e + half, e)),
        }
    }
    // priority: 0 coarse, 1 refined lattice, 2 estimate
    let mut points: Vec<(f64, u8)> = coarse.iter().map(|&a| (a, 0)).collect();
    let mut segments = Vec::with_capacity(groups.len());
    for &(lo, hi, anchor) in &groups {
        let lo = lo.max(sector.0);
        let hi = hi.min(sector.1);
        let first = ((lo - anchor) / step - MERGE_TOL).ceil() as i64;
        let last = ((hi - anchor) / step + MERGE_TOL).floor() as i64;
        for j in first..=last {
            points.push((anchor + j as f64 * step, 1));
        }
        segments.push(Segment { lo, hi });
    }
    points.extend(sorted.iter().map(|&e| (e, 2)));
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut grid: Vec<(f64, u8)> = Vec::with_capacity(points.len());
    for p in points {
        match grid.last_mut() {
            Some(last) if p.0 - last.0 <= MERGE_TOL => {
                if p.1 > last.1 {
                    *last = p;
                }
            }
            _ => grid.push(p),
        }
    }
    (grid.into_iter().map(|p| p.0).collect(), segments)
}

/// GNR² over one or more frequency bins; per-bin spectra are fused on
/// every round before peak picking.
#[allow(clippy::too_many_arguments)]
pub fn gnr2_estimate(
    bins: &[BinCovariance],
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    sector: (f64, f64),
    k: usize,
    solver: &SolverConfig,
    refine: &RefineConfig,
    guard_deg: f64,
) -> Result<Gnr2Result> {
    refine.validate()?;
    if k == 0 {
        return Err(Error::invalid("source count must be at least 1"));
    }
    let coarse = angle_grid(sector.0, sector.1, refine.initial_step)?;
    let kind = EstimatorKind::QspiceGnr2;
    let mut spectrum = solve_fused(bins, geometry, convention, &coarse, solver, kind)?;
    let mut grid_sizes = vec![coarse.len()];
    let pick = peak_pick(&spectrum, k, guard_deg);
    let shortfall = pick.shortfall;
    let mut estimates = pick.angles;
    let anchors = estimates.clone();
    let mut step = refine.initial_step;
    let mut rounds = 0;
    let reach = refine.neighborhood_halfwidth * refine.initial_step + MERGE_TOL;
    while !estimates.is_empty() && step > refine.target_step + MERGE_TOL && rounds < refine.max_rounds {
        let next = refine.step_after(rounds + 1);
        let half = refine.neighborhood_halfwidth * step;
        let (grid, segments) = refined_grid(&coarse, &estimates, half, next, sector);
        let refined = solve_fused(bins, geometry, convention, &grid, solver, kind)?;
        grid_sizes.push(grid.len());
        let admit = |a: f64| {
            segments.iter().any(|s| a >= s.lo - MERGE_TOL && a <= s.hi + MERGE_TOL)
                && anchors.iter().any(|&c| (a - c).abs() <= reach)
        };
        let pick = peak_pick_where(&refined, estimates.len(), guard_deg, admit);
        rounds += 1;
        if pick.angles.len() < estimates.len() {
            // a source vanished inside its neighbourhood: keep the last
            // complete resolution
            break;
        }
        estimates = pick.angles;
        spectrum = refined;
        step = next;
    }
    Ok(Gnr2Result {
        angles: estimates,
        spectrum,
        rounds,
        final_step: step,
        shortfall,
        grid_sizes,
    })
}
