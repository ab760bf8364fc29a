//! Accuracy metrics over Monte Carlo trials.

use crate::error::{Error, Result};

/// Default success threshold, degrees.
pub const SUCCESS_THRESHOLD_DEG: f64 = 0.3;

/// Estimates of one trial. A shortfall trial produced fewer peaks than
/// sources (or failed outright).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    pub angles: Vec<f64>,
    pub shortfall: bool,
}

impl TrialEstimate {
    pub fn complete(angles: Vec<f64>) -> Self {
        Self {
            angles,
            shortfall: false,
        }
    }

    pub fn failed() -> Self {
        Self {
            angles: Vec::new(),
            shortfall: true,
        }
    }
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials). Returns the column assigned to each row.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let cur = cost[r - 1][c - 1] - u[r] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for c in 1..=n {
        out[owner[c] - 1] = c - 1;
    }
    out
}

/// Signed errors `estimate - truth` per truth, after pairing estimates to
/// truths by minimum total absolute error.
pub fn paired_errors(estimates: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimates for {} true directions",
            estimates.len(),
            truth.len()
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimates.iter().map(|e| (e - t).abs()).collect())
        .collect();
    let pick = assignment(&cost);
    Ok(truth
        .iter()
        .zip(pick)
        .map(|(t, j)| estimates[j] - t)
        .collect())
}

/// Root-mean-square error over all non-shortfall trials and sources.
/// `NaN` when every trial fell short.
pub fn rmse(trials: &[TrialEstimate], truth: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for t in trials.iter().filter(|t| !t.shortfall) {
        for e in paired_errors(&t.angles, truth)? {
            acc += e * e;
            count += 1;
        }
    }
    Ok(if count == 0 {
        f64::NAN
    } else {
        (acc / count as f64).sqrt()
    })
}

/// Percentage of trials with every paired error below `threshold_deg`;
/// shortfall trials count as failures.
pub fn success_ratio(trials: &[TrialEstimate], truth: &[f64], threshold_deg: f64) -> Result<f64> {
    if !(threshold_deg > 0.0) {
        return Err(Error::invalid("success threshold must be positive"));
    }
    if trials.is_empty() {
        return Err(Error::invalid("no trials"));
    }
    let mut hits = 0usize;
    for t in trials.iter().filter(|t| !t.shortfall) {
        if paired_errors(&t.angles, truth)?.iter().all(|e| e.abs() < threshold_deg) {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / trials.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..cost.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[row][c] + go(cost, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn assignment_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            for _ in 0..50 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect())
                    .collect();
                let pick = assignment(&cost);
                let total: f64 = pick.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
                assert!((total - brute(&cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rmse_arithmetic() {
        let truth = [10.0];
        assert_eq!(rmse(&[TrialEstimate::complete(vec![10.0])], &truth).unwrap(), 0.0);
        let one = rmse(&[TrialEstimate::complete(vec![10.3])], &truth).unwrap();
        assert!((one - 0.3).abs() < 1e-12);
        let two = rmse(
            &[TrialEstimate::complete(vec![10.1]), TrialEstimate::complete(vec![9.7])],
            &truth,
        )
        .unwrap();
        assert!((two - 0.05f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shortfall_counts_against_success_only() {
        let truth = [0.0, 20.0];
        let trials = [TrialEstimate::complete(vec![20.1, 0.1]), TrialEstimate::failed()];
        assert!((rmse(&trials, &truth).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(success_ratio(&trials, &truth, 0.3).unwrap(), 50.0);
        assert!(rmse(&[TrialEstimate::complete(vec![1.0])], &truth).is_err());
    }

    #[test]
    fn success_is_monotone_in_threshold() {
        let truth = [0.0, 20.0];
        let trials: Vec<_> = (0..20)
            .map(|i| TrialEstimate::complete(vec![0.03 * i as f64, 20.0 - 0.02 * i as f64]))
            .collect();
        let mut prev = 0.0;
        for th in [0.05, 0.1, 0.2, 0.3, 0.6, 1.0] {
            let s = success_ratio(&trials, &truth, th).unwrap();
            assert!(s >= prev);
            prev = s;
        }
        assert_eq!(prev, 100.0);
    }
}
