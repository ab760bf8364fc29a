use super::SpatialSpectrum;

/// Selected peak angles, ascending. `shortfall` is set when fewer than the
/// requested number of admissible peaks exist.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakPick {
    pub angles: Vec<f64>,
    pub shortfall: bool,
}

/// Indices of strict local maxima with positive power. A plateau of equal
/// values counts once, represented by its lowest angle; grid ends compare
/// against their single neighbour.
pub fn local_maxima(power: &[f64]) -> Vec<usize> {
    let n = power.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && power[j + 1] == power[i] {
            j += 1;
        }
        let v = power[i];
        let left = if i > 0 { power[i - 1] } else { f64::NEG_INFINITY };
        let right = if j + 1 < n { power[j + 1] } else { f64::NEG_INFINITY };
        if v > 0.0 && left < v && right < v {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// The `k` strongest local maxima at least `guard_deg` apart.
pub fn peak_pick(spectrum: &SpatialSpectrum, k: usize, guard_deg: f64) -> PeakPick {
    peak_pick_where(spectrum, k, guard_deg, |_| true)
}

/// As [`peak_pick`], considering only maxima whose angle passes `admit`.
pub fn peak_pick_where(
    spectrum: &SpatialSpectrum,
    k: usize,
    guard_deg: f64,
    admit: impl Fn(f64) -> bool,
) -> PeakPick {
    let mut cand: Vec<usize> = local_maxima(&spectrum.power)
        .into_iter()
        .filter(|&i| admit(spectrum.angles[i]))
        .collect();
    cand.sort_by(|&a, &b| spectrum.power[b].total_cmp(&spectrum.power[a]).then(a.cmp(&b)));
    let mut chosen: Vec<f64> = Vec::with_capacity(k);
    for i in cand {
        if chosen.len() == k {
            break;
        }
        let theta = spectrum.angles[i];
        if chosen.iter().all(|&c| (c - theta).abs() >= guard_deg) {
            chosen.push(theta);
        }
    }
    chosen.sort_by(f64::total_cmp);
    PeakPick {
        shortfall: chosen.len() < k,
        angles: chosen,
    }
}
