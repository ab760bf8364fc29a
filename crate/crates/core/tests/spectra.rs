use bbdoa_core::array::{angle_grid, build_dictionary, ArrayGeometry, SteeringDictionary};
use bbdoa_core::estimators::{music_spectrum, peak_pick, PeakPick};
use bbdoa_core::frontend::CovarianceEstimate;
use bbdoa_core::pipeline::narrowband_bins;
use bbdoa_core::sim::{synthesize_snapshots, NoiseModel, NoiseSetting, SourceSpec};
use bbdoa_core::{cbf_spectrum, AngleConvention, EstimatorKind, SpatialSpectrum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn table_dictionary(step: f64) -> (Vec<f64>, SteeringDictionary) {
    let geom = ArrayGeometry::half_wavelength(12, 3000.0, 1500.0).unwrap();
    let grid = angle_grid(-90.0, 90.0, step).unwrap();
    let dict = build_dictionary(&geom, 3000.0, &grid).unwrap();
    (grid, dict)
}

fn exact(dict: &SteeringDictionary, cols: &[(usize, f64)], noise: f64) -> CovarianceEstimate {
    let m = dict.element_count();
    let mut r = DMatrix::<Complex64>::identity(m, m) * Complex64::new(noise, 0.0);
    for &(g, p) in cols {
        let a = DVector::from_column_slice(dict.column(g));
        r += &a * a.adjoint() * Complex64::new(p, 0.0);
    }
    CovarianceEstimate::new(r, 100).unwrap()
}

fn spectrum(power: Vec<f64>) -> SpatialSpectrum {
    let angles = (0..power.len()).map(|i| i as f64).collect();
    SpatialSpectrum::new(angles, power, EstimatorKind::Cbf, None, 1e-12).unwrap()
}

#[test]
fn cbf_of_identity_is_flat_one_over_m() {
    let (_, dict) = table_dictionary(1.0);
    let cov = CovarianceEstimate::new(DMatrix::identity(12, 12), 10).unwrap();
    let s = cbf_spectrum(&cov, &dict).unwrap();
    assert!(s.power.iter().all(|p| (p - 1.0 / 12.0).abs() < 1e-15));
}

#[test]
fn cbf_peaks_at_single_noiseless_source() {
    let (grid, dict) = table_dictionary(1.0);
    let g = grid.iter().position(|&a| a == -37.0).unwrap();
    let s = cbf_spectrum(&exact(&dict, &[(g, 1.0)], 0.0), &dict).unwrap();
    assert_eq!(s.argmax(), -37.0);
}

#[test]
fn music_degenerate_subspace_is_flat() {
    let (_, dict) = table_dictionary(1.0);
    let cov = CovarianceEstimate::new(DMatrix::identity(12, 12), 10).unwrap();
    let s = music_spectrum(&cov, &dict, 11).unwrap();
    let first = s.power[0];
    assert!(s.power.iter().all(|p| (p - first).abs() <= 1e-9 * first));
}

#[test]
fn scaling_covariance_leaves_picks_unchanged() {
    let (grid, dict) = table_dictionary(1.0);
    let ia = grid.iter().position(|&a| a == 4.0).unwrap();
    let ib = grid.iter().position(|&a| a == 40.0).unwrap();
    let cov = exact(&dict, &[(ia, 1.0), (ib, 0.3)], 0.5);
    let big = cov.scaled(37.5);
    let c1 = cbf_spectrum(&cov, &dict).unwrap();
    let c2 = cbf_spectrum(&big, &dict).unwrap();
    for (a, b) in c1.power.iter().zip(&c2.power) {
        assert!((37.5 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert_eq!(peak_pick(&c1, 2, 0.0), peak_pick(&c2, 2, 0.0));
    let m1 = music_spectrum(&cov, &dict, 2).unwrap();
    let m2 = music_spectrum(&big, &dict, 2).unwrap();
    assert_eq!(peak_pick(&m1, 2, 0.0), peak_pick(&m2, 2, 0.0));
    assert_eq!(peak_pick(&m1, 2, 0.0).angles, vec![4.0, 40.0]);
}

#[test]
fn peak_pick_examples() {
    let single = spectrum(vec![0.1, 0.4, 1.0, 0.3, 0.2]);
    assert_eq!(
        peak_pick(&single, 1, 0.0),
        PeakPick {
            angles: vec![2.0],
            shortfall: false
        }
    );

    let mut p = vec![0.01; 40];
    p[5] = 1.0;
    p[30] = 0.8;
    let two = spectrum(p);
    assert_eq!(peak_pick(&two, 2, 2.0).angles, vec![5.0, 30.0]);

    let plateau = spectrum(vec![0.1, 0.7, 0.7, 0.7, 0.2]);
    assert_eq!(peak_pick(&plateau, 1, 0.0).angles, vec![1.0]);

    let short = peak_pick(&single, 2, 0.0);
    assert!(short.shortfall);
    assert_eq!(short.angles, vec![2.0]);
}

#[test]
fn guard_excludes_neighbouring_peaks() {
    let two = spectrum(vec![0.0, 1.0, 0.5, 0.9, 0.0, 0.0, 0.7, 0.0]);
    assert_eq!(peak_pick(&two, 2, 3.0).angles, vec![1.0, 6.0]);
    assert_eq!(peak_pick(&two, 2, 0.0).angles, vec![1.0, 3.0]);
}

#[test]
fn non_uniform_noise_raises_music_sidelobes() {
    let geom = ArrayGeometry::half_wavelength(12, 3000.0, 1500.0).unwrap();
    let (grid, dict) = table_dictionary(0.1);
    let src = SourceSpec::tonal(vec![2.36, 27.62], 1.0);
    let uniform = NoiseModel::UniformGaussian { variance: 1.0 };
    let skewed = NoiseModel::NonuniformGaussian {
        variances: vec![12.0, 2.3, 20.5, 5.5, 11.1, 6.5, 2.0, 13.5, 0.8, 1.7, 13.6, 5.2],
    };
    let sidelobe = |model: &NoiseModel| {
        let mut acc = 0.0;
        for seed in 0..20 {
            let setting = NoiseSetting { model, snr_db: 0.0 };
            let syn = synthesize_snapshots(&geom, AngleConvention::Broadside, 3000.0, &src, Some(setting), 60, seed).unwrap();
            let bins = narrowband_bins(&syn.record, 3000.0).unwrap();
            let db = music_spectrum(&bins[0].cov, &dict, 2).unwrap().db();
            let top = db.iter().copied().fold(f64::MIN, f64::max);
            let side = grid
                .iter()
                .zip(&db)
                .filter(|(a, _)| (*a - 2.36).abs() > 8.0 && (*a - 27.62).abs() > 8.0)
                .map(|(_, d)| *d)
                .fold(f64::MIN, f64::max);
            acc += side - top;
        }
        acc / 20.0
    };
    let rise = sidelobe(&skewed) - sidelobe(&uniform);
    assert!((3.0..=9.0).contains(&rise), "sidelobe rise {rise:.2} dB");
}
