use bbdoa_core::array::{angle_grid, build_dictionary, AngleConvention, ArrayGeometry, SteeringDictionary};
use bbdoa_core::estimators::{kkt_residual, qspice_solve_snapshot};
use bbdoa_core::frontend::{sample_covariance, CovarianceEstimate};
use bbdoa_core::{qspice_solve, rng, spice_weights, CovarianceFit, SolverConfig, SolverMethod};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

fn instance(m: usize, g: usize, snapshots: usize, seed: u64) -> (SteeringDictionary, CovarianceEstimate) {
    let mut gen = rng::stream(seed, &[]);
    let geom = ArrayGeometry::half_wavelength(m, 1000.0, 1500.0).unwrap();
    let mut angles: Vec<f64> = (0..g).map(|_| gen.random_range(-80.0..80.0)).collect();
    angles.sort_by(f64::total_cmp);
    let dict = build_dictionary(&geom, 1000.0, &angles).unwrap();
    let z = DMatrix::from_fn(m, snapshots, |_, _| {
        Complex64::new(gen.random::<f64>() - 0.5, gen.random::<f64>() - 0.5)
    });
    (dict, sample_covariance(&z).unwrap())
}

fn model_covariance(dict: &SteeringDictionary, p: &[f64], sigma: &[f64]) -> DMatrix<Complex64> {
    let mut r = DMatrix::from_diagonal(&DVector::from_iterator(sigma.len(), sigma.iter().map(|&s| Complex64::new(s, 0.0))));
    for (g, &pg) in p.iter().enumerate() {
        let a = DVector::from_column_slice(dict.column(g));
        r += &a * a.adjoint() * Complex64::new(pg, 0.0);
    }
    r
}

#[test]
fn kkt_residual_small_at_termination() {
    let mut checked = 0;
    for seed in 0..20 {
        let (dict, cov) = instance(6, 25, 12, 300 + seed);
        for cfg in [SolverConfig::default(), SolverConfig::with_orders(1.0, 1.5)] {
            let rep = qspice_solve(&cov, &dict, &cfg).unwrap();
            if !rep.converged {
                continue;
            }
            let res = kkt_residual(&cov, &dict, &cfg, &rep.power).unwrap();
            assert!(res <= 1e-4, "seed {seed} q {}: residual {res:e}", cfg.q);
            checked += 1;
        }
    }
    assert!(checked >= 30, "only {checked} runs converged");
}

#[test]
fn spice_fixed_point_is_classical_stationarity() {
    // p_g = |c_g| / sqrt(w_g), c_g = p_g a_g^H R^-1 z, for one snapshot
    let (dict, _) = instance(5, 18, 1, 41);
    let mut gen = rng::stream(42, &[]);
    let z = DVector::from_fn(5, |_, _| Complex64::new(gen.random::<f64>() - 0.5, gen.random::<f64>() - 0.5));
    let cov = CovarianceEstimate::new(&z * z.adjoint(), 1).unwrap();
    let cfg = SolverConfig {
        max_iter: 5000,
        ..SolverConfig::spice()
    };
    let rep = qspice_solve_snapshot(&z, &dict, &cfg).unwrap();
    let w = spice_weights(&dict, &cov).unwrap();
    let r = model_covariance(&dict, &rep.power.signal, &rep.power.noise);
    let rz = r.cholesky().unwrap().solve(&z);
    let top = rep.power.signal.iter().chain(&rep.power.noise).copied().fold(0.0, f64::max);
    for (g, &p) in rep.power.signal.iter().enumerate() {
        let a = DVector::from_column_slice(dict.column(g));
        let c = (a.adjoint() * &rz)[(0, 0)].norm() * p;
        assert!((p - c / w.signal[g].sqrt()).abs() <= 1e-4 * top, "grid {g}: {p} vs {}", c / w.signal[g].sqrt());
    }
    for (m, &s) in rep.power.noise.iter().enumerate() {
        let c = rz[m].norm() * s;
        assert!((s - c / w.noise[m].sqrt()).abs() <= 1e-4 * top, "sensor {m}");
    }
}

#[test]
fn scaling_data_scales_powers_only() {
    let (dict, cov) = instance(4, 15, 6, 77);
    let cfg = SolverConfig::default();
    let base = qspice_solve(&cov, &dict, &cfg).unwrap();
    let scaled = qspice_solve(&cov.scaled(4.0), &dict, &cfg).unwrap();
    let rel = (base.final_objective() - scaled.final_objective()).abs() / base.final_objective();
    assert!(rel < 1e-9, "objective changed by {rel:e}");
    let top = base.power.signal.iter().copied().fold(0.0, f64::max);
    for (a, b) in base.power.signal.iter().zip(&scaled.power.signal) {
        assert!((4.0 * a - b).abs() <= 1e-5 * 4.0 * top);
    }
    let argmax = |p: &[f64]| (0..p.len()).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap();
    assert_eq!(argmax(&base.power.signal), argmax(&scaled.power.signal));
}

#[test]
fn newton_and_mm_reach_the_same_minimum() {
    for seed in 0..5 {
        let (dict, cov) = instance(5, 20, 10, 900 + seed);
        let newton = qspice_solve(&cov, &dict, &SolverConfig::default()).unwrap();
        let mm = qspice_solve(
            &cov,
            &dict,
            &SolverConfig {
                method: SolverMethod::Mm,
                max_iter: 20_000,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let (a, b) = (newton.final_objective(), mm.final_objective());
        assert!((a - b).abs() <= 1e-6 * a, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn fit_forms_coincide_for_one_snapshot() {
    let (dict, _) = instance(6, 30, 1, 5);
    let z = DVector::from_fn(6, |i, _| Complex64::new(1.0 + i as f64, 0.5 - i as f64 * 0.3));
    let cov = CovarianceEstimate::from_snapshot(&z);
    let lin = SolverConfig {
        fit: CovarianceFit::Linear,
        ..SolverConfig::default()
    };
    let a = qspice_solve(&cov, &dict, &lin).unwrap();
    let b = qspice_solve(&cov, &dict, &SolverConfig::default()).unwrap();
    let c = qspice_solve_snapshot(&z, &dict, &SolverConfig::default()).unwrap();
    assert_eq!(a.objective, b.objective);
    assert_eq!(b.power, c.power);
}

#[test]
fn squared_fit_keeps_close_sources_apart() {
    // exact covariance of two sources 2 degrees apart at 20 dB
    let geom = ArrayGeometry::half_wavelength(12, 1000.0, 1500.0).unwrap();
    let grid = angle_grid(-90.0, 90.0, 1.0).unwrap();
    let dict = build_dictionary(&geom, 1000.0, &grid).unwrap();
    let idx = [grid.iter().position(|&g| g == 19.0).unwrap(), grid.iter().position(|&g| g == 21.0).unwrap()];
    let mut p = vec![0.0; grid.len()];
    p[idx[0]] = 100.0;
    p[idx[1]] = 100.0;
    let cov = CovarianceEstimate::new(model_covariance(&dict, &p, &[1.0; 12]), 500).unwrap();
    let rep = qspice_solve(&cov, &dict, &SolverConfig::default()).unwrap();
    let s = &rep.power.signal;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut top2 = [order[0], order[1]];
    top2.sort();
    assert_eq!(top2, idx);
}

#[test]
fn invalid_orders_rejected() {
    let (dict, cov) = instance(3, 5, 4, 1);
    for (r, q) in [(0.5, 1.0), (1.0, 2.5), (1.0, 0.9)] {
        assert!(qspice_solve(&cov, &dict, &SolverConfig::with_orders(r, q)).is_err());
    }
}

#[test]
fn scalar_instance_matches_calculus() {
    // |z|^2 / (p + s) + (p + s) / |z|^2 is minimised at p + s = |z|^2 with value 2
    let dict = SteeringDictionary::from_manifold(
        DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        vec![0.0],
        1000.0,
        AngleConvention::Broadside,
    )
    .unwrap();
    for (re, im) in [(1.7, 0.0), (0.3, -0.4), (-2.0, 5.0)] {
        let z = DVector::from_element(1, Complex64::new(re, im));
        let z2 = z[0].norm_sqr();
        for cfg in [SolverConfig::spice(), SolverConfig::default()] {
            let rep = qspice_solve_snapshot(&z, &dict, &cfg).unwrap();
            let total = rep.power.signal[0] + rep.power.noise[0];
            assert!((total - z2).abs() <= 1e-6 * z2, "{total} vs {z2}");
            assert!((rep.final_objective() - 2.0).abs() <= 1e-9, "{}", rep.final_objective());
        }
    }
}
