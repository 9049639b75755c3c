//! Semigroup splitting and decay at d = 3 (moderate degree to keep the
//! exponentials cheap): remainder decay and commutation, large-frequency
//! decay, resolvent line scans and the uniform gap scan.

mod common;

use boltzspec::branches::{
    branch_eigenvalues, branch_projectors, classify_hydrodynamics, first_order_modes,
};
use boltzspec::collision::compute_nu;
use boltzspec::fourier::{assemble_l_xi, spectrum, FrequencyPoint};
use boltzspec::linalg::{cexp, cscale, max_abs, spectral_norm};
use boltzspec::semigroup::{
    gap_uniformity_scan, large_xi_decay, matrix_exponential, resolvent_line_scan,
    semigroup_on_grid, splitting_check, DecayRegime,
};
use common::{gaussian_system, unit};

const A_THRESH: f64 = 2.0;

fn tau(d: usize) -> f64 {
    1.0 / compute_nu(d, &vec![0.0; d])
}

#[test]
fn splitting_remainder_decays_and_commutes() {
    let sys = gaussian_system(3, 4);
    let t0 = tau(3);
    let xi = FrequencyPoint::from_polar(0.1, &unit(3, 0)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let modes = first_order_modes(&sys.basis, &unit(3, 0)).unwrap();
    let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
    let pset = branch_projectors(&slice, &asg, &modes).unwrap();
    let lambdas = branch_eigenvalues(&slice, &asg);
    let times: Vec<f64> = (0..=60).map(|i| 0.2 * i as f64 * t0).collect();
    let report = splitting_check(&l_xi, &pset, &lambdas, &times, (2.0 * t0, 10.0 * t0)).unwrap();
    assert_eq!(report.regime, DecayRegime::SmallFrequency);
    // V(0) = I - P(xi): idempotency of the complement
    let n = l_xi.dim();
    let v0 = {
        let id = boltzspec::linalg::cidentity(n);
        &id - &pset.total
    };
    let idem = &(&v0 * &v0) - &v0;
    assert!(max_abs(&idem) < 1e-7);
    assert!((report.norms[0] - spectral_norm(&v0)).abs() < 1e-9);
    // exponential decay at a rate consistent with the complementary spectrum
    let comp = slice
        .values
        .iter()
        .filter(|z| z.re <= -A_THRESH)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(report.gamma_fit < 0.0);
    assert!(
        (report.gamma_fit - comp).abs() / comp.abs() < 0.05,
        "fitted {} vs abscissa {}",
        report.gamma_fit,
        comp
    );
    // gamma_fit <= -0.9 a0 (the remainder decays at the gap rate)
    assert!(report.gamma_fit <= -0.9 * sys_gap());
    // commutation residuals
    assert!(report.commutation_residual < 1e-6);
    // pointwise bound on the fitted window
    for (t, v) in report.times.iter().zip(&report.norms) {
        if *t >= report.fit_window.0 && *t <= report.fit_window.1 {
            assert!(*v <= report.c_fit * (report.gamma_fit * t).exp() * (1.0 + 1e-9));
        }
    }
}

fn sys_gap() -> f64 {
    boltzspec::collision::spectral_gap(3, &gaussian_system(3, 4).l).unwrap()
}

#[test]
fn large_frequency_full_decay() {
    let sys = gaussian_system(3, 4);
    let xi = FrequencyPoint::from_polar(1.0, &unit(3, 0)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let abscissa = slice.spectral_abscissa();
    assert!(abscissa < 0.0);
    // the decay at |xi| past the boundary happens on the 1/|abscissa| time
    // scale (the slow hydrodynamic branches are part of the spectrum now),
    // so the grid and fit window are scaled accordingly
    let t1 = 1.0 / abscissa.abs();
    let times: Vec<f64> = (0..=60).map(|i| 0.2 * i as f64 * t1).collect();
    let report =
        large_xi_decay(&sys.l, &sys.v_e1, &xi, 0.3, &times, (2.0 * t1, 10.0 * t1)).unwrap();
    assert_eq!(report.regime, DecayRegime::LargeFrequency);
    assert!(
        (report.gamma_fit - abscissa).abs() / abscissa.abs() < 0.10,
        "fitted {} vs abscissa {abscissa}",
        report.gamma_fit
    );
    // contractivity along a short grid
    let t0 = tau(3);
    let short: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64 * t0).collect();
    let semis = semigroup_on_grid(&l_xi, &short).unwrap();
    for s in &semis {
        assert!(spectral_norm(s) <= 1.0 + 1e-8);
    }
    // below the regime boundary the call is rejected
    let small = FrequencyPoint::from_polar(0.05, &unit(3, 0)).unwrap();
    assert!(large_xi_decay(&sys.l, &sys.v_e1, &small, 0.3, &short, (0.1, 0.5)).is_err());
}

#[test]
fn spectral_level_splitting_exactness() {
    let sys = gaussian_system(3, 4);
    let t0 = tau(3);
    let xi = FrequencyPoint::from_polar(0.15, &unit(3, 0)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let modes = first_order_modes(&sys.basis, &unit(3, 0)).unwrap();
    let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
    let pset = branch_projectors(&slice, &asg, &modes).unwrap();
    let lambdas = branch_eigenvalues(&slice, &asg);
    for &t in &[0.5 * t0, 1.5 * t0, 3.0 * t0] {
        let et = matrix_exponential(&l_xi.values, t).unwrap();
        for ((label, p), (label2, lam)) in pset.branch.iter().zip(&lambdas) {
            assert_eq!(label, label2);
            let lhs = &et * p;
            let rhs = cscale(p, cexp(*lam * t));
            let diff = &lhs - &rhs;
            assert!(
                max_abs(&diff) < 1e-7,
                "{}: intertwining defect {}",
                label.as_str(),
                max_abs(&diff)
            );
        }
    }
}

#[test]
fn resolvent_line_scan_bounds() {
    let sys = gaussian_system(3, 4);
    let xi0 = FrequencyPoint::new(vec![0.0; 3]);
    let l0 = assemble_l_xi(&sys.l, &sys.v_e1, &xi0).unwrap();
    let slice = spectrum(&l0, &xi0).unwrap();
    let taus: Vec<f64> = (-15..=15).map(|i| i as f64).collect();
    // beta = 1: distance one from the spectrum of the normal operator
    let scan = resolvent_line_scan(&l0, &slice.values, 1.0, &taus).unwrap();
    assert!((scan.supremum - 1.0).abs() < 0.1);
    assert!(scan.edges_decreasing);
    // large-|tau| Neumann bound
    let nl = spectral_norm(&l0.values);
    let edge = 2.5 * nl;
    let scan2 = resolvent_line_scan(&l0, &slice.values, 1.0, &[-edge, edge]).unwrap();
    for v in &scan2.norms {
        assert!(*v <= 2.0 / edge);
    }
    // a line through the spectrum is rejected
    assert!(resolvent_line_scan(&l0, &slice.values, 0.0, &taus).is_err());
    // interior line between the hydrodynamic group and the rest: finite sup
    let xi = FrequencyPoint::from_polar(0.1, &unit(3, 0)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let s1 = spectrum(&l_xi, &xi).unwrap();
    let scan3 = resolvent_line_scan(&l_xi, &s1.values, -A_THRESH, &taus).unwrap();
    assert!(scan3.supremum.is_finite() && scan3.supremum > 0.0);
}

#[test]
fn uniform_gap_scan_over_magnitudes() {
    let sys = gaussian_system(3, 4);
    let dirs = vec![unit(3, 0), unit(3, 1), vec![0.6, 0.48, 0.64]];
    let grid: Vec<f64> = (0..=15)
        .map(|i| 0.01 * (500f64).powf(i as f64 / 15.0))
        .collect();
    let scan = gap_uniformity_scan(&sys.basis, &sys.l, &dirs, &grid, A_THRESH, 0.3).unwrap();
    assert!(scan.b_emp > 0.0, "no uniform gap: {}", scan.b_emp);
    assert_eq!(scan.rows.len(), dirs.len() * grid.len());
    // at r -> 0 the non-hydrodynamic abscissa approaches -a0
    let gap = sys_gap_for(&sys.l);
    let tiny = gap_uniformity_scan(&sys.basis, &sys.l, &dirs[..1].to_vec(), &[1e-6], A_THRESH, 0.3)
        .unwrap();
    assert!((tiny.rows[0].abscissa + gap).abs() < 1e-6);
    // the abscissa is even in r -> -r (conjugation symmetry): compare +-r
    let xi_p = FrequencyPoint::from_polar(0.2, &unit(3, 0)).unwrap();
    let xi_m = FrequencyPoint::new(vec![-0.2, 0.0, 0.0]);
    let sp = spectrum(&assemble_l_xi(&sys.l, &sys.v_e1, &xi_p).unwrap(), &xi_p).unwrap();
    let sm = spectrum(&assemble_l_xi(&sys.l, &sys.v_e1, &xi_m).unwrap(), &xi_m).unwrap();
    let ap = sp
        .values
        .iter()
        .filter(|z| z.re <= -A_THRESH)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let am = sm
        .values
        .iter()
        .filter(|z| z.re <= -A_THRESH)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((ap - am).abs() < 1e-10);
}

fn sys_gap_for(l: &boltzspec::collision::OperatorMatrix) -> f64 {
    boltzspec::collision::spectral_gap(3, l).unwrap()
}
