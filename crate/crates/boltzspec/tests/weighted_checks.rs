//! The E(k) discretization against the Gaussian one: cross-validation of the
//! quadrature routes on the Gaussian basis, the enlargement comparison, the
//! surrogate splitting and its regularization/dissipativity structure.

mod common;

use boltzspec::basis::{build_basis, BasisSpec};
use boltzspec::collision::gain_part;
use boltzspec::fourier::{assemble_l_xi, spectrum, FrequencyPoint};
use boltzspec::linalg::{cabs, max_abs, real_part};
use boltzspec::weighted::{
    assemble_in_ek, assemble_v_in_ek, compare_spectra, dissipativity_scan_b_xi, gain_form,
    hermitian_abscissa, lossex_form, regularization_check, surrogate_splitting, Cutoff,
    EkAssemblyConfig, TestSide,
};
use common::{gaussian_system, unit};
use faer::Mat;

#[test]
fn quadrature_routes_reproduce_the_exact_gain_part_d2() {
    // On the Gaussian basis the gain and loss-exchange routes must agree with
    // K = L + nu from the exact assembly; this pins all constants in the
    // E(k) machinery.
    let sys = gaussian_system(2, 4);
    let k_exact = gain_part(&sys.l, &sys.nu).unwrap();
    let cfg = EkAssemblyConfig::for_degree(4);
    let gain = gain_form(&sys.basis, TestSide::GaussianE(&sys.basis), None, &cfg).unwrap();
    let lossex = lossex_form(&sys.basis, TestSide::GaussianE(&sys.basis), None, &cfg).unwrap();
    let n = sys.basis.len();
    let k_routes = Mat::<f64>::from_fn(n, n, |j, i| gain[(j, i)] - lossex[(j, i)]);
    let k_ref = real_part(&k_exact.values);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((k_routes[(j, i)] - k_ref[(j, i)]).abs());
        }
    }
    assert!(
        worst < 2e-6,
        "route-vs-exact gain disagreement {worst:.3e}"
    );
}

#[test]
fn quadrature_routes_reproduce_the_exact_gain_part_d3() {
    let sys = gaussian_system(3, 4);
    let k_exact = gain_part(&sys.l, &sys.nu).unwrap();
    let cfg = EkAssemblyConfig::for_degree(4);
    let gain = gain_form(&sys.basis, TestSide::GaussianE(&sys.basis), None, &cfg).unwrap();
    let lossex = lossex_form(&sys.basis, TestSide::GaussianE(&sys.basis), None, &cfg).unwrap();
    let n = sys.basis.len();
    let k_ref = real_part(&k_exact.values);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((gain[(j, i)] - lossex[(j, i)] - k_ref[(j, i)]).abs());
        }
    }
    assert!(worst < 5e-6, "route-vs-exact gain disagreement {worst:.3e}");
}

#[test]
fn ek_assembly_structure_d2() {
    let spec = BasisSpec::polynomial(2, 6, 6.0, BasisSpec::required_p(2, 6, 6.0));
    let cfg = EkAssemblyConfig::for_degree(6);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    assert!(ek.gram_residual < 1e-10);
    // near-kernel of dimension d+2 at frequency zero
    let eig = boltzspec::linalg::eig_c(&ek.l.values).unwrap();
    let near = eig.values.iter().filter(|z| cabs(**z) < 1e-3).count();
    assert_eq!(near, 4);
    // non-Hermitian by design
    let adj = boltzspec::linalg::adjoint_c(&ek.l.values);
    let asym = max_abs(&(&ek.l.values - &adj));
    assert!(asym > 1e-6, "E(k) matrix unexpectedly Hermitian");
    // Gaussian-weight spec is rejected
    assert!(assemble_in_ek(&BasisSpec::gaussian(2, 6), &cfg).is_err());
}

#[test]
fn enlargement_comparison_d2() {
    // the two discretizations see the same hydrodynamic group
    let sys = gaussian_system(2, 6);
    let spec = BasisSpec::polynomial(2, 8, 6.0, BasisSpec::required_p(2, 8, 6.0));
    let cfg = EkAssemblyConfig::for_degree(8);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    let dir = unit(2, 0);
    let r = 0.1;
    let xi = FrequencyPoint::from_polar(r, &dir).unwrap();
    let gs = spectrum(&assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap(), &xi).unwrap();
    let vk = assemble_v_in_ek(&ek.basis, &dir).unwrap();
    let ps = spectrum(&assemble_l_xi(&ek.l, &vk, &xi).unwrap(), &xi).unwrap();
    let a = 2.0;
    let cmp = compare_spectra(&gs, &ps, 6.0, a);
    assert_eq!(cmp.count_gauss, 4);
    assert_eq!(cmp.count_poly, 4, "poly hydrodynamic group size {}", cmp.count_poly);
    assert!(
        cmp.max_distance < 1e-2,
        "enlargement distance {:.3e}",
        cmp.max_distance
    );
}

#[test]
fn surrogate_splitting_limits_and_margin_d2() {
    let spec = BasisSpec::polynomial(2, 6, 6.0, BasisSpec::required_p(2, 6, 6.0));
    let cfg = EkAssemblyConfig::for_degree(6);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    // saturating cutoff recovers A = K (gain - exchange) exactly: with the
    // cutoff identically one, the assemblies coincide term by term
    let wide = Cutoff {
        r_cut: 1e6,
        delta: 1.0,
    };
    let sp_wide = surrogate_splitting(&ek.l, &ek.basis, wide, &cfg, 7).unwrap();
    let gain = gain_form(&ek.basis, TestSide::Ek(&ek.basis), None, &cfg).unwrap();
    let lossex = lossex_form(&ek.basis, TestSide::Ek(&ek.basis), None, &cfg).unwrap();
    let n = ek.basis.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = gain[(j, i)] - lossex[(j, i)];
            worst = worst.max((sp_wide.a.values[(j, i)].re - expect).abs());
        }
    }
    assert!(worst < 1e-12, "wide cutoff does not recover the gain part: {worst:.2e}");
    // A + B = L exactly
    let sum = &sp_wide.a.values + &sp_wide.b.values;
    assert!(max_abs(&(&sum - &ek.l.values)) == 0.0);
    // with the wide cutoff, B = -nu mass: dissipative with a large margin
    assert!(sp_wide.a1_emp > 1.0);
    // tuned cutoff still yields a positive margin
    let tuned = Cutoff {
        r_cut: 6.0,
        delta: 0.5,
    };
    let sp = surrogate_splitting(&ek.l, &ek.basis, tuned, &cfg, 7).unwrap();
    assert!(sp.a1_emp > 0.0, "dissipativity margin {}", sp.a1_emp);
    // vanishing cutoff kills A
    let zero = Cutoff {
        r_cut: 1e-12,
        delta: 1e-12,
    };
    let sp0 = surrogate_splitting(&ek.l, &ek.basis, zero, &cfg, 7).unwrap();
    assert!(max_abs(&sp0.a.values) < 1e-10);
}

#[test]
fn truncated_entries_vanish_beyond_cutoff() {
    // basis pairs concentrated beyond r_cut + 3 delta see a vanishing A; use
    // the regularization cross matrix against high-degree Hermite rows as a
    // probe of the image support
    let spec = BasisSpec::polynomial(2, 5, 6.0, BasisSpec::required_p(2, 5, 6.0));
    let cfg = EkAssemblyConfig::for_degree(5);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    let cutoff = Cutoff {
        r_cut: 3.0,
        delta: 0.5,
    };
    let gauss = build_basis(&BasisSpec::gaussian(2, 5)).unwrap();
    let rep = regularization_check(&ek.basis, &gauss, cutoff, &cfg, 30, 11).unwrap();
    assert!(rep.c_a.is_finite() && rep.c_a > 0.0);
}

#[test]
fn regularization_constant_stability() {
    let spec = BasisSpec::polynomial(2, 5, 6.0, BasisSpec::required_p(2, 5, 6.0));
    let cfg = EkAssemblyConfig::for_degree(5);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    let cutoff = Cutoff {
        r_cut: 6.0,
        delta: 0.5,
    };
    let gauss = build_basis(&BasisSpec::gaussian(2, 5)).unwrap();
    let r1 = regularization_check(&ek.basis, &gauss, cutoff, &cfg, 40, 3).unwrap();
    let r2 = regularization_check(&ek.basis, &gauss, cutoff, &cfg.refined(), 40, 3).unwrap();
    let rel = (r1.c_a - r2.c_a).abs() / r1.c_a;
    assert!(rel < 0.10, "C_A drift {} under refinement", rel);
}

#[test]
fn dissipativity_margins_across_frequencies() {
    let spec = BasisSpec::polynomial(2, 5, 6.0, BasisSpec::required_p(2, 5, 6.0));
    let cfg = EkAssemblyConfig::for_degree(5);
    let ek = assemble_in_ek(&spec, &cfg).unwrap();
    let cutoff = Cutoff {
        r_cut: 6.0,
        delta: 0.5,
    };
    let sp = surrogate_splitting(&ek.l, &ek.basis, cutoff, &cfg, 7).unwrap();
    let vk = assemble_v_in_ek(&ek.basis, &unit(2, 0)).unwrap();
    let scan = dissipativity_scan_b_xi(&sp.b, &vk, &[0.0, 0.5, 1.0, 2.0], 200, 13).unwrap();
    // the margin at xi = 0 matches the surrogate's (same definition and seed
    // give a scan of the same quadratic form)
    assert!(scan.margins[0] > 0.0);
    let m0 = scan.margins[0];
    for m in &scan.margins {
        assert!((m - m0).abs() / m0 < 0.10, "margins {:?}", scan.margins);
    }
    // the skew shift does not move the exact Hermitian abscissa (V symmetric)
    let n = sp.b.dim();
    let shifted = Mat::from_fn(n, n, |i, j| {
        let bv = sp.b.values[(i, j)];
        let vv = vk.values[(i, j)];
        faer::complex_native::c64::new(bv.re + 0.7 * vv.im, bv.im - 0.7 * vv.re)
    });
    let drift = (hermitian_abscissa(&shifted) - hermitian_abscissa(&sp.b.values)).abs();
    assert!(drift < 1e-10);
}
