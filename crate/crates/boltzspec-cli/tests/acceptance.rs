//! Acceptance suite: every release criterion of the toolkit, one test per
//! criterion, each printing a PASS line with the measured quantities (run
//! with --nocapture to see them). Tolerances are fixed here and nowhere else.

use boltzspec::basis::{build_basis, collision_invariants, BasisSpec};
use boltzspec::branches::{
    acoustic_speed, branch_eigenvalues, branch_projectors, classify_hydrodynamics,
    first_order_modes, kernel_data, kernel_frame, reduced_operator, second_order_coeffs,
    total_projector_expansion, trace_branches, BranchLabel,
};
use boltzspec::collision::{assemble_l, default_grids, kernel_basis, spectral_gap, OperatorMatrix};
use boltzspec::fourier::{
    assemble_l_xi, assemble_v_projection, contour_projector, spectrum, ContourSpec,
    FrequencyPoint,
};
use boltzspec::linalg::{cabs, cscale, max_abs, subspace_sin, to_complex, CMat, C_ZERO};
use boltzspec::semigroup::{gap_uniformity_scan, splitting_check};
use boltzspec::weighted::{
    assemble_in_ek, assemble_v_in_ek, b_of_q, compare_spectra, k_star, regularization_check,
    surrogate_splitting, Cutoff, EkAssemblyConfig,
};
use faer::complex_native::c64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

const A_THRESH: f64 = 2.0;
const R0: f64 = 0.3;

struct Sys {
    basis: boltzspec::basis::OrthonormalBasis,
    l: OperatorMatrix,
    v_e1: OperatorMatrix,
    assembly_seconds: f64,
}

static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Sys>>> = OnceLock::new();

fn system(d: usize, degree: usize) -> &'static Sys {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(s) = guard.get(&(d, degree)) {
        return s;
    }
    let t = Instant::now();
    let basis = build_basis(&BasisSpec::gaussian(d, degree)).unwrap();
    let (quad, sphere) = default_grids(&basis).unwrap();
    let l = assemble_l(&basis, &quad, &sphere).unwrap();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let v_e1 = assemble_v_projection(&basis, &e1).unwrap();
    let s = Box::leak(Box::new(Sys {
        basis,
        l,
        v_e1,
        assembly_seconds: t.elapsed().as_secs_f64(),
    }));
    guard.insert((d, degree), s);
    s
}

fn e1(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

#[test]
fn criterion_01_kernel_structure() {
    let t = Instant::now();
    let sys = system(3, 6);
    let k = kernel_basis(3, &sys.l).unwrap();
    assert_eq!(k.ncols(), 5, "kernel dimension");
    let inv = to_complex(&collision_invariants(&sys.basis));
    let angle = subspace_sin(&k, &inv).max(subspace_sin(&inv, &k));
    assert!(angle < 1e-6, "principal angle sine {angle:.3e}");
    let elapsed = t.elapsed().as_secs_f64() + sys.assembly_seconds;
    assert!(elapsed < 120.0, "runtime {elapsed:.1}s exceeds 2 minutes");
    println!("criterion 01 PASS: kernel dim 5, angle {angle:.2e}, {elapsed:.1}s");
}

#[test]
fn criterion_02_spectral_gap_bound() {
    let bound = std::f64::consts::PI / (48.0 * (2.0 * std::f64::consts::E).sqrt());
    let mut report = String::new();
    for (d, n) in [(2usize, 6usize), (2, 8), (3, 6), (3, 8)] {
        let sys = system(d, n);
        let gap = spectral_gap(d, &sys.l).unwrap();
        assert!(
            gap >= bound,
            "d={d} N={n}: gap {gap:.6} below the bound {bound:.6}"
        );
        report.push_str(&format!("d={d},N={n}: {gap:.4}; "));
    }
    println!("criterion 02 PASS: gaps {report} all above {bound:.5}");
}

#[test]
fn criterion_03_acoustic_speed() {
    let t = Instant::now();
    for d in [3usize, 2] {
        let sys = system(d, 8);
        let c = acoustic_speed(d);
        // finite-difference slope of Im lambda at r -> 0
        let r = 1e-3;
        let xi = FrequencyPoint::from_polar(r, &e1(d)).unwrap();
        let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
        let slice = spectrum(&l_xi, &xi).unwrap();
        let modes = first_order_modes(&sys.basis, &e1(d)).unwrap();
        let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
        let slope_plus = slice.values[asg.acoustic_plus[0]].im / r;
        let slope_minus = slice.values[asg.acoustic_minus[0]].im / r;
        assert!(
            (slope_plus - c).abs() < 1e-3,
            "d={d}: +slope {slope_plus:.6} vs {c:.6}"
        );
        assert!((slope_minus + c).abs() < 1e-3);
        let expect = if d == 3 { 1.29099 } else { 1.41421 };
        assert!((c - expect).abs() < 1e-5);
    }
    let elapsed = t.elapsed().as_secs_f64() + system(3, 8).assembly_seconds;
    assert!(elapsed < 600.0, "runtime {elapsed:.1}s exceeds 10 minutes");
    println!("criterion 03 PASS: acoustic slopes within 1e-3 at N=8 ({elapsed:.1}s)");
}

#[test]
fn criterion_04_degeneracy_and_first_order_zeros() {
    for d in [2usize, 3] {
        let sys = system(d, 6);
        let r = 1e-3;
        let xi = FrequencyPoint::from_polar(r, &e1(d)).unwrap();
        let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
        let slice = spectrum(&l_xi, &xi).unwrap();
        let modes = first_order_modes(&sys.basis, &e1(d)).unwrap();
        let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
        assert_eq!(asg.shear.len(), d - 1, "shear multiplicity at d={d}");
        let shear_ratio = cabs(slice.values[asg.shear[0]]) / r;
        let entropy_ratio = cabs(slice.values[asg.entropy[0]]) / r;
        assert!(shear_ratio < 1e-3, "d={d}: |lambda_2|/r = {shear_ratio:.2e}");
        assert!(entropy_ratio < 1e-3, "d={d}: |lambda_0|/r = {entropy_ratio:.2e}");
    }
    println!("criterion 04 PASS: shear multiplicity d-1 and vanishing first-order slopes");
}

#[test]
fn criterion_05_second_order_negativity_and_cross_validation() {
    let sys = system(3, 8);
    let kd = kernel_data(3, &sys.l).unwrap();
    let modes = first_order_modes(&sys.basis, &e1(3)).unwrap();
    let so = second_order_coeffs(&sys.v_e1, &kd, &modes).unwrap();
    assert!(so.acoustic_minus < 0.0 && so.entropy < 0.0 && so.acoustic_plus < 0.0 && so.shear < 0.0);
    let grid: Vec<f64> = (0..10)
        .map(|i| 0.01 * (10f64).powf(i as f64 / 9.0))
        .collect();
    let table = trace_branches(&sys.l, &sys.v_e1, &modes, &grid, A_THRESH).unwrap();
    let mut worst = 0.0f64;
    for (curve, fit) in table.curves.iter().zip(&table.fitted_lambda2_re) {
        let formula = so.by_label(curve.label);
        let rel = (fit - formula).abs() / formula.abs();
        worst = worst.max(rel);
    }
    assert!(worst < 1e-2, "fit-vs-formula relative error {worst:.3e}");
    println!(
        "criterion 05 PASS: lambda2 = [{:.5}, {:.5}, {:.5}, {:.5}], max fit deviation {:.2e}",
        so.acoustic_minus, so.entropy, so.acoustic_plus, so.shear, worst
    );
}

#[test]
fn criterion_06_projector_algebra() {
    let sys = system(3, 6);
    let kd = kernel_data(3, &sys.l).unwrap();
    let r = 0.1;
    let xi = FrequencyPoint::from_polar(r, &e1(3)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let modes = first_order_modes(&sys.basis, &e1(3)).unwrap();
    let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
    let pset = branch_projectors(&slice, &asg, &modes).unwrap();
    let mut alg = 0.0f64;
    for (la, pa) in &pset.branch {
        alg = alg.max(max_abs(&(&(pa * pa) - pa)));
        for (lb, pb) in &pset.branch {
            if la != lb {
                alg = alg.max(max_abs(&(pa * pb)));
            }
        }
    }
    assert!(alg < 1e-7, "projector algebra residual {alg:.3e}");
    // zeroth-order projectors sum to the kernel projector
    let mut sum0: Option<CMat> = None;
    for (_, p0) in &pset.branch_zeroth {
        sum0 = Some(match sum0 {
            None => p0.clone(),
            Some(t) => &t + p0,
        });
    }
    let zer = max_abs(&(&sum0.unwrap() - &kd.projector));
    assert!(zer < 1e-7, "zeroth-order sum residual {zer:.3e}");
    // first-order formula with remainder of order >= 1.9
    let grid: Vec<f64> = (0..6)
        .map(|i| 0.01 * (10f64).powf(i as f64 / 5.0))
        .collect();
    let exp = total_projector_expansion(&sys.l, &sys.v_e1, &kd, &e1(3), &grid, A_THRESH).unwrap();
    assert!(exp.fitted_order >= 1.9, "remainder order {:.3}", exp.fitted_order);
    println!(
        "criterion 06 PASS: algebra {alg:.2e}, zeroth sum {zer:.2e}, remainder order {:.2}",
        exp.fitted_order
    );
}

#[test]
fn criterion_07_reduced_operator_equivalence() {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let sys = system(3, 6);
    let kd = kernel_data(3, &sys.l).unwrap();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dir: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm: f64 = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dir: Vec<f64> = dir.iter().map(|x| x / norm).collect();
        let r = 0.02 + (R0 - 0.02) * rng.gen::<f64>();
        let v = assemble_v_projection(&sys.basis, &dir).unwrap();
        let frame = kernel_frame(&sys.basis, &dir).unwrap();
        let xi = FrequencyPoint::from_polar(r, &dir).unwrap();
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).unwrap();
        let slice = spectrum(&l_xi, &xi).unwrap();
        let contour = ContourSpec::circle(C_ZERO, A_THRESH / 2.0);
        let p_xi = contour_projector(&l_xi, &contour, &slice.values).unwrap();
        let red = reduced_operator(&l_xi, &p_xi, &kd, &frame, r).unwrap();
        let scaled = cscale(&red.matrix, c64::new(r, 0.0));
        let eig = boltzspec::linalg::eig_c(&scaled).unwrap();
        let hydro = slice.eigenvalues_above(A_THRESH);
        assert_eq!(hydro.len(), eig.values.len());
        worst = worst.max(boltzspec::linalg::eigenvalue_matching_distance(
            &hydro,
            &eig.values,
        ));
    }
    assert!(worst < 1e-7, "spectrum equivalence residual {worst:.3e}");
    // block structure along e_1
    let r = 0.1;
    let frame = kernel_frame(&sys.basis, &e1(3)).unwrap();
    let xi = FrequencyPoint::from_polar(r, &e1(3)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let contour = ContourSpec::circle(C_ZERO, A_THRESH / 2.0);
    let p_xi = contour_projector(&l_xi, &contour, &slice.values).unwrap();
    let red = reduced_operator(&l_xi, &p_xi, &kd, &frame, r).unwrap();
    let mut off = 0.0f64;
    for i in 0..2 {
        for j in 2..5 {
            off = off.max(cabs(red.matrix[(i, j)])).max(cabs(red.matrix[(j, i)]));
        }
    }
    assert!(off < 1e-7, "block residual {off:.3e}");
    println!("criterion 07 PASS: equivalence {worst:.2e} over 10 draws, block residual {off:.2e}");
}

#[test]
fn criterion_08_semigroup_splitting() {
    let sys = system(3, 6);
    let tau = 1.0 / boltzspec::collision::compute_nu(3, &[0.0, 0.0, 0.0]);
    let r = 0.1;
    let xi = FrequencyPoint::from_polar(r, &e1(3)).unwrap();
    let l_xi = assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap();
    let slice = spectrum(&l_xi, &xi).unwrap();
    let modes = first_order_modes(&sys.basis, &e1(3)).unwrap();
    let asg = classify_hydrodynamics(&slice, A_THRESH, &modes).unwrap();
    let pset = branch_projectors(&slice, &asg, &modes).unwrap();
    let lambdas = branch_eigenvalues(&slice, &asg);
    let times: Vec<f64> = (0..=60).map(|i| 0.2 * i as f64 * tau).collect();
    let report = splitting_check(&l_xi, &pset, &lambdas, &times, (2.0 * tau, 10.0 * tau)).unwrap();
    let comp = slice
        .values
        .iter()
        .filter(|z| z.re <= -A_THRESH)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let rel = (report.gamma_fit - comp).abs() / comp.abs();
    assert!(report.gamma_fit < 0.0, "remainder not decaying");
    assert!(rel < 0.05, "rate {:.4} vs abscissa {comp:.4}", report.gamma_fit);
    assert!(
        report.commutation_residual < 1e-6,
        "commutation residual {:.3e}",
        report.commutation_residual
    );
    println!(
        "criterion 08 PASS: rate {:.3} vs abscissa {comp:.3} ({rel:.1e} rel), commutation {:.1e}",
        report.gamma_fit, report.commutation_residual
    );
}

#[test]
fn criterion_09_uniform_gap_scan() {
    let t = Instant::now();
    let sys = system(3, 6);
    let dirs = vec![e1(3), vec![0.0, 1.0, 0.0], vec![0.6, 0.48, 0.64]];
    let grid: Vec<f64> = (0..=24)
        .map(|i| 0.01 * (500f64).powf(i as f64 / 24.0))
        .collect();
    let scan = gap_uniformity_scan(&sys.basis, &sys.l, &dirs, &grid, A_THRESH, R0).unwrap();
    assert!(scan.b_emp > 0.0, "no uniform gap: b_emp = {}", scan.b_emp);
    let elapsed = t.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "runtime {elapsed:.0}s exceeds 15 minutes");
    println!(
        "criterion 09 PASS: b_emp = {:.4} over r in [0.01, 5] x 3 directions ({elapsed:.1}s)",
        scan.b_emp
    );
}

#[test]
fn criterion_10_enlargement() {
    // threshold exactness
    let k = k_star();
    assert!((k - (0.5 + (1.0 + 73f64.sqrt()) / 2.0)).abs() < 1e-12);
    assert!((b_of_q(k - 0.5) - 1.0).abs() < 1e-12);
    // spectra across spaces at k = 6, r = 0.1, (N_gauss, N_poly) = (8, 10)
    let sys = system(3, 8);
    let pspec = BasisSpec::polynomial(3, 10, 6.0, BasisSpec::required_p(3, 10, 6.0));
    let cfg = EkAssemblyConfig::for_degree(10);
    let ek = assemble_in_ek(&pspec, &cfg).unwrap();
    let dir = e1(3);
    let xi = FrequencyPoint::from_polar(0.1, &dir).unwrap();
    let gs = spectrum(&assemble_l_xi(&sys.l, &sys.v_e1, &xi).unwrap(), &xi).unwrap();
    let vk = assemble_v_in_ek(&ek.basis, &dir).unwrap();
    let ps = spectrum(&assemble_l_xi(&ek.l, &vk, &xi).unwrap(), &xi).unwrap();
    let cmp = compare_spectra(&gs, &ps, 6.0, A_THRESH);
    assert_eq!(cmp.count_gauss, 5);
    assert_eq!(cmp.count_poly, 5, "polynomial-space hydrodynamic count");
    assert!(
        cmp.max_distance < 1e-2,
        "hydrodynamic eigenvalue distance {:.3e}",
        cmp.max_distance
    );
    println!(
        "criterion 10 PASS: k_* exact; 5 pairs matched, max distance {:.2e}",
        cmp.max_distance
    );
}

#[test]
fn criterion_11_surrogate_splitting() {
    let pspec = BasisSpec::polynomial(3, 6, 6.0, BasisSpec::required_p(3, 6, 6.0));
    let cfg = EkAssemblyConfig::for_degree(6);
    let ek = assemble_in_ek(&pspec, &cfg).unwrap();
    let cutoff = Cutoff {
        r_cut: 6.0,
        delta: 0.5,
    };
    let sp = surrogate_splitting(&ek.l, &ek.basis, cutoff, &cfg, 99).unwrap();
    let sum = &sp.a.values + &sp.b.values;
    let drift = max_abs(&(&sum - &ek.l.values));
    assert!(drift == 0.0, "A + B != L exactly: {drift:.2e}");
    assert!(sp.a1_emp > 0.0, "dissipativity margin {:.4}", sp.a1_emp);
    let gauss = build_basis(&BasisSpec::gaussian(3, 6)).unwrap();
    let r1 = regularization_check(&ek.basis, &gauss, cutoff, &cfg, 40, 5).unwrap();
    let r2 = regularization_check(&ek.basis, &gauss, cutoff, &cfg.refined(), 40, 5).unwrap();
    let rel = (r1.c_a - r2.c_a).abs() / r1.c_a;
    assert!(r1.c_a.is_finite() && rel < 0.10, "C_A drift {rel:.3}");
    println!(
        "criterion 11 PASS: exact splitting, a1_emp = {:.4}, C_A = {:.4} (drift {:.2}%)",
        sp.a1_emp,
        r1.c_a,
        100.0 * rel
    );
}

#[test]
fn criterion_12_validate_reference_configs() {
    let t = Instant::now();
    let exe = env!("CARGO_BIN_EXE_boltzspec");
    for d in [2usize, 3] {
        let out = std::process::Command::new(exe)
            .args(["--dim", &d.to_string(), "--degree", "6", "validate"])
            .output()
            .expect("validate runs");
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(
            out.status.success(),
            "validate failed at d={d}:\n{stdout}\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(stdout.contains("0 failed"), "d={d}: {stdout}");
    }
    let elapsed = t.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "validate runtime {elapsed:.0}s exceeds 10 minutes");
    println!("criterion 12 PASS: validate clean at d=2 and d=3, N=6 ({elapsed:.1}s)");
}
