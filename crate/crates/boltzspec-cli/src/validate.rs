//! The `validate` subcommand: runs every structural invariant of the toolkit
//! at the configured dimension and degree, printing one pass/fail line per
//! named property. Exit code 1 if anything fails.

use crate::commands::{build_system, e1};
use crate::config::RunConfig;
use crate::CmdError;
use boltzspec::basis::{build_basis, collision_invariants, BasisSpec};
use boltzspec::branches::{
    branch_eigenvalues, branch_projectors, classify_hydrodynamics, ek_surrogate_gram,
    eigentriple_expansion, first_order_modes, kato_transform, kernel_data, kernel_frame,
    reduced_operator, second_order_coeffs, total_projector_expansion, trace_branches,
};
use boltzspec::collision::{
    estimate_nu_bounds, gain_part, kernel_basis, rotation_equivariance_check,
    assemble_nu_multiplier, SignedPermutation,
};
use boltzspec::fourier::{
    assemble_l_xi, assemble_v_projection, contour_projector, eigenvalue_confinement_scan,
    resolvent, spectrum, ContourSpec, FrequencyPoint,
};
use boltzspec::linalg::{
    adjoint_c, cabs, cidentity, cscale, eigh_c, max_abs, spectral_norm, subspace_sin,
    to_complex, C_ZERO,
};
use boltzspec::quadrature::QuadratureGrid;
use boltzspec::semigroup::{
    gap_uniformity_scan, large_xi_decay, matrix_exponential, resolvent_line_scan,
    semigroup_on_grid, splitting_check,
};
use boltzspec::weighted::{
    assemble_in_ek, assemble_v_in_ek, b_of_q, compare_spectra, dissipativity_scan_b_xi,
    hermitian_abscissa, k_star, numerical_range_abscissa, regularization_check,
    surrogate_splitting, weight_conversion_residual, Cutoff, EkAssemblyConfig,
};
use faer::complex_native::c64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::process::ExitCode;
use std::time::Instant;

struct Reporter {
    failures: usize,
    checks: usize,
}

impl Reporter {
    fn new() -> Reporter {
        Reporter {
            failures: 0,
            checks: 0,
        }
    }

    fn check(&mut self, name: &str, outcome: Result<String, String>) {
        self.checks += 1;
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                self.failures += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<String, String>) {
        let t = Instant::now();
        let outcome = f();
        let dt = t.elapsed().as_secs_f64();
        self.checks += 1;
        match outcome {
            Ok(detail) => println!("PASS  {name} ({dt:.1}s): {detail}"),
            Err(reason) => {
                self.failures += 1;
                println!("FAIL  {name} ({dt:.1}s): {reason}");
            }
        }
    }
}

fn ok(detail: impl Into<String>) -> Result<String, String> {
    Ok(detail.into())
}

fn ensure(cond: bool, detail: String, reason: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(reason)
    }
}

pub fn run(cfg: &RunConfig) -> Result<ExitCode, CmdError> {
    let d = cfg.dimension;
    let mut rep = Reporter::new();
    println!(
        "validate: dimension {d}, degree {}, seed {}",
        cfg.degree, cfg.seed
    );

    // --- velocity basis ---------------------------------------------------
    let basis = build_basis(&cfg.gaussian_spec()).map_err(|e| CmdError::Config(e.to_string()))?;
    rep.run("basis Gram orthonormality (Gaussian weight)", || {
        let resid = basis.gram_residual().map_err(|e| e.to_string())?;
        ensure(
            resid < 1e-10,
            format!("max |G - I| = {resid:.2e}"),
            format!("Gram residual {resid:.2e} above 1e-10"),
        )
    });
    rep.run("collision invariants representable in the trial space", || {
        // project and re-expand the d+2 invariants: coefficients are exact
        let inv = collision_invariants(&basis);
        let mut worst = 0.0f64;
        for col in 0..d + 2 {
            let norm: f64 = (0..basis.len())
                .map(|i| inv[(i, col)] * inv[(i, col)])
                .sum::<f64>()
                .sqrt();
            worst = worst.max((norm - 1.0).abs());
        }
        ensure(
            worst < 1e-12,
            format!("normalization drift {worst:.2e}"),
            format!("invariant normalization drift {worst:.2e}"),
        )
    });
    rep.run("quadrature consistency under refinement", || {
        let qa = QuadratureGrid::build(d, cfg.degree + 3).map_err(|e| e.to_string())?;
        let qb = QuadratureGrid::build(d, cfg.degree + 7).map_err(|e| e.to_string())?;
        let fa = basis.factor_matrix(&qa.nodes);
        let fb = basis.factor_matrix(&qb.nodes);
        let n = basis.len();
        let gram = |f: &boltzspec::linalg::RMat, w: &[f64]| {
            let mut fw = f.clone();
            for (q, &wq) in w.iter().enumerate() {
                for i in 0..n {
                    fw[(q, i)] *= wq;
                }
            }
            f.transpose() * &fw
        };
        let ga = gram(&fa, &qa.weights);
        let gb = gram(&fb, &qb.weights);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((ga[(i, j)] - gb[(i, j)]).abs());
            }
        }
        ensure(
            worst < 1e-10,
            format!("two orders agree to {worst:.2e}"),
            format!("inner products drift {worst:.2e} between orders"),
        )
    });

    // --- collision operator -----------------------------------------------
    let sys = build_system(cfg)?;
    let n = sys.l.dim();
    let quad = QuadratureGrid::build(d, cfg.effective_quad_order()).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let nu_m = assemble_nu_multiplier(&basis, &quad).map_err(|e| CmdError::Runtime(e.to_string()))?;
    rep.run("collision frequency bounds on a speed grid", || {
        let speeds: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let b = estimate_nu_bounds(d, &speeds).map_err(|e| e.to_string())?;
        ensure(
            b.nu0 > 0.0 && b.nu1.is_finite() && b.nu1 > b.nu0,
            format!("nu0 = {:.4}, nu1 = {:.4}", b.nu0, b.nu1),
            "collision frequency bounds are not ordered and positive".into(),
        )
    });
    rep.check("self-adjointness of L in the E pairing", {
        let adj = adjoint_c(&sys.l.values);
        let diff = &sys.l.values - &adj;
        let rel = max_abs(&diff) / max_abs(&sys.l.values);
        ensure(
            rel < 1e-8,
            format!("relative asymmetry {rel:.2e}"),
            format!("asymmetry {rel:.2e} above 1e-8"),
        )
    });
    rep.check("negative semidefiniteness of L", {
        let (vals, _) = eigh_c(&sys.l.values);
        let top = *vals.last().unwrap();
        ensure(
            top <= 1e-8,
            format!("largest eigenvalue {top:.2e}"),
            format!("largest eigenvalue {top:.2e} above 1e-8"),
        )
    });
    rep.run("kernel dimension and span", || {
        let k = kernel_basis(d, &sys.l).map_err(|e| e.to_string())?;
        let inv = to_complex(&collision_invariants(&basis));
        let angle = subspace_sin(&k, &inv).max(subspace_sin(&inv, &k));
        ensure(
            k.ncols() == d + 2 && angle < 1e-6,
            format!("dimension {} with principal-angle sine {angle:.2e}", k.ncols()),
            format!("kernel dimension {} or angle {angle:.2e} out of spec", k.ncols()),
        )
    });
    rep.check("spectral gap above the hard-sphere lower bound", {
        let bound = std::f64::consts::PI / (48.0 * (2.0 * std::f64::consts::E).sqrt());
        ensure(
            sys.gap >= bound,
            format!("gap {:.4} >= {bound:.5}", sys.gap),
            format!("gap {:.5} below {bound:.5}", sys.gap),
        )
    });
    rep.run("conservation: L annihilates the collision invariants", || {
        let inv = collision_invariants(&basis);
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x11);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let g: Vec<c64> = (0..n)
                .map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let norm: f64 = g.iter().map(|z| cabs(*z).powi(2)).sum::<f64>().sqrt();
            for col in 0..d + 2 {
                let mut ip = C_ZERO;
                for j in 0..n {
                    for i in 0..n {
                        ip += sys.l.values[(i, j)] * g[j] * c64::new(inv[(i, col)], 0.0);
                    }
                }
                worst = worst.max(cabs(ip) / norm);
            }
        }
        ensure(
            worst < 1e-8,
            format!("max moment leak {worst:.2e}"),
            format!("moment leak {worst:.2e} above 1e-8"),
        )
    });
    rep.run("coercivity on the kernel complement", || {
        let kd = kernel_data(d, &sys.l).map_err(|e| e.to_string())?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x13);
        let mut worst_ratio = f64::NEG_INFINITY;
        for _ in 0..50 {
            let mut g: Vec<c64> = (0..n)
                .map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            for col in 0..d + 2 {
                let mut ip = C_ZERO;
                for i in 0..n {
                    ip += g[i] * kd.kernel[(i, col)].conj();
                }
                for i in 0..n {
                    g[i] -= ip * kd.kernel[(i, col)];
                }
            }
            let norm2: f64 = g.iter().map(|z| cabs(*z).powi(2)).sum();
            let mut quad = C_ZERO;
            for j in 0..n {
                for i in 0..n {
                    quad += sys.l.values[(i, j)] * g[j] * g[i].conj();
                }
            }
            worst_ratio = worst_ratio.max(quad.re / norm2);
        }
        ensure(
            worst_ratio <= -sys.gap + 1e-8,
            format!("max Rayleigh quotient {worst_ratio:.4} vs gap {:.4}", sys.gap),
            format!("coercivity violated: {worst_ratio:.5}"),
        )
    });
    rep.check("splitting consistency L = -nu + K", {
        let k = gain_part(&sys.l, &nu_m).map_err(|e| CmdError::Runtime(e.to_string()))?;
        let sum = &sys.l.values + &nu_m.values;
        let diff = &k.values - &sum;
        let inv = to_complex(&collision_invariants(&basis));
        let ka = &k.values * &inv;
        let na = &nu_m.values * &inv;
        let kernel_action = max_abs(&(&ka - &na));
        ensure(
            max_abs(&diff) == 0.0 && kernel_action < 1e-8,
            format!("exact recomposition; kernel action drift {kernel_action:.2e}"),
            format!("splitting drift {} / {kernel_action:.2e}", max_abs(&diff)),
        )
    });
    rep.run("rotation equivariance under signed permutations", || {
        let mut worst = 0.0f64;
        let swaps = [SignedPermutation::swap(d, 0, 1), SignedPermutation::reflect(d, 0)];
        for map in &swaps {
            worst = worst.max(
                rotation_equivariance_check(&basis, &sys.l, map).map_err(|e| e.to_string())?,
            );
        }
        ensure(
            worst < 1e-8,
            format!("max residual {worst:.2e}"),
            format!("equivariance residual {worst:.2e} above 1e-8"),
        )
    });

    // --- Fourier modes ------------------------------------------------------
    let dir = e1(d);
    let v = assemble_v_projection(&basis, &dir).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let modes = first_order_modes(&basis, &dir).map_err(|e| CmdError::Runtime(e.to_string()))?;
    rep.run("dissipativity of the Fourier modes", || {
        let mut worst = f64::NEG_INFINITY;
        for &r in &[0.0, 0.05, 0.3, 1.0, 3.0] {
            let xi = FrequencyPoint::new(dir.iter().map(|x| x * r).collect());
            let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
            let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
            worst = worst.max(slice.spectral_abscissa());
        }
        ensure(
            worst <= 1e-8,
            format!("max Re over scanned spectra {worst:.2e}"),
            format!("eigenvalue with positive real part {worst:.2e}"),
        )
    });
    rep.run("conjugation symmetry of opposite frequencies", || {
        let r = 0.2;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let mxi = FrequencyPoint::new(dir.iter().map(|x| -x * r).collect());
        let sa = spectrum(&assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?, &xi)
            .map_err(|e| e.to_string())?;
        let sb = spectrum(&assemble_l_xi(&sys.l, &v, &mxi).map_err(|e| e.to_string())?, &mxi)
            .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for za in &sa.values {
            let best = sb
                .values
                .iter()
                .map(|zb| cabs(*zb - za.conj()))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        ensure(
            worst < 1e-8,
            format!("elementwise conjugate match {worst:.2e}"),
            format!("conjugation symmetry violated by {worst:.2e}"),
        )
    });
    rep.run("rotation covariance of the spectrum", || {
        // spectra along e_1 and e_2 coincide
        let dir2 = {
            let mut e = vec![0.0; d];
            e[1] = 1.0;
            e
        };
        let v2 = assemble_v_projection(&basis, &dir2).map_err(|e| e.to_string())?;
        let r = 0.2;
        let xi1 = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let xi2 = FrequencyPoint::from_polar(r, &dir2).map_err(|e| e.to_string())?;
        let s1 = spectrum(&assemble_l_xi(&sys.l, &v, &xi1).map_err(|e| e.to_string())?, &xi1)
            .map_err(|e| e.to_string())?;
        let s2 = spectrum(&assemble_l_xi(&sys.l, &v2, &xi2).map_err(|e| e.to_string())?, &xi2)
            .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for za in &s1.values {
            let best = s2
                .values
                .iter()
                .map(|zb| cabs(*zb - *za))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        ensure(
            worst < 1e-8,
            format!("spectra match to {worst:.2e}"),
            format!("direction covariance violated by {worst:.2e}"),
        )
    });
    rep.run("resolvent norm at a unit shift of the equilibrium operator", || {
        let xi0 = FrequencyPoint::new(vec![0.0; d]);
        let l0 = assemble_l_xi(&sys.l, &v, &xi0).map_err(|e| e.to_string())?;
        let slice = spectrum(&l0, &xi0).map_err(|e| e.to_string())?;
        let r = resolvent(&l0, c64::new(1.0, 0.0), &slice.values).map_err(|e| e.to_string())?;
        let norm = spectral_norm(&r);
        ensure(
            (norm - 1.0).abs() < 0.1,
            format!("||R(1)|| = {norm:.6}"),
            format!("normal-operator resolvent identity violated: {norm:.4}"),
        )
    });
    rep.run("resolvent continuity via the perturbation series", || {
        // truncated Neumann series around (lambda0, xi0) = (1, 0) against the
        // direct solve at |xi| = 0.01
        let xi0 = FrequencyPoint::new(vec![0.0; d]);
        let l0 = assemble_l_xi(&sys.l, &v, &xi0).map_err(|e| e.to_string())?;
        let s0 = spectrum(&l0, &xi0).map_err(|e| e.to_string())?;
        let r0 = resolvent(&l0, c64::new(1.0, 0.0), &s0.values).map_err(|e| e.to_string())?;
        let r = 0.01;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let s1 = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let direct = resolvent(&l_xi, c64::new(1.0, 0.0), &s1.values).map_err(|e| e.to_string())?;
        // series: R = R0 sum_n [i v.(xi0 - xi) R0]^n with xi0 - xi = -xi
        let step = cscale(&(&v.values * &r0), c64::new(0.0, -r));
        let mut acc = cidentity(n);
        let mut term = cidentity(n);
        for _ in 0..8 {
            term = &term * &step;
            acc = &acc + &term;
        }
        let series = &r0 * &acc;
        let diff = &series - &direct;
        let resid = max_abs(&diff);
        ensure(
            resid < 1e-6,
            format!("8-term series agrees to {resid:.2e}"),
            format!("series residual {resid:.2e} above 1e-6"),
        )
    });
    rep.run("projector algebra over disjoint contours", || {
        let r = 0.1;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let c1 = ContourSpec::circle(C_ZERO, sys.a / 2.0);
        let p1 = contour_projector(&l_xi, &c1, &slice.values).map_err(|e| e.to_string())?;
        // second contour around the leftmost eigenvalue cluster
        let leftmost = slice.values.last().copied().unwrap();
        let c2 = ContourSpec::circle(leftmost, sys.a / 4.0);
        let p2 = contour_projector(&l_xi, &c2, &slice.values).map_err(|e| e.to_string())?;
        let prod = max_abs(&(&p1 * &p2));
        ensure(
            prod < 1e-7,
            format!("||P1 P2|| = {prod:.2e}"),
            format!("disjoint-contour product {prod:.2e} above 1e-7"),
        )
    });
    rep.run("only the hydrodynamic group approaches the imaginary axis", || {
        for &r in &[0.05, 0.15, 0.3] {
            let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
            let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
            let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
            let near = slice.values.iter().filter(|z| z.re > -1e-6).count();
            if near != d + 2 {
                return Err(format!("{near} eigenvalues near the axis at r = {r}"));
            }
        }
        ok("exactly d+2 eigenvalues near the axis at all scanned r")
    });
    rep.run("eigenvalue confinement |lambda| <= M |xi|", || {
        let grid: Vec<f64> = (1..=10).map(|i| 0.03 * i as f64).collect();
        let scan = eigenvalue_confinement_scan(&sys.l, &v, &grid, sys.a)
            .map_err(|e| e.to_string())?;
        ensure(
            scan.m_conf.is_finite() && scan.m_conf < 10.0,
            format!("M = {:.4}", scan.m_conf),
            format!("confinement constant {:.3} not plausible", scan.m_conf),
        )
    });

    // --- hydrodynamic branches ---------------------------------------------
    let kd = kernel_data(d, &sys.l).map_err(|e| CmdError::Runtime(e.to_string()))?;
    rep.run("reduced-operator spectrum equivalence", || {
        let frame = kernel_frame(&basis, &dir).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for &r in &[0.05, 0.2] {
            let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
            let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
            let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
            let contour = ContourSpec::circle(C_ZERO, sys.a / 2.0);
            let p_xi = contour_projector(&l_xi, &contour, &slice.values).map_err(|e| e.to_string())?;
            let red = reduced_operator(&l_xi, &p_xi, &kd, &frame, r).map_err(|e| e.to_string())?;
            let scaled = cscale(&red.matrix, c64::new(r, 0.0));
            let eig = boltzspec::linalg::eig_c(&scaled).map_err(|e| e.to_string())?;
            let hydro = slice.eigenvalues_above(sys.a);
            if hydro.len() != eig.values.len() {
                return Err(format!("group sizes differ at r = {r}"));
            }
            worst = worst.max(boltzspec::linalg::eigenvalue_matching_distance(
                &hydro,
                &eig.values,
            ));
        }
        ensure(
            worst < 1e-7,
            format!("max eigenvalue distance {worst:.2e}"),
            format!("spectrum equivalence violated by {worst:.2e}"),
        )
    });
    rep.run("direction covariance of the branch tables", || {
        let grid = vec![0.05, 0.1, 0.2];
        let mk = |dirv: Vec<f64>| -> Result<Vec<c64>, String> {
            let vv = assemble_v_projection(&basis, &dirv).map_err(|e| e.to_string())?;
            let mm = first_order_modes(&basis, &dirv).map_err(|e| e.to_string())?;
            let t = trace_branches(&sys.l, &vv, &mm, &grid, sys.a).map_err(|e| e.to_string())?;
            Ok(t
                .curves
                .iter()
                .flat_map(|c| (0..grid.len()).map(|i| c.value(i)).collect::<Vec<_>>())
                .collect())
        };
        let mut d1 = vec![0.0; d];
        d1[0] = 0.6;
        d1[1] = -0.8;
        let mut d2 = vec![0.0; d];
        d2[0] = 1.0 / (2f64).sqrt();
        d2[1] = 1.0 / (2f64).sqrt();
        let t1 = mk(d1)?;
        let t2 = mk(d2)?;
        let worst = t1
            .iter()
            .zip(&t2)
            .map(|(a, b)| cabs(*a - *b))
            .fold(0.0f64, f64::max);
        ensure(
            worst < 1e-7,
            format!("branch tables agree to {worst:.2e}"),
            format!("branch tables differ by {worst:.2e}"),
        )
    });
    rep.run("total projector expansion with the reduced-resolvent formula", || {
        let grid: Vec<f64> = (0..6)
            .map(|i| 0.01 * (10f64).powf(i as f64 / 5.0))
            .collect();
        let exp = total_projector_expansion(&sys.l, &v, &kd, &dir, &grid, sys.a)
            .map_err(|e| e.to_string())?;
        let sandwich = max_abs(&(&(&exp.p0 * &exp.p1) * &exp.p0));
        ensure(
            exp.fitted_order > 1.9 && sandwich < 1e-8,
            format!(
                "remainder order {:.3}, P0 P1 P0 = {sandwich:.2e}",
                exp.fitted_order
            ),
            format!("expansion order {:.3} or sandwich {sandwich:.2e} out of spec", exp.fitted_order),
        )
    });
    rep.run("branch negativity and reality", || {
        let grid: Vec<f64> = (1..=10).map(|i| 0.03 * i as f64).collect();
        let table = trace_branches(&sys.l, &v, &modes, &grid, sys.a).map_err(|e| e.to_string())?;
        for curve in &table.curves {
            for (i, &re) in curve.re.iter().enumerate() {
                if re >= 0.0 {
                    return Err(format!("{} has Re >= 0 at r = {}", curve.label.as_str(), grid[i]));
                }
            }
            match curve.label {
                boltzspec::branches::BranchLabel::Entropy
                | boltzspec::branches::BranchLabel::Shear => {
                    let worst = curve.im.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
                    if worst > 1e-8 {
                        return Err(format!("{} not real: {worst:.2e}", curve.label.as_str()));
                    }
                }
                _ => {}
            }
        }
        ok("all branches strictly decaying; real branches real")
    });
    rep.run("pairing isomorphism maps the kernel onto the deformed range", || {
        let r = 0.15;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let contour = ContourSpec::circle(C_ZERO, sys.a / 2.0);
        let p_xi = contour_projector(&l_xi, &contour, &slice.values).map_err(|e| e.to_string())?;
        let u = kato_transform(&kd.projector, &p_xi).map_err(|e| e.to_string())?;
        let uk = &u * &kd.kernel;
        let uk_on = boltzspec::linalg::gram_schmidt_twice(&uk);
        let pk = &p_xi * &kd.kernel;
        let pk_on = boltzspec::linalg::gram_schmidt_twice(&pk);
        let angle = subspace_sin(&uk_on, &pk_on).max(subspace_sin(&pk_on, &uk_on));
        ensure(
            angle < 1e-7,
            format!("subspace angle sine {angle:.2e}"),
            format!("pairing transform angle {angle:.2e} above 1e-7"),
        )
    });
    rep.run("second-order coefficients negative with conjugate symmetry", || {
        let so = second_order_coeffs(&v, &kd, &modes).map_err(|e| e.to_string())?;
        let all_neg = so.acoustic_minus < 0.0
            && so.entropy < 0.0
            && so.acoustic_plus < 0.0
            && so.shear < 0.0;
        let sym = (so.acoustic_minus - so.acoustic_plus).abs();
        ensure(
            all_neg && sym < 1e-8,
            format!(
                "lambda2 = [{:.5}, {:.5}, {:.5}, {:.5}]",
                so.acoustic_minus, so.entropy, so.acoustic_plus, so.shear
            ),
            format!("negativity or conjugate symmetry violated (sym {sym:.2e})"),
        )
    });
    rep.run("branch curvature matches the quadratic-form formula", || {
        let so = second_order_coeffs(&v, &kd, &modes).map_err(|e| e.to_string())?;
        let grid: Vec<f64> = (0..10)
            .map(|i| 0.01 * (10f64).powf(i as f64 / 9.0))
            .collect();
        let table = trace_branches(&sys.l, &v, &modes, &grid, sys.a).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for (curve, fit) in table.curves.iter().zip(&table.fitted_lambda2_re) {
            let formula = so.by_label(curve.label);
            worst = worst.max((fit - formula).abs() / formula.abs());
        }
        ensure(
            worst < 1e-2,
            format!("max relative deviation {worst:.2e}"),
            format!("fit-vs-formula deviation {worst:.2e} above 1%"),
        )
    });
    rep.run("eigentriple biorthogonality and convergence", || {
        let wk = ek_surrogate_gram(&basis, cfg.weight_k).map_err(|e| e.to_string())?;
        let grid: Vec<f64> = (0..5)
            .map(|i| 0.01 * (10f64).powf(i as f64 / 4.0))
            .collect();
        let exp = eigentriple_expansion(&sys.l, &v, &modes, &wk, &grid, sys.a)
            .map_err(|e| e.to_string())?;
        if exp.biorthogonality_residual >= 1e-7 {
            return Err(format!(
                "biorthogonality residual {:.2e}",
                exp.biorthogonality_residual
            ));
        }
        for (label, member, _, order) in &exp.rows {
            if !(0.9..=1.1).contains(order) {
                return Err(format!(
                    "{} member {member} expansion order {order:.3}",
                    label.as_str()
                ));
            }
        }
        ok(format!(
            "biorthogonality {:.2e}; all first-order expansion orders in [0.9, 1.1]",
            exp.biorthogonality_residual
        ))
    });
    rep.run("block structure of the reduced operator along e_1", || {
        let frame = kernel_frame(&basis, &dir).map_err(|e| e.to_string())?;
        let r = 0.1;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let contour = ContourSpec::circle(C_ZERO, sys.a / 2.0);
        let p_xi = contour_projector(&l_xi, &contour, &slice.values).map_err(|e| e.to_string())?;
        let red = reduced_operator(&l_xi, &p_xi, &kd, &frame, r).map_err(|e| e.to_string())?;
        let m = &red.matrix;
        let mut off = 0.0f64;
        for i in 0..d - 1 {
            for j in d - 1..d + 2 {
                off = off.max(cabs(m[(i, j)])).max(cabs(m[(j, i)]));
            }
        }
        ensure(
            off < 1e-7,
            format!("off-diagonal block max {off:.2e}"),
            format!("block structure violated by {off:.2e}"),
        )
    });

    // --- semigroup -----------------------------------------------------------
    let tau = 1.0 / boltzspec::collision::compute_nu(d, &vec![0.0; d]);
    rep.run("semigroup property of the matrix exponential", || {
        let xi = FrequencyPoint::from_polar(0.1, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x21);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let t = 2.0 * rng.gen::<f64>() * tau;
            let s = 2.0 * rng.gen::<f64>() * tau;
            let et = matrix_exponential(&l_xi.values, t).map_err(|e| e.to_string())?;
            let es = matrix_exponential(&l_xi.values, s).map_err(|e| e.to_string())?;
            let ets = matrix_exponential(&l_xi.values, t + s).map_err(|e| e.to_string())?;
            let prod = &et * &es;
            worst = worst.max(max_abs(&(&prod - &ets)));
        }
        ensure(
            worst < 1e-8,
            format!("max composition defect {worst:.2e}"),
            format!("semigroup property violated by {worst:.2e}"),
        )
    });
    rep.run("contractivity of the semigroup", || {
        let xi = FrequencyPoint::from_polar(0.2, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let times: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64 * tau).collect();
        let semis = semigroup_on_grid(&l_xi, &times).map_err(|e| e.to_string())?;
        let worst = semis
            .iter()
            .map(spectral_norm)
            .fold(0.0f64, f64::max);
        ensure(
            worst <= 1.0 + 1e-8,
            format!("max ||exp(tL)|| = {worst:.12}"),
            format!("semigroup norm {worst} above one"),
        )
    });
    rep.run("semigroup splitting with decaying remainder", || {
        let r = 0.1;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let asg = classify_hydrodynamics(&slice, sys.a, &modes).map_err(|e| e.to_string())?;
        let pset = branch_projectors(&slice, &asg, &modes).map_err(|e| e.to_string())?;
        let lambdas = branch_eigenvalues(&slice, &asg);
        let times: Vec<f64> = (0..=60).map(|i| 0.2 * i as f64 * tau).collect();
        let report = splitting_check(&l_xi, &pset, &lambdas, &times, (2.0 * tau, 10.0 * tau))
            .map_err(|e| e.to_string())?;
        // rate consistency with the complementary abscissa
        let comp = slice
            .values
            .iter()
            .filter(|z| z.re <= -sys.a)
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let rate_ok = (report.gamma_fit - comp).abs() / comp.abs() < 0.05;
        ensure(
            report.commutation_residual < 1e-6 && rate_ok && report.gamma_fit < 0.0,
            format!(
                "rate {:.4} vs abscissa {comp:.4}; commutation {:.2e}",
                report.gamma_fit, report.commutation_residual
            ),
            format!(
                "splitting defect: rate {:.4} vs {comp:.4}, commutation {:.2e}",
                report.gamma_fit, report.commutation_residual
            ),
        )
    });
    rep.run("spectral-level splitting exactness", || {
        let r = 0.1;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let asg = classify_hydrodynamics(&slice, sys.a, &modes).map_err(|e| e.to_string())?;
        let pset = branch_projectors(&slice, &asg, &modes).map_err(|e| e.to_string())?;
        let lambdas = branch_eigenvalues(&slice, &asg);
        let t = 1.5 * tau;
        let et = matrix_exponential(&l_xi.values, t).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for ((_, p), (_, lam)) in pset.branch.iter().zip(&lambdas) {
            let lhs = &et * p;
            let w = boltzspec::linalg::cexp(*lam * t);
            let rhs = cscale(p, w);
            worst = worst.max(max_abs(&(&lhs - &rhs)));
        }
        ensure(
            worst < 1e-7,
            format!("max projector intertwining defect {worst:.2e}"),
            format!("splitting exactness violated by {worst:.2e}"),
        )
    });
    rep.run("large-frequency semigroup decay", || {
        let r = 1.0f64.max(cfg.r0);
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let abscissa = slice.spectral_abscissa();
        // time scale of the decay: the reciprocal abscissa
        let t1 = 1.0 / abscissa.abs().max(1e-12);
        let times: Vec<f64> = (0..=60).map(|i| 0.2 * i as f64 * t1).collect();
        let report = large_xi_decay(&sys.l, &v, &xi, cfg.r0, &times, (2.0 * t1, 10.0 * t1))
            .map_err(|e| e.to_string())?;
        let ok_rate = (report.gamma_fit - abscissa).abs() / abscissa.abs() < 0.10;
        ensure(
            abscissa < 0.0 && ok_rate,
            format!("abscissa {abscissa:.4}, fitted rate {:.4}", report.gamma_fit),
            format!(
                "decay mismatch: abscissa {abscissa:.4} vs rate {:.4}",
                report.gamma_fit
            ),
        )
    });
    rep.run("resolvent bounds on vertical lines", || {
        let xi = FrequencyPoint::from_polar(0.1, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let slice = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let taus: Vec<f64> = (-20..=20).map(|i| i as f64 * 2.0).collect();
        // a line inside the gap between the hydrodynamic group and the rest
        let scan = resolvent_line_scan(&l_xi, &slice.values, -sys.a, &taus)
            .map_err(|e| e.to_string())?;
        // and a line right of the spectrum
        let scan1 = resolvent_line_scan(&l_xi, &slice.values, 1.0, &taus)
            .map_err(|e| e.to_string())?;
        // large-|tau| Neumann bound at the edges
        let norm_l = spectral_norm(&l_xi.values);
        let edge_tau = 2.5 * norm_l;
        let scan2 = resolvent_line_scan(&l_xi, &slice.values, 1.0, &[-edge_tau, edge_tau])
            .map_err(|e| e.to_string())?;
        let neumann_ok = scan2.norms.iter().all(|&x| x <= 2.0 / edge_tau);
        ensure(
            scan.supremum.is_finite() && scan1.supremum <= 1.001 && neumann_ok,
            format!(
                "interior sup {:.3}, right-line sup {:.4}",
                scan.supremum, scan1.supremum
            ),
            "resolvent line bounds out of range".into(),
        )
    });
    rep.run("uniform gap over the frequency scan", || {
        let mut dirs = vec![e1(d)];
        let mut d2 = vec![0.0; d];
        d2[1] = 1.0;
        dirs.push(d2);
        let mut d3 = vec![1.0 / (d as f64).sqrt(); d];
        d3[0] *= -1.0;
        dirs.push(d3);
        let grid: Vec<f64> = (0..=20)
            .map(|i| 0.01 * (500f64).powf(i as f64 / 20.0))
            .collect();
        let scan = gap_uniformity_scan(&basis, &sys.l, &dirs, &grid, sys.a, cfg.r0)
            .map_err(|e| e.to_string())?;
        ensure(
            scan.b_emp > 0.0,
            format!("empirical uniform gap b = {:.4}", scan.b_emp),
            format!("no uniform gap: b = {:.4}", scan.b_emp),
        )
    });

    // --- weighted spaces -----------------------------------------------------
    rep.check("weight threshold k_* closed form", {
        let k = k_star();
        let resid = (b_of_q(k - 0.5) - 1.0).abs();
        let monotone = b_of_q(3.0) > b_of_q(5.0) && b_of_q(5.0) > b_of_q(10.0);
        ensure(
            (k - 5.272001872658765).abs() < 1e-12 && resid < 1e-12 && monotone,
            format!("k_* = {k:.12}, defect {resid:.2e}"),
            format!("threshold defect {resid:.2e}"),
        )
    });
    let pspec = cfg.polynomial_spec();
    let ek_cfg = EkAssemblyConfig::for_degree(pspec.max_degree);
    let ek = assemble_in_ek(&pspec, &ek_cfg).map_err(|e| CmdError::Runtime(e.to_string()))?;
    rep.check("E(k) basis Gram identity", {
        ensure(
            ek.gram_residual < 1e-10,
            format!("max |G - I| = {:.2e}", ek.gram_residual),
            format!("Gram residual {:.2e}", ek.gram_residual),
        )
    });
    rep.run("E(k) near-kernel at frequency zero", || {
        let eig = boltzspec::linalg::eig_c(&ek.l.values).map_err(|e| e.to_string())?;
        let near = eig.values.iter().filter(|z| cabs(**z) < 1e-3).count();
        ensure(
            near == d + 2,
            format!("{near} eigenvalues within 1e-3 of zero"),
            format!("{near} near-zero eigenvalues instead of {}", d + 2),
        )
    });
    rep.run("E(k) collision-invariant residual", || {
        // expand the mass invariant M over the E(k) basis (orthonormal
        // projection) and measure the operator residual of the expansion
        let grid_basis = &ek.basis;
        let nb = grid_basis.len();
        let kw = cfg.weight_k;
        let grid = QuadratureGrid::build(d, pspec.max_degree + 10).map_err(|e| e.to_string())?;
        let mut coeffs = vec![0.0; nb];
        let mut scratch = grid_basis.scratch();
        let mut row = vec![0.0; nb];
        for q in 0..grid.len() {
            let vslice = grid.node(q);
            grid_basis.eval_at(vslice, &mut scratch, &mut row);
            // the grid weight carries one Maxwellian factor, which is the
            // integrand's M; the basis values and <v>^{2k} complete it
            let w = grid.weights[q] * boltzspec::basis::bracket(vslice).powf(2.0 * kw);
            for i in 0..nb {
                coeffs[i] += w * row[i];
            }
        }
        let mut img = vec![C_ZERO; nb];
        for j in 0..nb {
            for i in 0..nb {
                img[i] += ek.l.values[(i, j)] * c64::new(coeffs[j], 0.0);
            }
        }
        let num: f64 = img.iter().map(|z| cabs(*z).powi(2)).sum::<f64>().sqrt();
        let den: f64 = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let resid = num / den;
        ensure(
            resid < 1e-4,
            format!("relative kernel residual {resid:.2e}"),
            format!("kernel residual {resid:.2e} above 1e-4"),
        )
    });
    rep.run("enlargement: hydrodynamic spectra agree across spaces", || {
        let r = 0.1;
        let xi = FrequencyPoint::from_polar(r, &dir).map_err(|e| e.to_string())?;
        let l_xi = assemble_l_xi(&sys.l, &v, &xi).map_err(|e| e.to_string())?;
        let gs = spectrum(&l_xi, &xi).map_err(|e| e.to_string())?;
        let vk = assemble_v_in_ek(&ek.basis, &dir).map_err(|e| e.to_string())?;
        let lk = assemble_l_xi(&ek.l, &vk, &xi).map_err(|e| e.to_string())?;
        let ps = spectrum(&lk, &xi).map_err(|e| e.to_string())?;
        let cmp = compare_spectra(&gs, &ps, cfg.weight_k, sys.a);
        if cmp.count_gauss != cmp.count_poly {
            return Err(format!(
                "group sizes differ: {} vs {}",
                cmp.count_gauss, cmp.count_poly
            ));
        }
        ensure(
            cmp.max_distance < 1e-2,
            format!(
                "{} pairs matched, max distance {:.2e}",
                cmp.pairs.len(),
                cmp.max_distance
            ),
            format!("hydrodynamic eigenvalues differ by {:.2e}", cmp.max_distance),
        )
    });
    rep.run("surrogate splitting: exact algebra and dissipative remainder", || {
        let cutoff = Cutoff {
            r_cut: cfg.r_cut,
            delta: cfg.delta,
        };
        let sp = surrogate_splitting(&ek.l, &ek.basis, cutoff, &ek_cfg, cfg.seed ^ 0x31)
            .map_err(|e| e.to_string())?;
        let sum = &sp.a.values + &sp.b.values;
        let drift = max_abs(&(&sum - &ek.l.values));
        if drift != 0.0 {
            return Err(format!("A + B - L = {drift:.2e} (must vanish exactly)"));
        }
        ensure(
            sp.a1_emp > 0.0,
            format!("dissipativity margin a1 = {:.4}", sp.a1_emp),
            format!("remainder not dissipative: margin {:.4}", sp.a1_emp),
        )
    });
    rep.run("regularization bound of the truncated gain", || {
        let cutoff = Cutoff {
            r_cut: cfg.r_cut,
            delta: cfg.delta,
        };
        let gauss_test = build_basis(&BasisSpec::gaussian(d, cfg.degree)).map_err(|e| e.to_string())?;
        let rep1 = regularization_check(&ek.basis, &gauss_test, cutoff, &ek_cfg, 40, cfg.seed ^ 0x33)
            .map_err(|e| e.to_string())?;
        let rep2 = regularization_check(
            &ek.basis,
            &gauss_test,
            cutoff,
            &ek_cfg.refined(),
            40,
            cfg.seed ^ 0x33,
        )
        .map_err(|e| e.to_string())?;
        let rel = (rep1.c_a - rep2.c_a).abs() / rep1.c_a;
        ensure(
            rep1.c_a.is_finite() && rel < 0.10,
            format!("C_A = {:.4}, refinement drift {:.2}%", rep1.c_a, 100.0 * rel),
            format!("C_A unstable under refinement: {:.2}%", 100.0 * rel),
        )
    });
    rep.run("dissipativity of the shifted remainder across frequencies", || {
        let cutoff = Cutoff {
            r_cut: cfg.r_cut,
            delta: cfg.delta,
        };
        let sp = surrogate_splitting(&ek.l, &ek.basis, cutoff, &ek_cfg, cfg.seed ^ 0x35)
            .map_err(|e| e.to_string())?;
        let vk = assemble_v_in_ek(&ek.basis, &dir).map_err(|e| e.to_string())?;
        let scan = dissipativity_scan_b_xi(&sp.b, &vk, &[0.0, 0.5, 1.0, 2.0], 200, cfg.seed ^ 0x37)
            .map_err(|e| e.to_string())?;
        let m0 = scan.margins[0];
        let worst_rel = scan
            .margins
            .iter()
            .map(|m| (m - m0).abs() / m0.abs())
            .fold(0.0f64, f64::max);
        // in the Gaussian space the Hermitian part is exactly frequency
        // independent
        let gauss_herm = {
            let r = 1.3;
            let n = sys.l.dim();
            let shifted = faer::Mat::from_fn(n, n, |i, j| {
                let lv = sys.l.values[(i, j)];
                let vv = v.values[(i, j)];
                c64::new(lv.re + r * vv.im, lv.im - r * vv.re)
            });
            (hermitian_abscissa(&shifted) - hermitian_abscissa(&sys.l.values)).abs()
        };
        ensure(
            worst_rel < 0.10 && gauss_herm < 1e-10,
            format!(
                "margins {:?} (spread {:.2}%), Gaussian shift invariance {gauss_herm:.2e}",
                scan.margins.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
                100.0 * worst_rel
            ),
            format!("margin spread {:.2}% or Gaussian invariance {gauss_herm:.2e}", 100.0 * worst_rel),
        )
    });
    rep.run("weight-conversion identity on a common grid", || {
        let grid = QuadratureGrid::build(d, cfg.degree + 3).map_err(|e| e.to_string())?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x41);
        let f: Vec<c64> = (0..grid.len())
            .map(|q| {
                let m = boltzspec::basis::maxwellian(grid.node(q));
                c64::new(m * (rng.gen::<f64>() - 0.5), 0.0)
            })
            .collect();
        let g: Vec<c64> = (0..grid.len())
            .map(|q| {
                let m = boltzspec::basis::maxwellian(grid.node(q));
                c64::new(m * (rng.gen::<f64>() - 0.5), m * 0.1)
            })
            .collect();
        let resid = weight_conversion_residual(&grid, &f, &g, cfg.weight_k)
            .map_err(|e| e.to_string())?;
        ensure(
            resid < 1e-12,
            format!("identity residual {resid:.2e}"),
            format!("conversion identity residual {resid:.2e}"),
        )
    });
    // numerical-range scan sanity shared by the surrogate checks
    rep.check("random numerical-range scan is bounded by the exact abscissa", {
        let scan = numerical_range_abscissa(&sys.l.values, 100, cfg.seed ^ 0x43);
        let exact = hermitian_abscissa(&sys.l.values);
        ensure(
            scan <= exact + 1e-12,
            format!("scan {scan:.3e} <= exact {exact:.3e}"),
            "random scan exceeded the exact abscissa".into(),
        )
    });

    println!(
        "validate: {} checks, {} failed",
        rep.checks, rep.failures
    );
    if rep.failures > 0 {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
