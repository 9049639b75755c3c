//! The polynomially weighted side: the admissibility threshold k_*, an
//! independent discretization of the collision operator on the E(k) trial
//! space, the spectral comparison between the two weighted settings, and a
//! surrogate splitting L = A + B with a regularizing, velocity-truncated A
//! and a dissipative B.
//!
//! The E(k) assembly cannot exploit the two-sided Gaussian reduction that
//! makes the Gaussian-space matrix exact, because only one Maxwellian factor
//! survives in each term of the weak form. Instead:
//!
//! * the gain term separates, for fixed center-of-mass G and relative speed
//!   rho, into a product of two sphere integrals (one of them carrying an
//!   exponential tilt), and is integrated by Gauss rules in (G, rho);
//! * the exchange part of the loss term is a convolution against |v - w|,
//!   evaluated in polar coordinates centered at the outer velocity, which
//!   makes the kernel smooth;
//! * the multiplication part of the loss term is a radial integral against
//!   the closed-form collision frequency.

use crate::basis::{bracket, maxwellian, BasisSpec, OrthonormalBasis, Weight};
use crate::collision::{basis_id, compute_nu, AssemblyMeta, OperatorMatrix, PairingTag};
use crate::error::{Error, Result};
use crate::fourier::SpectralSlice;
use crate::linalg::{cabs, hermitian_part, to_complex, CMat, RMat};
use crate::quadrature::{
    gauss_from_weight, gauss_legendre, gauss_maxwell_1d, sphere_measure, SphereRule,
};
use faer::complex_native::c64;
use faer::linalg::matmul::matmul;
use faer::{Mat, Parallelism};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// b(q) = 4 / sqrt((q+1)(q-2)), the limiting relative bound of the dissipative
/// remainder of the splitting; defined for q > 2.
pub fn b_of_q(q: f64) -> f64 {
    assert!(q > 2.0);
    4.0 / ((q + 1.0) * (q - 2.0)).sqrt()
}

/// The weight threshold k_*: the unique root above 5/2 of b(k - 1/2) = 1,
/// i.e. k_* = 1/2 + (1 + sqrt(73)) / 2.
pub fn k_star() -> f64 {
    0.5 + (1.0 + 73f64.sqrt()) / 2.0
}

// ---------------------------------------------------------------------------
// assembly configuration
// ---------------------------------------------------------------------------

/// Quadrature orders for the E(k) assembly routes. The defaults target the
/// comparison tolerances of the weighted-space analysis (absolute errors well
/// below 1e-3); `refined` doubles the resolution for convergence studies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EkAssemblyConfig {
    /// Per-dimension Gauss nodes for the center-of-mass integral.
    pub g_order: usize,
    /// Nodes of the relative-speed rule (weight rho^d e^{-rho^2/8}).
    pub rho_order: usize,
    /// Sphere-rule degree inside the gain term.
    pub gain_sphere_degree: usize,
    /// Sphere-rule degree of the convolution in the loss-exchange term.
    pub conv_sphere_degree: usize,
    /// Gauss-Legendre nodes per radial panel of the convolution.
    pub conv_panel_order: usize,
    /// Per-dimension nodes of the Maxwellian-measure pairing grid.
    pub pairing_order: usize,
}

impl EkAssemblyConfig {
    pub fn for_degree(n: usize) -> EkAssemblyConfig {
        EkAssemblyConfig {
            g_order: (n + 4).max(14),
            rho_order: 14,
            gain_sphere_degree: 2 * n + 8,
            conv_sphere_degree: 2 * n + 4,
            conv_panel_order: 14,
            pairing_order: n + 6,
        }
    }

    pub fn refined(&self) -> EkAssemblyConfig {
        EkAssemblyConfig {
            g_order: self.g_order + 4,
            rho_order: self.rho_order + 4,
            gain_sphere_degree: self.gain_sphere_degree + 8,
            conv_sphere_degree: self.conv_sphere_degree + 8,
            conv_panel_order: self.conv_panel_order + 6,
            pairing_order: self.pairing_order + 4,
        }
    }
}

/// Smooth radial cutoff: identically one inside `r_cut`, identically zero
/// beyond `r_cut + 3 delta`, with a C^2 polynomial step in between.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Cutoff {
    pub r_cut: f64,
    pub delta: f64,
}

impl Cutoff {
    pub fn eval(&self, speed: f64) -> f64 {
        let hi = self.r_cut + 3.0 * self.delta;
        if speed <= self.r_cut {
            1.0
        } else if speed >= hi {
            0.0
        } else {
            let t = (speed - self.r_cut) / (hi - self.r_cut);
            1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }
}

/// Which pairing the test side of a weak form uses.
#[derive(Clone, Copy)]
pub enum TestSide<'a> {
    /// Test against basis functions of a Gaussian basis in the E pairing:
    /// the product g W reduces to the polynomial factor.
    GaussianE(&'a OrthonormalBasis),
    /// Test against the E(k) basis in its own pairing:
    /// g W = f_j(v) <v>^{2k}.
    Ek(&'a OrthonormalBasis),
}

impl<'a> TestSide<'a> {
    fn basis(&self) -> &'a OrthonormalBasis {
        match self {
            TestSide::GaussianE(b) | TestSide::Ek(b) => b,
        }
    }

    /// Values of (g_j W)(v) for all j at one point.
    fn eval_at(
        &self,
        v: &[f64],
        scratch: &mut crate::basis::BasisScratch,
        out: &mut [f64],
    ) {
        match self {
            TestSide::GaussianE(b) => {
                b.eval_factors_at(v, scratch, out);
            }
            TestSide::Ek(b) => {
                let k = match b.spec.weight {
                    Weight::Polynomial { k, .. } => k,
                    Weight::Gaussian => unreachable!("Ek test side requires a polynomial basis"),
                };
                b.eval_at(v, scratch, out);
                let w = bracket(v).powf(2.0 * k);
                for x in out.iter_mut() {
                    *x *= w;
                }
            }
        }
    }
}

fn rho_gain_rule(d: usize, m: usize) -> crate::quadrature::Quad1d {
    gauss_from_weight(
        m,
        |r| r.powi(d as i32) * (-r * r / 8.0).exp(),
        &[(0.0, 6.0), (6.0, 12.0), (12.0, 22.0), (22.0, 40.0)],
    )
}

fn tensor_maxwell_grid(d: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_maxwell_1d(order);
    let npts = order.pow(d as u32);
    let mut nodes = Vec::with_capacity(npts * d);
    let mut weights = Vec::with_capacity(npts);
    let mut idx = vec![0usize; d];
    loop {
        let mut w = 1.0;
        for l in 0..d {
            nodes.push(rule.nodes[idx[l]]);
            w *= rule.weights[idx[l]];
        }
        weights.push(w);
        let mut l = d;
        let mut done = false;
        loop {
            if l == 0 {
                done = true;
                break;
            }
            l -= 1;
            idx[l] += 1;
            if idx[l] < order {
                break;
            }
            idx[l] = 0;
            if l == 0 {
                done = true;
                break;
            }
        }
        if done {
            return (nodes, weights);
        }
    }
}

/// Gain form matrix [j][i] = <gain part of L applied to f_i, g_j>_W.
pub fn gain_form(
    trial: &OrthonormalBasis,
    test: TestSide<'_>,
    cutoff: Option<&Cutoff>,
    cfg: &EkAssemblyConfig,
) -> Result<RMat> {
    let d = trial.dim();
    if test.basis().dim() != d {
        return Err(Error::BasisMismatch("trial/test dimension mismatch".into()));
    }
    let n_i = trial.len();
    let n_j = test.basis().len();
    let gh = gauss_maxwell_1d(cfg.g_order);
    let rho = rho_gain_rule(d, cfg.rho_order);
    let sphere = SphereRule::new(d, cfg.gain_sphere_degree)?;
    let ns = sphere.len();

    let mut acc = Mat::<f64>::zeros(n_j, n_i);
    let mut scratch_i = trial.scratch();
    let mut scratch_j = test.basis().scratch();
    let mut row_i = vec![0.0; n_i];
    let mut row_j = vec![0.0; n_j];
    let mut point = vec![0.0; d];

    // iterate the tensor G grid in chunks to keep the GEMM blocks small
    let (g_nodes, g_weights) = tensor_maxwell_grid(d, cfg.g_order);
    let _ = gh;
    let ng = g_weights.len();
    let chunk = 512usize;
    let mut p_block = Mat::<f64>::zeros(chunk, n_i);
    let mut q_block = Mat::<f64>::zeros(chunk, n_j);
    let par = Parallelism::None;

    for (&r, &wr) in rho.nodes.iter().zip(&rho.weights) {
        let mut start = 0;
        while start < ng {
            let len = chunk.min(ng - start);
            for q in 0..len {
                let g = &g_nodes[(start + q) * d..(start + q + 1) * d];
                let wg = g_weights[start + q];
                // P_i(G, rho) = int f_i(G + r sigma/2) e^{r G.sigma/2} dsigma
                for x in row_i.iter_mut() {
                    *x = 0.0;
                }
                let mut p_acc = vec![0.0; n_i];
                let mut q_acc = vec![0.0; n_j];
                for s in 0..ns {
                    let om = sphere.node(s);
                    let ws = sphere.weights[s];
                    let mut gdot = 0.0;
                    for l in 0..d {
                        point[l] = g[l] + 0.5 * r * om[l];
                        gdot += g[l] * om[l];
                    }
                    // trial side at v' = G + r sigma / 2, with the Gaussian tilt
                    let tilt = (0.5 * r * gdot).exp() * ws;
                    trial.eval_factors_at(&point, &mut scratch_i, &mut row_i);
                    let profile = trial.profile(&point)
                        * cutoff.map_or(1.0, |c| {
                            c.eval(point.iter().map(|x| x * x).sum::<f64>().sqrt())
                        });
                    let f = tilt * profile;
                    for i in 0..n_i {
                        p_acc[i] += f * row_i[i];
                    }
                    // test side at v = G + r omega / 2 (no tilt)
                    test.eval_at(&point, &mut scratch_j, &mut row_j);
                    let tfac = ws
                        * cutoff.map_or(1.0, |c| {
                            c.eval(point.iter().map(|x| x * x).sum::<f64>().sqrt())
                        });
                    for j in 0..n_j {
                        q_acc[j] += tfac * row_j[j];
                    }
                }
                // wr already carries the rho^d e^{-rho^2/8} weight
                let wtot = wr * wg;
                for i in 0..n_i {
                    p_block[(q, i)] = wtot * p_acc[i];
                }
                for j in 0..n_j {
                    q_block[(q, j)] = q_acc[j];
                }
            }
            for q in len..chunk {
                for i in 0..n_i {
                    p_block[(q, i)] = 0.0;
                }
                for j in 0..n_j {
                    q_block[(q, j)] = 0.0;
                }
            }
            matmul(
                acc.as_mut(),
                q_block.transpose(),
                p_block.as_ref(),
                Some(1.0),
                1.0,
                par,
            );
            start += len;
        }
    }
    // overall factor 2 from merging the two gain terms
    let out = Mat::from_fn(n_j, n_i, |j, i| 2.0 * acc[(j, i)]);
    Ok(out)
}

/// Loss-exchange form matrix [j][i] =
/// |S^{d-1}| int int |v - w| M(v) f_i(w) (g_j W)(v) dw dv,
/// via the convolution c_i(v) = int_0^inf u^d int_S f_i(v + u omega) domega du
/// evaluated on a Maxwellian pairing grid.
pub fn lossex_form(
    trial: &OrthonormalBasis,
    test: TestSide<'_>,
    cutoff: Option<&Cutoff>,
    cfg: &EkAssemblyConfig,
) -> Result<RMat> {
    let d = trial.dim();
    if test.basis().dim() != d {
        return Err(Error::BasisMismatch("trial/test dimension mismatch".into()));
    }
    let n_i = trial.len();
    let n_j = test.basis().len();
    let (v_nodes, v_weights) = tensor_maxwell_grid(d, cfg.pairing_order);
    let nv = v_weights.len();
    let sphere = SphereRule::new(d, cfg.conv_sphere_degree)?;
    let gl = gauss_legendre(cfg.conv_panel_order);
    let mut u_nodes = Vec::new();
    let mut u_weights = Vec::new();
    for (a, b) in [(0.0, 2.0), (2.0, 5.0), (5.0, 10.0), (10.0, 20.0), (20.0, 60.0), (60.0, 200.0)]
    {
        let p = gl.mapped_to(a, b);
        u_nodes.extend_from_slice(&p.nodes);
        u_weights.extend_from_slice(&p.weights);
    }

    let mut conv = Mat::<f64>::zeros(nv, n_i);
    let mut pair = Mat::<f64>::zeros(nv, n_j);
    let mut scratch_i = trial.scratch();
    let mut scratch_j = test.basis().scratch();
    let mut row_i = vec![0.0; n_i];
    let mut row_j = vec![0.0; n_j];
    let mut point = vec![0.0; d];
    for q in 0..nv {
        let v = &v_nodes[q * d..(q + 1) * d];
        let mut acc = vec![0.0; n_i];
        for (&u, &wu) in u_nodes.iter().zip(&u_weights) {
            let ud = wu * u.powi(d as i32);
            for s in 0..sphere.len() {
                let om = sphere.node(s);
                for l in 0..d {
                    point[l] = v[l] + u * om[l];
                }
                trial.eval_factors_at(&point, &mut scratch_i, &mut row_i);
                let profile = trial.profile(&point)
                    * cutoff.map_or(1.0, |c| {
                        c.eval(point.iter().map(|x| x * x).sum::<f64>().sqrt())
                    });
                let f = ud * sphere.weights[s] * profile;
                for i in 0..n_i {
                    acc[i] += f * row_i[i];
                }
            }
        }
        for i in 0..n_i {
            conv[(q, i)] = acc[i];
        }
        // pairing side: the grid weight carries the Maxwellian measure M(v) dv
        test.eval_at(v, &mut scratch_j, &mut row_j);
        let tfac = v_weights[q]
            * cutoff.map_or(1.0, |c| c.eval(v.iter().map(|x| x * x).sum::<f64>().sqrt()));
        for j in 0..n_j {
            pair[(q, j)] = tfac * row_j[j];
        }
    }
    let prod = pair.transpose() * &conv;
    let sd = sphere_measure(d);
    Ok(Mat::from_fn(n_j, n_i, |j, i| sd * prod[(j, i)]))
}

/// Multiplication part of the loss term on the E(k) basis:
/// [j][i] = int nu(v) f_i f_j <v>^{2k} dv, by an exact-in-polynomials radial
/// rule with the collision frequency evaluated at the radial nodes.
fn numass_form_ek(basis: &OrthonormalBasis, _cfg: &EkAssemblyConfig) -> Result<RMat> {
    let d = basis.dim();
    let n = basis.len();
    let (nodes, weights) = crate::basis::ek_product_grid(&basis.spec, 16)?;
    let npts = weights.len();
    let mut f = Mat::<f64>::zeros(npts, n);
    let mut fw = Mat::<f64>::zeros(npts, n);
    let mut scratch = basis.scratch();
    let mut row = vec![0.0; n];
    for q in 0..npts {
        let v = &nodes[q * d..(q + 1) * d];
        basis.eval_factors_at(v, &mut scratch, &mut row);
        let nu = compute_nu(d, v);
        for i in 0..n {
            f[(q, i)] = row[i];
            fw[(q, i)] = weights[q] * nu * row[i];
        }
    }
    let out = f.transpose() * &fw;
    Ok(out)
}

/// An E(k)-discretized collision operator with its Gram-verified basis.
pub struct EkDiscretization {
    pub basis: OrthonormalBasis,
    pub l: OperatorMatrix,
    pub gram_residual: f64,
    pub config: EkAssemblyConfig,
}

/// Assembles the collision operator on the polynomial-decay trial space under
/// the <v>^{2k} pairing. The matrix is non-Hermitian: the operator is not
/// self-adjoint in E(k).
pub fn assemble_in_ek(spec: &BasisSpec, cfg: &EkAssemblyConfig) -> Result<EkDiscretization> {
    match spec.weight {
        Weight::Polynomial { .. } => {}
        Weight::Gaussian => {
            return Err(Error::BasisMismatch(
                "assemble_in_ek requires a polynomial-weight spec".into(),
            ))
        }
    }
    spec.validate()?;
    let start = Instant::now();
    let basis = crate::basis::build_basis(spec)?;
    let gram_residual = basis.gram_residual()?;
    let gain = gain_form(&basis, TestSide::Ek(&basis), None, cfg)?;
    let lossex = lossex_form(&basis, TestSide::Ek(&basis), None, cfg)?;
    let numass = numass_form_ek(&basis, cfg)?;
    let n = basis.len();
    let l = Mat::from_fn(n, n, |j, i| gain[(j, i)] - lossex[(j, i)] - numass[(j, i)]);
    let l = OperatorMatrix {
        values: to_complex(&l),
        basis_id: basis_id(&basis),
        dim_v: basis.dim(),
        pairing: PairingTag::PolynomialEk {
            k: match spec.weight {
                Weight::Polynomial { k, .. } => k,
                Weight::Gaussian => unreachable!(),
            },
        },
        meta: AssemblyMeta {
            g_order: cfg.g_order,
            rho_order: cfg.rho_order,
            sphere_degree: cfg.gain_sphere_degree,
            wall_time_s: start.elapsed().as_secs_f64(),
            truncated_top_degree: false,
            direction: None,
        },
    };
    Ok(EkDiscretization {
        basis,
        l,
        gram_residual,
        config: cfg.clone(),
    })
}

/// Galerkin matrix of multiplication by v . direction in the E(k) pairing,
/// assembled exactly on the radial-sphere product grid.
pub fn assemble_v_in_ek(basis: &OrthonormalBasis, direction: &[f64]) -> Result<OperatorMatrix> {
    let d = basis.dim();
    let k = match basis.spec.weight {
        Weight::Polynomial { k, .. } => k,
        Weight::Gaussian => {
            return Err(Error::BasisMismatch(
                "assemble_v_in_ek requires a polynomial-weight basis".into(),
            ))
        }
    };
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let dir: Vec<f64> = direction.iter().map(|x| x / norm).collect();
    let (nodes, weights) = crate::basis::ek_product_grid(&basis.spec, 2)?;
    let n = basis.len();
    let npts = weights.len();
    let mut f = Mat::<f64>::zeros(npts, n);
    let mut fw = Mat::<f64>::zeros(npts, n);
    let mut scratch = basis.scratch();
    let mut row = vec![0.0; n];
    for q in 0..npts {
        let v = &nodes[q * d..(q + 1) * d];
        basis.eval_factors_at(v, &mut scratch, &mut row);
        let vdot: f64 = v.iter().zip(&dir).map(|(a, b)| a * b).sum();
        for i in 0..n {
            f[(q, i)] = row[i];
            fw[(q, i)] = weights[q] * vdot * row[i];
        }
    }
    let mut vm = f.transpose() * &fw;
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (vm[(i, j)] + vm[(j, i)]);
            vm[(i, j)] = s;
            vm[(j, i)] = s;
        }
    }
    Ok(OperatorMatrix {
        values: to_complex(&vm),
        basis_id: basis_id(basis),
        dim_v: d,
        pairing: PairingTag::PolynomialEk { k },
        meta: AssemblyMeta {
            g_order: 0,
            rho_order: 0,
            sphere_degree: 0,
            wall_time_s: 0.0,
            truncated_top_degree: true,
            direction: Some(dir),
        },
    })
}

// ---------------------------------------------------------------------------
// spectral comparison across the two ambient spaces
// ---------------------------------------------------------------------------

/// Matched eigenvalue pairs of the Gaussian-space and polynomial-space
/// discretizations inside the half-plane Re z > -a.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightComparison {
    pub k: f64,
    pub r: f64,
    pub count_gauss: usize,
    pub count_poly: usize,
    /// (gauss re, gauss im, poly re, poly im, distance) per matched pair.
    pub pairs: Vec<(f64, f64, f64, f64, f64)>,
    pub max_distance: f64,
}

/// Matches the two restricted spectra by minimum-total-distance assignment
/// (exhaustive over permutations for the small hydrodynamic counts, greedy
/// beyond). Unequal counts are reported, not raised.
pub fn compare_spectra(
    gauss: &SpectralSlice,
    poly: &SpectralSlice,
    k: f64,
    a: f64,
) -> WeightComparison {
    let ga: Vec<c64> = gauss.eigenvalues_above(a);
    let pa: Vec<c64> = poly.eigenvalues_above(a);
    let m = ga.len().min(pa.len());
    let mut pairs = Vec::new();
    let mut max_distance: f64 = 0.0;
    if m > 0 {
        let assign = if ga.len() <= 8 && pa.len() <= 8 {
            best_permutation(&ga, &pa)
        } else {
            greedy_assignment(&ga, &pa)
        };
        for (gi, pi) in assign {
            let dist = cabs(ga[gi] - pa[pi]);
            max_distance = max_distance.max(dist);
            pairs.push((ga[gi].re, ga[gi].im, pa[pi].re, pa[pi].im, dist));
        }
    }
    WeightComparison {
        k,
        r: gauss.xi.magnitude(),
        count_gauss: ga.len(),
        count_poly: pa.len(),
        pairs,
        max_distance,
    }
}

fn best_permutation(ga: &[c64], pa: &[c64]) -> Vec<(usize, usize)> {
    // match the smaller list into the larger one
    let (small, large, swapped) = if ga.len() <= pa.len() {
        (ga, pa, false)
    } else {
        (pa, ga, true)
    };
    let mut idx: Vec<usize> = (0..large.len()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    permute(&mut idx, 0, small.len(), &mut |perm| {
        let cost: f64 = (0..small.len())
            .map(|i| cabs(small[i] - large[perm[i]]))
            .sum();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, perm[..small.len()].to_vec()));
        }
    });
    let (_, sel) = best.expect("nonempty permutation search");
    (0..small.len())
        .map(|i| {
            if swapped {
                (sel[i], i)
            } else {
                (i, sel[i])
            }
        })
        .collect()
}

fn permute(idx: &mut Vec<usize>, k: usize, depth: usize, visit: &mut impl FnMut(&[usize])) {
    if k == depth {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, depth, visit);
        idx.swap(k, i);
    }
}

fn greedy_assignment(ga: &[c64], pa: &[c64]) -> Vec<(usize, usize)> {
    let mut used = vec![false; pa.len()];
    let mut out = Vec::new();
    for (gi, &g) in ga.iter().enumerate() {
        let mut best = None;
        for (pi, &p) in pa.iter().enumerate() {
            if used[pi] {
                continue;
            }
            let d = cabs(g - p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, pi));
            }
        }
        if let Some((_, pi)) = best {
            used[pi] = true;
            out.push((gi, pi));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// surrogate splitting
// ---------------------------------------------------------------------------

/// The surrogate splitting L = A + B: A is the gain/exchange part composed
/// with a smooth velocity cutoff on both sides, B is the exact remainder.
pub struct SplittingSurrogate {
    pub cutoff: Cutoff,
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
    /// Empirical dissipativity margin of B in the assembly pairing: the
    /// negated maximum of Re <B g, g>/<g, g> over random coefficient vectors.
    pub a1_emp: f64,
}

/// Builds the surrogate splitting on the basis that produced `l`.
///
/// `trial` must be the basis `l` was assembled on; the test side follows its
/// weight tag.
pub fn surrogate_splitting(
    l: &OperatorMatrix,
    trial: &OrthonormalBasis,
    cutoff: Cutoff,
    cfg: &EkAssemblyConfig,
    seed: u64,
) -> Result<SplittingSurrogate> {
    if basis_id(trial) != l.basis_id {
        return Err(Error::BasisMismatch(
            "surrogate splitting requires the basis L was assembled on".into(),
        ));
    }
    let test = match l.pairing {
        PairingTag::GaussianE => TestSide::GaussianE(trial),
        PairingTag::PolynomialEk { .. } => TestSide::Ek(trial),
    };
    let gain = gain_form(trial, test, Some(&cutoff), cfg)?;
    let lossex = lossex_form(trial, test, Some(&cutoff), cfg)?;
    let n = trial.len();
    let av = Mat::from_fn(n, n, |j, i| gain[(j, i)] - lossex[(j, i)]);
    let a = OperatorMatrix {
        values: to_complex(&av),
        basis_id: l.basis_id,
        dim_v: l.dim_v,
        pairing: l.pairing,
        meta: l.meta.clone(),
    };
    let b = OperatorMatrix {
        values: &l.values - &a.values,
        basis_id: l.basis_id,
        dim_v: l.dim_v,
        pairing: l.pairing,
        meta: l.meta.clone(),
    };
    let a1_emp = -numerical_range_abscissa(&b.values, 200, seed);
    Ok(SplittingSurrogate {
        cutoff,
        a,
        b,
        a1_emp,
    })
}

/// max Re <M g, g> / <g, g> over `samples` random complex coefficient
/// vectors.
pub fn numerical_range_abscissa(m: &CMat, samples: usize, seed: u64) -> f64 {
    let n = m.nrows();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let g: Vec<c64> = (0..n)
            .map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut mg = vec![c64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                mg[i] += m[(i, j)] * g[j];
            }
        }
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            num += (mg[i] * g[i].conj()).re;
            den += (g[i] * g[i].conj()).re;
        }
        worst = worst.max(num / den);
    }
    worst
}

/// Exact abscissa of the numerical range: the largest eigenvalue of the
/// Hermitian part.
pub fn hermitian_abscissa(m: &CMat) -> f64 {
    let h = hermitian_part(m);
    let (vals, _) = crate::linalg::eigh_c(&h);
    *vals.last().expect("nonempty matrix")
}

// ---------------------------------------------------------------------------
// regularization of A
// ---------------------------------------------------------------------------

/// Empirical bound ||A g||_E <= C_A ||g||_{E(k)}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub c_a: f64,
    pub samples: usize,
    /// Dimension of the Gaussian test space the image was projected on.
    pub gauss_degree: usize,
}

/// The E-norm of A g is evaluated by expanding the image over a Gaussian
/// test basis (the image of the cutoff operator is compactly supported, so
/// the expansion converges rapidly); C_A is the maximal ratio over random
/// coefficient vectors.
pub fn regularization_check(
    trial: &OrthonormalBasis,
    gauss_test: &OrthonormalBasis,
    cutoff: Cutoff,
    cfg: &EkAssemblyConfig,
    samples: usize,
    seed: u64,
) -> Result<RegularizationReport> {
    let gain = gain_form(trial, TestSide::GaussianE(gauss_test), Some(&cutoff), cfg)?;
    let lossex = lossex_form(trial, TestSide::GaussianE(gauss_test), Some(&cutoff), cfg)?;
    let n_i = trial.len();
    let n_j = gauss_test.len();
    let a_cross = Mat::from_fn(n_j, n_i, |j, i| gain[(j, i)] - lossex[(j, i)]);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut c_a = 0.0f64;
    for _ in 0..samples {
        let g: Vec<f64> = (0..n_i).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm_g: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut img = vec![0.0; n_j];
        for i in 0..n_i {
            for j in 0..n_j {
                img[j] += a_cross[(j, i)] * g[i];
            }
        }
        let norm_img: f64 = img.iter().map(|x| x * x).sum::<f64>().sqrt();
        c_a = c_a.max(norm_img / norm_g);
    }
    Ok(RegularizationReport {
        c_a,
        samples,
        gauss_degree: gauss_test.spec.max_degree,
    })
}

// ---------------------------------------------------------------------------
// dissipativity of B - i r V across frequencies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipativityScan {
    pub r_values: Vec<f64>,
    pub margins: Vec<f64>,
}

/// Scans the numerical-range abscissa of B - i r V over frequency magnitudes;
/// the reported margins are the negated abscissas.
pub fn dissipativity_scan_b_xi(
    b: &OperatorMatrix,
    v: &OperatorMatrix,
    r_values: &[f64],
    samples: usize,
    seed: u64,
) -> Result<DissipativityScan> {
    if !b.same_basis(v) {
        return Err(Error::BasisMismatch(
            "B and V must live on the same basis and pairing".into(),
        ));
    }
    let n = b.dim();
    let mut margins = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let m = Mat::from_fn(n, n, |i, j| {
            let bv = b.values[(i, j)];
            let vv = v.values[(i, j)];
            c64::new(bv.re + r * vv.im, bv.im - r * vv.re)
        });
        margins.push(-numerical_range_abscissa(&m, samples, seed));
    }
    Ok(DissipativityScan {
        r_values: r_values.to_vec(),
        margins,
    })
}

/// Quadrature check of the weight-conversion identity
/// <f, g>_E = <f, g <v>^{-2k} M^{-1}>_{E(k)} on a common grid: both sides
/// reduce to the same weighted sum, so the residual is pure roundoff.
pub fn weight_conversion_residual(
    grid: &crate::quadrature::QuadratureGrid,
    f: &[c64],
    g: &[c64],
    k: f64,
) -> Result<f64> {
    let lhs = crate::basis::inner_product_grid(
        grid,
        f,
        g,
        crate::basis::PairingWeight::GaussianE,
    )?;
    let gk: Vec<c64> = (0..grid.len())
        .map(|q| {
            let v = grid.node(q);
            g[q] * (bracket(v).powf(-2.0 * k) / maxwellian(v))
        })
        .collect();
    let rhs = crate::basis::inner_product_grid(
        grid,
        f,
        &gk,
        crate::basis::PairingWeight::PolynomialEk { k },
    )?;
    Ok(cabs(lhs - rhs))
}
