//! Assembly and structural checks of the linearized hard-sphere collision
//! operator L on a Gaussian-weighted trial basis.
//!
//! The weak form is the symmetric four-point Dirichlet form. Writing trial
//! functions as g = phi M,
//!
//!   <L(phi M), psi M>_E
//!     = -1/4 int M M_* (phi' + phi'_* - phi - phi_*)
//!                     (psi' + psi'_* - psi - psi_*) |v - v_*| dsigma dv_* dv,
//!
//! with the collision map v' = (v+v_*)/2 + (|v-v_*|/2) sigma. In
//! center-of-mass and relative coordinates v = G + (rho/2) omega,
//! v_* = G - (rho/2) omega the Gaussian factors collapse to
//! e^{-|G|^2 - rho^2/4} and every remaining factor is polynomial, so a tensor
//! Gauss-Hermite rule in G, a Gauss rule for the weight rho^d e^{-rho^2/4},
//! and sphere rules in omega and sigma assemble the matrix exactly up to
//! roundoff. Expanding the product form and using the collision symmetries,
//! the form reduces to loss, exchange and gain pieces, and the gain piece
//! separates in (omega, sigma), which brings the cost down to dense
//! matrix-matrix products.

use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::linalg::{eigh_c, max_abs, to_complex, CMat, RMat};
use crate::quadrature::{
    gauss_hermite, gauss_legendre, radial_collision_rule, sphere_measure, QuadratureGrid,
    SphereRule,
};
use faer::linalg::matmul::matmul;
use faer::{Mat, Parallelism};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Which sesquilinear pairing a matrix was assembled against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PairingTag {
    GaussianE,
    PolynomialEk { k: f64 },
}

/// Assembly provenance carried by every operator matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblyMeta {
    pub g_order: usize,
    pub rho_order: usize,
    pub sphere_degree: usize,
    pub wall_time_s: f64,
    /// Multiplication by v raises the degree by one; the top degree is
    /// truncated on the trial space.
    pub truncated_top_degree: bool,
    /// For multiplication matrices: the unit direction they project on.
    pub direction: Option<Vec<f64>>,
}

/// Dense matrix representation of a bilinear form on the trial space.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub values: CMat,
    pub basis_id: u64,
    /// Velocity-space dimension of the underlying basis.
    pub dim_v: usize,
    pub pairing: PairingTag,
    pub meta: AssemblyMeta,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn same_basis(&self, other: &OperatorMatrix) -> bool {
        self.basis_id == other.basis_id && self.pairing == other.pairing
    }
}

/// Stable identifier of a basis, mixing the spec fields.
pub fn basis_id(basis: &OrthonormalBasis) -> u64 {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};
    let mut h = DefaultHasher::new();
    basis.spec.dim.hash(&mut h);
    basis.spec.max_degree.hash(&mut h);
    match basis.spec.weight {
        crate::basis::Weight::Gaussian => 0u8.hash(&mut h),
        crate::basis::Weight::Polynomial { k, p } => {
            1u8.hash(&mut h);
            k.to_bits().hash(&mut h);
            p.hash(&mut h);
        }
    }
    h.finish()
}

// ---------------------------------------------------------------------------
// collision frequency
// ---------------------------------------------------------------------------

/// Collision frequency nu(v) = int M(v_*) |v - v_*| dv_* dsigma, evaluated by
/// quadrature over v_* (the sigma integral contributes |S^{d-1}|).
pub fn compute_nu(d: usize, v: &[f64]) -> f64 {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    sphere_measure(d) * mean_distance_to_gaussian(d, s)
}

/// E |v - Z| for Z standard d-variate Gaussian and |v| = s, by radial
/// quadrature.
fn mean_distance_to_gaussian(d: usize, s: f64) -> f64 {
    match d {
        3 => {
            // int_{S^2} |v - r omega| domega = 2 pi ((s+r)^3 - |s-r|^3)/(3 s r)
            //                               = 2 pi (2 hi + 2 lo^2 / (3 hi)),
            // with hi = max(s, r), lo = min(s, r); the radial integrand is
            // then piecewise polynomial times a Gaussian.
            let gl = gauss_legendre(80);
            let pref = 2.0 * PI * (2.0 * PI).powf(-1.5);
            let tail = 14.0f64;
            let mut panels: Vec<(f64, f64)> = Vec::new();
            if s > 0.0 && s < tail {
                panels.push((0.0, s));
                panels.push((s, tail));
            } else {
                panels.push((0.0, tail));
            }
            let mut total = 0.0;
            for (a, b) in panels {
                let p = gl.mapped_to(a, b);
                total += p.integrate(|r| {
                    let (hi, lo) = if r > s { (r, s) } else { (s, r) };
                    let avg = if hi == 0.0 {
                        0.0
                    } else {
                        2.0 * hi + 2.0 * lo * lo / (3.0 * hi)
                    };
                    r * r * (-r * r / 2.0).exp() * avg
                });
            }
            pref * total
        }
        2 => {
            // polar coordinates centered at v: E|v - Z| =
            // int u^2 e^{-(u-s)^2/2} [e^{-su} I_0(su)] du, all factors benign
            let gl = gauss_legendre(140);
            let lo = (s - 12.0).max(0.0);
            let hi = s + 12.0;
            let p = gl.mapped_to(lo, hi);
            p.integrate(|u| u * u * (-(u - s) * (u - s) / 2.0).exp() * bessel_i0_scaled(s * u))
        }
        _ => unreachable!("dimension validated upstream"),
    }
}

/// e^{-x} I_0(x) for x >= 0. Power series for moderate x (all terms positive,
/// no cancellation), asymptotic expansion beyond.
pub(crate) fn bessel_i0_scaled(x: f64) -> f64 {
    assert!(x >= 0.0);
    if x < 30.0 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let q = x * x / 4.0;
        for j in 1..200 {
            term *= q / ((j * j) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 1..30 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * x * kf);
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Empirical bounds nu_0 <= nu(v)/<v> <= nu_1 over a grid of speeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuBounds {
    pub nu0: f64,
    pub nu1: f64,
    pub speeds: Vec<f64>,
}

pub fn estimate_nu_bounds(d: usize, speeds: &[f64]) -> Result<NuBounds> {
    if speeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut nu0 = f64::INFINITY;
    let mut nu1 = f64::NEG_INFINITY;
    for &s in speeds {
        let mut v = vec![0.0; d];
        v[0] = s;
        let ratio = compute_nu(d, &v) / (1.0 + s * s).sqrt();
        nu0 = nu0.min(ratio);
        nu1 = nu1.max(ratio);
    }
    Ok(NuBounds {
        nu0,
        nu1,
        speeds: speeds.to_vec(),
    })
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

struct ReducedGrids {
    /// flat tensor Gauss-Hermite grid for e^{-|G|^2} dG
    g_nodes: Vec<f64>,
    g_weights: Vec<f64>,
    rho: Vec<f64>,
    rho_w: Vec<f64>,
    sphere: SphereRule,
    g_order: usize,
    rho_order: usize,
}

fn reduced_grids(d: usize, g_order: usize, rho_order: usize, sphere_degree: usize) -> Result<ReducedGrids> {
    let gh = gauss_hermite(g_order);
    let npts = g_order.pow(d as u32);
    let mut g_nodes = Vec::with_capacity(npts * d);
    let mut g_weights = Vec::with_capacity(npts);
    let mut idx = vec![0usize; d];
    'outer: loop {
        let mut w = 1.0;
        for l in 0..d {
            g_nodes.push(gh.nodes[idx[l]]);
            w *= gh.weights[idx[l]];
        }
        g_weights.push(w);
        let mut l = d;
        loop {
            if l == 0 {
                break 'outer;
            }
            l -= 1;
            idx[l] += 1;
            if idx[l] < g_order {
                break;
            }
            idx[l] = 0;
            if l == 0 {
                break 'outer;
            }
        }
    }
    let rr = radial_collision_rule(d, rho_order);
    Ok(ReducedGrids {
        g_nodes,
        g_weights,
        rho: rr.nodes,
        rho_w: rr.weights,
        sphere: SphereRule::new(d, sphere_degree)?,
        g_order,
        rho_order,
    })
}

/// Evaluates the polynomial factors at v = G + t * dir for all G nodes.
fn eval_shifted(
    basis: &OrthonormalBasis,
    grids: &ReducedGrids,
    t: f64,
    dir: &[f64],
    out: &mut RMat,
) {
    let d = basis.dim();
    let n = basis.len();
    let mut scratch = basis.scratch();
    let mut row = vec![0.0; n];
    let mut v = vec![0.0; d];
    let npts = grids.g_weights.len();
    for q in 0..npts {
        for l in 0..d {
            v[l] = grids.g_nodes[q * d + l] + t * dir[l];
        }
        basis.eval_factors_at(&v, &mut scratch, &mut row);
        for i in 0..n {
            out[(q, i)] = row[i];
        }
    }
}

fn assemble_gaussian_parts(
    basis: &OrthonormalBasis,
    grids: &ReducedGrids,
) -> (RMat, RMat) {
    let d = basis.dim();
    let n = basis.len();
    let ng = grids.g_weights.len();
    let sd = sphere_measure(d);
    let pref = (2.0 * PI).powf(-(d as f64));

    let mut acc_loss = Mat::<f64>::zeros(n, n); // int M M_* |g| phi_i(v) phi_j(v)   (omega only)
    let mut acc_exch = Mat::<f64>::zeros(n, n); // int M M_* |g| phi_i(v_*) phi_j(v) (omega only)
    let mut acc_gain = Mat::<f64>::zeros(n, n); // int M M_* |g| phi_i(v') phi_j(v)  (omega x sigma)

    let mut u = Mat::<f64>::zeros(ng, n);
    let mut uw = Mat::<f64>::zeros(ng, n);
    let mut vst = Mat::<f64>::zeros(ng, n);
    let par = Parallelism::None;

    for (ir, (&r, &wr)) in grids.rho.iter().zip(&grids.rho_w).enumerate() {
        let _ = ir;
        // sphere-summed factor values a_i(G) = sum_sigma w phi_i(G + r sigma / 2)
        let mut a = Mat::<f64>::zeros(ng, n);
        for jo in 0..grids.sphere.len() {
            let om = grids.sphere.node(jo);
            let wo = grids.sphere.weights[jo];
            eval_shifted(basis, grids, r / 2.0, om, &mut u);
            eval_shifted(basis, grids, -r / 2.0, om, &mut vst);
            for q in 0..ng {
                let w = wr * wo * grids.g_weights[q];
                for i in 0..n {
                    let val = u[(q, i)];
                    uw[(q, i)] = w * val;
                    a[(q, i)] += wo * val;
                }
            }
            matmul(
                acc_loss.as_mut(),
                u.transpose(),
                uw.as_ref(),
                Some(1.0),
                1.0,
                par,
            );
            matmul(
                acc_exch.as_mut(),
                vst.transpose(),
                uw.as_ref(),
                Some(1.0),
                1.0,
                par,
            );
        }
        // gain: separable in (omega, sigma) for fixed (G, rho)
        let mut awt = Mat::<f64>::zeros(ng, n);
        for q in 0..ng {
            let w = wr * grids.g_weights[q];
            for i in 0..n {
                awt[(q, i)] = w * a[(q, i)];
            }
        }
        matmul(
            acc_gain.as_mut(),
            a.transpose(),
            awt.as_ref(),
            Some(1.0),
            1.0,
            par,
        );
    }

    let mut l = Mat::<f64>::zeros(n, n);
    let mut nu = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lv = pref
                * (-sd * acc_loss[(i, j)] - sd * acc_exch[(i, j)] + 2.0 * acc_gain[(i, j)]);
            l[(i, j)] = lv;
            nu[(i, j)] = pref * sd * acc_loss[(i, j)];
        }
    }
    // enforce the structural symmetry exactly
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (l[(i, j)] + l[(j, i)]);
            l[(i, j)] = s;
            l[(j, i)] = s;
            let t = 0.5 * (nu[(i, j)] + nu[(j, i)]);
            nu[(i, j)] = t;
            nu[(j, i)] = t;
        }
    }
    (l, nu)
}

fn check_gaussian_inputs(
    basis: &OrthonormalBasis,
    quad: &QuadratureGrid,
    sphere: Option<&SphereRule>,
) -> Result<()> {
    if !basis.is_gaussian() {
        return Err(Error::BasisMismatch(
            "polynomial-weight bases are assembled by the weighted-space module".into(),
        ));
    }
    let need = 2 * basis.spec.max_degree + 3;
    if quad.exactness < need {
        return Err(Error::QuadratureOrderTooSmall {
            got: quad.exactness,
            min: need,
        });
    }
    if quad.spec.dim != basis.dim() {
        return Err(Error::BasisMismatch(format!(
            "quadrature dimension {} vs basis dimension {}",
            quad.spec.dim,
            basis.dim()
        )));
    }
    if let Some(s) = sphere {
        if s.dim != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "sphere rule dimension {} vs basis dimension {}",
                s.dim,
                basis.dim()
            )));
        }
        if s.degree < 2 * basis.spec.max_degree + 2 {
            return Err(Error::QuadratureOrderTooSmall {
                got: s.degree,
                min: 2 * basis.spec.max_degree + 2,
            });
        }
    }
    Ok(())
}

/// Default velocity grid and sphere rule adequate for assembling L on `basis`.
pub fn default_grids(basis: &OrthonormalBasis) -> Result<(QuadratureGrid, SphereRule)> {
    let n = basis.spec.max_degree;
    let quad = QuadratureGrid::build(basis.dim(), n + 4)?;
    let sphere = SphereRule::new(basis.dim(), 2 * n + 4)?;
    Ok((quad, sphere))
}

/// Assembles the linearized collision operator L on a Gaussian-weight basis.
pub fn assemble_l(
    basis: &OrthonormalBasis,
    quad: &QuadratureGrid,
    sphere: &SphereRule,
) -> Result<OperatorMatrix> {
    check_gaussian_inputs(basis, quad, Some(sphere))?;
    let start = Instant::now();
    let grids = reduced_grids(
        basis.dim(),
        quad.spec.order,
        quad.spec.order + 1,
        sphere.degree,
    )?;
    let (l, _) = assemble_gaussian_parts(basis, &grids);
    Ok(OperatorMatrix {
        values: to_complex(&l),
        basis_id: basis_id(basis),
        dim_v: basis.dim(),
        pairing: PairingTag::GaussianE,
        meta: AssemblyMeta {
            g_order: grids.g_order,
            rho_order: grids.rho_order,
            sphere_degree: grids.sphere.degree,
            wall_time_s: start.elapsed().as_secs_f64(),
            truncated_top_degree: false,
            direction: None,
        },
    })
}

/// Assembles the Galerkin matrix of multiplication by nu(v).
pub fn assemble_nu_multiplier(
    basis: &OrthonormalBasis,
    quad: &QuadratureGrid,
) -> Result<OperatorMatrix> {
    check_gaussian_inputs(basis, quad, None)?;
    let start = Instant::now();
    let grids = reduced_grids(
        basis.dim(),
        quad.spec.order,
        quad.spec.order + 1,
        2 * basis.spec.max_degree + 4,
    )?;
    let (_, nu) = assemble_gaussian_parts(basis, &grids);
    Ok(OperatorMatrix {
        values: to_complex(&nu),
        basis_id: basis_id(basis),
        dim_v: basis.dim(),
        pairing: PairingTag::GaussianE,
        meta: AssemblyMeta {
            g_order: grids.g_order,
            rho_order: grids.rho_order,
            sphere_degree: grids.sphere.degree,
            wall_time_s: start.elapsed().as_secs_f64(),
            truncated_top_degree: false,
            direction: None,
        },
    })
}

/// K = L + nu-multiplier; the compact gain part of the splitting L = -nu + K.
pub fn gain_part(l: &OperatorMatrix, nu: &OperatorMatrix) -> Result<OperatorMatrix> {
    if !l.same_basis(nu) {
        return Err(Error::BasisMismatch(
            "gain part requires L and the nu multiplier on the same basis".into(),
        ));
    }
    Ok(OperatorMatrix {
        values: &l.values + &nu.values,
        basis_id: l.basis_id,
        dim_v: l.dim_v,
        pairing: l.pairing,
        meta: l.meta.clone(),
    })
}

/// Orthonormal coefficient vectors spanning the numerical kernel of L.
///
/// Eigenvalues with |lambda| below a scale-free threshold (the (d+3)-rd
/// smallest magnitude divided by 100) count as zero; a kernel dimension other
/// than d+2 is a hard failure of the assembly.
pub fn kernel_basis(d: usize, l: &OperatorMatrix) -> Result<CMat> {
    let n = l.dim();
    let (vals, vecs) = eigh_c(&l.values);
    let mut mags: Vec<f64> = vals.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let candidate = mags[(d + 2).min(n - 1)];
    let thresh = candidate / 100.0;
    let kernel: Vec<usize> = (0..n).filter(|&i| vals[i].abs() < thresh).collect();
    if kernel.len() != d + 2 {
        return Err(Error::KernelDimension {
            got: kernel.len(),
            expected: d + 2,
        });
    }
    Ok(Mat::from_fn(n, d + 2, |i, j| vecs[(i, kernel[j])]))
}

/// Discrete spectral gap: minus the largest eigenvalue outside the numerical
/// kernel.
pub fn spectral_gap(d: usize, l: &OperatorMatrix) -> Result<f64> {
    let n = l.dim();
    let (vals, _) = eigh_c(&l.values);
    // eigenvalues ascending; kernel occupies the top d+2 slots
    if n < d + 3 {
        return Err(Error::Invalid("basis too small for a gap estimate".into()));
    }
    Ok(-vals[n - (d + 2) - 1])
}

/// A signed coordinate permutation v_l -> sign_l * v_{perm_l}.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(d: usize) -> SignedPermutation {
        SignedPermutation {
            perm: (0..d).collect(),
            signs: vec![1; d],
        }
    }

    pub fn swap(d: usize, a: usize, b: usize) -> SignedPermutation {
        let mut p = SignedPermutation::identity(d);
        p.perm.swap(a, b);
        p
    }

    pub fn reflect(d: usize, axis: usize) -> SignedPermutation {
        let mut p = SignedPermutation::identity(d);
        p.signs[axis] = -1;
        p
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|l| self.signs[l] as f64 * v[self.perm[l]])
            .collect()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.perm.len() != d || self.signs.len() != d {
            return Err(Error::MapNotRepresentable);
        }
        let mut seen = vec![false; d];
        for &p in &self.perm {
            if p >= d || seen[p] {
                return Err(Error::MapNotRepresentable);
            }
            seen[p] = true;
        }
        if self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::MapNotRepresentable);
        }
        Ok(())
    }
}

/// Matrix of the induced action (Pi_O f)(v) = f(O v) on the trial basis.
///
/// A Hermite product satisfies h_alpha(O v) = (prod_l sign_l^{alpha_l})
/// h_{alpha compose perm}(v), so the representation is a signed permutation of
/// the basis itself.
pub fn induced_basis_map(basis: &OrthonormalBasis, map: &SignedPermutation) -> Result<RMat> {
    let d = basis.dim();
    map.validate(d)?;
    let n = basis.len();
    let mut lookup = std::collections::HashMap::with_capacity(n);
    for (i, alpha) in basis.indices.iter().enumerate() {
        lookup.insert(alpha.clone(), i);
    }
    let mut out = Mat::<f64>::zeros(n, n);
    for (i, alpha) in basis.indices.iter().enumerate() {
        // h_alpha(Ov) where (Ov)_l = s_l v_{p_l}: the factor h_{alpha_l}(s_l v_{p_l})
        // contributes sign s_l^{alpha_l} and moves exponent alpha_l to slot p_l.
        let mut beta = vec![0u8; d];
        let mut sign = 1.0;
        for l in 0..d {
            beta[map.perm[l]] = alpha[l];
            if map.signs[l] == -1 && alpha[l] % 2 == 1 {
                sign = -sign;
            }
        }
        let j = *lookup.get(&beta).ok_or(Error::MapNotRepresentable)?;
        // (Pi_O)_{j i} = sign: column i of the rep in basis coordinates
        out[(j, i)] = sign;
    }
    Ok(out)
}

/// Residual || Pi_O L Pi_O^{-1} - L ||_max of the rotation equivariance.
pub fn rotation_equivariance_check(
    basis: &OrthonormalBasis,
    l: &OperatorMatrix,
    map: &SignedPermutation,
) -> Result<f64> {
    let rep = induced_basis_map(basis, map)?;
    let repc = to_complex(&rep);
    // signed permutations are orthogonal: inverse = transpose
    let conj = &repc * &l.values * repc.transpose();
    let diff = &conj - &l.values;
    Ok(max_abs(&diff))
}
