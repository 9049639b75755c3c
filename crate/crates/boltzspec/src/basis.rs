//! Orthonormal trial bases of velocity space.
//!
//! The Gaussian-weighted space uses trial functions of the form
//! (polynomial) x M(v), where M is the standard Maxwellian. Orthonormality in
//! the inner product <f, g>_E = int f conj(g) M^{-1} dv then reduces to
//! orthonormality of the polynomial factors under the Gaussian measure, which
//! normalized products of probabilists' Hermite polynomials satisfy exactly.
//!
//! The polynomially weighted space E(k) = L^2(<v>^k) uses trial functions
//! (polynomial) x (1+|v|^2)^{-p}. These are Gram-orthonormalized under
//! <f, g>_{E(k)} = int f conj(g) <v>^{2k} dv by a QR factorization of the
//! collocation matrix on a quadrature grid that integrates all the pairwise
//! products exactly.

use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::multiindex;
use crate::quadrature::{
    line_algebraic_rule, radial_algebraic_rule, QuadratureGrid, SphereRule,
};
use crate::weighted::k_star;
use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Weight tag of a velocity-space trial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    /// Gaussian-weighted space E = L^2(M^{-1/2}).
    Gaussian,
    /// Polynomially weighted space E(k) = L^2(<v>^k); trial functions decay
    /// like (1+|v|^2)^{-p}.
    Polynomial { k: f64, p: u32 },
}

/// Declared shape of a trial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub dim: usize,
    pub max_degree: usize,
    pub weight: Weight,
}

impl BasisSpec {
    pub fn gaussian(dim: usize, max_degree: usize) -> BasisSpec {
        BasisSpec {
            dim,
            max_degree,
            weight: Weight::Gaussian,
        }
    }

    pub fn polynomial(dim: usize, max_degree: usize, k: f64, p: u32) -> BasisSpec {
        BasisSpec {
            dim,
            max_degree,
            weight: Weight::Polynomial { k, p },
        }
    }

    /// Minimal decay exponent p such that all products of two basis functions
    /// remain integrable against <v>^{2k+1} (the +1 absorbs the collision
    /// frequency growth): 4p > 2N + 2k + d + 1, with one extra power of
    /// margin.
    pub fn required_p(dim: usize, max_degree: usize, k: f64) -> u32 {
        let bound = (2.0 * max_degree as f64 + 2.0 * k + dim as f64 + 3.0) / 4.0;
        bound.ceil() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.max_degree < 2 {
            return Err(Error::DegreeTooSmall(self.max_degree));
        }
        if let Weight::Polynomial { k, p } = self.weight {
            let ks = k_star();
            if k <= ks {
                return Err(Error::WeightBelowThreshold { k, kstar: ks });
            }
            let required = Self::required_p(self.dim, self.max_degree, k);
            if p < required {
                return Err(Error::DecayTooWeak {
                    p,
                    degree: self.max_degree,
                    k,
                    required,
                });
            }
        }
        Ok(())
    }
}

/// The standard Maxwellian M(v) = (2 pi)^{-d/2} exp(-|v|^2 / 2).
pub fn maxwellian(v: &[f64]) -> f64 {
    let d = v.len();
    let s2: f64 = v.iter().map(|x| x * x).sum();
    (2.0 * PI).powf(-(d as f64) / 2.0) * (-s2 / 2.0).exp()
}

/// <v> = (1 + |v|^2)^{1/2}.
pub fn bracket(v: &[f64]) -> f64 {
    let s2: f64 = v.iter().map(|x| x * x).sum();
    (1.0 + s2).sqrt()
}

/// Values of the normalized probabilists' Hermite polynomials h_0..h_n at x.
/// These satisfy int h_i h_j dGauss = delta_ij.
pub fn hermite_values(x: f64, max_degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if max_degree >= 1 {
        out[1] = x;
    }
    for k in 1..max_degree {
        // normalized recurrence: h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// One-dimensional orthonormal polynomials for a symmetric weight, given the
/// recurrence p_{k+1} = (x p_k - sqrt(b_k) p_{k-1}) / sqrt(b_{k+1}) derived
/// from the monic three-term recurrence.
#[derive(Debug, Clone)]
struct LineRecurrence {
    /// b_k coefficients of the monic recurrence (b_0 = total mass).
    beta: Vec<f64>,
}

impl LineRecurrence {
    fn from_weight(max_degree: usize, kappa: f64) -> LineRecurrence {
        // recover the recurrence by re-running the Stieltjes procedure on the
        // same discretization the quadrature rules use
        let m = max_degree + 1;
        let rule = line_algebraic_rule(m.max(4) * 2, kappa);
        // orthogonalize powers on the rule's own nodes (the rule is exact far
        // beyond the degrees involved)
        let x = &rule.nodes;
        let w = &rule.weights;
        let npts = x.len();
        let mut beta = vec![0.0; m + 1];
        let mut p_prev = vec![0.0; npts];
        let mut p = vec![1.0; npts];
        let mut norm2: f64 = w.iter().sum();
        beta[0] = norm2;
        for k in 0..m {
            let mut next = vec![0.0; npts];
            let bprev = if k > 0 { beta[k] } else { 0.0 };
            for i in 0..npts {
                next[i] = x[i] * p[i] - bprev * p_prev[i];
            }
            let mut norm2_next = 0.0;
            for i in 0..npts {
                norm2_next += w[i] * next[i] * next[i];
            }
            beta[k + 1] = norm2_next / norm2;
            p_prev = p;
            p = next;
            norm2 = norm2_next;
        }
        LineRecurrence { beta }
    }

    /// Orthonormal values t_0..t_n at x.
    fn values(&self, x: f64, max_degree: usize, out: &mut [f64]) {
        out[0] = 1.0 / self.beta[0].sqrt();
        if max_degree >= 1 {
            out[1] = x * out[0] / self.beta[1].sqrt();
        }
        for k in 1..max_degree {
            out[k + 1] =
                (x * out[k] - self.beta[k].sqrt() * out[k - 1]) / self.beta[k + 1].sqrt();
        }
    }
}

enum BasisKind {
    /// Gaussian weight: basis functions are h_alpha(v) M(v); no combination
    /// matrix is needed.
    Hermite,
    /// Polynomial weight: basis functions are linear combinations (columns of
    /// `combo`) of tensor functions T_alpha(v) (1+|v|^2)^{-p}.
    Collocation {
        recurrence: LineRecurrence,
        combo: RMat,
    },
}

/// An orthonormal trial basis of velocity space.
pub struct OrthonormalBasis {
    pub spec: BasisSpec,
    pub indices: Vec<Vec<u8>>,
    kind: BasisKind,
}

/// Builds the orthonormal basis for the given spec.
pub fn build_basis(spec: &BasisSpec) -> Result<OrthonormalBasis> {
    spec.validate()?;
    let indices = multiindex::graded_lex(spec.dim, spec.max_degree);
    let kind = match spec.weight {
        Weight::Gaussian => BasisKind::Hermite,
        Weight::Polynomial { k, p } => {
            let kappa = k - 2.0 * p as f64;
            let recurrence = LineRecurrence::from_weight(spec.max_degree, kappa);
            let combo = collocation_orthonormalize(spec, &indices, &recurrence, kappa)?;
            BasisKind::Collocation { recurrence, combo }
        }
    };
    Ok(OrthonormalBasis {
        spec: *spec,
        indices,
        kind,
    })
}

/// Quadrature grid that integrates products of two E(k) basis functions
/// exactly: a radial Gauss rule for s^{d-1}(1+s^2)^{k-2p} crossed with a
/// sphere rule.
pub(crate) fn ek_product_grid(
    spec: &BasisSpec,
    extra_degree: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let kappa = match spec.weight {
        Weight::Polynomial { k, p } => k - 2.0 * p as f64,
        Weight::Gaussian => {
            return Err(Error::Invalid(
                "E(k) grid requested for a Gaussian-weight basis".into(),
            ))
        }
    };
    let d = spec.dim;
    let deg = 2 * spec.max_degree + extra_degree;
    let radial = radial_algebraic_rule(d, deg / 2 + 2, kappa);
    let sphere = SphereRule::new(d, deg + 2)?;
    let mut nodes = Vec::with_capacity(radial.nodes.len() * sphere.len() * d);
    let mut weights = Vec::with_capacity(radial.nodes.len() * sphere.len());
    for (s, ws) in radial.nodes.iter().zip(&radial.weights) {
        for j in 0..sphere.len() {
            let om = sphere.node(j);
            for l in 0..d {
                nodes.push(s * om[l]);
            }
            weights.push(ws * sphere.weights[j]);
        }
    }
    Ok((nodes, weights))
}

fn collocation_orthonormalize(
    spec: &BasisSpec,
    indices: &[Vec<u8>],
    recurrence: &LineRecurrence,
    _kappa: f64,
) -> Result<RMat> {
    let n = indices.len();
    let (nodes, weights) = ek_product_grid(spec, 0)?;
    let d = spec.dim;
    let npts = weights.len();
    let mut coll = Mat::<f64>::zeros(npts, n);
    let mut vals = vec![0.0; spec.max_degree + 1];
    let mut per_dim = vec![vec![0.0; spec.max_degree + 1]; d];
    for q in 0..npts {
        let v = &nodes[q * d..(q + 1) * d];
        for l in 0..d {
            recurrence.values(v[l], spec.max_degree, &mut vals);
            per_dim[l].copy_from_slice(&vals);
        }
        let sw = weights[q].sqrt();
        for (i, alpha) in indices.iter().enumerate() {
            let mut t = 1.0;
            for l in 0..d {
                t *= per_dim[l][alpha[l] as usize];
            }
            coll[(q, i)] = sw * t;
        }
    }
    // Householder QR; R is upper triangular with the graded column order
    // preserved, so each orthonormal function only involves tensor functions
    // of its own or lower position.
    let qr = coll.qr();
    let r = qr.compute_r();
    // combo = R^{-1}
    let mut combo = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        // back-substitution for column j of R^{-1}
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        for i in (0..=j).rev() {
            let mut s = col[i];
            for m in (i + 1)..=j {
                s -= r[(i, m)] * combo[(m, j)];
            }
            let rii = r[(i, i)];
            if rii.abs() < 1e-300 {
                return Err(Error::SingularTransform(
                    "collocation matrix is rank deficient".into(),
                ));
            }
            combo[(i, j)] = s / rii;
        }
    }
    Ok(combo)
}

impl OrthonormalBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.spec.weight, Weight::Gaussian)
    }

    /// Values of the polynomial factors of all basis functions at one point,
    /// written into `out` (length n). For the Gaussian basis the trial
    /// function is factor x M(v); for the polynomial basis it is
    /// factor x (1+|v|^2)^{-p}.
    pub fn eval_factors_at(&self, v: &[f64], scratch: &mut BasisScratch, out: &mut [f64]) {
        let d = self.spec.dim;
        let nd = self.spec.max_degree;
        match &self.kind {
            BasisKind::Hermite => {
                for l in 0..d {
                    hermite_values(v[l], nd, &mut scratch.per_dim[l]);
                }
                for (i, alpha) in self.indices.iter().enumerate() {
                    let mut t = 1.0;
                    for l in 0..d {
                        t *= scratch.per_dim[l][alpha[l] as usize];
                    }
                    out[i] = t;
                }
            }
            BasisKind::Collocation { recurrence, combo } => {
                for l in 0..d {
                    recurrence.values(v[l], nd, &mut scratch.per_dim[l]);
                }
                let n = self.len();
                for (i, alpha) in self.indices.iter().enumerate() {
                    let mut t = 1.0;
                    for l in 0..d {
                        t *= scratch.per_dim[l][alpha[l] as usize];
                    }
                    scratch.raw[i] = t;
                }
                for j in 0..n {
                    let mut s = 0.0;
                    for i in 0..=j {
                        s += combo[(i, j)] * scratch.raw[i];
                    }
                    out[j] = s;
                }
            }
        }
    }

    /// Value of the decay profile multiplying the polynomial factor:
    /// M(v) for the Gaussian basis, (1+|v|^2)^{-p} for the polynomial one.
    pub fn profile(&self, v: &[f64]) -> f64 {
        match self.spec.weight {
            Weight::Gaussian => maxwellian(v),
            Weight::Polynomial { p, .. } => {
                let s2: f64 = v.iter().map(|x| x * x).sum();
                (1.0 + s2).powi(-(p as i32))
            }
        }
    }

    /// Values of the full basis functions at one point.
    pub fn eval_at(&self, v: &[f64], scratch: &mut BasisScratch, out: &mut [f64]) {
        self.eval_factors_at(v, scratch, out);
        let w = self.profile(v);
        for x in out.iter_mut() {
            *x *= w;
        }
    }

    pub fn scratch(&self) -> BasisScratch {
        BasisScratch {
            per_dim: vec![vec![0.0; self.spec.max_degree + 1]; self.spec.dim],
            raw: vec![0.0; self.len()],
        }
    }

    /// Matrix of polynomial-factor values, rows indexed by the points.
    pub fn factor_matrix(&self, points: &[f64]) -> RMat {
        let d = self.spec.dim;
        let npts = points.len() / d;
        let n = self.len();
        let mut scratch = self.scratch();
        let mut row = vec![0.0; n];
        let mut out = Mat::<f64>::zeros(npts, n);
        for q in 0..npts {
            self.eval_factors_at(&points[q * d..(q + 1) * d], &mut scratch, &mut row);
            for i in 0..n {
                out[(q, i)] = row[i];
            }
        }
        out
    }

    /// Maximal deviation of the Gram matrix from the identity, computed with
    /// a quadrature exact for all pairwise products.
    pub fn gram_residual(&self) -> Result<f64> {
        let n = self.len();
        let gram = match &self.kind {
            BasisKind::Hermite => {
                let grid = QuadratureGrid::build(self.spec.dim, self.spec.max_degree + 2)?;
                let f = self.factor_matrix(&grid.nodes);
                let mut fw = f.clone();
                for q in 0..grid.len() {
                    let w = grid.weights[q];
                    for i in 0..n {
                        fw[(q, i)] *= w;
                    }
                }
                f.transpose() * &fw
            }
            BasisKind::Collocation { .. } => {
                let (nodes, weights) = ek_product_grid(&self.spec, 0)?;
                let f = self.factor_matrix(&nodes);
                let mut fw = f.clone();
                for (q, w) in weights.iter().enumerate() {
                    for i in 0..n {
                        fw[(q, i)] *= w;
                    }
                }
                f.transpose() * &fw
            }
        };
        let mut resid = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                resid = resid.max((gram[(i, j)] - target).abs());
            }
        }
        Ok(resid)
    }
}

/// Reusable evaluation buffers.
pub struct BasisScratch {
    per_dim: Vec<Vec<f64>>,
    raw: Vec<f64>,
}

/// Coefficient vectors (columns) of the d+2 collision invariants
/// M, v_1 M, ..., v_d M, (|v|^2 - d) M / sqrt(2d) on a Gaussian basis,
/// orthonormal in E. The last one is normalized; the natural kernel functions
/// of the collision operator are spanned exactly.
pub fn collision_invariants(basis: &OrthonormalBasis) -> RMat {
    assert!(basis.is_gaussian(), "collision invariants live on the Gaussian basis");
    let d = basis.dim();
    let n = basis.len();
    let mut out = Mat::<f64>::zeros(n, d + 2);
    for (i, alpha) in basis.indices.iter().enumerate() {
        let deg: usize = alpha.iter().map(|&x| x as usize).sum();
        if deg == 0 {
            out[(i, 0)] = 1.0;
        } else if deg == 1 {
            for l in 0..d {
                if alpha[l] == 1 {
                    out[(i, 1 + l)] = 1.0;
                }
            }
        } else if deg == 2 {
            // |v|^2 - d = sum_l (v_l^2 - 1) = sum_l sqrt(2) h_2(v_l); normalized by sqrt(2d)
            if alpha.iter().any(|&x| x == 2) {
                out[(i, d + 1)] = 1.0 / (d as f64).sqrt();
            }
        }
    }
    out
}

/// Hermite coefficients of the unnormalized energy invariant (|v|^2 - d) M.
pub fn energy_invariant_coeffs(basis: &OrthonormalBasis) -> Vec<f64> {
    basis
        .indices
        .iter()
        .map(|alpha| {
            if alpha.iter().map(|&x| x as usize).sum::<usize>() == 2 && alpha.iter().any(|&x| x == 2)
            {
                std::f64::consts::SQRT_2
            } else {
                0.0
            }
        })
        .collect()
}

/// Inner product of two coefficient vectors over the same orthonormal basis.
pub fn inner_product_coeffs(f: &[c64], g: &[c64]) -> Result<c64> {
    if f.len() != g.len() {
        return Err(Error::BasisMismatch(format!(
            "coefficient lengths {} vs {}",
            f.len(),
            g.len()
        )));
    }
    let mut s = c64::new(0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        s += *a * b.conj();
    }
    Ok(s)
}

/// Weight tag for grid-based inner products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairingWeight {
    /// <f, g>_E = int f conj(g) M^{-1} dv
    GaussianE,
    /// <f, g>_{E(k)} = int f conj(g) <v>^{2k} dv
    PolynomialEk { k: f64 },
}

/// Inner product of two functions sampled on a common Maxwellian-measure
/// velocity grid. The samples are values of the full functions f and g.
pub fn inner_product_grid(
    grid: &QuadratureGrid,
    f: &[c64],
    g: &[c64],
    weight: PairingWeight,
) -> Result<c64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::BasisMismatch(format!(
            "grid has {} nodes but sample lengths are {} and {}",
            grid.len(),
            f.len(),
            g.len()
        )));
    }
    let mut s = c64::new(0.0, 0.0);
    for q in 0..grid.len() {
        let v = grid.node(q);
        let m = maxwellian(v);
        // the grid weights carry one factor of M; the integrand below is
        // f conj(g) times the pairing weight, so divide twice by M
        let factor = match weight {
            PairingWeight::GaussianE => grid.weights[q] / (m * m),
            PairingWeight::PolynomialEk { k } => {
                grid.weights[q] * bracket(v).powf(2.0 * k) / m
            }
        };
        s += f[q] * g[q].conj() * factor;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cabs;

    #[test]
    fn rejects_small_degree() {
        assert!(build_basis(&BasisSpec::gaussian(3, 0)).is_err());
        assert!(build_basis(&BasisSpec::gaussian(3, 1)).is_err());
    }

    #[test]
    fn counts_degree_two() {
        let b = build_basis(&BasisSpec::gaussian(3, 2)).unwrap();
        assert_eq!(b.len(), 10);
    }

    #[test]
    fn gaussian_gram_is_identity() {
        let b = build_basis(&BasisSpec::gaussian(2, 4)).unwrap();
        assert!(b.gram_residual().unwrap() < 1e-12);
        let b3 = build_basis(&BasisSpec::gaussian(3, 5)).unwrap();
        assert!(b3.gram_residual().unwrap() < 1e-12);
    }

    #[test]
    fn maxwellian_normalization_and_moments() {
        // <phi_0, phi_0>_E = 1 and <phi_1, phi_0>_E = 0 in coefficients
        let b = build_basis(&BasisSpec::gaussian(3, 2)).unwrap();
        let inv = collision_invariants(&b);
        let c0: Vec<c64> = (0..b.len()).map(|i| c64::new(inv[(i, 0)], 0.0)).collect();
        let c1: Vec<c64> = (0..b.len()).map(|i| c64::new(inv[(i, 1)], 0.0)).collect();
        let p00 = inner_product_coeffs(&c0, &c0).unwrap();
        let p10 = inner_product_coeffs(&c1, &c0).unwrap();
        assert!((p00.re - 1.0).abs() < 1e-15 && p00.im.abs() < 1e-15);
        assert!(cabs(p10) < 1e-15);
        // unnormalized energy invariant has squared norm 2d
        let e: Vec<c64> = energy_invariant_coeffs(&b)
            .into_iter()
            .map(|x| c64::new(x, 0.0))
            .collect();
        let pe = inner_product_coeffs(&e, &e).unwrap();
        assert!((pe.re - 6.0).abs() < 1e-14, "expected 2d = 6, got {}", pe.re);
    }

    #[test]
    fn grid_inner_product_matches_coefficients() {
        let b = build_basis(&BasisSpec::gaussian(2, 3)).unwrap();
        let grid = QuadratureGrid::build(2, 8).unwrap();
        let vals = b.factor_matrix(&grid.nodes);
        // f = second basis function x M, g = (first + third) x M
        let n = grid.len();
        let mut f = vec![c64::new(0.0, 0.0); n];
        let mut g = vec![c64::new(0.0, 0.0); n];
        for q in 0..n {
            let m = maxwellian(grid.node(q));
            f[q] = c64::new(vals[(q, 1)] * m, 0.0);
            g[q] = c64::new((vals[(q, 0)] + vals[(q, 2)]) * m, 0.0);
        }
        let ip = inner_product_grid(&grid, &f, &g, PairingWeight::GaussianE).unwrap();
        // orthonormal: <b1, b0 + b2> = 0
        assert!(cabs(ip) < 1e-12);
        let ff = inner_product_grid(&grid, &f, &f, PairingWeight::GaussianE).unwrap();
        assert!((ff.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_basis_gram_identity() {
        let spec = BasisSpec::polynomial(2, 4, 6.0, BasisSpec::required_p(2, 4, 6.0));
        let b = build_basis(&spec).unwrap();
        assert!(b.gram_residual().unwrap() < 1e-10);
    }

    #[test]
    fn polynomial_weight_validation() {
        // k below threshold rejected
        assert!(build_basis(&BasisSpec::polynomial(3, 4, 5.0, 12)).is_err());
        // insufficient decay rejected
        assert!(build_basis(&BasisSpec::polynomial(3, 8, 6.0, 4)).is_err());
    }

    #[test]
    fn mismatched_grids_rejected() {
        let grid = QuadratureGrid::build(2, 6).unwrap();
        let f = vec![c64::new(1.0, 0.0); grid.len()];
        let g = vec![c64::new(1.0, 0.0); grid.len() - 1];
        assert!(inner_product_grid(&grid, &f, &g, PairingWeight::GaussianE).is_err());
    }
}
