//! Gaussian quadrature rules: classical 1-D rules via Golub-Welsch, rules for
//! nonstandard weights via a discretized Stieltjes procedure, tensor velocity
//! grids for the Maxwellian measure, and unit-sphere product rules.

use crate::error::{Error, Result};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A one-dimensional quadrature rule.
#[derive(Debug, Clone)]
pub struct Quad1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quad1d {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image of the rule on `[a, b]`, assuming `self` lives on `[-1, 1]`.
    pub fn mapped_to(&self, a: f64, b: f64) -> Quad1d {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        Quad1d {
            nodes: self.nodes.iter().map(|&x| c + h * x).collect(),
            weights: self.weights.iter().map(|&w| h * w).collect(),
        }
    }
}

/// Golub-Welsch: nodes and weights from the three-term recurrence
/// p_{k+1} = (x - alpha_k) p_k - beta_k p_{k-1}, with mu0 the total mass.
fn golub_welsch(alpha: &[f64], beta: &[f64], mu0: f64) -> Quad1d {
    let m = alpha.len();
    let mut jac = Mat::<f64>::zeros(m, m);
    for k in 0..m {
        jac[(k, k)] = alpha[k];
    }
    for k in 0..m - 1 {
        let b = beta[k + 1].sqrt();
        jac[(k, k + 1)] = b;
        jac[(k + 1, k)] = b;
    }
    let evd = jac.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s();
    let u = evd.u();
    let mut nodes: Vec<f64> = (0..m).map(|i| s.column_vector().read(i)).collect();
    let mut weights: Vec<f64> = (0..m)
        .map(|i| {
            let q = u.read(0, i);
            mu0 * q * q
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    nodes = order.iter().map(|&i| nodes[i]).collect();
    weights = order.iter().map(|&i| weights[i]).collect();
    Quad1d { nodes, weights }
}

/// Gauss-Legendre rule on `[-1, 1]`, exact for polynomials of degree 2m-1.
pub fn gauss_legendre(m: usize) -> Quad1d {
    assert!(m >= 1);
    let alpha = vec![0.0; m];
    let mut beta = vec![0.0; m];
    for (k, b) in beta.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        *b = kf * kf / (4.0 * kf * kf - 1.0);
    }
    golub_welsch(&alpha, &beta, 2.0)
}

/// Gauss-Hermite rule for the weight e^{-x^2} on the real line.
pub fn gauss_hermite(m: usize) -> Quad1d {
    assert!(m >= 1);
    let alpha = vec![0.0; m];
    let mut beta = vec![0.0; m];
    for (k, b) in beta.iter_mut().enumerate().skip(1) {
        *b = k as f64 / 2.0;
    }
    golub_welsch(&alpha, &beta, PI.sqrt())
}

/// Gauss rule for the standard Gaussian measure e^{-x^2/2}/sqrt(2 pi) dx.
pub fn gauss_maxwell_1d(m: usize) -> Quad1d {
    let base = gauss_hermite(m);
    Quad1d {
        nodes: base.nodes.iter().map(|&x| x * std::f64::consts::SQRT_2).collect(),
        weights: base.weights.iter().map(|&w| w / PI.sqrt()).collect(),
    }
}

/// Gauss rule for an arbitrary positive weight via the discretized Stieltjes
/// procedure: the weight is resolved on composite Gauss-Legendre panels, the
/// recurrence coefficients are extracted by orthogonalizing powers on that
/// discretization, and Golub-Welsch turns them into nodes and weights.
pub fn gauss_from_weight(m: usize, weight: impl Fn(f64) -> f64, panels: &[(f64, f64)]) -> Quad1d {
    let per_panel = 260.max(6 * m);
    let base = gauss_legendre(per_panel);
    let mut x = Vec::with_capacity(per_panel * panels.len());
    let mut w = Vec::with_capacity(per_panel * panels.len());
    for &(a, b) in panels {
        let p = base.mapped_to(a, b);
        for (xi, wi) in p.nodes.iter().zip(&p.weights) {
            let wv = wi * weight(*xi);
            if wv != 0.0 && wv.is_finite() {
                x.push(*xi);
                w.push(wv);
            }
        }
    }
    let npts = x.len();
    let mut alpha = vec![0.0; m];
    let mut beta = vec![0.0; m];
    let mut p_prev = vec![0.0; npts];
    let mut p = vec![1.0; npts];
    let mut norm2: f64 = w.iter().sum();
    let mu0 = norm2;
    for k in 0..m {
        let mut xs = 0.0;
        for i in 0..npts {
            xs += w[i] * x[i] * p[i] * p[i];
        }
        alpha[k] = xs / norm2;
        if k + 1 == m {
            break;
        }
        let bprev = if k > 0 { beta[k] } else { 0.0 };
        let mut next = vec![0.0; npts];
        let mut norm2_next = 0.0;
        for i in 0..npts {
            next[i] = (x[i] - alpha[k]) * p[i] - bprev * p_prev[i];
            norm2_next += w[i] * next[i] * next[i];
        }
        beta[k + 1] = norm2_next / norm2;
        p_prev = p;
        p = next;
        norm2 = norm2_next;
    }
    golub_welsch(&alpha, &beta, mu0)
}

/// Gauss rule on `[0, inf)` for the relative-speed weight rho^d e^{-rho^2/4}
/// that shows up after reducing the collision integrals to center-of-mass and
/// relative coordinates.
pub fn radial_collision_rule(d: usize, m: usize) -> Quad1d {
    gauss_from_weight(
        m,
        |r| r.powi(d as i32) * (-r * r / 4.0).exp(),
        &[(0.0, 4.0), (4.0, 8.0), (8.0, 14.0), (14.0, 24.0), (24.0, 44.0)],
    )
}

/// Gauss rule on `[0, inf)` for a radial algebraic weight s^{d-1} (1+s^2)^kappa
/// (kappa < 0 with enough decay for the requested number of moments).
pub fn radial_algebraic_rule(d: usize, m: usize, kappa: f64) -> Quad1d {
    gauss_from_weight(
        m,
        |s| s.powi(d as i32 - 1) * (1.0 + s * s).powf(kappa),
        &[
            (0.0, 1.0),
            (1.0, 3.0),
            (3.0, 7.0),
            (7.0, 15.0),
            (15.0, 40.0),
            (40.0, 120.0),
            (120.0, 400.0),
        ],
    )
}

/// Gauss rule on the real line for the even algebraic weight (1+t^2)^kappa.
pub fn line_algebraic_rule(m: usize, kappa: f64) -> Quad1d {
    gauss_from_weight(
        m,
        |t| (1.0 + t * t).powf(kappa),
        &[
            (-400.0, -120.0),
            (-120.0, -40.0),
            (-40.0, -15.0),
            (-15.0, -7.0),
            (-7.0, -3.0),
            (-3.0, 0.0),
            (0.0, 3.0),
            (3.0, 7.0),
            (7.0, 15.0),
            (15.0, 40.0),
            (40.0, 120.0),
            (120.0, 400.0),
        ],
    )
}

/// Surface measure of the unit sphere S^{d-1}.
pub fn sphere_measure(d: usize) -> f64 {
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension is validated upstream"),
    }
}

/// Quadrature nodes and weights on the unit sphere S^{d-1}, exact for
/// polynomial integrands up to the stated degree. For d = 2 this is the
/// trapezoid rule on equispaced angles; for d = 3 a Gauss-Legendre rule in the
/// polar cosine crossed with equispaced azimuths.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub degree: usize,
    /// Flat node storage, `dim` coordinates per node.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: usize, degree: usize) -> Result<SphereRule> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if degree < 2 {
            return Err(Error::QuadratureOrderTooSmall { got: degree, min: 2 });
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match dim {
            2 => {
                let m = degree + 2;
                for j in 0..m {
                    let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                    nodes.push(th.cos());
                    nodes.push(th.sin());
                    weights.push(2.0 * PI / m as f64);
                }
            }
            3 => {
                let mu = degree / 2 + 2;
                let mphi = degree + 2;
                let gl = gauss_legendre(mu);
                for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    for j in 0..mphi {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / mphi as f64;
                        nodes.push(s * phi.cos());
                        nodes.push(s * phi.sin());
                        nodes.push(*u);
                        weights.push(wu * 2.0 * PI / mphi as f64);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(SphereRule {
            dim,
            degree,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }
}

/// Declared parameters of a tensor velocity grid, serializable for caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub order: usize,
}

/// Tensor quadrature grid in velocity space for the Maxwellian measure:
/// sums over the grid approximate integrals of the form "polynomial times
/// M(v) dv" and are exact up to the declared polynomial degree.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub spec: GridSpec,
    /// Flat node storage, `dim` coordinates per node.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest total polynomial degree integrated exactly against M(v).
    pub exactness: usize,
}

impl QuadratureGrid {
    /// Tensor rule with `order` points per dimension; exact for polynomials of
    /// total degree up to 2*order - 1 against the Maxwellian.
    pub fn build(dim: usize, order: usize) -> Result<QuadratureGrid> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if order < 1 {
            return Err(Error::QuadratureOrderTooSmall { got: order, min: 1 });
        }
        let rule = gauss_maxwell_1d(order);
        let npts = order.pow(dim as u32);
        let mut nodes = Vec::with_capacity(npts * dim);
        let mut weights = Vec::with_capacity(npts);
        let mut idx = vec![0usize; dim];
        loop {
            let mut w = 1.0;
            for l in 0..dim {
                nodes.push(rule.nodes[idx[l]]);
                w *= rule.weights[idx[l]];
            }
            weights.push(w);
            let mut l = dim;
            loop {
                if l == 0 {
                    break;
                }
                l -= 1;
                idx[l] += 1;
                if idx[l] < order {
                    break;
                }
                idx[l] = 0;
                if l == 0 {
                    return Ok(QuadratureGrid {
                        spec: GridSpec { dim, order },
                        nodes,
                        weights,
                        exactness: 2 * order - 1,
                    });
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.spec.dim..(i + 1) * self.spec.dim]
    }

    /// Integral of `f` against the Maxwellian measure.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }
}

/// Gamma(n/2) for positive half-integer arguments, used to cross-check the
/// moments of nonstandard quadrature weights.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n >= 1);
    if n % 2 == 0 {
        let mut g = 1.0;
        for k in 1..n / 2 {
            g *= k as f64;
        }
        g
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        for _ in 0..n / 2 {
            g *= x;
            x += 1.0;
        }
        g
    }
}
