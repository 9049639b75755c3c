//! The Fourier-mode operators L_xi = L - i v.xi: assembly, spectra,
//! resolvents, contour spectral projectors and the small-frequency eigenvalue
//! confinement scan.

use crate::basis::OrthonormalBasis;
use crate::collision::{basis_id, AssemblyMeta, OperatorMatrix, PairingTag};
use crate::error::{Error, Result};
use crate::linalg::{
    cabs, cidentity, eig_c, max_abs, solve_c, to_complex, CMat, C_ZERO,
};
use crate::quadrature::QuadratureGrid;
use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};

/// A spatial frequency xi, split into magnitude r = |xi| and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub xi: Vec<f64>,
}

impl FrequencyPoint {
    pub fn new(xi: Vec<f64>) -> FrequencyPoint {
        FrequencyPoint { xi }
    }

    pub fn from_polar(r: f64, direction: &[f64]) -> Result<FrequencyPoint> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroDirection);
        }
        Ok(FrequencyPoint {
            xi: direction.iter().map(|x| r * x / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn magnitude(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Unit direction; undefined at the origin.
    pub fn direction(&self) -> Option<Vec<f64>> {
        let r = self.magnitude();
        if r == 0.0 {
            None
        } else {
            Some(self.xi.iter().map(|x| x / r).collect())
        }
    }
}

/// Galerkin matrix of multiplication by v . direction on a Gaussian basis.
///
/// Multiplication raises the polynomial degree by one, so the action on the
/// top degree is truncated; the matrix records this in its metadata. The
/// assembly is exact for everything the trial space can represent.
pub fn assemble_v_projection(
    basis: &OrthonormalBasis,
    direction: &[f64],
) -> Result<OperatorMatrix> {
    if !basis.is_gaussian() {
        return Err(Error::BasisMismatch(
            "the polynomial-weight multiplication matrix is assembled by the weighted-space module"
                .into(),
        ));
    }
    let d = basis.dim();
    if direction.len() != d {
        return Err(Error::BasisMismatch(format!(
            "direction has {} components, basis dimension is {}",
            direction.len(),
            d
        )));
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let dir: Vec<f64> = direction.iter().map(|x| x / norm).collect();

    let quad = QuadratureGrid::build(d, basis.spec.max_degree + 2)?;
    let f = basis.factor_matrix(&quad.nodes);
    let n = basis.len();
    let mut fw = f.clone();
    for q in 0..quad.len() {
        let vdot: f64 = quad
            .node(q)
            .iter()
            .zip(&dir)
            .map(|(v, e)| v * e)
            .sum();
        let w = quad.weights[q] * vdot;
        for i in 0..n {
            fw[(q, i)] *= w;
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
        dim_v: basis.dim(),
        pairing: PairingTag::GaussianE,
        meta: AssemblyMeta {
            g_order: quad.spec.order,
            rho_order: 0,
            sphere_degree: 0,
            wall_time_s: 0.0,
            truncated_top_degree: true,
            direction: Some(dir),
        },
    })
}

/// L_xi = L - i (xi . e_V) V, where V is the multiplication matrix along a
/// unit direction e_V and xi must be parallel to it. At r = 0 this is exactly
/// L; for xi = -r e_V the sign of the frequency flips with the projection.
pub fn assemble_l_xi(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    xi: &FrequencyPoint,
) -> Result<OperatorMatrix> {
    if !l.same_basis(v) {
        return Err(Error::BasisMismatch(
            "L and V must be assembled on the same basis".into(),
        ));
    }
    let dir = v
        .meta
        .direction
        .as_ref()
        .ok_or_else(|| Error::BasisMismatch("V carries no direction".into()))?;
    let signed: f64 = xi.xi.iter().zip(dir).map(|(a, b)| a * b).sum();
    let r = xi.magnitude();
    if (signed.abs() - r).abs() > 1e-12 * r.max(1.0) {
        return Err(Error::BasisMismatch(
            "xi is not parallel to the direction V projects on".into(),
        ));
    }
    let n = l.dim();
    let values = Mat::from_fn(n, n, |i, j| {
        let lv = l.values[(i, j)];
        let vv = v.values[(i, j)];
        c64::new(lv.re + signed * vv.im, lv.im - signed * vv.re)
    });
    Ok(OperatorMatrix {
        values,
        basis_id: l.basis_id,
        dim_v: l.dim_v,
        pairing: l.pairing,
        meta: l.meta.clone(),
    })
}

/// Full spectral data of one Fourier-mode operator.
pub struct SpectralSlice {
    pub xi: FrequencyPoint,
    /// Eigenvalues sorted by descending real part.
    pub values: Vec<c64>,
    /// Right eigenvectors, as columns, in the same order.
    pub right: CMat,
    /// Left eigenvectors, as columns, biorthonormal against the right ones.
    pub left: CMat,
    /// Condition number of the eigenvector matrix.
    pub vec_condition: f64,
}

impl SpectralSlice {
    /// Indices of eigenvalues with real part above `-a`.
    pub fn indices_above(&self, a: f64) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| self.values[i].re > -a)
            .collect()
    }

    /// Eigenvalues with real part above `-a`.
    pub fn eigenvalues_above(&self, a: f64) -> Vec<c64> {
        self.indices_above(a)
            .into_iter()
            .map(|i| self.values[i])
            .collect()
    }

    /// Largest real part over the whole slice.
    pub fn spectral_abscissa(&self) -> f64 {
        self.values.first().map(|z| z.re).unwrap_or(f64::NAN)
    }
}

/// Dense eigendecomposition of L_xi with biorthogonally normalized left
/// eigenvectors.
pub fn spectrum(l_xi: &OperatorMatrix, xi: &FrequencyPoint) -> Result<SpectralSlice> {
    let eig = eig_c(&l_xi.values)?;
    let n = l_xi.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.values[j]
            .re
            .total_cmp(&eig.values[i].re)
            .then(eig.values[j].im.total_cmp(&eig.values[i].im))
    });
    let values: Vec<c64> = order.iter().map(|&i| eig.values[i]).collect();
    let right = Mat::from_fn(n, n, |r, c| eig.right[(r, order[c])]);
    let left = Mat::from_fn(n, n, |r, c| eig.left[(r, order[c])]);
    Ok(SpectralSlice {
        xi: xi.clone(),
        values,
        right,
        left,
        vec_condition: eig.vec_condition,
    })
}

/// Resolvent R(lambda) = (lambda - L_xi)^{-1} by a direct solve.
///
/// `spectrum_values` is used to enforce the distance precondition; the
/// residual ||(lambda - L_xi) R - I||_max is verified after the solve.
pub fn resolvent(
    l_xi: &OperatorMatrix,
    lambda: c64,
    spectrum_values: &[c64],
) -> Result<CMat> {
    let n = l_xi.dim();
    let scale = max_abs(&l_xi.values).max(1e-300);
    let mut dist = f64::INFINITY;
    let mut nearest = C_ZERO;
    for &ev in spectrum_values {
        let d = cabs(lambda - ev);
        if d < dist {
            dist = d;
            nearest = ev;
        }
    }
    if dist <= 1e-10 * scale {
        return Err(Error::NearSingularShift {
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            dist,
            eig_re: nearest.re,
            eig_im: nearest.im,
        });
    }
    let a = Mat::from_fn(n, n, |i, j| {
        let base = if i == j { lambda } else { C_ZERO };
        base - l_xi.values[(i, j)]
    });
    let r = solve_c(&a, &cidentity(n));
    let resid = &a * &r - cidentity(n);
    let rnorm = max_abs(&resid);
    if rnorm >= 1e-8 {
        return Err(Error::SingularTransform(format!(
            "resolvent residual {rnorm:.3e} exceeds 1e-8"
        )));
    }
    Ok(r)
}

/// A circular integration contour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn circle(center: c64, radius: f64) -> ContourSpec {
        ContourSpec {
            center_re: center.re,
            center_im: center.im,
            radius,
            nodes: 64,
        }
    }

    pub fn center(&self) -> c64 {
        c64::new(self.center_re, self.center_im)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius <= 0.0 || self.nodes < 16 {
            return Err(Error::Invalid(
                "contour needs a positive radius and at least 16 nodes".into(),
            ));
        }
        Ok(())
    }

    /// Minimal distance from the circle to a set of spectral values.
    pub fn distance_to(&self, values: &[c64]) -> f64 {
        values
            .iter()
            .map(|&z| (cabs(z - self.center()) - self.radius).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of values strictly enclosed.
    pub fn enclosed(&self, values: &[c64]) -> usize {
        values
            .iter()
            .filter(|&&z| cabs(z - self.center()) < self.radius)
            .count()
    }
}

/// Riesz spectral projector by trapezoid quadrature of the resolvent around a
/// circle. The node count is doubled until the idempotency residual drops
/// below 1e-8 (trapezoid sums converge spectrally on circles).
pub fn contour_projector(
    l_xi: &OperatorMatrix,
    contour: &ContourSpec,
    spectrum_values: &[c64],
) -> Result<CMat> {
    contour.validate()?;
    let dist = contour.distance_to(spectrum_values);
    if dist <= contour.radius / 100.0 {
        return Err(Error::ContourHitsSpectrum {
            dist,
            min: contour.radius / 100.0,
        });
    }
    let n = l_xi.dim();
    let mut nodes = contour.nodes.max(16);
    let mut best: Option<CMat> = None;
    for _ in 0..5 {
        let mut p = Mat::<c64>::zeros(n, n);
        for m in 0..nodes {
            let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / nodes as f64;
            let e = c64::new(th.cos(), th.sin());
            let z = contour.center() + e * contour.radius;
            let r = resolvent(l_xi, z, spectrum_values)?;
            // dz = i radius e^{i th} dth; the 1/(2 pi i) cancels the i
            for j in 0..n {
                for i in 0..n {
                    p[(i, j)] += r[(i, j)] * e;
                }
            }
        }
        let scale = contour.radius / nodes as f64;
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] = p[(i, j)] * scale;
            }
        }
        let idem = &p * &p - &p;
        let resid = max_abs(&idem);
        if resid < 1e-8 {
            return Ok(p);
        }
        best = Some(p);
        nodes *= 2;
    }
    let p = best.expect("at least one trapezoid pass ran");
    let idem = &p * &p - &p;
    Err(Error::SingularTransform(format!(
        "projector idempotency residual {:.3e} did not stabilize below 1e-8",
        max_abs(&idem)
    )))
}

/// Rank of a numerically idempotent projector (rounded real trace).
pub fn projector_rank(p: &CMat) -> usize {
    let mut tr = C_ZERO;
    for i in 0..p.nrows() {
        tr += p[(i, i)];
    }
    tr.re.round().max(0.0) as usize
}

/// Projector built from the right/left eigenvector pairs of a selected
/// eigenvalue group: P = V (U^H V)^{-1} U^H over the group's columns.
pub fn eigenvector_projector(slice: &SpectralSlice, group: &[usize]) -> Result<CMat> {
    let n = slice.right.nrows();
    let m = group.len();
    if m == 0 {
        return Ok(Mat::<c64>::zeros(n, n));
    }
    let v = Mat::from_fn(n, m, |i, j| slice.right[(i, group[j])]);
    let u = Mat::from_fn(n, m, |i, j| slice.left[(i, group[j])]);
    let uhv = u.adjoint() * &v;
    let inv = solve_c(&uhv.to_owned(), &cidentity(m));
    let p = &v * &inv * u.adjoint();
    Ok(p)
}

/// Scan of the eigenvalue confinement constant: the maximum over the grid of
/// max_j |lambda_j(r)| / r over the hydrodynamic group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfinementScan {
    pub r_grid: Vec<f64>,
    pub max_ratio_per_r: Vec<f64>,
    pub m_conf: f64,
}

pub fn eigenvalue_confinement_scan(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    r_grid: &[f64],
    a: f64,
) -> Result<ConfinementScan> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let d = 3.min(v.dim()); // direction lives in basis dimension; use e_1
    let _ = d;
    let mut max_ratio_per_r = Vec::with_capacity(r_grid.len());
    let mut m_conf = 0.0f64;
    for &r in r_grid {
        if r <= 0.0 {
            return Err(Error::Invalid("confinement scan requires r > 0".into()));
        }
        let dir = v
            .meta
            .direction
            .clone()
            .ok_or_else(|| Error::BasisMismatch("V carries no direction".into()))?;
        let xi = FrequencyPoint::from_polar(r, &dir)?;
        let l_xi = assemble_l_xi(l, v, &xi)?;
        let slice = spectrum(&l_xi, &xi)?;
        let group = slice.eigenvalues_above(a);
        let ratio = group
            .iter()
            .map(|z| cabs(*z) / r)
            .fold(0.0f64, f64::max);
        max_ratio_per_r.push(ratio);
        m_conf = m_conf.max(ratio);
    }
    Ok(ConfinementScan {
        r_grid: r_grid.to_vec(),
        max_ratio_per_r,
        m_conf,
    })
}

/// Adjoint identity (L_xi)^H = L_{-xi}, returned as the max-entry deviation.
pub fn adjoint_reflection_residual(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    xi: &FrequencyPoint,
) -> Result<f64> {
    let l_xi = assemble_l_xi(l, v, xi)?;
    let minus = FrequencyPoint::new(xi.xi.iter().map(|x| -x).collect());
    let l_mxi = assemble_l_xi(l, v, &minus)?;
    let adj = crate::linalg::adjoint_c(&l_xi.values);
    let diff = &adj - &l_mxi.values;
    Ok(max_abs(&diff))
}
