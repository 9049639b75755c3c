//! Matrix exponentials of the Fourier-mode operators and the semigroup
//! splitting: remainder decay fits for small frequencies, full-semigroup decay
//! for large frequencies, resolvent scans on vertical lines and the uniform
//! gap scan over frequency magnitudes.

use crate::basis::OrthonormalBasis;
use crate::branches::ProjectorSet;
use crate::collision::OperatorMatrix;
use crate::error::{Error, Result};
use crate::fit::exp_fit;
use crate::fourier::{
    assemble_l_xi, assemble_v_projection, resolvent, spectrum, FrequencyPoint,
};
use crate::linalg::{cabs, cexp, cidentity, max_abs, solve_c, spectral_norm, CMat};
use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};

// Pade(13) numerator coefficients (Higham, scaling-and-squaring).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let mut s = 0.0;
        for i in 0..a.nrows() {
            s += cabs(a[(i, j)]);
        }
        best = best.max(s);
    }
    best
}

/// exp(t A) by scaling-and-squaring with a Pade(13) approximant.
pub fn matrix_exponential(a: &CMat, t: f64) -> Result<CMat> {
    let n = a.nrows();
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Invalid("time must be finite and nonnegative".into()));
    }
    for j in 0..n {
        for i in 0..n {
            if !a[(i, j)].re.is_finite() || !a[(i, j)].im.is_finite() {
                return Err(Error::Invalid("matrix exponential of non-finite entries".into()));
            }
        }
    }
    let norm = one_norm(a) * t;
    if norm > 1e6 {
        return Err(Error::ExponentialOverflow(norm));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = c64::new(t / 2f64.powi(s as i32), 0.0);
    let a0 = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = cidentity(n);
    let a2 = &a0 * &a0;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;
    let u_inner = Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * b[13] + a4[(i, j)] * b[11] + a2[(i, j)] * b[9]
    });
    let u_poly = &(&a6 * &u_inner)
        + &Mat::from_fn(n, n, |i, j| {
            a6[(i, j)] * b[7]
                + a4[(i, j)] * b[5]
                + a2[(i, j)] * b[3]
                + id[(i, j)] * b[1]
        });
    let u = &a0 * &u_poly;
    let v_inner = Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * b[12] + a4[(i, j)] * b[10] + a2[(i, j)] * b[8]
    });
    let v = &(&a6 * &v_inner)
        + &Mat::from_fn(n, n, |i, j| {
            a6[(i, j)] * b[6]
                + a4[(i, j)] * b[4]
                + a2[(i, j)] * b[2]
                + id[(i, j)] * b[0]
        });
    let vmu = &v - &u;
    let vpu = &v + &u;
    let mut e = solve_c(&vmu, &vpu);
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// Fitted exponential decay of a semigroup remainder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub xi: Vec<f64>,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub gamma_fit: f64,
    pub c_fit: f64,
    /// Largest commutation residual max_j max(||P_j V(t)||, ||V(t) P_j||)
    /// over the sampled times (zero for full-semigroup reports).
    pub commutation_residual: f64,
    pub regime: DecayRegime,
    /// Times actually used by the fit (positive norms inside the window).
    pub fit_window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayRegime {
    SmallFrequency,
    LargeFrequency,
}

/// Semigroup values exp(t_k L) on a time grid; consecutive products on
/// uniform grids, direct exponentials otherwise.
pub fn semigroup_on_grid(l_xi: &OperatorMatrix, times: &[f64]) -> Result<Vec<CMat>> {
    let n = l_xi.dim();
    let uniform = times.len() >= 3 && {
        let dt = times[1] - times[0];
        times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() < 1e-12 * dt.abs().max(1.0))
            && (times[0] - dt).abs() < 1e-12 * dt.abs().max(1.0)
    };
    let mut out = Vec::with_capacity(times.len());
    if uniform {
        let dt = times[1] - times[0];
        let step = matrix_exponential(&l_xi.values, dt)?;
        let mut cur = matrix_exponential(&l_xi.values, times[0])?;
        out.push(cur.clone());
        for _ in 1..times.len() {
            cur = &cur * &step;
            out.push(cur.clone());
        }
    } else {
        for &t in times {
            out.push(matrix_exponential(&l_xi.values, t)?);
        }
    }
    let _ = n;
    Ok(out)
}

/// Checks the small-frequency semigroup splitting: the remainder
/// V(t) = exp(t L_xi) - sum_j e^{t lambda_j} P_j must annihilate every branch
/// projector and decay exponentially; the decay rate is fitted over the tail
/// window.
pub fn splitting_check(
    l_xi: &OperatorMatrix,
    pset: &ProjectorSet,
    branch_values: &[(crate::branches::BranchLabel, c64)],
    times: &[f64],
    fit_window: (f64, f64),
) -> Result<DecayReport> {
    if times.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = l_xi.dim();
    let semis = semigroup_on_grid(l_xi, times)?;
    let mut norms = Vec::with_capacity(times.len());
    let mut commutation = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        let mut vt = semis[k].clone();
        for (label, p) in &pset.branch {
            let lam = branch_values
                .iter()
                .find(|(lb, _)| lb == label)
                .map(|(_, z)| *z)
                .ok_or_else(|| {
                    Error::Invalid(format!("no eigenvalue supplied for branch {}", label.as_str()))
                })?;
            let w = cexp(lam * t);
            for j in 0..n {
                for i in 0..n {
                    vt[(i, j)] -= w * p[(i, j)];
                }
            }
        }
        norms.push(spectral_norm(&vt));
        // commutation residuals on a few representative times
        if k == 0 || k == times.len() / 2 || k + 1 == times.len() {
            for (_, p) in &pset.branch {
                let pv = p * &vt;
                let vp = &vt * p;
                commutation = commutation.max(max_abs(&pv)).max(max_abs(&vp));
            }
        }
    }
    let (ts, ns): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(&t, &y)| t >= fit_window.0 && t <= fit_window.1 && y > 1e-14)
        .map(|(&t, &y)| (t, y))
        .unzip();
    if ts.len() < 2 {
        return Err(Error::Invalid(
            "decay fit window contains fewer than two usable samples".into(),
        ));
    }
    let (gamma_fit, _) = exp_fit(&ts, &ns);
    if !(gamma_fit < 0.0) {
        return Err(Error::Invalid(format!(
            "remainder is not decaying: fitted rate {gamma_fit:.3e}"
        )));
    }
    // prefactor chosen so the bound holds pointwise on the fitted window
    let c_fit = ts
        .iter()
        .zip(&ns)
        .map(|(&t, &y)| y / (gamma_fit * t).exp())
        .fold(0.0f64, f64::max);
    Ok(DecayReport {
        xi: pset.xi.xi.clone(),
        times: times.to_vec(),
        norms,
        gamma_fit,
        c_fit,
        commutation_residual: commutation,
        regime: DecayRegime::SmallFrequency,
        fit_window: (
            ts.first().copied().unwrap_or(fit_window.0),
            ts.last().copied().unwrap_or(fit_window.1),
        ),
    })
}

/// Full-semigroup decay for |xi| >= r_0: no hydrodynamic part is subtracted.
pub fn large_xi_decay(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    xi: &FrequencyPoint,
    r0: f64,
    times: &[f64],
    fit_window: (f64, f64),
) -> Result<DecayReport> {
    if xi.magnitude() < r0 {
        return Err(Error::Invalid(format!(
            "|xi| = {} is below the large-frequency regime boundary r0 = {r0}",
            xi.magnitude()
        )));
    }
    let l_xi = assemble_l_xi(l, v, xi)?;
    let semis = semigroup_on_grid(&l_xi, times)?;
    let norms: Vec<f64> = semis.iter().map(spectral_norm).collect();
    let (ts, ns): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(&t, &y)| t >= fit_window.0 && t <= fit_window.1 && y > 1e-14)
        .map(|(&t, &y)| (t, y))
        .unzip();
    if ts.len() < 2 {
        return Err(Error::Invalid(
            "decay fit window contains fewer than two usable samples".into(),
        ));
    }
    let (gamma_fit, _) = exp_fit(&ts, &ns);
    let c_fit = ts
        .iter()
        .zip(&ns)
        .map(|(&t, &y)| y / (gamma_fit * t).exp())
        .fold(0.0f64, f64::max);
    Ok(DecayReport {
        xi: xi.xi.clone(),
        times: times.to_vec(),
        norms,
        gamma_fit,
        c_fit,
        commutation_residual: 0.0,
        regime: DecayRegime::LargeFrequency,
        fit_window: (
            ts.first().copied().unwrap_or(fit_window.0),
            ts.last().copied().unwrap_or(fit_window.1),
        ),
    })
}

/// Resolvent norms sampled along a vertical line Re z = beta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventScan {
    pub beta: f64,
    pub taus: Vec<f64>,
    pub norms: Vec<f64>,
    pub supremum: f64,
    /// Whether the norms decrease toward both scanned edges (the supremum is
    /// attained in the interior of the window).
    pub edges_decreasing: bool,
}

pub fn resolvent_line_scan(
    l_xi: &OperatorMatrix,
    spectrum_values: &[c64],
    beta: f64,
    taus: &[f64],
) -> Result<ResolventScan> {
    if taus.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let line_dist = spectrum_values
        .iter()
        .map(|z| (z.re - beta).abs())
        .fold(f64::INFINITY, f64::min);
    if line_dist <= 1e-8 {
        return Err(Error::LineHitsSpectrum(beta));
    }
    let mut norms = Vec::with_capacity(taus.len());
    for &tau in taus {
        let r = resolvent(l_xi, c64::new(beta, tau), spectrum_values)?;
        norms.push(spectral_norm(&r));
    }
    let supremum = norms.iter().copied().fold(0.0f64, f64::max);
    let edges_decreasing = norms.len() >= 3
        && norms[0] <= norms[1] * (1.0 + 1e-9)
        && norms[norms.len() - 1] <= norms[norms.len() - 2] * (1.0 + 1e-9);
    Ok(ResolventScan {
        beta,
        taus: taus.to_vec(),
        norms,
        supremum,
        edges_decreasing,
    })
}

/// One row of the uniform-gap scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapScanRow {
    pub r: f64,
    pub direction: Vec<f64>,
    /// max Re over the non-hydrodynamic spectrum for r <= r0, over the whole
    /// spectrum for r > r0.
    pub abscissa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapScan {
    pub rows: Vec<GapScanRow>,
    /// inf over the scan of the negated abscissa; positive when a uniform gap
    /// is observed.
    pub b_emp: f64,
}

/// Scans the spectral abscissa of the non-hydrodynamic spectrum over a grid
/// of frequency magnitudes and directions.
pub fn gap_uniformity_scan(
    basis: &OrthonormalBasis,
    l: &OperatorMatrix,
    directions: &[Vec<f64>],
    r_grid: &[f64],
    a: f64,
    r0: f64,
) -> Result<GapScan> {
    if r_grid.is_empty() || directions.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for dir in directions {
        let v = assemble_v_projection(basis, dir)?;
        for &r in r_grid {
            let xi = FrequencyPoint::from_polar(r, dir)?;
            let l_xi = assemble_l_xi(l, &v, &xi)?;
            let slice = spectrum(&l_xi, &xi)?;
            let abscissa = if r <= r0 {
                slice
                    .values
                    .iter()
                    .filter(|z| z.re <= -a)
                    .map(|z| z.re)
                    .fold(f64::NEG_INFINITY, f64::max)
            } else {
                slice.spectral_abscissa()
            };
            worst = worst.max(abscissa);
            rows.push(GapScanRow {
                r,
                direction: dir.clone(),
                abscissa,
            });
        }
    }
    Ok(GapScan {
        rows,
        b_emp: -worst,
    })
}
