//! The hydrodynamic eigenvalue branches of L_xi for small frequencies: total
//! projector expansion, the pairing isomorphism between nearby spectral
//! projectors, the reduced operator on the collision kernel, first- and
//! second-order branch coefficients, branch tracing over a frequency grid,
//! branch projectors and biorthogonal eigentriples.

use crate::basis::{collision_invariants, OrthonormalBasis};
use crate::collision::OperatorMatrix;
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, quadratic_through_origin};
use crate::fourier::{
    assemble_l_xi, contour_projector, eigenvector_projector, spectrum, ContourSpec,
    FrequencyPoint, SpectralSlice,
};
use crate::linalg::{
    adjoint_c, cabs, cidentity, cscale, eigh_c, inverse_c, max_abs, solve_c, spectral_norm,
    to_complex, CMat, RMat, C_I, C_ONE, C_ZERO,
};
use crate::quadrature::{gauss_from_weight, SphereRule};
use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Labels of the four eigenvalue branches emanating from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchLabel {
    /// lambda_{-1}: acoustic branch with Im lambda ~ -sqrt(1+2/d) r.
    AcousticMinus,
    /// lambda_0: real entropy / thermal diffusion branch.
    Entropy,
    /// lambda_{+1}: acoustic branch with Im lambda ~ +sqrt(1+2/d) r.
    AcousticPlus,
    /// lambda_2: real shear branch of multiplicity d-1.
    Shear,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 4] = [
        BranchLabel::AcousticMinus,
        BranchLabel::Entropy,
        BranchLabel::AcousticPlus,
        BranchLabel::Shear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BranchLabel::AcousticMinus => "acoustic-",
            BranchLabel::Entropy => "entropy",
            BranchLabel::AcousticPlus => "acoustic+",
            BranchLabel::Shear => "shear",
        }
    }
}

/// The acoustic speed sqrt(1 + 2/d).
pub fn acoustic_speed(d: usize) -> f64 {
    (1.0 + 2.0 / d as f64).sqrt()
}

// ---------------------------------------------------------------------------
// kernel data and the reduced resolvent
// ---------------------------------------------------------------------------

/// Spectral data of L at frequency zero: the kernel projector, an orthonormal
/// kernel basis and the reduced resolvent S (inverse of L on the orthogonal
/// complement of the kernel, zero on the kernel).
pub struct KernelData {
    pub dim: usize,
    pub projector: CMat,
    pub kernel: CMat,
    pub s_matrix: CMat,
    pub gap: f64,
}

pub fn kernel_data(d: usize, l: &OperatorMatrix) -> Result<KernelData> {
    let n = l.dim();
    let (vals, vecs) = eigh_c(&l.values);
    let mut mags: Vec<f64> = vals.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let thresh = mags[(d + 2).min(n - 1)] / 100.0;
    let kernel_idx: Vec<usize> = (0..n).filter(|&i| vals[i].abs() < thresh).collect();
    if kernel_idx.len() != d + 2 {
        return Err(Error::KernelDimension {
            got: kernel_idx.len(),
            expected: d + 2,
        });
    }
    let kernel = Mat::from_fn(n, d + 2, |i, j| vecs[(i, kernel_idx[j])]);
    let projector = &kernel * adjoint_c(&kernel);
    let mut s_matrix = Mat::<c64>::zeros(n, n);
    for m in 0..n {
        if kernel_idx.contains(&m) {
            continue;
        }
        let inv = 1.0 / vals[m];
        for j in 0..n {
            let vj = vecs[(j, m)].conj() * inv;
            for i in 0..n {
                s_matrix[(i, j)] += vecs[(i, m)] * vj;
            }
        }
    }
    let gap = -vals[n - (d + 2) - 1];
    Ok(KernelData {
        dim: d,
        projector,
        kernel,
        s_matrix,
        gap,
    })
}

/// S f: the unique solution x of L x = f - P0 f with P0 x = 0.
pub fn reduced_resolvent_apply(kd: &KernelData, f: &[c64]) -> Vec<c64> {
    let n = kd.s_matrix.nrows();
    assert_eq!(f.len(), n);
    let mut out = vec![C_ZERO; n];
    for j in 0..n {
        let fj = f[j];
        if fj == C_ZERO {
            continue;
        }
        for i in 0..n {
            out[i] += kd.s_matrix[(i, j)] * fj;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// frames and analytic zeroth-order modes
// ---------------------------------------------------------------------------

/// Deterministic completion of a unit direction to an orthonormal frame: the
/// Householder reflection taking e_1 to the direction; its remaining columns
/// are the transverse frame C_1, ..., C_{d-1}.
pub fn direction_frame(dir: &[f64]) -> Result<RMat> {
    let d = dir.len();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let e: Vec<f64> = dir.iter().map(|x| x / norm).collect();
    let mut u = e.clone();
    u[0] -= 1.0;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let h = if uu < 1e-28 {
        Mat::<f64>::identity(d, d)
    } else {
        Mat::from_fn(d, d, |i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            base - 2.0 * u[i] * u[j] / uu
        })
    };
    Ok(h)
}

/// Analytic zeroth-order branch modes as coefficient vectors on the Gaussian
/// basis (not normalized): the diagonalizing modes of the leading-order
/// reduced operator.
pub struct ZerothOrderModes {
    pub dim: usize,
    pub direction: Vec<f64>,
    /// (1 + c xi.v + (1/d)(|v|^2 - d)) M with c = sqrt(1+2/d), branch -1.
    pub acoustic_minus: Vec<c64>,
    /// (1 - (1/2)(|v|^2 - d)) M, branch 0.
    pub entropy: Vec<c64>,
    /// (1 - c xi.v + (1/d)(|v|^2 - d)) M, branch +1.
    pub acoustic_plus: Vec<c64>,
    /// C_l . v M for the transverse frame C_l, branch 2 (d-1 of them).
    pub shear: Vec<Vec<c64>>,
    /// First-order eigenvalue coefficients per branch label order
    /// [-1, 0, +1, 2]: { -i c, 0, +i c, 0 }.
    pub lambda1: [c64; 4],
}

/// First-order data of the hydrodynamic branches in a given direction.
pub fn first_order_modes(basis: &OrthonormalBasis, dir: &[f64]) -> Result<ZerothOrderModes> {
    let d = basis.dim();
    if dir.len() != d {
        return Err(Error::BasisMismatch(
            "direction dimension does not match the basis".into(),
        ));
    }
    let frame = direction_frame(dir)?;
    let n = basis.len();
    let c = acoustic_speed(d);
    // coefficient positions: phi_0 at 0; v_m at 1..=d; energy on the
    // degree-two diagonal indices
    let inv = collision_invariants(basis);
    let mut phi0 = vec![C_ZERO; n];
    let mut ehat = vec![C_ZERO; n];
    for i in 0..n {
        phi0[i] = c64::new(inv[(i, 0)], 0.0);
        ehat[i] = c64::new(inv[(i, d + 1)], 0.0);
    }
    // xi.v M and C_l.v M
    let mut dir_v = vec![C_ZERO; n];
    let mut shear = vec![vec![C_ZERO; n]; d - 1];
    for m in 0..d {
        for i in 0..n {
            let base = inv[(i, 1 + m)];
            if base != 0.0 {
                dir_v[i] += c64::new(base * frame[(m, 0)], 0.0);
                for l in 0..d - 1 {
                    shear[l][i] += c64::new(base * frame[(m, l + 1)], 0.0);
                }
            }
        }
    }
    // energy coefficient: (1/d)(|v|^2-d) M = sqrt(2/d) * normalized invariant
    let en = (2.0 / d as f64).sqrt();
    let make_acoustic = |sign: f64| -> Vec<c64> {
        (0..n)
            .map(|i| phi0[i] + dir_v[i] * (sign * c) + ehat[i] * en)
            .collect()
    };
    let entropy: Vec<c64> = (0..n)
        .map(|i| phi0[i] - ehat[i] * ((d as f64 / 2.0).sqrt()))
        .collect();
    Ok(ZerothOrderModes {
        dim: d,
        direction: dir.to_vec(),
        acoustic_minus: make_acoustic(1.0),
        entropy,
        acoustic_plus: make_acoustic(-1.0),
        shear,
        lambda1: [
            c64::new(0.0, -c),
            C_ZERO,
            c64::new(0.0, c),
            C_ZERO,
        ],
    })
}

/// The kernel frame of the block-structure lemma, ordered
/// {C_1.vM, ..., C_{d-1}.vM, phi_0, xi.vM, energy-hat}; columns are
/// orthonormal coefficient vectors.
pub fn kernel_frame(basis: &OrthonormalBasis, dir: &[f64]) -> Result<RMat> {
    let d = basis.dim();
    let frame = direction_frame(dir)?;
    let inv = collision_invariants(basis);
    let n = basis.len();
    let mut out = Mat::<f64>::zeros(n, d + 2);
    for i in 0..n {
        // shear columns
        for l in 0..d - 1 {
            let mut s = 0.0;
            for m in 0..d {
                s += inv[(i, 1 + m)] * frame[(m, l + 1)];
            }
            out[(i, l)] = s;
        }
        out[(i, d - 1)] = inv[(i, 0)];
        let mut s = 0.0;
        for m in 0..d {
            s += inv[(i, 1 + m)] * frame[(m, 0)];
        }
        out[(i, d)] = s;
        out[(i, d + 1)] = inv[(i, d + 1)];
    }
    Ok(out)
}

/// The 3x3 leading block of the reduced operator on the span
/// {phi_0, xi.vM, energy-hat}: -i [[0,1,0],[1,0,s],[0,s,0]] with s=sqrt(2/d).
/// Its eigenvalues are {0, +-i sqrt(1+2/d)} and the kernel direction maps to
/// the entropy mode (1 - (1/2)(|v|^2-d)) M.
pub fn a0_matrix(d: usize) -> Result<CMat> {
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let s = (2.0 / d as f64).sqrt();
    let mut m = Mat::<c64>::zeros(3, 3);
    m[(0, 1)] = -C_I;
    m[(1, 0)] = -C_I;
    m[(1, 2)] = -C_I * s;
    m[(2, 1)] = -C_I * s;
    Ok(m)
}

// ---------------------------------------------------------------------------
// total projector expansion
// ---------------------------------------------------------------------------

/// P(0), the first-order coefficient P1 = i P0 V S + i S V P0, and the fitted
/// order of the remainder P(r) - P0 - r P1 over the given r grid.
pub struct TotalProjectorExpansion {
    pub p0: CMat,
    pub p1: CMat,
    pub r_grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted_order: f64,
}

pub fn total_projector_expansion(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    kd: &KernelData,
    dir: &[f64],
    r_grid: &[f64],
    a: f64,
) -> Result<TotalProjectorExpansion> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let p0 = kd.projector.clone();
    let vs = &v.values * &kd.s_matrix;
    let sv = &kd.s_matrix * &v.values;
    let p1 = cscale(&(&p0 * &vs + &sv * &p0), C_I);
    let mut residuals = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let xi = FrequencyPoint::from_polar(r, dir)?;
        let l_xi = assemble_l_xi(l, v, &xi)?;
        let slice = spectrum(&l_xi, &xi)?;
        let contour = ContourSpec::circle(C_ZERO, a / 2.0);
        expect_enclosed(&contour, &slice.values, kd.dim + 2)?;
        let p = contour_projector(&l_xi, &contour, &slice.values)?;
        let model = &p0 + &cscale(&p1, c64::new(r, 0.0));
        let diff = &p - &model;
        residuals.push(max_abs(&diff));
    }
    let fitted_order = loglog_slope(r_grid, &residuals);
    Ok(TotalProjectorExpansion {
        p0,
        p1,
        r_grid: r_grid.to_vec(),
        residuals,
        fitted_order,
    })
}

fn expect_enclosed(contour: &ContourSpec, values: &[c64], want: usize) -> Result<()> {
    let got = contour.enclosed(values);
    if got != want {
        return Err(Error::Invalid(format!(
            "contour of radius {} encloses {got} eigenvalues, expected {want}",
            contour.radius
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pairing isomorphism between two projectors
// ---------------------------------------------------------------------------

/// The invertible map U = U'(1-R)^{-1/2}, R = (P-Q)^2, U' = QP + (1-Q)(1-P),
/// satisfying U P U^{-1} = Q for projectors with ||P - Q|| < 1.
pub fn kato_transform(p: &CMat, q: &CMat) -> Result<CMat> {
    let n = p.nrows();
    let idem_p = max_abs(&(&(p * p) - p));
    let idem_q = max_abs(&(&(q * q) - q));
    if idem_p > 1e-7 || idem_q > 1e-7 {
        return Err(Error::Invalid(format!(
            "pairing transform requires projectors; idempotency residuals {idem_p:.2e}, {idem_q:.2e}"
        )));
    }
    let diff = p - q;
    let dist = spectral_norm(&diff);
    if dist >= 1.0 {
        return Err(Error::ProjectorsTooFar(dist));
    }
    let r = &diff * &diff;
    // (1 - R)^{-1/2} = sum_k c_k R^k with c_k = (2k-1)!!/(2k)!!
    let mut x = cidentity(n);
    let mut term = cidentity(n);
    let mut coef = 1.0f64;
    for k in 1..400 {
        coef *= (k as f64 - 0.5) / k as f64;
        term = &term * &r;
        let tnorm = max_abs(&term) * coef;
        let scaled = cscale(&term, c64::new(coef, 0.0));
        x = &x + &scaled;
        if tnorm < 1e-14 {
            break;
        }
    }
    let id = cidentity(n);
    let u_prime = &(q * p) + &(&(&id - q) * &(&id - p));
    let u = &u_prime * &x;
    // verify the intertwining property
    let uinv = inverse_c(&u);
    let resid = &(&(&u * p) * &uinv) - q;
    let rmax = max_abs(&resid);
    if rmax > 1e-7 {
        return Err(Error::SingularTransform(format!(
            "pairing transform residual ||U P U^-1 - Q|| = {rmax:.3e}"
        )));
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// reduced operator
// ---------------------------------------------------------------------------

/// The reduced operator (1/r) U^{-1} L_xi U restricted to the kernel, in the
/// block frame; `leakage` measures how far the conjugated operator strays
/// from the kernel coordinates.
pub struct ReducedOperator {
    pub matrix: CMat,
    pub leakage: f64,
    pub r: f64,
}

pub fn reduced_operator(
    l_xi: &OperatorMatrix,
    p_xi: &CMat,
    kd: &KernelData,
    frame: &RMat,
    r: f64,
) -> Result<ReducedOperator> {
    if r <= 0.0 {
        return Err(Error::Invalid("reduced operator requires r > 0".into()));
    }
    let u = kato_transform(&kd.projector, p_xi)?;
    let uinv = inverse_c(&u);
    let conj = &(&uinv * &l_xi.values) * &u;
    let framec = to_complex(frame);
    let on_kernel = &conj * &framec;
    // leakage: component of the image outside the kernel coordinates
    let proj_out = &on_kernel - &(&kd.projector * &on_kernel);
    let leakage = max_abs(&proj_out);
    let reduced = adjoint_c(&framec) * &on_kernel;
    Ok(ReducedOperator {
        matrix: cscale(&reduced, c64::new(1.0 / r, 0.0)),
        leakage,
        r,
    })
}

// ---------------------------------------------------------------------------
// second-order coefficients
// ---------------------------------------------------------------------------

/// The four second-order branch coefficients, all real and negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondOrderCoeffs {
    pub acoustic_minus: f64,
    pub entropy: f64,
    pub acoustic_plus: f64,
    pub shear: f64,
}

impl SecondOrderCoeffs {
    pub fn by_label(&self, label: BranchLabel) -> f64 {
        match label {
            BranchLabel::AcousticMinus => self.acoustic_minus,
            BranchLabel::Entropy => self.entropy,
            BranchLabel::AcousticPlus => self.acoustic_plus,
            BranchLabel::Shear => self.shear,
        }
    }
}

/// lambda_j^(2) = < S (v.xi psi_j), v.xi psi_j >_E with psi_j the normalized
/// zeroth-order modes; the shear coefficient uses the transverse mode.
pub fn second_order_coeffs(
    v: &OperatorMatrix,
    kd: &KernelData,
    modes: &ZerothOrderModes,
) -> Result<SecondOrderCoeffs> {
    let quad_form = |mode: &[c64]| -> f64 {
        let norm2: f64 = mode.iter().map(|z| z.re * z.re + z.im * z.im).sum();
        let n = mode.len();
        let mut vm = vec![C_ZERO; n];
        for j in 0..n {
            if mode[j] == C_ZERO {
                continue;
            }
            for i in 0..n {
                vm[i] += v.values[(i, j)] * mode[j];
            }
        }
        let svm = reduced_resolvent_apply(kd, &vm);
        let mut acc = C_ZERO;
        for i in 0..n {
            acc += svm[i] * vm[i].conj();
        }
        acc.re / norm2
    };
    Ok(SecondOrderCoeffs {
        acoustic_minus: quad_form(&modes.acoustic_minus),
        entropy: quad_form(&modes.entropy),
        acoustic_plus: quad_form(&modes.acoustic_plus),
        shear: quad_form(&modes.shear[0]),
    })
}

// ---------------------------------------------------------------------------
// branch classification and tracing
// ---------------------------------------------------------------------------

/// Assignment of slice eigenvalue indices to the four branches.
#[derive(Debug, Clone)]
pub struct BranchAssignment {
    pub acoustic_minus: Vec<usize>,
    pub entropy: Vec<usize>,
    pub acoustic_plus: Vec<usize>,
    pub shear: Vec<usize>,
    /// Eigenvalue spread within the shear cluster (d=3 only; 0 for d=2).
    pub shear_spread: f64,
}

impl BranchAssignment {
    pub fn by_label(&self, label: BranchLabel) -> &[usize] {
        match label {
            BranchLabel::AcousticMinus => &self.acoustic_minus,
            BranchLabel::Entropy => &self.entropy,
            BranchLabel::AcousticPlus => &self.acoustic_plus,
            BranchLabel::Shear => &self.shear,
        }
    }
}

/// Classifies the hydrodynamic group of a slice: the two acoustic branches by
/// the sign of the imaginary part, the entropy branch by eigenvector overlap
/// with the entropy mode, the rest as shear.
pub fn classify_hydrodynamics(
    slice: &SpectralSlice,
    a: f64,
    modes: &ZerothOrderModes,
) -> Result<BranchAssignment> {
    let d = modes.dim;
    let group = slice.indices_above(a);
    if group.len() != d + 2 {
        return Err(Error::BranchTracking {
            r: slice.xi.magnitude(),
            reason: format!(
                "expected {} eigenvalues above -a, found {}",
                d + 2,
                group.len()
            ),
        });
    }
    let plus = *group
        .iter()
        .max_by(|&&i, &&j| slice.values[i].im.total_cmp(&slice.values[j].im))
        .expect("nonempty group");
    let minus = *group
        .iter()
        .min_by(|&&i, &&j| slice.values[i].im.total_cmp(&slice.values[j].im))
        .expect("nonempty group");
    if plus == minus {
        return Err(Error::BranchTracking {
            r: slice.xi.magnitude(),
            reason: "acoustic branches are not separated".into(),
        });
    }
    let rest: Vec<usize> = group
        .iter()
        .copied()
        .filter(|&i| i != plus && i != minus)
        .collect();
    // entropy: the member whose eigenvector has the largest overlap with the
    // entropy mode
    let ent_norm: f64 = modes
        .entropy
        .iter()
        .map(|z| z.re * z.re + z.im * z.im)
        .sum::<f64>()
        .sqrt();
    let overlap = |col: usize| -> f64 {
        let n = slice.right.nrows();
        let mut acc = C_ZERO;
        let mut vnorm = 0.0f64;
        for i in 0..n {
            let z = slice.right[(i, col)];
            acc += z * modes.entropy[i].conj();
            vnorm += z.re * z.re + z.im * z.im;
        }
        cabs(acc) / (vnorm.sqrt() * ent_norm)
    };
    let ent = *rest
        .iter()
        .max_by(|&&i, &&j| overlap(i).total_cmp(&overlap(j)))
        .expect("rest nonempty");
    let shear: Vec<usize> = rest.into_iter().filter(|&i| i != ent).collect();
    if shear.len() != d - 1 {
        return Err(Error::BranchTracking {
            r: slice.xi.magnitude(),
            reason: format!("shear multiplicity {} instead of {}", shear.len(), d - 1),
        });
    }
    let mut spread = 0.0f64;
    for i in 0..shear.len() {
        for j in i + 1..shear.len() {
            spread = spread.max(cabs(slice.values[shear[i]] - slice.values[shear[j]]));
        }
    }
    Ok(BranchAssignment {
        acoustic_minus: vec![minus],
        entropy: vec![ent],
        acoustic_plus: vec![plus],
        shear,
        shear_spread: spread,
    })
}

/// One traced eigenvalue branch over the frequency grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchCurve {
    pub label: BranchLabel,
    pub multiplicity: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl BranchCurve {
    pub fn value(&self, i: usize) -> c64 {
        c64::new(self.re[i], self.im[i])
    }
}

/// Eigenvalue branches over a grid of frequency magnitudes, with fitted first
/// and second order coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTable {
    pub direction: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub curves: Vec<BranchCurve>,
    /// r values where the entropy and shear branches come closer than 1e-9
    /// (possible crossing; flagged, not resolved).
    pub near_collisions: Vec<f64>,
    /// Fitted (first, second) order coefficients per curve, in curve order.
    pub fitted_lambda1_im: Vec<f64>,
    pub fitted_lambda2_re: Vec<f64>,
}

/// Traces the hydrodynamic branches over an increasing r grid by classifying
/// at the first point and continuing by nearest-neighbor matching, with a
/// step-size guard that refines the grid internally when an eigenvalue moves
/// by more than half the minimal inter-branch distance.
pub fn trace_branches(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    modes: &ZerothOrderModes,
    r_grid: &[f64],
    a: f64,
) -> Result<BranchTable> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if r_grid.windows(2).any(|w| w[0] >= w[1]) || r_grid[0] <= 0.0 {
        return Err(Error::Invalid(
            "branch tracing requires a strictly increasing positive r grid".into(),
        ));
    }
    let d = modes.dim;
    let slice_at = |r: f64| -> Result<SpectralSlice> {
        let xi = FrequencyPoint::from_polar(r, &modes.direction)?;
        let l_xi = assemble_l_xi(l, v, &xi)?;
        spectrum(&l_xi, &xi)
    };

    // representative per branch: shear collapses to its mean
    let representatives = |slice: &SpectralSlice, asg: &BranchAssignment| -> [c64; 4] {
        let avg = |idx: &[usize]| -> c64 {
            let mut s = C_ZERO;
            for &i in idx {
                s += slice.values[i];
            }
            s * c64::new(1.0 / idx.len() as f64, 0.0)
        };
        [
            avg(&asg.acoustic_minus),
            avg(&asg.entropy),
            avg(&asg.acoustic_plus),
            avg(&asg.shear),
        ]
    };

    let first = slice_at(r_grid[0])?;
    let asg0 = classify_hydrodynamics(&first, a, modes)?;
    let mut prev = representatives(&first, &asg0);
    let mut curves: Vec<BranchCurve> = BranchLabel::ALL
        .iter()
        .map(|&label| BranchCurve {
            label,
            multiplicity: if label == BranchLabel::Shear { d - 1 } else { 1 },
            re: vec![],
            im: vec![],
        })
        .collect();
    let mut near_collisions = Vec::new();
    let push = |curves: &mut Vec<BranchCurve>, vals: &[c64; 4]| {
        for (c, &z) in curves.iter_mut().zip(vals.iter()) {
            c.re.push(z.re);
            c.im.push(z.im);
        }
    };
    push(&mut curves, &prev);
    if cabs(prev[1] - prev[3]) < 1e-9 {
        near_collisions.push(r_grid[0]);
    }

    let mut r_prev = r_grid[0];
    for &r in &r_grid[1..] {
        let vals = continue_step(&slice_at, r_prev, r, &mut prev, a, modes, 0)?;
        push(&mut curves, &vals);
        if cabs(vals[1] - vals[3]) < 1e-9 {
            near_collisions.push(r);
        }
        r_prev = r;
    }

    // fits: Im lambda ~ lambda1_im r; Re lambda ~ lambda2_re r^2
    let mut fitted_lambda1_im = Vec::new();
    let mut fitted_lambda2_re = Vec::new();
    for c in &curves {
        let (s1, _) = quadratic_through_origin(r_grid, &c.im);
        fitted_lambda1_im.push(s1);
        let (_, s2) = quadratic_through_origin(r_grid, &c.re);
        fitted_lambda2_re.push(s2);
    }
    Ok(BranchTable {
        direction: modes.direction.clone(),
        r_grid: r_grid.to_vec(),
        curves,
        near_collisions,
        fitted_lambda1_im,
        fitted_lambda2_re,
    })
}

fn continue_step(
    slice_at: &impl Fn(f64) -> Result<SpectralSlice>,
    r_prev: f64,
    r: f64,
    prev: &mut [c64; 4],
    a: f64,
    modes: &ZerothOrderModes,
    depth: usize,
) -> Result<[c64; 4]> {
    let slice = slice_at(r)?;
    let asg = classify_hydrodynamics(&slice, a, modes)?;
    let cur = [
        avg_of(&slice, &asg.acoustic_minus),
        avg_of(&slice, &asg.entropy),
        avg_of(&slice, &asg.acoustic_plus),
        avg_of(&slice, &asg.shear),
    ];
    // Step guard on the positional matching. The entropy/shear pair is
    // disambiguated by eigenvector content, not position, and its intra-pair
    // distance is O(r^2)-small, so it is excluded from the guard; only the
    // separation between the acoustic branches and the real group protects
    // the continuation.
    let mut min_gap = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            if (i, j) == (1, 3) {
                continue;
            }
            min_gap = min_gap.min(cabs(cur[i] - cur[j]));
        }
    }
    let max_move = (0..4).map(|i| cabs(cur[i] - prev[i])).fold(0.0, f64::max);
    if max_move > 0.5 * min_gap && min_gap > 0.0 && depth < 8 {
        let mid = 0.5 * (r_prev + r);
        let _ = continue_step(slice_at, r_prev, mid, prev, a, modes, depth + 1)?;
        let vals = continue_step(slice_at, mid, r, prev, a, modes, depth + 1)?;
        *prev = vals;
        return Ok(vals);
    }
    *prev = cur;
    Ok(cur)
}

fn avg_of(slice: &SpectralSlice, idx: &[usize]) -> c64 {
    let mut s = C_ZERO;
    for &i in idx {
        s += slice.values[i];
    }
    s * c64::new(1.0 / idx.len() as f64, 0.0)
}

// ---------------------------------------------------------------------------
// branch projectors and eigentriples
// ---------------------------------------------------------------------------

/// The family of branch spectral projectors at one frequency.
pub struct ProjectorSet {
    pub xi: FrequencyPoint,
    pub total: CMat,
    pub branch: Vec<(BranchLabel, CMat)>,
    /// Analytic zeroth-order branch projectors (E-orthogonal projections onto
    /// the zeroth-order modes); their sum is the kernel projector.
    pub branch_zeroth: Vec<(BranchLabel, CMat)>,
}

pub fn branch_projectors(
    slice: &SpectralSlice,
    asg: &BranchAssignment,
    modes: &ZerothOrderModes,
) -> Result<ProjectorSet> {
    let mut branch = Vec::new();
    let mut total: Option<CMat> = None;
    for label in BranchLabel::ALL {
        let p = eigenvector_projector(slice, asg.by_label(label))?;
        total = Some(match total {
            None => p.clone(),
            Some(t) => &t + &p,
        });
        branch.push((label, p));
    }
    let branch_zeroth = zeroth_projectors(modes);
    Ok(ProjectorSet {
        xi: slice.xi.clone(),
        total: total.expect("four branches"),
        branch,
        branch_zeroth,
    })
}

/// E-orthogonal projectors onto the normalized zeroth-order modes.
fn zeroth_projectors(modes: &ZerothOrderModes) -> Vec<(BranchLabel, CMat)> {
    let n = modes.entropy.len();
    let rank1 = |v: &[c64]| -> CMat {
        let norm2: f64 = v.iter().map(|z| z.re * z.re + z.im * z.im).sum();
        Mat::from_fn(n, n, |i, j| v[i] * v[j].conj() * (1.0 / norm2))
    };
    let mut out = vec![
        (BranchLabel::AcousticMinus, rank1(&modes.acoustic_minus)),
        (BranchLabel::Entropy, rank1(&modes.entropy)),
        (BranchLabel::AcousticPlus, rank1(&modes.acoustic_plus)),
    ];
    let mut shear_sum: Option<CMat> = None;
    for s in &modes.shear {
        let p = rank1(s);
        shear_sum = Some(match shear_sum {
            None => p,
            Some(t) => &t + &p,
        });
    }
    out.push((BranchLabel::Shear, shear_sum.expect("at least one shear mode")));
    out
}

/// Gram matrix of the effective E(k) pairing on the Gaussian basis: the
/// Gaussian-space coefficients are reweighted through
/// <f, g>_{E(k)} = int f conj(g) <v>^{2k} dv evaluated on an exact
/// radial-sphere rule for the measure s^{d-1} (1+s^2)^k e^{-s^2}.
pub fn ek_surrogate_gram(basis: &OrthonormalBasis, k: f64) -> Result<RMat> {
    if !basis.is_gaussian() {
        return Err(Error::BasisMismatch(
            "the surrogate pairing reweights the Gaussian basis".into(),
        ));
    }
    let d = basis.dim();
    let nd = basis.spec.max_degree;
    let radial = gauss_from_weight(
        nd + 3 + k.abs().ceil() as usize,
        |s| s.powi(d as i32 - 1) * (1.0 + s * s).powf(k) * (-s * s).exp(),
        &[(0.0, 3.0), (3.0, 6.0), (6.0, 12.0)],
    );
    let sphere = SphereRule::new(d, 2 * nd + 2)?;
    let n = basis.len();
    let npts = radial.nodes.len() * sphere.len();
    let mut nodes = Vec::with_capacity(npts * d);
    let mut weights = Vec::with_capacity(npts);
    for (s, ws) in radial.nodes.iter().zip(&radial.weights) {
        for j in 0..sphere.len() {
            for l in 0..d {
                nodes.push(s * sphere.node(j)[l]);
            }
            weights.push(ws * sphere.weights[j]);
        }
    }
    let f = basis.factor_matrix(&nodes);
    let mut fw = f.clone();
    let pref = (2.0 * std::f64::consts::PI).powf(-(d as f64));
    for (q, w) in weights.iter().enumerate() {
        for i in 0..n {
            fw[(q, i)] *= w * pref;
        }
    }
    let mut g = f.transpose() * &fw;
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    Ok(g)
}

/// A right eigenfunction, its biorthogonal left functional and the branch tag.
pub struct EigenTriple {
    pub label: BranchLabel,
    /// Index within the branch (shear has d-1 members).
    pub member: usize,
    pub right: Vec<c64>,
    pub left: Vec<c64>,
}

/// Builds biorthogonal eigentriples from the branch projectors: right vectors
/// are the projected zeroth-order modes (the shear family orthonormalized in
/// the surrogate E(k) pairing), left functionals are the pairing-adjoint
/// projectors applied to the rights.
pub fn eigentriples(
    pset: &ProjectorSet,
    modes: &ZerothOrderModes,
    wk: &RMat,
) -> Result<Vec<EigenTriple>> {
    let n = modes.entropy.len();
    let wkc = to_complex(wk);
    let pair = |x: &[c64], y: &[c64]| -> c64 {
        // <x, y>_{W} = y^H W x
        let mut wx = vec![C_ZERO; n];
        for j in 0..n {
            if x[j] == C_ZERO {
                continue;
            }
            for i in 0..n {
                wx[i] += wkc[(i, j)] * x[j];
            }
        }
        let mut acc = C_ZERO;
        for i in 0..n {
            acc += wx[i] * y[i].conj();
        }
        acc
    };
    let apply = |m: &CMat, x: &[c64]| -> Vec<c64> {
        let mut out = vec![C_ZERO; n];
        for j in 0..n {
            if x[j] == C_ZERO {
                continue;
            }
            for i in 0..n {
                out[i] += m[(i, j)] * x[j];
            }
        }
        out
    };
    let mut triples = Vec::new();
    for (label, p) in &pset.branch {
        let seeds: Vec<&Vec<c64>> = match label {
            BranchLabel::AcousticMinus => vec![&modes.acoustic_minus],
            BranchLabel::Entropy => vec![&modes.entropy],
            BranchLabel::AcousticPlus => vec![&modes.acoustic_plus],
            BranchLabel::Shear => modes.shear.iter().collect(),
        };
        // project the seeds, then Gram-Schmidt in the surrogate pairing
        let mut rights: Vec<Vec<c64>> = Vec::new();
        for seed in seeds {
            let mut e = apply(p, seed);
            for prev in &rights {
                let c = pair(&e, prev);
                for i in 0..n {
                    e[i] -= c * prev[i];
                }
            }
            let norm2 = pair(&e, &e).re;
            if !(norm2 > 0.0) {
                return Err(Error::SingularTransform(
                    "degenerate Gram matrix while orthogonalizing branch modes".into(),
                ));
            }
            let inv = 1.0 / norm2.sqrt();
            for z in e.iter_mut() {
                *z = *z * inv;
            }
            // fix the phase so the overlap with the seed is positive real
            let ph = pair(seed, &e);
            let m = cabs(ph);
            if m > 0.0 {
                let rot = c64::new(ph.re / m, ph.im / m);
                for z in e.iter_mut() {
                    *z = *z * rot;
                }
            }
            rights.push(e);
        }
        // left functionals: f = W^{-1} P^H W e, so that <e, f>_W = e^H W P e
        let wkinv_pw = {
            let pw = adjoint_c(p) * &wkc;
            solve_c(&wkc, &pw)
        };
        push_members(&mut triples, *label, &rights, |e| apply(&wkinv_pw, e));
    }
    Ok(triples)
}

fn push_members(
    triples: &mut Vec<EigenTriple>,
    label: BranchLabel,
    rights: &[Vec<c64>],
    mut left_of: impl FnMut(&[c64]) -> Vec<c64>,
) {
    for (m, e) in rights.iter().enumerate() {
        triples.push(EigenTriple {
            label,
            member: m,
            right: e.clone(),
            left: left_of(e),
        });
    }
}

/// Branch-averaged eigenvalues in label order, for the semigroup splitting.
pub fn branch_eigenvalues(
    slice: &SpectralSlice,
    asg: &BranchAssignment,
) -> Vec<(BranchLabel, c64)> {
    BranchLabel::ALL
        .iter()
        .map(|&label| (label, avg_of(slice, asg.by_label(label))))
        .collect()
}

/// Convergence of the eigentriples to their zeroth-order modes: for each
/// branch member, || e(r) - e0 || in the surrogate pairing over the r grid,
/// and the fitted order (the expansions predict order one).
pub struct EigentripleExpansion {
    pub r_grid: Vec<f64>,
    /// (label, member, residuals per r, fitted order) per triple.
    pub rows: Vec<(BranchLabel, usize, Vec<f64>, f64)>,
    /// Worst biorthogonality residual across the grid.
    pub biorthogonality_residual: f64,
}

pub fn eigentriple_expansion(
    l: &OperatorMatrix,
    v: &OperatorMatrix,
    modes: &ZerothOrderModes,
    wk: &RMat,
    r_grid: &[f64],
    a: f64,
) -> Result<EigentripleExpansion> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let wkc = to_complex(wk);
    let n = modes.entropy.len();
    let norm_w = |x: &[c64]| -> f64 {
        let mut wx = vec![C_ZERO; n];
        for j in 0..n {
            if x[j] == C_ZERO {
                continue;
            }
            for i in 0..n {
                wx[i] += wkc[(i, j)] * x[j];
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            acc += (wx[i] * x[i].conj()).re;
        }
        acc.sqrt()
    };
    // normalized zeroth-order modes per (label, member)
    let normalize = |x: &[c64]| -> Vec<c64> {
        let s = 1.0 / norm_w(x);
        x.iter().map(|&z| z * s).collect()
    };
    let mut seeds: Vec<(BranchLabel, usize, Vec<c64>)> = vec![
        (BranchLabel::AcousticMinus, 0, normalize(&modes.acoustic_minus)),
        (BranchLabel::Entropy, 0, normalize(&modes.entropy)),
        (BranchLabel::AcousticPlus, 0, normalize(&modes.acoustic_plus)),
    ];
    for (m, s) in modes.shear.iter().enumerate() {
        seeds.push((BranchLabel::Shear, m, normalize(s)));
    }
    let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); seeds.len()];
    let mut biorth = 0.0f64;
    for &r in r_grid {
        let xi = FrequencyPoint::from_polar(r, &modes.direction)?;
        let l_xi = assemble_l_xi(l, v, &xi)?;
        let slice = spectrum(&l_xi, &xi)?;
        let asg = classify_hydrodynamics(&slice, a, modes)?;
        let pset = branch_projectors(&slice, &asg, modes)?;
        let triples = eigentriples(&pset, modes, wk)?;
        let bio = biorthogonality_matrix(&triples, wk);
        let m = triples.len();
        for aa in 0..m {
            for bb in 0..m {
                let target = if aa == bb { C_ONE } else { C_ZERO };
                biorth = biorth.max(cabs(bio[(aa, bb)] - target));
            }
        }
        for (si, (label, member, seed)) in seeds.iter().enumerate() {
            let t = triples
                .iter()
                .find(|t| t.label == *label && t.member == *member)
                .ok_or_else(|| Error::Invalid("missing eigentriple".into()))?;
            let diff: Vec<c64> = t
                .right
                .iter()
                .zip(seed.iter())
                .map(|(&a, &b)| a - b)
                .collect();
            residuals[si].push(norm_w(&diff));
        }
    }
    let rows = seeds
        .into_iter()
        .enumerate()
        .map(|(si, (label, member, _))| {
            let order = loglog_slope(r_grid, &residuals[si]);
            (label, member, residuals[si].clone(), order)
        })
        .collect();
    Ok(EigentripleExpansion {
        r_grid: r_grid.to_vec(),
        rows,
        biorthogonality_residual: biorth,
    })
}

/// Biorthogonality matrix <e_alpha, f_beta>_W for a set of triples; the
/// identity up to the stated tolerance when the construction succeeded.
pub fn biorthogonality_matrix(triples: &[EigenTriple], wk: &RMat) -> CMat {
    let n = wk.nrows();
    let wkc = to_complex(wk);
    let m = triples.len();
    let mut out = Mat::<c64>::zeros(m, m);
    for (a, ta) in triples.iter().enumerate() {
        let mut we = vec![C_ZERO; n];
        for j in 0..n {
            if ta.right[j] == C_ZERO {
                continue;
            }
            for i in 0..n {
                we[i] += wkc[(i, j)] * ta.right[j];
            }
        }
        for (b, tb) in triples.iter().enumerate() {
            let mut acc = C_ZERO;
            for i in 0..n {
                acc += we[i] * tb.left[i].conj();
            }
            out[(a, b)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a0_matrix_eigenvalues() {
        for d in [2usize, 3] {
            let a0 = a0_matrix(d).unwrap();
            let eig = crate::linalg::eig_c(&a0).unwrap();
            let c = acoustic_speed(d);
            let mut ims: Vec<f64> = eig.values.iter().map(|z| z.im).collect();
            ims.sort_by(f64::total_cmp);
            assert!(eig.values.iter().all(|z| z.re.abs() < 1e-12));
            assert!((ims[0] + c).abs() < 1e-12);
            assert!(ims[1].abs() < 1e-12);
            assert!((ims[2] - c).abs() < 1e-12);
            // kernel eigenvector proportional to (1, 0, -sqrt(d/2)):
            // the entropy mode (1 - (1/2)(|v|^2 - d)) M in the block frame
            let k = (0..3)
                .min_by(|&i, &j| cabs(eig.values[i]).total_cmp(&cabs(eig.values[j])))
                .unwrap();
            let v0 = eig.right[(0, k)];
            let v1 = eig.right[(1, k)];
            let v2 = eig.right[(2, k)];
            assert!(cabs(v1) < 1e-12);
            let ratio = v2 * v0.conj();
            let expect = -((d as f64) / 2.0).sqrt() * cabs(v0) * cabs(v0);
            assert!((ratio.re - expect).abs() < 1e-12 && ratio.im.abs() < 1e-12);
        }
    }

    #[test]
    fn direction_frame_orthonormal() {
        let dir = [0.3, -0.5, 0.81];
        let h = direction_frame(&dir).unwrap();
        let hth = h.transpose() * &h;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((hth[(i, j)] - target).abs() < 1e-12);
            }
        }
        let norm = (0.3f64 * 0.3 + 0.5 * 0.5 + 0.81 * 0.81).sqrt();
        for i in 0..3 {
            assert!((h[(i, 0)] - dir[i] / norm).abs() < 1e-12);
        }
        // e_1 direction: identity
        let h1 = direction_frame(&[1.0, 0.0]).unwrap();
        assert!((h1[(0, 0)] - 1.0).abs() == 0.0 && h1[(0, 1)].abs() == 0.0);
    }

    #[test]
    fn kato_transform_toy_rotation() {
        // P = diag(1,0), Q = rotation of P by theta: U must be that rotation
        let th: f64 = 0.3;
        let p = Mat::from_fn(2, 2, |i, j| {
            if i == 0 && j == 0 {
                C_ONE
            } else {
                C_ZERO
            }
        });
        let (c, s) = (th.cos(), th.sin());
        let q = Mat::from_fn(2, 2, |i, j| {
            let rot = [[c * c, c * s], [c * s, s * s]];
            c64::new(rot[i][j], 0.0)
        });
        let u = kato_transform(&p, &q).unwrap();
        let expect = [[c, -s], [s, c]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    cabs(u[(i, j)] - c64::new(expect[i][j], 0.0)) < 1e-10,
                    "U[{i}{j}] = {:?}",
                    u[(i, j)]
                );
            }
        }
        // Q = P: identity
        let u_id = kato_transform(&p, &p).unwrap();
        assert!(cabs(u_id[(0, 0)] - C_ONE) < 1e-14 && cabs(u_id[(1, 1)] - C_ONE) < 1e-14);
        // distance >= 1 rejected: orthogonal projectors
        let q2 = Mat::from_fn(2, 2, |i, j| {
            if i == 1 && j == 1 {
                C_ONE
            } else {
                C_ZERO
            }
        });
        assert!(kato_transform(&p, &q2).is_err());
    }
}
