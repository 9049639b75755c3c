//! Implementations of the batch subcommands.

use crate::cache::MatrixCache;
use crate::config::{parse_grid, parse_vector, RunConfig};
use crate::output::{write_json, Csv, CsvField};
use crate::CmdError;
use boltzspec::basis::{build_basis, OrthonormalBasis};
use boltzspec::branches::{
    branch_eigenvalues, branch_projectors, classify_hydrodynamics, first_order_modes,
    kernel_data, second_order_coeffs, total_projector_expansion, trace_branches,
};
use boltzspec::collision::{
    assemble_l, compute_nu, estimate_nu_bounds, spectral_gap, OperatorMatrix,
};
use boltzspec::fourier::{
    assemble_l_xi, assemble_v_projection, contour_projector, spectrum, ContourSpec,
    FrequencyPoint,
};
use boltzspec::linalg::{max_abs, CMat, C_ZERO};
use boltzspec::quadrature::{QuadratureGrid, SphereRule};
use boltzspec::semigroup::{large_xi_decay, splitting_check};
use boltzspec::weighted::{assemble_in_ek, assemble_v_in_ek, compare_spectra, EkAssemblyConfig};
use serde_json::json;
use std::path::Path;
use std::process::ExitCode;

pub struct System {
    pub basis: OrthonormalBasis,
    pub l: OperatorMatrix,
    pub gap: f64,
    pub a: f64,
    pub from_cache: bool,
}

/// Assembles (or loads from cache) the Gaussian-space collision operator and
/// derives the hydrodynamic separation threshold.
pub fn build_system(cfg: &RunConfig) -> Result<System, CmdError> {
    let spec = cfg.gaussian_spec();
    spec.validate().map_err(|e| CmdError::Config(e.to_string()))?;
    let basis = build_basis(&spec)?;
    let quad = QuadratureGrid::build(cfg.dimension, cfg.effective_quad_order())?;
    let sphere = SphereRule::new(cfg.dimension, 2 * cfg.degree + 4)?;
    let descriptor = json!({
        "kind": "L",
        "spec": spec,
        "quad_order": quad.spec.order,
        "sphere_degree": sphere.degree,
    });
    let key = MatrixCache::key_of("L", &descriptor);
    let mut from_cache = false;
    let l = if let Some(dir) = &cfg.cache_dir {
        let cache = MatrixCache::new(dir)?;
        if let Some(values) = cache.load(&key) {
            from_cache = true;
            OperatorMatrix {
                values,
                basis_id: boltzspec::collision::basis_id(&basis),
                dim_v: cfg.dimension,
                pairing: boltzspec::collision::PairingTag::GaussianE,
                meta: boltzspec::collision::AssemblyMeta {
                    g_order: quad.spec.order,
                    rho_order: quad.spec.order + 1,
                    sphere_degree: sphere.degree,
                    wall_time_s: 0.0,
                    truncated_top_degree: false,
                    direction: None,
                },
            }
        } else {
            let l = assemble_l(&basis, &quad, &sphere)?;
            cache.store(&key, "L", &l.values, l.meta.wall_time_s, &descriptor)?;
            l
        }
    } else {
        assemble_l(&basis, &quad, &sphere)?
    };
    let gap = spectral_gap(cfg.dimension, &l)?;
    let a = if cfg.a > 0.0 { cfg.a } else { gap / 2.0 };
    if a >= gap {
        return Err(CmdError::Config(format!(
            "threshold a = {a} is not below the measured spectral gap {gap}"
        )));
    }
    Ok(System {
        basis,
        l,
        gap,
        a,
        from_cache,
    })
}

fn require_dim(cfg: &RunConfig, xi: &[f64]) -> Result<(), CmdError> {
    cfg.check_xi(xi).map_err(CmdError::Config)
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CmdError> {
    match out {
        Some(path) => write_json(path, value)?,
        None => print!("{}", crate::output::to_json_string(value)?),
    }
    Ok(())
}

fn emit_text(text: String, out: Option<&Path>) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn nu(cfg: &RunConfig, speeds: &str, out: Option<&Path>) -> Result<ExitCode, CmdError> {
    let grid = parse_grid(speeds).map_err(CmdError::Config)?;
    let values: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let mut v = vec![0.0; cfg.dimension];
            v[0] = s;
            compute_nu(cfg.dimension, &v)
        })
        .collect();
    let bounds = estimate_nu_bounds(cfg.dimension, &grid)?;
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "dimension": cfg.dimension,
            "speeds": grid,
            "nu": values,
            "nu0": bounds.nu0,
            "nu1": bounds.nu1,
        }),
        out,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn assemble(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode, CmdError> {
    let sys = build_system(cfg)?;
    if let Some(path) = out {
        std::fs::write(path, crate::cache::encode_matrix(&sys.l.values))?;
    }
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "dimension": cfg.dimension,
            "degree": cfg.degree,
            "size": sys.l.dim(),
            "spectral_gap": sys.gap,
            "from_cache": sys.from_cache,
            "wall_time_s": sys.l.meta.wall_time_s,
        }),
        None,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn spectrum_cmd_eigenvalues(
    sys: &System,
    xi: &FrequencyPoint,
) -> Result<(Vec<(f64, f64)>, usize), CmdError> {
    let dir = xi
        .direction()
        .unwrap_or_else(|| crate::commands::e1(xi.dim()));
    let v = assemble_v_projection(&sys.basis, &dir)?;
    let l_xi = assemble_l_xi(&sys.l, &v, xi)?;
    let slice = spectrum(&l_xi, xi)?;
    let modes = first_order_modes(&sys.basis, &dir)?;
    let branch_count = classify_hydrodynamics(&slice, sys.a, &modes)
        .map(|_| 4)
        .unwrap_or(0);
    Ok((
        slice.values.iter().map(|z| (z.re, z.im)).collect(),
        branch_count,
    ))
}

pub fn e1(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

pub fn spectrum_cmd(
    cfg: &RunConfig,
    xi: Option<&str>,
    xi_grid: Option<&str>,
    direction: Option<&str>,
    out: Option<&Path>,
) -> Result<ExitCode, CmdError> {
    let sys = build_system(cfg)?;
    match (xi, xi_grid) {
        (Some(xi), None) => {
            let xi = parse_vector(xi).map_err(CmdError::Config)?;
            require_dim(cfg, &xi)?;
            let fp = FrequencyPoint::new(xi.clone());
            let (eigs, branch_count) = spectrum_cmd_eigenvalues(&sys, &fp)?;
            emit(
                &json!({
                    "schema_version": cfg.schema_version,
                    "xi": xi,
                    "eigenvalues": eigs.iter().map(|(re, im)| json!({"re": re, "im": im})).collect::<Vec<_>>(),
                    "branch_count": branch_count,
                }),
                out,
            )?;
        }
        (None, Some(grid)) => {
            let dir = parse_vector(direction.ok_or_else(|| {
                CmdError::Config("--xi-grid requires --direction".into())
            })?)
            .map_err(CmdError::Config)?;
            require_dim(cfg, &dir)?;
            let r_grid = parse_grid(grid).map_err(CmdError::Config)?;
            let r_grid: Vec<f64> = r_grid.into_iter().filter(|&r| r > 0.0).collect();
            let v = assemble_v_projection(&sys.basis, &dir)?;
            let modes = first_order_modes(&sys.basis, &dir)?;
            let table = trace_branches(&sys.l, &v, &modes, &r_grid, sys.a)?;
            let mut csv = Csv::new(&["r", "branch", "re", "im", "multiplicity"]);
            for (i, &r) in table.r_grid.iter().enumerate() {
                for curve in &table.curves {
                    csv.row(&[
                        CsvField::Float(r),
                        CsvField::Str(curve.label.as_str()),
                        CsvField::Float(curve.re[i]),
                        CsvField::Float(curve.im[i]),
                        CsvField::Int(curve.multiplicity as i64),
                    ]);
                }
            }
            emit_text(csv.finish(), out)?;
        }
        _ => {
            return Err(CmdError::Config(
                "provide exactly one of --xi or --xi-grid".into(),
            ))
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn branches(
    cfg: &RunConfig,
    direction: &str,
    r_grid: &str,
    out: Option<&Path>,
) -> Result<ExitCode, CmdError> {
    let dir = parse_vector(direction).map_err(CmdError::Config)?;
    require_dim(cfg, &dir)?;
    let grid = parse_grid(r_grid).map_err(CmdError::Config)?;
    let grid: Vec<f64> = grid.into_iter().filter(|&r| r > 0.0).collect();
    if grid.is_empty() {
        return Err(CmdError::Config("the r grid has no positive points".into()));
    }
    let sys = build_system(cfg)?;
    let v = assemble_v_projection(&sys.basis, &dir)?;
    let modes = first_order_modes(&sys.basis, &dir)?;
    let table = trace_branches(&sys.l, &v, &modes, &grid, sys.a)?;
    let mut csv = Csv::new(&["r", "branch", "re", "im", "multiplicity"]);
    for (i, &r) in table.r_grid.iter().enumerate() {
        for curve in &table.curves {
            csv.row(&[
                CsvField::Float(r),
                CsvField::Str(curve.label.as_str()),
                CsvField::Float(curve.re[i]),
                CsvField::Float(curve.im[i]),
                CsvField::Int(curve.multiplicity as i64),
            ]);
        }
    }
    emit_text(csv.finish(), out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn coeffs(cfg: &RunConfig, direction: &str, out: Option<&Path>) -> Result<ExitCode, CmdError> {
    let dir = parse_vector(direction).map_err(CmdError::Config)?;
    require_dim(cfg, &dir)?;
    let sys = build_system(cfg)?;
    let v = assemble_v_projection(&sys.basis, &dir)?;
    let kd = kernel_data(cfg.dimension, &sys.l)?;
    let modes = first_order_modes(&sys.basis, &dir)?;
    let so = second_order_coeffs(&v, &kd, &modes)?;
    // curvature fits over a decade of frequencies
    let grid: Vec<f64> = (0..10)
        .map(|i| 0.01 * (10f64).powf(i as f64 / 9.0))
        .collect();
    let table = trace_branches(&sys.l, &v, &modes, &grid, sys.a)?;
    let labels: Vec<&str> = table.curves.iter().map(|c| c.label.as_str()).collect();
    let lambda1: Vec<serde_json::Value> = modes
        .lambda1
        .iter()
        .map(|z| json!({"re": z.re, "im": z.im}))
        .collect();
    let lambda2: Vec<f64> = table
        .curves
        .iter()
        .map(|c| so.by_label(c.label))
        .collect();
    let fit_residuals: Vec<f64> = table
        .curves
        .iter()
        .zip(&table.fitted_lambda2_re)
        .map(|(c, fit)| {
            let formula = so.by_label(c.label);
            (fit - formula).abs() / formula.abs()
        })
        .collect();
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "direction": dir,
            "branches": labels,
            "lambda1": lambda1,
            "lambda2": lambda2,
            "fit_residuals": fit_residuals,
        }),
        out,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn projectors(cfg: &RunConfig, xi: &str, out: Option<&Path>) -> Result<ExitCode, CmdError> {
    let xi = parse_vector(xi).map_err(CmdError::Config)?;
    require_dim(cfg, &xi)?;
    let fp = FrequencyPoint::new(xi.clone());
    let r = fp.magnitude();
    if r <= 0.0 || r > cfg.r0 {
        return Err(CmdError::Config(format!(
            "projector expansions require 0 < |xi| <= r0 = {}",
            cfg.r0
        )));
    }
    let dir = fp.direction().expect("nonzero frequency");
    let sys = build_system(cfg)?;
    let v = assemble_v_projection(&sys.basis, &dir)?;
    let kd = kernel_data(cfg.dimension, &sys.l)?;
    let modes = first_order_modes(&sys.basis, &dir)?;
    let l_xi = assemble_l_xi(&sys.l, &v, &fp)?;
    let slice = spectrum(&l_xi, &fp)?;
    let asg = classify_hydrodynamics(&slice, sys.a, &modes)?;
    let pset = branch_projectors(&slice, &asg, &modes)?;
    // projector algebra diagnostics
    let mut idem = 0.0f64;
    let mut cross = 0.0f64;
    let mut ranks = Vec::new();
    for (la, pa) in &pset.branch {
        let r1 = &(pa * pa) - pa;
        idem = idem.max(max_abs(&r1));
        let mut tr = C_ZERO;
        for i in 0..pa.nrows() {
            tr += pa[(i, i)];
        }
        ranks.push(json!({"branch": la.as_str(), "rank": tr.re.round() as i64}));
        for (lb, pb) in &pset.branch {
            if la != lb {
                cross = cross.max(max_abs(&(pa * pb)));
            }
        }
    }
    let contour = ContourSpec::circle(C_ZERO, sys.a / 2.0);
    let pc = contour_projector(&l_xi, &contour, &slice.values)?;
    let sum_vs_contour = max_abs(&(&pset.total - &pc));
    // zeroth-order sum against the kernel projector
    let mut sum0: Option<CMat> = None;
    for (_, p0) in &pset.branch_zeroth {
        sum0 = Some(match sum0 {
            None => p0.clone(),
            Some(t) => &t + p0,
        });
    }
    let zeroth_vs_kernel = max_abs(&(&sum0.unwrap() - &kd.projector));
    // first-order formula over a sub-grid
    let sub: Vec<f64> = (1..=4).map(|i| r * i as f64 / 4.0).collect();
    let exp = total_projector_expansion(&sys.l, &v, &kd, &dir, &sub, sys.a)?;
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "xi": xi,
            "ranks": ranks,
            "idempotency_residual": idem,
            "mutual_annihilation_residual": cross,
            "total_vs_contour_residual": sum_vs_contour,
            "zeroth_sum_vs_kernel_residual": zeroth_vs_kernel,
            "first_order_remainder_order": exp.fitted_order,
        }),
        out,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn semigroup(
    cfg: &RunConfig,
    xi: &str,
    t_grid: &str,
    out: Option<&Path>,
) -> Result<ExitCode, CmdError> {
    let xi = parse_vector(xi).map_err(CmdError::Config)?;
    require_dim(cfg, &xi)?;
    let fp = FrequencyPoint::new(xi.clone());
    let times = parse_grid(t_grid).map_err(CmdError::Config)?;
    let sys = build_system(cfg)?;
    let tau = 1.0 / compute_nu(cfg.dimension, &vec![0.0; cfg.dimension]);
    let r = fp.magnitude();
    let report = if r > 0.0 && r <= cfg.r0 {
        let dir = fp.direction().expect("nonzero");
        let v = assemble_v_projection(&sys.basis, &dir)?;
        let modes = first_order_modes(&sys.basis, &dir)?;
        let l_xi = assemble_l_xi(&sys.l, &v, &fp)?;
        let slice = spectrum(&l_xi, &fp)?;
        let asg = classify_hydrodynamics(&slice, sys.a, &modes)?;
        let pset = branch_projectors(&slice, &asg, &modes)?;
        let lambdas = branch_eigenvalues(&slice, &asg);
        splitting_check(&l_xi, &pset, &lambdas, &times, (2.0 * tau, 10.0 * tau))?
    } else {
        // the full semigroup decays on the reciprocal-abscissa time scale
        let dir = fp.direction().unwrap_or_else(|| e1(cfg.dimension));
        let v = assemble_v_projection(&sys.basis, &dir)?;
        let l_xi = assemble_l_xi(&sys.l, &v, &fp)?;
        let slice = spectrum(&l_xi, &fp)?;
        let t1 = 1.0 / slice.spectral_abscissa().abs().max(1e-12);
        let t_max = times.last().copied().unwrap_or(0.0);
        let hi = (10.0 * t1).min(t_max);
        let lo = (2.0 * t1).min(0.5 * hi);
        large_xi_decay(&sys.l, &v, &fp, cfg.r0.min(r), &times, (lo, hi))?
    };
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "xi": xi,
            "gamma_fit": report.gamma_fit,
            "C_fit": report.c_fit,
            "commutation_residual": report.commutation_residual,
            "norms": report
                .times
                .iter()
                .zip(&report.norms)
                .map(|(t, v)| json!({"t": t, "v_norm": v}))
                .collect::<Vec<_>>(),
        }),
        out,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn enlargement(cfg: &RunConfig, xi: &str, out: Option<&Path>) -> Result<ExitCode, CmdError> {
    let xi = parse_vector(xi).map_err(CmdError::Config)?;
    require_dim(cfg, &xi)?;
    let fp = FrequencyPoint::new(xi.clone());
    let r = fp.magnitude();
    let dir = fp.direction().unwrap_or_else(|| e1(cfg.dimension));
    let sys = build_system(cfg)?;
    let v = assemble_v_projection(&sys.basis, &dir)?;
    let l_xi = assemble_l_xi(&sys.l, &v, &fp)?;
    let gauss_slice = spectrum(&l_xi, &fp)?;

    let pspec = cfg.polynomial_spec();
    let ek_cfg = EkAssemblyConfig::for_degree(pspec.max_degree);
    let ek = assemble_in_ek(&pspec, &ek_cfg)?;
    let vk = assemble_v_in_ek(&ek.basis, &dir)?;
    let lk_xi = assemble_l_xi(&ek.l, &vk, &fp)?;
    let poly_slice = spectrum(&lk_xi, &fp)?;
    let cmp = compare_spectra(&gauss_slice, &poly_slice, cfg.weight_k, sys.a);
    emit(
        &json!({
            "schema_version": cfg.schema_version,
            "k": cfg.weight_k,
            "xi": xi,
            "r": r,
            "count_gauss": cmp.count_gauss,
            "count_poly": cmp.count_poly,
            "pairs": cmp
                .pairs
                .iter()
                .map(|(gre, gim, pre, pim, dist)| {
                    json!({
                        "gauss": {"re": gre, "im": gim},
                        "poly": {"re": pre, "im": pim},
                        "dist": dist,
                    })
                })
                .collect::<Vec<_>>(),
            "max_dist": cmp.max_distance,
        }),
        out,
    )?;
    Ok(ExitCode::SUCCESS)
}
