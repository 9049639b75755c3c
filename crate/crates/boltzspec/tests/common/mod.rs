//! Shared fixtures: assembled operators are cached per (dimension, degree) so
//! the suites do not re-run the quadrature sweeps for every test.

use boltzspec::basis::{build_basis, BasisSpec, OrthonormalBasis};
use boltzspec::collision::{assemble_l, assemble_nu_multiplier, default_grids, OperatorMatrix};
use boltzspec::fourier::assemble_v_projection;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

pub struct System {
    pub basis: OrthonormalBasis,
    pub l: OperatorMatrix,
    pub nu: OperatorMatrix,
    pub v_e1: OperatorMatrix,
}

static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static System>>> = OnceLock::new();

pub fn gaussian_system(d: usize, degree: usize) -> &'static System {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(sys) = guard.get(&(d, degree)) {
        return sys;
    }
    let basis = build_basis(&BasisSpec::gaussian(d, degree)).unwrap();
    let (quad, sphere) = default_grids(&basis).unwrap();
    let l = assemble_l(&basis, &quad, &sphere).unwrap();
    let nu = assemble_nu_multiplier(&basis, &quad).unwrap();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let v_e1 = assemble_v_projection(&basis, &e1).unwrap();
    let sys = Box::leak(Box::new(System { basis, l, nu, v_e1 }));
    guard.insert((d, degree), sys);
    sys
}

pub fn unit(d: usize, axis: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[axis] = 1.0;
    e
}
