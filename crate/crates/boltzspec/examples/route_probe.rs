use boltzspec::basis::{build_basis, BasisSpec};
use boltzspec::weighted::{gain_form, lossex_form, EkAssemblyConfig, TestSide};
use std::f64::consts::PI;

fn main() {
    let d = 2;
    // exact reference: E[nu] = |S^1| E|V - Z| = 2 pi sqrt(pi)
    let enu = 2.0 * PI * PI.sqrt();
    println!("E[nu] d=2 exact: {enu:.12}");
    let basis = build_basis(&BasisSpec::gaussian(d, 3)).unwrap();
    for extra in [0usize, 4, 8] {
        let mut cfg = EkAssemblyConfig::for_degree(3);
        cfg.g_order += extra;
        cfg.rho_order += extra;
        cfg.gain_sphere_degree += 2 * extra;
        cfg.conv_sphere_degree += 2 * extra;
        cfg.conv_panel_order += extra;
        cfg.pairing_order += extra;
        let gain = gain_form(&basis, TestSide::GaussianE(&basis), None, &cfg).unwrap();
        let lossex = lossex_form(&basis, TestSide::GaussianE(&basis), None, &cfg).unwrap();
        println!(
            "extra={extra}: gain00 = {:.10} (want {:.10}), lossex00 = {:.10} (want {:.10})",
            gain[(0, 0)],
            2.0 * enu,
            lossex[(0, 0)],
            enu
        );
    }
}
