use boltzspec::basis::BasisSpec;
use boltzspec::linalg::{cabs, eig_c, max_abs};
use boltzspec::weighted::{assemble_in_ek, EkAssemblyConfig};

fn main() {
    let d = 2;
    let n = 4;
    let p = BasisSpec::required_p(d, n, 6.0);
    let spec = BasisSpec::polynomial(d, n, 6.0, p);
    let mut prev: Option<boltzspec::linalg::CMat> = None;
    for extra in [0usize, 4, 8] {
        let mut cfg = EkAssemblyConfig::for_degree(n);
        cfg.g_order += extra;
        cfg.rho_order += extra;
        cfg.gain_sphere_degree += 2 * extra;
        cfg.conv_sphere_degree += 2 * extra;
        cfg.conv_panel_order += extra;
        cfg.pairing_order += extra;
        let ek = assemble_in_ek(&spec, &cfg).unwrap();
        let eig = eig_c(&ek.l.values).unwrap();
        let mut mags: Vec<f64> = eig.values.iter().map(|z| cabs(*z)).collect();
        mags.sort_by(f64::total_cmp);
        let near: usize = mags.iter().filter(|&&m| m < 1e-3).count();
        print!(
            "extra={extra}: gram={:.1e} near(1e-3)={near} smallest=[{:.2e} {:.2e} {:.2e} {:.2e} {:.2e}]",
            ek.gram_residual, mags[0], mags[1], mags[2], mags[3], mags[4]
        );
        if let Some(p) = &prev {
            let diff = p - &ek.l.values;
            print!("  drift={:.2e}", max_abs(&diff));
        }
        println!();
        prev = Some(ek.l.values.clone());
    }
}
