use boltzspec::basis::{build_basis, BasisSpec};
use boltzspec::collision::{assemble_l, default_grids};
use std::time::Instant;
fn main() {
    for (d, n) in [(3usize, 6usize), (3, 8)] {
        let basis = build_basis(&BasisSpec::gaussian(d, n)).unwrap();
        let (quad, sphere) = default_grids(&basis).unwrap();
        let t = Instant::now();
        let l = assemble_l(&basis, &quad, &sphere).unwrap();
        println!("d={d} N={n}: n={} assembled in {:.2}s", l.dim(), t.elapsed().as_secs_f64());
    }
}
