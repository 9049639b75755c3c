//! Small least-squares fits used by the expansion and decay checks.

/// Slope of the least-squares line through (ln x_i, ln y_i); the empirical
/// order of y = C x^order.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    line_fit(&pts).0
}

/// Fit y = C e^{rate t} on positive samples; returns (rate, C).
pub fn exp_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    let (rate, intercept) = line_fit(&pts);
    (rate, intercept.exp())
}

/// Least-squares line through the points; returns (slope, intercept).
pub fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Least-squares fit of y = a x + b x^2 through the origin-anchored samples;
/// returns (a, b).
pub fn quadratic_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mut s22 = 0.0;
    let mut s23 = 0.0;
    let mut s33 = 0.0;
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let x2 = x * x;
        s22 += x2;
        s23 += x2 * x;
        s33 += x2 * x2;
        r1 += x * y;
        r2 += x2 * y;
    }
    let det = s22 * s33 - s23 * s23;
    ((s33 * r1 - s23 * r2) / det, (s22 * r2 - s23 * r1) / det)
}
