//! Deterministic quadrature: adaptive Simpson panels and fixed-order
//! Gauss-Legendre rules. These back every oracle in the crate; Monte Carlo
//! estimates are always checked against values produced here.

/// 8-point Gauss-Legendre abscissas/weights on [-1, 1].
pub const GL8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

/// Fixed 8-point Gauss-Legendre on [a, b].
pub fn gl8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL8.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite 8-point Gauss-Legendre over `panels` equal panels.
pub fn gl8_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| gl8(&f, a + i as f64 * h, a + (i + 1) as f64 * h)).sum()
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    // The relative floor keeps huge-magnitude panels (whose absolute
    // tolerance would demand more than f64 precision) from recursing
    // forever; outer substitution factors always damp them.
    let threshold = 15.0 * (tol + 1e-12 * (left + right).abs());
    if depth == 0 || delta.abs() <= threshold {
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Adaptive Simpson after the substitution x = a + u^2 (tames an
/// (x-a)^{-1/2}-type singularity at the left endpoint; the transformed
/// integrand has a removable zero at u = 0).
pub fn adaptive_sqrt_left<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let span = (b - a).max(0.0).sqrt();
    // Below u_min the reconstruction a + u^2 rounds back onto the endpoint
    // and would re-expose the singularity; the skipped mass is O(u_min).
    let u_min = span * 1e-9;
    adaptive(
        |u| if u <= u_min { 0.0 } else { 2.0 * u * f(a + u * u) },
        0.0,
        span,
        tol,
    )
}

/// Adaptive Simpson after the substitution dist = b - x = u^2 for a
/// right-endpoint singularity. The integrand receives the DISTANCE to the
/// endpoint, so the caller can evaluate the singular factor exactly instead
/// of recovering it from a rounded x.
pub fn adaptive_sqrt_right<F: Fn(f64) -> f64>(f_dist: F, a: f64, b: f64, tol: f64) -> f64 {
    let span = (b - a).max(0.0).sqrt();
    adaptive(
        |u| if u < 1e-75 { 0.0 } else { 2.0 * u * f_dist(u * u) },
        0.0,
        span,
        tol,
    )
}

/// Adaptive Simpson after dist = b - x = u^4; flattens (b-x)^{-3/4}
/// endpoint singularities. Distance-calling like `adaptive_sqrt_right`.
pub fn adaptive_quartic_right<F: Fn(f64) -> f64>(f_dist: F, a: f64, b: f64, tol: f64) -> f64 {
    let span = (b - a).max(0.0).powf(0.25);
    adaptive(
        |u| if u < 1e-75 { 0.0 } else { 4.0 * u * u * u * f_dist(u * u * u * u) },
        0.0,
        span,
        tol,
    )
}

/// Adaptive Simpson after dist = x - a = u^4 (left-endpoint (x-a)^{-3/4});
/// the integrand receives the distance to the left endpoint.
pub fn adaptive_quartic_left<F: Fn(f64) -> f64>(f_dist: F, a: f64, b: f64, tol: f64) -> f64 {
    let span = (b - a).max(0.0).powf(0.25);
    adaptive(
        |u| if u < 1e-75 { 0.0 } else { 4.0 * u * u * u * f_dist(u * u * u * u) },
        0.0,
        span,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = adaptive(|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-10);
        let g = gl8(|x| x * x * x + x, -1.0, 3.0);
        assert!((g - (81.0 / 4.0 - 1.0 / 4.0 + 4.0)).abs() < 1e-10);
    }

    #[test]
    fn gaussian_tail() {
        let v = adaptive(|x| (-x * x).exp(), -8.0, 8.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sqrt_singularities() {
        // int_0^1 x^{-1/2} dx = 2
        let v = adaptive_sqrt_left(|x| x.powf(-0.5), 0.0, 1.0, 1e-10);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
        // int_0^1 (1-x)^{-3/4} dx = 4, integrand given the distance 1 - x
        let v = adaptive_quartic_right(|d: f64| d.powf(-0.75), 0.0, 1.0, 1e-10);
        assert!((v - 4.0).abs() < 1e-8, "{v}");
        // int_0^1 x^{-3/4} (1 + x) dx = 4 + 4/5, distance from the left
        let v = adaptive_quartic_left(|d: f64| d.powf(-0.75) * (1.0 + d), 0.0, 1.0, 1e-10);
        assert!((v - 4.8).abs() < 1e-8, "{v}");
        // sqrt_right with the distance convention: int_0^1 (1-x)^{-1/2} = 2
        let v = adaptive_sqrt_right(|d: f64| d.powf(-0.5), 0.0, 1.0, 1e-10);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn panels_agree_with_adaptive() {
        let f = |x: f64| (x.sin() + 1.2).ln();
        let a = gl8_panels(f, 0.0, 3.0, 16);
        let b = adaptive(f, 0.0, 3.0, 1e-12);
        assert!((a - b).abs() < 1e-10);
    }
}
