//! Numerical oracles shared by unit tests.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integrates `f` piecewise over consecutive `breaks`, so that kinks and
/// discontinuities at the breaks do not slow the adaptive rule down.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| {
            // evaluate strictly inside each piece so one-sided limits are used
            let (a, b) = (w[0], w[1]);
            if b <= a {
                return 0.0;
            }
            let eps = (b - a) * 1e-12;
            adaptive_simpson(&f, a + eps, b - eps, tol) + 2.0 * eps * f(0.5 * (a + b))
        })
        .sum()
}
