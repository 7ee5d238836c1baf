//! Adaptive Simpson quadrature, used only as an independent numeric oracle
//! against the exact integral tables.

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, left, 0.5 * eps, depth - 1) + recurse(f, m, b, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson with Richardson acceptance on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    recurse(f, a, b, whole, eps, depth)
}
