//! Shared quadrature routines: adaptive Simpson and Gauss-Legendre rules.

use crate::error::{Error, Result};

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`. Starts from 16 uniform panels so narrow features cannot hide from
/// the first stencil, then refines each panel adaptively.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const SEED_PANELS: usize = 16;
    let h = (b - a) / SEED_PANELS as f64;
    let panel_tol = tol / SEED_PANELS as f64;
    let mut acc = 0.0;
    let mut fa = f(a);
    for i in 0..SEED_PANELS {
        let x0 = a + i as f64 * h;
        let x1 = if i + 1 == SEED_PANELS { b } else { x0 + h };
        let m = 0.5 * (x0 + x1);
        let fm = f(m);
        let fb = f(x1);
        let whole = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
        acc += simpson_rec(&f, x0, x1, fa, fm, fb, whole, panel_tol, 44)?;
        fa = fb;
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::Quadrature(format!("non-finite integral over [{a}, {b}]")))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "max recursion depth reached over [{a}, {b}] (residual {:.3e})",
            delta.abs()
        )));
    }
    let lv = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}

/// Composite Simpson over `n` uniform panels (2n+1 evaluations).
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    let mut fa = f(a);
    for i in 0..n {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fm = f(0.5 * (x0 + x1));
        let fb = f(x1);
        acc += h / 6.0 * (fa + 4.0 * fm + fb);
        fa = fb;
    }
    acc
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the node counts used here (n <= 4096).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate `f` over `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (b - a);
    let d = 0.5 * (a + b);
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(c * x + d);
    }
    c * acc
}

/// First derivative at 0 by central differences with one Richardson step.
pub fn central_derivative<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Second derivative at 0 by central differences with two Richardson steps
/// (O(h^6) truncation). f(0) is supplied by the caller, often exactly 0 for
/// CGFs. Prefer a generous h: the stencil divides function noise by h².
pub fn central_second_derivative<F: Fn(f64) -> Result<f64>>(f: F, f0: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(h)? - 2.0 * f0 + f(-h)?) / (h * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let d4 = d(0.25 * h)?;
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}
