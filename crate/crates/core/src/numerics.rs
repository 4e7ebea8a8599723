//! Scalar numerical kernels: composite Simpson quadrature, cumulative
//! integrals on uniform grids, bisection and golden-section search.

use crate::error::{Error, Result};

/// Composite Simpson rule for uniformly spaced samples (odd length).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number of nodes");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Running integral `∫_0^{x_i} f` at every node of a uniform grid.
///
/// Even nodes use composite Simpson; odd nodes add the three-point partial
/// panel `h/12 (5 f_0 + 8 f_1 − f_2)` to the previous even node.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    let mut i = 0;
    while i + 2 < n {
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        out[i + 1] = out[i] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        out[i + 2] = out[i] + h / 3.0 * (f0 + 4.0 * f1 + f2);
        i += 2;
    }
    if i + 1 < n {
        // trailing odd node: mirror the partial panel backwards
        let (f0, f1, f2) = (values[i - 1], values[i], values[i + 1]);
        out[i + 1] = out[i] + h / 12.0 * (-f0 + 8.0 * f1 + 5.0 * f2);
    }
    out
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo:.3e}, {fhi:.3e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= tol * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximiser and maximum of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let (fa, fb, fx) = (f(a), f(b), f(x));
    if fa >= fx && fa >= fb {
        (a, fa)
    } else if fb >= fx {
        (b, fb)
    } else {
        (x, fx)
    }
}

/// Maximum over `[a, b]` of a function that may be multimodal: coarse grid
/// scan followed by golden-section refinement around the best cell.
pub fn grid_golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize, tol: f64) -> (f64, f64) {
    let h = (b - a) / cells as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=cells {
        let v = f(a + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = (a + h * best_i.saturating_sub(1) as f64).max(a);
    let hi = (a + h * (best_i + 1) as f64).min(b);
    let (x, v) = golden_max(&f, lo, hi, tol);
    if v >= best {
        (x, v)
    } else {
        (a + h * best_i as f64, best)
    }
}

/// `count` points geometrically spaced on `[lo, hi]`, both ends included.
pub fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (r * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let h = 0.25;
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let n = 101;
        let h = 1.0 / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).cos()).collect();
        let c = cumulative_simpson(&v, h);
        for (i, ci) in c.iter().enumerate() {
            assert!((ci - (i as f64 * h).sin()).abs() < 1e-9, "node {i}");
        }
        let even = cumulative_simpson(&v[..100], h);
        assert!((even[99] - (99.0 * h).sin()).abs() < 1e-9);
    }

    #[test]
    fn bisect_and_golden() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
    }
}
