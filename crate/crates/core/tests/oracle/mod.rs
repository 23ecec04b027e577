//! Independent reference computations for checking the core crate.
//! Nothing here calls into the implementation under test.
#![allow(dead_code)]

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
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
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Self-paced weight functions written out directly from their definitions.
pub fn weight_hard(lambda: f64, l: f64) -> f64 {
    if l < lambda {
        1.0
    } else {
        0.0
    }
}

pub fn weight_soft(lambda: f64, l: f64) -> f64 {
    if l < lambda {
        1.0 - l / lambda
    } else {
        0.0
    }
}

pub fn weight_log(lambda: f64, l: f64) -> f64 {
    // Rewritten as a logistic in (l - λ) with a separate scale factor.
    let scale = 1.0 + (-lambda).exp();
    let z = l - lambda;
    if z > 0.0 {
        scale * (-z).exp() / (1.0 + (-z).exp())
    } else {
        scale / (1.0 + z.exp())
    }
}

pub fn weight_by_name(name: &str, lambda: f64, l: f64) -> f64 {
    match name {
        "hard" => weight_hard(lambda, l),
        "soft" => weight_soft(lambda, l),
        "log" => weight_log(lambda, l),
        _ => unreachable!(),
    }
}

/// `∫₀^L v(λ, l) dl` by quadrature, split at the discontinuity `l = λ`.
pub fn latent_by_quadrature(name: &str, lambda: f64, loss: f64) -> f64 {
    let f = |l: f64| weight_by_name(name, lambda, l);
    if loss <= lambda {
        adaptive_simpson(&f, 0.0, loss, 1e-13)
    } else {
        adaptive_simpson(&f, 0.0, lambda, 1e-13) + adaptive_simpson(&f, lambda, loss, 1e-13)
    }
}

/// Probability-domain softmax with no log tricks beyond max subtraction.
pub fn softmax(row: &[f64], t: f64) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| ((v - m) / t).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// JS divergence with logarithms in the given base.
pub fn js(p: &[f64], q: &[f64], base: f64) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)) / base.ln()
}

pub fn argmax_loop(row: &[f64]) -> usize {
    let mut best = 0;
    let mut i = 0;
    while i < row.len() {
        if row[i] > row[best] {
            best = i;
        }
        i += 1;
    }
    best
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + h;
            let up = f(&work);
            work[i] = orig - h;
            let down = f(&work);
            work[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between two gradients, with an absolute floor so
/// near-zero components do not dominate.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().chain(analytic).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1e-3 * scale))
        .fold(0.0, f64::max)
}
