//! Small numerical helpers: deterministic reductions and Richardson differences.

/// Pairwise (tree) summation with a fixed split order, so results are
/// bit-reproducible regardless of threading.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        return s;
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Mean by pairwise summation.
pub fn pairwise_mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    pairwise_sum(x) / x.len() as f64
}

/// Mean of the pointwise product `a * b`.
pub fn weighted_mean(a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_mean(&prod)
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Richardson-extrapolated central difference of a scalar function at 0.
///
/// Combines step sizes `h` and `h/2`, cancelling the O(h²) error term.
pub fn richardson_derivative<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// Field-valued version of [`richardson_derivative`].
pub fn richardson_derivative_vec<F: FnMut(f64) -> Vec<f64>>(mut f: F, h: f64) -> Vec<f64> {
    let p1 = f(h);
    let m1 = f(-h);
    let p2 = f(0.5 * h);
    let m2 = f(-0.5 * h);
    (0..p1.len())
        .map(|i| {
            let d1 = (p1[i] - m1[i]) / (2.0 * h);
            let d2 = (p2[i] - m2[i]) / h;
            (4.0 * d2 - d1) / 3.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_exact_on_quartics() {
        let d = richardson_derivative(|t| 1.0 + 2.0 * t + 3.0 * t * t + 5.0 * t.powi(3) + t.powi(4), 1e-2);
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&x), 499500.0);
    }
}
