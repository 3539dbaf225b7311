//! Small numerical helpers shared across the crate.
//!
//! All reductions used in reproducibility-sensitive paths go through
//! [`NeumaierSum`]: a compensated accumulator applied in ascending index
//! order, so results are independent of thread count (parallel map,
//! sequential reduce).

/// Kahan–Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice in index order.
pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Compensated mean; zero-length input yields NaN.
pub fn mean(xs: &[f64]) -> f64 {
    sum(xs) / xs.len() as f64
}

/// Euclidean norm of a vector.
pub fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Squared Euclidean distance between two points.
pub fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two points.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    dist2_sq(a, b).sqrt()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Least-squares slope of `y` against `x`.
///
/// Returns `None` when fewer than two points are given or the `x` values are
/// all identical.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = NeumaierSum::new();
    let mut sxy = NeumaierSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        sxx.add((xi - mx) * (xi - mx));
        sxy.add((xi - mx) * (yi - my));
    }
    let sxx = sxx.value();
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let _ = n;
    Some(sxy.value() / sxx)
}

/// Sample variance (divisor `n − 1`); exactly zero for bit-identical
/// observations so deterministic replicas report a clean zero.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 2, "sample variance needs at least two observations");
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(xs);
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    acc.value() / (n - 1) as f64
}

/// Population standard deviation (divisor `n`).
pub fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 1);
    let m = mean(xs);
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    (acc.value() / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        // 1 + 1e100 - 1e100 loses the 1 under naive summation.
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(&xs), 2.0);
    }

    #[test]
    fn slope_of_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| 3.5 - 2.0 * t).collect();
        let s = ls_slope(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(0.0, (0.5f64).ln());
        assert!((v - 1.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        // Far apart: the small term vanishes.
        assert_eq!(log_add_exp(0.0, -800.0), 0.0);
    }
}
