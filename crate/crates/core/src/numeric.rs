//! Deterministic reductions shared by the Monte Carlo estimators.
//!
//! All ensemble statistics reduce index-ordered buffers with pairwise
//! summation, so results are bitwise identical no matter how many worker
//! threads produced the buffer.

/// Pairwise (cascade) sum of a slice. The reduction tree depends only on
/// the slice length, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(v)` over a slice, without materialising the mapped buffer.
pub fn pairwise_sum_by<F: Fn(f64) -> f64 + Copy>(values: &[f64], f: F) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().map(|&v| f(v)).sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_by(&values[..mid], f) + pairwise_sum_by(&values[mid..], f)
}

/// Mean via pairwise summation. Empty input yields 0.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance (ddof = 1) via pairwise summation.
/// Returns 0 for fewer than two samples.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    pairwise_sum_by(values, |v| (v - m) * (v - m)) / (values.len() - 1) as f64
}

/// Standard error of the mean: sample-std / sqrt(N).
pub fn standard_error(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (sample_variance(values) / values.len() as f64).sqrt()
}

/// Slope of the least-squares line through (x, y) pairs.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
