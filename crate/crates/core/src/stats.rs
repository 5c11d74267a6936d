//! Small order-statistic helpers shared by depth and diagnostics.

/// Median with the usual midpoint rule for even lengths. NaN-free input assumed.
pub fn median(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (_, &mut upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Unnormalized median absolute deviation (no 1.4826 consistency factor).
pub fn mad(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    let m = median_in_place(&mut buf);
    for v in buf.iter_mut() {
        *v = (*v - m).abs();
    }
    median_in_place(&mut buf)
}

/// Returns (median, unnormalized MAD) reusing `buf` as scratch space.
pub(crate) fn median_mad_in_place(buf: &mut [f64]) -> (f64, f64) {
    let m = median_in_place(buf);
    for v in buf.iter_mut() {
        *v = (*v - m).abs();
    }
    (m, median_in_place(buf))
}

/// Empirical quantile, linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default).
pub fn quantile_type7(values: &[f64], prob: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn mad_is_unnormalized() {
        // |x - 3| = {2,1,0,1,2} -> median 1
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]), 1.0);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&v, 0.5), 3.0);
        assert_eq!(quantile_type7(&v, 1.0), 5.0);
        assert!((quantile_type7(&v, 0.1) - 1.4).abs() < 1e-12);
    }
}
