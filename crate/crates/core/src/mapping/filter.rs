use crate::worldsim::Scan;

/// Drops near-sensor low-intensity returns (dust, droplets).
///
/// The cutoff is the `percentile` quantile of the intensities of the whole
/// scan, taken as the order statistic at index `min(floor(p·n), n-1)`. A
/// return is removed iff its range is at most `neighborhood` and its
/// intensity is strictly below the cutoff. Order is preserved.
pub fn filter_scan(scan: &Scan, neighborhood: f64, percentile: f64) -> Scan {
    let mut out = scan.clone();
    let n = scan.returns.len();
    if n == 0 {
        return out;
    }
    let mut sorted: Vec<f64> = scan.returns.iter().map(|r| r.intensity).collect();
    sorted.sort_by(f64::total_cmp);
    let idx = ((percentile * n as f64).floor() as usize).min(n - 1);
    let q = sorted[idx];
    out.returns.retain(|r| !(r.range <= neighborhood && r.intensity < q));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{Pose, Return};
    use crate::Vec3;

    fn scan(items: &[(f64, f64)]) -> Scan {
        let mut s = Scan::empty(Pose::new(Vec3::ZERO, 0.0), 50.0);
        s.returns = items.iter().map(|&(range, intensity)| Return { direction: Vec3::X, range, intensity }).collect();
        s
    }

    #[test]
    fn lowest_decile_removed() {
        let items: Vec<(f64, f64)> = (1..=10).map(|i| (1.0, i as f64 / 10.0)).collect();
        let out = filter_scan(&scan(&items), 3.0, 0.10);
        assert_eq!(out.returns.len(), 9);
        assert!(out.returns.iter().all(|r| r.intensity > 0.1 + 1e-12));
    }

    #[test]
    fn far_returns_untouched() {
        let items: Vec<(f64, f64)> = (1..=10).map(|i| (5.0, i as f64 / 10.0)).collect();
        let s = scan(&items);
        assert_eq!(filter_scan(&s, 3.0, 0.10), s);
    }

    #[test]
    fn uniform_intensity_untouched() {
        let s = scan(&[(1.0, 0.5); 7]);
        assert_eq!(filter_scan(&s, 3.0, 0.10), s);
    }

    #[test]
    fn empty_scan() {
        let s = scan(&[]);
        assert!(filter_scan(&s, 3.0, 0.1).returns.is_empty());
    }
}
