use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean of the final `ceil(0.1 * n)` returns.
    pub avg_return_last_10pct: f64,
    /// First 1-based episode whose trailing `window`-episode mean exceeds the threshold.
    pub convergence_episode: Option<usize>,
}

pub fn compute_metrics(returns: &[f64], threshold: f64, window: usize) -> Result<Metrics> {
    if returns.is_empty() {
        return Err(Error::EmptySeries);
    }
    let tail = returns.len().div_ceil(10);
    let last = &returns[returns.len() - tail..];
    let avg = last.iter().sum::<f64>() / tail as f64;
    Ok(Metrics {
        avg_return_last_10pct: avg,
        convergence_episode: convergence_episode(returns, threshold, window),
    })
}

fn convergence_episode(returns: &[f64], threshold: f64, window: usize) -> Option<usize> {
    if window == 0 || returns.len() < window {
        return None;
    }
    returns
        .windows(window)
        .position(|w| w.iter().sum::<f64>() / window as f64 > threshold)
        .map(|start| start + window)
}

/// Median of finite values; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Median convergence episode, counting runs that never converged as infinitely late.
pub fn median_episode(episodes: &[Option<usize>]) -> Option<f64> {
    let as_real: Vec<f64> = episodes
        .iter()
        .map(|e| e.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    median(&as_real).filter(|m| m.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_converges_at_first_window() {
        let m = compute_metrics(&[-100.0; 20], -200.0, 10).unwrap();
        assert_eq!(m.avg_return_last_10pct, -100.0);
        assert_eq!(m.convergence_episode, Some(10));
    }

    #[test]
    fn never_crossing() {
        let m = compute_metrics(&[-300.0; 30], -200.0, 10).unwrap();
        assert_eq!(m.convergence_episode, None);
    }

    #[test]
    fn tail_average() {
        let mut r = vec![-250.0; 9];
        r.extend([-150.0; 11]);
        let m = compute_metrics(&r, -200.0, 10).unwrap();
        assert_eq!(m.avg_return_last_10pct, -150.0);
        // windows ending at 10..: mean at end=15 is (4*-250 + 6*-150)/10 = -190
        assert_eq!(m.convergence_episode, Some(15));
    }

    #[test]
    fn threshold_is_strict() {
        let m = compute_metrics(&[-200.0; 10], -200.0, 10).unwrap();
        assert_eq!(m.convergence_episode, None);
    }

    #[test]
    fn short_series() {
        let m = compute_metrics(&[-1.0; 3], -200.0, 10).unwrap();
        assert_eq!(m.convergence_episode, None);
        assert_eq!(m.avg_return_last_10pct, -1.0);
        assert_eq!(compute_metrics(&[], -200.0, 10), Err(Error::EmptySeries));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[-100.0, -300.0, -200.0]), Some(-200.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median_episode(&[Some(10), None, Some(30)]), Some(30.0));
        assert_eq!(median_episode(&[None, None, Some(30)]), None);
    }
}
