//! Efficiency, fairness and cell loss ratio.

use thiserror::Error;

use crate::aal5::efficiency_ceiling;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("negative goodput {0}")]
    NegativeGoodput(f64),
    #[error("dropped cells ({dropped}) exceed offered cells ({offered})")]
    DroppedExceedsOffered { dropped: u64, offered: u64 },
    #[error("link rate must be positive")]
    NonPositiveRate,
}

/// Sum of TCP goodputs over the maximum TCP-attainable throughput for this
/// MSS on a link of `link_rate_mbps` cell-layer capacity.
pub fn efficiency(goodputs_mbps: &[f64], link_rate_mbps: f64, mss: u32) -> Result<f64, MetricsError> {
    if let Some(&g) = goodputs_mbps.iter().find(|g| **g < 0.0) {
        return Err(MetricsError::NegativeGoodput(g));
    }
    if link_rate_mbps <= 0.0 {
        return Err(MetricsError::NonPositiveRate);
    }
    let total: f64 = goodputs_mbps.iter().sum();
    Ok(total / (efficiency_ceiling(mss) * link_rate_mbps))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fairness {
    Index(f64),
    /// Every source had zero throughput; the index is undefined.
    NoTraffic,
}

impl Fairness {
    pub fn value(self) -> Option<f64> {
        match self {
            Fairness::Index(v) => Some(v),
            Fairness::NoTraffic => None,
        }
    }
}

/// `(sum x)^2 / (N * sum x^2)`.
pub fn fairness_index(xs: &[f64]) -> Fairness {
    let sum: f64 = xs.iter().sum();
    let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sum_sq == 0.0 {
        return Fairness::NoTraffic;
    }
    Fairness::Index(sum * sum / (xs.len() as f64 * sum_sq))
}

pub fn cell_loss_ratio(dropped: u64, offered: u64) -> Result<f64, MetricsError> {
    if dropped > offered {
        return Err(MetricsError::DroppedExceedsOffered { dropped, offered });
    }
    if offered == 0 {
        return Ok(0.0);
    }
    Ok(dropped as f64 / offered as f64)
}

/// Bytes over an interval, in megabits per second (10^6 bits).
pub fn throughput_mbps(bytes: u64, seconds: f64) -> f64 {
    if seconds <= 0.0 {
        return 0.0;
    }
    bytes as f64 * 8.0 / seconds / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn efficiency_examples() {
        let max = efficiency_ceiling(9180) * 149.7;
        assert!((max - 134.35).abs() < 0.01);
        assert!((efficiency(&[max], 149.7, 9180).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(efficiency(&[0.0, 0.0], 149.7, 9180).unwrap(), 0.0);
        let e = efficiency(&[60.0, 60.0], 149.7, 9180).unwrap();
        assert!((e - 120.0 / max).abs() < 1e-12);
        assert!((e - 0.8932).abs() < 1e-4);
        assert!(efficiency(&[-1.0], 149.7, 9180).is_err());
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(fairness_index(&[3.0; 7]), Fairness::Index(1.0));
        assert_eq!(fairness_index(&[0.0, 0.0, 5.0, 0.0]), Fairness::Index(0.25));
        let Fairness::Index(f) = fairness_index(&[1.0, 2.0, 3.0]) else { panic!() };
        assert!((f - 36.0 / 42.0).abs() < 1e-12);
        assert_eq!(fairness_index(&[0.0, 0.0]), Fairness::NoTraffic);
    }

    #[test]
    fn clr_examples() {
        assert_eq!(cell_loss_ratio(0, 10).unwrap(), 0.0);
        assert_eq!(cell_loss_ratio(5, 1000).unwrap(), 0.005);
        assert_eq!(cell_loss_ratio(7, 7).unwrap(), 1.0);
        assert_eq!(cell_loss_ratio(0, 0).unwrap(), 0.0);
        assert!(cell_loss_ratio(8, 7).is_err());
    }

    proptest! {
        #[test]
        fn fairness_bounds_and_scale_invariance(
            xs in prop::collection::vec(0.0f64..1e3, 1..60),
            c in 1e-3f64..1e3,
        ) {
            prop_assume!(xs.iter().any(|&x| x > 0.0));
            let f = fairness_index(&xs).value().unwrap();
            let n = xs.len() as f64;
            prop_assert!(f <= 1.0 + 1e-12 && f >= 1.0 / n - 1e-12);
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let g = fairness_index(&scaled).value().unwrap();
            prop_assert!((f - g).abs() < 1e-12);
        }
    }
}
