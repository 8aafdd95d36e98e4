//! Smoothed-RTT estimator driving FIB next-hop lifetimes.
//!
//! A node measures the round trip of each Interest/Data pair locally and
//! keeps per-next-hop smoothed RTT and RTT variation, TCP-style. The
//! next-hop lifetime is `srtt + 4 * rttv`; variation is updated against
//! the pre-update smoothed value.

use crate::error::SimError;

pub const ALPHA: f64 = 7.0 / 8.0;
pub const BETA: f64 = 3.0 / 4.0;

/// Minimum armed next-hop lifetime, per the one-second floor of the
/// retransmission-timer convention the estimator follows; also the
/// lifetime used before any RTT sample exists (e.g. an entry created by
/// overheard unsolicited data).
pub const NEXTHOP_TIMEOUT_FLOOR_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttEstimator {
    pub last_rtt: f64,
    pub srtt: f64,
    pub rttv: f64,
}

impl RttEstimator {
    /// First sample: srtt = rtt, rttv = rtt / 2.
    pub fn new(rtt: f64) -> Result<Self, SimError> {
        if rtt <= 0.0 {
            return Err(SimError::NonPositiveRtt(rtt));
        }
        Ok(RttEstimator {
            last_rtt: rtt,
            srtt: rtt,
            rttv: rtt / 2.0,
        })
    }

    /// Subsequent samples: the variation uses the pre-update srtt.
    pub fn update(&mut self, rtt: f64) -> Result<(), SimError> {
        if rtt <= 0.0 {
            return Err(SimError::NonPositiveRtt(rtt));
        }
        self.rttv = BETA * self.rttv + (1.0 - BETA) * (rtt - self.srtt).abs();
        self.srtt = ALPHA * self.srtt + (1.0 - ALPHA) * rtt;
        self.last_rtt = rtt;
        Ok(())
    }

    /// Lifetime armed on a unicast Interest through this next-hop.
    pub fn timeout(&self) -> f64 {
        self.srtt + 4.0 * self.rttv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_initializes() {
        let e = RttEstimator::new(0.100).unwrap();
        assert_eq!(e.srtt, 0.100);
        assert_eq!(e.rttv, 0.050);
    }

    #[test]
    fn update_orders_rttv_before_srtt() {
        let mut e = RttEstimator {
            last_rtt: 0.080,
            srtt: 0.080,
            rttv: 0.020,
        };
        e.update(0.160).unwrap();
        assert!((e.rttv - 0.035).abs() < 1e-15, "rttv={}", e.rttv);
        assert!((e.srtt - 0.090).abs() < 1e-15, "srtt={}", e.srtt);
        assert!((e.timeout() - 0.230).abs() < 1e-15);
    }

    #[test]
    fn constant_samples_reach_fixed_point() {
        let mut e = RttEstimator::new(0.050).unwrap();
        for _ in 0..200 {
            e.update(0.050).unwrap();
        }
        assert!((e.srtt - 0.050).abs() < 1e-12);
        assert!(e.rttv < 1e-12, "rttv decays toward 0, got {}", e.rttv);
        assert!(e.timeout() > 0.0);
    }

    #[test]
    fn nonpositive_samples_rejected() {
        assert!(RttEstimator::new(0.0).is_err());
        assert!(RttEstimator::new(-0.1).is_err());
        let mut e = RttEstimator::new(0.1).unwrap();
        assert!(e.update(0.0).is_err());
    }

    #[test]
    fn srtt_stays_within_sample_envelope() {
        let mut rng = crate::kernel::RngStream::new(5, "est");
        for _ in 0..200 {
            let first = rng.uniform(0.001, 1.0).unwrap();
            let mut e = RttEstimator::new(first).unwrap();
            let mut lo = first;
            let mut hi = first;
            for _ in 0..50 {
                let s = rng.uniform(0.001, 1.0).unwrap();
                lo = lo.min(s);
                hi = hi.max(s);
                e.update(s).unwrap();
                assert!(e.srtt >= lo - 1e-12 && e.srtt <= hi + 1e-12);
                assert!(e.rttv >= 0.0);
            }
        }
    }
}
