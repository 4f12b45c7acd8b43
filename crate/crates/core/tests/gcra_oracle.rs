//! GCRA against an independently written continuous-state leaky bucket.

use proptest::prelude::*;
use satubr::contract::{
    burst_tolerance, dual_bucket_check, gcra_check, GcraState, Policer, TrafficDescriptor, Verdict,
};
use satubr::sim::SimTime;

/// Continuous-state leaky bucket: content drains one unit per nanosecond,
/// each conforming cell adds `inc`, and a cell conforms while the drained
/// content does not exceed `limit`.
struct LeakyBucket {
    inc: i128,
    limit: i128,
    content: i128,
    last: i128,
}

impl LeakyBucket {
    fn new(inc: u64, limit: u64) -> Self {
        LeakyBucket {
            inc: inc as i128,
            limit: limit as i128,
            content: 0,
            last: 0,
        }
    }

    fn would_conform(&self, t: i128) -> (bool, i128) {
        let drained = (self.content - (t - self.last)).max(0);
        (drained <= self.limit, drained)
    }

    fn commit(&mut self, t: i128, drained: i128) {
        self.content = drained + self.inc;
        self.last = t;
    }

    fn offer(&mut self, t: i128) -> bool {
        let (ok, drained) = self.would_conform(t);
        if ok {
            self.commit(t, drained);
        }
        ok
    }
}

fn arrivals(gaps: &[u64]) -> Vec<u64> {
    gaps.iter()
        .scan(0u64, |t, g| {
            *t += g;
            Some(*t)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn single_bucket_matches_leaky_bucket(
        inc in 1u64..5_000,
        limit in 0u64..20_000,
        gaps in prop::collection::vec(0u64..8_000, 1..200),
    ) {
        let mut g = GcraState::new(inc, limit);
        let mut oracle = LeakyBucket::new(inc, limit);
        for t in arrivals(&gaps) {
            let v = gcra_check(&mut g, SimTime::from_nanos(t)).unwrap();
            prop_assert_eq!(v.is_conforming(), oracle.offer(t as i128), "t={}", t);
        }
    }

    #[test]
    fn dual_bucket_matches_coupled_leaky_buckets(
        pcr_inc in 1u64..2_000,
        extra in 1u64..6_000,
        bt in 0u64..30_000,
        cdvt in 0u64..3_000,
        gaps in prop::collection::vec(0u64..6_000, 1..200),
    ) {
        let scr_inc = pcr_inc + extra;
        let mut p = GcraState::new(pcr_inc, cdvt);
        let mut s = GcraState::new(scr_inc, bt + cdvt);
        let mut op = LeakyBucket::new(pcr_inc, cdvt);
        let mut os = LeakyBucket::new(scr_inc, bt + cdvt);
        for t in arrivals(&gaps) {
            let v = dual_bucket_check(&mut p, &mut s, SimTime::from_nanos(t)).unwrap();
            let t = t as i128;
            let (a, da) = op.would_conform(t);
            let (b, db) = os.would_conform(t);
            if a && b {
                op.commit(t, da);
                os.commit(t, db);
            }
            prop_assert_eq!(v.is_conforming(), a && b);
        }
    }

    #[test]
    fn burst_tolerance_monotone(
        pcr in 100.0f64..1e6,
        scr_frac in 0.01f64..1.0,
        mbs in 1u32..1000,
        more in 1u32..100,
        lower in 0.5f64..1.0,
    ) {
        let scr = pcr * scr_frac;
        let d = TrafficDescriptor::vbr(pcr, scr, mbs, 0.0, false).unwrap();
        let bigger_mbs = TrafficDescriptor::vbr(pcr, scr, mbs + more, 0.0, false).unwrap();
        let lower_scr = TrafficDescriptor::vbr(pcr, scr * lower, mbs, 0.0, false).unwrap();
        let bt = burst_tolerance(&d).unwrap();
        prop_assert!(bt >= 0.0);
        prop_assert!(burst_tolerance(&bigger_mbs).unwrap() >= bt);
        // a lower SCR means a larger 1/SCR term
        prop_assert!(burst_tolerance(&lower_scr).unwrap() >= bt);
    }

    #[test]
    fn compliant_on_off_source_never_policed(
        pcr in 1_000.0f64..1e6,
        scr_frac in 0.05f64..0.9,
        mbs in 1u32..64,
        bursts in 1usize..6,
    ) {
        let d = TrafficDescriptor::vbr(pcr, pcr * scr_frac, mbs, 0.0, false).unwrap();
        let tp = d.pcr_increment_ns();
        let ts = d.scr_increment_ns().unwrap();
        let mut policer = Policer::new(&d).unwrap();
        // MBS cells at PCR, then silence until the SCR bucket has fully drained
        let mut t = 0u64;
        for _ in 0..bursts {
            for k in 0..mbs as u64 {
                let v = policer.check(SimTime::from_nanos(t + k * tp)).unwrap();
                prop_assert_eq!(v, Verdict::Conforming);
            }
            t += mbs as u64 * ts;
        }
    }
}

#[test]
fn stream_faster_than_pcr_is_policed() {
    let d = TrafficDescriptor::ubr(1000.0, 0.0).unwrap();
    let mut p = Policer::new(&d).unwrap();
    // one cell every 0.5 ms against a 1 ms increment
    let verdicts: Vec<bool> = (0..10)
        .map(|k| p.check(SimTime::from_nanos(k * 500_000)).unwrap().is_conforming())
        .collect();
    assert_eq!(verdicts, [true, false, true, false, true, false, true, false, true, false]);
}

#[test]
fn steady_scr_stream_conforms() {
    let d = TrafficDescriptor::vbr(1000.0, 100.0, 10, 0.0, false).unwrap();
    let mut p = Policer::new(&d).unwrap();
    for k in 0..1000 {
        assert!(p.check(SimTime::from_nanos(k * 10_000_000)).unwrap().is_conforming());
    }
}

#[test]
fn out_of_order_arrival_is_an_error() {
    let mut g = GcraState::new(10, 0);
    g.check(SimTime::from_nanos(100)).unwrap();
    assert!(g.check(SimTime::from_nanos(99)).is_err());
}
