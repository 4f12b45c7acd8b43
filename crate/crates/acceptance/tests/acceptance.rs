//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use satubr::aal5::{efficiency_ceiling, segment, Direction};
use satubr::contract::{Policer, TrafficDescriptor};
use satubr::harness::{run_point, run_sweep, write_csv, RunResult, SweepAxis, SweepSpec};
use satubr::mac::slotted_aloha_throughput;
use satubr::metrics::fairness_index;
use satubr::sim::SimTime;
use satubr::switch::{
    selective_drop_predicate, DropDecision, DropPolicy, EnqueueOutcome, SelectiveDropParams, SwitchBuffer,
};
use satubr::topology::{round_trip_time, BufferSize, ScenarioClass, ScenarioConfig, BUFFER_RTT_FRACTIONS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let (frame, cells) = segment(9180, 0, Direction::Forward, 0);
    let ceiling = efficiency_ceiling(9180);
    let mbps = ceiling * 149.7;
    let pass = cells.len() == 193
        && frame.wire_bytes() == 10229
        && (ceiling - 0.89745).abs() <= 1e-5
        && (mbps - 134.35).abs() < 0.005;
    outcome(
        pass,
        format!(
            "{} cells, {} wire bytes, ceiling {ceiling:.6}, {mbps:.2} Mbps",
            cells.len(),
            frame.wire_bytes()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = true;
    for n in 1..=64usize {
        ok &= fairness_index(&vec![3.0; n]).value() == Some(1.0);
        let mut one_hot = vec![0.0; n];
        one_hot[rng.gen_range(0..n)] = 1.0;
        ok &= fairness_index(&one_hot).value() == Some(1.0 / n as f64);
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1000.0)).collect();
        let c = 10f64.powf(rng.gen_range(-3.0..3.0));
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let (Some(a), Some(b)) = (fairness_index(&xs).value(), fairness_index(&scaled).value()) else {
            ok = false;
            continue;
        };
        worst = worst.max((a - b).abs());
    }
    outcome(
        ok && worst <= 1e-12,
        format!("identities {}, worst scale deviation {worst:.2e}", if ok { "hold" } else { "broken" }),
    )
}

/// Continuous-leak bucket in integer nanoseconds.
struct Bucket {
    inc: i128,
    limit: i128,
    content: i128,
    last: i128,
}

impl Bucket {
    fn new(inc: u64, limit: u64) -> Self {
        Bucket {
            inc: inc as i128,
            limit: limit as i128,
            content: 0,
            last: 0,
        }
    }

    fn drained(&self, t: i128) -> i128 {
        (self.content - (t - self.last)).max(0)
    }

    fn add(&mut self, t: i128) {
        self.content = self.drained(t) + self.inc;
        self.last = t;
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0u64;
    let mut verdicts = 0u64;
    for trace in 0..10_000 {
        let tp: u64 = rng.gen_range(1_000..100_000);
        let cdvt: u64 = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..3 * tp) };
        let dual = trace % 2 == 1;
        let (desc, mut pcr_b, mut scr_b) = if dual {
            let ts = tp + rng.gen_range(1..10 * tp);
            let mbs = rng.gen_range(1..200u32);
            let d = TrafficDescriptor::vbr(1e9 / tp as f64, 1e9 / ts as f64, mbs, cdvt as f64 / 1e9, false).unwrap();
            let bt = (mbs as u64 - 1) * (ts - tp);
            (d, Bucket::new(tp, cdvt), Some(Bucket::new(ts, bt + cdvt)))
        } else {
            let d = TrafficDescriptor::ubr(1e9 / tp as f64, cdvt as f64 / 1e9).unwrap();
            (d, Bucket::new(tp, cdvt), None)
        };
        let mut policer = Policer::new(&desc).unwrap();
        let mut t = 0u64;
        let len = rng.gen_range(1..300);
        let max_gap = 2 * tp.max(rng.gen_range(1..20 * tp));
        for _ in 0..len {
            t += rng.gen_range(0..max_gap);
            let got = policer.check(SimTime::from_nanos(t)).unwrap().is_conforming();
            let ti = t as i128;
            let a = pcr_b.drained(ti) <= pcr_b.limit;
            let b = scr_b.as_ref().is_none_or(|s| s.drained(ti) <= s.limit);
            if a && b {
                pcr_b.add(ti);
                if let Some(s) = scr_b.as_mut() {
                    s.add(ti);
                }
            }
            mismatches += (got != (a && b)) as u64;
            verdicts += 1;
        }
    }

    let mut mbs_failures = 0;
    for _ in 0..100 {
        let tp: u64 = rng.gen_range(1_000..100_000);
        let ts = tp + rng.gen_range(1..10 * tp);
        let mbs = rng.gen_range(1..500u32);
        let d = TrafficDescriptor::vbr(1e9 / tp as f64, 1e9 / ts as f64, mbs, 0.0, false).unwrap();
        let mut p = Policer::new(&d).unwrap();
        let burst_ok = (0..mbs as u64).all(|k| p.check(SimTime::from_nanos(k * tp)).unwrap().is_conforming());
        let next_fails = !p.check(SimTime::from_nanos(mbs as u64 * tp)).unwrap().is_conforming();
        mbs_failures += !(burst_ok && next_fails) as u32;
    }
    outcome(
        mismatches == 0 && mbs_failures == 0,
        format!("{mismatches} mismatches in {verdicts} verdicts over 10000 traces, MBS property failed for {mbs_failures} of 100"),
    )
}

/// A K=1000 buffer holding `x` cells of 5 active VCs, `y0` of them on VC 0.
fn loaded_buffer(x: u32, y0: u32) -> SwitchBuffer {
    let mut buf = SwitchBuffer::new(1000, 5, DropPolicy::SelectiveDrop, SelectiveDropParams::default());
    let mut fill = |vc: u32, n: u32| {
        let (_, cells) = segment(30_000, vc, Direction::Forward, vc as u64);
        for c in cells.into_iter().take(n as usize) {
            assert_eq!(buf.enqueue_cell(c), EnqueueOutcome::Queued);
        }
    };
    fill(0, y0);
    let rest = x - y0;
    for vc in 1..5 {
        fill(vc, rest / 4 + (vc <= rest % 4) as u32);
    }
    assert_eq!(buf.occupancy(), x);
    assert_eq!(buf.active_vcs(), 5);
    buf
}

fn criterion_4() -> Outcome {
    let examples = [
        loaded_buffer(950, 200).drop_test(0) == DropDecision::Drop,
        loaded_buffer(950, 100).drop_test(0) == DropDecision::Accept,
        [4, 400, 600].iter().all(|&y| loaded_buffer(800, y).drop_test(0) == DropDecision::Accept),
    ];
    let params = SelectiveDropParams::default();
    let k = 50u32;
    let mut disagreements = 0;
    for x in 1..=50u32 {
        for y in 0..50u32 {
            for n_a in 1..=10u32 {
                // X > 0.9 K and Y N_a / X > 0.8, in integers
                let direct = 10 * x > 9 * k && 10 * y * n_a > 8 * x;
                let got = selective_drop_predicate(k, x, y, n_a, params) == DropDecision::Drop;
                disagreements += (got != direct) as u32;
            }
        }
    }
    let examples_ok = examples.iter().all(|&e| e);
    outcome(
        examples_ok && disagreements == 0,
        format!("examples {examples:?}, {disagreements} disagreements on the 50x50x10 grid"),
    )
}

fn criterion_5() -> Outcome {
    let peak = (0..=500_000)
        .map(|i| slotted_aloha_throughput(i as f64 * 1e-5))
        .fold(0.0, f64::max);
    outcome((peak - 0.3679).abs() <= 1e-4, format!("peak {peak:.6}"))
}

fn csv_bytes(rows: &[RunResult]) -> Vec<u8> {
    let mut v = Vec::new();
    write_csv(&mut v, rows).unwrap();
    v
}

fn leo(n: u32, buffer: BufferSize) -> ScenarioConfig {
    ScenarioConfig::for_class(ScenarioClass::Leo, n, buffer).with_scale(0.1)
}

fn criterion_6() -> Outcome {
    let cfg = leo(15, BufferSize::RttFraction(0.125)).with_seed(11);
    let a = csv_bytes(&[run_point(&cfg).unwrap()]);
    let b = csv_bytes(&[run_point(&cfg).unwrap()]);
    let mut base = leo(5, BufferSize::RttFraction(1.0));
    base.duration = 5.0;
    let spec = SweepSpec {
        base,
        axis: SweepAxis::RttFractions(vec![1.0, 0.125, 0.031]),
        n_sources: vec![5, 10],
        seeds: vec![1, 2],
    };
    let serial = run_sweep(&spec, 1).unwrap();
    let parallel = run_sweep(&spec, 4).unwrap();
    let sweeps_equal = serial.failure.is_none()
        && parallel.failure.is_none()
        && csv_bytes(&serial.rows) == csv_bytes(&parallel.rows);
    outcome(
        a == b && sweeps_equal,
        format!(
            "repeat run {}, 12-point sweep serial vs parallel {}",
            if a == b { "identical" } else { "differs" },
            if sweeps_equal { "identical" } else { "differs" }
        ),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Job {
    Grid(usize),
    Scal(u32, u64, bool),
    Geo,
}

fn job_config(job: Job) -> ScenarioConfig {
    match job {
        Job::Grid(i) => leo(15, BufferSize::RttFraction(BUFFER_RTT_FRACTIONS[i])),
        Job::Scal(n, seed, tail) => {
            let policy = if tail { DropPolicy::TailDrop } else { DropPolicy::SelectiveDrop };
            leo(n, BufferSize::RttFraction(1.0)).with_seed(seed).with_policy(policy)
        }
        Job::Geo => {
            let mut cfg = ScenarioConfig::for_class(ScenarioClass::Geo, 1, BufferSize::RttFraction(2.0)).with_scale(0.05);
            cfg.warmup = 10.0;
            cfg
        }
    }
}

fn simulations() -> BTreeMap<Job, RunResult> {
    let mut jobs: Vec<Job> = (0..BUFFER_RTT_FRACTIONS.len()).map(Job::Grid).collect();
    for n in [5, 15, 50] {
        for seed in 1..=3 {
            jobs.push(Job::Scal(n, seed, false));
            jobs.push(Job::Scal(n, seed, true));
        }
    }
    jobs.push(Job::Geo);
    // longest first
    jobs.sort_by_key(|j| match j {
        Job::Geo => 0,
        Job::Scal(50, ..) => 1,
        _ => 2,
    });
    jobs.into_par_iter()
        .map(|j| (j, run_point(&job_config(j)).unwrap_or_else(|e| panic!("{j:?}: {e}"))))
        .collect()
}

type SimCheck = fn(&BTreeMap<Job, RunResult>) -> Outcome;

fn grid_index(fraction: f64) -> usize {
    BUFFER_RTT_FRACTIONS.iter().position(|&f| f == fraction).unwrap()
}

fn criterion_7(runs: &BTreeMap<Job, RunResult>) -> Outcome {
    let e = runs[&Job::Grid(grid_index(0.016))].efficiency;
    outcome(e < 0.5, format!("LEO N=15, 0.016 RTT buffer: efficiency {e:.4} (needs < 0.5)"))
}

fn criterion_8(runs: &BTreeMap<Job, RunResult>) -> Outcome {
    let mut curve: Vec<(f64, f64)> = (0..BUFFER_RTT_FRACTIONS.len())
        .map(|i| (BUFFER_RTT_FRACTIONS[i], runs[&Job::Grid(i)].efficiency))
        .collect();
    curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let plateau = curve.iter().filter(|(f, _)| *f >= 0.5).all(|(_, e)| *e >= 0.90);
    let trend = curve.windows(2).all(|w| w[1].1 >= w[0].1 - 0.05);
    let shown: Vec<String> = curve.iter().map(|(f, e)| format!("{f}:{e:.3}")).collect();
    outcome(
        plateau && trend,
        format!(
            "plateau >= 0.90 {}, trend {}; {}",
            if plateau { "yes" } else { "no" },
            if trend { "non-decreasing" } else { "drops by more than 0.05" },
            shown.join(" ")
        ),
    )
}

fn criterion_9(runs: &BTreeMap<Job, RunResult>) -> Outcome {
    let means: Vec<(u32, f64)> = [5, 15, 50]
        .iter()
        .map(|&n| (n, (1..=3).map(|s| runs[&Job::Scal(n, s, false)].efficiency).sum::<f64>() / 3.0))
        .collect();
    let max = means.iter().map(|m| m.1).fold(f64::MIN, f64::max);
    let min = means.iter().map(|m| m.1).fold(f64::MAX, f64::min);
    let shown: Vec<String> = means.iter().map(|(n, e)| format!("N={n}:{e:.4}")).collect();
    outcome(
        max - min < 0.05,
        format!("mean efficiency over seeds 1-3 at 1 RTT {}, spread {:.4}", shown.join(" "), max - min),
    )
}

fn criterion_10(runs: &BTreeMap<Job, RunResult>) -> Outcome {
    let f = |j: Job| runs[&j].fairness.value().unwrap_or(0.0);
    let n50: Vec<f64> = (1..=3).map(|s| f(Job::Scal(50, s, false))).collect();
    let high = n50.iter().all(|&x| x >= 0.9);
    let mut worse = Vec::new();
    for n in [5, 15, 50] {
        for s in 1..=3 {
            let (sd, td) = (f(Job::Scal(n, s, false)), f(Job::Scal(n, s, true)));
            if sd < td {
                worse.push(format!("N={n} seed {s}: {sd:.4} < {td:.4}"));
            }
        }
    }
    let tail50: Vec<String> = (1..=3).map(|s| format!("{:.3}", f(Job::Scal(50, s, true)))).collect();
    let n50s: Vec<String> = n50.iter().map(|x| format!("{x:.4}")).collect();
    outcome(
        high && worse.is_empty(),
        format!(
            "N=50 selective drop fairness {}, tail drop {}; selective below tail in {} of 9 runs{}",
            n50s.join("/"),
            tail50.join("/"),
            worse.len(),
            if worse.is_empty() { String::new() } else { format!(" ({})", worse.join(", ")) }
        ),
    )
}

fn criterion_11(runs: &BTreeMap<Job, RunResult>) -> Outcome {
    let cfg = job_config(Job::Geo);
    let r = &runs[&Job::Geo];
    let window = cfg.effective_rcv_wnd() as f64 * 8.0 / round_trip_time(&cfg) / 1e6;
    let ceiling = efficiency_ceiling(r.mss) * cfg.bottleneck().realized_rate_bps() / 1e6;
    let bound = window.min(ceiling);
    let got = r.per_vc_goodput_mbps[0];
    let rel = (got - bound).abs() / bound;
    outcome(
        rel <= 0.05,
        format!(
            "GEO N=1, 2 RTT buffer: goodput {got:.3} Mbps vs bound {bound:.3} Mbps ({} binds), off by {:.2}%",
            if ceiling <= window { "ceiling" } else { "window/RTT" },
            100.0 * rel
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome, f64)> = Vec::new();
    let quick: [(u32, fn() -> Outcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    for (n, f) in quick {
        let t = Instant::now();
        let o = f();
        results.push((n, o, t.elapsed().as_secs_f64()));
    }
    let t = Instant::now();
    let runs = simulations();
    let sim_secs = t.elapsed().as_secs_f64();
    let slow: [(u32, SimCheck); 5] = [
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    for (n, f) in slow {
        results.push((n, f(&runs), 0.0));
    }

    println!();
    println!("acceptance criteria ({} simulations in {sim_secs:.1} s)", runs.len());
    let mut failed = 0;
    for (n, o, secs) in &results {
        let timing = if *secs > 0.0 { format!(" [{secs:.2} s]") } else { String::new() };
        println!(
            "criterion {n:>2}: {}  {}{timing}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as u32;
    }
    println!("{} passed, {failed} failed", results.len() as u32 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
