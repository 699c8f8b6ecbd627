//! Flow records, FCT statistics, fairness, goodput series, and the
//! latency-bound analysis.

use crate::sim::SimTime;
use crate::topo::FlowClass;

/// Completed-flow measurement row; drives all per-run statistics.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub flow_id: u32,
    pub class: FlowClass,
    pub src: String,
    pub dst: String,
    pub size_bytes: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub retransmitted_blocks: u64,
    pub bytes_on_wire: u64,
    pub ideal_fct: SimTime,
}

impl FlowRecord {
    pub fn fct(&self) -> SimTime {
        self.end - self.start
    }
    pub fn slowdown(&self) -> f64 {
        self.fct().0 as f64 / self.ideal_fct.0.max(1) as f64
    }
}

/// Unloaded completion time: shortest-path propagation RTT plus transmission
/// at the bottleneck bandwidth.
pub fn ideal_fct(size_bytes: u64, path_rtt: SimTime, bottleneck_bps: u64) -> SimTime {
    path_rtt + crate::sim::serialization_time(size_bytes, bottleneck_bps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FctStats {
    pub count: usize,
    pub mean_ns: f64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

/// Mean and tail FCT; p99 is nearest-rank on the sorted values. Returns None
/// (an explicit "no data") for an empty set.
pub fn fct_stats(fcts: impl IntoIterator<Item = SimTime>) -> Option<FctStats> {
    let mut v: Vec<u64> = fcts.into_iter().map(|t| t.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    let mean = v.iter().map(|x| *x as f64).sum::<f64>() / n as f64;
    let rank = ((0.99 * n as f64).ceil() as usize).max(1);
    Some(FctStats {
        count: n,
        mean_ns: mean,
        p99_ns: v[rank - 1],
        max_ns: v[n - 1],
    })
}

pub fn class_fcts<'a>(
    records: &'a [FlowRecord],
    class: Option<FlowClass>,
) -> impl Iterator<Item = SimTime> + 'a {
    records
        .iter()
        .filter(move |r| match class {
            None => true,
            Some(FlowClass::Intra) => matches!(r.class, FlowClass::Intra),
            Some(FlowClass::Inter) => matches!(r.class, FlowClass::Inter),
        })
        .map(|r| r.fct())
}

/// Jain fairness index: (sum v)^2 / (n * sum v^2). None when all values are
/// zero (undefined, reported as "no data").
pub fn jain_index(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().all(|v| *v == 0.0) {
        return None;
    }
    let s: f64 = values.iter().sum();
    let s2: f64 = values.iter().map(|v| v * v).sum();
    Some(s * s / (values.len() as f64 * s2))
}

/// Fraction of a message's completion time due to propagation delay:
/// rtt / (rtt + transmit).
pub fn latency_bound_fraction(size_bytes: u64, rtt: SimTime, bw_bps: u64) -> f64 {
    let rtt_s = rtt.as_secs_f64();
    let tx_s = size_bytes as f64 * 8.0 / bw_bps as f64;
    rtt_s / (rtt_s + tx_s)
}

/// Delivered application bytes per fixed-width bucket, per flow. Buckets are
/// written by the receiver as data (or decoded blocks) arrive.
#[derive(Debug, Clone)]
pub struct GoodputSeries {
    pub bucket: SimTime,
    pub delivered: Vec<Vec<u64>>, // [flow][bucket] bytes
}

impl GoodputSeries {
    pub fn new(bucket: SimTime, flows: usize) -> Self {
        GoodputSeries {
            bucket,
            delivered: vec![Vec::new(); flows],
        }
    }

    pub fn record(&mut self, flow: usize, at: SimTime, bytes: u64) {
        let idx = (at.0 / self.bucket.0) as usize;
        let v = &mut self.delivered[flow];
        if v.len() <= idx {
            v.resize(idx + 1, 0);
        }
        v[idx] += bytes;
    }

    /// Bytes delivered by `flow` in the window (t - window, t], at bucket
    /// granularity (whole trailing buckets plus the one containing t).
    pub fn window_bytes(&self, flow: usize, t: SimTime, window: SimTime) -> u64 {
        let v = &self.delivered[flow];
        let hi = (t.0 / self.bucket.0) as usize;
        let lo = if t.0 <= window.0 {
            0
        } else {
            ((t.0 - window.0) / self.bucket.0) as usize + 1
        };
        (lo.min(v.len())..(hi + 1).min(v.len())).map(|i| v[i]).sum()
    }

    /// Goodput in bits/s over the window ending at t.
    pub fn window_goodput_bps(&self, flow: usize, t: SimTime, window: SimTime) -> f64 {
        self.window_bytes(flow, t, window) as f64 * 8.0 / window.as_secs_f64()
    }
}

/// First time a sliding-window Jain index over the given flows reaches
/// `target` and stays there until the first of them completes.
pub fn jain_milestone(
    series: &GoodputSeries,
    flows: &[usize],
    starts_ends: &[(SimTime, Option<SimTime>)],
    window: SimTime,
    target: f64,
) -> Option<SimTime> {
    let last_start = starts_ends.iter().map(|(s, _)| *s).max()?;
    let first_end = starts_ends
        .iter()
        .filter_map(|(_, e)| *e)
        .min()
        .unwrap_or(SimTime::MAX);
    let step = series.bucket;
    let mut t = last_start + window;
    let mut first_sustained: Option<SimTime> = None;
    while t < first_end {
        let rates: Vec<f64> = flows
            .iter()
            .map(|&f| series.window_bytes(f, t, window) as f64)
            .collect();
        let j = jain_index(&rates).unwrap_or(0.0);
        if j >= target {
            first_sustained.get_or_insert(t);
        } else {
            first_sustained = None;
        }
        t = t + step;
    }
    first_sustained
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fct_small_set() {
        let s = fct_stats([1, 2, 3, 4].map(SimTime::from_ms)).unwrap();
        assert!((s.mean_ns - 2.5e6).abs() < 1e-6);
        // nearest rank ceil(0.99*4)=4 -> 4th smallest
        assert_eq!(s.p99_ns, 4_000_000);
    }

    #[test]
    fn fct_identical_values() {
        let s = fct_stats(std::iter::repeat(SimTime::from_us(7)).take(100)).unwrap();
        assert_eq!(s.mean_ns, 7000.0);
        assert_eq!(s.p99_ns, 7000);
    }

    #[test]
    fn fct_p99_order_statistics() {
        // 1e4 uniform[0,1]-second samples: p99 lands in [0.985, 0.995]
        let mut rng = crate::sim::RngStream::new("fct", 4);
        let s = fct_stats((0..10_000).map(|_| SimTime::from_secs_f64(rng.uniform()))).unwrap();
        let p99 = s.p99_ns as f64 / 1e9;
        assert!((0.985..=0.995).contains(&p99), "p99 {p99}");
    }

    #[test]
    fn fct_empty_is_no_data() {
        assert!(fct_stats(std::iter::empty()).is_none());
    }

    #[test]
    fn p99_monotone_under_append() {
        let mut v: Vec<SimTime> = (1..=100).map(SimTime::from_us).collect();
        let before = fct_stats(v.clone()).unwrap().p99_ns;
        v.push(SimTime::from_us(1000));
        assert!(fct_stats(v).unwrap().p99_ns >= before);
    }

    #[test]
    fn jain_definitional_cases() {
        assert_eq!(jain_index(&[5.0, 5.0, 5.0, 5.0]), Some(1.0));
        let one_hot = jain_index(&vec![0.0; 7].iter().chain([8.0].iter()).copied().collect::<Vec<_>>()).unwrap();
        assert!((one_hot - 0.125).abs() < 1e-12);
        let j = jain_index(&[1.0, 2.0, 3.0]).unwrap();
        assert!((j - 36.0 / 42.0).abs() < 1e-12);
        assert_eq!(jain_index(&[0.0, 0.0]), None);
        assert_eq!(jain_index(&[]), None);
    }

    #[test]
    fn jain_stays_in_range() {
        let mut rng = crate::sim::RngStream::new("jain", 5);
        for _ in 0..1000 {
            let n = 1 + rng.below(16) as usize;
            let v: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-9).collect();
            let j = jain_index(&v).unwrap();
            assert!(j >= 1.0 / n as f64 - 1e-12 && j <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn latency_bound_crossover_at_bdp() {
        // transmit == rtt -> fraction 0.5
        let rtt = SimTime::from_ms(2);
        let bw = 100_000_000_000u64;
        let size = (rtt.as_secs_f64() * bw as f64 / 8.0) as u64;
        assert!((latency_bound_fraction(size, rtt, bw) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn latency_bound_wan_example() {
        // 20 ms RTT at 400 Gb/s: 50% crossover at 1e9 B
        let f = latency_bound_fraction(1_000_000_000, SimTime::from_ms(20), 400_000_000_000);
        assert!((f - 0.5).abs() < 1e-9);
        // tiny messages are entirely latency-bound
        let f0 = latency_bound_fraction(1, SimTime::from_ms(20), 400_000_000_000);
        assert!(f0 > 0.9999);
    }

    #[test]
    fn ideal_fct_example() {
        // 4096 B intra flow, 14 us RTT, 100 Gb/s -> 14.33 us
        let ideal = ideal_fct(4096, SimTime::from_us(14), 100_000_000_000);
        assert_eq!(ideal.0, 14_000 + 328);
    }

    #[test]
    fn goodput_series_window() {
        let mut g = GoodputSeries::new(SimTime::from_ms(1), 1);
        for i in 0..10u64 {
            g.record(0, SimTime(i * 1_000_000 + 5), 1000);
        }
        assert_eq!(g.window_bytes(0, SimTime::from_ms(9), SimTime::from_ms(5)), 5000);
        // window larger than run: single bucket sum equals everything
        assert_eq!(g.window_bytes(0, SimTime::from_ms(9), SimTime::from_ms(100)), 10_000);
    }
}
