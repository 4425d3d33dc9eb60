//! Naive baseline: every node repeats its bit straight to the sink.

use super::{FailureReason, Ledger, SchemeConfig, SchemeResult};
use crate::channels::{repeat_erasure, repeat_majority, ChannelKind, TrialStreams};
use crate::gf2::BitVector;
use crate::graphs::Network;
use crate::{Error, Result};

/// Each node sends its self-information bit `j` times over its direct
/// sink link; the sink takes a majority (BSC) or the first surviving copy
/// (BEC). Exactly `N * j` broadcasts.
pub fn run_naive(
    net: &Network,
    x: &BitVector,
    j: u32,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    if j < 1 {
        return Err(Error::Input("repetition count must be at least 1".into()));
    }
    assert_eq!(x.len(), net.n(), "one self-information bit per non-sink node");
    for v in net.non_sink_nodes() {
        if !net.has_edge(v, net.sink()) {
            return Err(Error::Input(format!(
                "naive scheme needs a direct sink link from every node; node {v} has none"
            )));
        }
    }
    let spec = cfg.channel;
    let mut ledger = Ledger::new(net.total_nodes());
    let mut estimate = BitVector::zeros(net.n());
    let mut lost = false;
    let sink = net.sink();
    for v in net.non_sink_nodes() {
        let bit = x.get(net.bit_index(v));
        ledger.record(v, "direct", u64::from(j));
        match spec.kind {
            ChannelKind::Bsc => {
                // Majority is formed at the sink, so the noise belongs to
                // the sink's stream.
                let decided = {
                    let rng = streams.node(sink);
                    repeat_majority(&spec, bit, j, rng)
                };
                estimate.set(net.bit_index(v), decided);
            }
            ChannelKind::Bec => {
                let got = {
                    let rng = streams.node(sink);
                    repeat_erasure(&spec, bit, j, rng)
                };
                match got.bit() {
                    Some(b) => estimate.set(net.bit_index(v), b),
                    None => lost = true,
                }
            }
        }
    }
    let outcome = if lost { Err(FailureReason::Ambiguous) } else { Ok(estimate) };
    Ok(ledger.finish(outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{ChannelSpec, TrialRng};
    use crate::graphs::gen_complete;

    fn streams(seed: u64, lanes: usize) -> TrialStreams {
        TrialStreams::new(&TrialRng::new(seed), 0, lanes)
    }

    #[test]
    fn noiseless_exact_with_exact_count() {
        let net = gen_complete(8);
        let cfg = SchemeConfig { channel: ChannelSpec::bsc(0.0).unwrap(), ..Default::default() };
        let mut st = streams(1, net.total_nodes());
        let x = BitVector::from_bits(&[1, 0, 1, 1, 0, 0, 1, 0]);
        let res = run_naive(&net, &x, 3, &cfg, &mut st).unwrap();
        assert!(res.recovered(&x));
        assert_eq!(res.broadcasts_total, 24);
        assert_eq!(res.broadcasts_by_phase["direct"], 24);
    }

    #[test]
    fn count_is_structural_for_any_noise() {
        let net = gen_complete(11);
        for (seed, eps) in [(2u64, 0.2), (3, 0.4)] {
            let cfg = SchemeConfig { channel: ChannelSpec::bsc(eps).unwrap(), ..Default::default() };
            let mut st = streams(seed, net.total_nodes());
            let mut r = TrialRng::new(seed).stream(9, 0);
            let x = BitVector::random(11, &mut r);
            let res = run_naive(&net, &x, 5, &cfg, &mut st).unwrap();
            assert_eq!(res.broadcasts_total, 55);
            for v in net.non_sink_nodes() {
                assert_eq!(res.per_node[v], 5);
            }
            assert_eq!(res.per_node[net.sink()], 0);
        }
    }

    #[test]
    fn bec_failure_rate_matches_product_formula() {
        // Failure = any node erased all j times: 1 - (1 - eps^j)^N.
        let net = gen_complete(20);
        let (eps, j, n_trials) = (0.5, 2u32, 4000u64);
        let cfg = SchemeConfig { channel: ChannelSpec::bec(eps).unwrap(), ..Default::default() };
        let master = TrialRng::new(7);
        let mut failures = 0;
        for t in 0..n_trials {
            let mut st = TrialStreams::new(&master, t, net.total_nodes());
            let x = BitVector::random(20, st.setup());
            let res = run_naive(&net, &x, j, &cfg, &mut st).unwrap();
            if !res.recovered(&x) {
                failures += 1;
            }
        }
        let p = 1.0 - (1.0 - 0.25f64).powi(20);
        let sigma = (p * (1.0 - p) / n_trials as f64).sqrt();
        let rate = failures as f64 / n_trials as f64;
        assert!((rate - p).abs() < 4.0 * sigma, "rate {rate} vs {p}");
    }

    #[test]
    fn rejects_missing_sink_links() {
        let net = crate::graphs::gen_grid(3, 1.0).unwrap();
        let cfg = SchemeConfig { channel: ChannelSpec::bsc(0.0).unwrap(), ..Default::default() };
        let mut st = streams(4, net.total_nodes());
        let x = BitVector::zeros(net.n());
        assert!(matches!(run_naive(&net, &x, 1, &cfg, &mut st), Err(Error::Input(_))));
    }
}
