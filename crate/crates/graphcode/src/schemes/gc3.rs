//! Adjacency-parity scheme: every node gossips its bit to its
//! out-neighbors, forms the parity of its in-neighborhood, and reports
//! both bits once to the sink, which Gaussian-eliminates `[I | A]` over
//! the surviving positions.

use super::{FailureReason, Ledger, SchemeConfig, SchemeResult};
use crate::bounds::gc3_repetitions;
use crate::channels::{repeat_erasure, transmit, ChannelKind, StreamRng, TrialStreams};
use crate::codes::{build_gc3_generator, erasure_decode, gc3_from_adjacency};
use crate::gf2::{BitMatrix, BitVector, SolveOutcome, Ternary, TernaryVector};
use crate::graphs::Network;
use crate::{Error, Result};

/// Adjacency scheme on an extended Erdős–Rényi network over BEC links.
/// Exactly `N (t + 2)` broadcasts.
pub fn run_gc3(
    net: &Network,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    cfg.validate()?;
    if cfg.channel.kind != ChannelKind::Bec {
        return Err(Error::Input("the adjacency scheme runs on BEC links".into()));
    }
    if cfg.channel.epsilon >= 1.0 {
        return Err(Error::Input(
            "erasure probability 1 never delivers anything; pick epsilon < 1".into(),
        ));
    }
    for v in net.non_sink_nodes() {
        if !net.has_edge(v, net.sink()) {
            return Err(Error::Input(format!(
                "extended Erdős–Rényi topology required: node {v} has no sink link"
            )));
        }
    }
    assert_eq!(x.len(), net.n());

    let spec = cfg.channel;
    let n = net.n();
    let sink = net.sink();
    let t = gc3_repetitions(n, cfg.er_density, cfg.p_ch, spec.epsilon);
    let mut ledger = Ledger::new(net.total_nodes());

    // Gossip: node v broadcasts its bit t times; each non-sink
    // out-neighbor keeps the first surviving copy. A self-loop is the
    // node hearing itself, which is noiseless; the sink also hears these
    // broadcasts but by design decodes only from the report phase.
    let mut est: Vec<Vec<Ternary>> =
        (0..net.total_nodes()).map(|v| vec![Ternary::Erased; net.in_neighbors(v).len()]).collect();
    for v in net.non_sink_nodes() {
        let bit = x.get(net.bit_index(v));
        ledger.record(v, "local", u64::from(t));
        for &w in net.out_neighbors(v) {
            if w == sink {
                continue;
            }
            let slot = net.in_neighbors(w).binary_search(&v).expect("edge implies in-entry");
            est[w][slot] = if w == v {
                Ternary::from_bit(bit)
            } else {
                repeat_erasure(&spec, bit, t, streams.node(w))
            };
        }
    }

    // Local parities: erased as soon as any needed estimate is missing.
    let mut parity = vec![Ternary::Zero; net.total_nodes()];
    for v in net.non_sink_nodes() {
        let mut acc = 0u8;
        let mut unresolved = false;
        for (slot, &u) in net.in_neighbors(v).iter().enumerate() {
            debug_assert_ne!(u, sink, "the sink transmits nothing");
            match est[v][slot].bit() {
                Some(b) => acc ^= b,
                None => unresolved = true,
            }
        }
        parity[v] = if unresolved { Ternary::Erased } else { Ternary::from_bit(acc) };
    }

    // Report: every node sends its bit and its parity once to the sink.
    let mut received = TernaryVector::zeros(2 * n);
    for v in net.non_sink_nodes() {
        ledger.record(v, "sink", 2);
        let i = net.bit_index(v);
        let got_x = {
            let rng = streams.node(sink);
            transmit(&spec, x.get(i), rng)
        };
        received.set(i, got_x);
        let got_y = match parity[v].bit() {
            Some(b) => {
                let rng = streams.node(sink);
                transmit(&spec, b, rng)
            }
            // An unresolved parity reaches the sink as an erasure no
            // matter what the link does.
            None => Ternary::Erased,
        };
        received.set(n + i, got_y);
    }

    let gc = build_gc3_generator(net);
    let outcome = match erasure_decode(gc.generator(), &received) {
        SolveOutcome::Unique(estimate) => Ok(estimate),
        SolveOutcome::Ambiguous => Err(FailureReason::Ambiguous),
        SolveOutcome::Inconsistent => Err(FailureReason::DecodeError),
    };
    Ok(ledger.finish(outcome))
}

/// Sparseness of a sampled adjacency code, against the 2pN² expurgation
/// budget.
#[derive(Clone, Copy, Debug)]
pub struct SparsityReport {
    pub ones: u64,
    pub budget: f64,
    pub within_budget: bool,
}

/// Point-to-point sparse erasure code: sample a directed Erdős–Rényi
/// adjacency (no sink links), encode centrally with `[I | A]`, push the
/// 2N coded bits through independent BECs and erasure-decode.
pub fn run_p2p_erasure(
    n: usize,
    c: f64,
    x: &BitVector,
    epsilon: f64,
    streams: &mut TrialStreams,
) -> Result<(SchemeResult, SparsityReport)> {
    if n < 1 || c <= 0.0 {
        return Err(Error::Input(format!("need n >= 1 and c > 0, got n={n}, c={c}")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Input(format!("erasure probability must be in [0,1], got {epsilon}")));
    }
    let p = c * (n as f64).ln() / n as f64;
    if p > 1.0 {
        return Err(Error::Input(format!("c ln(n)/n = {p} exceeds 1")));
    }
    assert_eq!(x.len(), n);
    let a = sample_adjacency(n, p, streams.setup());
    let gc = gc3_from_adjacency(a);
    let ones = gc.ones() as u64;
    let budget = 2.0 * p * (n as f64) * (n as f64);
    let word = gc.encode(x);

    let spec = crate::channels::ChannelSpec { kind: ChannelKind::Bec, epsilon };
    let mut ledger = Ledger::new(n + 1);
    let mut received = TernaryVector::zeros(2 * n);
    for i in 0..n {
        // Node i+1 accounts for its systematic bit and its parity bit.
        ledger.record(i + 1, "direct", 2);
    }
    {
        let rng = streams.node(0);
        for i in 0..2 * n {
            received.set(i, transmit(&spec, word.get(i), rng));
        }
    }
    let outcome = match erasure_decode(gc.generator(), &received) {
        SolveOutcome::Unique(estimate) => Ok(estimate),
        SolveOutcome::Ambiguous => Err(FailureReason::Ambiguous),
        SolveOutcome::Inconsistent => Err(FailureReason::DecodeError),
    };
    let report = SparsityReport { ones, budget, within_budget: ones as f64 <= budget };
    Ok((ledger.finish(outcome), report))
}

/// i.i.d. Bernoulli(p) bit matrix via skip sampling over the linear index.
fn sample_adjacency(n: usize, p: f64, rng: &mut StreamRng) -> BitMatrix {
    use rand::Rng;
    let mut a = BitMatrix::zeros(n, n);
    if p >= 1.0 {
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, 1);
            }
        }
        return a;
    }
    if p <= 0.0 {
        return a;
    }
    let cells = (n as u64) * (n as u64);
    let log1mp = (1.0 - p).ln();
    let mut idx: u64 = 0;
    loop {
        let u: f64 = rng.random();
        let gap = (u.ln() / log1mp).floor() as u64;
        idx = match idx.checked_add(gap) {
            Some(i) => i,
            None => break,
        };
        if idx >= cells {
            break;
        }
        a.set((idx / n as u64) as usize, (idx % n as u64) as usize, 1);
        idx += 1;
    }
    a
}
