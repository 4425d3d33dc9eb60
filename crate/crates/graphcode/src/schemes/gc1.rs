//! Tree-relay scheme: every node gathers its subtree's bits, re-encodes
//! them with a sampled systematic code and relays to its parent; nodes
//! with few descendants pad their message up to the common block length.

use super::{receive_hard, Ledger, SchemeConfig, SchemeResult};
use crate::channels::{ChannelKind, TrialStreams};
use crate::codes::{codeword_len, ml_decode_bsc, sample_random_code, K_MAX};
use crate::gf2::BitVector;
use crate::graphs::{BfsLayering, Network, NodeId};
use crate::{Error, Result};

/// Tree scheme over BSC links.
pub fn run_gc1(
    net: &Network,
    layering: &BfsLayering,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    if cfg.channel.kind != ChannelKind::Bsc {
        return Err(Error::Input("run_gc1 runs on BSC links; use run_gc1_bec for BECs".into()));
    }
    run_tree(net, layering, x, cfg, streams)
}

/// Tree scheme over BEC links: every reception substitutes a fair coin
/// for an erasure, so the analysis is the BSC one at ε/2.
pub fn run_gc1_bec(
    net: &Network,
    layering: &BfsLayering,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    if cfg.channel.kind != ChannelKind::Bec {
        return Err(Error::Input("run_gc1_bec needs BEC links".into()));
    }
    run_tree(net, layering, x, cfg, streams)
}

/// Padded block length of the small-subtree class: ceil(gamma ln N) bits,
/// at least 1.
fn padded_len(n: usize, gamma: f64) -> usize {
    ((gamma * (n as f64).ln()).ceil() as usize).max(1)
}

/// True when the node's message is padded (|D_v| < gamma ln N).
fn is_padded_class(layering: &BfsLayering, v: NodeId, n: usize, gamma: f64) -> bool {
    (layering.descendant_count(v) as f64) < gamma * (n as f64).ln()
}

fn run_tree(
    net: &Network,
    layering: &BfsLayering,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    cfg.validate()?;
    assert_eq!(x.len(), net.n());
    let n = net.n();
    let gamma = cfg.gamma;
    let k_pad = padded_len(n, gamma);
    if k_pad > K_MAX {
        return Err(Error::Capability(format!(
            "padded block length ceil(gamma ln N) = {k_pad} exceeds the ML cap {K_MAX}; \
             lower gamma or N"
        )));
    }
    let noisy = cfg.channel.epsilon > 0.0;
    if noisy {
        let max_msg = net
            .non_sink_nodes()
            .map(|v| layering.descendant_count(v) + 1)
            .max()
            .unwrap_or(1)
            .max(k_pad);
        if max_msg > K_MAX {
            return Err(Error::Capability(format!(
                "a subtree carries {max_msg} message bits, past the ML cap {K_MAX}; \
                 noisy runs need every subtree below the cap (zero-noise runs do not decode \
                 exhaustively and have no such limit)"
            )));
        }
    }

    // Message length per node: padded class pads to k_pad, the rest send
    // their subtree verbatim.
    let msg_len = |v: NodeId| -> usize {
        if is_padded_class(layering, v, n, gamma) {
            k_pad
        } else {
            layering.descendant_count(v) + 1
        }
    };

    // Codes are shared randomness: sampled per node in id order.
    let mut codes = vec![None; net.total_nodes()];
    for v in net.non_sink_nodes() {
        codes[v] = Some(sample_random_code(msg_len(v), cfg.rate, streams.setup())?);
    }

    let mut ledger = Ledger::new(net.total_nodes());
    // Decoded subtree payloads, in ascending-id order of subtree members.
    let mut payloads: Vec<Option<Vec<u8>>> = vec![None; net.total_nodes()];

    for v in layering.post_order() {
        if v == net.sink() {
            break;
        }
        // Assemble this node's payload: own bit plus the bits decoded from
        // its children, ordered by ascending node id over the subtree.
        let mut entries: Vec<(NodeId, u8)> = vec![(v, x.get(net.bit_index(v)))];
        for &c in layering.children(v) {
            let child_payload = payloads[c].take().expect("children processed first");
            let ids = subtree_ids(layering, c);
            debug_assert_eq!(ids.len(), child_payload.len());
            entries.extend(ids.into_iter().zip(child_payload));
        }
        entries.sort_unstable_by_key(|&(id, _)| id);
        let payload: Vec<u8> = entries.iter().map(|&(_, b)| b).collect();

        // Encode (padding with zeros up to the class block length).
        let code = codes[v].as_ref().unwrap();
        let mut message = BitVector::zeros(code.k());
        for (i, &b) in payload.iter().enumerate() {
            message.set(i, b);
        }
        let word = code.encode(&message);

        // The parent is the one receiver that uses this codeword.
        let parent = layering.parent(v).expect("non-sink node has a parent");
        let mut received = BitVector::zeros(word.len());
        {
            let rng = streams.node(parent);
            for i in 0..word.len() {
                received.set(i, receive_hard(&cfg.channel, word.get(i), rng));
            }
        }
        ledger.record(v, "tree", word.len() as u64);

        // Noiseless links deliver the codeword intact; the systematic part
        // is the message, which is exactly what ML returns at distance 0.
        let decoded = if noisy {
            ml_decode_bsc(code.generator(), &received)?
        } else {
            let mut m = BitVector::zeros(code.k());
            for i in 0..code.k() {
                m.set(i, received.get(i));
            }
            m
        };
        payloads[v] = Some((0..payload.len()).map(|i| decoded.get(i)).collect());
    }

    // The sink stitches its children's payloads into the estimate.
    let mut estimate = BitVector::zeros(n);
    for &c in layering.children(net.sink()) {
        let payload = payloads[c].take().expect("sink children processed");
        for (id, bit) in subtree_ids(layering, c).into_iter().zip(payload) {
            estimate.set(net.bit_index(id), bit);
        }
    }
    Ok(ledger.finish(Ok(estimate)))
}

/// Subtree member ids (node plus descendants) in ascending order.
fn subtree_ids(layering: &BfsLayering, v: NodeId) -> Vec<NodeId> {
    let d = layering.descendants(v);
    let mut ids = Vec::with_capacity(d.len() + 1);
    let at = d.partition_point(|&w| w < v);
    ids.extend_from_slice(&d[..at]);
    ids.push(v);
    ids.extend_from_slice(&d[at..]);
    ids
}

/// Closed-form broadcast count of the tree scheme: the padded class sends
/// ceil(ceil(gamma ln N)/R) bits per node, the rest ceil((|D_v|+1)/R).
pub fn gc1_broadcast_audit(layering: &BfsLayering, net: &Network, gamma: f64, rate: f64) -> u64 {
    let n = net.n();
    let k_pad = padded_len(n, gamma);
    net.non_sink_nodes()
        .map(|v| {
            let bits = if is_padded_class(layering, v, n, gamma) {
                k_pad
            } else {
                layering.descendant_count(v) + 1
            };
            codeword_len(bits, rate) as u64
        })
        .sum()
}
