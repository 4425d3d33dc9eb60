//! Geometric scheme: tessellate the unit square, gather each cell's bits
//! at its head with a short block-diagonal graph code, then route along a
//! backbone of cell heads with decode-and-forward block coding.

use super::{receive_hard, Ledger, SchemeConfig, SchemeResult};
use crate::bounds::gc2_repetitions;
use crate::channels::{repeat_erasure, repeat_majority, ChannelKind, TrialStreams};
use crate::codes::{
    build_gc2_generator, codeword_len, ml_decode_bsc, sample_random_code, K_MAX,
};
use crate::gf2::{BitVector, Ternary};
use crate::graphs::{backbone, bfs_layering, tessellate, Backbone, BfsLayering, CellPartition, Network, NodeId};
use crate::{Error, Result};
use rand::Rng;

/// Geometric scheme over BSC links.
pub fn run_gc2(
    net: &Network,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    if cfg.channel.kind != ChannelKind::Bsc {
        return Err(Error::Input("run_gc2 runs on BSC links; use run_gc2_bec for BECs".into()));
    }
    run_cells(net, x, cfg, streams)
}

/// Geometric scheme over BEC links. The repetition phase keeps erasure
/// semantics (a bit survives iff any copy does; a fully-erased bit makes
/// the affected code bit a coin flip); every single-shot link converts an
/// erasure to a fair coin, so the block analysis is the BSC one at ε/2.
pub fn run_gc2_bec(
    net: &Network,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    if cfg.channel.kind != ChannelKind::Bec {
        return Err(Error::Input("run_gc2_bec needs BEC links".into()));
    }
    if cfg.channel.epsilon >= 0.5 {
        return Err(Error::Input(
            "run_gc2_bec needs erasure probability below 1/2 (the repetition sizing \
             formula diverges past it)"
            .into(),
        ));
    }
    run_cells(net, x, cfg, streams)
}

/// Everything derivable from (topology, config) alone; shared between the
/// simulation and the count audit.
struct Plan {
    partition: CellPartition,
    bb: Backbone,
    bb_tree: BfsLayering,
    j_g: u32,
    k_r: usize,
    /// Bit-owner id sequence forwarded by each head (index = backbone id):
    /// own cell's nodes sorted, then each child's sequence in order.
    id_seq: Vec<Vec<NodeId>>,
}

fn build_plan(net: &Network, cfg: &SchemeConfig) -> Result<Plan> {
    cfg.validate()?;
    let r = net.radius().ok_or_else(|| {
        Error::Input("geometric topology (coordinates plus connection radius) required".into())
    })?;
    let layering = bfs_layering(net)?;
    let partition = tessellate(net, r, cfg.group_density)?;
    let bb = backbone(net, &partition, &layering)?;
    let bb_tree = bfs_layering(bb.graph())?;
    let j_g = gc2_repetitions(net.n(), cfg.group_density, cfg.p_ch, cfg.channel.epsilon);
    let k_r = (partition.rho_log_n().ceil() as usize).max(1);

    let mut cell_nodes: Vec<Vec<NodeId>> = vec![Vec::new(); bb.heads().len()];
    let mut head_idx_of_cell = std::collections::BTreeMap::new();
    for (i, &h) in bb.heads().iter().enumerate() {
        head_idx_of_cell.insert(partition.cell_of(h), i);
    }
    for v in net.non_sink_nodes() {
        cell_nodes[head_idx_of_cell[&partition.cell_of(v)]].push(v);
    }
    let mut id_seq: Vec<Vec<NodeId>> = vec![Vec::new(); bb.heads().len()];
    for h in bb_tree.post_order() {
        let mut seq = cell_nodes[h].clone();
        for &c in bb_tree.children(h) {
            seq.extend_from_slice(&id_seq[c]);
        }
        id_seq[h] = seq;
    }
    Ok(Plan { partition, bb, bb_tree, j_g, k_r, id_seq })
}

fn run_cells(
    net: &Network,
    x: &BitVector,
    cfg: &SchemeConfig,
    streams: &mut TrialStreams,
) -> Result<SchemeResult> {
    assert_eq!(x.len(), net.n());
    let plan = build_plan(net, cfg)?;
    let noisy = cfg.channel.epsilon > 0.0;
    if noisy {
        let max_group =
            plan.partition.groups().iter().map(|g| g.members.len()).max().unwrap_or(0);
        if max_group.max(plan.k_r) > K_MAX {
            return Err(Error::Capability(format!(
                "group size {max_group} / routing block {} exceeds the ML cap {K_MAX}; \
                 lower group_density or N",
                plan.k_r
            )));
        }
    }
    let spec = cfg.channel;
    let blocks = build_gc2_generator(&plan.partition, streams.setup());
    let mut ledger = Ledger::new(net.total_nodes());

    // ---- Local computing: every group gathers at its cell head. ----
    // cell_estimate[v] = the head-side estimate of v's bit.
    let mut cell_estimate: Vec<Option<u8>> = vec![None; net.total_nodes()];
    for (m, group) in plan.partition.groups().iter().enumerate() {
        let s = group.members.len();
        let phys: Vec<NodeId> =
            group.members.iter().map(|&mm| plan.partition.physical(mm)).collect();
        let bits: Vec<u8> = phys.iter().map(|&u| x.get(net.bit_index(u))).collect();
        let head = plan.partition.head(group.cell).expect("group cells are nonempty");

        // Repetition broadcasts: member j's bit lands at every other
        // member; replicas of one physical node hear themselves perfectly.
        let mut est = vec![vec![Ternary::Erased; s]; s];
        for j in 0..s {
            ledger.record(phys[j], "local", u64::from(plan.j_g));
            for i in 0..s {
                est[i][j] = if phys[i] == phys[j] {
                    Ternary::from_bit(bits[j])
                } else {
                    let rng = streams.node(phys[i]);
                    match spec.kind {
                        ChannelKind::Bsc => {
                            Ternary::from_bit(repeat_majority(&spec, bits[j], plan.j_g, rng))
                        }
                        ChannelKind::Bec => repeat_erasure(&spec, bits[j], plan.j_g, rng),
                    }
                };
            }
        }

        // Each member forms its code bit from the block column; a parity
        // missing an erased estimate degenerates to a coin flip.
        let block = blocks.block(m);
        let mut code_bits = vec![0u8; s];
        for i in 0..s {
            let mut acc = 0u8;
            let mut unresolved = false;
            for k in 0..s {
                if block.get(k, i) == 1 {
                    match est[i][k].bit() {
                        Some(b) => acc ^= b,
                        None => unresolved = true,
                    }
                }
            }
            code_bits[i] = if unresolved {
                streams.node(phys[i]).random::<bool>() as u8
            } else {
                acc
            };
        }

        // One broadcast per member for the code bit, then one for the self
        // bit; the head hears each over a single channel use.
        let mut received = BitVector::zeros(2 * s);
        for i in 0..s {
            ledger.record(phys[i], "local", 1);
            let got = if phys[i] == head {
                code_bits[i]
            } else {
                receive_hard(&spec, code_bits[i], streams.node(head))
            };
            received.set(s + i, got);
        }
        for i in 0..s {
            ledger.record(phys[i], "local", 1);
            let got = if phys[i] == head {
                bits[i]
            } else {
                receive_hard(&spec, bits[i], streams.node(head))
            };
            received.set(i, got);
        }

        // Head decodes [I | block] and reconciles replicas (a physical
        // node's estimate is read off its first replica position).
        let decoded = if noisy {
            ml_decode_bsc(&blocks.group_generator(m), &received)?
        } else {
            let mut msg = BitVector::zeros(s);
            for i in 0..s {
                msg.set(i, received.get(i));
            }
            msg
        };
        for i in 0..s {
            if cell_estimate[phys[i]].is_none() {
                cell_estimate[phys[i]] = Some(decoded.get(i));
            }
        }
    }

    // ---- Backbone routing: decode-and-forward toward the sink head. ----
    let root = plan.bb_tree.sink();
    let mut inbound: Vec<Vec<u8>> = vec![Vec::new(); plan.bb.heads().len()];
    for h in plan.bb_tree.post_order() {
        if h == root {
            break;
        }
        // Outbound payload: own cell bits then the children's, aligned
        // with the id sequence of the plan.
        let mut payload: Vec<u8> = Vec::with_capacity(plan.id_seq[h].len());
        for &v in plan.id_seq[h].iter().take(plan.id_seq[h].len() - count_children_bits(&plan, h))
        {
            payload.push(cell_estimate[v].expect("local phase covered every node"));
        }
        for &c in plan.bb_tree.children(h) {
            payload.extend_from_slice(&inbound[c]);
        }
        debug_assert_eq!(payload.len(), plan.id_seq[h].len());

        let parent = plan.bb_tree.parent(h).expect("non-root head");
        let path = plan.bb.path(plan.bb.heads()[h], plan.bb.heads()[parent]).to_vec();
        let n_blocks = payload.len().div_ceil(plan.k_r);
        let mut delivered: Vec<u8> = Vec::with_capacity(n_blocks * plan.k_r);
        for b in 0..n_blocks {
            let mut block = BitVector::zeros(plan.k_r);
            for i in 0..plan.k_r {
                let at = b * plan.k_r + i;
                if at < payload.len() {
                    block.set(i, payload[at]);
                }
            }
            // Fresh code per hop; every relay re-decodes and re-encodes.
            for hop in path.windows(2) {
                let code = sample_random_code(plan.k_r, cfg.rate, streams.setup())?;
                let word = code.encode(&block);
                ledger.record(hop[0], "routing", word.len() as u64);
                let mut got = BitVector::zeros(word.len());
                {
                    let rng = streams.node(hop[1]);
                    for i in 0..word.len() {
                        got.set(i, receive_hard(&spec, word.get(i), rng));
                    }
                }
                block = if noisy {
                    ml_decode_bsc(code.generator(), &got)?
                } else {
                    let mut msg = BitVector::zeros(plan.k_r);
                    for i in 0..plan.k_r {
                        msg.set(i, got.get(i));
                    }
                    msg
                };
            }
            for i in 0..plan.k_r {
                delivered.push(block.get(i));
            }
        }
        delivered.truncate(payload.len());
        inbound[h] = delivered;
    }

    // The sink head assembles its own cell plus everything routed in.
    let mut estimate = BitVector::zeros(net.n());
    let own = plan.id_seq[root].len() - count_children_bits(&plan, root);
    for &v in plan.id_seq[root].iter().take(own) {
        estimate.set(net.bit_index(v), cell_estimate[v].expect("sink cell covered"));
    }
    let mut at = own;
    for &c in plan.bb_tree.children(root) {
        for (&v, &bit) in plan.id_seq[root][at..at + plan.id_seq[c].len()]
            .iter()
            .zip(inbound[c].iter())
        {
            estimate.set(net.bit_index(v), bit);
        }
        at += plan.id_seq[c].len();
    }
    Ok(ledger.finish(Ok(estimate)))
}

fn count_children_bits(plan: &Plan, h: usize) -> usize {
    plan.bb_tree.children(h).iter().map(|&c| plan.id_seq[c].len()).sum()
}

/// Exact per-phase broadcast counts recomputed from the topology alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gc2CountAudit {
    /// Repetitions plus the two per-member deliveries, over dense groups.
    pub local_dense: u64,
    /// Same, over the all-dummy groups of sparse cells.
    pub local_sparse: u64,
    /// Codeword bits over every (block, physical hop) pair of the backbone.
    pub routing: u64,
}

impl Gc2CountAudit {
    pub fn local(&self) -> u64 {
        self.local_dense + self.local_sparse
    }

    pub fn total(&self) -> u64 {
        self.local() + self.routing
    }
}

/// Closed-form walk over the partition and backbone; the simulation's
/// ledger must match it bit for bit.
pub fn gc2_count_audit(net: &Network, cfg: &SchemeConfig) -> Result<Gc2CountAudit> {
    let plan = build_plan(net, cfg)?;
    let per_member = u64::from(plan.j_g) + 2;
    let mut local_dense = 0;
    let mut local_sparse = 0;
    for group in plan.partition.groups() {
        let cost = per_member * group.members.len() as u64;
        if plan.partition.dense_cells().contains(&group.cell) {
            local_dense += cost;
        } else {
            local_sparse += cost;
        }
    }
    let word = codeword_len(plan.k_r, cfg.rate) as u64;
    let mut routing = 0;
    for h in 0..plan.bb.heads().len() {
        let Some(parent) = plan.bb_tree.parent(h) else { continue };
        let hops = plan.bb.path(plan.bb.heads()[h], plan.bb.heads()[parent]).len() as u64 - 1;
        let blocks = plan.id_seq[h].len().div_ceil(plan.k_r) as u64;
        routing += blocks * hops * word;
    }
    Ok(Gc2CountAudit { local_dense, local_sparse, routing })
}
