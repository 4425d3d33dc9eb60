//! Executable in-network gathering protocols. Each scheme returns the
//! sink's estimate together with an exact broadcast ledger: one broadcast
//! is one bit sent by one node in one slot, and counts depend only on the
//! topology and configuration, never on channel noise or the data.

mod gc1;
mod gc2;
mod gc3;
mod naive;

pub use gc1::{gc1_broadcast_audit, run_gc1, run_gc1_bec};
pub use gc2::{gc2_count_audit, run_gc2, run_gc2_bec, Gc2CountAudit};
pub use gc3::{run_gc3, run_p2p_erasure, SparsityReport};
pub use naive::run_naive;

use crate::channels::{bec_as_bsc, transmit, ChannelKind, ChannelSpec, StreamRng};
use crate::codes::random_coding_exponent;
use crate::gf2::BitVector;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Parameters shared by the gathering schemes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Descendant threshold constant of the tree scheme.
    pub gamma: f64,
    /// Code rate (message bits per codeword bit).
    pub rate: f64,
    /// Group density constant of the geometric scheme (the paper's group ρ,
    /// distinct from the Gallager optimization variable).
    pub group_density: f64,
    /// Per-bit error budget constant, in (0, 1/2).
    pub p_ch: f64,
    /// Edge density constant of the extended Erdős–Rényi scheme.
    pub er_density: f64,
    /// Analysis constant of the closed-form adjacency bound.
    pub delta: f64,
    pub channel: ChannelSpec,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_ch > 0.0 && self.p_ch < 0.5) {
            return Err(Error::Input(format!("p_ch must be in (0, 1/2), got {}", self.p_ch)));
        }
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::Input(format!("rate must be in (0,1), got {}", self.rate)));
        }
        if self.gamma <= 0.0 || self.group_density <= 0.0 || self.er_density <= 0.0 {
            return Err(Error::Input(
                "gamma, group_density and er_density must be positive".into(),
            ));
        }
        if self.delta <= 0.0 {
            return Err(Error::Input(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    /// Rate condition of the tree scheme, R < γ E_r(ε, R). Advisory: a
    /// failing pair still runs, the error bound just is not guaranteed to
    /// shrink with N.
    pub fn gc1_rate_feasible(&self) -> bool {
        let er = random_coding_exponent(
            self.channel.epsilon,
            self.rate,
            crate::codes::ExponentKind::Bsc,
        );
        self.rate < self.gamma * er.nats
    }
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            rate: 0.5,
            group_density: 1.0,
            p_ch: 0.1,
            er_density: 6.0,
            delta: 0.01,
            channel: ChannelSpec { kind: ChannelKind::Bsc, epsilon: 0.1 },
        }
    }
}

/// Why the sink could not produce an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureReason {
    /// Two or more inputs are consistent with everything received; the
    /// sink claims an error.
    Ambiguous,
    /// The received word is consistent with no input (cannot happen under
    /// pure erasures; kept as a defensive signal).
    DecodeError,
}

/// Outcome of one scheme execution.
#[derive(Clone, Debug)]
pub struct SchemeResult {
    pub estimate: std::result::Result<BitVector, FailureReason>,
    pub broadcasts_total: u64,
    pub broadcasts_by_phase: BTreeMap<&'static str, u64>,
    /// Broadcasts per node id (the sink never transmits).
    pub per_node: Vec<u64>,
}

impl SchemeResult {
    /// True when the sink produced exactly the transmitted vector.
    pub fn recovered(&self, x: &BitVector) -> bool {
        matches!(&self.estimate, Ok(e) if e == x)
    }
}

/// Broadcast bookkeeping: every transmitted bit increments exactly one
/// node's counter in exactly one phase.
pub(crate) struct Ledger {
    per_node: Vec<u64>,
    phases: BTreeMap<&'static str, u64>,
}

impl Ledger {
    pub fn new(total_nodes: usize) -> Self {
        Self { per_node: vec![0; total_nodes], phases: BTreeMap::new() }
    }

    pub fn record(&mut self, node: usize, phase: &'static str, bits: u64) {
        self.per_node[node] += bits;
        *self.phases.entry(phase).or_insert(0) += bits;
    }

    pub fn finish(self, estimate: std::result::Result<BitVector, FailureReason>) -> SchemeResult {
        let total: u64 = self.per_node.iter().sum();
        debug_assert_eq!(total, self.phases.values().sum::<u64>());
        SchemeResult {
            estimate,
            broadcasts_total: total,
            broadcasts_by_phase: self.phases,
            per_node: self.per_node,
        }
    }
}

/// Receives one bit as a hard decision: BSC links deliver the (possibly
/// flipped) bit; BEC links substitute a fair coin for an erasure, which
/// makes them statistically a BSC with crossover ε/2.
pub(crate) fn receive_hard(spec: &ChannelSpec, bit: u8, rng: &mut StreamRng) -> u8 {
    match spec.kind {
        ChannelKind::Bsc => transmit(spec, bit, rng).bit().unwrap(),
        ChannelKind::Bec => bec_as_bsc(spec, bit, rng),
    }
}
