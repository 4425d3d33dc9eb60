//! Stochastic channel primitives: BSC and BEC links, the repetition
//! sub-protocols built on them, and the seeded per-(trial, node) random
//! streams that make every simulation reproducible.

use crate::gf2::Ternary;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Channel family of a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Bsc,
    Bec,
}

/// A memoryless binary channel: all links of a network share one spec.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub epsilon: f64,
}

impl ChannelSpec {
    /// Binary symmetric channel with crossover probability `epsilon < 1/2`.
    pub fn bsc(epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::Input(format!(
                "BSC crossover probability must be in [0, 1/2), got {epsilon}"
            )));
        }
        Ok(Self { kind: ChannelKind::Bsc, epsilon })
    }

    /// Binary erasure channel with erasure probability `epsilon ∈ [0, 1]`.
    pub fn bec(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Input(format!(
                "BEC erasure probability must be in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self { kind: ChannelKind::Bec, epsilon })
    }

    pub fn is_bsc(&self) -> bool {
        self.kind == ChannelKind::Bsc
    }

    pub fn is_bec(&self) -> bool {
        self.kind == ChannelKind::Bec
    }
}

/// Random stream used for channel noise; counter-based so streams keyed by
/// distinct (trial, lane) ids never overlap.
pub type StreamRng = ChaCha8Rng;

const LANE_BITS: u32 = 21;

/// Factory for per-(trial, lane) noise streams. Identical `(seed, trial,
/// lane)` reproduces identical noise bit-for-bit, independent of execution
/// order, so trials may run on any worker in any order.
#[derive(Clone, Copy, Debug)]
pub struct TrialRng {
    seed: u64,
}

impl TrialRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Opens the stream for `lane` (typically a node id) within `trial`.
    pub fn stream(&self, trial: u64, lane: u32) -> StreamRng {
        assert!(lane < 1 << LANE_BITS, "lane id {lane} out of range");
        assert!(trial < 1 << (64 - LANE_BITS), "trial index {trial} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((trial << LANE_BITS) | u64::from(lane));
        rng
    }
}

/// Per-trial bundle of lane streams: one lane per node plus one setup lane
/// for topology and code sampling.
pub struct TrialStreams {
    lanes: Vec<StreamRng>,
}

impl TrialStreams {
    /// Opens `node_lanes` node streams (lane ids `0..node_lanes`) plus the
    /// setup lane.
    pub fn new(master: &TrialRng, trial: u64, node_lanes: usize) -> Self {
        let lanes = (0..=node_lanes).map(|l| master.stream(trial, l as u32)).collect();
        Self { lanes }
    }

    /// Noise stream of node `v` (receiver-side noise lives here).
    pub fn node(&mut self, v: usize) -> &mut StreamRng {
        &mut self.lanes[v]
    }

    /// Stream for per-trial setup randomness: graph instances, sampled
    /// codes, self-information bits.
    pub fn setup(&mut self) -> &mut StreamRng {
        let last = self.lanes.len() - 1;
        &mut self.lanes[last]
    }
}

/// One use of the channel on a single bit.
pub fn transmit<R: Rng + ?Sized>(spec: &ChannelSpec, bit: u8, rng: &mut R) -> Ternary {
    debug_assert!(bit <= 1);
    match spec.kind {
        ChannelKind::Bsc => {
            if rng.random_bool(spec.epsilon) {
                Ternary::from_bit(bit ^ 1)
            } else {
                Ternary::from_bit(bit)
            }
        }
        ChannelKind::Bec => {
            if rng.random_bool(spec.epsilon) {
                Ternary::Erased
            } else {
                Ternary::from_bit(bit)
            }
        }
    }
}

/// Transmits `bit` over the BSC `j` times and takes the majority vote.
/// An even split is broken by an independent fair coin.
pub fn repeat_majority<R: Rng + ?Sized>(spec: &ChannelSpec, bit: u8, j: u32, rng: &mut R) -> u8 {
    debug_assert!(spec.is_bsc(), "repeat_majority runs on BSC links");
    debug_assert!(j >= 1);
    let mut ones = 0u32;
    for _ in 0..j {
        if transmit(spec, bit, rng) == Ternary::One {
            ones += 1;
        }
    }
    let zeros = j - ones;
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => rng.random::<bool>() as u8,
    }
}

/// Transmits `bit` over the BEC `t` times; the bit survives iff any copy
/// does (the BEC never corrupts a value), so the result is erased with
/// probability exactly ε^t.
pub fn repeat_erasure<R: Rng + ?Sized>(spec: &ChannelSpec, bit: u8, t: u32, rng: &mut R) -> Ternary {
    debug_assert!(spec.is_bec(), "repeat_erasure runs on BEC links");
    debug_assert!(t >= 1);
    let mut out = Ternary::Erased;
    for _ in 0..t {
        // All t uses are drawn even after a success so the stream advance
        // does not depend on channel outcomes.
        let got = transmit(spec, bit, rng);
        if out == Ternary::Erased {
            out = got;
        }
    }
    out
}

/// Transmits over the BEC and substitutes an independent fair coin for an
/// erasure: statistically a BSC with crossover ε/2.
pub fn bec_as_bsc<R: Rng + ?Sized>(spec: &ChannelSpec, bit: u8, rng: &mut R) -> u8 {
    debug_assert!(spec.is_bec(), "bec_as_bsc wraps BEC links");
    match transmit(spec, bit, rng) {
        Ternary::Erased => rng.random::<bool>() as u8,
        s => s.bit().unwrap(),
    }
}
