//! Generator-matrix families used by the gathering schemes: sampled random
//! systematic codes, block-diagonal symmetric codes for cell groups, and
//! adjacency codes `[I | A]`; plus exhaustive ML decoding, erasure
//! decoding, and random-coding error-exponent evaluation.

use crate::channels::StreamRng;
use crate::gf2::{BitMatrix, BitVector, SolveOutcome, TernaryVector};
use crate::graphs::{CellPartition, Network};
use crate::{Error, Result};
use rand::Rng;

/// Cap on exhaustive maximum-likelihood decoding: messages up to 2^K_MAX.
pub const K_MAX: usize = 16;

/// Codeword length of `message_bits` encoded at rate `rate`: ceil(k / R).
/// Every count formula in the crate routes through this one convention.
pub fn codeword_len(message_bits: usize, rate: f64) -> usize {
    debug_assert!(rate > 0.0 && rate < 1.0 + 1e-12);
    (message_bits as f64 / rate).ceil() as usize
}

/// A systematic code `[I | P]` with `P` sampled i.i.d. Bernoulli(1/2).
#[derive(Clone, Debug)]
pub struct RandomSystematicCode {
    k: usize,
    rate: f64,
    generator: BitMatrix,
}

impl RandomSystematicCode {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.generator.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn encode(&self, message: &BitVector) -> BitVector {
        self.generator.left_mul(message)
    }
}

/// Draws one member of the random systematic ensemble: length ceil(K/R),
/// identity prefix, parity entries i.i.d. fair bits.
pub fn sample_random_code(k: usize, rate: f64, rng: &mut StreamRng) -> Result<RandomSystematicCode> {
    if k == 0 {
        return Err(Error::Input("message length must be at least 1".into()));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Input(format!("code rate must be in (0,1), got {rate}")));
    }
    let len = codeword_len(k, rate);
    let mut parity = BitMatrix::zeros(k, len - k);
    for r in 0..k {
        for c in 0..len - k {
            if rng.random::<bool>() {
                parity.set(r, c, 1);
            }
        }
    }
    let generator = BitMatrix::identity(k).hstack(&parity);
    Ok(RandomSystematicCode { k, rate, generator })
}

/// Exhaustive maximum-likelihood decoding over a BSC: returns the message
/// whose codeword is nearest in Hamming distance to `received`, ties
/// broken toward the lexicographically smallest message.
///
/// Messages are enumerated in Gray-code order so each candidate codeword
/// costs one row XOR.
pub fn ml_decode_bsc(generator: &BitMatrix, received: &BitVector) -> Result<BitVector> {
    let k = generator.rows();
    if k > K_MAX {
        return Err(Error::Capability(format!(
            "exhaustive ML decoding caps at {K_MAX} message bits, got {k}; \
             reduce the block size (smaller gamma/rho or smaller N)"
        )));
    }
    assert_eq!(received.len(), generator.cols(), "received length mismatch");
    let mut message = BitVector::zeros(k);
    let mut codeword = BitVector::zeros(generator.cols());
    let mut best_msg = message.clone();
    let mut best_dist = codeword.distance(received);
    let mut row = BitVector::zeros(generator.cols());
    for g in 1u64..1 << k {
        let flip = g.trailing_zeros() as usize;
        message.set(flip, message.get(flip) ^ 1);
        for c in 0..generator.cols() {
            row.set(c, generator.get(flip, c));
        }
        codeword.xor_assign(&row);
        let d = codeword.distance(received);
        if d < best_dist || (d == best_dist && message.lex_lt(&best_msg)) {
            best_dist = d;
            best_msg = message.clone();
        }
    }
    Ok(best_msg)
}

/// Erasure decoding of any generator matrix: Gaussian elimination over the
/// surviving positions.
pub fn erasure_decode(generator: &BitMatrix, received: &TernaryVector) -> SolveOutcome {
    crate::gf2::solve_with_erasures(generator, received)
}

/// Block-diagonal group code: one symmetric block per tessellation group.
#[derive(Clone, Debug)]
pub struct Gc2Generator {
    blocks: Vec<BitMatrix>,
}

impl Gc2Generator {
    pub fn blocks(&self) -> &[BitMatrix] {
        &self.blocks
    }

    pub fn block(&self, m: usize) -> &BitMatrix {
        &self.blocks[m]
    }

    /// Generator `[I | block(m)]` of group `m`.
    pub fn group_generator(&self, m: usize) -> BitMatrix {
        let b = &self.blocks[m];
        BitMatrix::identity(b.rows()).hstack(b)
    }

    /// The assembled full generator `[I | Diag(blocks)]`.
    pub fn full_generator(&self) -> BitMatrix {
        let total: usize = self.blocks.iter().map(BitMatrix::rows).sum();
        let mut diag = BitMatrix::zeros(total, total);
        let mut at = 0;
        for b in &self.blocks {
            for r in 0..b.rows() {
                for c in 0..b.cols() {
                    if b.get(r, c) == 1 {
                        diag.set(at + r, at + c, 1);
                    }
                }
            }
            at += b.rows();
        }
        BitMatrix::identity(total).hstack(&diag)
    }
}

/// Samples the per-group symmetric blocks: i.i.d. fair upper triangle
/// (diagonal included), mirrored below.
pub fn build_gc2_generator(partition: &CellPartition, rng: &mut StreamRng) -> Gc2Generator {
    let mut blocks = Vec::with_capacity(partition.groups().len());
    for group in partition.groups() {
        let s = group.members.len();
        debug_assert!(s > 0, "groups are nonempty by construction");
        let mut b = BitMatrix::zeros(s, s);
        for i in 0..s {
            for j in i..s {
                if rng.random::<bool>() {
                    b.set(i, j, 1);
                    b.set(j, i, 1);
                }
            }
        }
        blocks.push(b);
    }
    Gc2Generator { blocks }
}

/// Adjacency code of an extended Erdős–Rényi graph: `[I | A]` where
/// column n of `A` marks the in-neighborhood of node n (self-loops count).
#[derive(Clone, Debug)]
pub struct Gc3Generator {
    adjacency: BitMatrix,
    generator: BitMatrix,
}

impl Gc3Generator {
    pub fn adjacency(&self) -> &BitMatrix {
        &self.adjacency
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    /// Number of ones in `A` (the sparseness measure being expurgated on).
    pub fn ones(&self) -> usize {
        self.adjacency.count_ones()
    }

    pub fn encode(&self, x: &BitVector) -> BitVector {
        self.generator.left_mul(x)
    }
}

/// Reads the non-sink adjacency out of a network with sink links.
pub fn build_gc3_generator(net: &Network) -> Gc3Generator {
    let n = net.n();
    let mut a = BitMatrix::zeros(n, n);
    for u in net.non_sink_nodes() {
        for &v in net.out_neighbors(u) {
            if v != net.sink() {
                a.set(net.bit_index(u), net.bit_index(v), 1);
            }
        }
    }
    let generator = BitMatrix::identity(n).hstack(&a);
    Gc3Generator { adjacency: a, generator }
}

/// Builds the adjacency code directly from a sampled `A` matrix (the
/// point-to-point sparse-code construction, no sink links involved).
pub fn gc3_from_adjacency(a: BitMatrix) -> Gc3Generator {
    assert_eq!(a.rows(), a.cols(), "adjacency must be square");
    let generator = BitMatrix::identity(a.rows()).hstack(&a);
    Gc3Generator { adjacency: a, generator }
}

/// Random-coding exponent value plus a flag for rates at or above capacity.
#[derive(Clone, Copy, Debug)]
pub struct ErExponent {
    /// E_r in nats; 0 when the rate is not below capacity.
    pub nats: f64,
    pub above_capacity: bool,
}

/// Channel family for exponent evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentKind {
    Bsc,
    Bec,
}

fn bsc_e0(rho: f64, eps: f64) -> f64 {
    let e = 1.0 / (1.0 + rho);
    rho * std::f64::consts::LN_2 - (1.0 + rho) * (eps.powf(e) + (1.0 - eps).powf(e)).ln()
}

fn bec_e0(rho: f64, eps: f64) -> f64 {
    -(eps + (1.0 - eps) * (-rho * std::f64::consts::LN_2).exp()).ln()
}

/// Channel capacity in nats.
pub fn capacity_nats(kind: ExponentKind, eps: f64) -> f64 {
    match kind {
        ExponentKind::Bsc => std::f64::consts::LN_2 * (1.0 - crate::bounds::binary_entropy(eps)),
        ExponentKind::Bec => std::f64::consts::LN_2 * (1.0 - eps),
    }
}

/// The random coding error exponent E_r(eps, R) = max over rho in [0,1] of
/// E_0(rho, eps) - rho R, with `rate_nats` in nats. Golden-section search
/// on the concave objective, accurate to well under 1e-9.
pub fn random_coding_exponent(eps: f64, rate_nats: f64, kind: ExponentKind) -> ErExponent {
    let above_capacity = rate_nats >= capacity_nats(kind, eps);
    if above_capacity {
        return ErExponent { nats: 0.0, above_capacity };
    }
    let f = |rho: f64| -> f64 {
        let e0 = match kind {
            ExponentKind::Bsc => bsc_e0(rho, eps),
            ExponentKind::Bec => bec_e0(rho, eps),
        };
        e0 - rho * rate_nats
    };
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut m1 = hi - phi * (hi - lo);
    let mut m2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(m1), f(m2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = f(m2);
        } else {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = f(m1);
        }
    }
    let best = f(0.5 * (lo + hi)).max(f(0.0)).max(f(1.0));
    ErExponent { nats: best.max(0.0), above_capacity }
}

/// Ensemble block-error bound of the random coding theorem for a concrete
/// code: `k` message bits at rate ratio `rate` means `ceil(k/rate)` channel
/// uses, each worth E_r(eps, rate * ln 2) nats of decay.
pub fn ensemble_block_error_bound(k: usize, rate: f64, eps: f64, kind: ExponentKind) -> f64 {
    let uses = codeword_len(k, rate);
    let er = random_coding_exponent(eps, rate * std::f64::consts::LN_2, kind);
    (-(uses as f64) * er.nats).exp()
}
