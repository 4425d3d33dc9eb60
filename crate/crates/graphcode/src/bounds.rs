//! Closed-form evaluators for the upper/lower bounds, count formulas and
//! feasibility conditions attached to the gathering schemes.
//!
//! Conventions, used consistently everywhere: `log` means natural log in
//! every sizing and bound formula; entropies are in bits only inside the
//! cut-set constant (where capacities are also in bits, so units cancel);
//! rates are in nats wherever they feed the random-coding exponent. Values
//! that can underflow f64 are computed in log-domain and reported with
//! their natural log alongside.

use crate::codes::{random_coding_exponent, ExponentKind};
use serde::Serialize;

/// One hypothesis of a theorem, checked individually.
#[derive(Clone, Debug, Serialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
}

/// A bound evaluation: the value, its natural log (exact even when the
/// value underflows), the hypothesis flags, and the inputs echoed back.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub ln_value: f64,
    pub flags: Vec<Flag>,
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    fn new(name: &str, ln_value: f64, inputs: Vec<(String, f64)>) -> Self {
        Self { name: name.into(), value: ln_value.exp(), ln_value, flags: Vec::new(), inputs }
    }

    fn flag(mut self, name: &str, pass: bool) -> Self {
        self.flags.push(Flag { name: name.into(), pass });
        self
    }

    /// A bound only applies when every hypothesis holds.
    pub fn applicable(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

/// Shannon entropy of a bit, in bits; 0·log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Majority-vote error bound for j repetitions over a BSC: [4ε(1−ε)]^{j/2}.
pub fn repetition_error_bound(eps: f64, j: u32) -> f64 {
    (4.0 * eps * (1.0 - eps)).powf(f64::from(j) / 2.0)
}

/// Erasure probability of a bit repeated t times over a BEC: ε^t.
pub fn erasure_repetition_rate(eps: f64, t: u32) -> f64 {
    eps.powi(t as i32)
}

/// Repetition count of the geometric scheme's local phase:
/// ceil(2 ln(2 rho ln N / p_ch) / ln(1/(4 eps (1-eps)))), at least 1.
pub fn gc2_repetitions(n: usize, rho: f64, p_ch: f64, eps: f64) -> u32 {
    debug_assert!(eps < 0.5, "BSC repetition sizing needs eps < 1/2");
    let l = 2.0 * rho * (n as f64).ln();
    let raw = 2.0 * (l / p_ch).ln() / (1.0 / (4.0 * eps * (1.0 - eps))).ln();
    (raw.ceil().max(1.0)) as u32
}

/// Repetition count of the adjacency scheme's gossip phase:
/// ceil(ln(c ln N / p_ch) / ln(1/eps)), at least 1.
pub fn gc3_repetitions(n: usize, c: f64, p_ch: f64, eps: f64) -> u32 {
    debug_assert!(eps < 1.0, "BEC repetition sizing needs eps < 1");
    let raw = (c * (n as f64).ln() / p_ch).ln() / (1.0 / eps).ln();
    (raw.ceil().max(1.0)) as u32
}

/// Cut-set lower bound on broadcasts over BSC links:
/// ((1−H(Pe))/(1−H(ε))) · d̄ · N.
pub fn cutset_lower_bsc(n: usize, dbar: f64, pe: f64, eps: f64) -> f64 {
    (1.0 - binary_entropy(pe)) / (1.0 - binary_entropy(eps)) * dbar * n as f64
}

/// Cut-set lower bound over BEC links: ((1−H(Pe))/(1−ε)) · d̄ · N.
pub fn cutset_lower_bec(n: usize, dbar: f64, pe: f64, eps: f64) -> f64 {
    (1.0 - binary_entropy(pe)) / (1.0 - eps) * dbar * n as f64
}

/// Broadcast-count upper bound of the tree scheme:
/// N(d̄/R + 1) + N(γ ln N / R + 1), rate in nats-per-bit convention shared
/// with the exponent argument.
pub fn gc1_count_upper(n: usize, dbar: f64, gamma: f64, r: f64) -> f64 {
    let nf = n as f64;
    nf * (dbar / r + 1.0) + nf * (gamma * nf.ln() / r + 1.0)
}

/// Error upper bound of the tree scheme:
/// N^{−(γE_r/R − 1)} · (1 + exp(−E_r/R)), with the rate-feasibility
/// hypothesis R < γ E_r(ε, R) flagged.
pub fn gc1_error_upper(n: usize, gamma: f64, r: f64, eps: f64) -> BoundReport {
    let er = random_coding_exponent(eps, r, ExponentKind::Bsc).nats;
    let ln_value = -(gamma * er / r - 1.0) * (n as f64).ln() + (1.0 + (-er / r).exp()).ln();
    BoundReport::new(
        "gc1_error_upper",
        ln_value,
        vec![
            ("n".into(), n as f64),
            ("gamma".into(), gamma),
            ("r".into(), r),
            ("epsilon".into(), eps),
            ("er".into(), er),
        ],
    )
    .flag("rate_below_gamma_er", r < gamma * er)
}

/// Identity-function feasibility inequality for β broadcasts per node on a
/// complete graph: 1 − Pe < sqrt(1/N) + 48 β² ln(1/ε) / (ε^{4β} ln N).
#[derive(Clone, Debug)]
pub struct GoyalCheck {
    /// True when the inequality holds; a failing inequality certifies that
    /// β broadcasts per node cannot reach this error probability.
    pub holds: bool,
    pub rhs: f64,
}

pub fn goyal_identity_check(beta: f64, n: usize, pe: f64, eps: f64) -> GoyalCheck {
    let nf = n as f64;
    let rhs = (1.0 / nf).sqrt()
        + 48.0 * beta * beta * (1.0 / eps).ln() / (eps.powf(4.0 * beta) * nf.ln());
    GoyalCheck { holds: 1.0 - pe < rhs, rhs }
}

/// Broadcast lower bound for constant-degree graphs over BECs:
/// (N/D) · (ln N − ln ln(1/(1−δ))) / ln(1/ε), floored at 0.
pub fn constant_degree_lower(n: usize, d: usize, delta: f64, eps: f64) -> f64 {
    let nf = n as f64;
    let v = nf / d as f64 * (nf.ln() - (1.0 / (1.0 - delta)).ln().ln()) / (1.0 / eps).ln();
    v.max(0.0)
}

fn cell_group_budget(n: usize, rho: f64, cg: f64) -> f64 {
    // N/(rho ln N) dense groups plus one sparse group per cell, B² of them.
    let nf = n as f64;
    nf / (rho * nf.ln()) + ((2.0 * nf / (cg * nf.ln())).sqrt() + 1.0).powi(2)
}

/// Local-phase error upper bound of the geometric scheme:
/// N^{−4ρ E_r(ε+p_ch, 1/2)} · [N/(ρ ln N) + (sqrt(2N/(c_g ln N)) + 1)²].
pub fn gc2_local_error_upper(n: usize, rho: f64, p_ch: f64, eps: f64, cg: f64) -> BoundReport {
    let er = random_coding_exponent(eps + p_ch, 0.5, ExponentKind::Bsc).nats;
    let ln_value = -4.0 * rho * er * (n as f64).ln() + cell_group_budget(n, rho, cg).ln();
    BoundReport::new(
        "gc2_local_error_upper",
        ln_value,
        vec![
            ("n".into(), n as f64),
            ("rho".into(), rho),
            ("p_ch".into(), p_ch),
            ("epsilon".into(), eps),
            ("cg".into(), cg),
            ("er".into(), er),
        ],
    )
    .flag("four_rho_er_above_one", 4.0 * rho * er > 1.0)
}

/// Routing-phase error upper bound of the geometric scheme:
/// 6B (N/(ρ ln N) + B²) N^{−(ρ/R) E_r(ε, R)}.
pub fn gc2_routing_error_upper(n: usize, rho: f64, r: f64, eps: f64, b: usize) -> BoundReport {
    let er = random_coding_exponent(eps, r, ExponentKind::Bsc).nats;
    let nf = n as f64;
    let bf = b as f64;
    let ln_value =
        (6.0 * bf).ln() + (nf / (rho * nf.ln()) + bf * bf).ln() - (rho / r) * er * nf.ln();
    BoundReport::new(
        "gc2_routing_error_upper",
        ln_value,
        vec![
            ("n".into(), n as f64),
            ("rho".into(), rho),
            ("r".into(), r),
            ("epsilon".into(), eps),
            ("b".into(), bf),
            ("er".into(), er),
        ],
    )
    .flag("rho_over_r_er_above_three_halves", rho / r * er > 1.5)
}

/// Broadcast counts of the geometric scheme, (local, routing):
/// local = (j_g+2)[N + 2ρ ln N (sqrt(2N/(c_g ln N)) + 1)²],
/// routing = [3 d̄ N + 3ρ ln N (sqrt(2N/(c_g ln N)) + 1)²] / R
/// (each routed message bit costs 1/R codeword bits per hop).
pub fn gc2_counts(
    n: usize,
    rho: f64,
    p_ch: f64,
    eps: f64,
    cg: f64,
    dbar: f64,
    r: f64,
) -> (f64, f64) {
    let nf = n as f64;
    let jg = f64::from(gc2_repetitions(n, rho, p_ch, eps));
    let cells = ((2.0 * nf / (cg * nf.ln())).sqrt() + 1.0).powi(2);
    let local = (jg + 2.0) * (nf + 2.0 * rho * nf.ln() * cells);
    let routing = (3.0 * dbar * nf + 3.0 * rho * nf.ln() * cells) / r;
    (local, routing)
}

/// The ε₀ constant of the adjacency-scheme analysis:
/// (2/(1−1/e) + 1) p_ch + ε.
pub fn epsilon_zero(p_ch: f64, eps: f64) -> f64 {
    let l = 2.0 / (1.0 - (-1.0f64).exp()) + 1.0;
    l * p_ch + eps
}

/// Exact expected-error upper bound of the adjacency scheme:
/// sum over k of C(N,k) ε^k [ε₀ + (1−ε₀)(1+(1−2p)^k)/2]^N with
/// p = c ln N / N, evaluated by signed powers and log-sum-exp.
pub fn gc3_error_upper_sum(n: usize, c: f64, p_ch: f64, eps: f64) -> BoundReport {
    let nf = n as f64;
    let p = c * nf.ln() / nf;
    let eps0 = epsilon_zero(p_ch, eps);
    let inputs = vec![
        ("n".into(), nf),
        ("c".into(), c),
        ("p_ch".into(), p_ch),
        ("epsilon".into(), eps),
        ("p".into(), p),
        ("eps0".into(), eps0),
    ];
    let feasible = c * nf.ln() > 1.0;
    if eps == 0.0 {
        // Every term carries ε^k = 0.
        return BoundReport::new("gc3_error_upper_sum", f64::NEG_INFINITY, inputs)
            .flag("c_ln_n_above_one", feasible)
            .flag("p_at_most_one", p <= 1.0);
    }
    let q = 1.0 - 2.0 * p; // may be negative when p > 1/2: sign tracked
    let ln_eps = eps.ln();
    let mut ln_binom = 0.0f64;
    let mut ln_terms = Vec::with_capacity(n);
    for k in 1..=n {
        ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        let mag = q.abs().powi(k as i32);
        let qk = if q < 0.0 && k % 2 == 1 { -mag } else { mag };
        let inner = eps0 + (1.0 - eps0) * (1.0 + qk) / 2.0;
        if inner <= 0.0 {
            continue;
        }
        ln_terms.push(ln_binom + k as f64 * ln_eps + nf * inner.ln());
    }
    let ln_value = log_sum_exp(&ln_terms);
    BoundReport::new("gc3_error_upper_sum", ln_value, inputs)
        .flag("c_ln_n_above_one", feasible)
        .flag("p_at_most_one", p <= 1.0)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// The b_δ constant: ½ (1 − ε₀)(1 − (1 − e^{−2cδ})/2).
pub fn gc3_b_delta(c: f64, p_ch: f64, eps: f64, delta: f64) -> f64 {
    let eps0 = epsilon_zero(p_ch, eps);
    0.5 * (1.0 - eps0) * (1.0 - (1.0 - (-2.0 * c * delta).exp()) / 2.0)
}

/// Closed-form error upper bound of the adjacency scheme:
/// (1 − b_δ)^N + δ e ε N^{2 − c(1−ε₀)(1−cδ)} / ln N, with the hypotheses
/// ε < b_δ and 2 < c(1−ε₀)(1−cδ) flagged.
pub fn gc3_error_upper_closed(n: usize, c: f64, p_ch: f64, eps: f64, delta: f64) -> BoundReport {
    let nf = n as f64;
    let eps0 = epsilon_zero(p_ch, eps);
    let b = gc3_b_delta(c, p_ch, eps, delta);
    let exponent = 2.0 - c * (1.0 - eps0) * (1.0 - c * delta);
    let ln_first = if b >= 1.0 { f64::NEG_INFINITY } else { nf * (1.0 - b).ln() };
    let ln_second = if eps == 0.0 || delta == 0.0 {
        f64::NEG_INFINITY
    } else {
        delta.ln() + 1.0 + eps.ln() + exponent * nf.ln() - nf.ln().ln().max(f64::MIN_POSITIVE.ln())
    };
    let ln_value = log_sum_exp(&[ln_first, ln_second]);
    BoundReport::new(
        "gc3_error_upper_closed",
        ln_value,
        vec![
            ("n".into(), nf),
            ("c".into(), c),
            ("p_ch".into(), p_ch),
            ("epsilon".into(), eps),
            ("delta".into(), delta),
            ("eps0".into(), eps0),
            ("b_delta".into(), b),
            ("exponent".into(), exponent),
        ],
    )
    .flag("eps_below_b_delta", eps < b)
    .flag("exponent_negative", 2.0 < c * (1.0 - eps0) * (1.0 - c * delta))
    .flag("p_at_most_half", c * nf.ln() / nf <= 0.5)
}

/// Searches δ for the feasible closed-form bound with the smallest value.
/// Returns `None` when no δ on the grid satisfies both hypotheses.
pub fn gc3_feasible_delta(n: usize, c: f64, p_ch: f64, eps: f64) -> Option<(f64, BoundReport)> {
    let mut best: Option<(f64, BoundReport)> = None;
    let steps = 400;
    for i in 1..steps {
        let delta = i as f64 / steps as f64 / c; // spans (0, 1/c)
        let report = gc3_error_upper_closed(n, c, p_ch, eps, delta);
        if !report.applicable() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| report.ln_value < b.ln_value) {
            best = Some((delta, report));
        }
    }
    best
}

/// Evaluates both adjacency-scheme bounds; `Some((sum, closed))` when both
/// are applicable (the closed form provably dominates the sum there).
pub fn gc3_closed_dominates_sum(
    n: usize,
    c: f64,
    p_ch: f64,
    eps: f64,
    delta: f64,
) -> Option<(BoundReport, BoundReport)> {
    let sum = gc3_error_upper_sum(n, c, p_ch, eps);
    let closed = gc3_error_upper_closed(n, c, p_ch, eps, delta);
    (sum.applicable() && closed.applicable()).then_some((sum, closed))
}

/// Minimum total non-sink in-degree implied by the density lower bound:
/// (N (ln N − ln ln(1/(1−Pe))) / ln(1/ε) − N) / t, floored at 0, with the
/// repetition count t of the gossip phase.
pub fn edge_lower_bound(n: usize, pe: f64, eps: f64, c: f64, p_ch: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&pe) && pe > 0.0, "Pe must be in (0,1)");
    let t = f64::from(gc3_repetitions(n, c, p_ch, eps));
    let nf = n as f64;
    let rhs = nf * (nf.ln() - (1.0 / (1.0 - pe)).ln().ln()) / (1.0 / eps).ln();
    ((rhs - nf) / t).max(0.0)
}

/// Outcome of the erasure-code density check.
#[derive(Clone, Debug)]
pub struct DensityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Sparseness lower bound for asymptotically good rate-1/2 erasure codes:
/// sum of d_n ceil(1 + ln d_n / ln(1/ε)) must exceed
/// N (ln N − ln ln(1/(1−Pe))) / ln(1/ε).
pub fn erasure_density_lower(degrees: &[usize], n: usize, pe: f64, eps: f64) -> DensityCheck {
    let ln_inv_eps = (1.0 / eps).ln();
    let lhs: f64 = degrees
        .iter()
        .filter(|&&d| d > 0)
        .map(|&d| d as f64 * (1.0 + (d as f64).ln() / ln_inv_eps).ceil())
        .sum();
    let nf = n as f64;
    let rhs = nf * (nf.ln() - (1.0 / (1.0 - pe)).ln().ln()) / ln_inv_eps;
    DensityCheck { lhs, rhs, pass: lhs > rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        // Closed form: H(1/4) = 2 - 0.75 log2(3).
        assert!((binary_entropy(0.25) - (2.0 - 0.75 * 3.0f64.log2())).abs() < 1e-12);
        assert!((binary_entropy(0.11) - 0.499915958164528).abs() < 1e-9);
        assert!((binary_entropy(0.3) - binary_entropy(0.7)).abs() < 1e-12);
    }

    #[test]
    fn cutset_values() {
        let v = cutset_lower_bsc(100, 1.0, 0.01, 0.1);
        assert!((v - 173.107).abs() < 0.05, "got {v}");
        assert!(cutset_lower_bsc(100, 1.0, 0.4999999, 0.1) < 1e-6);
        let v0 = cutset_lower_bsc(100, 2.0, 0.01, 0.0);
        assert!((v0 - (1.0 - binary_entropy(0.01)) * 200.0).abs() < 1e-9);

        let v = cutset_lower_bec(100, 2.0, 0.01, 0.5);
        assert!((v - 367.68).abs() < 0.05, "got {v}");
        assert!(cutset_lower_bec(100, 2.0, 0.01, 0.0) < cutset_lower_bec(100, 2.0, 0.01, 0.5));
    }

    #[test]
    fn gc1_count_arithmetic() {
        let v = gc1_count_upper(55, 3.0, 2.0, 0.5);
        let expected = 55.0 * 7.0 + 55.0 * (2.0 * (55.0f64).ln() / 0.5 + 1.0);
        assert!((v - expected).abs() < 1e-9);
        assert!((expected - 1321.61).abs() < 0.05);
        // Linear in N for fixed d̄ and gamma up to the ln N factor in the
        // second term: check degenerate d̄ = 0 keeps only that term.
        let v0 = gc1_count_upper(55, 0.0, 2.0, 0.5);
        assert!((v0 - (55.0 + 55.0 * (2.0 * (55.0f64).ln() / 0.5 + 1.0))).abs() < 1e-9);
    }

    #[test]
    fn gc1_error_cases() {
        let infeasible = gc1_error_upper(100, 2.0, 0.3, 0.4999999);
        assert!(!infeasible.applicable());

        let r = gc1_error_upper(100, 1.0, 0.3, 0.0);
        let er = LN_2 - 0.3;
        let expected = 100.0f64.powf(-(er / 0.3 - 1.0)) * (1.0 + (-er / 0.3).exp());
        assert!(r.applicable());
        assert!((r.value - expected).abs() < 1e-9, "{} vs {expected}", r.value);
        // The raw value may exceed 1 before the printed crossover; it is
        // reported verbatim.
        let raw = gc1_error_upper(2, 1.0, 0.3, 0.0);
        assert!(raw.value.is_finite());
    }

    #[test]
    fn goyal_check_cases() {
        let g = goyal_identity_check(1.0, 1_000_000, 0.01, 0.1);
        assert!(g.holds);
        assert!((g.rhs - 80000.001).abs() < 0.01, "rhs {}", g.rhs);
        assert!(goyal_identity_check(1.0, 100, 1.0, 0.1).holds);
        // RHS decreasing in N for fixed beta.
        let a = goyal_identity_check(1.0, 1_000, 0.01, 0.1).rhs;
        let b = goyal_identity_check(1.0, 100_000, 0.01, 0.1).rhs;
        assert!(b < a);
    }

    #[test]
    fn constant_degree_cases() {
        let v = constant_degree_lower(100, 4, 0.5, 0.5);
        assert!((v - 179.316).abs() < 0.05, "got {v}");
        assert_eq!(constant_degree_lower(8, 2, 0.9999, 0.5), 0.0);
        let a = constant_degree_lower(100, 4, 0.5, 0.5);
        let b = constant_degree_lower(100, 8, 0.5, 0.5);
        assert!((a - 2.0 * b).abs() < 1e-9, "linear in N/D at fixed N");
    }

    #[test]
    fn gc2_bound_cases() {
        assert!(!gc2_local_error_upper(1000, 4.0, 0.1, 0.45, 2.0).applicable());
        // Doubling rho doubles the decay exponent.
        let r1 = gc2_local_error_upper(1000, 4.0, 0.02, 0.01, 2.0);
        let r2 = gc2_local_error_upper(1000, 8.0, 0.02, 0.01, 2.0);
        let budget = cell_group_budget(1000, 4.0, 2.0).ln();
        let budget2 = cell_group_budget(1000, 8.0, 2.0).ln();
        assert!(
            ((r1.ln_value - budget) * 2.0 - (r2.ln_value - budget2)).abs() < 1e-6,
            "exponent should double"
        );
        // Concrete evaluation composed from the exponent oracle.
        let er = random_coding_exponent(0.1, 0.5, ExponentKind::Bsc).nats;
        let want = (-4.0 * 4.0 * er * 1000.0f64.ln()).exp() * cell_group_budget(1000, 4.0, 2.0);
        let got = gc2_local_error_upper(1000, 4.0, 0.05, 0.05, 2.0);
        assert!((got.value - want).abs() <= 1e-12 * want.max(1.0), "{} vs {want}", got.value);

        assert!(!gc2_routing_error_upper(1000, 2.0, 0.3, 0.4999, 5).applicable());
        let b1 = gc2_routing_error_upper(1000, 2.0, 0.3, 0.01, 1);
        let er = random_coding_exponent(0.01, 0.3, ExponentKind::Bsc).nats;
        let want = 6.0 * (1000.0 / (2.0 * 1000.0f64.ln()) + 1.0)
            * 1000.0f64.powf(-(2.0 / 0.3) * er);
        assert!((b1.value - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn gc2_count_cases() {
        assert_eq!(gc2_repetitions(1000, 2.0, 0.1, 0.1), 12);
        // Degenerate eps = 0 clamps to one broadcast.
        assert_eq!(gc2_repetitions(1000, 2.0, 0.1, 0.0), 1);
        let (_, routing1) = gc2_counts(1000, 2.0, 0.1, 0.1, 2.0, 1.0, 0.5);
        let (_, routing3) = gc2_counts(1000, 2.0, 0.1, 0.1, 2.0, 3.0, 0.5);
        let cells = ((2.0 * 1000.0 / (2.0 * 1000.0f64.ln())).sqrt() + 1.0).powi(2);
        let slope = (routing3 - routing1) / 2.0;
        assert!((slope - 3.0 * 1000.0 / 0.5).abs() < 1e-9, "routing linear in dbar");
        assert!((routing1 - (3.0 * 1000.0 + 3.0 * 2.0 * 1000.0f64.ln() * cells) / 0.5).abs() < 1e-9);
        // Single-cell limit: c_g ln N ≈ 2N collapses the cell term to 4.
        let n = 1000;
        let cg = 2.0 * n as f64 / (n as f64).ln();
        let (local, _) = gc2_counts(n, 2.0, 0.1, 0.1, cg, 1.0, 0.5);
        let jg = f64::from(gc2_repetitions(n, 2.0, 0.1, 0.1));
        assert!((local - (jg + 2.0) * (n as f64 + 2.0 * 2.0 * (n as f64).ln() * 4.0)).abs() < 1e-6);
    }

    #[test]
    fn gc3_closed_worked_example() {
        let r = gc3_error_upper_closed(256, 6.0, 0.01, 0.1, 0.01);
        let eps0 = r.inputs.iter().find(|(k, _)| k == "eps0").unwrap().1;
        let b = r.inputs.iter().find(|(k, _)| k == "b_delta").unwrap().1;
        let expo = r.inputs.iter().find(|(k, _)| k == "exponent").unwrap().1;
        assert!((eps0 - 0.1416395).abs() < 1e-6);
        assert!((b - 0.404917).abs() < 1e-5);
        assert!((expo - (-2.84115)).abs() < 1e-4);
        assert!(r.applicable());

        // δ → 0: b_δ → (1 − ε₀)/2.
        let b0 = gc3_b_delta(6.0, 0.01, 0.1, 1e-12);
        assert!((b0 - (1.0 - 0.1416395) / 2.0).abs() < 1e-6);

        // ε at or above b_δ is infeasible.
        assert!(!gc3_error_upper_closed(256, 6.0, 0.01, 0.45, 0.01).applicable());
    }

    #[test]
    fn gc3_sum_small_case_against_exact_rationals() {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::{One, ToPrimitive, Zero};

        fn exact(n: usize, c: f64, p_ch: f64, eps: f64) -> f64 {
            let rat = |x: f64| BigRational::from_float(x).unwrap();
            let nf = n as f64;
            let p = rat(c * nf.ln() / nf);
            let eps0 = rat(epsilon_zero(p_ch, eps));
            let epsr = rat(eps);
            let one = BigRational::one();
            let two = BigRational::from_integer(BigInt::from(2));
            let q = &one - &two * &p;
            let mut total = BigRational::zero();
            let mut binom = BigInt::one();
            for k in 1..=n {
                binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
                let qk = num_traits::pow::pow(q.clone(), k);
                let inner = &eps0 + (&one - &eps0) * (&one + qk) / &two;
                let term = BigRational::from_integer(binom.clone())
                    * num_traits::pow::pow(epsr.clone(), k)
                    * num_traits::pow::pow(inner, n);
                total += term;
            }
            total.to_f64().unwrap()
        }

        for (n, c, p_ch, eps) in
            [(8usize, 2.0, 0.05, 0.2), (16, 3.0, 0.01, 0.1), (32, 6.0, 0.01, 0.1), (64, 6.0, 0.01, 0.1)]
        {
            let got = gc3_error_upper_sum(n, c, p_ch, eps);
            let want = exact(n, c, p_ch, eps);
            let rel = (got.value - want).abs() / want;
            assert!(rel < 1e-9, "n={n}: {} vs {want} (rel {rel})", got.value);
        }
    }

    #[test]
    fn gc3_sum_edge_cases() {
        assert_eq!(gc3_error_upper_sum(64, 6.0, 0.01, 0.0).value, 0.0);
        // Bound decreasing in N on a feasible grid.
        let a = gc3_error_upper_sum(64, 6.0, 0.01, 0.1);
        let b = gc3_error_upper_sum(128, 6.0, 0.01, 0.1);
        let c = gc3_error_upper_sum(256, 6.0, 0.01, 0.1);
        assert!(a.applicable() && b.applicable() && c.applicable());
        assert!(b.ln_value < a.ln_value && c.ln_value < b.ln_value);
        // p > 1/2 exercises the signed (1-2p)^k branch.
        let signed = gc3_error_upper_sum(8, 3.0, 0.05, 0.2);
        assert!(signed.value.is_finite());
    }

    #[test]
    fn gc3_closed_dominates_sum_on_feasible_grid() {
        for (n, c) in [(24usize, 3.0), (32, 4.0), (48, 5.0), (64, 6.0)] {
            match gc3_closed_dominates_sum(n, c, 0.01, 0.1, 0.01) {
                Some((sum, closed)) => {
                    assert!(
                        sum.ln_value <= closed.ln_value,
                        "n={n}: sum {} > closed {}",
                        sum.value,
                        closed.value
                    );
                    assert!(sum.ln_value < closed.ln_value, "equality never expected");
                }
                None => panic!("expected feasible point at n={n}"),
            }
        }
        // Infeasible parameters yield no comparison: eps past b_delta, or
        // an edge probability c ln N / N past 1.
        assert!(gc3_closed_dominates_sum(64, 6.0, 0.01, 0.45, 0.01).is_none());
        assert!(gc3_closed_dominates_sum(16, 6.0, 0.01, 0.1, 0.01).is_none());
    }

    #[test]
    fn edge_lower_bound_cases() {
        assert_eq!(gc3_repetitions(1000, 6.0, 0.1, 0.5), 9);
        let v = edge_lower_bound(1000, 0.01, 0.5, 6.0, 0.1);
        assert!((v - 1733.58).abs() < 0.05, "got {v}");
        assert_eq!(edge_lower_bound(4, 1.0 - 1e-12, 0.5, 6.0, 0.1), 0.0);
        // Pe near 1 shrinks the requirement.
        assert!(
            edge_lower_bound(1000, 1.0 - 1e-12, 0.5, 6.0, 0.1)
                < 0.5 * edge_lower_bound(1000, 0.01, 0.5, 6.0, 0.1)
        );
    }

    #[test]
    fn density_check_cases() {
        let zero = erasure_density_lower(&[0; 100], 100, 0.01, 0.5);
        assert_eq!(zero.lhs, 0.0);
        assert!(!zero.pass);

        let n = 1024;
        let d = (n as f64).ln().ceil() as usize;
        let check = erasure_density_lower(&vec![d; n], n, 0.01, 0.5);
        assert!((check.lhs - 28672.0).abs() < 1e-9);
        assert!(check.pass, "lhs {} rhs {}", check.lhs, check.rhs);

        let doubled = erasure_density_lower(&vec![2 * d; n], n, 0.01, 0.5);
        assert!(doubled.lhs > 2.0 * check.lhs, "superlinear in the degrees");
    }
}
