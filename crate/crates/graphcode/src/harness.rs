//! Experiment orchestration: seeded Monte Carlo trials (optionally
//! rayon-parallel), bound-versus-empirical verdicts, scaling sweeps and
//! CSV/JSON report emission.
//!
//! Determinism contract: a (config, seed) pair yields a byte-identical
//! report regardless of worker count. Trials draw from per-(trial, node)
//! counter-based streams and the fold is a plain indexed reduction of
//! counts and sums.

use crate::bounds::{self, BoundReport};
use crate::channels::{ChannelKind, TrialRng, TrialStreams};
use crate::gf2::BitVector;
use crate::graphs::{self, bfs_layering, Network, StarKind};
use crate::schemes::{self, SchemeConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

/// Topology to simulate on. Random families are redrawn every trial; the
/// others are built once and shared read-only.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Complete { n: usize },
    Grid { side: usize, r: f64 },
    /// Random geometric graph, redrawn per trial and conditioned on
    /// connectivity by rejection.
    Geometric { n: usize, r: f64 },
    /// Extended Erdős–Rényi graph, redrawn per trial.
    ExtendedEr { n: usize, c: f64 },
    Star { tails: usize, tail_len: usize, clique_size: usize, star_kind: StarKind },
    File { path: String },
}

impl TopologySpec {
    fn is_random(&self) -> bool {
        matches!(self, TopologySpec::Geometric { .. } | TopologySpec::ExtendedEr { .. })
    }

    /// Non-sink node count (file topologies are read to find out).
    pub fn node_count(&self) -> Result<usize> {
        Ok(match self {
            TopologySpec::Complete { n }
            | TopologySpec::Geometric { n, .. }
            | TopologySpec::ExtendedEr { n, .. } => *n,
            TopologySpec::Grid { side, .. } => side * side - 1,
            TopologySpec::Star { tails, tail_len, clique_size, star_kind } => {
                tails * tail_len
                    + if *star_kind == StarKind::Heavy { tails * clique_size } else { 0 }
            }
            TopologySpec::File { path } => load_file(path)?.n(),
        })
    }

    /// The same family resized to about `n` non-sink nodes (grids round to
    /// the nearest square).
    pub fn with_n(&self, n: usize) -> TopologySpec {
        match self {
            TopologySpec::Complete { .. } => TopologySpec::Complete { n },
            TopologySpec::Grid { r, .. } => {
                let side = (((n + 1) as f64).sqrt().round() as usize).max(2);
                TopologySpec::Grid { side, r: *r }
            }
            TopologySpec::Geometric { r, .. } => TopologySpec::Geometric { n, r: *r },
            TopologySpec::ExtendedEr { c, .. } => TopologySpec::ExtendedEr { n, c: *c },
            other => other.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TopologySpec::Complete { n } => format!("complete(n={n})"),
            TopologySpec::Grid { side, r } => format!("grid(side={side},r={r})"),
            TopologySpec::Geometric { n, r } => format!("geometric(n={n},r={r})"),
            TopologySpec::ExtendedEr { n, c } => format!("er(n={n},c={c})"),
            TopologySpec::Star { tails, tail_len, clique_size, star_kind } => format!(
                "star({:?},tails={tails},len={tail_len},clique={clique_size})",
                star_kind
            )
            .to_lowercase(),
            TopologySpec::File { path } => format!("file({path})"),
        }
    }
}

fn load_file(path: &str) -> Result<Network> {
    let file = std::fs::File::open(path)?;
    Network::read_edge_list(std::io::BufReader::new(file))
}

/// Which protocol to run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SchemeKind {
    Naive { j: u32 },
    Gc1,
    Gc1Bec,
    Gc2,
    Gc2Bec,
    Gc3,
    P2pErasure,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Naive { .. } => "naive",
            SchemeKind::Gc1 => "gc1",
            SchemeKind::Gc1Bec => "gc1_bec",
            SchemeKind::Gc2 => "gc2",
            SchemeKind::Gc2Bec => "gc2_bec",
            SchemeKind::Gc3 => "gc3",
            SchemeKind::P2pErasure => "p2p_erasure",
        }
    }

    fn wants_bec(&self) -> bool {
        matches!(
            self,
            SchemeKind::Gc1Bec | SchemeKind::Gc2Bec | SchemeKind::Gc3 | SchemeKind::P2pErasure
        )
    }
}

/// Report file format.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// A declarative experiment: topology, scheme, parameters, trial budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub scheme: SchemeKind,
    pub params: SchemeConfig,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub format: ReportFormat,
    /// Optional target error probability, echoed into reports.
    #[serde(default)]
    pub p_tar: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Input("at least one trial required".into()));
        }
        self.params.validate()?;
        let chan = self.params.channel.kind;
        if self.scheme.wants_bec() && chan != ChannelKind::Bec {
            return Err(Error::Input(format!(
                "{} runs on BEC links, configure channel kind bec",
                self.scheme.label()
            )));
        }
        if matches!(self.scheme, SchemeKind::Naive { j } if j < 1) {
            return Err(Error::Input("naive repetition count must be at least 1".into()));
        }
        match (&self.scheme, &self.topology) {
            (SchemeKind::Gc3 | SchemeKind::P2pErasure, TopologySpec::ExtendedEr { .. }) => {}
            (SchemeKind::Gc3 | SchemeKind::P2pErasure, t) => {
                return Err(Error::Input(format!(
                    "{} needs an extended Erdős–Rényi topology, got {}",
                    self.scheme.label(),
                    t.label()
                )));
            }
            (SchemeKind::Gc2 | SchemeKind::Gc2Bec, TopologySpec::Geometric { .. }) => {}
            (SchemeKind::Gc2 | SchemeKind::Gc2Bec, t) => {
                return Err(Error::Input(format!(
                    "{} needs a geometric topology (coordinates and radius), got {}",
                    self.scheme.label(),
                    t.label()
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

/// How a bound fared against the measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    Vacuous,
    Infeasible,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Vacuous => "vacuous",
            Verdict::Infeasible => "infeasible",
        }
    }
}

/// A bound attached to a run, with its verdict.
#[derive(Clone, Debug)]
pub struct BoundComparison {
    pub report: BoundReport,
    pub verdict: Verdict,
}

/// Aggregated outcome of one experiment.
#[derive(Clone, Debug)]
pub struct TrialStats {
    pub scheme: String,
    pub topology: String,
    pub n: usize,
    pub epsilon: f64,
    pub channel: &'static str,
    pub param_json: serde_json::Value,
    pub trials: u64,
    pub failures: u64,
    pub pe: f64,
    pub pe_lo: f64,
    pub pe_hi: f64,
    pub broadcasts_mean: f64,
    /// Set when every trial counted the same total.
    pub broadcasts_exact: Option<u64>,
    pub min_broadcasts: u64,
    pub phase_means: BTreeMap<String, f64>,
    pub bounds: Vec<BoundComparison>,
    pub seed: u64,
    pub wall_secs: f64,
    /// Smallest average sink distance seen across trial instances.
    pub min_dbar: f64,
    /// Smallest non-sink edge count across trial instances (adjacency
    /// schemes only).
    pub min_non_sink_edges: Option<u64>,
    /// Fraction of sampled codes within the 2pN² ones budget.
    pub expurgation_rate: Option<f64>,
}

impl TrialStats {
    pub fn broadcasts_per_node(&self) -> f64 {
        self.broadcasts_mean / self.n as f64
    }
}

struct TrialOutcome {
    failed: bool,
    broadcasts: u64,
    phases: BTreeMap<&'static str, u64>,
    dbar: f64,
    non_sink_edges: Option<u64>,
    within_budget: Option<bool>,
}

/// 95% Wilson interval for a binomial proportion.
pub fn wilson_interval(failures: u64, trials: u64) -> (f64, f64, f64) {
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

fn run_one_trial(
    cfg: &ExperimentConfig,
    master: &TrialRng,
    fixed: Option<&Arc<Network>>,
    lanes: usize,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut streams = TrialStreams::new(master, trial, lanes);

    if let SchemeKind::P2pErasure = cfg.scheme {
        let TopologySpec::ExtendedEr { n, c } = cfg.topology else { unreachable!() };
        let x = BitVector::random(n, streams.setup());
        let (res, sparsity) =
            schemes::run_p2p_erasure(n, c, &x, cfg.params.channel.epsilon, &mut streams)?;
        return Ok(TrialOutcome {
            failed: !res.recovered(&x),
            broadcasts: res.broadcasts_total,
            phases: res.broadcasts_by_phase,
            dbar: 1.0,
            non_sink_edges: Some(sparsity.ones),
            within_budget: Some(sparsity.within_budget),
        });
    }

    let instance: Arc<Network> = match (&cfg.topology, fixed) {
        (_, Some(net)) => Arc::clone(net),
        (TopologySpec::ExtendedEr { n, c }, None) => {
            Arc::new(graphs::gen_extended_er(*n, *c, streams.setup())?)
        }
        (TopologySpec::Geometric { n, r }, None) => {
            // Condition on connectivity by rejection; the setup stream
            // keeps the redraws reproducible.
            let mut found = None;
            for _ in 0..10_000 {
                let (net, connected) = graphs::gen_random_geometric(*n, *r, streams.setup())?;
                if connected {
                    found = Some(net);
                    break;
                }
            }
            Arc::new(found.ok_or_else(|| {
                Error::Input(format!(
                    "no connected geometric instance in 10000 draws (n={n}, r={r}); increase r"
                ))
            })?)
        }
        _ => unreachable!("non-random topologies are prebuilt"),
    };

    let layering = bfs_layering(&instance)?;
    let x = BitVector::random(instance.n(), streams.setup());
    let res = match &cfg.scheme {
        SchemeKind::Naive { j } => schemes::run_naive(&instance, &x, *j, &cfg.params, &mut streams)?,
        SchemeKind::Gc1 => schemes::run_gc1(&instance, &layering, &x, &cfg.params, &mut streams)?,
        SchemeKind::Gc1Bec => {
            schemes::run_gc1_bec(&instance, &layering, &x, &cfg.params, &mut streams)?
        }
        SchemeKind::Gc2 => schemes::run_gc2(&instance, &x, &cfg.params, &mut streams)?,
        SchemeKind::Gc2Bec => schemes::run_gc2_bec(&instance, &x, &cfg.params, &mut streams)?,
        SchemeKind::Gc3 => schemes::run_gc3(&instance, &x, &cfg.params, &mut streams)?,
        SchemeKind::P2pErasure => unreachable!(),
    };
    let is_er = matches!(cfg.topology, TopologySpec::ExtendedEr { .. });
    Ok(TrialOutcome {
        failed: !res.recovered(&x),
        broadcasts: res.broadcasts_total,
        phases: res.broadcasts_by_phase,
        dbar: layering.avg_distance(),
        non_sink_edges: is_er.then(|| instance.non_sink_edge_count() as u64),
        within_budget: None,
    })
}

#[cfg(feature = "parallel")]
fn collect_outcomes(
    cfg: &ExperimentConfig,
    master: &TrialRng,
    fixed: Option<&Arc<Network>>,
    lanes: usize,
) -> Result<Vec<TrialOutcome>> {
    use rayon::prelude::*;
    let threads = std::env::var("GRAPHCODE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Input(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_one_trial(cfg, master, fixed, lanes, t))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn collect_outcomes(
    cfg: &ExperimentConfig,
    master: &TrialRng,
    fixed: Option<&Arc<Network>>,
    lanes: usize,
) -> Result<Vec<TrialOutcome>> {
    collect_outcomes_sequential(cfg, master, fixed, lanes)
}

fn collect_outcomes_sequential(
    cfg: &ExperimentConfig,
    master: &TrialRng,
    fixed: Option<&Arc<Network>>,
    lanes: usize,
) -> Result<Vec<TrialOutcome>> {
    (0..cfg.trials).map(|t| run_one_trial(cfg, master, fixed, lanes, t)).collect()
}

/// Runs the experiment with the configured worker pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialStats> {
    run_with(cfg, collect_outcomes)
}

/// Single-threaded variant with identical output, regardless of features.
pub fn run_experiment_sequential(cfg: &ExperimentConfig) -> Result<TrialStats> {
    run_with(cfg, collect_outcomes_sequential)
}

fn run_with(
    cfg: &ExperimentConfig,
    collect: fn(
        &ExperimentConfig,
        &TrialRng,
        Option<&Arc<Network>>,
        usize,
    ) -> Result<Vec<TrialOutcome>>,
) -> Result<TrialStats> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let fixed: Option<Arc<Network>> = if cfg.topology.is_random() {
        None
    } else {
        let net = match &cfg.topology {
            TopologySpec::Complete { n } => graphs::gen_complete(*n),
            TopologySpec::Grid { side, r } => graphs::gen_grid(*side, *r)?,
            TopologySpec::Star { tails, tail_len, clique_size, star_kind } => {
                graphs::gen_star(*tails, *tail_len, *clique_size, *star_kind)
            }
            TopologySpec::File { path } => {
                let net = load_file(path)?;
                net.validate_connectivity()?;
                net
            }
            _ => unreachable!(),
        };
        Some(Arc::new(net))
    };
    let n = cfg.topology.node_count()?;
    let lanes = match cfg.scheme {
        SchemeKind::P2pErasure => 1,
        _ => n + 1,
    };
    let master = TrialRng::new(cfg.seed);
    let outcomes = collect(cfg, &master, fixed.as_ref(), lanes)?;

    let trials = outcomes.len() as u64;
    let failures = outcomes.iter().filter(|o| o.failed).count() as u64;
    let sum_broadcasts: u64 = outcomes.iter().map(|o| o.broadcasts).sum();
    let min_broadcasts = outcomes.iter().map(|o| o.broadcasts).min().unwrap_or(0);
    let max_broadcasts = outcomes.iter().map(|o| o.broadcasts).max().unwrap_or(0);
    let mut phase_sums: BTreeMap<String, u64> = BTreeMap::new();
    for o in &outcomes {
        for (&k, &v) in &o.phases {
            *phase_sums.entry(k.to_string()).or_insert(0) += v;
        }
    }
    let phase_means = phase_sums
        .into_iter()
        .map(|(k, v)| (k, v as f64 / trials as f64))
        .collect::<BTreeMap<_, _>>();
    let (pe, pe_lo, pe_hi) = wilson_interval(failures, trials);
    let min_dbar = outcomes.iter().map(|o| o.dbar).fold(f64::INFINITY, f64::min);
    let min_non_sink_edges = outcomes.iter().filter_map(|o| o.non_sink_edges).min();
    let budget_hits = outcomes.iter().filter(|o| o.within_budget == Some(true)).count();
    let expurgation_rate = outcomes
        .iter()
        .any(|o| o.within_budget.is_some())
        .then(|| budget_hits as f64 / trials as f64);

    let mut stats = TrialStats {
        scheme: cfg.scheme.label().to_string(),
        topology: cfg.topology.label(),
        n,
        epsilon: cfg.params.channel.epsilon,
        channel: match cfg.params.channel.kind {
            ChannelKind::Bsc => "bsc",
            ChannelKind::Bec => "bec",
        },
        param_json: param_json(cfg),
        trials,
        failures,
        pe,
        pe_lo,
        pe_hi,
        broadcasts_mean: sum_broadcasts as f64 / trials as f64,
        broadcasts_exact: (min_broadcasts == max_broadcasts).then_some(min_broadcasts),
        min_broadcasts,
        phase_means,
        bounds: Vec::new(),
        seed: cfg.seed,
        wall_secs: start.elapsed().as_secs_f64(),
        min_dbar,
        min_non_sink_edges,
        expurgation_rate,
    };
    attach_bounds(cfg, &mut stats);
    Ok(stats)
}

fn param_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "scheme": cfg.scheme,
        "params": cfg.params,
        "topology": cfg.topology,
        "p_tar": cfg.p_tar,
    })
}

/// Verdict of an error-probability upper bound against the empirical count.
fn upper_verdict(report: &BoundReport, failures: u64, trials: u64) -> Verdict {
    if !report.applicable() {
        return Verdict::Infeasible;
    }
    if report.value >= 1.0 {
        return Verdict::Vacuous;
    }
    let expect = trials as f64 * report.value;
    let sigma = (trials as f64 * report.value * (1.0 - report.value)).sqrt();
    if failures as f64 <= expect + 3.0 * sigma {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

/// Verdict of a lower bound against a measured quantity.
fn lower_verdict(value: f64, measured: f64) -> Verdict {
    if value <= 0.0 {
        Verdict::Vacuous
    } else if measured >= value {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

fn attach_bounds(cfg: &ExperimentConfig, stats: &mut TrialStats) {
    let p = &cfg.params;
    let eps = p.channel.epsilon;
    let n = stats.n;

    // Cut-set lower bound on broadcasts, at the upper confidence limit of
    // the empirical error and the smallest instance distance.
    let (name, value) = match p.channel.kind {
        ChannelKind::Bsc => {
            ("cutset_lower_bsc", bounds::cutset_lower_bsc(n, stats.min_dbar, stats.pe_hi, eps))
        }
        ChannelKind::Bec => {
            ("cutset_lower_bec", bounds::cutset_lower_bec(n, stats.min_dbar, stats.pe_hi, eps))
        }
    };
    let report = BoundReport {
        name: name.into(),
        value,
        ln_value: value.ln(),
        flags: Vec::new(),
        inputs: vec![
            ("n".into(), n as f64),
            ("dbar".into(), stats.min_dbar),
            ("pe_hi".into(), stats.pe_hi),
            ("epsilon".into(), eps),
        ],
    };
    let verdict = lower_verdict(value, stats.min_broadcasts as f64);
    stats.bounds.push(BoundComparison { report, verdict });

    match cfg.scheme {
        SchemeKind::Gc1 | SchemeKind::Gc1Bec => {
            // BEC links behave as a BSC at eps/2 after coin substitution.
            let eff = if p.channel.kind == ChannelKind::Bec { eps / 2.0 } else { eps };
            let report = bounds::gc1_error_upper(n, p.gamma, p.rate, eff);
            let verdict = upper_verdict(&report, stats.failures, stats.trials);
            stats.bounds.push(BoundComparison { report, verdict });
        }
        SchemeKind::Gc2 | SchemeKind::Gc2Bec => {
            if let TopologySpec::Geometric { r, .. } = cfg.topology {
                let eff = if p.channel.kind == ChannelKind::Bec { eps / 2.0 } else { eps };
                let cg = r * r * n as f64 / (n as f64).ln();
                let b = (2.0f64.sqrt() / r).ceil() as usize;
                let local = bounds::gc2_local_error_upper(n, p.group_density, p.p_ch, eff, cg);
                let routing = bounds::gc2_routing_error_upper(n, p.group_density, p.rate, eff, b);
                let mut combined = BoundReport {
                    name: "gc2_error_upper".into(),
                    value: local.value + routing.value,
                    ln_value: (local.value + routing.value).ln(),
                    flags: Vec::new(),
                    inputs: local.inputs.clone(),
                };
                combined.flags.extend(local.flags.iter().cloned());
                combined.flags.extend(routing.flags.iter().cloned());
                let verdict = upper_verdict(&combined, stats.failures, stats.trials);
                stats.bounds.push(BoundComparison { report: combined, verdict });
            }
        }
        SchemeKind::Gc3 => {
            let closed = bounds::gc3_error_upper_closed(n, p.er_density, p.p_ch, eps, p.delta);
            let verdict = upper_verdict(&closed, stats.failures, stats.trials);
            stats.bounds.push(BoundComparison { report: closed, verdict });
            if let Some((_, best)) = bounds::gc3_feasible_delta(n, p.er_density, p.p_ch, eps) {
                let verdict = upper_verdict(&best, stats.failures, stats.trials);
                stats
                    .bounds
                    .push(BoundComparison { report: rename(best, "gc3_closed_best_delta"), verdict });
            }
            let sum = bounds::gc3_error_upper_sum(n, p.er_density, p.p_ch, eps);
            let verdict = upper_verdict(&sum, stats.failures, stats.trials);
            stats.bounds.push(BoundComparison { report: sum, verdict });

            // Density lower bound: implied minimum total in-degree, checked
            // against the sparsest instance seen.
            if stats.pe_hi > 0.0 && stats.pe_hi < 1.0 {
                let value = bounds::edge_lower_bound(n, stats.pe_hi, eps, p.er_density, p.p_ch);
                let report = BoundReport {
                    name: "edge_lower_bound".into(),
                    value,
                    ln_value: value.ln(),
                    flags: Vec::new(),
                    inputs: vec![
                        ("n".into(), n as f64),
                        ("pe_hi".into(), stats.pe_hi),
                        ("epsilon".into(), eps),
                        ("c".into(), p.er_density),
                        ("p_ch".into(), p.p_ch),
                    ],
                };
                let measured = stats.min_non_sink_edges.unwrap_or(0) as f64;
                let verdict = lower_verdict(value, measured);
                stats.bounds.push(BoundComparison { report, verdict });
            }
        }
        SchemeKind::P2pErasure => {
            // The point-to-point construction has no repetition losses:
            // the closed bound applies with p_ch = 0.
            let report = match bounds::gc3_feasible_delta(n, p.er_density, 0.0, eps) {
                Some((_, best)) => rename(best, "p2p_error_upper"),
                None => rename(
                    bounds::gc3_error_upper_closed(n, p.er_density, 0.0, eps, p.delta),
                    "p2p_error_upper",
                ),
            };
            let verdict = upper_verdict(&report, stats.failures, stats.trials);
            stats.bounds.push(BoundComparison { report, verdict });
        }
        SchemeKind::Naive { .. } => {}
    }
}

fn rename(mut report: BoundReport, name: &str) -> BoundReport {
    report.name = name.into();
    report
}

/// One row of a scaling sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n: usize,
    pub stats: TrialStats,
}

impl SweepRow {
    pub fn broadcasts(&self) -> f64 {
        self.stats.broadcasts_mean
    }

    /// broadcasts / (N ln ln N); NaN when ln ln N is undefined.
    pub fn per_n_lnln(&self) -> f64 {
        self.broadcasts() / (self.n as f64 * (self.n as f64).ln().ln())
    }

    pub fn per_n_ln(&self) -> f64 {
        self.broadcasts() / (self.n as f64 * (self.n as f64).ln())
    }
}

/// Runs the config once per sweep entry (or once, if no sweep is set).
pub fn scaling_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sizes: Vec<usize> = match &cfg.sweep {
        Some(list) if !list.is_empty() => list.clone(),
        _ => vec![cfg.topology.node_count()?],
    };
    let mut rows = Vec::with_capacity(sizes.len());
    for n in sizes {
        let mut sub = cfg.clone();
        sub.topology = cfg.topology.with_n(n);
        sub.sweep = None;
        let stats = run_experiment(&sub)?;
        let actual = stats.n;
        rows.push(SweepRow { n: actual, stats });
    }
    Ok(rows)
}

const CSV_HEADER: [&str; 17] = [
    "scheme",
    "N",
    "topology",
    "epsilon",
    "channel",
    "param_json",
    "trials",
    "failures",
    "pe",
    "pe_lo",
    "pe_hi",
    "broadcasts",
    "broadcasts_per_node",
    "bound_name",
    "bound_value",
    "verdict",
    "seed",
];

/// 12 significant digits, stable across platforms.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.11e}")
}

fn report_rows(stats: &TrialStats) -> Vec<Vec<String>> {
    let base = |bound_name: &str, bound_value: f64, verdict: &str| -> Vec<String> {
        vec![
            stats.scheme.clone(),
            stats.n.to_string(),
            stats.topology.clone(),
            fmt12(stats.epsilon),
            stats.channel.to_string(),
            stats.param_json.to_string(),
            stats.trials.to_string(),
            stats.failures.to_string(),
            fmt12(stats.pe),
            fmt12(stats.pe_lo),
            fmt12(stats.pe_hi),
            fmt12(stats.broadcasts_mean),
            fmt12(stats.broadcasts_per_node()),
            bound_name.to_string(),
            fmt12(bound_value),
            verdict.to_string(),
            stats.seed.to_string(),
        ]
    };
    if stats.bounds.is_empty() {
        return vec![base("none", f64::NAN, "vacuous")];
    }
    stats
        .bounds
        .iter()
        .map(|b| base(&b.report.name, b.report.value, b.verdict.as_str()))
        .collect()
}

/// Renders the report: one row per (run x bound).
pub fn render_report(all: &[TrialStats], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for stats in all {
                for row in report_rows(stats) {
                    w.write_record(&row).expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = all
                .iter()
                .flat_map(|stats| {
                    report_rows(stats).into_iter().map(|row| {
                        let mut obj = serde_json::Map::new();
                        for (key, val) in CSV_HEADER.iter().zip(row) {
                            obj.insert((*key).to_string(), serde_json::Value::String(val));
                        }
                        serde_json::Value::Object(obj)
                    })
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
    }
}

/// Writes the rendered report to `path`.
pub fn emit_report(all: &[TrialStats], format: ReportFormat, path: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_report(all, format).as_bytes())?;
    Ok(())
}

/// The shipped default experiment suite: one modest run per scheme at
/// parameters where every attached bound is either satisfied or honestly
/// flagged vacuous/infeasible.
pub fn default_suite() -> Vec<ExperimentConfig> {
    use crate::channels::ChannelSpec;
    let bsc = |e: f64| ChannelSpec::bsc(e).unwrap();
    let bec = |e: f64| ChannelSpec::bec(e).unwrap();
    let base = SchemeConfig::default();
    vec![
        ExperimentConfig {
            topology: TopologySpec::Complete { n: 48 },
            scheme: SchemeKind::Naive { j: 9 },
            params: SchemeConfig { channel: bsc(0.05), ..base },
            trials: 400,
            seed: 101,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::Complete { n: 48 },
            scheme: SchemeKind::Naive { j: 12 },
            params: SchemeConfig { channel: bec(0.4), ..base },
            trials: 400,
            seed: 102,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::Grid { side: 4, r: 1.0 },
            scheme: SchemeKind::Gc1,
            params: SchemeConfig { channel: bsc(0.02), ..base },
            trials: 200,
            seed: 103,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::Star {
                tails: 3,
                tail_len: 2,
                clique_size: 0,
                star_kind: StarKind::Light,
            },
            scheme: SchemeKind::Gc1Bec,
            params: SchemeConfig { channel: bec(0.1), ..base },
            trials: 200,
            seed: 104,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::Geometric { n: 40, r: 0.35 },
            scheme: SchemeKind::Gc2,
            params: SchemeConfig { channel: bsc(0.02), ..base },
            trials: 150,
            seed: 105,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::Geometric { n: 40, r: 0.35 },
            scheme: SchemeKind::Gc2Bec,
            params: SchemeConfig { channel: bec(0.2), ..base },
            trials: 150,
            seed: 106,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::ExtendedEr { n: 128, c: 6.0 },
            scheme: SchemeKind::Gc3,
            params: SchemeConfig { channel: bec(0.1), p_ch: 0.01, ..base },
            trials: 500,
            seed: 107,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::ExtendedEr { n: 96, c: 6.0 },
            scheme: SchemeKind::Gc3,
            params: SchemeConfig { channel: bec(0.45), p_ch: 0.1, ..base },
            trials: 300,
            seed: 108,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
        ExperimentConfig {
            topology: TopologySpec::ExtendedEr { n: 128, c: 6.0 },
            scheme: SchemeKind::P2pErasure,
            params: SchemeConfig { channel: bec(0.4), ..base },
            trials: 300,
            seed: 109,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelSpec;

    fn quick(scheme: SchemeKind, topology: TopologySpec, channel: ChannelSpec) -> ExperimentConfig {
        ExperimentConfig {
            topology,
            scheme,
            params: SchemeConfig { channel, ..Default::default() },
            trials: 50,
            seed: 7,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        }
    }

    #[test]
    fn zero_noise_runs_have_zero_failures() {
        let configs = [
            quick(
                SchemeKind::Naive { j: 1 },
                TopologySpec::Complete { n: 10 },
                ChannelSpec::bsc(0.0).unwrap(),
            ),
            quick(
                SchemeKind::Gc1,
                TopologySpec::Grid { side: 3, r: 1.0 },
                ChannelSpec::bsc(0.0).unwrap(),
            ),
            quick(
                SchemeKind::Gc2,
                TopologySpec::Geometric { n: 25, r: 0.4 },
                ChannelSpec::bsc(0.0).unwrap(),
            ),
            quick(
                SchemeKind::Gc3,
                TopologySpec::ExtendedEr { n: 40, c: 4.0 },
                ChannelSpec::bec(0.0).unwrap(),
            ),
            quick(
                SchemeKind::P2pErasure,
                TopologySpec::ExtendedEr { n: 40, c: 4.0 },
                ChannelSpec::bec(0.0).unwrap(),
            ),
        ];
        for cfg in configs {
            let stats = run_experiment(&cfg).unwrap();
            assert_eq!(stats.failures, 0, "{}", stats.scheme);
        }
    }

    #[test]
    fn deterministic_and_parallel_agree() {
        let cfg = quick(
            SchemeKind::Gc3,
            TopologySpec::ExtendedEr { n: 48, c: 5.0 },
            ChannelSpec::bec(0.5).unwrap(),
        );
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let c = run_experiment_sequential(&cfg).unwrap();
        let ra = render_report(&[a], ReportFormat::Csv);
        let rb = render_report(&[b], ReportFormat::Csv);
        let rc = render_report(&[c], ReportFormat::Csv);
        assert_eq!(ra, rb, "same config, same bytes");
        assert_eq!(ra, rc, "parallel and sequential agree");
    }

    #[test]
    fn incompatible_combinations_rejected() {
        assert!(run_experiment(&quick(
            SchemeKind::Gc3,
            TopologySpec::Complete { n: 10 },
            ChannelSpec::bec(0.1).unwrap(),
        ))
        .is_err());
        assert!(run_experiment(&quick(
            SchemeKind::Gc3,
            TopologySpec::ExtendedEr { n: 10, c: 3.0 },
            ChannelSpec::bsc(0.1).unwrap(),
        ))
        .is_err());
        assert!(run_experiment(&quick(
            SchemeKind::Gc2,
            TopologySpec::Complete { n: 10 },
            ChannelSpec::bsc(0.1).unwrap(),
        ))
        .is_err());
        let mut zero_trials = quick(
            SchemeKind::Gc1,
            TopologySpec::Complete { n: 4 },
            ChannelSpec::bsc(0.1).unwrap(),
        );
        zero_trials.trials = 0;
        assert!(run_experiment(&zero_trials).is_err());
    }

    #[test]
    fn report_has_stable_header_and_round_trips() {
        let cfg = quick(
            SchemeKind::Naive { j: 2 },
            TopologySpec::Complete { n: 8 },
            ChannelSpec::bec(0.3).unwrap(),
        );
        let stats = run_experiment(&cfg).unwrap();
        let csv_text = render_report(&[stats.clone()], ReportFormat::Csv);
        let mut lines = csv_text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheme,N,topology,epsilon,channel,param_json,trials,failures,pe,pe_lo,pe_hi,\
             broadcasts,broadcasts_per_node,bound_name,bound_value,verdict,seed"
        );
        // Round trip: parse and compare the numeric fields.
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let mut rows = 0;
        for record in rdr.records() {
            let record = record.unwrap();
            assert_eq!(record.get(0).unwrap(), "naive");
            assert_eq!(record.get(1).unwrap().parse::<usize>().unwrap(), stats.n);
            let pe: f64 = record.get(8).unwrap().parse().unwrap();
            assert!((pe - stats.pe).abs() <= 1e-9 * stats.pe.max(1.0));
            let verdict = record.get(15).unwrap();
            assert!(["satisfied", "violated", "vacuous", "infeasible"].contains(&verdict));
            // param_json survives CSV quoting.
            let parsed: serde_json::Value =
                serde_json::from_str(record.get(5).unwrap()).unwrap();
            assert_eq!(parsed, stats.param_json);
            rows += 1;
        }
        assert_eq!(rows, stats.bounds.len());

        let json_text = render_report(&[stats], ReportFormat::Json);
        let parsed: Vec<serde_json::Value> = serde_json::from_str(&json_text).unwrap();
        assert_eq!(parsed.len(), rows);
        assert_eq!(parsed[0]["scheme"], "naive");
    }

    #[test]
    fn sweep_single_n_when_list_empty() {
        let cfg = quick(
            SchemeKind::Gc3,
            TopologySpec::ExtendedEr { n: 32, c: 5.0 },
            ChannelSpec::bec(0.3).unwrap(),
        );
        let rows = scaling_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, 32);
    }

    #[test]
    fn trial_blocks_look_bernoulli() {
        // Chi-square smoke test on block failure counts.
        let mut cfg = quick(
            SchemeKind::Naive { j: 1 },
            TopologySpec::Complete { n: 4 },
            ChannelSpec::bec(0.25).unwrap(),
        );
        cfg.trials = 2000;
        let master = TrialRng::new(33);
        let mut block_fails = vec![0u32; 20];
        for t in 0..cfg.trials {
            let mut streams = TrialStreams::new(&master, t, 5);
            let net = graphs::gen_complete(4);
            let x = BitVector::random(4, streams.setup());
            let res = schemes::run_naive(&net, &x, 1, &cfg.params, &mut streams).unwrap();
            if !res.recovered(&x) {
                block_fails[(t as usize) * 20 / cfg.trials as usize] += 1;
            }
        }
        let per_block = cfg.trials as f64 / 20.0;
        let p: f64 = block_fails.iter().map(|&f| f64::from(f)).sum::<f64>()
            / cfg.trials as f64;
        let expect = per_block * p;
        let chi2: f64 = block_fails
            .iter()
            .map(|&f| {
                let d = f64::from(f) - expect;
                d * d / (expect * (1.0 - p))
            })
            .sum();
        // 19 degrees of freedom: far tails only.
        assert!(chi2 > 4.0 && chi2 < 50.0, "chi2 {chi2}");
    }

    #[test]
    fn experiment_config_json_round_trip() {
        let cfg = quick(
            SchemeKind::Gc3,
            TopologySpec::ExtendedEr { n: 64, c: 6.0 },
            ChannelSpec::bec(0.45).unwrap(),
        );
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.topology, cfg.topology);
        assert_eq!(back.scheme, cfg.scheme);
        assert_eq!(back.trials, cfg.trials);
        assert_eq!(back.params.channel, cfg.params.channel);
        // Optional fields may be omitted entirely.
        let sparse = r#"{
            "topology": {"kind": "extended_er", "n": 32, "c": 5.0},
            "scheme": {"name": "gc3"},
            "params": {"gamma": 2.0, "rate": 0.5, "group_density": 1.0,
                        "p_ch": 0.1, "er_density": 5.0, "delta": 0.01,
                        "channel": {"kind": "bec", "epsilon": 0.3}},
            "trials": 10,
            "seed": 3
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(sparse).unwrap();
        assert!(cfg.validate().is_ok());
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn default_suite_configs_validate() {
        for cfg in default_suite() {
            cfg.validate().unwrap();
        }
    }
}
