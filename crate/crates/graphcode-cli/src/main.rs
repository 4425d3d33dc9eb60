//! Command-line driver: run seeded Monte Carlo experiments, scaling
//! sweeps, closed-form bound evaluations, and graph-file generation.

use clap::{Args, Parser, Subcommand};
use graphcode::bounds;
use graphcode::channels::{ChannelKind, ChannelSpec, TrialRng};
use graphcode::graphs::{self, StarKind};
use graphcode::harness::{
    emit_report, render_report, run_experiment, scaling_sweep, ExperimentConfig, ReportFormat,
    SchemeKind, TopologySpec,
};
use graphcode::schemes::SchemeConfig;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "graphcode",
    about = "One-shot data gathering in noisy broadcast networks: graph-code schemes, \
             exact broadcast counts, Monte Carlo error estimation and bound checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one Monte Carlo experiment and print (or write) the report.
    Simulate(RunArgs),
    /// Run the experiment over a list of network sizes.
    Sweep(SweepArgs),
    /// Evaluate one closed-form bound and print the report.
    Bounds(BoundArgs),
    /// Generate a topology and write it in the edge-list format.
    Graph(GraphArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON file with an experiment description; flags override its fields.
    #[arg(long)]
    config: Option<String>,
    /// naive | gc1 | gc1_bec | gc2 | gc2_bec | gc3 | p2p_erasure
    #[arg(long)]
    scheme: Option<String>,
    /// complete | grid | geometric | er | star | file
    #[arg(long)]
    topology: Option<String>,
    /// Non-sink node count.
    #[arg(long)]
    n: Option<usize>,
    /// Grid side (alternative to --n for grids).
    #[arg(long)]
    side: Option<usize>,
    /// Connection radius (geometric, grid).
    #[arg(long)]
    r: Option<f64>,
    /// Edge density constant of extended Erdős–Rényi graphs.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    tails: Option<usize>,
    #[arg(long)]
    tail_len: Option<usize>,
    #[arg(long)]
    clique: Option<usize>,
    /// heavy | light
    #[arg(long)]
    star_kind: Option<String>,
    /// Graph file path (topology = file).
    #[arg(long)]
    path: Option<String>,
    /// Channel noise parameter.
    #[arg(long)]
    epsilon: Option<f64>,
    /// bsc | bec (defaults to the scheme's native kind).
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Code rate in bits per channel use.
    #[arg(long)]
    rate: Option<f64>,
    /// Group density constant of the geometric scheme.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p_ch: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Repetitions per bit for the naive scheme.
    #[arg(long)]
    j: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Target error probability (echoed into reports).
    #[arg(long)]
    p_tar: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated network sizes, e.g. 128,256,512,1024.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BoundArgs {
    /// gc3_closed | gc3_sum | gc1_error | gc1_count | gc2_local |
    /// gc2_routing | gc2_counts | cutset_bsc | cutset_bec | edge_lower |
    /// constant_degree | goyal
    #[arg(long)]
    name: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    p_ch: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    cg: Option<f64>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    dbar: Option<f64>,
    #[arg(long)]
    pe: Option<f64>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct GraphArgs {
    /// geometric | er | complete | grid | star
    #[arg(long)]
    gen: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    tails: Option<usize>,
    #[arg(long)]
    tail_len: Option<usize>,
    #[arg(long)]
    clique: Option<usize>,
    #[arg(long)]
    star_kind: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep redrawing a random geometric graph until it is connected.
    #[arg(long, default_value_t = false)]
    require_connected: bool,
    #[arg(long)]
    out: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), Box<dyn std::error::Error>> {
        match cli.cmd {
            Cmd::Simulate(args) => simulate(&args),
            Cmd::Sweep(args) => sweep(&args),
            Cmd::Bounds(args) => bound(&args),
            Cmd::Graph(args) => graph(&args),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_scheme(name: &str, j: Option<u32>) -> Result<SchemeKind, String> {
    Ok(match name {
        "naive" => SchemeKind::Naive { j: j.unwrap_or(1) },
        "gc1" => SchemeKind::Gc1,
        "gc1_bec" => SchemeKind::Gc1Bec,
        "gc2" => SchemeKind::Gc2,
        "gc2_bec" => SchemeKind::Gc2Bec,
        "gc3" => SchemeKind::Gc3,
        "p2p_erasure" => SchemeKind::P2pErasure,
        other => return Err(format!("unknown scheme {other}")),
    })
}

fn parse_star_kind(name: &str) -> Result<StarKind, String> {
    match name {
        "heavy" => Ok(StarKind::Heavy),
        "light" => Ok(StarKind::Light),
        other => Err(format!("unknown star kind {other}")),
    }
}

fn parse_topology(args: &RunArgs) -> Result<TopologySpec, String> {
    let name = args.topology.as_deref().ok_or("missing --topology")?;
    let need_n = || args.n.ok_or(format!("topology {name} needs --n"));
    Ok(match name {
        "complete" => TopologySpec::Complete { n: need_n()? },
        "grid" => {
            let side = match (args.side, args.n) {
                (Some(s), _) => s,
                (None, Some(n)) => (((n + 1) as f64).sqrt().round() as usize).max(2),
                (None, None) => return Err("grid needs --side or --n".into()),
            };
            TopologySpec::Grid { side, r: args.r.unwrap_or(1.0) }
        }
        "geometric" => TopologySpec::Geometric {
            n: need_n()?,
            r: args.r.ok_or("geometric needs --r")?,
        },
        "er" => TopologySpec::ExtendedEr { n: need_n()?, c: args.c.unwrap_or(6.0) },
        "star" => TopologySpec::Star {
            tails: args.tails.unwrap_or(3),
            tail_len: args.tail_len.unwrap_or(1),
            clique_size: args.clique.unwrap_or(0),
            star_kind: parse_star_kind(args.star_kind.as_deref().unwrap_or("light"))?,
        },
        "file" => TopologySpec::File {
            path: args.path.clone().ok_or("file topology needs --path")?,
        },
        other => return Err(format!("unknown topology {other}")),
    })
}

/// Builds the experiment from an optional config file with flag overrides.
fn build_config(args: &RunArgs) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => serde_json::from_reader(std::fs::File::open(path)?)?,
        None => ExperimentConfig {
            topology: TopologySpec::Complete { n: 16 },
            scheme: SchemeKind::Naive { j: 1 },
            params: SchemeConfig::default(),
            trials: 1000,
            seed: 0,
            sweep: None,
            out: None,
            format: ReportFormat::Csv,
            p_tar: None,
        },
    };
    if let Some(name) = &args.scheme {
        cfg.scheme = parse_scheme(name, args.j)?;
    } else if let (SchemeKind::Naive { j }, Some(j_flag)) = (&cfg.scheme, args.j) {
        let _ = j;
        cfg.scheme = SchemeKind::Naive { j: j_flag };
    }
    if args.topology.is_some() {
        cfg.topology = parse_topology(args)?;
    } else if let Some(n) = args.n {
        cfg.topology = cfg.topology.with_n(n);
    }
    // The channel defaults to the scheme's native kind.
    let kind = match &args.channel {
        Some(k) if k == "bsc" => ChannelKind::Bsc,
        Some(k) if k == "bec" => ChannelKind::Bec,
        Some(other) => return Err(format!("unknown channel kind {other}").into()),
        None => match cfg.scheme {
            SchemeKind::Gc1Bec | SchemeKind::Gc2Bec | SchemeKind::Gc3 | SchemeKind::P2pErasure => {
                ChannelKind::Bec
            }
            _ if args.scheme.is_some() => ChannelKind::Bsc,
            _ => cfg.params.channel.kind,
        },
    };
    let epsilon = args.epsilon.unwrap_or(cfg.params.channel.epsilon);
    cfg.params.channel = match kind {
        ChannelKind::Bsc => ChannelSpec::bsc(epsilon)?,
        ChannelKind::Bec => ChannelSpec::bec(epsilon)?,
    };
    if let Some(v) = args.gamma {
        cfg.params.gamma = v;
    }
    if let Some(v) = args.rate {
        cfg.params.rate = v;
    }
    if let Some(v) = args.rho {
        cfg.params.group_density = v;
    }
    if let Some(v) = args.p_ch {
        cfg.params.p_ch = v;
    }
    if let Some(v) = args.c {
        cfg.params.er_density = v;
    }
    if let Some(v) = args.delta {
        cfg.params.delta = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if let Some(f) = &args.format {
        cfg.format = match f.as_str() {
            "csv" => ReportFormat::Csv,
            "json" => ReportFormat::Json,
            other => return Err(format!("unknown format {other}").into()),
        };
    }
    if args.p_tar.is_some() {
        cfg.p_tar = args.p_tar;
    }
    Ok(cfg)
}

fn print_summary(stats: &graphcode::harness::TrialStats) {
    println!(
        "{} on {} (N={}, {} eps={}): {} trials, {} failures",
        stats.scheme, stats.topology, stats.n, stats.channel, stats.epsilon, stats.trials,
        stats.failures
    );
    println!(
        "  Pe = {:.6e}  [Wilson 95%: {:.6e}, {:.6e}]",
        stats.pe, stats.pe_lo, stats.pe_hi
    );
    match stats.broadcasts_exact {
        Some(b) => println!("  broadcasts = {b} (exact each trial)"),
        None => println!("  broadcasts = {:.3} (mean)", stats.broadcasts_mean),
    }
    println!("  broadcasts/node = {:.4}", stats.broadcasts_per_node());
    for (phase, mean) in &stats.phase_means {
        println!("    phase {phase}: {mean:.3}");
    }
    if let Some(rate) = stats.expurgation_rate {
        println!("  codes within 2pN^2 ones budget: {:.1}%", rate * 100.0);
    }
    for b in &stats.bounds {
        println!(
            "  bound {:<24} = {:<14.6e} -> {}",
            b.report.name,
            b.report.value,
            b.verdict.as_str()
        );
    }
    println!("  wall: {:.2}s", stats.wall_secs);
}

fn simulate(args: &RunArgs) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = build_config(args)?;
    let stats = run_experiment(&cfg)?;
    print_summary(&stats);
    if let Some(path) = &cfg.out {
        emit_report(std::slice::from_ref(&stats), cfg.format, path)?;
        println!("report written to {path}");
    } else {
        print!("{}", render_report(std::slice::from_ref(&stats), cfg.format));
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut run = args.run.clone();
    if run.n.is_none() {
        run.n = args.n_list.first().copied();
    }
    let mut cfg = build_config(&run)?;
    if !args.n_list.is_empty() {
        cfg.sweep = Some(args.n_list.clone());
    }
    let rows = scaling_sweep(&cfg)?;
    println!(
        "{:>8} {:>14} {:>14} {:>14} {:>12}",
        "N", "broadcasts", "b/(N lnlnN)", "b/(N lnN)", "pe"
    );
    for row in &rows {
        println!(
            "{:>8} {:>14.2} {:>14.6} {:>14.6} {:>12.4e}",
            row.n,
            row.broadcasts(),
            row.per_n_lnln(),
            row.per_n_ln(),
            row.stats.pe
        );
    }
    let all: Vec<_> = rows.into_iter().map(|r| r.stats).collect();
    if let Some(path) = &cfg.out {
        emit_report(&all, cfg.format, path)?;
        println!("report written to {path}");
    }
    Ok(())
}

fn print_report(report: &bounds::BoundReport) {
    println!("{} = {:.9e}  (ln = {:.6})", report.name, report.value, report.ln_value);
    for (k, v) in &report.inputs {
        println!("  {k} = {v}");
    }
    for f in &report.flags {
        println!("  [{}] {}", if f.pass { "pass" } else { "FAIL" }, f.name);
    }
    if !report.applicable() {
        println!("  (hypotheses not met: the bound does not apply)");
    }
}

fn bound(args: &BoundArgs) -> Result<(), Box<dyn std::error::Error>> {
    let n = args.n;
    let eps = args.epsilon;
    let c = args.c.unwrap_or(6.0);
    let p_ch = args.p_ch.unwrap_or(0.01);
    let delta = args.delta.unwrap_or(0.01);
    let gamma = args.gamma.unwrap_or(2.0);
    let rate = args.rate.unwrap_or(0.5);
    let rho = args.rho.unwrap_or(1.0);
    let cg = args.cg.unwrap_or(2.0);
    let pe = args.pe.unwrap_or(0.01);
    let dbar = args.dbar.unwrap_or(1.0);
    match args.name.as_str() {
        "gc3_closed" => print_report(&bounds::gc3_error_upper_closed(n, c, p_ch, eps, delta)),
        "gc3_sum" => print_report(&bounds::gc3_error_upper_sum(n, c, p_ch, eps)),
        "gc1_error" => print_report(&bounds::gc1_error_upper(n, gamma, rate, eps)),
        "gc1_count" => {
            println!("gc1_count_upper = {:.6}", bounds::gc1_count_upper(n, dbar, gamma, rate));
        }
        "gc2_local" => print_report(&bounds::gc2_local_error_upper(n, rho, p_ch, eps, cg)),
        "gc2_routing" => print_report(&bounds::gc2_routing_error_upper(
            n,
            rho,
            rate,
            eps,
            args.b.unwrap_or(1),
        )),
        "gc2_counts" => {
            let (local, routing) = bounds::gc2_counts(n, rho, p_ch, eps, cg, dbar, rate);
            println!("gc2 local  <= {local:.3}");
            println!("gc2 routing <= {routing:.3}");
            println!("j_g = {}", bounds::gc2_repetitions(n, rho, p_ch, eps));
        }
        "cutset_bsc" => {
            println!("cutset_lower_bsc = {:.6}", bounds::cutset_lower_bsc(n, dbar, pe, eps));
        }
        "cutset_bec" => {
            println!("cutset_lower_bec = {:.6}", bounds::cutset_lower_bec(n, dbar, pe, eps));
        }
        "edge_lower" => {
            println!("edge_lower_bound = {:.6}", bounds::edge_lower_bound(n, pe, eps, c, p_ch));
            println!("t = {}", bounds::gc3_repetitions(n, c, p_ch, eps));
        }
        "constant_degree" => {
            let d = args.degree.ok_or("constant_degree needs --degree")?;
            println!(
                "constant_degree_lower = {:.6}",
                bounds::constant_degree_lower(n, d, delta, eps)
            );
        }
        "goyal" => {
            let beta = args.beta.unwrap_or(1.0);
            let g = bounds::goyal_identity_check(beta, n, pe, eps);
            println!("rhs = {:.6e}", g.rhs);
            println!(
                "1 - Pe < rhs: {} ({} broadcasts per node {})",
                g.holds,
                beta,
                if g.holds { "is not ruled out" } else { "cannot reach this error" }
            );
        }
        other => return Err(format!("unknown bound {other}").into()),
    }
    Ok(())
}

fn graph(args: &GraphArgs) -> Result<(), Box<dyn std::error::Error>> {
    let master = TrialRng::new(args.seed);
    let mut rng = master.stream(0, 0);
    let net = match args.gen.as_str() {
        "geometric" => {
            let n = args.n.ok_or("geometric needs --n")?;
            let r = args.r.ok_or("geometric needs --r")?;
            let mut picked = None;
            for attempt in 0..10_000 {
                let (net, connected) = graphs::gen_random_geometric(n, r, &mut rng)?;
                if connected || !args.require_connected {
                    if !connected {
                        eprintln!("note: instance is not connected (attempt {attempt})");
                    }
                    picked = Some(net);
                    break;
                }
            }
            picked.ok_or("no connected instance found; increase --r")?
        }
        "er" => graphs::gen_extended_er(
            args.n.ok_or("er needs --n")?,
            args.c.unwrap_or(6.0),
            &mut rng,
        )?,
        "complete" => graphs::gen_complete(args.n.ok_or("complete needs --n")?),
        "grid" => graphs::gen_grid(args.side.ok_or("grid needs --side")?, args.r.unwrap_or(1.0))?,
        "star" => graphs::gen_star(
            args.tails.unwrap_or(3),
            args.tail_len.unwrap_or(1),
            args.clique.unwrap_or(0),
            parse_star_kind(args.star_kind.as_deref().unwrap_or("light"))?,
        ),
        other => return Err(format!("unknown generator {other}").into()),
    };
    let mut file = std::fs::File::create(&args.out)?;
    net.write_edge_list(&mut file)?;
    println!(
        "{} written: {} nodes, {} directed edges, sink {}",
        args.out,
        net.total_nodes(),
        net.edge_count(),
        net.sink()
    );
    Ok(())
}
