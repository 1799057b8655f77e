//! Command-line front end: one subcommand per pipeline stage.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use brainnoc::community::{classify_hubs, detect_communities};
use brainnoc::grid::{all_pairs_min_hop, build_mesh, build_torus, metrics};
use brainnoc::io;
use brainnoc::mapping::{core_comm_graph, map_tasks, planted_task_graph, MappingCostParams};
use brainnoc::powermodel::basic_power;
use brainnoc::routing::{
    lagrangian_route, turn_prohibition, validate_solution, RouteTable, RoutingParams, RoutingProblem,
};
use brainnoc::simulator::{run, traffic_from_flows, Pattern, SimConfig, SimReport, TrafficSpec};
use brainnoc::topogen::{grow_detailed, preferential_attachment, sweep, GrowthParams, SweepConfig};
use brainnoc::Topology;

use config::Config;

#[derive(Parser, Debug)]
#[command(
    name = "brainnoc",
    version,
    about = "Brain-network-inspired NoC synthesis and evaluation"
)]
struct Cli {
    /// `section.key = value` file overriding built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for annealing, permutations and injection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Grow a topology (or build a baseline) and write it.
    Generate(GenerateArgs),
    /// Evaluate a (gamma, beta) grid and keep the best topology.
    Sweep(SweepArgs),
    /// Partition a topology into size-capped communities and pick hubs.
    Communities(CommunitiesArgs),
    /// Place a task graph onto a partitioned topology.
    Map(MapArgs),
    /// Route the placed flows with deadlock-free paths.
    Route(RouteArgs),
    /// Run the flit-level simulator.
    Simulate(SimulateArgs),
    /// Print avg hop, link count, wire length, comm cost and basic power.
    Metrics(MetricsArgs),
    /// Convert a `u v [w]` edge list into a task graph.
    IngestSnap(IngestArgs),
    /// Write a clustered synthetic task graph.
    SynthTasks(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Bnit,
    Mesh,
    Torus,
    Ba,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "bnit")]
    kind: Kind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l_a: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l_a: Option<usize>,
    /// CSV of every grid point.
    #[arg(short, long)]
    out: PathBuf,
    /// Selected topology.
    #[arg(long)]
    topology_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CommunitiesArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    hubs_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RouteArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Per-flow injection table derived from the routed demands.
    #[arg(long)]
    traffic_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Explicit routes; other pairs use minimum-hop permitted-turn routes.
    #[arg(long)]
    routes: Option<PathBuf>,
    /// Per-flow traffic table; otherwise `--pattern` and `--rate`.
    #[arg(long, conflicts_with_all = ["pattern", "rate"])]
    traffic: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    /// Structured text report.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// One CSV header plus one row.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long, conflicts_with_all = ["mesh", "torus"])]
    topology: Option<PathBuf>,
    /// Built-in `t x t` mesh.
    #[arg(long, conflicts_with = "torus")]
    mesh: Option<usize>,
    /// Built-in `t x t` torus.
    #[arg(long)]
    torus: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    tasks: usize,
    #[arg(long)]
    clusters: usize,
    /// Flows per task inside its cluster.
    #[arg(long, default_value_t = 1)]
    intra: usize,
    /// Flows per task to random tasks.
    #[arg(long, default_value_t = 1)]
    inter: usize,
    #[arg(long, default_value_t = 2.0)]
    min_demand: f64,
    #[arg(long, default_value_t = 300.0)]
    max_demand: f64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_topology(path: &Path) -> Result<Topology> {
    io::read_topology(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => Config::parse(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Config::default(),
    };
    let seed = cfg.value(cli.seed, "seed", 1u64)?;
    match cli.cmd {
        Cmd::Generate(a) => generate(&cfg, a, seed),
        Cmd::Sweep(a) => cmd_sweep(&cfg, a),
        Cmd::Communities(a) => communities(&cfg, a),
        Cmd::Map(a) => map(&cfg, a, seed),
        Cmd::Route(a) => route(&cfg, a),
        Cmd::Simulate(a) => simulate(&cfg, a, seed),
        Cmd::Metrics(a) => cmd_metrics(&cfg, a),
        Cmd::IngestSnap(a) => ingest(a),
        Cmd::SynthTasks(a) => synth(a, seed),
    }
}

fn growth_params(cfg: &Config, n: Option<usize>, m: Option<usize>, l_a: Option<usize>) -> Result<GrowthParams<f64>> {
    let mut p = GrowthParams::new(
        cfg.value(n, "growth.n", 1024)?,
        cfg.value(m, "growth.m", 15)?,
        cfg.value(l_a, "growth.l_a", 15)?,
        0.7,
        1.4,
    );
    p.k = cfg.value(None, "growth.k", p.k)?;
    p.init_side = cfg.value(None, "growth.init_side", p.init_side)?;
    Ok(p)
}

fn generate(cfg: &Config, a: GenerateArgs, seed: u64) -> Result<()> {
    let mut p = growth_params(cfg, a.n, a.m, a.l_a)?;
    p.gamma = cfg.value(a.gamma, "growth.gamma", 0.7)?;
    p.beta = cfg.value(a.beta, "growth.beta", 1.4)?;
    let t = p.side()?;
    let topo = match a.kind {
        Kind::Bnit => {
            let out = grow_detailed(&p)?;
            println!(
                "grown {} nodes, {} links, m_a {}, over-length links {}",
                out.topology.node_count(),
                out.topology.link_count(),
                out.m_a,
                out.over_length_links
            );
            out.topology
        }
        Kind::Mesh => build_mesh(t)?,
        Kind::Torus => build_torus(t)?,
        Kind::Ba => preferential_attachment(t, p.k, p.init_side, seed)?,
    };
    write(&a.out, &io::write_topology(&topo))?;
    println!("wrote {} ({} links)", a.out.display(), topo.link_count());
    Ok(())
}

fn cmd_sweep(cfg: &Config, a: SweepArgs) -> Result<()> {
    let g = growth_params(cfg, a.n, a.m, a.l_a)?;
    let mut s = SweepConfig::new(
        g.n,
        g.m,
        g.l_a,
        (
            cfg.value(None, "sweep.gamma_min", 0.5)?,
            cfg.value(None, "sweep.gamma_max", 2.5)?,
        ),
        (
            cfg.value(None, "sweep.beta_min", 1.0)?,
            cfg.value(None, "sweep.beta_max", 3.0)?,
        ),
    );
    s.k = g.k;
    s.init_side = g.init_side;
    s.step = cfg.value(None, "sweep.step", s.step)?;
    s.alpha = cfg.value(None, "sweep.alpha", s.alpha)?;
    s.power_threshold = cfg.value(None, "sweep.power_threshold", s.power_threshold)?;
    s.power = cfg.power()?;
    let r = sweep(&s)?;
    write(&a.out, &r.to_csv())?;
    let b = r.best();
    println!(
        "{} points; selected gamma {} beta {} (alpha {}) avg_hop {:.4} obj {:.4}",
        r.entries.len(),
        b.gamma,
        b.beta,
        r.alpha,
        b.avg_hop,
        b.obj
    );
    if let Some(p) = a.topology_out {
        write(&p, &io::write_topology(&r.topology))?;
    }
    Ok(())
}

fn communities(cfg: &Config, a: CommunitiesArgs) -> Result<()> {
    let topo = load_topology(&a.topology)?;
    let cap = cfg.value(a.max_size, "communities.max_size", 150)?;
    let part = detect_communities::<f64>(&topo, cap);
    let hubs = classify_hubs(&topo, &part);
    write(&a.out, &io::write_partition(&part))?;
    if let Some(h) = a.hubs_out {
        write(&h, &io::write_hubs(&hubs))?;
    }
    println!(
        "{} communities, largest {}, modularity {:.4}",
        part.len(),
        part.largest(),
        part.modularity
    );
    Ok(())
}

fn map(cfg: &Config, a: MapArgs, seed: u64) -> Result<()> {
    let topo = load_topology(&a.topology)?;
    let tg = io::read_task_graph::<f64>(&read(&a.tasks)?).with_context(|| format!("parsing {}", a.tasks.display()))?;
    let cap = cfg.value(None, "communities.max_size", usize::MAX)?;
    let part = io::read_partition::<f64>(&read(&a.partition)?, &topo, cap)
        .with_context(|| format!("parsing {}", a.partition.display()))?;
    let hubs = classify_hubs(&topo, &part);
    let hops = all_pairs_min_hop(&topo)?;
    let mut p = MappingCostParams::<f64>::default();
    p.r = cfg.value(None, "map.r", p.r)?;
    p.phi = cfg.value(None, "map.phi", p.phi)?;
    p.sa.t0_factor = cfg.value(None, "map.t0_factor", p.sa.t0_factor)?;
    p.sa.cooling = cfg.value(None, "map.cooling", p.sa.cooling)?;
    p.sa.swaps_per_community = cfg.value(None, "map.swaps_per_community", p.sa.swaps_per_community)?;
    p.sa.stall_temperatures = cfg.value(None, "map.stall_temperatures", p.sa.stall_temperatures)?;
    p.sa.max_temperatures = cfg.value(None, "map.max_temperatures", p.sa.max_temperatures)?;
    p.sa.seed = seed;
    let sol = map_tasks(&topo, &hops, &tg, &part, &hubs, &p)?;
    write(&a.out, &io::write_placement(&sol.placement.core_of))?;
    println!(
        "assignment cost {:.1} -> {:.1}; placed cost {:.1}; {} core flows",
        sol.initial_cost,
        sol.refined_cost,
        sol.placement.cost,
        sol.core_flows.len()
    );
    Ok(())
}

fn route(cfg: &Config, a: RouteArgs) -> Result<()> {
    let topo = load_topology(&a.topology)?;
    let tg = io::read_task_graph::<f64>(&read(&a.tasks)?).with_context(|| format!("parsing {}", a.tasks.display()))?;
    let core_of =
        io::read_placement(&read(&a.placement)?).with_context(|| format!("parsing {}", a.placement.display()))?;
    if core_of.len() < tg.task_count() || core_of.iter().any(|&c| c >= topo.node_count()) {
        bail!("placement does not cover every task with a core of this topology");
    }
    let flows = core_comm_graph(&core_of, &tg);
    let mut rp = RoutingParams::<f64> {
        power: cfg.power()?,
        ..RoutingParams::default()
    };
    rp.hop_limit = cfg.value(None, "route.hop_limit", rp.hop_limit)?;
    rp.link_capacity = cfg.value(None, "route.link_capacity", rp.link_capacity)?;
    rp.xi = cfg.optional("route.xi")?;
    rp.max_iterations = cfg.value(None, "route.max_iterations", rp.max_iterations)?;
    rp.stall_iterations = cfg.value(None, "route.stall_iterations", rp.stall_iterations)?;
    let ts = turn_prohibition(&topo)?;
    let problem = RoutingProblem::new(&topo, flows, &rp)?;
    let sol = lagrangian_route(&problem, &ts)?;
    let check = validate_solution(&problem, &ts, &sol.paths);
    if !check.all_valid() {
        bail!("routing produced invalid paths: {}", check.issues.join("; "));
    }
    let entries: Vec<io::RouteEntry> = sol
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| io::RouteEntry {
            nodes: p.clone(),
            feasible: sol.hop_ok[i] && sol.capacity_ok[i],
        })
        .collect();
    write(&a.out, &io::write_routes(&entries))?;
    if let Some(t) = a.traffic_out {
        let packet = cfg.value(None, "sim.packet_flits", SimConfig::APPLICATION_PACKET_FLITS)?;
        let (spec, rejected) = traffic_from_flows(&problem.flows, rp.link_capacity, packet)?;
        for r in &rejected {
            eprintln!("rejected flow {}->{}: rate {}", r.flow.src, r.flow.dst, r.rate);
        }
        let TrafficSpec::Table { flows } = spec else {
            unreachable!("flow conversion yields a table")
        };
        write(&t, &io::write_traffic(&flows))?;
    }
    let hops: usize = sol.paths.iter().map(|p| p.len() - 1).sum();
    println!(
        "{} flows, success {:.2}%, avg hops {:.3}, {} iterations, prohibited turns {:.1}%",
        sol.paths.len(),
        sol.success,
        hops as f64 / sol.paths.len().max(1) as f64,
        sol.iterations,
        100.0 * ts.prohibited_fraction()
    );
    Ok(())
}

fn simulate(cfg: &Config, a: SimulateArgs, seed: u64) -> Result<()> {
    let topo = load_topology(&a.topology)?;
    let (traffic, default_flits) = match &a.traffic {
        Some(p) => (
            TrafficSpec::Table {
                flows: io::read_traffic(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            },
            SimConfig::APPLICATION_PACKET_FLITS,
        ),
        None => {
            let pattern: Pattern = cfg.value(
                a.pattern.as_deref().map(str::parse).transpose()?,
                "sim.pattern",
                Pattern::Uniform,
            )?;
            (
                TrafficSpec::Synthetic {
                    pattern,
                    rate: cfg.value(a.rate, "sim.rate", 0.002)?,
                },
                SimConfig::default().packet_flits,
            )
        }
    };
    let d = SimConfig::default();
    let sc = SimConfig {
        flit_bits: cfg.value(None, "sim.flit_bits", d.flit_bits)?,
        packet_flits: cfg.value(None, "sim.packet_flits", default_flits)?,
        vcs_per_port: cfg.value(None, "sim.vcs_per_port", d.vcs_per_port)?,
        vc_buffer_flits: cfg.value(None, "sim.vc_buffer_flits", d.vc_buffer_flits)?,
        pipeline_stages: cfg.value(None, "sim.pipeline_stages", d.pipeline_stages)?,
        warmup_cycles: cfg.value(None, "sim.warmup_cycles", d.warmup_cycles)?,
        measure_cycles: cfg.value(None, "sim.measure_cycles", d.measure_cycles)?,
        drain_cycles: cfg.value(None, "sim.drain_cycles", d.drain_cycles)?,
        seed,
    };
    let ts = turn_prohibition(&topo)?;
    let explicit = match &a.routes {
        Some(p) => io::read_routes(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let table = RouteTable::from_paths(explicit.into_iter().map(|r| r.nodes)).with_fallback(&topo, &ts);
    let report: SimReport<f64> = run(&topo, &table, &traffic, &sc, &cfg.power()?)?;
    let text = format!("{report}\n");
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.csv {
        write(p, &format!("{}\n{}\n", SimReport::<f64>::CSV_HEADER, report.csv_row()))?;
    }
    println!(
        "avg latency {:.3} cycles, avg hops {:.3}, congested {}",
        report.avg_latency, report.avg_hops, report.congested
    );
    Ok(())
}

fn cmd_metrics(cfg: &Config, a: MetricsArgs) -> Result<()> {
    let topo = match (a.topology, a.mesh, a.torus) {
        (Some(p), _, _) => load_topology(&p)?,
        (None, Some(t), _) => build_mesh(t)?,
        (None, None, Some(t)) => build_torus(t)?,
        (None, None, None) => bail!("give --topology, --mesh or --torus"),
    };
    let m = metrics::<f64>(&topo)?;
    let power = basic_power(&topo, &cfg.power()?).total;
    println!("avg_hop,links,wire_length,comm_cost,basic_power_w");
    println!(
        "{:.2},{},{:.0},{},{:.4}",
        m.avg_hop,
        m.link_count,
        m.wire_length_report_units(),
        m.rough_comm_cost,
        power
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (tg, _, s) =
        io::ingest_snap::<f64>(&read(&a.input)?).with_context(|| format!("parsing {}", a.input.display()))?;
    write(&a.out, &io::write_task_graph(&tg))?;
    println!(
        "{} tasks, {} flows ({} edges read, {} duplicates merged, {} self-loops dropped)",
        s.tasks, s.flows, s.edges_read, s.duplicates_merged, s.self_loops_dropped
    );
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let tg = planted_task_graph::<f64>(
        a.tasks,
        a.clusters,
        a.intra,
        a.inter,
        (a.min_demand, a.max_demand),
        seed,
    )?;
    write(&a.out, &io::write_task_graph(&tg))?;
    println!("{} tasks, {} flows", tg.task_count(), tg.flows().len());
    Ok(())
}
