use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backhaul::experiment::{
    build_instance, build_model, cluster_compare, run_sweep, solve_instance, write_sweep_csv,
    ExperimentConfig, ExperimentError, Formulation, NetworkKind, SolveSettings, SweepAxis,
};
use backhaul::interference::build_neighborhoods_with;
use backhaul::lp::export_mps;
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "backhaul", version, about = "Joint routing and scheduling for mmWave mesh backhaul")]
struct Cli {
    /// TOML configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_formulation)]
    formulation: Option<Formulation>,
    /// Time slots of the scalable models.
    #[arg(long, global = true)]
    slots: Option<usize>,
    /// Relative optimality gap at which branch and bound stops.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the model as MPS with a JSON variable map.
    #[arg(long, global = true)]
    export_mps: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured network and write it as JSON.
    Generate,
    /// Solve one instance and write the schedule and throughput reports.
    Solve {
        /// Network file to use instead of the configured source.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Sweep slot count, SNR or uplink weight and write one CSV row per point.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Compare the whole network against independently solved gateway clusters.
    ClusterCompare {
        #[arg(long, default_value_t = 2)]
        parts: usize,
    },
    /// Print the interference neighborhoods of every link.
    Neighborhoods,
}

fn parse_formulation(s: &str) -> Result<Formulation, String> {
    s.parse().map_err(|e: ExperimentError| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: ExperimentError| e.to_string())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(f) = cli.formulation {
        cfg.model.formulation = f;
    }
    if let Some(t) = cli.slots {
        cfg.model.slots = t;
    }
    if let Some(g) = cli.gap {
        cfg.solver.gap = g;
    }
    if let Some(n) = cli.threads {
        cfg.solver.threads = n;
    }
    cfg.output.export_mps |= cli.export_mps;
    match &cli.command {
        Command::Solve { network: Some(path) } => {
            cfg.network.kind = NetworkKind::File;
            cfg.network.path = Some(path.clone());
        }
        Command::Sweep { axis, values } => {
            if let Some(a) = axis {
                cfg.sweep.axis = *a;
            }
            if values.is_some() {
                cfg.sweep.values = values.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, ExperimentError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    seed: u64,
    formulation: Formulation,
    slots: usize,
    nodes: usize,
    links: usize,
    objective: f64,
    relative: f64,
    max_min: f64,
    best_bound: f64,
    gap: f64,
    status: String,
    search_nodes: usize,
    wall_time_s: f64,
    config: &'a ExperimentConfig,
}

fn cmd_generate(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let inst = build_instance(cfg)?;
    let path = cfg.output.dir.join("network.json");
    inst.net.save(&path)?;
    println!(
        "nodes {} links {} gateways {} -> {}",
        inst.net.num_nodes(),
        inst.net.num_links(),
        inst.net.gateways().len(),
        path.display()
    );
    Ok(())
}

fn cmd_solve(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let inst = build_instance(cfg)?;
    let s = SolveSettings::from_config(cfg);
    let dir = &cfg.output.dir;
    if cfg.output.export_mps {
        let built = build_model(&inst.net, &inst.matrix, &s)?;
        fs::write(dir.join("model.mps"), export_mps(&built.model))?;
        write_json(dir, "model_map.json", &built.map)?;
    }
    let o = solve_instance(&inst.net, &inst.matrix, &s)?;
    write_json(dir, "schedule.json", &o.schedule)?;
    o.report.write_node_csv(&inst.net, create(dir, "nodes.csv")?)?;
    o.report.write_link_csv(&inst.net, create(dir, "links.csv")?)?;
    write_json(
        dir,
        "run.json",
        &RunMetadata {
            seed: cfg.seed,
            formulation: o.formulation,
            slots: o.slots,
            nodes: inst.net.num_nodes(),
            links: inst.net.num_links(),
            objective: o.objective,
            relative: o.relative(),
            max_min: o.report.max_min,
            best_bound: o.best_bound,
            gap: o.gap,
            status: format!("{:?}", o.status),
            search_nodes: o.nodes,
            wall_time_s: o.wall_time,
            config: cfg,
        },
    )?;
    println!(
        "{} T={}: d = {:.6} ({:.2}% of nominal), exact max-min {:.6}, gap {:.3}%, {:?}, {:.1} s",
        o.formulation,
        o.slots,
        o.objective,
        100.0 * o.relative(),
        o.report.max_min,
        100.0 * o.gap,
        o.status,
        o.wall_time
    );
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let inst = build_instance(cfg)?;
    let axis = cfg.sweep.axis;
    let values = cfg.sweep.values.clone().unwrap_or_else(|| axis.default_values());
    let rows = run_sweep(&inst, cfg, axis, &values);
    let name = format!("sweep_{}.csv", axis.name());
    write_sweep_csv(&rows, create(&cfg.output.dir, &name)?)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} points, {failed} failed -> {}", rows.len(), cfg.output.dir.join(name).display());
    Ok(())
}

fn cmd_cluster_compare(cfg: &ExperimentConfig, parts: usize) -> Result<(), ExperimentError> {
    let inst = build_instance(cfg)?;
    let c = cluster_compare(&inst.net, &inst.matrix, &SolveSettings::from_config(cfg), parts)?;
    let mut w = csv::Writer::from_writer(create(&cfg.output.dir, "clusters.csv")?);
    let io = |e: csv::Error| ExperimentError::Io(std::io::Error::other(e));
    w.write_record(["part", "nodes", "max_min", "relative"]).map_err(io)?;
    let rel = |v: f64| format!("{:.9}", v / c.nominal);
    w.write_record([
        "whole".to_string(),
        inst.net.num_nodes().to_string(),
        format!("{:.9}", c.whole),
        rel(c.whole),
    ])
    .map_err(io)?;
    for (i, (&v, &n)) in c.clusters.iter().zip(&c.sizes).enumerate() {
        w.write_record([i.to_string(), n.to_string(), format!("{v:.9}"), rel(v)]).map_err(io)?;
    }
    w.flush()?;
    println!(
        "whole {:.2}% of nominal, worst cluster {:.2}%",
        100.0 * c.whole / c.nominal,
        100.0 * c.min_cluster() / c.nominal
    );
    Ok(())
}

fn cmd_neighborhoods(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let inst = build_instance(cfg)?;
    let nb = build_neighborhoods_with(&inst.matrix, cfg.model.threshold_db, cfg.model.neighborhood_cap);
    print!("{}", nb.describe());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.solver.threads)
        .build_global()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    if !matches!(cli.command, Command::Neighborhoods) {
        fs::create_dir_all(&cfg.output.dir)?;
    }
    match &cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Solve { .. } => cmd_solve(&cfg),
        Command::Sweep { .. } => cmd_sweep(&cfg),
        Command::ClusterCompare { parts } => cmd_cluster_compare(&cfg, *parts),
        Command::Neighborhoods => cmd_neighborhoods(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
