use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndniot::experiments::{
    load_preset, preset_names, run_to_csv, verify_presets, Scenario, Stack, TopologySource, DEFAULT_RUNS,
};
use ndniot::sim;
use ndniot::strategy::Routing;

/// Simulate NDN forwarding strategies on lossy low-power radio topologies.
#[derive(Parser)]
#[command(name = "ndniot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario over a seed sweep and print CSV.
    Run(RunArgs),
    /// List bundled presets, or run the named ones.
    Presets(PresetArgs),
    /// Check the bundled presets against the expected behavior.
    Verify {
        /// Comma-separated groups: formulas, lines, fig4, fig5, fig6, invariants, wire.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// sample10, sample20, grid:RxC[:p], line:N[:p] or a topology file.
    #[arg(long, conflicts_with_all = ["grid", "line"])]
    topology: Option<String>,
    /// Generated grid, e.g. 4x4.
    #[arg(long, conflicts_with = "line")]
    grid: Option<String>,
    /// Generated line of N nodes.
    #[arg(long)]
    line: Option<usize>,
    /// Per-link loss probability for generated topologies.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value = "ndn")]
    stack: String,
    #[arg(long, default_value = "ronr")]
    routing: String,
    #[arg(long)]
    cfa: bool,
    #[arg(long)]
    onpc: bool,
    /// Content store capacity in chunks.
    #[arg(long, default_value_t = 0)]
    cache: usize,
    #[arg(long, value_delimiter = ',')]
    consumers: Vec<String>,
    #[arg(long)]
    producer: Option<String>,
    #[arg(long, default_value_t = 10)]
    chunks: usize,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Start all consumers at once.
    #[arg(long)]
    together: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the event trace of the first seed (ndn stack only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset names or preset files; none lists the bundled presets.
    names: Vec<String>,
    /// Override the number of seeds.
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn topology_spec(args: &RunArgs) -> Result<String> {
    let p = 1.0 - args.loss;
    if !(0.0..1.0).contains(&args.loss) {
        bail!("--loss must be in [0, 1)");
    }
    Ok(match (&args.topology, &args.grid, args.line) {
        (Some(t), _, _) => t.clone(),
        (None, Some(g), _) => format!("grid:{g}:{p}"),
        (None, None, Some(n)) => format!("line:{n}:{p}"),
        (None, None, None) => bail!("one of --topology, --grid or --line is required"),
    })
}

/// Default endpoints: opposite corners or ends of generated topologies.
fn default_endpoints(source: &TopologySource) -> Option<(String, String)> {
    match source {
        TopologySource::Line { n, .. } => Some((format!("n{}", n - 1), "n0".into())),
        TopologySource::Grid { rows, cols, .. } => Some((format!("r{}c{}", rows - 1, cols - 1), "r0c0".into())),
        TopologySource::Sample(s) if s == "sample10" => Some(("t9-155".into(), "t9-k38".into())),
        TopologySource::Sample(_) => Some(("t9-k36a".into(), "t9-149".into())),
        TopologySource::File(_) => None,
    }
}

fn build_scenario(args: &RunArgs) -> Result<Scenario> {
    let topology = topology_spec(args)?;
    let source: TopologySource = topology.parse()?;
    let defaults = default_endpoints(&source);
    let producer = match (&args.producer, &defaults) {
        (Some(p), _) => p.clone(),
        (None, Some((p, _))) => p.clone(),
        (None, None) => bail!("--producer is required for topology files"),
    };
    let consumers = match (args.consumers.is_empty(), &defaults) {
        (false, _) => args.consumers.clone(),
        (true, Some((_, c))) => vec![c.clone()],
        (true, None) => bail!("--consumers is required for topology files"),
    };
    let consumer_refs: Vec<&str> = consumers.iter().map(String::as_str).collect();
    let mut s = Scenario::new("run", &topology, &producer, &consumer_refs);
    s.stack = args.stack.parse::<Stack>()?;
    s.routing = args.routing.parse::<Routing>()?;
    s.cfa = args.cfa;
    s.onpc = args.onpc;
    s.cache_chunks = args.cache;
    s.chunks = args.chunks;
    s.runs = args.runs;
    s.seed = args.seed;
    s.together = args.together;
    s.strategy().validate()?;
    Ok(s)
}

fn emit(csv: &str, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let scenario = build_scenario(args)?;
    let (csv, _) = run_to_csv(std::slice::from_ref(&scenario))?;
    if let Some(path) = &args.trace {
        if scenario.stack != Stack::Ndn {
            bail!("--trace is only available for the ndn stack");
        }
        let resolved = scenario.resolve()?;
        let outcome = sim::run_with(&resolved.fetch, &resolved.topology, scenario.seed, true)?;
        let trace = outcome.trace.expect("tracing was requested");
        fs::write(path, trace.to_tsv()).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&csv, args.csv.as_ref())
}

fn cmd_presets(args: &PresetArgs) -> Result<()> {
    if args.names.is_empty() {
        for name in preset_names() {
            let preset = load_preset(name)?;
            println!("{name:<10} {:>2} scenarios  {}", preset.scenarios.len(), preset.description);
        }
        return Ok(());
    }
    let mut scenarios = Vec::new();
    for name in &args.names {
        let mut preset = load_preset(name)?;
        if let Some(runs) = args.runs {
            preset.scenarios.iter_mut().for_each(|s| s.runs = runs);
        }
        scenarios.extend(preset.scenarios);
    }
    let (csv, _) = run_to_csv(&scenarios)?;
    emit(&csv, args.csv.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Presets(args) => cmd_presets(args),
        Command::Verify { only } => match verify_presets(only) {
            Ok(report) => {
                print!("{}", report.to_table());
                if report.passed() {
                    return ExitCode::SUCCESS;
                }
                eprintln!("some criteria failed");
                return ExitCode::from(1);
            }
            Err(e) => Err(e.into()),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
