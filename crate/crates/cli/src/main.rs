//! `qfly`: build Q-Fly interconnects, inspect their loss budgets and
//! schedule QFT workloads on them.

mod run;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qfly_core::config::{parse_experiment_list, select_presets, ExperimentConfig};
use qfly_core::switch_loss::{min_crossings, PathKind, SwitchTechnology};
use qfly_core::{build_topology, max_topology_for_radix, Variant};

use run::{RunOptions, SweepParam};

/// Radices of the default scaling table.
const TABLE_RADICES: [usize; 9] = [6, 8, 12, 16, 24, 64, 128, 576, 1100];

#[derive(Parser)]
#[command(name = "qfly", version, about = "Q-Fly topologies, loss budgets and QFT schedules")]
struct Cli {
    /// Directory for written files.
    #[arg(long, global = true, env = "QFLY_OUT_DIR", default_value = "qfly-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a topology summary and export its edge list.
    Topology(TopologyArgs),
    /// Print loss budgets per path type.
    Loss(LossArgs),
    /// Schedule QFT on each experiment and report slowdowns.
    Schedule(ScheduleArgs),
    /// Re-run experiments while varying one parameter.
    Sweep(SweepArgs),
}

/// Where experiment configurations come from. Without `--config` or
/// `--experiments`, one configuration is built from the shape flags.
#[derive(Args, Clone)]
struct Selection {
    /// Experiment TOML file; may repeat.
    #[arg(long = "config", value_name = "FILE")]
    configs: Vec<PathBuf>,

    /// Bundled presets, e.g. `1..6`, `2,5` or `all`.
    #[arg(long)]
    experiments: Option<String>,

    #[command(flatten)]
    shape: ShapeArgs,

    /// Reconfiguration time in seconds; overrides every selected config.
    #[arg(long)]
    t_gs: Option<f64>,

    /// Beneš 2x2 element loss in dB; overrides every selected config.
    #[arg(long, value_name = "DB")]
    x_2x2: Option<f64>,
}

#[derive(Args, Clone)]
struct ShapeArgs {
    #[arg(long)]
    variant: Option<Variant>,
    /// Switch radix k.
    #[arg(long)]
    radix: Option<usize>,
    /// Build the largest system for `--radix`.
    #[arg(long)]
    maximize: bool,
    /// Group count.
    #[arg(short)]
    g: Option<usize>,
    /// Nodes per group.
    #[arg(short)]
    p: Option<usize>,
}

#[derive(Args)]
struct TopologyArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Print every variant's largest system for these radices instead.
    #[arg(long, num_args = 0.., value_delimiter = ',', value_name = "K")]
    table: Option<Vec<usize>>,
}

#[derive(Args)]
struct LossArgs {
    #[command(flatten)]
    selection: Selection,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    selection: Selection,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct RunFlags {
    /// QFT width; overrides every selected config.
    #[arg(long)]
    qft_n: Option<usize>,
    /// Also run the 2D lattice baseline.
    #[arg(long)]
    lattice: bool,
    /// Report only the single-node baseline.
    #[arg(long)]
    monolithic_only: bool,
    /// Skip trace files.
    #[arg(long)]
    no_trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    selection: Selection,
    #[command(flatten)]
    run: RunFlags,
    /// Parameter to vary.
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Topology(args) => topology(&args, &cli.out),
        Command::Loss(args) => loss(&args, &cli.out),
        Command::Schedule(args) => {
            let configs = load(&args.selection)?;
            let options = run_options(&args.run, None);
            run::schedule(&configs, &options, &cli.out)
        }
        Command::Sweep(args) => {
            let configs = load(&args.selection)?;
            let options = run_options(&args.run, Some((args.param, args.values.clone())));
            run::sweep(&configs, &options, &cli.out)
        }
    }
}

fn run_options(flags: &RunFlags, sweep: Option<(SweepParam, Vec<f64>)>) -> RunOptions {
    RunOptions {
        qft_n: flags.qft_n,
        lattice: flags.lattice,
        monolithic_only: flags.monolithic_only,
        traces: !flags.no_trace,
        sweep,
    }
}

fn topology(args: &TopologyArgs, out: &Path) -> Result<()> {
    if let Some(radices) = &args.table {
        let radices = if radices.is_empty() {
            TABLE_RADICES.to_vec()
        } else {
            radices.clone()
        };
        println!("variant, k, N, g, p, b, d");
        for variant in Variant::ALL {
            for &k in &radices {
                let row = max_topology_for_radix(variant, k).with_context(|| format!("{variant} at k={k}"))?;
                println!("{variant}, {row}");
            }
        }
        return Ok(());
    }
    let config = shape_config(&args.shape)?;
    let (g, p) = config.shape()?;
    let topology = build_topology(config.variant, g, p)?;
    topology.validate()?;
    println!("variant, k, N, g, p, b, d");
    println!("{}, {}", config.variant, topology.summary());
    let stem = format!("topology-{}-g{g}-p{p}", config.variant);
    write(out, &format!("{stem}.edges.csv"), &topology.to_edge_csv())?;
    write(out, &format!("{stem}.json"), &topology.to_json())?;
    Ok(())
}

fn loss(args: &LossArgs, out: &Path) -> Result<()> {
    let configs = load(&args.selection)?;
    let mut csv = String::from(
        "# qfly-loss v1\nexperiment,variant,k,path,switch_crossings,bsa_dB,fiber_dB,switch_dB,total_dB,overhead_factor\n",
    );
    println!(
        "{:<12} {:<6} {:>5} {:<12} {:>9} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "experiment", "variant", "k", "path", "crossings", "bsa dB", "fiber", "switch", "total", "overhead"
    );
    for config in &configs {
        let (g, p) = config.shape()?;
        let topology = build_topology(config.variant, g, p)?;
        let params = config.loss_params();
        params.validate()?;
        for kind in [PathKind::IntraGroup, PathKind::InterGroup] {
            let crossings = min_crossings(config.variant, kind);
            let b = params.budget(crossings, topology.radix())?;
            println!(
                "{:<12} {:<6} {:>5} {:<12} {:>9} {:>8.2} {:>8.2} {:>8.2} {:>8.1} {:>9.3}",
                config.name,
                config.variant,
                topology.radix(),
                kind.as_str(),
                crossings,
                b.bsa_probability_term,
                b.fiber_term,
                b.switch_term,
                b.total,
                b.overhead_factor()
            );
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                config.name,
                config.variant,
                topology.radix(),
                kind.as_str(),
                crossings,
                b.bsa_probability_term,
                b.fiber_term,
                b.switch_term,
                b.total,
                b.overhead_factor()
            ));
        }
    }
    write(out, "loss.csv", &csv)
}

/// Configurations named by `--config` and `--experiments`, or one built from
/// the shape flags, with command-line overrides applied.
fn load(selection: &Selection) -> Result<Vec<ExperimentConfig>> {
    let mut configs = Vec::new();
    for path in &selection.configs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        configs.push(config);
    }
    if let Some(list) = &selection.experiments {
        configs.extend(select_presets(&parse_experiment_list(list)?)?);
    }
    if configs.is_empty() {
        configs.push(shape_config(&selection.shape)?);
    }
    for c in &mut configs {
        if let Some(t_gs) = selection.t_gs {
            c.t_gs = Some(t_gs);
        }
        if let Some(x_2x2) = selection.x_2x2 {
            c.switch = SwitchTechnology::Benes { x_2x2 };
        }
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!(
            "two selected experiments are both named {:?}; output files would collide",
            w[0]
        );
    }
    Ok(configs)
}

fn shape_config(shape: &ShapeArgs) -> Result<ExperimentConfig> {
    let Some(variant) = shape.variant else {
        bail!("no configuration given: pass --config FILE, --experiments LIST, or --variant with a shape");
    };
    let mut c = ExperimentConfig::new(&format!("{variant}"), variant);
    c.g = shape.g;
    c.p = shape.p;
    c.radix = shape.radix;
    c.maximize = shape.maximize;
    c.shape()?;
    Ok(c)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
