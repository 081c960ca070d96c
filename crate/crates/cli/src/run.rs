//! Running experiments and writing their reports.

use std::path::Path;
use std::thread;

use anyhow::{anyhow, ensure, Context, Result};
use clap::ValueEnum;

use qfly_core::config::ExperimentConfig;
use qfly_core::report::{
    concurrency_csv, render_table, slowdown_report, summary_csv, summary_row, RunSummary, SlowdownRow,
    SUMMARY_CSV_COLUMNS,
};
use qfly_core::scheduler::{
    lattice_baseline, monolithic_baseline, schedule as schedule_qfly, validate_lattice_schedule, validate_schedule,
};
use qfly_core::switch_loss::SwitchTechnology;

use crate::write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    TGs,
    X2x2,
    FiberLengthKm,
    Q,
    QftN,
    MaxExtraHops,
    UsableBsas,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::TGs => "t_gs",
            SweepParam::X2x2 => "x_2x2",
            SweepParam::FiberLengthKm => "fiber_length_km",
            SweepParam::Q => "q",
            SweepParam::QftN => "qft_n",
            SweepParam::MaxExtraHops => "max_extra_hops",
            SweepParam::UsableBsas => "usable_bsas",
        }
    }

    fn apply(self, config: &mut ExperimentConfig, value: f64) -> Result<()> {
        let count = || -> Result<usize> {
            ensure!(
                value >= 0.0 && value.fract() == 0.0 && value < usize::MAX as f64,
                "{} takes whole numbers, got {value}",
                self.name()
            );
            Ok(value as usize)
        };
        match self {
            SweepParam::TGs => config.t_gs = Some(value),
            SweepParam::X2x2 => config.switch = SwitchTechnology::Benes { x_2x2: value },
            SweepParam::FiberLengthKm => config.fiber_length_km = value,
            SweepParam::Q => config.q = count()?,
            SweepParam::QftN => config.qft_n = Some(count()?),
            SweepParam::MaxExtraHops => config.max_extra_hops = count()?,
            SweepParam::UsableBsas => config.usable_bsas = Some(count()?),
        }
        Ok(())
    }
}

pub struct RunOptions {
    pub qft_n: Option<usize>,
    pub lattice: bool,
    pub monolithic_only: bool,
    pub traces: bool,
    pub sweep: Option<(SweepParam, Vec<f64>)>,
}

/// Everything one experiment contributes to the reports.
struct Outcome {
    rows: Vec<SlowdownRow>,
    notes: Vec<String>,
    traces: Vec<(String, String)>,
}

pub fn schedule(configs: &[ExperimentConfig], options: &RunOptions, out: &Path) -> Result<()> {
    let outcomes = run_all(configs, options)?;
    let rows: Vec<SlowdownRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let notes: Vec<String> = outcomes.iter().flat_map(|o| o.notes.iter().cloned()).collect();
    print!("{}", render_table(&rows));
    write(out, "summary.csv", &summary_csv(&rows, &notes))?;
    write(out, "concurrency.csv", &concurrency_csv(&rows))?;
    for (name, trace) in outcomes.iter().flat_map(|o| &o.traces) {
        write(out, name, trace)?;
    }
    Ok(())
}

pub fn sweep(configs: &[ExperimentConfig], options: &RunOptions, out: &Path) -> Result<()> {
    let (param, values) = options
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("sweep needs a parameter"))?;
    let mut csv = format!("# qfly-sweep v1\nparam,value,{SUMMARY_CSV_COLUMNS}\n");
    for &value in values {
        let mut varied = configs.to_vec();
        for c in &mut varied {
            param.apply(c, value)?;
        }
        let quiet = RunOptions {
            traces: false,
            sweep: None,
            ..*options
        };
        let outcomes = run_all(&varied, &quiet).with_context(|| format!("{} = {value}", param.name()))?;
        let rows: Vec<SlowdownRow> = outcomes.into_iter().flat_map(|o| o.rows).collect();
        println!("{} = {value}", param.name());
        print!("{}", render_table(&rows));
        for r in &rows {
            csv.push_str(&format!("{},{value},{}\n", param.name(), summary_row(r)));
        }
    }
    write(out, "sweep.csv", &csv)
}

/// Runs every configuration on its own thread; results keep input order.
fn run_all(configs: &[ExperimentConfig], options: &RunOptions) -> Result<Vec<Outcome>> {
    thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(move || run_one(c, options).with_context(|| format!("experiment {}", c.name))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("an experiment thread panicked"))?)
            .collect()
    })
}

fn run_one(config: &ExperimentConfig, options: &RunOptions) -> Result<Outcome> {
    let name = &config.name;
    ensure!(
        !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
        "experiment name {name:?} must use only letters, digits, '-', '_' and '.'"
    );
    let mut config = config.clone();
    if let Some(n) = options.qft_n {
        config.qft_n = Some(n);
    }
    let resolved = config.resolve()?;
    let circuit = resolved.circuit();
    let cfg = resolved.schedule_config();
    let topology = &resolved.topology;

    let baseline = RunSummary::monolithic(
        &format!("{name}/monolithic"),
        &circuit.fingerprint(),
        monolithic_baseline(&circuit, &cfg.timing),
    );
    let mut notes = vec![format!(
        "{name}: {} g={} p={} q={} qft_n={} t_gs={} s t_slot={} s",
        config.variant,
        topology.groups(),
        topology.nodes_per_group(),
        config.q,
        resolved.qubits(),
        resolved.t_gs,
        cfg.timing.slot_seconds()
    )];
    if options.monolithic_only {
        let rows = slowdown_report(&baseline, std::slice::from_ref(&baseline))?;
        return Ok(Outcome {
            rows,
            notes,
            traces: Vec::new(),
        });
    }

    let placement = resolved.placement()?;
    let s = schedule_qfly(&circuit, &placement, topology, &cfg)?;
    validate_schedule(&s, &circuit, &placement, topology, &cfg).context("produced schedule failed validation")?;
    if let Some(routing) = s.routing {
        notes.push(format!(
            "{name}: routing usable_bsas={} max_extra_hops={}",
            routing.usable_bsas.map_or("all".to_string(), |b| b.to_string()),
            routing.max_extra_hops
        ));
    }
    let mut runs = vec![
        baseline.clone(),
        RunSummary::qfly(name, &s, topology, config.q, &cfg.loss)?,
    ];
    let mut traces = Vec::new();
    if options.traces {
        traces.push((format!("{name}.circuit.txt"), circuit.to_text()));
        traces.push((format!("{name}.trace.jsonl"), s.to_trace_jsonl()));
    }

    if options.lattice || config.lattice {
        let lattice_cfg = resolved.lattice_config();
        let lattice_placement = resolved.lattice_placement()?;
        let l = lattice_baseline(&circuit, &lattice_placement, &lattice_cfg)?;
        validate_lattice_schedule(&l, &circuit, &lattice_placement, &lattice_cfg)
            .context("lattice schedule failed validation")?;
        notes.push(format!(
            "{name}/lattice: {}x{} grid, {} dB per link",
            lattice_cfg.grid.rows, lattice_cfg.grid.cols, lattice_cfg.link_loss_db
        ));
        runs.push(RunSummary::lattice(
            &format!("{name}/lattice"),
            &l,
            topology.node_count(),
            config.q,
            lattice_cfg.link_loss_db,
        ));
        if options.traces {
            traces.push((format!("{name}.lattice.trace.jsonl"), l.to_trace_jsonl()));
        }
    }
    let rows = slowdown_report(&baseline, &runs)?;
    Ok(Outcome { rows, notes, traces })
}
