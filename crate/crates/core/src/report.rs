//! Slowdown tables and the summary CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;
use crate::scheduler::Schedule;
use crate::switch_loss::{min_crossings, LinkLossParams, PathKind};
use crate::topology::QFlyTopology;

pub const SUMMARY_CSV_VERSION: &str = "# qfly-summary v1";
pub const SUMMARY_CSV_COLUMNS: &str = "experiment,N,k,g,q,loss_dB,rounds,makespan_slots,slowdown";

/// What a single run produced, independent of the network kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub circuit_fingerprint: String,
    pub nodes: Option<usize>,
    pub radix: Option<usize>,
    pub groups: Option<usize>,
    pub q: Option<usize>,
    /// Loss of a minimum-hop inter-group connection.
    pub loss_db: Option<f64>,
    pub rounds: usize,
    pub makespan_slots: f64,
    pub concurrency: BTreeMap<usize, usize>,
}

impl RunSummary {
    pub fn qfly(
        name: &str,
        schedule: &Schedule,
        topology: &QFlyTopology,
        q: usize,
        loss: &LinkLossParams,
    ) -> Result<Self, ScheduleError> {
        let crossings = min_crossings(topology.variant(), PathKind::InterGroup);
        Ok(RunSummary {
            name: name.to_string(),
            circuit_fingerprint: schedule.circuit_fingerprint.clone(),
            nodes: Some(topology.node_count()),
            radix: Some(topology.radix()),
            groups: Some(topology.groups()),
            q: Some(q),
            loss_db: Some(loss.budget(crossings, topology.radix())?.total),
            rounds: schedule.round_count(),
            makespan_slots: schedule.makespan_slots,
            concurrency: schedule.concurrency_histogram(),
        })
    }

    pub fn lattice<A>(name: &str, schedule: &Schedule<A>, nodes: usize, q: usize, link_loss_db: f64) -> Self {
        RunSummary {
            name: name.to_string(),
            circuit_fingerprint: schedule.circuit_fingerprint.clone(),
            nodes: Some(nodes),
            radix: None,
            groups: None,
            q: Some(q),
            loss_db: Some(link_loss_db),
            rounds: schedule.round_count(),
            makespan_slots: schedule.makespan_slots,
            concurrency: schedule.concurrency_histogram(),
        }
    }

    pub fn monolithic(name: &str, circuit_fingerprint: &str, makespan_slots: f64) -> Self {
        RunSummary {
            name: name.to_string(),
            circuit_fingerprint: circuit_fingerprint.to_string(),
            nodes: Some(1),
            radix: None,
            groups: None,
            q: None,
            loss_db: None,
            rounds: 0,
            makespan_slots,
            concurrency: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownRow {
    pub run: RunSummary,
    pub baseline_slots: f64,
    pub slowdown: f64,
}

/// Makespan of every run relative to the monolithic `baseline`.
pub fn slowdown_report(baseline: &RunSummary, runs: &[RunSummary]) -> Result<Vec<SlowdownRow>, ScheduleError> {
    runs.iter()
        .map(|run| {
            if run.circuit_fingerprint != baseline.circuit_fingerprint {
                return Err(ScheduleError::MismatchedCircuits(
                    baseline.circuit_fingerprint.clone(),
                    run.circuit_fingerprint.clone(),
                ));
            }
            Ok(SlowdownRow {
                run: run.clone(),
                baseline_slots: baseline.makespan_slots,
                slowdown: run.makespan_slots / baseline.makespan_slots,
            })
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Summary CSV at full precision. `notes` become extra `#` lines after the
/// version line.
pub fn summary_csv(rows: &[SlowdownRow], notes: &[String]) -> String {
    let mut out = format!("{SUMMARY_CSV_VERSION}\n");
    for note in notes {
        let _ = writeln!(out, "# {note}");
    }
    let _ = writeln!(out, "{SUMMARY_CSV_COLUMNS}");
    for r in rows {
        let _ = writeln!(out, "{}", summary_row(r));
    }
    out
}

/// One data line of the summary CSV, without the newline.
pub fn summary_row(r: &SlowdownRow) -> String {
    let run = &r.run;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        run.name,
        opt(run.nodes),
        opt(run.radix),
        opt(run.groups),
        opt(run.q),
        opt(run.loss_db),
        run.rounds,
        run.makespan_slots,
        r.slowdown
    )
}

/// Aligned human-readable table; losses and slowdowns to one decimal.
pub fn render_table(rows: &[SlowdownRow]) -> String {
    let header = [
        "experiment",
        "N",
        "k",
        "g",
        "q",
        "loss dB",
        "rounds",
        "max conc",
        "makespan",
        "slowdown",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let run = &r.run;
        cells.push(vec![
            run.name.clone(),
            opt(run.nodes),
            opt(run.radix),
            opt(run.groups),
            opt(run.q),
            run.loss_db.map(|l| format!("{l:.1}")).unwrap_or_default(),
            run.rounds.to_string(),
            run.concurrency.keys().max().copied().unwrap_or(0).to_string(),
            format!("{:.1}", run.makespan_slots),
            format!("{:.1}", r.slowdown),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, &w))| {
                if i == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Concurrency histograms as `name,active,rounds` lines.
pub fn concurrency_csv(rows: &[SlowdownRow]) -> String {
    let mut out = String::from("# qfly-concurrency v1\nexperiment,active_connections,rounds\n");
    for r in rows {
        for (active, count) in &r.run.concurrency {
            let _ = writeln!(out, "{},{active},{count}", r.run.name);
        }
    }
    out
}
