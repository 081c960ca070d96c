#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qfly_core::build_topology;
use qfly_core::linkmodel::DEFAULT_T_ATTEMPT;
use qfly_core::routing::RoutingOptions;
use qfly_core::switch_loss::LinkLossParams;
use qfly_core::workload::qft_circuit;
use qfly_core::Variant;

fn qfly(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfly"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("QFLY_OUT_DIR")
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV file, `#` lines and header dropped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn topology_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = qfly(
        dir.path(),
        &["topology", "--variant", "sphd", "--radix", "8", "--maximize"],
    );
    assert!(stdout(&o).contains("8, 36, 9, 4, 2, 72"));
    let o = qfly(
        dir.path(),
        &["topology", "--variant", "dpfd", "--radix", "24", "--maximize"],
    );
    assert!(stdout(&o).contains("24, 156, 13, 12, 12, 624"));
    let o = qfly(dir.path(), &["topology", "--variant", "dphd", "-g", "3", "-p", "2"]);
    assert!(stdout(&o).contains("dphd, 4, 6, 3, 2, 1, 12"));
    assert!(dir.path().join("topology-dphd-g3-p2.edges.csv").exists());
    assert!(dir.path().join("topology-dphd-g3-p2.json").exists());
}

#[test]
fn default_table_has_every_variant_and_radix() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&qfly(dir.path(), &["topology", "--table"]));
    assert_eq!(text.lines().count(), 1 + 27);
    assert!(text.contains("sphd, 1100, 605550, 1101, 550, 275, 1211100"));
}

#[test]
fn loss_replay() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&qfly(dir.path(), &["loss", "--experiments", "1..6"]));
    let inter: Vec<f64> = csv_rows(&dir.path().join("loss.csv"))
        .into_iter()
        .filter(|r| r[3] == "inter-group")
        .map(|r| r[8].parse().unwrap())
        .collect();
    let expected = [7.2, 9.9, 9.9, 9.9, 12.7, 12.7];
    assert_eq!(inter.len(), expected.len());
    for (got, want) in inter.iter().zip(expected) {
        assert!((got - want).abs() <= 0.05, "{got} vs {want}");
    }

    stdout(&qfly(
        dir.path(),
        &["loss", "--variant", "sphd", "-g", "3", "-p", "2", "--x-2x2", "0"],
    ));
    for r in csv_rows(&dir.path().join("loss.csv")) {
        assert!((r[8].parse::<f64>().unwrap() - 3.0103).abs() < 1e-3);
    }
}

#[test]
fn toy_schedule_matches_exhaustive_reference() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("toy.toml");
    fs::write(
        &config,
        "name = \"toy\"\nvariant = \"sphd\"\ng = 3\np = 4\nq = 1\nqft_n = 4\nt_gs = 2e-7\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    stdout(&qfly(&out, &["schedule", "--config", config.to_str().unwrap()]));
    let rows = csv_rows(&out.join("summary.csv"));
    let toy = rows.iter().find(|r| r[0] == "toy").unwrap();
    let (rounds, slots): (usize, f64) = (toy[6].parse().unwrap(), toy[7].parse().unwrap());

    let topology = build_topology(Variant::SinglePathHalfDuplex, 3, 4).unwrap();
    let circuit = qft_circuit(4);
    let (best, best_rounds) = common::exhaustive_best(&common::Instance {
        circuit: &circuit,
        node_of: vec![0, 1, 2, 3],
        topology: &topology,
        loss: LinkLossParams::default(),
        routing: RoutingOptions::default(),
        t_attempt: DEFAULT_T_ATTEMPT,
        t_gs: 2e-7,
    });
    assert!((slots - best).abs() <= 1e-9 * best, "{slots} vs {best}");
    assert_eq!(rounds, best_rounds);
    assert!(out.join("toy.trace.jsonl").exists());
}

#[test]
fn monolithic_only_slowdowns_are_one() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&qfly(
        dir.path(),
        &["schedule", "--experiments", "all", "--monolithic-only", "--qft-n", "8"],
    ));
    let rows = csv_rows(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[8] == "1"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["schedule", "--experiments", "1..6", "--qft-n", "20", "--lattice"];
    stdout(&qfly(a.path(), &args));
    stdout(&qfly(b.path(), &args));
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2 + 18);
    for name in names {
        let (x, y) = (
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
        );
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qfly"))
        .args(["topology", "--variant", "sphd", "-g", "3", "-p", "2"])
        .env("QFLY_OUT_DIR", dir.path())
        .output()
        .unwrap();
    stdout(&o);
    assert!(dir.path().join("topology-sphd-g3-p2.json").exists());
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "variant = \"sphd\"\ng = 3\np = 2\nt_gs = 1e-8\nbogus = 1\n").unwrap();
    let bad = bad.to_str().unwrap();
    let missing = dir.path().join("missing.toml");
    let missing = missing.to_str().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["schedule", "--variant", "sphd", "-g", "3", "-p", "2"], "t_gs"),
        (&["schedule", "--experiments", "9"], "no experiment 9"),
        (&["topology", "--variant", "sphd", "-g", "3", "-p", "3"], "even"),
        (&["topology"], "--variant"),
        (&["schedule", "--config", bad], "bogus"),
        (&["loss", "--config", missing], "missing.toml"),
    ];
    for (args, hint) in cases {
        let o = qfly(dir.path(), args);
        assert!(!o.status.success(), "{args:?} should fail");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(hint), "{args:?}: {err}");
    }
    assert!(!qfly(dir.path(), &["frobnicate"]).status.success());
}

#[test]
fn full_presets_rank_exp6_first() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&qfly(dir.path(), &["schedule", "--experiments", "1..6", "--no-trace"]));
    let rows = csv_rows(&dir.path().join("summary.csv"));
    let qfly_rows: Vec<&Vec<String>> = rows.iter().filter(|r| !r[0].contains('/')).collect();
    assert_eq!(qfly_rows.len(), 6);
    let best = qfly_rows
        .iter()
        .min_by(|a, b| a[7].parse::<f64>().unwrap().total_cmp(&b[7].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(best[0], "exp6");
    assert!(rows.iter().all(|r| r[8].parse::<f64>().unwrap() >= 1.0));
}

#[test]
fn bundled_configs_run() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<_> = fs::read_dir(&configs).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    assert!(paths.len() >= 3);
    let dir = tempfile::tempdir().unwrap();
    for path in paths {
        let text = fs::read_to_string(&path).unwrap();
        let config = qfly_core::config::ExperimentConfig::from_toml(&text).unwrap();
        config.resolve().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        stdout(&qfly(
            dir.path(),
            &[
                "schedule",
                "--config",
                path.to_str().unwrap(),
                "--qft-n",
                "12",
                "--no-trace",
            ],
        ));
    }
}
