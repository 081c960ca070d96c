//! Experiment configuration: one TOML document plus programmatic overrides.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::linkmodel::{DEFAULT_INFIDELITY, DEFAULT_T_ATTEMPT, PURIFICATION_FACTOR};
use crate::routing::{RoutingOptions, DEFAULT_MAX_EXTRA_HOPS};
use crate::scheduler::{LatticeConfig, LatticeGrid, ScheduleConfig, TimingConfig, DEFAULT_LATTICE_LINK_DB};
use crate::switch_loss::{LinkLossParams, SwitchTechnology, BSA_IDEAL_SUCCESS, DEFAULT_FIBER_DB_PER_KM};
use crate::topology::{build_topology, max_topology_for_radix, QFlyTopology, Variant};
use crate::workload::{place_qubits, qft_circuit_with, Circuit, DecompositionPolicy, Placement, PlacementPolicy};

/// Reconfiguration time used by the bundled experiment presets. It is small
/// next to a logical pair time, so round length follows path loss.
pub const PRESET_T_GS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub variant: Variant,
    #[serde(default)]
    pub g: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
    /// Switch radix; with `maximize` the largest system for this radix is
    /// built, otherwise it must agree with `g` and `p`.
    #[serde(default)]
    pub radix: Option<usize>,
    #[serde(default)]
    pub maximize: bool,
    #[serde(default = "default_fiber_db_per_km")]
    pub fiber_db_per_km: f64,
    #[serde(default)]
    pub fiber_length_km: f64,
    #[serde(default = "default_bsa_success")]
    pub bsa_success_probability: f64,
    #[serde(default = "default_t_attempt")]
    pub t_attempt: f64,
    /// Required; there is no sensible universal default.
    #[serde(default)]
    pub t_gs: Option<f64>,
    #[serde(default)]
    pub t_slot: Option<f64>,
    #[serde(default = "default_purification")]
    pub purification_factor: f64,
    #[serde(default = "default_infidelity")]
    pub infidelity: f64,
    /// QFT width; defaults to filling every node to capacity.
    #[serde(default)]
    pub qft_n: Option<usize>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub placement: PlacementPolicy,
    #[serde(default)]
    pub decomposition: DecompositionPolicy,
    #[serde(default = "default_weight")]
    pub rotation_slot_weight: f64,
    #[serde(default = "default_extra_hops")]
    pub max_extra_hops: usize,
    #[serde(default)]
    pub usable_bsas: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Also run the 2D lattice baseline with the same node count and q.
    #[serde(default)]
    pub lattice: bool,
    #[serde(default = "default_lattice_link_db")]
    pub lattice_link_db: f64,
    #[serde(default)]
    pub switch: SwitchTechnology,
}

fn default_name() -> String {
    "experiment".to_string()
}
fn default_fiber_db_per_km() -> f64 {
    DEFAULT_FIBER_DB_PER_KM
}
fn default_bsa_success() -> f64 {
    BSA_IDEAL_SUCCESS
}
fn default_t_attempt() -> f64 {
    DEFAULT_T_ATTEMPT
}
fn default_purification() -> f64 {
    PURIFICATION_FACTOR
}
fn default_infidelity() -> f64 {
    DEFAULT_INFIDELITY
}
fn default_q() -> usize {
    1
}
fn default_weight() -> f64 {
    1.0
}
fn default_extra_hops() -> usize {
    DEFAULT_MAX_EXTRA_HOPS
}
fn default_lattice_link_db() -> f64 {
    DEFAULT_LATTICE_LINK_DB
}

/// A configuration with its topology resolved and checked.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub topology: QFlyTopology,
    pub t_gs: f64,
}

impl ExperimentConfig {
    /// Defaults for everything except the shape, `t_gs` left unset.
    pub fn new(name: &str, variant: Variant) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            variant,
            g: None,
            p: None,
            radix: None,
            maximize: false,
            fiber_db_per_km: DEFAULT_FIBER_DB_PER_KM,
            fiber_length_km: 0.0,
            bsa_success_probability: BSA_IDEAL_SUCCESS,
            t_attempt: DEFAULT_T_ATTEMPT,
            t_gs: None,
            t_slot: None,
            purification_factor: PURIFICATION_FACTOR,
            infidelity: DEFAULT_INFIDELITY,
            qft_n: None,
            q: 1,
            placement: PlacementPolicy::Block,
            decomposition: DecompositionPolicy::Standard,
            rotation_slot_weight: 1.0,
            max_extra_hops: DEFAULT_MAX_EXTRA_HOPS,
            usable_bsas: None,
            seed: 0,
            lattice: false,
            lattice_link_db: DEFAULT_LATTICE_LINK_DB,
            switch: SwitchTechnology::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// `(g, p)` after applying the radix options.
    pub fn shape(&self) -> Result<(usize, usize), ConfigError> {
        match (self.g, self.p, self.radix) {
            (Some(g), Some(p), radix) => {
                if let Some(k) = radix {
                    let actual = self.variant.radix(g, p);
                    if k != actual {
                        return Err(ConfigError::Invalid(format!(
                            "radix {k} does not match g={g}, p={p} ({} needs k={actual})",
                            self.variant
                        )));
                    }
                }
                Ok((g, p))
            }
            (None, None, Some(k)) if self.maximize => {
                let s = max_topology_for_radix(self.variant, k)?;
                Ok((s.g, s.p))
            }
            (None, None, Some(_)) => Err(ConfigError::Invalid(
                "radix alone needs maximize = true (or give g and p)".into(),
            )),
            _ => Err(ConfigError::Missing("both g and p, or radix with maximize")),
        }
    }

    pub fn t_gs(&self) -> Result<f64, ConfigError> {
        self.t_gs
            .ok_or(ConfigError::Missing("t_gs (switch reconfiguration time, seconds)"))
    }

    /// Builds the topology and checks every parameter.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        let (g, p) = self.shape()?;
        let topology = build_topology(self.variant, g, p)?;
        let t_gs = self.t_gs()?;
        let times = [
            ("t_gs", t_gs),
            ("t_attempt", self.t_attempt),
            ("t_slot", self.t_slot.unwrap_or(1.0)),
            ("purification_factor", self.purification_factor),
            ("rotation_slot_weight", self.rotation_slot_weight),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.infidelity) {
            return Err(ConfigError::Invalid(format!(
                "infidelity must be in [0, 1], got {}",
                self.infidelity
            )));
        }
        match self.usable_bsas {
            Some(0) => return Err(ConfigError::Invalid("usable_bsas must be at least 1".into())),
            Some(n) if self.variant.is_full_duplex() && n < topology.bsas_per_group() => {
                return Err(ConfigError::Invalid(format!(
                    "usable_bsas = {n} would strand nodes: a full-duplex group has {} node-owned BSAs",
                    topology.bsas_per_group()
                )))
            }
            _ => {}
        }
        if !(self.lattice_link_db.is_finite() && self.lattice_link_db >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "lattice_link_db must be non-negative, got {}",
                self.lattice_link_db
            )));
        }
        self.loss_params().validate()?;
        if self.q == 0 {
            return Err(ConfigError::Invalid("q must be at least 1".into()));
        }
        let n = self.qft_n.unwrap_or(topology.node_count() * self.q);
        if n > topology.node_count() * self.q {
            return Err(ConfigError::Invalid(format!(
                "qft_n = {n} exceeds capacity {} ({} nodes x q={})",
                topology.node_count() * self.q,
                topology.node_count(),
                self.q
            )));
        }
        Ok(ResolvedExperiment {
            config: self.clone(),
            topology,
            t_gs,
        })
    }

    pub fn loss_params(&self) -> LinkLossParams {
        LinkLossParams {
            tech: self.switch,
            fiber_length_km: self.fiber_length_km,
            fiber_db_per_km: self.fiber_db_per_km,
            bsa_success_probability: self.bsa_success_probability,
        }
    }
}

impl ResolvedExperiment {
    pub fn qubits(&self) -> usize {
        self.config.qft_n.unwrap_or(self.topology.node_count() * self.config.q)
    }

    pub fn circuit(&self) -> Circuit {
        qft_circuit_with(self.qubits(), self.config.decomposition)
    }

    pub fn placement(&self) -> Result<Placement, ConfigError> {
        Ok(place_qubits(
            self.qubits(),
            &self.topology,
            self.config.q,
            self.config.placement,
        )?)
    }

    /// Placement on the lattice baseline's grid, same node count and q.
    pub fn lattice_placement(&self) -> Result<Placement, ConfigError> {
        Ok(Placement::generic(
            self.qubits(),
            self.topology.node_count(),
            self.config.q,
            self.config.placement,
        )?)
    }

    pub fn timing(&self) -> TimingConfig {
        TimingConfig {
            t_attempt: self.config.t_attempt,
            t_gs: self.t_gs,
            t_slot: self.config.t_slot,
            purification_factor: self.config.purification_factor,
            rotation_slot_weight: self.config.rotation_slot_weight,
        }
    }

    pub fn schedule_config(&self) -> ScheduleConfig {
        ScheduleConfig {
            timing: self.timing(),
            loss: self.config.loss_params(),
            routing: RoutingOptions {
                max_extra_hops: self.config.max_extra_hops,
                usable_bsas: self.config.usable_bsas,
            },
        }
    }

    pub fn lattice_config(&self) -> LatticeConfig {
        LatticeConfig {
            grid: LatticeGrid::for_nodes(self.topology.node_count()),
            timing: self.timing(),
            link_loss_db: self.config.lattice_link_db,
        }
    }
}

/// The six single-path half-duplex evaluation configurations, as
/// `(p, k, g, q)`; every node is filled, so the QFT width is `g * p * q`.
pub const PRESET_SHAPES: [(usize, usize, usize, usize); 6] = [
    (2, 4, 5, 13),
    (6, 8, 5, 4),
    (4, 8, 9, 4),
    (2, 8, 13, 5),
    (14, 16, 5, 2),
    (8, 16, 17, 1),
];

/// Experiment presets 1 to 6 with Benes switches of 0.46 dB elements and
/// `t_gs` = [`PRESET_T_GS`].
pub fn experiment_presets() -> Vec<ExperimentConfig> {
    PRESET_SHAPES
        .iter()
        .enumerate()
        .map(|(i, &(p, k, g, q))| {
            let mut c = ExperimentConfig::new(&format!("exp{}", i + 1), Variant::SinglePathHalfDuplex);
            c.g = Some(g);
            c.p = Some(p);
            c.radix = Some(k);
            c.q = q;
            c.t_gs = Some(PRESET_T_GS);
            c
        })
        .collect()
}

/// Looks up presets by 1-based index.
pub fn select_presets(indices: &[usize]) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let all = experiment_presets();
    indices
        .iter()
        .map(|&i| {
            all.get(i.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| ConfigError::Invalid(format!("no experiment {i}; presets are 1 to {}", all.len())))
        })
        .collect()
}

/// Parses `"1..6"`, `"2,5"`, `"1..3,6"` or `"all"`.
pub fn parse_experiment_list(list: &str) -> Result<Vec<usize>, ConfigError> {
    if list.trim() == "all" {
        return Ok((1..=PRESET_SHAPES.len()).collect());
    }
    let bad = || ConfigError::Invalid(format!("cannot read experiment list {list:?}"));
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_shapes() {
        for (c, &(p, k, g, q)) in experiment_presets().iter().zip(PRESET_SHAPES.iter()) {
            let r = c.resolve().unwrap();
            assert_eq!(r.topology.radix(), k);
            assert_eq!(r.topology.node_count(), g * p);
            assert_eq!(r.qubits(), g * p * q);
        }
        let totals: Vec<usize> = experiment_presets()
            .iter()
            .map(|c| c.resolve().unwrap().qubits())
            .collect();
        assert_eq!(totals, vec![130, 120, 144, 130, 140, 136]);
    }

    #[test]
    fn toml_round_trip_and_minimal_file() {
        let c = &experiment_presets()[0];
        assert_eq!(&ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);

        let text = r#"
            variant = "dpfd"
            radix = 24
            maximize = true
            t_gs = 1e-3
            [switch]
            family = "monolithic"
            x_kxk = 1.5
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!((r.topology.groups(), r.topology.nodes_per_group()), (13, 12));
        assert_eq!(c.switch, SwitchTechnology::Monolithic { x_kxk: 1.5 });
    }

    #[test]
    fn configuration_errors() {
        let base = "variant = \"sphd\"\ng = 5\np = 2\n";
        let missing = ExperimentConfig::from_toml(base).unwrap();
        assert!(matches!(missing.resolve(), Err(ConfigError::Missing(_))));
        assert!(ExperimentConfig::from_toml(&format!("{base}bogus = 1\n")).is_err());
        let wrong_k = ExperimentConfig::from_toml(&format!("{base}t_gs = 1e-3\nradix = 9\n")).unwrap();
        assert!(matches!(wrong_k.resolve(), Err(ConfigError::Invalid(_))));
        let odd = ExperimentConfig::from_toml("variant = \"sphd\"\ng = 5\np = 3\nt_gs = 1e-3\n").unwrap();
        assert!(matches!(odd.resolve(), Err(ConfigError::Topology(_))));
        let zero = ExperimentConfig::from_toml(&format!("{base}t_gs = 0.0\n")).unwrap();
        assert!(zero.resolve().is_err());
        let crowded = ExperimentConfig::from_toml(&format!("{base}t_gs = 1e-3\nqft_n = 11\n")).unwrap();
        assert!(crowded.resolve().is_err());
    }

    #[test]
    fn experiment_lists() {
        assert_eq!(parse_experiment_list("1..6").unwrap(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_experiment_list("1..=2, 5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_experiment_list("all").unwrap().len(), 6);
        assert!(parse_experiment_list("3..1").is_err());
        assert!(parse_experiment_list("x").is_err());
        assert!(select_presets(&[7]).is_err());
        assert_eq!(select_presets(&[6]).unwrap()[0].name, "exp6");
    }
}
