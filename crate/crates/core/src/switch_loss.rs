//! Group-switch insertion loss and end-to-end path loss budgets, in dB.

use serde::{Deserialize, Serialize};

use crate::error::LossError;
use crate::routing::{PathElement, PathSpec};
use crate::topology::{QFlyTopology, Variant};

/// Ideal linear-optics Bell-state-analyzer success probability.
pub const BSA_IDEAL_SUCCESS: f64 = 0.5;

/// Measured fiber-to-fiber loss of one discrete 2x2 MEMS switch, dB.
pub const DEFAULT_X_2X2_DB: f64 = 0.46;

/// Typical single-mode fiber attenuation, dB/km.
pub const DEFAULT_FIBER_DB_PER_KM: f64 = 0.2;

/// Converts a success probability into the equivalent loss in dB.
pub fn probability_to_db(probability: f64) -> f64 {
    -10.0 * probability.log10()
}

/// Multiplicative retry overhead of a channel with the given loss.
pub fn overhead_factor(loss_db: f64) -> f64 {
    10f64.powf(loss_db / 10.0)
}

/// How a group switch is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SwitchTechnology {
    /// Benes network of discrete 2x2 switches, depth `2*ceil(log2 k) - 1`.
    Benes { x_2x2: f64 },
    /// Planar permutation network on a photonic chip, depth `k`.
    PlanarChip { x_coupling: f64, x_cell: f64 },
    /// A single k x k switch with radix-independent loss.
    Monolithic { x_kxk: f64 },
}

impl Default for SwitchTechnology {
    fn default() -> Self {
        SwitchTechnology::Benes {
            x_2x2: DEFAULT_X_2X2_DB,
        }
    }
}

fn check_param(name: &'static str, value: f64) -> Result<(), LossError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(LossError::NegativeParameter { name, value })
    }
}

/// `ceil(log2 k)` for `k >= 1`.
fn ceil_log2(k: usize) -> u32 {
    usize::BITS - (k - 1).leading_zeros()
}

impl SwitchTechnology {
    pub fn family(&self) -> &'static str {
        match self {
            SwitchTechnology::Benes { .. } => "benes",
            SwitchTechnology::PlanarChip { .. } => "planar_chip",
            SwitchTechnology::Monolithic { .. } => "monolithic",
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        match *self {
            SwitchTechnology::Benes { x_2x2 } => check_param("x_2x2", x_2x2),
            SwitchTechnology::PlanarChip { x_coupling, x_cell } => {
                check_param("x_coupling", x_coupling)?;
                check_param("x_cell", x_cell)
            }
            SwitchTechnology::Monolithic { x_kxk } => check_param("x_kxk", x_kxk),
        }
    }

    /// Number of 2x2 cells a photon crosses, where that notion applies.
    pub fn cell_depth(&self, k: usize) -> Option<usize> {
        match self {
            SwitchTechnology::Benes { .. } => Some(2 * ceil_log2(k) as usize - 1),
            SwitchTechnology::PlanarChip { .. } => Some(k),
            SwitchTechnology::Monolithic { .. } => None,
        }
    }

    /// Fiber-to-BSA insertion loss of a `k`-radix group switch.
    pub fn group_loss(&self, k: usize) -> Result<f64, LossError> {
        if k < 2 {
            return Err(LossError::RadixTooSmall(k));
        }
        self.validate()?;
        Ok(match *self {
            SwitchTechnology::Benes { x_2x2 } => (2 * ceil_log2(k) - 1) as f64 * x_2x2,
            SwitchTechnology::PlanarChip { x_coupling, x_cell } => x_coupling + k as f64 * x_cell,
            SwitchTechnology::Monolithic { x_kxk } => x_kxk,
        })
    }
}

/// Free function form of [`SwitchTechnology::group_loss`].
pub fn group_loss(tech: &SwitchTechnology, k: usize) -> Result<f64, LossError> {
    tech.group_loss(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathKind {
    IntraGroup,
    InterGroup,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::IntraGroup => "intra-group",
            PathKind::InterGroup => "inter-group",
        }
    }
}

/// Group-switch traversals, summed over both arms, of a minimum-hop path.
pub fn min_crossings(variant: Variant, kind: PathKind) -> usize {
    match (variant.is_full_duplex(), kind) {
        (false, PathKind::IntraGroup) => 2,
        (false, PathKind::InterGroup) => 3,
        (true, PathKind::IntraGroup) => 1,
        (true, PathKind::InterGroup) => 2,
    }
}

/// Switch part of the loss of a minimum-hop path of the given kind.
pub fn path_loss(variant: Variant, kind: PathKind, tech: &SwitchTechnology, k: usize) -> Result<f64, LossError> {
    Ok(min_crossings(variant, kind) as f64 * tech.group_loss(k)?)
}

/// Everything that turns a path's switch-crossing count into a loss budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLossParams {
    pub tech: SwitchTechnology,
    /// Fiber length between the end nodes, km.
    pub fiber_length_km: f64,
    pub fiber_db_per_km: f64,
    pub bsa_success_probability: f64,
}

impl Default for LinkLossParams {
    fn default() -> Self {
        LinkLossParams {
            tech: SwitchTechnology::default(),
            fiber_length_km: 0.0,
            fiber_db_per_km: DEFAULT_FIBER_DB_PER_KM,
            bsa_success_probability: BSA_IDEAL_SUCCESS,
        }
    }
}

impl LinkLossParams {
    pub fn with_tech(tech: SwitchTechnology) -> Self {
        LinkLossParams {
            tech,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        self.tech.validate()?;
        check_param("fiber_length_km", self.fiber_length_km)?;
        check_param("fiber_db_per_km", self.fiber_db_per_km)?;
        let p = self.bsa_success_probability;
        if !(p > 0.0 && p <= 1.0) {
            return Err(LossError::BadSuccessProbability(p));
        }
        Ok(())
    }

    /// Loss budget of a path that crosses `switch_crossings` group switches.
    pub fn budget(&self, switch_crossings: usize, k: usize) -> Result<LossBudget, LossError> {
        self.validate()?;
        let bsa_probability_term = probability_to_db(self.bsa_success_probability);
        let fiber_term = self.fiber_length_km * self.fiber_db_per_km;
        let switch_term = if switch_crossings == 0 {
            0.0
        } else {
            switch_crossings as f64 * self.tech.group_loss(k)?
        };
        Ok(LossBudget {
            bsa_probability_term,
            fiber_term,
            switch_term,
            total: bsa_probability_term + fiber_term + switch_term,
            switch_crossings,
        })
    }
}

/// Loss decomposition of one two-arm connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub bsa_probability_term: f64,
    pub fiber_term: f64,
    pub switch_term: f64,
    pub total: f64,
    pub switch_crossings: usize,
}

impl LossBudget {
    pub fn overhead_factor(&self) -> f64 {
        overhead_factor(self.total)
    }
}

/// Loss budget of `path` on `topology`; the radix comes from the topology.
pub fn end_to_end_loss(
    topology: &QFlyTopology,
    path: &PathSpec,
    params: &LinkLossParams,
) -> Result<LossBudget, LossError> {
    for element in path.arm_a.iter().chain(&path.arm_b) {
        match element {
            PathElement::Switch { group, .. } if *group >= topology.groups() => {
                return Err(LossError::UnknownElement(format!("switch:{group}")));
            }
            PathElement::Fiber { fiber } if topology.fiber(*fiber).is_none() => {
                return Err(LossError::UnknownElement(fiber.to_string()));
            }
            PathElement::Direct { node } if topology.node(*node).is_none() => {
                return Err(LossError::UnknownElement(node.to_string()));
            }
            _ => {}
        }
    }
    params.budget(path.count_switch_elements(), topology.radix())
}

const BUNDLED_CATALOG: &str = include_str!("../data/switch_catalog.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub k_min: usize,
    pub k_max: usize,
    #[serde(flatten)]
    pub tech: SwitchTechnology,
    #[serde(default)]
    pub note: String,
}

impl CatalogEntry {
    pub fn supports(&self, k: usize) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }
}

/// A list of switch technology instances loaded from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchCatalog {
    #[serde(rename = "switch")]
    pub entries: Vec<CatalogEntry>,
}

impl SwitchCatalog {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CATALOG).expect("bundled switch catalog parses")
    }

    pub fn parse(text: &str) -> Result<Self, LossError> {
        let catalog: SwitchCatalog = toml::from_str(text).map_err(|e| LossError::Catalog(e.to_string()))?;
        for entry in &catalog.entries {
            entry.tech.validate()?;
            if entry.k_min < 2 || entry.k_min > entry.k_max {
                return Err(LossError::Catalog(format!(
                    "{}: bad radix range {}..={}",
                    entry.name, entry.k_min, entry.k_max
                )));
            }
        }
        Ok(catalog)
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENES: SwitchTechnology = SwitchTechnology::Benes { x_2x2: 0.46 };

    #[test]
    fn benes_depths() {
        assert!((BENES.group_loss(4).unwrap() - 1.38).abs() < 1e-12);
        assert!((BENES.group_loss(8).unwrap() - 2.30).abs() < 1e-12);
        assert!((BENES.group_loss(16).unwrap() - 3.22).abs() < 1e-12);
        assert_eq!(BENES.cell_depth(2), Some(1));
        assert_eq!(BENES.cell_depth(5), Some(5));
        assert_eq!(BENES.group_loss(5).unwrap(), BENES.group_loss(8).unwrap());
    }

    #[test]
    fn planar_and_monolithic() {
        let planar = SwitchTechnology::PlanarChip {
            x_coupling: 2.0,
            x_cell: 0.1,
        };
        assert!((planar.group_loss(16).unwrap() - 3.6).abs() < 1e-12);
        let mono = SwitchTechnology::Monolithic { x_kxk: 1.5 };
        assert_eq!(mono.group_loss(576).unwrap(), 1.5);
        assert_eq!(mono.group_loss(2).unwrap(), 1.5);
    }

    #[test]
    fn group_loss_errors() {
        assert_eq!(BENES.group_loss(1), Err(LossError::RadixTooSmall(1)));
        let bad = SwitchTechnology::Monolithic { x_kxk: -1.0 };
        assert!(matches!(
            bad.group_loss(4),
            Err(LossError::NegativeParameter { name: "x_kxk", .. })
        ));
    }

    #[test]
    fn path_loss_multipliers() {
        let v = path_loss(Variant::DualPathFullDuplex, PathKind::IntraGroup, &BENES, 8).unwrap();
        assert!((v - 2.30).abs() < 1e-12);
        let v = path_loss(Variant::SinglePathHalfDuplex, PathKind::InterGroup, &BENES, 4).unwrap();
        assert!((v - 4.14).abs() < 1e-12);
        let lossless = SwitchTechnology::Monolithic { x_kxk: 0.0 };
        for k in [2, 17, 1100] {
            let v = path_loss(Variant::DualPathHalfDuplex, PathKind::IntraGroup, &lossless, k);
            assert_eq!(v.unwrap(), 0.0);
        }
    }

    #[test]
    fn budget_terms() {
        let params = LinkLossParams::with_tech(BENES);
        let b = params.budget(0, 4).unwrap();
        assert_eq!(b.total, 10.0 * 2f64.log10());
        let b = params.budget(3, 4).unwrap();
        assert!((b.total - 7.1503).abs() < 1e-3);
        assert_eq!(b.total, b.bsa_probability_term + b.fiber_term + b.switch_term);

        let lab = LinkLossParams {
            bsa_success_probability: 0.25,
            fiber_length_km: 0.5,
            ..params
        };
        let b = lab.budget(0, 4).unwrap();
        assert!((b.bsa_probability_term - 6.0206).abs() < 1e-4);
        assert!((b.fiber_term - 0.1).abs() < 1e-12);

        let bad = LinkLossParams {
            bsa_success_probability: 0.0,
            ..params
        };
        assert!(bad.budget(1, 4).is_err());
    }

    #[test]
    fn overhead_values() {
        assert!((overhead_factor(10.0 * 2f64.log10()) - 2.0).abs() < 1e-12);
        assert!((overhead_factor(1.38) - 1.374).abs() < 1e-3);
        assert!((overhead_factor(9.9) - 9.772).abs() < 1e-3);
    }

    #[test]
    fn bundled_catalog_loads() {
        let catalog = SwitchCatalog::bundled();
        assert!(catalog.entries.len() >= 5);
        let benes = catalog.get("homebuilt-benes-2x2").unwrap();
        assert_eq!(benes.tech, BENES);
        assert!(benes.supports(16));
        for entry in &catalog.entries {
            let k = entry.k_min.max(2);
            assert!(entry.tech.group_loss(k).unwrap() >= 0.0);
        }
    }

    #[test]
    fn catalog_rejects_bad_entries() {
        let text = "[[switch]]\nname = \"x\"\nfamily = \"monolithic\"\nx_kxk = -2.0\nk_min = 2\nk_max = 8\n";
        assert!(SwitchCatalog::parse(text).is_err());
        let text = "[[switch]]\nname = \"x\"\nfamily = \"monolithic\"\nx_kxk = 2.0\nk_min = 9\nk_max = 8\n";
        assert!(SwitchCatalog::parse(text).is_err());
    }
}
