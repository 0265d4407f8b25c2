//! Scenario description (physical units, JSON schema) and its normalized,
//! index-based counterpart used by every solver.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MarketError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance on `Σ B_s = 1`.
pub const BUDGET_SUM_TOLERANCE: f64 = 1e-12;

/// Fairness parameter of a provider. `Infinite` is max-min fairness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinite,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::Finite(a) => a,
            Alpha::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Alpha::Infinite)
    }

    /// True for the regime covered by the decentralized dynamics, `α ∈ [1, ∞]`.
    pub fn is_complementary(self) -> bool {
        match self {
            Alpha::Finite(a) => a >= 1.0,
            Alpha::Infinite => true,
        }
    }

    pub fn from_f64(a: f64) -> Self {
        if a.is_infinite() && a > 0.0 {
            Alpha::Infinite
        } else {
            Alpha::Finite(a)
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Alpha::Finite(a) if !(a >= 0.0) || !a.is_finite() => Err(MarketError::NegativeAlpha(a)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => serializer.serialize_f64(*a),
            Alpha::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct AlphaVisitor;

        impl Visitor<'_> for AlphaVisitor {
            type Value = Alpha;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Alpha, E> {
                Ok(Alpha::from_f64(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Alpha, E> {
                Ok(Alpha::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Alpha, E> {
                Ok(Alpha::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Alpha, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(Alpha::Infinite),
                    other => other
                        .parse::<f64>()
                        .map(Alpha::from_f64)
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        deserializer.deserialize_any(AlphaVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub name: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub id: String,
    pub resources: Vec<ResourceSpec>,
}

/// A service class and its base demand: physical amount of each resource per
/// unit of service rate. Resources absent from the map are not consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub demand: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec {
    pub cell: String,
    pub class: String,
    pub users: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    pub budget: f64,
    pub alpha: Alpha,
    pub support: Vec<SupportSpec>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Full market instance in physical units. This is the JSON document format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub cells: Vec<CellSpec>,
    pub classes: Vec<ClassSpec>,
    pub sps: Vec<ProviderSpec>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| MarketError::InvalidScenario(format!("{}: {}", e.path(), e.inner())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    /// Copy with every provider's fairness parameter replaced.
    pub fn with_uniform_alpha(&self, alpha: Alpha) -> Self {
        let mut out = self.clone();
        for sp in &mut out.sps {
            sp.alpha = alpha;
        }
        out
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.sps.iter().map(|s| s.budget).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.normalize().map(|_| ())
    }

    /// Index the scenario and rescale every capacity to 1.
    pub fn normalize(&self) -> Result<Market> {
        let invalid = |msg: String| Err(MarketError::InvalidScenario(msg));

        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            ));
        }
        if self.cells.is_empty() {
            return invalid("cells: at least one cell is required".into());
        }
        if self.sps.is_empty() {
            return invalid("sps: at least one provider is required".into());
        }

        let mut cells = Vec::with_capacity(self.cells.len());
        let mut cell_index = HashMap::new();
        let mut offset = 0;
        for (ci, cell) in self.cells.iter().enumerate() {
            if cell_index.insert(cell.id.as_str(), ci).is_some() {
                return invalid(format!("cells[{ci}].id: duplicate cell id {:?}", cell.id));
            }
            let mut names = HashSet::new();
            for (ri, res) in cell.resources.iter().enumerate() {
                if !names.insert(res.name.as_str()) {
                    return invalid(format!("cells[{ci}].resources[{ri}]: duplicate resource {:?}", res.name));
                }
                if !(res.capacity > 0.0) || !res.capacity.is_finite() {
                    return invalid(format!(
                        "cells[{ci}].resources[{ri}].capacity: must be positive, got {}",
                        res.capacity
                    ));
                }
            }
            cells.push(MarketCell {
                id: cell.id.clone(),
                resource_names: cell.resources.iter().map(|r| r.name.clone()).collect(),
                capacities: cell.resources.iter().map(|r| r.capacity).collect(),
                offset,
            });
            offset += cell.resources.len();
        }
        let n_resources = offset;

        let mut class_index = HashMap::new();
        for (ki, class) in self.classes.iter().enumerate() {
            if class_index.insert(class.name.as_str(), ki).is_some() {
                return invalid(format!("classes[{ki}].name: duplicate class {:?}", class.name));
            }
            if class.demand.is_empty() {
                return invalid(format!("classes[{ki}].demand: class consumes no resource"));
            }
            for (res, &amount) in &class.demand {
                if !(amount > 0.0) || !amount.is_finite() {
                    return invalid(format!(
                        "classes[{ki}].demand.{res}: must be positive, got {amount}"
                    ));
                }
            }
        }

        let budget_sum: f64 = self.sps.iter().map(|s| s.budget).sum();
        if (budget_sum - 1.0).abs() > BUDGET_SUM_TOLERANCE {
            return invalid(format!("sps[*].budget: budgets must sum to 1, got {budget_sum}"));
        }

        let mut providers = Vec::with_capacity(self.sps.len());
        for (si, sp) in self.sps.iter().enumerate() {
            sp.alpha.validate()?;
            if !(sp.budget > 0.0) || !sp.budget.is_finite() {
                return invalid(format!("sps[{si}].budget: must be positive, got {}", sp.budget));
            }
            let mut seen = HashSet::new();
            let mut groups = Vec::new();
            for (gi, sup) in sp.support.iter().enumerate() {
                let path = format!("sps[{si}].support[{gi}]");
                let Some(&ci) = cell_index.get(sup.cell.as_str()) else {
                    return invalid(format!("{path}.cell: unknown cell {:?}", sup.cell));
                };
                let Some(&ki) = class_index.get(sup.class.as_str()) else {
                    return invalid(format!("{path}.class: unknown class {:?}", sup.class));
                };
                if !seen.insert((ci, ki)) {
                    return invalid(format!("{path}: class {:?} listed twice at cell {:?}", sup.class, sup.cell));
                }
                if let Some(w) = sup.weight {
                    if !(w > 0.0) || !w.is_finite() {
                        return invalid(format!("{path}.weight: must be positive, got {w}"));
                    }
                }
                let cell = &cells[ci];
                let mut demand = Vec::new();
                for (res, &amount) in &self.classes[ki].demand {
                    let Some(ri) = cell.resource_names.iter().position(|n| n == res) else {
                        return invalid(format!(
                            "{path}: class {:?} consumes {res:?}, which cell {:?} does not offer",
                            sup.class, sup.cell
                        ));
                    };
                    demand.push(Demand {
                        resource: cell.offset + ri,
                        amount: amount / cell.capacities[ri],
                        physical: amount,
                    });
                }
                demand.sort_by_key(|d| d.resource);
                // zero-load classes carry no weight and are left out of the market
                if sup.users == 0 {
                    continue;
                }
                let weight = sup.weight.unwrap_or_else(|| default_weight(sp.alpha, sup.users));
                groups.push(Group {
                    cell: ci,
                    class: ki,
                    users: sup.users,
                    weight,
                    demand,
                });
            }
            if groups.is_empty() {
                return invalid(format!("sps[{si}].support: provider has no class with positive load"));
            }
            providers.push(Provider {
                name: sp.name.clone(),
                budget: sp.budget,
                alpha: sp.alpha,
                groups,
            });
        }

        Ok(Market {
            cells,
            classes: self.classes.iter().map(|c| c.name.clone()).collect(),
            providers,
            n_resources,
        })
    }
}

/// Default class weight `n^α`; at `α = ∞` the weight is the user count itself.
pub fn default_weight(alpha: Alpha, users: u64) -> f64 {
    match alpha {
        Alpha::Finite(a) => (users as f64).powf(a),
        Alpha::Infinite => users as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketCell {
    pub id: String,
    pub resource_names: Vec<String>,
    pub capacities: Vec<f64>,
    /// Index of this cell's first resource in the flat resource space.
    pub offset: usize,
}

/// One consumed resource of a group: flat resource index, normalized demand
/// `d/C` per unit rate, and the original physical demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub resource: usize,
    pub amount: f64,
    pub physical: f64,
}

/// A supported (cell, class) pair of one provider.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub cell: usize,
    pub class: usize,
    pub users: u64,
    pub weight: f64,
    pub demand: Vec<Demand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provider {
    pub name: String,
    pub budget: f64,
    pub alpha: Alpha,
    pub groups: Vec<Group>,
}

impl Provider {
    pub fn weights(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.weight).collect()
    }

    pub fn users(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.users as f64).collect()
    }

    /// Unit cost of one unit of service rate for each group, `Σ_r p_r d_r`.
    pub fn unit_costs(&self, prices: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.demand.iter().map(|d| prices[d.resource] * d.amount).sum())
            .collect()
    }
}

/// Normalized market: every capacity is 1 and demands are fractions of a
/// whole resource per unit rate. Resources live in one flat index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub cells: Vec<MarketCell>,
    pub classes: Vec<String>,
    pub providers: Vec<Provider>,
    n_resources: usize,
}

impl Market {
    pub fn n_resources(&self) -> usize {
        self.n_resources
    }

    pub fn n_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.providers.iter().map(|p| p.budget).collect()
    }

    /// (cell index, resource index within the cell) of a flat resource.
    pub fn locate(&self, resource: usize) -> (usize, usize) {
        let c = self
            .cells
            .iter()
            .rposition(|cell| cell.offset <= resource)
            .expect("resource index out of range");
        (c, resource - self.cells[c].offset)
    }

    pub fn capacity(&self, resource: usize) -> f64 {
        let (c, r) = self.locate(resource);
        self.cells[c].capacities[r]
    }

    pub fn resource_label(&self, resource: usize) -> (&str, &str) {
        let (c, r) = self.locate(resource);
        (&self.cells[c].id, &self.cells[c].resource_names[r])
    }

    /// Flat resource indices of one cell.
    pub fn cell_resources(&self, cell: usize) -> std::ops::Range<usize> {
        let c = &self.cells[cell];
        c.offset..c.offset + c.resource_names.len()
    }

    /// Flat resources that no group consumes.
    pub fn undemanded_resources(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_resources];
        for p in &self.providers {
            for g in &p.groups {
                for d in &g.demand {
                    used[d.resource] = true;
                }
            }
        }
        (0..self.n_resources).filter(|&r| !used[r]).collect()
    }

    pub fn all_complementary(&self) -> bool {
        self.providers.iter().all(|p| p.alpha.is_complementary())
    }

    /// Scale fractional amounts `x[s][g][j]` back to physical units.
    pub fn denormalize(&self, fractions: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
        fractions
            .iter()
            .zip(&self.providers)
            .map(|(per_sp, sp)| {
                per_sp
                    .iter()
                    .zip(&sp.groups)
                    .map(|(xs, g)| {
                        xs.iter()
                            .zip(&g.demand)
                            .map(|(x, d)| x * self.capacity(d.resource))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Price per physical unit, `p_r / C_r`.
    pub fn physical_prices(&self, prices: &[f64]) -> Vec<f64> {
        prices
            .iter()
            .enumerate()
            .map(|(r, p)| p / self.capacity(r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_resource_spec() -> ScenarioSpec {
        ScenarioSpec {
            schema_version: 1,
            cells: vec![CellSpec {
                id: "c0".into(),
                resources: vec![
                    ResourceSpec { name: "cpu".into(), capacity: 30.0 },
                    ResourceSpec { name: "ram".into(), capacity: 126.0 },
                    ResourceSpec { name: "bw".into(), capacity: 40.0 },
                ],
            }],
            classes: vec![ClassSpec {
                name: "bw-intensive".into(),
                demand: [("cpu", 1.0), ("ram", 8.0), ("bw", 10.0)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            }],
            sps: vec![ProviderSpec {
                name: "sp".into(),
                budget: 1.0,
                alpha: Alpha::Finite(1.0),
                support: vec![SupportSpec { cell: "c0".into(), class: "bw-intensive".into(), users: 10, weight: None }],
            }],
        }
    }

    #[test]
    fn normalizes_table_row() {
        let market = two_resource_spec().normalize().unwrap();
        let g = &market.providers[0].groups[0];
        let by_name = |name: &str| {
            let r = market.cells[0].resource_names.iter().position(|n| n == name).unwrap();
            g.demand.iter().find(|d| d.resource == r).unwrap().amount
        };
        assert_eq!(by_name("cpu"), 1.0 / 30.0);
        assert_eq!(by_name("ram"), 8.0 / 126.0);
        assert_eq!(by_name("bw"), 10.0 / 40.0);
    }

    #[test]
    fn bandwidth_share_example() {
        let mut spec = two_resource_spec();
        spec.cells[0].resources[2].capacity = 40.0;
        spec.classes[0].demand.insert("bw".into(), 10.0);
        let m = spec.normalize().unwrap();
        assert!(m.providers[0].groups[0].demand.iter().any(|d| d.amount == 0.25));
    }

    #[test]
    fn unit_capacities_are_identity() {
        let mut spec = two_resource_spec();
        for r in &mut spec.cells[0].resources {
            r.capacity = 1.0;
        }
        let m = spec.normalize().unwrap();
        for d in &m.providers[0].groups[0].demand {
            assert_eq!(d.amount, d.physical);
        }
    }

    #[test]
    fn denormalize_round_trips_capacity() {
        let m = two_resource_spec().normalize().unwrap();
        let fractions = vec![vec![vec![0.5, 0.25, 1.0]]];
        let phys = m.denormalize(&fractions);
        for (j, d) in m.providers[0].groups[0].demand.iter().enumerate() {
            assert_eq!(phys[0][0][j] / m.capacity(d.resource), fractions[0][0][j]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut spec = two_resource_spec();
        spec.cells[0].resources[0].capacity = 0.0;
        assert!(matches!(spec.normalize(), Err(MarketError::InvalidScenario(m)) if m.contains("capacity")));

        let mut spec = two_resource_spec();
        spec.classes[0].demand.insert("cpu".into(), -1.0);
        assert!(spec.normalize().is_err());

        let mut spec = two_resource_spec();
        spec.sps[0].budget = 0.9;
        assert!(matches!(spec.normalize(), Err(MarketError::InvalidScenario(m)) if m.contains("sum to 1")));

        let mut spec = two_resource_spec();
        spec.sps[0].alpha = Alpha::Finite(-0.5);
        assert_eq!(spec.normalize(), Err(MarketError::NegativeAlpha(-0.5)));

        let mut spec = two_resource_spec();
        spec.sps[0].support[0].cell = "nowhere".into();
        assert!(spec.normalize().is_err());
    }

    #[test]
    fn default_weights_follow_load() {
        assert_eq!(default_weight(Alpha::Finite(2.0), 10), 100.0);
        assert_eq!(default_weight(Alpha::Finite(0.0), 7), 1.0);
        assert_eq!(default_weight(Alpha::Infinite, 7), 7.0);
    }

    #[test]
    fn zero_load_groups_are_dropped() {
        let mut spec = two_resource_spec();
        spec.classes.push(ClassSpec { name: "idle".into(), demand: [("cpu".to_string(), 1.0)].into() });
        spec.sps[0].support.push(SupportSpec { cell: "c0".into(), class: "idle".into(), users: 0, weight: None });
        let m = spec.normalize().unwrap();
        assert_eq!(m.providers[0].groups.len(), 1);
    }

    #[test]
    fn alpha_json_accepts_inf() {
        let a: Alpha = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(a, Alpha::Infinite);
        let a: Alpha = serde_json::from_str("2.5").unwrap();
        assert_eq!(a, Alpha::Finite(2.5));
        assert_eq!(serde_json::to_string(&Alpha::Infinite).unwrap(), "\"inf\"");
    }

    #[test]
    fn json_errors_carry_field_path() {
        let text = r#"{"cells":[{"id":"a","resources":[{"name":"cpu","capacity":"x"}]}],"classes":[],"sps":[]}"#;
        let err = ScenarioSpec::from_json(text).unwrap_err().to_string();
        assert!(err.contains("cells[0].resources[0].capacity"), "{err}");
    }
}
