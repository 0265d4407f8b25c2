//! Scenario presets and seeded instance families.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::model::{Alpha, CellSpec, ClassSpec, ProviderSpec, ResourceSpec, ScenarioSpec, SupportSpec, SCHEMA_VERSION};

pub const PRESET_CELLS: usize = 7;
pub const PRESET_USERS: u64 = 100;

fn demand(cpu: f64, ram: f64, bw: f64) -> std::collections::BTreeMap<String, f64> {
    [("cpu".to_string(), cpu), ("ram".to_string(), ram), ("bw".to_string(), bw)].into()
}

/// Seven cells with 30 CPUs, 126 Gb of RAM and 40 MHz of bandwidth each,
/// four service classes and three providers with equal budgets. Every
/// supported (cell, class) pair starts with `PRESET_USERS` users.
pub fn seven_cell_preset() -> ScenarioSpec {
    let cells = (1..=PRESET_CELLS)
        .map(|c| CellSpec {
            id: format!("cell{c}"),
            resources: vec![
                ResourceSpec { name: "cpu".into(), capacity: 30.0 },
                ResourceSpec { name: "ram".into(), capacity: 126.0 },
                ResourceSpec { name: "bw".into(), capacity: 40.0 },
            ],
        })
        .collect::<Vec<_>>();
    let classes = vec![
        ClassSpec { name: "bw-intensive".into(), demand: demand(1.0, 8.0, 10.0) },
        ClassSpec { name: "cpu-intensive".into(), demand: demand(4.0, 8.0, 3.0) },
        ClassSpec { name: "ram-intensive".into(), demand: demand(1.0, 32.0, 3.0) },
        ClassSpec { name: "balanced".into(), demand: demand(5.0, 40.0, 5.0) },
    ];
    let sps = [("SP1", "bw-intensive"), ("SP2", "cpu-intensive"), ("SP3", "ram-intensive")]
        .iter()
        .map(|(name, own)| ProviderSpec {
            name: name.to_string(),
            budget: 1.0 / 3.0,
            alpha: Alpha::Finite(1.0),
            support: cells
                .iter()
                .flat_map(|c| {
                    [own, &"balanced"].map(|k| SupportSpec {
                        cell: c.id.clone(),
                        class: k.to_string(),
                        users: PRESET_USERS,
                        weight: None,
                    })
                })
                .collect(),
        })
        .collect();
    ScenarioSpec { schema_version: SCHEMA_VERSION, cells, classes, sps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spread {
    /// The configured spread is the variance `σ²`.
    Variance,
    /// The configured spread is the standard deviation `σ`.
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    Nearest,
    Down,
}

/// Normally distributed user counts drawn per (provider, cell, class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadModel {
    pub mean: f64,
    pub spread: f64,
    pub spread_kind: Spread,
    /// Draws below this are raised to it.
    pub floor: f64,
    pub rounding: Rounding,
    pub seed: u64,
}

impl Default for LoadModel {
    fn default() -> Self {
        LoadModel { mean: 100.0, spread: 50.0, spread_kind: Spread::Variance, floor: 1.0, rounding: Rounding::Nearest, seed: 0 }
    }
}

impl LoadModel {
    pub fn std_dev(&self) -> f64 {
        match self.spread_kind {
            Spread::Variance => self.spread.sqrt(),
            Spread::StdDev => self.spread,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0) {
            return Err(MarketError::InvalidScenario(format!("load_model.mean must be positive, got {}", self.mean)));
        }
        if !(self.spread >= 0.0) {
            return Err(MarketError::InvalidScenario(format!("load_model.spread must be nonnegative, got {}", self.spread)));
        }
        if !(self.floor >= 0.0) {
            return Err(MarketError::InvalidScenario(format!("load_model.floor must be nonnegative, got {}", self.floor)));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, normal: &Normal<f64>, rng: &mut R) -> u64 {
        let x = normal.sample(rng).max(self.floor);
        let n = match self.rounding {
            Rounding::Nearest => x.round(),
            Rounding::Down => x.floor(),
        };
        n as u64
    }
}

/// Instance `index` of the template with freshly drawn user counts. Each
/// index reads its own stream of the seeded generator.
pub fn generate_instance(template: &ScenarioSpec, load: &LoadModel, index: u64) -> Result<ScenarioSpec> {
    load.validate()?;
    let normal = Normal::new(load.mean, load.std_dev()).map_err(|e| MarketError::InvalidScenario(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(load.seed);
    rng.set_stream(index);
    let mut spec = template.clone();
    for sp in &mut spec.sps {
        for support in &mut sp.support {
            support.users = load.draw(&normal, &mut rng);
        }
    }
    Ok(spec)
}

pub fn generate_instances(template: &ScenarioSpec, load: &LoadModel, count: usize) -> Result<Vec<ScenarioSpec>> {
    (0..count as u64).map(|i| generate_instance(template, load, i)).collect()
}

/// Give provider `sp` each budget share in `fractions` and split the rest
/// equally among the others.
pub fn budget_sweep(template: &ScenarioSpec, sp: usize, fractions: &[f64]) -> Result<Vec<ScenarioSpec>> {
    let n = template.sps.len();
    if sp >= n {
        return Err(MarketError::InvalidScenario(format!("budget sweep provider {sp} out of range ({n} providers)")));
    }
    fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f < 1.0) || (n == 1) {
                return Err(MarketError::InvalidScenario(format!("budget fraction must lie in (0, 1), got {f}")));
            }
            let mut spec = template.clone();
            let rest = (1.0 - f) / (n - 1) as f64;
            for (s, p) in spec.sps.iter_mut().enumerate() {
                p.budget = if s == sp { f } else { rest };
            }
            Ok(spec)
        })
        .collect()
}

/// Randomized instance family: a few providers over a few cells with three
/// resources each, per-provider `α` drawn from a list.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFamily {
    pub providers: (usize, usize),
    pub cells: (usize, usize),
    pub alphas: Vec<Alpha>,
    pub equal_budgets: bool,
    pub seed: u64,
}

impl Default for RandomFamily {
    fn default() -> Self {
        RandomFamily {
            providers: (2, 4),
            cells: (2, 4),
            alphas: vec![Alpha::Finite(1.0), Alpha::Finite(1.5), Alpha::Finite(2.0), Alpha::Finite(5.0), Alpha::Infinite],
            equal_budgets: false,
            seed: 0,
        }
    }
}

impl RandomFamily {
    pub fn instance(&self, index: u64) -> ScenarioSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let n_cells = rng.random_range(self.cells.0..=self.cells.1);
        let n_sps = rng.random_range(self.providers.0..=self.providers.1);
        let names = ["cpu", "ram", "bw"];
        let cells: Vec<CellSpec> = (0..n_cells)
            .map(|c| CellSpec {
                id: format!("c{c}"),
                resources: names
                    .iter()
                    .map(|n| ResourceSpec { name: n.to_string(), capacity: rng.random_range(10.0..100.0) })
                    .collect(),
            })
            .collect();
        let n_classes = 4;
        let classes: Vec<ClassSpec> = (0..n_classes)
            .map(|k| ClassSpec {
                name: format!("k{k}"),
                demand: names.iter().map(|n| (n.to_string(), rng.random_range(0.2..5.0))).collect(),
            })
            .collect();
        let mut budgets: Vec<f64> = (0..n_sps).map(|_| rng.random_range(0.2..1.0)).collect();
        if self.equal_budgets {
            budgets.iter_mut().for_each(|b| *b = 1.0);
        }
        let total: f64 = budgets.iter().sum();
        budgets.iter_mut().for_each(|b| *b /= total);
        let head: f64 = budgets[..n_sps - 1].iter().sum();
        budgets[n_sps - 1] = 1.0 - head;

        let sps = (0..n_sps)
            .map(|s| {
                let alpha = *self.alphas.choose(&mut rng).expect("family needs at least one alpha");
                let mut support = Vec::new();
                for cell in &cells {
                    for k in 0..n_classes {
                        if rng.random_bool(0.5) {
                            support.push(SupportSpec {
                                cell: cell.id.clone(),
                                class: format!("k{k}"),
                                users: rng.random_range(1..=200),
                                weight: None,
                            });
                        }
                    }
                }
                if support.is_empty() {
                    support.push(SupportSpec {
                        cell: cells[0].id.clone(),
                        class: format!("k{}", rng.random_range(0..n_classes)),
                        users: rng.random_range(1..=200),
                        weight: None,
                    });
                }
                ProviderSpec { name: format!("sp{s}"), budget: budgets[s], alpha, support }
            })
            .collect();
        ScenarioSpec { schema_version: SCHEMA_VERSION, cells, classes, sps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_shape() {
        let p = seven_cell_preset();
        assert_eq!(p.cells.len(), 7);
        let balanced = p.classes.iter().find(|k| k.name == "balanced").unwrap();
        assert_eq!(balanced.demand, demand(5.0, 40.0, 5.0));
        assert_eq!(p.budgets(), vec![1.0 / 3.0; 3]);
        for sp in &p.sps {
            let mut classes: Vec<&str> = sp.support.iter().map(|s| s.class.as_str()).collect();
            classes.sort();
            classes.dedup();
            assert_eq!(classes.len(), 2);
        }
        p.normalize().unwrap();
    }

    #[test]
    fn zero_spread_gives_the_mean() {
        let load = LoadModel { spread: 0.0, ..Default::default() };
        for spec in generate_instances(&seven_cell_preset(), &load, 5).unwrap() {
            assert!(spec.sps.iter().flat_map(|s| &s.support).all(|s| s.users == 100));
        }
    }

    #[test]
    fn generation_is_reproducible_and_order_independent() {
        let load = LoadModel { seed: 42, ..Default::default() };
        let batch = generate_instances(&seven_cell_preset(), &load, 10).unwrap();
        assert_eq!(batch, generate_instances(&seven_cell_preset(), &load, 10).unwrap());
        assert_eq!(batch[7], generate_instance(&seven_cell_preset(), &load, 7).unwrap());
        assert_ne!(batch[0], batch[1]);
    }

    #[test]
    fn sample_mean_is_near_100() {
        for (kind, half_width) in [(Spread::Variance, 2.0), (Spread::StdDev, 5.0)] {
            let load = LoadModel { seed: 9, spread_kind: kind, ..Default::default() };
            let batch = generate_instances(&seven_cell_preset(), &load, 2000).unwrap();
            let all: Vec<f64> = batch.iter().flat_map(|s| s.sps.iter().flat_map(|p| p.support.iter().map(|x| x.users as f64))).collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            assert!((mean - 100.0).abs() <= half_width, "{kind:?}: {mean}");
        }
    }

    #[test]
    fn sweep_budgets() {
        let sweep = budget_sweep(&seven_cell_preset(), 0, &[0.1, 1.0 / 3.0]).unwrap();
        assert_eq!(sweep[0].budgets(), vec![0.1, 0.45, 0.45]);
        for b in sweep[1].budgets() {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(budget_sweep(&seven_cell_preset(), 0, &[1.0]).is_err());
    }

    #[test]
    fn random_family_is_valid() {
        let fam = RandomFamily { seed: 3, ..Default::default() };
        for i in 0..50 {
            let spec = fam.instance(i);
            spec.normalize().unwrap();
            assert_eq!(spec, fam.instance(i));
        }
    }

    proptest! {
        #[test]
        fn sweep_always_sums_to_one(f in 0.01f64..0.99, sp in 0usize..3) {
            let spec = &budget_sweep(&seven_cell_preset(), sp, &[f]).unwrap()[0];
            prop_assert!((spec.budgets().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            spec.normalize().unwrap();
        }

        #[test]
        fn generated_specs_are_valid(seed in any::<u64>(), index in 0u64..1000) {
            let load = LoadModel { seed, spread: 50.0, spread_kind: Spread::StdDev, ..Default::default() };
            generate_instance(&seven_cell_preset(), &load, index).unwrap().normalize().unwrap();
        }
    }
}
