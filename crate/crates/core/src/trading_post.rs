//! Bids, prices and the Trading-Post allocation rule.

use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::model::{Alpha, Market};

/// Per-resource prices of whole (normalized) resources, flat-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(pub Vec<f64>);

impl PriceVector {
    pub fn zeros(n: usize) -> Self {
        PriceVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Index<usize> for PriceVector {
    type Output = f64;
    fn index(&self, r: usize) -> &f64 {
        &self.0[r]
    }
}

/// Prices below this share of the total price mass are measured against the
/// floor when computing relative price changes.
pub const PRICE_CHANGE_FLOOR: f64 = 1e-6;

/// Resources whose price is at most this share of the total price mass are
/// treated as free by the allocation rule.
pub const FREE_PRICE_RATIO: f64 = 1e-200;

/// Largest relative change between two price vectors.
///
/// Prices of surplus resources decay geometrically toward zero and never settle
/// in relative terms, so each change is divided by
/// `max(p, PRICE_CHANGE_FLOOR · Σ p)`.
pub fn relative_price_change(market: &Market, prev: &PriceVector, next: &PriceVector) -> f64 {
    change_over(0..market.n_resources(), next.total(), prev, next)
}

/// Largest relative change among the resources of one cell, floored as in
/// [`relative_price_change`].
pub fn relative_price_change_in_cell(market: &Market, cell: usize, prev: &PriceVector, next: &PriceVector) -> f64 {
    change_over(market.cell_resources(cell), next.total(), prev, next)
}

fn change_over(range: std::ops::Range<usize>, mass: f64, prev: &PriceVector, next: &PriceVector) -> f64 {
    let mut worst: f64 = 0.0;
    for r in range {
        let denom = next[r].max(PRICE_CHANGE_FLOOR * mass);
        let delta = (next[r] - prev[r]).abs();
        if delta > 0.0 {
            worst = worst.max(if denom > 0.0 { delta / denom } else { f64::INFINITY });
        }
    }
    worst
}

/// Spending `b[s][g][j]` of provider `s` for group `g` on the `j`-th consumed
/// resource of that group. Unsupported (cell, class) pairs have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BidTensor {
    pub bids: Vec<Vec<Vec<f64>>>,
}

impl Index<usize> for BidTensor {
    type Output = Vec<Vec<f64>>;
    fn index(&self, s: usize) -> &Self::Output {
        &self.bids[s]
    }
}

impl IndexMut<usize> for BidTensor {
    fn index_mut(&mut self, s: usize) -> &mut Self::Output {
        &mut self.bids[s]
    }
}

impl BidTensor {
    pub fn zeros(market: &Market) -> Self {
        BidTensor {
            bids: market
                .providers
                .iter()
                .map(|p| p.groups.iter().map(|g| vec![0.0; g.demand.len()]).collect())
                .collect(),
        }
    }

    /// Each provider's budget split evenly over its supported
    /// (cell, class, resource) triples.
    pub fn uniform(market: &Market) -> Self {
        let mut out = Self::zeros(market);
        for (s, p) in market.providers.iter().enumerate() {
            let triples: usize = p.groups.iter().map(|g| g.demand.len()).sum();
            let each = p.budget / triples as f64;
            for row in &mut out.bids[s] {
                row.iter_mut().for_each(|b| *b = each);
            }
        }
        out
    }

    /// Random strictly positive budget-exhausting bids. Providers with `α = 1`
    /// keep their per-group spending at `B·w/Σw`, the only spending split the
    /// proportional-fair regime admits.
    pub fn random_feasible<R: Rng + ?Sized>(market: &Market, rng: &mut R) -> Self {
        let mut out = Self::zeros(market);
        for (s, p) in market.providers.iter().enumerate() {
            let proportional = p.alpha == crate::model::Alpha::Finite(1.0);
            let total_w: f64 = p.groups.iter().map(|g| g.weight).sum();
            let mut sum = 0.0;
            for (g, group) in p.groups.iter().enumerate() {
                let raw: Vec<f64> = (0..group.demand.len()).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
                let scale = if proportional {
                    let row: f64 = raw.iter().sum();
                    p.budget * group.weight / total_w / row
                } else {
                    1.0
                };
                for (b, v) in out.bids[s][g].iter_mut().zip(raw) {
                    *b = v * scale;
                    sum += *b;
                }
            }
            if !proportional {
                let scale = p.budget / sum;
                out.bids[s].iter_mut().flatten().for_each(|b| *b *= scale);
            }
        }
        out
    }

    pub fn provider_total(&self, s: usize) -> f64 {
        self.bids[s].iter().flatten().sum()
    }

    /// Spending per group, `b_ck = Σ_r b_ckr`.
    pub fn group_totals(&self, s: usize) -> Vec<f64> {
        self.bids[s].iter().map(|row| row.iter().sum()).collect()
    }

    /// Trading-Post prices `p_r = Σ` of all bids on `r`.
    pub fn prices(&self, market: &Market) -> PriceVector {
        let mut p = PriceVector::zeros(market.n_resources());
        for (s, provider) in market.providers.iter().enumerate() {
            for (g, group) in provider.groups.iter().enumerate() {
                for (j, d) in group.demand.iter().enumerate() {
                    p.0[d.resource] += self.bids[s][g][j];
                }
            }
        }
        p
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.bids.iter().flatten().flatten().copied().collect()
    }

    pub fn from_flat(market: &Market, flat: &[f64]) -> Self {
        let mut out = Self::zeros(market);
        let mut it = flat.iter();
        for b in out.bids.iter_mut().flatten().flatten() {
            *b = *it.next().expect("flat bid vector too short");
        }
        out
    }
}

/// Resource fractions `x[s][g][j]` and group service rates `u[s][g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub amounts: Vec<Vec<Vec<f64>>>,
    pub rates: Vec<Vec<f64>>,
}

impl Allocation {
    /// Leontief bundles `x = u·d` with no waste.
    pub fn from_rates(market: &Market, rates: Vec<Vec<f64>>) -> Self {
        let amounts = market
            .providers
            .iter()
            .zip(&rates)
            .map(|(p, us)| {
                p.groups
                    .iter()
                    .zip(us)
                    .map(|(g, &u)| g.demand.iter().map(|d| u * d.amount).collect())
                    .collect()
            })
            .collect();
        Allocation { amounts, rates }
    }

    /// Total allocated fraction of every resource.
    pub fn usage(&self, market: &Market) -> Vec<f64> {
        let mut used = vec![0.0; market.n_resources()];
        for (s, p) in market.providers.iter().enumerate() {
            for (g, group) in p.groups.iter().enumerate() {
                for (j, d) in group.demand.iter().enumerate() {
                    used[d.resource] += self.amounts[s][g][j];
                }
            }
        }
        used
    }

    /// Spending `Σ p·x` of each provider.
    pub fn spending(&self, market: &Market, prices: &PriceVector) -> Vec<f64> {
        market
            .providers
            .iter()
            .enumerate()
            .map(|(s, p)| {
                p.groups
                    .iter()
                    .enumerate()
                    .flat_map(|(g, group)| {
                        group.demand.iter().enumerate().map(move |(j, d)| (g, j, d.resource))
                    })
                    .map(|(g, j, r)| prices[r] * self.amounts[s][g][j])
                    .sum()
            })
            .collect()
    }

    /// Scale each resource's allocations by `min(1, 1/usage)` and recompute
    /// the Leontief rates.
    pub fn repair_feasibility(&mut self, market: &Market) {
        let used = self.usage(market);
        for (s, p) in market.providers.iter().enumerate() {
            for (g, group) in p.groups.iter().enumerate() {
                for (j, d) in group.demand.iter().enumerate() {
                    if used[d.resource] > 1.0 {
                        self.amounts[s][g][j] /= used[d.resource];
                    }
                }
                self.rates[s][g] = leontief(&self.amounts[s][g], group);
            }
        }
    }
}

fn leontief(amounts: &[f64], group: &crate::model::Group) -> f64 {
    let r = amounts
        .iter()
        .zip(&group.demand)
        .map(|(x, d)| x / d.amount)
        .fold(f64::INFINITY, f64::min);
    if r.is_finite() {
        r.max(0.0)
    } else {
        0.0
    }
}

/// Trading-Post allocation: `p_r = Σ b_r` and each bidder receives `b/p_r`.
///
/// A free resource (nobody bids, or the price is numerically negligible) is
/// handed out as per demand. A group receives `u·d` of it, where `u` is the
/// rate its priced resources already give it. A group with no priced resource
/// at all takes `t·w` under `α = ∞`, with `t` the provider's level on its priced
/// groups, and otherwise as much as the free resources hold. Oversubscribed free
/// resources are scaled down proportionally.
pub fn tp_allocate(bids: &BidTensor, market: &Market) -> (PriceVector, Allocation) {
    let prices = bids.prices(market);
    let threshold = FREE_PRICE_RATIO * prices.total();
    let free = |r: usize| prices[r] <= threshold;
    let mut amounts = BidTensor::zeros(market).bids;
    let mut rates = Vec::with_capacity(market.n_providers());
    let mut free_demand = vec![0.0; market.n_resources()];

    for (s, p) in market.providers.iter().enumerate() {
        let mut us = Vec::with_capacity(p.groups.len());
        let mut priced = Vec::with_capacity(p.groups.len());
        for (g, group) in p.groups.iter().enumerate() {
            let mut u = f64::INFINITY;
            for (j, d) in group.demand.iter().enumerate() {
                if !free(d.resource) {
                    let x = bids[s][g][j] / prices[d.resource];
                    amounts[s][g][j] = x;
                    u = u.min(x / d.amount);
                }
            }
            priced.push(u.is_finite());
            us.push(u);
        }
        let level = p
            .groups
            .iter()
            .zip(&us)
            .filter(|(_, u)| u.is_finite())
            .map(|(g, u)| u / g.weight)
            .fold(f64::INFINITY, f64::min);
        for (g, group) in p.groups.iter().enumerate() {
            if !priced[g] {
                us[g] = match p.alpha {
                    Alpha::Infinite if level.is_finite() => level * group.weight,
                    _ => group.demand.iter().map(|d| 1.0 / d.amount).fold(f64::INFINITY, f64::min),
                };
            }
            for (j, d) in group.demand.iter().enumerate() {
                if free(d.resource) {
                    amounts[s][g][j] = us[g] * d.amount;
                    free_demand[d.resource] += us[g] * d.amount;
                }
            }
        }
        rates.push(us);
    }

    let mut alloc = Allocation { amounts, rates };
    if free_demand.iter().any(|&f| f > 1.0) {
        alloc.repair_feasibility(market);
    }
    (prices, alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellSpec, ClassSpec, ProviderSpec, ResourceSpec, ScenarioSpec, SupportSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// `n_sp` providers, one cell, one class consuming every resource.
    pub(crate) fn single_cell(n_sp: usize, demand: &[f64]) -> Market {
        let names: Vec<String> = (0..demand.len()).map(|r| format!("r{r}")).collect();
        ScenarioSpec {
            schema_version: 1,
            cells: vec![CellSpec {
                id: "c".into(),
                resources: names.iter().map(|n| ResourceSpec { name: n.clone(), capacity: 1.0 }).collect(),
            }],
            classes: vec![ClassSpec {
                name: "k".into(),
                demand: names.iter().cloned().zip(demand.iter().copied()).collect(),
            }],
            sps: (0..n_sp)
                .map(|s| ProviderSpec {
                    name: format!("sp{s}"),
                    budget: 1.0 / n_sp as f64,
                    alpha: Alpha::Finite(1.0),
                    support: vec![SupportSpec { cell: "c".into(), class: "k".into(), users: 1, weight: None }],
                })
                .collect(),
        }
        .normalize()
        .unwrap()
    }

    #[test]
    fn proportional_shares() {
        let m = single_cell(2, &[1.0]);
        let bids = BidTensor { bids: vec![vec![vec![0.3]], vec![vec![0.7]]] };
        let (p, x) = tp_allocate(&bids, &m);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!((x.amounts[0][0][0] - 0.3).abs() < 1e-15);
        assert!((x.amounts[1][0][0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn sole_bidder_takes_everything() {
        let m = single_cell(1, &[1.0]);
        let bids = BidTensor { bids: vec![vec![vec![0.5]]] };
        let (p, x) = tp_allocate(&bids, &m);
        assert_eq!(p[0], 0.5);
        assert_eq!(x.amounts[0][0][0], 1.0);
    }

    #[test]
    fn zero_bid_gets_nothing() {
        let m = single_cell(2, &[1.0]);
        let bids = BidTensor { bids: vec![vec![vec![0.0]], vec![vec![0.4]]] };
        let (p, x) = tp_allocate(&bids, &m);
        assert_eq!(p[0], 0.4);
        assert_eq!(x.amounts[0][0][0], 0.0);
        assert_eq!(x.rates[0][0], 0.0);
    }

    #[test]
    fn unpriced_resource_is_allocated_as_per_demand() {
        let m = single_cell(2, &[0.5, 0.25]);
        // nobody bids on r1; both bid on r0 equally
        let bids = BidTensor { bids: vec![vec![vec![0.5, 0.0]], vec![vec![0.5, 0.0]]] };
        let (p, x) = tp_allocate(&bids, &m);
        assert_eq!(p[1], 0.0);
        // each gets half of r0, rate 0.5/0.5 = 1, so 0.25 of r1
        assert_eq!(x.rates[0][0], 1.0);
        assert_eq!(x.amounts[0][0][1], 0.25);
        assert!(x.usage(&m)[1] <= 1.0);
    }

    #[test]
    fn oversubscribed_free_resource_is_scaled() {
        let m = single_cell(2, &[0.1, 1.0]);
        let bids = BidTensor { bids: vec![vec![vec![0.5, 0.0]], vec![vec![0.5, 0.0]]] };
        let (_, x) = tp_allocate(&bids, &m);
        // rate 5 from r0 would need 5 units of r1 each; capped to half each
        assert!((x.usage(&m)[1] - 1.0).abs() < 1e-12);
        assert!((x.rates[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relative_change_ignores_vanishing_prices() {
        let m = single_cell(1, &[1.0, 1.0]);
        let prev = PriceVector(vec![0.5, 1e-20]);
        let next = PriceVector(vec![0.5, 0.5e-20]);
        assert!(relative_price_change(&m, &prev, &next) < 1e-12);
        let next = PriceVector(vec![0.55, 0.0]);
        assert!((relative_price_change(&m, &prev, &next) - 0.05 / 0.55).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn conservation(seed in any::<u64>(), n_sp in 1usize..5) {
            let m = single_cell(n_sp, &[0.3, 0.1, 0.7]);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bids = BidTensor::random_feasible(&m, &mut rng);
            let (p, x) = tp_allocate(&bids, &m);
            for used in x.usage(&m) {
                prop_assert!((used - 1.0).abs() < 1e-12);
            }
            let spend = x.spending(&m, &p);
            for s in 0..n_sp {
                prop_assert!((spend[s] - bids.provider_total(s)).abs() < 1e-12);
                prop_assert!((bids.provider_total(s) - m.providers[s].budget).abs() < 1e-12);
            }
        }
    }
}
