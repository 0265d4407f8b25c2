use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::svg::{Chart, Series};
use super::{ResultRow, ResultSet, Scheme};
use crate::error::MarketError;
use crate::model::Alpha;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

pub const RESULTS_HEADER: [&str; 13] = [
    "instance", "alpha", "scheme", "sp", "cell", "class", "rate", "utility", "welfare", "nash_welfare", "poa", "converged",
    "iterations",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sort key for `α` that places `∞` last.
fn alpha_key(a: Alpha) -> u64 {
    let v = a.value();
    if v.is_infinite() {
        u64::MAX
    } else {
        v.to_bits()
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() < 2 { 0.0 } else { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) };
    (mean, var)
}

fn write_table(path: &Path, header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf, OutputError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    }
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, OutputError> {
    fs::write(path, text).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

/// Write `results.csv`, `budget_sweep.csv` and `price_trace.csv`.
pub fn emit_csv(set: &ResultSet, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let results = set.rows.iter().map(|r| {
        vec![
            r.instance.to_string(),
            r.alpha.to_string(),
            r.scheme.to_string(),
            r.sp.clone(),
            r.cell.clone(),
            r.class.clone(),
            num(r.rate),
            num(r.utility),
            num(r.welfare),
            num(r.nash_welfare),
            num(r.poa),
            r.converged.to_string(),
            r.iterations.to_string(),
        ]
    });
    let sweep = set.sweep.iter().map(|r| {
        vec![
            r.instance.to_string(),
            r.alpha.to_string(),
            num(r.fraction),
            r.sp.clone(),
            num(r.user_rate),
            r.converged.to_string(),
        ]
    });
    let trace = set
        .price_trace
        .iter()
        .map(|t| vec![t.iteration.to_string(), t.cell.clone(), t.resource.clone(), num(t.price)]);
    Ok(vec![
        write_table(&dir.join("results.csv"), &RESULTS_HEADER, results)?,
        write_table(&dir.join("budget_sweep.csv"), &["instance", "alpha", "fraction", "sp", "user_rate", "converged"], sweep)?,
        write_table(&dir.join("price_trace.csv"), &["iteration", "cell", "resource", "price"], trace)?,
    ])
}

/// Mean over instances of a provider's per-class average rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEffectRow {
    pub alpha: Alpha,
    pub scheme: Scheme,
    pub sp: String,
    pub class: String,
    pub mean_rate: f64,
    pub var_rate: f64,
    pub count: usize,
}

/// Per-instance class averages (mean of `u/n` over cells), then mean and
/// sample variance across instances.
pub fn aggregate_alpha_effect(rows: &[ResultRow]) -> Vec<AlphaEffectRow> {
    let mut per_instance: BTreeMap<(u64, Scheme, &str, &str, usize), (Alpha, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        per_instance
            .entry((alpha_key(r.alpha), r.scheme, &r.sp, &r.class, r.instance))
            .or_insert_with(|| (r.alpha, Vec::new()))
            .1
            .push(r.rate);
    }
    let mut grouped: BTreeMap<(u64, Scheme, &str, &str), (Alpha, Vec<f64>)> = BTreeMap::new();
    for ((a, scheme, sp, class, _), (alpha, rates)) in per_instance {
        let avg = rates.iter().sum::<f64>() / rates.len() as f64;
        grouped.entry((a, scheme, sp, class)).or_insert_with(|| (alpha, Vec::new())).1.push(avg);
    }
    grouped
        .into_iter()
        .map(|((_, scheme, sp, class), (alpha, xs))| {
            let (mean_rate, var_rate) = mean_var(&xs);
            AlphaEffectRow { alpha, scheme, sp: sp.to_string(), class: class.to_string(), mean_rate, var_rate, count: xs.len() }
        })
        .collect()
}

/// Largest difference between a provider's mean class rates, keyed by
/// (scheme, provider) and listed in increasing `α`.
pub fn class_rate_gaps(effect: &[AlphaEffectRow]) -> BTreeMap<(Scheme, String), Vec<(Alpha, f64)>> {
    let mut by: BTreeMap<(Scheme, String, u64), (Alpha, f64, f64)> = BTreeMap::new();
    for e in effect {
        let slot = by
            .entry((e.scheme, e.sp.clone(), alpha_key(e.alpha)))
            .or_insert((e.alpha, f64::INFINITY, f64::NEG_INFINITY));
        slot.1 = slot.1.min(e.mean_rate);
        slot.2 = slot.2.max(e.mean_rate);
    }
    let mut out: BTreeMap<(Scheme, String), Vec<(Alpha, f64)>> = BTreeMap::new();
    for ((scheme, sp, _), (alpha, lo, hi)) in by {
        out.entry((scheme, sp)).or_default().push((alpha, hi - lo));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareRow {
    pub alpha: Alpha,
    pub scheme: Scheme,
    pub mean_welfare: f64,
    pub var_welfare: f64,
    pub mean_nash_welfare: f64,
    pub mean_poa: f64,
    pub var_poa: f64,
    pub count: usize,
    pub converged: usize,
}

/// One sample per (instance, α, scheme).
pub fn aggregate_welfare(rows: &[ResultRow]) -> Vec<WelfareRow> {
    let mut samples: BTreeMap<(u64, Scheme, usize), &ResultRow> = BTreeMap::new();
    for r in rows {
        samples.entry((alpha_key(r.alpha), r.scheme, r.instance)).or_insert(r);
    }
    let mut grouped: BTreeMap<(u64, Scheme), Vec<&ResultRow>> = BTreeMap::new();
    for ((a, scheme, _), r) in samples {
        grouped.entry((a, scheme)).or_default().push(r);
    }
    grouped
        .into_iter()
        .map(|((_, scheme), rs)| {
            let pick = |f: fn(&ResultRow) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (mean_welfare, var_welfare) = mean_var(&pick(|r| r.welfare));
            let (mean_poa, var_poa) = mean_var(&pick(|r| r.poa));
            WelfareRow {
                alpha: rs[0].alpha,
                scheme,
                mean_welfare,
                var_welfare,
                mean_nash_welfare: mean_var(&pick(|r| r.nash_welfare)).0,
                mean_poa,
                var_poa,
                count: rs.len(),
                converged: rs.iter().filter(|r| r.converged).count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub alpha: Alpha,
    pub fraction: f64,
    pub sp: String,
    pub mean_rate: f64,
    pub var_rate: f64,
    pub count: usize,
}

pub fn aggregate_sensitivity(set: &ResultSet) -> Vec<SensitivityRow> {
    let mut grouped: BTreeMap<(u64, u64, &str), (Alpha, f64, Vec<f64>)> = BTreeMap::new();
    for r in &set.sweep {
        grouped
            .entry((alpha_key(r.alpha), r.fraction.to_bits(), &r.sp))
            .or_insert_with(|| (r.alpha, r.fraction, Vec::new()))
            .2
            .push(r.user_rate);
    }
    grouped
        .into_iter()
        .map(|((_, _, sp), (alpha, fraction, xs))| {
            let (mean_rate, var_rate) = mean_var(&xs);
            SensitivityRow { alpha, fraction, sp: sp.to_string(), mean_rate, var_rate, count: xs.len() }
        })
        .collect()
}

fn band(mean: f64, var: f64) -> (f64, f64, f64) {
    let sd = var.sqrt();
    (mean, mean - sd, mean + sd)
}

/// Write per-figure CSVs and SVG charts under `dir/plots`.
pub fn emit_plotdata(set: &ResultSet, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots).map_err(|source| OutputError::Io { path: plots.clone(), source })?;
    let mut files = Vec::new();

    let effect = aggregate_alpha_effect(&set.rows);
    files.push(write_table(
        &plots.join("alpha_effect.csv"),
        &["alpha", "scheme", "sp", "class", "mean_rate", "var_rate", "count"],
        effect.iter().map(|e| {
            vec![
                e.alpha.to_string(),
                e.scheme.to_string(),
                e.sp.clone(),
                e.class.clone(),
                num(e.mean_rate),
                num(e.var_rate),
                e.count.to_string(),
            ]
        }),
    )?);
    let mut chart = Chart::new("Average service rate under ME", "alpha", "rate per user");
    let mut series: BTreeMap<String, Series> = BTreeMap::new();
    for e in effect.iter().filter(|e| e.scheme == Scheme::Me && !e.alpha.is_infinite()) {
        let name = format!("{} {}", e.sp, e.class);
        series.entry(name.clone()).or_insert_with(|| Series::new(name)).push(e.alpha.value(), band(e.mean_rate, e.var_rate));
    }
    chart.series = series.into_values().collect();
    files.push(write_text(&plots.join("alpha_effect.svg"), &chart.render())?);

    let welfare = aggregate_welfare(&set.rows);
    files.push(write_table(
        &plots.join("welfare.csv"),
        &["alpha", "scheme", "mean_welfare", "var_welfare", "mean_nash_welfare", "mean_poa", "var_poa", "count", "converged"],
        welfare.iter().map(|w| {
            vec![
                w.alpha.to_string(),
                w.scheme.to_string(),
                num(w.mean_welfare),
                num(w.var_welfare),
                num(w.mean_nash_welfare),
                num(w.mean_poa),
                num(w.var_poa),
                w.count.to_string(),
                w.converged.to_string(),
            ]
        }),
    )?);
    let mut chart = Chart::new("Social welfare", "alpha", "sum of budget-weighted utilities");
    let mut series: BTreeMap<Scheme, Series> = BTreeMap::new();
    for w in welfare.iter().filter(|w| !w.alpha.is_infinite()) {
        series
            .entry(w.scheme)
            .or_insert_with(|| Series::new(w.scheme.to_string()))
            .push(w.alpha.value(), band(w.mean_welfare, w.var_welfare));
    }
    chart.series = series.into_values().collect();
    files.push(write_text(&plots.join("welfare.svg"), &chart.render())?);

    let sens = aggregate_sensitivity(set);
    files.push(write_table(
        &plots.join("sensitivity.csv"),
        &["alpha", "fraction", "sp", "mean_rate", "var_rate", "count"],
        sens.iter().map(|s| {
            vec![s.alpha.to_string(), num(s.fraction), s.sp.clone(), num(s.mean_rate), num(s.var_rate), s.count.to_string()]
        }),
    )?);
    let mut chart = Chart::new("Budget sensitivity under ME", "budget fraction", "rate per user");
    let mut series: BTreeMap<(u64, String), Series> = BTreeMap::new();
    for s in sens.iter().filter(|s| !s.alpha.is_infinite()) {
        series
            .entry((alpha_key(s.alpha), s.sp.clone()))
            .or_insert_with(|| Series::new(format!("{} alpha={}", s.sp, s.alpha)))
            .push(s.fraction, band(s.mean_rate, s.var_rate));
    }
    chart.series = series.into_values().collect();
    files.push(write_text(&plots.join("sensitivity.svg"), &chart.render())?);

    let mut chart = Chart::new("Price convergence", "iteration", "price (log10)");
    chart.log_y = true;
    let mut series: BTreeMap<(&str, &str), Series> = BTreeMap::new();
    for t in &set.price_trace {
        series
            .entry((&t.cell, &t.resource))
            .or_insert_with(|| Series::new(format!("{} {}", t.cell, t.resource)))
            .push(t.iteration as f64, (t.price, t.price, t.price));
    }
    chart.series = series.into_values().collect();
    files.push(write_text(&plots.join("price_trace.svg"), &chart.render())?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(instance: usize, alpha: f64, scheme: Scheme, class: &str, cell: &str, rate: f64, welfare: f64) -> ResultRow {
        ResultRow {
            instance,
            alpha: Alpha::Finite(alpha),
            scheme,
            sp: "SP1".into(),
            cell: cell.into(),
            class: class.into(),
            rate,
            utility: 0.0,
            welfare,
            nash_welfare: 0.0,
            poa: 0.0,
            converged: true,
            iterations: 1,
        }
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0 / 3.0).len(), "3.3333333333333331e-1".len());
    }

    #[test]
    fn class_means_average_cells_then_instances() {
        let rows = vec![
            row(0, 1.0, Scheme::Me, "a", "c1", 1.0, 0.0),
            row(0, 1.0, Scheme::Me, "a", "c2", 3.0, 0.0),
            row(1, 1.0, Scheme::Me, "a", "c1", 4.0, 0.0),
            row(0, 1.0, Scheme::Me, "b", "c1", 1.0, 0.0),
        ];
        let e = aggregate_alpha_effect(&rows);
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].mean_rate, e[0].var_rate, e[0].count), (3.0, 2.0, 2));
        let gaps = class_rate_gaps(&e);
        assert_eq!(gaps[&(Scheme::Me, "SP1".to_string())], vec![(Alpha::Finite(1.0), 2.0)]);
    }

    #[test]
    fn welfare_counts_each_instance_once() {
        let rows = vec![
            row(0, 1.0, Scheme::So, "a", "c1", 0.0, 2.0),
            row(0, 1.0, Scheme::So, "b", "c1", 0.0, 2.0),
            row(1, 1.0, Scheme::So, "a", "c1", 0.0, 4.0),
        ];
        let w = aggregate_welfare(&rows);
        assert_eq!((w[0].mean_welfare, w[0].var_welfare, w[0].count), (3.0, 2.0, 2));
    }

    #[test]
    fn alpha_order_puts_infinity_last() {
        assert!(alpha_key(Alpha::Finite(5.0)) < alpha_key(Alpha::Infinite));
        assert!(alpha_key(Alpha::Finite(0.5)) < alpha_key(Alpha::Finite(2.0)));
    }
}
