use std::collections::BTreeMap;
use std::path::Path;

use slicemarket::experiment::{
    emit_csv, emit_plotdata, evaluate, run_experiment, BudgetSweepConfig, ExperimentConfig, ResultSet, Scheme,
};
use slicemarket::scenarios::seven_cell_preset;
use slicemarket::{static_share, Alpha, SolverConfig};

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        alphas: vec![Alpha::Finite(1.0), Alpha::Finite(2.0)],
        instances: 3,
        budget_sweep: Some(BudgetSweepConfig { fractions: vec![0.2, 0.5], alphas: vec![Alpha::Finite(1.0)], sp: 0 }),
        output_dir: dir.to_path_buf(),
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn empty_result_set_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    emit_csv(&ResultSet::default(), dir.path()).unwrap();
    assert_eq!(
        read(dir.path(), "results.csv"),
        "instance,alpha,scheme,sp,cell,class,rate,utility,welfare,nash_welfare,poa,converged,iterations\n"
    );
    assert_eq!(read(dir.path(), "price_trace.csv"), "iteration,cell,resource,price\n");
    emit_plotdata(&ResultSet::default(), dir.path()).unwrap();
    assert_eq!(read(dir.path(), "plots/welfare.csv").lines().count(), 1);
}

#[test]
fn price_trace_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { schemes: vec![Scheme::Ss], budget_sweep: None, ..small(dir.path()) };
    run_experiment(&cfg).unwrap();
    let text = read(dir.path(), "price_trace.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,cell,resource,price"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[..3], ["0", "cell1", "cpu"]);
    assert!(first[3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(text.lines().skip(1).count() % 21, 0);
}

#[test]
fn static_share_rows_match_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        load_model: None,
        alphas: vec![Alpha::Finite(1.0)],
        schemes: vec![Scheme::Ss],
        budget_sweep: None,
        convergence_trace: false,
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let set = evaluate(&cfg).unwrap();
    let market = seven_cell_preset().normalize().unwrap();
    let groups: usize = market.providers.iter().map(|p| p.groups.len()).sum();
    assert_eq!(set.rows.len(), groups);
    let ss = static_share(&market, &SolverConfig::default()).unwrap();
    let mut i = 0;
    for (s, p) in market.providers.iter().enumerate() {
        for (g, group) in p.groups.iter().enumerate() {
            let row = &set.rows[i];
            assert_eq!((row.scheme, row.sp.as_str()), (Scheme::Ss, p.name.as_str()));
            assert!(row.converged);
            assert!((row.rate - ss.allocation.rates[s][g] / group.users as f64).abs() < 1e-15);
            i += 1;
        }
    }
}

#[test]
fn welfare_table_matches_independent_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(dir.path())).unwrap();

    let results = read(dir.path(), "results.csv");
    let mut per_instance: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for line in results.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        per_instance.insert((f[1].into(), f[2].into(), f[0].into()), f[8].parse().unwrap());
    }
    let mut samples: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for ((alpha, scheme, _), w) in per_instance {
        samples.entry((alpha, scheme)).or_default().push(w);
    }

    let table = read(dir.path(), "plots/welfare.csv");
    let mut checked = 0;
    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let xs = &samples[&(f[0].to_string(), f[1].to_string())];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (m, v): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((m - mean).abs() <= 1e-9 * mean.abs().max(1.0), "{line}");
        assert!((v - var).abs() <= 1e-9 * var.abs().max(1.0), "{line}");
        assert_eq!(f[7], xs.len().to_string());
        checked += 1;
    }
    assert_eq!(checked, 6);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = run_experiment(&ExperimentConfig { jobs: 1, ..small(a.path()) }).unwrap().files;
    run_experiment(&ExperimentConfig { jobs: 3, ..small(b.path()) }).unwrap();
    for f in files_a {
        let rel = f.strip_prefix(a.path()).unwrap();
        assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
}

#[test]
fn me_rows_are_consistent_with_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let set = evaluate(&ExperimentConfig { schemes: vec![Scheme::Me], ..small(dir.path()) }).unwrap();
    assert!(set.rows.iter().all(|r| r.converged));
    for r in &set.sweep {
        assert!(r.converged && r.user_rate > 0.0);
    }
}

#[test]
fn invalid_config_reports_field_path() {
    let err = ExperimentConfig::from_json(r#"{"schemes": []}"#).unwrap_err();
    assert!(err.to_string().contains("schemes"));
    let err = ExperimentConfig::from_json(r#"{"budget_sweep": {"alphas": [1, "two"]}}"#).unwrap_err();
    assert!(err.to_string().contains("budget_sweep.alphas[1]"), "{err}");
}
