use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use slicemarket::dynamics::{run_dynamics, DynamicsConfig};
use slicemarket::experiment::{compare_schemes, run_experiment, ExperimentConfig, Scheme};
use slicemarket::scenarios::{generate_instance, seven_cell_preset, LoadModel};
use slicemarket::solvers::{nash_welfare, utilitarian_welfare};
use slicemarket::{solve_eg, solve_social_optimal, static_share, Alpha, Market, ScenarioSpec, SolveReport, SolverConfig};

const FULL_SCALE_INSTANCES: usize = 2000;

#[derive(Parser)]
#[command(name = "slicemarket", version, about = "Market-based allocation of network slice resources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one scheme.
    Solve(SolveArgs),
    /// Run the bid dynamics and record the price trace.
    Dynamics(InstanceArgs),
    /// Run a batch experiment.
    Experiment(ExperimentArgs),
    /// Compare ME, SO and SS on one instance across fairness levels.
    Compare(InstanceArgs),
    /// Write scenario files drawn from the preset load model.
    Gen(GenArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Scenario JSON. Defaults to a preset instance drawn with `--seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated fairness levels; `inf` for max-min.
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    alpha: Vec<Alpha>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "me", value_parser = parse_scheme)]
    scheme: Scheme,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    alpha: Vec<Alpha>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Use 2000 instances.
    #[arg(long)]
    full_paper_scale: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    /// Write one file per instance here instead of printing the first.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_alpha(s: &str) -> Result<Alpha, String> {
    let a = match s.trim() {
        "inf" | "infinity" => Alpha::Infinite,
        t => Alpha::from_f64(t.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?),
    };
    a.validate().map_err(|e| e.to_string())?;
    Ok(a)
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: slicemarket::MarketError| e.to_string())
}

fn load_scenario(args: &InstanceArgs) -> Result<ScenarioSpec> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))
        }
        None => Ok(generate_instance(&seven_cell_preset(), &LoadModel { seed: args.seed, ..Default::default() }, 0)?),
    }
}

fn single_market(args: &InstanceArgs) -> Result<Market> {
    let spec = load_scenario(args)?;
    let spec = match args.alpha.as_slice() {
        [] => spec,
        [a] => spec.with_uniform_alpha(*a),
        _ => bail!("--alpha takes a single value for this command"),
    };
    Ok(spec.normalize()?)
}

fn summary(market: &Market, rep: &SolveReport) -> Value {
    let budgets = market.budgets();
    let providers: Vec<Value> = market
        .providers
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let groups: Vec<Value> = p
                .groups
                .iter()
                .zip(&rep.allocation.rates[s])
                .map(|(g, u)| {
                    json!({
                        "cell": market.cells[g.cell].id,
                        "class": market.classes[g.class],
                        "users": g.users,
                        "rate": u,
                        "rate_per_user": u / g.users as f64,
                    })
                })
                .collect();
            json!({
                "name": p.name,
                "alpha": p.alpha,
                "budget": p.budget,
                "utility": rep.utilities[s],
                "spending": rep.spending[s],
                "groups": groups,
            })
        })
        .collect();
    let prices: Vec<Value> = (0..market.n_resources())
        .map(|r| {
            let (cell, resource) = market.resource_label(r);
            json!({ "cell": cell, "resource": resource, "price": rep.prices[r] })
        })
        .collect();
    json!({
        "method": rep.method,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "surrogate": rep.surrogate,
        "welfare": utilitarian_welfare(&rep.utilities, &budgets),
        "nash_welfare": nash_welfare(&rep.utilities, &budgets).ok(),
        "residuals": rep.residuals,
        "dual_value": rep.dual_value,
        "providers": providers,
        "prices": prices,
    })
}

fn emit_json(value: &Value, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let market = single_market(&args.instance)?;
    let cfg = SolverConfig::default();
    let rep = match args.scheme {
        Scheme::Me => solve_eg(&market, &cfg)?,
        Scheme::So => solve_social_optimal(&market, &cfg)?,
        Scheme::Ss => static_share(&market, &cfg)?,
    };
    let mut value = summary(&market, &rep);
    value["scheme"] = json!(args.scheme.to_string());
    emit_json(&value, args.instance.out.as_deref(), "solve.json")
}

fn dynamics(args: InstanceArgs) -> Result<()> {
    let market = single_market(&args)?;
    let rep = run_dynamics(&market, &DynamicsConfig::default())?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("price_trace.csv");
        let mut text = String::from("iteration,cell,resource,price\n");
        for (t, prices) in &rep.price_trace {
            for r in 0..market.n_resources() {
                let (cell, resource) = market.resource_label(r);
                text.push_str(&format!("{t},{cell},{resource},{:.16e}\n", prices[r]));
            }
        }
        let mut potential = String::from("iteration,potential\n");
        for (t, phi) in &rep.potential_trace {
            potential.push_str(&format!("{t},{phi:.16e}\n"));
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        let ppath = dir.join("potential_trace.csv");
        std::fs::write(&ppath, potential).with_context(|| format!("writing {}", ppath.display()))?;
    }
    emit_json(&summary(&market, &rep), args.out.as_deref(), "dynamics.json")
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if !args.scheme.is_empty() {
        cfg.schemes = args.scheme;
    }
    if !args.alpha.is_empty() {
        cfg.alphas = args.alpha;
    }
    if let Some(n) = args.instances {
        cfg.instances = n;
    }
    if args.full_paper_scale {
        cfg.instances = FULL_SCALE_INSTANCES;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    let summary = run_experiment(&cfg)?;
    if summary.unconverged_rows > 0 {
        log::warn!("{} of {} rows did not converge", summary.unconverged_rows, summary.rows);
    }
    let files: Vec<String> = summary.files.iter().map(|f| f.display().to_string()).collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "rows": summary.rows,
            "unconverged_rows": summary.unconverged_rows,
            "files": files,
        }))?
    );
    Ok(())
}

fn compare(args: InstanceArgs) -> Result<()> {
    let spec = load_scenario(&args)?;
    let alphas = if args.alpha.is_empty() {
        vec![Alpha::Finite(1.0), Alpha::Finite(2.0), Alpha::Finite(3.0), Alpha::Finite(5.0)]
    } else {
        args.alpha.clone()
    };
    let reports = compare_schemes(&spec, &alphas, &SolverConfig::default())?;
    emit_json(&serde_json::to_value(&reports)?, args.out.as_deref(), "compare.json")
}

fn gen(args: GenArgs) -> Result<()> {
    let load = LoadModel { seed: args.seed, ..Default::default() };
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for i in 0..args.instances {
                let spec = generate_instance(&seven_cell_preset(), &load, i as u64)?;
                let path = dir.join(format!("instance_{i:04}.json"));
                std::fs::write(&path, spec.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("wrote {} scenarios to {}", args.instances, dir.display());
        }
        None => println!("{}", generate_instance(&seven_cell_preset(), &load, 0)?.to_json()),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Solve(a) => solve(a),
        Command::Dynamics(a) => dynamics(a),
        Command::Experiment(a) => experiment(a),
        Command::Compare(a) => compare(a),
        Command::Gen(a) => gen(a),
    }
}
