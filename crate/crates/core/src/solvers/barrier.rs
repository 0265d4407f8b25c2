//! Log-barrier interior-point method for concave programs over service rates.
//!
//! Maximizes `Σ_s β_s U_s` or `Σ_s β_s log U_s` subject to
//! `Σ u·d ≤ cap` on every resource and `u ≥ 0`. Providers with `α = ∞`
//! are a single scalar `t` with rates `u_g = t·w_g`.

use nalgebra::{DMatrix, DVector};

use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::utility::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    /// Target bound on the suboptimality relative to `1 + |f|`.
    pub tolerance: f64,
    pub max_newton_steps: usize,
    pub growth: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { tolerance: 1e-11, max_newton_steps: 2000, growth: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSolution {
    /// Rates `u[s][g]`; providers outside the program get empty rows.
    pub rates: Vec<Vec<f64>>,
    /// Capacity multipliers per flat resource (0 where unconstrained).
    pub duals: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

const MAX_CENTERING_STEPS: usize = 200;

struct Block {
    sp: usize,
    alpha: Alpha,
    beta: f64,
    start: usize,
    len: usize,
    log_w: Vec<f64>,
}

struct Program {
    blocks: Vec<Block>,
    objective: Objective,
    /// Constraint rows over the program's variables.
    a: DMatrix<f64>,
    caps: DVector<f64>,
    rows: Vec<usize>,
}

/// Value, gradient and Hessian of one block's contribution to `f`.
fn block_terms(block: &Block, objective: Objective, v: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> f64 {
    let x = &v[block.start..block.start + block.len];
    let alpha = match block.alpha {
        Alpha::Infinite => {
            let t = x[0];
            return match objective {
                Objective::Linear => {
                    grad[block.start] += block.beta;
                    block.beta * t
                }
                Objective::Log => {
                    grad[block.start] += block.beta / t;
                    hess[(block.start, block.start)] -= block.beta / (t * t);
                    block.beta * t.ln()
                }
            };
        }
        Alpha::Finite(a) => a,
    };
    let rho = 1.0 - alpha;
    let log_u: Vec<f64> = x.iter().map(|u| u.ln()).collect();
    let terms: Vec<f64> = block.log_w.iter().zip(&log_u).map(|(lw, lu)| lw + rho * lu).collect();
    let lse = log_sum_exp(&terms);
    let pi: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
    let log_value = if alpha == 1.0 {
        pi.iter().zip(&log_u).map(|(p, lu)| p * lu).sum()
    } else {
        lse / rho
    };
    let (value, scale) = match objective {
        Objective::Log => (block.beta * log_value, block.beta),
        Objective::Linear => {
            let u = log_value.exp();
            (block.beta * u, block.beta * u)
        }
    };
    for i in 0..block.len {
        grad[block.start + i] += scale * pi[i] / x[i];
        for j in 0..block.len {
            let pij = pi[i] * pi[j];
            let diag = if i == j { pi[i] } else { 0.0 };
            let h = match objective {
                Objective::Log => (alpha - 1.0) * pij - alpha * diag,
                Objective::Linear => alpha * (pij - diag),
            };
            hess[(block.start + i, block.start + j)] += scale * h / (x[i] * x[j]);
        }
    }
    value
}

impl Program {
    fn build(market: &Market, providers: &[usize], objective: Objective, betas: &[f64], caps: &[f64]) -> Self {
        let mut blocks = Vec::new();
        let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
        for (&s, &beta) in providers.iter().zip(betas) {
            let p = &market.providers[s];
            let start = columns.len();
            if p.alpha.is_infinite() {
                let mut composite = vec![0.0; market.n_resources()];
                for g in &p.groups {
                    for d in &g.demand {
                        composite[d.resource] += g.weight * d.amount;
                    }
                }
                columns.push(composite.iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(r, &a)| (r, a)).collect());
                blocks.push(Block { sp: s, alpha: p.alpha, beta, start, len: 1, log_w: vec![] });
            } else {
                for g in &p.groups {
                    columns.push(g.demand.iter().map(|d| (d.resource, d.amount)).collect());
                }
                blocks.push(Block {
                    sp: s,
                    alpha: p.alpha,
                    beta,
                    start,
                    len: p.groups.len(),
                    log_w: p.groups.iter().map(|g| g.weight.ln()).collect(),
                });
            }
        }
        let mut used = vec![false; market.n_resources()];
        for col in &columns {
            for &(r, _) in col {
                used[r] = true;
            }
        }
        let rows: Vec<usize> = (0..market.n_resources()).filter(|&r| used[r]).collect();
        let mut row_of = vec![usize::MAX; market.n_resources()];
        for (i, &r) in rows.iter().enumerate() {
            row_of[r] = i;
        }
        let mut a = DMatrix::zeros(rows.len(), columns.len());
        for (j, col) in columns.iter().enumerate() {
            for &(r, amount) in col {
                a[(row_of[r], j)] += amount;
            }
        }
        let caps = DVector::from_iterator(rows.len(), rows.iter().map(|&r| caps[r]));
        Program { blocks, objective, a, caps, rows }
    }

    fn n_vars(&self) -> usize {
        self.a.ncols()
    }

    fn objective_terms(&self, v: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> f64 {
        self.blocks.iter().map(|b| block_terms(b, self.objective, v, grad, hess)).sum()
    }

    fn objective_value(&self, v: &[f64]) -> f64 {
        let n = self.n_vars();
        let mut g = vec![0.0; n];
        let mut h = DMatrix::zeros(n, n);
        self.objective_terms(v, &mut g, &mut h)
    }
}

/// Solve the program for the given providers. `betas` weights each
/// provider's term and `caps` gives the capacity of every flat resource.
pub fn solve_program(
    market: &Market,
    providers: &[usize],
    objective: Objective,
    betas: &[f64],
    caps: &[f64],
    config: &BarrierConfig,
) -> Result<ProgramSolution> {
    let prog = Program::build(market, providers, objective, betas, caps);
    let n = prog.n_vars();
    let m = prog.rows.len();
    if n == 0 {
        return Err(MarketError::InvalidScenario("program has no variables".into()));
    }

    let load: Vec<f64> = (0..m).map(|i| prog.a.row(i).sum() / prog.caps[i]).collect();
    let start = 0.5 / load.iter().copied().fold(0.0, f64::max);
    let mut v = DVector::from_element(n, start);
    let mut slack = &prog.caps - &prog.a * &v;

    let f0 = prog.objective_value(v.as_slice());
    let sigma = 1.0 / f0.abs().max(1.0);
    let n_constraints = (m + n) as f64;
    let mut tau = 1.0;
    let mut steps = 0;
    let mut converged = false;

    let barrier = |v: &DVector<f64>, s: &DVector<f64>, tau: f64| -> f64 {
        -tau * sigma * prog.objective_value(v.as_slice()) - s.iter().map(|x| x.ln()).sum::<f64>() - v.iter().map(|x| x.ln()).sum::<f64>()
    };

    'outer: loop {
        let mut previous = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            if steps >= config.max_newton_steps {
                break 'outer;
            }
            steps += 1;
            let mut grad = vec![0.0; n];
            let mut hess = DMatrix::zeros(n, n);
            prog.objective_terms(v.as_slice(), &mut grad, &mut hess);
            let inv_s = slack.map(|s| 1.0 / s);
            let inv_s2 = slack.map(|s| 1.0 / (s * s));
            let mut g = DVector::from_iterator(n, grad.iter().map(|x| -tau * sigma * x));
            g += prog.a.transpose() * &inv_s;
            for i in 0..n {
                g[i] -= 1.0 / v[i];
            }
            let mut h = hess * (-tau * sigma);
            let scaled = DMatrix::from_fn(m, n, |i, j| prog.a[(i, j)] * inv_s2[i].sqrt());
            h += scaled.transpose() * &scaled;
            for i in 0..n {
                h[(i, i)] += 1.0 / (v[i] * v[i]);
            }
            let dv = newton_direction(h, &g)?;
            let decrement = -g.dot(&dv);
            if decrement <= 1e-20 || (decrement < 1e-8 && decrement > 0.5 * previous) {
                break;
            }
            previous = decrement;
            let ds = -(&prog.a * &dv);
            let mut step = 1.0;
            for i in 0..n {
                if dv[i] < 0.0 {
                    step = f64::min(step, -0.99 * v[i] / dv[i]);
                }
            }
            for i in 0..m {
                if ds[i] < 0.0 {
                    step = f64::min(step, -0.99 * slack[i] / ds[i]);
                }
            }
            if decrement < 0.01 {
                v += &dv * step;
                slack += &ds * step;
                continue;
            }
            let current = barrier(&v, &slack, tau);
            loop {
                let cand = &v + &dv * step;
                let cand_s = &slack + &ds * step;
                let value = barrier(&cand, &cand_s, tau);
                if value <= current - 0.25 * step * decrement || step < 1e-14 {
                    v = cand;
                    slack = cand_s;
                    break;
                }
                step *= 0.5;
            }
        }
        let f = prog.objective_value(v.as_slice()) * sigma;
        if n_constraints / tau <= config.tolerance * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        tau *= config.growth;
    }

    let mut rates = vec![Vec::new(); market.n_providers()];
    for b in &prog.blocks {
        let p = &market.providers[b.sp];
        rates[b.sp] = if b.alpha.is_infinite() {
            p.groups.iter().map(|g| v[b.start] * g.weight).collect()
        } else {
            v.as_slice()[b.start..b.start + b.len].to_vec()
        };
    }
    let mut duals = vec![0.0; market.n_resources()];
    for (i, &r) in prog.rows.iter().enumerate() {
        duals[r] = 1.0 / (tau * sigma * slack[i]);
    }
    Ok(ProgramSolution { rates, duals, objective: prog.objective_value(v.as_slice()), newton_steps: steps, converged })
}

fn newton_direction(mut h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(chol) = h.clone().cholesky() {
            return Ok(-chol.solve(g));
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
    }
    Err(MarketError::Numerical("barrier Hessian is not positive definite".into()))
}
