//! Static solvers with the parameters `y` known: a conditional-gradient
//! (Frank–Wolfe) solver for the penalised problem and an exact LP solver for
//! the original and `ε`-tightened problems on small instances.

pub mod lp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{
    dot, norm2, penalty_gradient, penalty_value, AllocationVector, AuxiliaryVector, CostKind,
    Objective, UncertainParams,
};
use crate::scheduler::{argmin_lowest, choose_aux};
use lp::LinearProgram;

pub const DEFAULT_FW_ITERATIONS: u64 = 100_000;
pub const DEFAULT_FW_TOLERANCE: f64 = 1e-6;
/// Largest total mode count accepted by [`solve_opt_exact_small`].
pub const MAX_EXACT_MODES: usize = 1000;

/// How the Frank–Wolfe step is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepRule {
    /// Move towards the vertex with step `2/(k+2)`.
    #[default]
    OpenLoop,
    /// Pairwise step (mass from the worst supported mode to the best mode in
    /// one state) with exact line search. Converges much faster on the
    /// small, badly conditioned instances used for exact comparisons.
    PairwiseLineSearch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FwOptions {
    pub max_iterations: u64,
    /// Stop once the duality gap falls to this value.
    pub tolerance: f64,
    /// Record every this many iterations in the trace (0 disables it).
    pub trace_every: u64,
    pub step: StepRule,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_FW_ITERATIONS,
            tolerance: DEFAULT_FW_TOLERANCE,
            trace_every: 100,
            step: StepRule::OpenLoop,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FwTraceRow {
    pub iteration: u64,
    pub objective: f64,
    pub best_objective: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub x_star: AllocationVector,
    pub z_star: AuxiliaryVector,
    pub g_star: f64,
    pub f_at_x_star: f64,
    pub penalty_at_star: f64,
    pub iterations: u64,
    /// Smallest duality gap seen.
    pub gap: f64,
    /// Certified lower bound on the penalised optimum.
    pub lower_bound: f64,
    pub converged: bool,
    pub trace: Vec<FwTraceRow>,
}

/// The vertex minimising `⟨grad, ·⟩` over each state's simplex.
pub fn fw_vertex(gradients: &[Vec<f64>]) -> Vec<usize> {
    gradients.iter().map(|g| argmin_lowest(g)).collect()
}

/// Slack that minimises the penalty for fixed `h`: `clamp(−h, ε, z_max)`.
fn best_aux(h: &[f64], epsilon: f64, z_max: f64) -> Vec<f64> {
    h.iter().map(|&v| (-v).clamp(epsilon, z_max)).collect()
}

/// Minimise `g(x, z; y)` by conditional gradient, with step `2/(k+2)`
/// unless `options.step` says otherwise.
///
/// Each iteration solves the two linear subproblems (a vertex of every
/// state's simplex, a corner of the slack box) to get the duality gap and
/// the `x` direction. The slack block is then set to its exact minimiser
/// for the new `x`, which only lowers `g`; the gap at that point is the
/// `x`-block gap of the partially minimised objective.
pub fn solve_pen_fw(objective: &Objective, y: &UncertainParams, options: FwOptions) -> Result<SolverResult> {
    if options.max_iterations == 0 {
        return Err(Error::Input("at least one iteration is required".into()));
    }
    let pen = *objective.penalty_config();
    let counts = objective.network().mode_counts();
    let mut x = AllocationVector::vertex(&counts, 0);
    let mut z = best_aux(&objective.eval_constraints(&x, y)?, pen.epsilon, pen.z_max);

    let mut best: Option<(f64, AllocationVector, Vec<f64>)> = None;
    let mut min_gap = f64::INFINITY;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for k in 0..options.max_iterations {
        iterations = k + 1;
        let r = objective.residual(&x, &z, y)?;
        let g = objective.eval_cost(&x, y)? + pen.beta * penalty_value(&r, pen.alpha);
        let gx: Vec<Vec<f64>> = (0..counts.len())
            .map(|m| objective.grad_x_from_residual(m, y.pi[m], &r))
            .collect();
        let gz: Vec<f64> = penalty_gradient(&r, pen.alpha).iter().map(|d| pen.beta * d).collect();
        if !g.is_finite() || gx.iter().flatten().chain(&gz).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at iteration {k}")));
        }
        let vertex = fw_vertex(&gx);
        let corner = choose_aux(&gz, pen.epsilon, pen.z_max);
        let mut gap = 0.0;
        for (m, (grad, &v)) in gx.iter().zip(&vertex).enumerate() {
            gap += dot(grad, x.state(m)) - grad[v];
        }
        gap += gz
            .iter()
            .zip(z.iter().zip(&corner))
            .map(|(d, (zi, ci))| d * (zi - ci))
            .sum::<f64>();
        let gap = gap.max(0.0);

        if best.as_ref().is_none_or(|(bg, _, _)| g < *bg) {
            best = Some((g, x.clone(), z.clone()));
        }
        min_gap = min_gap.min(gap);
        lower_bound = lower_bound.max(g - gap);
        let best_g = best.as_ref().map_or(g, |b| b.0);
        if options.trace_every > 0 && k % options.trace_every == 0 {
            trace.push(FwTraceRow {
                iteration: k,
                objective: g,
                best_objective: best_g,
                gap,
            });
        }
        if gap <= options.tolerance {
            converged = true;
            break;
        }

        match options.step {
            StepRule::OpenLoop => {
                let gamma = 2.0 / (k as f64 + 2.0);
                for (m, &v) in vertex.iter().enumerate() {
                    for (j, xj) in x.state_mut(m).iter_mut().enumerate() {
                        let s = if j == v { 1.0 } else { 0.0 };
                        *xj += gamma * (s - *xj);
                    }
                }
            }
            StepRule::PairwiseLineSearch => pairwise_step(objective, y, &mut x, &gx, &vertex)?,
        }
        z = best_aux(&objective.eval_constraints(&x, y)?, pen.epsilon, pen.z_max);
    }

    let (g_star, x_star, z_star) = best.expect("at least one iteration ran");
    let f_at_x_star = objective.eval_cost(&x_star, y)?;
    let penalty_at_star = objective.eval_penalty(&x_star, &z_star, y)?;
    Ok(SolverResult {
        x_star,
        z_star: AuxiliaryVector::new(z_star, &pen)?,
        g_star,
        f_at_x_star,
        penalty_at_star,
        iterations,
        gap: min_gap,
        lower_bound,
        converged,
        trace,
    })
}

/// Move mass from the highest-gradient supported mode to the FW vertex in
/// the state with the largest such difference, with the step length that
/// minimises `g` along that line after re-optimising the slack.
fn pairwise_step(
    objective: &Objective,
    y: &UncertainParams,
    x: &mut AllocationVector,
    gx: &[Vec<f64>],
    vertex: &[usize],
) -> Result<()> {
    let mut pick: Option<(usize, usize, f64)> = None;
    for (m, grad) in gx.iter().enumerate() {
        let xm = x.state(m);
        let away = (0..xm.len())
            .filter(|&j| xm[j] > 0.0)
            .fold(None, |acc: Option<usize>, j| match acc {
                Some(a) if grad[a] >= grad[j] => Some(a),
                _ => Some(j),
            })
            .expect("simplex block has support");
        let diff = grad[away] - grad[vertex[m]];
        if pick.is_none_or(|(_, _, d)| diff > d) {
            pick = Some((m, away, diff));
        }
    }
    let (m, away, diff) = pick.expect("at least one state");
    let to = vertex[m];
    if diff <= 0.0 || away == to {
        return Ok(());
    }
    let gamma_max = x.state(m)[away];

    // f and h are affine along the segment
    let h0 = objective.eval_constraints(x, y)?;
    let f0 = objective.eval_cost(x, y)?;
    let mut end = x.clone();
    end.state_mut(m)[away] = 0.0;
    end.state_mut(m)[to] += gamma_max;
    let dh: Vec<f64> = objective
        .eval_constraints(&end, y)?
        .iter()
        .zip(&h0)
        .map(|(a, b)| (a - b) / gamma_max)
        .collect();
    let df = (objective.eval_cost(&end, y)? - f0) / gamma_max;

    let pen = objective.penalty_config();
    let slope = |gamma: f64| {
        let h: Vec<f64> = h0.iter().zip(&dh).map(|(a, d)| a + gamma * d).collect();
        let z = best_aux(&h, pen.epsilon, pen.z_max);
        let r: Vec<f64> = h.iter().zip(&z).map(|(a, b)| a + b).collect();
        df + pen.beta * dot(&penalty_gradient(&r, pen.alpha), &dh)
    };
    let gamma = if slope(gamma_max) <= 0.0 {
        gamma_max
    } else {
        let (mut lo, mut hi) = (0.0, gamma_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    if gamma == gamma_max {
        *x = end;
    } else {
        let xm = x.state_mut(m);
        xm[away] -= gamma;
        xm[to] += gamma;
    }
    Ok(())
}

/// Optima of the original and `ε`-tightened problems and their multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub f0: f64,
    pub f_eps: f64,
    pub x0: AllocationVector,
    pub x_eps: AllocationVector,
    /// Non-negative multipliers of `h ≤ 0`.
    pub lambda0: Vec<f64>,
    /// Non-negative multipliers of `h ≤ −ε`.
    pub lambda_eps: Vec<f64>,
}

impl ExactSolution {
    /// `ε·max(‖λ_ε‖₁, ‖λ_0‖₁)`.
    pub fn sensitivity_bound(&self, epsilon: f64) -> f64 {
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        epsilon * l1(&self.lambda0).max(l1(&self.lambda_eps))
    }

    pub fn sensitivity_holds(&self, epsilon: f64, slack: f64) -> bool {
        (self.f0 - self.f_eps).abs() <= self.sensitivity_bound(epsilon) + slack
    }
}

/// LP form of the problem with constraints `h(x; y) ≤ −shift`.
fn opt_lp(objective: &Objective, y: &UncertainParams, shift: f64) -> (LinearProgram, Vec<usize>) {
    let net = objective.network();
    let counts = net.mode_counts();
    let offsets: Vec<usize> = counts
        .iter()
        .scan(0, |acc, &c| {
            let o = *acc;
            *acc += c;
            Some(o)
        })
        .collect();
    let nvar: usize = counts.iter().sum();
    let mut lp = LinearProgram {
        cost: vec![0.0; nvar],
        ..Default::default()
    };
    for (m, state) in net.states.iter().enumerate() {
        for (k, mode) in state.modes.iter().enumerate() {
            if objective.spec().cost == CostKind::AveragePower {
                lp.cost[offsets[m] + k] = y.pi[m] * mode.power;
            }
        }
        let mut row = vec![0.0; nvar];
        for v in &mut row[offsets[m]..offsets[m] + counts[m]] {
            *v = 1.0;
        }
        lp.a_eq.push(row);
        lp.b_eq.push(1.0);
    }
    if objective.has_stability_rows() {
        for i in 0..net.links {
            let mut row = vec![0.0; nvar];
            for (m, &c) in counts.iter().enumerate() {
                for k in 0..c {
                    row[offsets[m] + k] = -y.pi[m] * objective.routed_column(m, k)[i];
                }
            }
            lp.a_ub.push(row);
            lp.b_ub.push(-y.a[i] - shift);
        }
    }
    if let Some(budget) = objective.budget() {
        for (j, b) in budget.iter().enumerate() {
            let mut row = vec![0.0; nvar];
            for (m, state) in net.states.iter().enumerate() {
                row[offsets[m] + j] = y.pi[m] * state.modes[j].power;
            }
            lp.a_ub.push(row);
            lp.b_ub.push(b - shift);
        }
    }
    (lp, counts)
}

fn unflatten(x: &[f64], counts: &[usize]) -> AllocationVector {
    let mut out = Vec::with_capacity(counts.len());
    let mut at = 0;
    for &c in counts {
        out.push(x[at..at + c].to_vec());
        at += c;
    }
    AllocationVector::from_raw(out)
}

/// Solve the original problem and its `ε`-tightened version exactly.
pub fn solve_opt_exact_small(objective: &Objective, y: &UncertainParams) -> Result<ExactSolution> {
    let total: usize = objective.network().mode_counts().iter().sum();
    if total > MAX_EXACT_MODES {
        return Err(Error::Input(format!(
            "{total} modes exceed the exact-solver limit of {MAX_EXACT_MODES}"
        )));
    }
    let eps = objective.penalty_config().epsilon;
    let (lp0, counts) = opt_lp(objective, y, 0.0);
    let s0 = lp0.solve()?;
    let (lpe, _) = opt_lp(objective, y, eps);
    let se = lpe.solve()?;
    Ok(ExactSolution {
        f0: s0.objective,
        f_eps: se.objective,
        x0: unflatten(&s0.x, &counts),
        x_eps: unflatten(&se.x, &counts),
        lambda0: s0.dual_ub.iter().map(|d| -d).collect(),
        lambda_eps: se.dual_ub.iter().map(|d| -d).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub f_pen: f64,
    pub f_eps: f64,
    /// `f*_ε − f(x*_p)`.
    pub margin: f64,
    pub holds: bool,
}

/// Whether the penalised optimum's cost is below the tightened optimum.
pub fn check_pen_dominance(result: &SolverResult, f_eps: f64, tolerance: f64) -> DominanceReport {
    let margin = f_eps - result.f_at_x_star;
    DominanceReport {
        f_pen: result.f_at_x_star,
        f_eps,
        margin,
        holds: margin >= -tolerance,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `‖h(x*_p) + z*_p‖₂`.
    pub norm: f64,
    /// `ε/2`.
    pub bound: f64,
    pub holds: bool,
}

/// Compare the penalised optimum's residual norm with `ε/2`.
pub fn check_feasibility_bound(
    result: &SolverResult,
    objective: &Objective,
    y: &UncertainParams,
) -> Result<FeasibilityReport> {
    let r = objective.residual(&result.x_star, result.z_star.as_slice(), y)?;
    let norm = norm2(&r);
    let bound = objective.penalty_config().epsilon / 2.0;
    Ok(FeasibilityReport {
        norm,
        bound,
        holds: norm <= bound,
    })
}

/// Largest `λ` such that every link can be served at rate `λ`:
/// `max λ` subject to `Σ_m π(m)·R(m)G(m)x(m) ≥ λ·1`.
pub fn max_uniform_throughput(objective: &Objective, pi: &[f64]) -> Result<f64> {
    let net = objective.network();
    if pi.len() != net.num_states() {
        return Err(Error::Dimension("state distribution length".into()));
    }
    let counts = net.mode_counts();
    let nvar: usize = counts.iter().sum::<usize>() + 1;
    let mut lp = LinearProgram {
        cost: vec![0.0; nvar],
        ..Default::default()
    };
    lp.cost[nvar - 1] = -1.0;
    let mut at = 0;
    for &c in &counts {
        let mut row = vec![0.0; nvar];
        for v in &mut row[at..at + c] {
            *v = 1.0;
        }
        lp.a_eq.push(row);
        lp.b_eq.push(1.0);
        at += c;
    }
    for i in 0..net.links {
        let mut row = vec![0.0; nvar];
        let mut at = 0;
        for (m, &c) in counts.iter().enumerate() {
            for k in 0..c {
                row[at + k] = -pi[m] * objective.routed_column(m, k)[i];
            }
            at += c;
        }
        row[nvar - 1] = 1.0;
        lp.a_ub.push(row);
        lp.b_ub.push(0.0);
    }
    Ok(-lp.solve()?.objective)
}
