//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netsched::model::{
    enumerate_modes, AllocationMode, InterferenceGraph, NetworkSpec, RoutingMatrix, StateConfig,
};
use netsched::objective::{
    AllocationVector, ConstraintKind, CostKind, Objective, PenaltyConfig, ProblemSpec, UncertainParams,
};
use netsched::solver::max_uniform_throughput;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph(rng: &mut ChaCha8Rng, links: usize, density: f64) -> InterferenceGraph {
    let mut edges = Vec::new();
    for i in 0..links {
        for j in i + 1..links {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    InterferenceGraph::new(links, edges).unwrap()
}

/// Identity routing or a random forward chain of next hops.
pub fn random_routing(rng: &mut ChaCha8Rng, links: usize) -> RoutingMatrix {
    if links < 2 || rng.random::<f64>() < 0.5 {
        return RoutingMatrix::identity(links);
    }
    let mut hops = Vec::new();
    for i in 0..links - 1 {
        if rng.random::<f64>() < 0.5 {
            hops.push((i, rng.random_range(i + 1..links)));
        }
    }
    RoutingMatrix::from_next_hops(links, &hops).unwrap()
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub net: NetworkSpec,
    pub spec: ProblemSpec,
    pub objective: Objective,
    pub y: UncertainParams,
}

pub struct InstanceShape {
    pub max_states: usize,
    pub max_links: usize,
    pub routing: bool,
    pub budget: bool,
    pub random_alpha: bool,
    pub beta: Option<f64>,
    pub load: (f64, f64),
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            max_states: 3,
            max_links: 4,
            routing: true,
            budget: true,
            random_alpha: true,
            beta: None,
            load: (0.2, 0.8),
        }
    }
}

/// A random small instance with strictly feasible rates.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: &InstanceShape) -> Instance {
    let states = rng.random_range(1..=shape.max_states);
    let links = rng.random_range(2..=shape.max_links);
    let with_budget = shape.budget && rng.random::<f64>() < 0.3;
    // budget rows need equal mode counts, so those instances share one graph
    let shared = random_graph(rng, links, 0.4);
    let random_powers = rng.random::<f64>() < 0.5;
    let mut state_cfgs = Vec::new();
    for _ in 0..states {
        let graph = if with_budget { shared.clone() } else { random_graph(rng, links, 0.4) };
        let mut modes = enumerate_modes(&graph).unwrap();
        if random_powers {
            for m in &mut modes {
                let served = m.departures.iter().filter(|&&d| d > 0).count() as f64;
                m.power = served * rng.random_range(0.5..2.0);
            }
        }
        if !with_budget && modes.len() > 3 {
            // occasionally scramble mode order
            modes[1..].shuffle(rng);
        }
        let routing = if shape.routing { random_routing(rng, links) } else { RoutingMatrix::identity(links) };
        state_cfgs.push(StateConfig { modes, routing });
    }
    let mut pi: Vec<f64> = (0..states).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    let net = NetworkSpec {
        links,
        states: state_cfgs,
        pi_true: None,
        conflicts: None,
    };
    let alpha = if shape.random_alpha { [2.0, 3.0, 4.0][rng.random_range(0..3)] } else { 2.0 };
    let beta = shape.beta.unwrap_or_else(|| rng.random_range(1.0..1e3));
    let penalty = PenaltyConfig {
        alpha,
        beta,
        epsilon: 1e-3,
        z_max: 2.0 * (links as f64 + net.max_power()),
    };
    let mut spec = ProblemSpec::min_power(penalty);
    let probe = Objective::new(&net, &spec).unwrap();
    let lambda = max_uniform_throughput(&probe, &pi).unwrap();
    let load = rng.random_range(shape.load.0..shape.load.1);
    let a: Vec<f64> = (0..links).map(|_| load * lambda * rng.random_range(0.5..1.0)).collect();
    if with_budget {
        // generous budgets so the problem stays feasible
        let k = net.states[0].modes.len();
        let budget = (0..k).map(|_| rng.random_range(1.0..3.0)).collect();
        spec.constraints.push(ConstraintKind::PowerBudget { budget });
    }
    if rng.random::<f64>() < 0.15 {
        spec.cost = CostKind::Zero;
    }
    let objective = Objective::new(&net, &spec).unwrap();
    Instance {
        net,
        spec,
        objective,
        y: UncertainParams::new(pi, a).unwrap(),
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, net: &NetworkSpec) -> AllocationVector {
    AllocationVector::new(
        net.mode_counts()
            .iter()
            .map(|&c| {
                let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect(),
    )
    .unwrap()
}

pub fn random_aux(rng: &mut ChaCha8Rng, len: usize, pen: &PenaltyConfig) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(pen.epsilon..pen.epsilon + 0.5))
        .collect()
}

/// `h` evaluated from dense matrices built independently of the crate.
pub fn dense_constraints(inst: &Instance, x: &AllocationVector) -> Vec<f64> {
    let n = inst.net.links;
    let mut served = DVector::<f64>::zeros(n);
    for (m, state) in inst.net.states.iter().enumerate() {
        let k = state.modes.len();
        let r = DMatrix::from_fn(n, n, |i, j| state.routing.get(i, j) as f64);
        let g = DMatrix::from_fn(n, k, |i, j| state.modes[j].departures[i] as f64);
        let xm = DVector::from_column_slice(x.state(m));
        served += (r * g * xm) * inst.y.pi[m];
    }
    let mut h: Vec<f64> = Vec::new();
    for c in &inst.spec.constraints {
        match c {
            ConstraintKind::RateStability => {
                h.extend((0..n).map(|i| inst.y.a[i] - served[i]));
            }
            ConstraintKind::PowerBudget { budget } => {
                for (j, b) in budget.iter().enumerate() {
                    let spent: f64 = inst
                        .net
                        .states
                        .iter()
                        .enumerate()
                        .map(|(m, s)| inst.y.pi[m] * s.modes[j].power * x.state(m)[j])
                        .sum();
                    h.push(spent - b);
                }
            }
        }
    }
    h
}

/// Brute-force LP oracle: `min cᵀx` s.t. `A_ub x ≤ b_ub`, `A_eq x = b_eq`,
/// `x ≥ 0`, by enumerating every basis of the slack form.
pub fn brute_force_lp(
    c: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> Option<f64> {
    let n = c.len();
    let mu = a_ub.len();
    let rows = mu + a_eq.len();
    let cols = n + mu;
    let a = DMatrix::from_fn(rows, cols, |i, j| {
        if i < mu {
            if j < n {
                a_ub[i][j]
            } else if j - n == i {
                1.0
            } else {
                0.0
            }
        } else if j < n {
            a_eq[i - mu][j]
        } else {
            0.0
        }
    });
    let b = DVector::from_iterator(rows, b_ub.iter().chain(b_eq).copied());
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..rows).collect();
    if rows > cols {
        return None;
    }
    loop {
        let basis = DMatrix::from_fn(rows, rows, |i, j| a[(i, subset[j])]);
        if let Some(sol) = basis.clone().lu().solve(&b) {
            let residual = (&basis * &sol - &b).amax();
            if residual < 1e-9 && sol.iter().all(|&v| v >= -1e-9) {
                let value: f64 = subset
                    .iter()
                    .zip(sol.iter())
                    .filter(|(&j, _)| j < n)
                    .map(|(&j, v)| c[j] * v)
                    .sum();
                best = Some(best.map_or(value, |b: f64| b.min(value)));
            }
        }
        // next combination in lexicographic order
        let Some(i) = (0..rows).rev().find(|&i| subset[i] < cols - rows + i) else {
            return best;
        };
        subset[i] += 1;
        for j in i + 1..rows {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// `(c, a_ub, b_ub, a_eq, b_eq)`.
pub type DenseLp = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// The problem `min f` s.t. `h ≤ −shift` in dense LP form, built from the
/// network directly.
pub fn dense_lp(inst: &Instance, shift: f64) -> DenseLp {
    let counts = inst.net.mode_counts();
    let nvar: usize = counts.iter().sum();
    let mut c = vec![0.0; nvar];
    let mut a_eq = Vec::new();
    let mut at = 0;
    for (m, state) in inst.net.states.iter().enumerate() {
        let mut row = vec![0.0; nvar];
        for (k, mode) in state.modes.iter().enumerate() {
            if inst.spec.cost == CostKind::AveragePower {
                c[at + k] = inst.y.pi[m] * mode.power;
            }
            row[at + k] = 1.0;
        }
        a_eq.push(row);
        at += state.modes.len();
    }
    let b_eq = vec![1.0; counts.len()];
    let mut a_ub = Vec::new();
    let mut b_ub = Vec::new();
    for con in &inst.spec.constraints {
        match con {
            ConstraintKind::RateStability => {
                for i in 0..inst.net.links {
                    let mut row = vec![0.0; nvar];
                    let mut at = 0;
                    for (m, state) in inst.net.states.iter().enumerate() {
                        for (k, mode) in state.modes.iter().enumerate() {
                            let routed: i64 = (0..inst.net.links)
                                .map(|j| state.routing.get(i, j) * mode.departures[j])
                                .sum();
                            row[at + k] = -inst.y.pi[m] * routed as f64;
                        }
                        at += state.modes.len();
                    }
                    a_ub.push(row);
                    b_ub.push(-inst.y.a[i] - shift);
                }
            }
            ConstraintKind::PowerBudget { budget } => {
                for (j, b) in budget.iter().enumerate() {
                    let mut row = vec![0.0; nvar];
                    let mut at = 0;
                    for (m, state) in inst.net.states.iter().enumerate() {
                        row[at + j] = inst.y.pi[m] * state.modes[j].power;
                        at += state.modes.len();
                    }
                    a_ub.push(row);
                    b_ub.push(b - shift);
                }
            }
        }
    }
    (c, a_ub, b_ub, a_eq, b_eq)
}

/// Central finite-difference gradient of `g` in `x(m)` and `z`.
pub fn fd_gradients(inst: &Instance, x: &AllocationVector, z: &[f64], step: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let g = |x: &AllocationVector, z: &[f64]| inst.objective.eval_objective(x, z, &inst.y).unwrap();
    let mut gx = Vec::new();
    for m in 0..x.blocks().len() {
        let mut row = Vec::new();
        for k in 0..x.state(m).len() {
            let mut plus = x.clone();
            plus.state_mut(m)[k] += step;
            let mut minus = x.clone();
            minus.state_mut(m)[k] -= step;
            row.push((g(&plus, z) - g(&minus, z)) / (2.0 * step));
        }
        gx.push(row);
    }
    let gz = (0..z.len())
        .map(|i| {
            let mut plus = z.to_vec();
            plus[i] += step;
            let mut minus = z.to_vec();
            minus[i] -= step;
            (g(x, &plus) - g(x, &minus)) / (2.0 * step)
        })
        .collect();
    (gx, gz)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Single-link-at-a-time conflict pair network from the examples.
pub fn two_link_network() -> NetworkSpec {
    NetworkSpec::single_state(
        2,
        vec![
            AllocationMode::new(vec![1, 0]),
            AllocationMode::new(vec![0, 1]),
            AllocationMode::idle(2),
        ],
    )
}
