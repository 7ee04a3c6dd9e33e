//! Cost, constraint and penalty functions of the scheduling problem and
//! their gradients.
//!
//! The allocation `x` holds one simplex vector per network state. The
//! constraint vector `h(x; y)` stacks, in this order, the rate-stability
//! rows (one per link) and the power-budget rows (one per mode index). The
//! penalised objective is
//!
//! ```text
//! g(x, z; y) = f(x; y) + β/α · ‖h(x; y) + z‖₂^α,   ε ≤ z ≤ z_max
//! ```
//!
//! Gradients are the direct derivatives of `g`. With average-power cost,
//! rate-stability and `α = 2` the mode gradient of state `m` is
//! `π(m)·p(m) − β·π(m)·(R(m)G(m))ᵀ(h + z)`; serving a link lowers the
//! penalty whenever its residual is positive.

use crate::error::{Error, Result};
use crate::model::{validate_spec, NetworkSpec};

/// Simplex tolerance for allocation vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Uncertain parameters `y = (π, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertainParams {
    pub pi: Vec<f64>,
    pub a: Vec<f64>,
}

impl UncertainParams {
    pub fn new(pi: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|&p| !(p >= 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Input("state fractions must be a probability vector".into()));
        }
        if a.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Input("arrival rates must be non-negative".into()));
        }
        Ok(Self { pi, a })
    }
}

/// Per-state allocation vectors `x(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationVector {
    per_state: Vec<Vec<f64>>,
}

impl AllocationVector {
    /// Checked constructor: every block must lie on the simplex.
    pub fn new(per_state: Vec<Vec<f64>>) -> Result<Self> {
        let x = Self { per_state };
        if !x.is_on_simplex() {
            return Err(Error::Input("allocation blocks must lie on the probability simplex".into()));
        }
        Ok(x)
    }

    /// Unchecked constructor, for gradient probes and intermediate iterates.
    pub fn from_raw(per_state: Vec<Vec<f64>>) -> Self {
        Self { per_state }
    }

    /// All mass on mode `k` in every state.
    pub fn vertex(mode_counts: &[usize], k: usize) -> Self {
        Self {
            per_state: mode_counts
                .iter()
                .map(|&c| (0..c).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.per_state[m]
    }

    pub fn state_mut(&mut self, m: usize) -> &mut Vec<f64> {
        &mut self.per_state[m]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.per_state
    }

    pub fn is_on_simplex(&self) -> bool {
        self.per_state.iter().all(|b| {
            b.iter().all(|&v| v >= -SIMPLEX_TOLERANCE)
                && (b.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
        })
    }
}

/// Slack vector `z` with `ε ≤ z ≤ z_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryVector(Vec<f64>);

impl AuxiliaryVector {
    pub fn new(z: Vec<f64>, penalty: &PenaltyConfig) -> Result<Self> {
        if z.iter().any(|&v| !(v >= penalty.epsilon && v <= penalty.z_max)) {
            return Err(Error::Input(format!(
                "auxiliary entries must lie in [{}, {}]",
                penalty.epsilon, penalty.z_max
            )));
        }
        Ok(Self(z))
    }

    pub fn floor(len: usize, penalty: &PenaltyConfig) -> Self {
        Self(vec![penalty.epsilon; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub z_max: f64,
}

impl PenaltyConfig {
    pub const DEFAULT_ALPHA: f64 = 2.0;
    pub const DEFAULT_BETA: f64 = 5e3;
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    /// `α = 2`, `β = 5·10³`, `ε = 10⁻³`.
    pub fn with_z_max(z_max: f64) -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
            beta: Self::DEFAULT_BETA,
            epsilon: Self::DEFAULT_EPSILON,
            z_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // α < 2 makes ‖·‖^α non-differentiable at the origin.
        if !(self.alpha >= 2.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be finite and ≥ 2, got {}", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.z_max) || !self.z_max.is_finite() {
            return Err(Error::Config(format!(
                "need 0 < epsilon < z_max, got epsilon = {}, z_max = {}",
                self.epsilon, self.z_max
            )));
        }
        Ok(())
    }
}

/// `2·(a_max·n + max mode power)`: dominates every attainable `|h_i|`.
pub fn default_z_max(net: &NetworkSpec, a_max: f64) -> f64 {
    2.0 * (a_max * net.links as f64 + net.max_power())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    /// `Σ_m π(m)·p(m)ᵀx(m)`.
    AveragePower,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `a − Σ_m π(m)·R(m)G(m)x(m) ≤ 0`.
    RateStability,
    /// `Σ_m π(m)·P(m)x(m) − budget ≤ 0`, `P(m) = diag(mode powers)`; needs
    /// the same mode count in every state.
    PowerBudget { budget: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub cost: CostKind,
    pub constraints: Vec<ConstraintKind>,
    pub penalty: PenaltyConfig,
}

impl ProblemSpec {
    /// Minimum average power subject to rate stability.
    pub fn min_power(penalty: PenaltyConfig) -> Self {
        Self {
            cost: CostKind::AveragePower,
            constraints: vec![ConstraintKind::RateStability],
            penalty,
        }
    }
}

/// A [`ProblemSpec`] bound to a network, with dimensions checked and the
/// routed departure columns `R(m)G(m)` cached.
#[derive(Clone, Debug)]
pub struct Objective {
    net: NetworkSpec,
    spec: ProblemSpec,
    /// `routed[m][k]` = column k of R(m)G(m).
    routed: Vec<Vec<Vec<f64>>>,
    stability: bool,
    budget: Option<Vec<f64>>,
}

impl Objective {
    pub fn new(net: &NetworkSpec, spec: &ProblemSpec) -> Result<Self> {
        if let Some(v) = validate_spec(net).first() {
            return Err(Error::Config(format!("invalid network: {v}")));
        }
        spec.penalty.validate()?;
        if spec.constraints.is_empty() {
            return Err(Error::Config("at least one constraint is required".into()));
        }
        let mut stability = false;
        let mut budget = None;
        for c in &spec.constraints {
            match c {
                ConstraintKind::RateStability if !stability => stability = true,
                ConstraintKind::PowerBudget { budget: b } if budget.is_none() => {
                    let counts = net.mode_counts();
                    if counts.iter().any(|&k| k != counts[0]) {
                        return Err(Error::Dimension(
                            "power-budget rows need the same mode count in every state".into(),
                        ));
                    }
                    if b.len() != counts[0] {
                        return Err(Error::Dimension(format!(
                            "power budget has {} entries for {} modes",
                            b.len(),
                            counts[0]
                        )));
                    }
                    budget = Some(b.clone());
                }
                _ => return Err(Error::Config("each constraint kind may appear once".into())),
            }
        }
        let routed = net
            .states
            .iter()
            .map(|s| {
                (0..s.modes.len())
                    .map(|k| s.routed_departures(k).into_iter().map(|v| v as f64).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            net: net.clone(),
            spec: spec.clone(),
            routed,
            stability,
            budget,
        })
    }

    pub fn network(&self) -> &NetworkSpec {
        &self.net
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn penalty_config(&self) -> &PenaltyConfig {
        &self.spec.penalty
    }

    pub fn routed_column(&self, m: usize, k: usize) -> &[f64] {
        &self.routed[m][k]
    }

    pub fn has_stability_rows(&self) -> bool {
        self.stability
    }

    pub fn stability_rows(&self) -> usize {
        if self.stability {
            self.net.links
        } else {
            0
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.stability_rows() + self.budget.as_ref().map_or(0, Vec::len)
    }

    pub fn budget(&self) -> Option<&[f64]> {
        self.budget.as_deref()
    }

    fn check_dims(&self, x: &AllocationVector, y: &UncertainParams) -> Result<()> {
        let counts = self.net.mode_counts();
        if x.blocks().len() != counts.len()
            || x.blocks().iter().zip(&counts).any(|(b, &c)| b.len() != c)
        {
            return Err(Error::Dimension(format!(
                "allocation blocks {:?} do not match mode counts {counts:?}",
                x.blocks().iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        if y.pi.len() != counts.len() || y.a.len() != self.net.links {
            return Err(Error::Dimension(format!(
                "parameters have {} state fractions and {} rates for {} states and {} links",
                y.pi.len(),
                y.a.len(),
                counts.len(),
                self.net.links
            )));
        }
        Ok(())
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.num_constraints() {
            return Err(Error::Dimension(format!(
                "auxiliary vector has {} entries for {} constraints",
                z.len(),
                self.num_constraints()
            )));
        }
        Ok(())
    }

    pub fn eval_cost(&self, x: &AllocationVector, y: &UncertainParams) -> Result<f64> {
        self.check_dims(x, y)?;
        Ok(match self.spec.cost {
            CostKind::Zero => 0.0,
            CostKind::AveragePower => self
                .net
                .states
                .iter()
                .enumerate()
                .map(|(m, s)| {
                    y.pi[m]
                        * s.modes
                            .iter()
                            .zip(x.state(m))
                            .map(|(mode, xk)| mode.power * xk)
                            .sum::<f64>()
                })
                .sum(),
        })
    }

    pub fn eval_constraints(&self, x: &AllocationVector, y: &UncertainParams) -> Result<Vec<f64>> {
        self.check_dims(x, y)?;
        let mut h = Vec::with_capacity(self.num_constraints());
        if self.stability {
            let mut served = vec![0.0; self.net.links];
            for (m, cols) in self.routed.iter().enumerate() {
                for (col, &xk) in cols.iter().zip(x.state(m)) {
                    let w = y.pi[m] * xk;
                    for (s, c) in served.iter_mut().zip(col) {
                        *s += w * c;
                    }
                }
            }
            h.extend(y.a.iter().zip(&served).map(|(a, s)| a - s));
        }
        if let Some(budget) = &self.budget {
            let mut spent = vec![0.0; budget.len()];
            for (m, s) in self.net.states.iter().enumerate() {
                for (k, (mode, xk)) in s.modes.iter().zip(x.state(m)).enumerate() {
                    spent[k] += y.pi[m] * mode.power * xk;
                }
            }
            h.extend(spent.iter().zip(budget).map(|(s, b)| s - b));
        }
        Ok(h)
    }

    /// `h(x; y) + z`.
    pub fn residual(&self, x: &AllocationVector, z: &[f64], y: &UncertainParams) -> Result<Vec<f64>> {
        self.check_z(z)?;
        let mut r = self.eval_constraints(x, y)?;
        for (ri, zi) in r.iter_mut().zip(z) {
            *ri += zi;
        }
        Ok(r)
    }

    pub fn eval_penalty(&self, x: &AllocationVector, z: &[f64], y: &UncertainParams) -> Result<f64> {
        Ok(penalty_value(&self.residual(x, z, y)?, self.spec.penalty.alpha))
    }

    /// `g = f + β·p`.
    pub fn eval_objective(&self, x: &AllocationVector, z: &[f64], y: &UncertainParams) -> Result<f64> {
        Ok(self.eval_cost(x, y)? + self.spec.penalty.beta * self.eval_penalty(x, z, y)?)
    }

    /// `∇_{x(m)} g` at `(x, z; y)`.
    pub fn grad_x(
        &self,
        x: &AllocationVector,
        z: &[f64],
        y: &UncertainParams,
        m: usize,
    ) -> Result<Vec<f64>> {
        let r = self.residual(x, z, y)?;
        if m >= self.net.num_states() {
            return Err(Error::Dimension(format!("state {m} out of range")));
        }
        Ok(self.grad_x_from_residual(m, y.pi[m], &r))
    }

    /// `∇_z g = β·∇_z p` at `(x, z; y)`.
    pub fn grad_z(&self, x: &AllocationVector, z: &[f64], y: &UncertainParams) -> Result<Vec<f64>> {
        let beta = self.spec.penalty.beta;
        let dp = penalty_gradient(&self.residual(x, z, y)?, self.spec.penalty.alpha);
        Ok(dp.iter().map(|d| beta * d).collect())
    }

    /// Mode gradient of state `m` given the residual `r = h + z` and the
    /// state fraction `π(m)`. Shared by the analytic and queue-based paths.
    pub fn grad_x_from_residual(&self, m: usize, pi_m: f64, residual: &[f64]) -> Vec<f64> {
        let beta = self.spec.penalty.beta;
        let dp = penalty_gradient(residual, self.spec.penalty.alpha);
        let (dp_stab, dp_pow) = dp.split_at(self.stability_rows());
        let state = &self.net.states[m];
        state
            .modes
            .iter()
            .enumerate()
            .map(|(k, mode)| {
                let cost = match self.spec.cost {
                    CostKind::AveragePower => mode.power,
                    CostKind::Zero => 0.0,
                };
                let mut pen = 0.0;
                if self.stability {
                    pen -= dot(&self.routed[m][k], dp_stab);
                }
                if self.budget.is_some() {
                    pen += mode.power * dp_pow[k];
                }
                pi_m * (cost + beta * pen)
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(1/α)·‖r‖₂^α`.
pub fn penalty_value(residual: &[f64], alpha: f64) -> f64 {
    let sq: f64 = residual.iter().map(|x| x * x).sum();
    if alpha == 2.0 {
        0.5 * sq
    } else {
        sq.sqrt().powf(alpha) / alpha
    }
}

/// `∇_r (1/α)‖r‖^α = ‖r‖^(α−2)·r` for `α ≥ 2`.
pub fn penalty_gradient(residual: &[f64], alpha: f64) -> Vec<f64> {
    let scale = if alpha == 2.0 {
        1.0
    } else {
        norm2(residual).powf(alpha - 2.0)
    };
    residual.iter().map(|r| scale * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AllocationMode, RoutingMatrix, StateConfig};

    fn two_link_net() -> NetworkSpec {
        NetworkSpec::single_state(
            2,
            vec![
                AllocationMode::new(vec![1, 0]),
                AllocationMode::new(vec![0, 1]),
                AllocationMode::idle(2),
            ],
        )
    }

    fn spec(cost: CostKind, beta: f64) -> ProblemSpec {
        ProblemSpec {
            cost,
            constraints: vec![ConstraintKind::RateStability],
            penalty: PenaltyConfig {
                alpha: 2.0,
                beta,
                epsilon: 1e-3,
                z_max: 10.0,
            },
        }
    }

    #[test]
    fn zero_cost_is_zero() {
        let net = two_link_net();
        let s = spec(CostKind::Zero, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![1.0], vec![0.3, 0.3]).unwrap();
        let x = AllocationVector::new(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        assert_eq!(obj.eval_cost(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn average_power_weighted_sum() {
        let net = NetworkSpec {
            links: 1,
            states: vec![
                StateConfig {
                    modes: vec![
                        AllocationMode::with_power(vec![0], 1.0),
                        AllocationMode::with_power(vec![1], 2.0),
                    ],
                    routing: RoutingMatrix::identity(1),
                },
                StateConfig {
                    modes: vec![
                        AllocationMode::with_power(vec![0], 0.0),
                        AllocationMode::with_power(vec![1], 4.0),
                    ],
                    routing: RoutingMatrix::identity(1),
                },
            ],
            pi_true: None,
            conflicts: None,
        };
        let s = spec(CostKind::AveragePower, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![0.5, 0.5], vec![0.0]).unwrap();
        let x = AllocationVector::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(obj.eval_cost(&x, &y).unwrap(), 2.5);
    }

    #[test]
    fn default_power_is_squared_norm() {
        let mode = AllocationMode::new(vec![1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(mode.power, 2.0);
        let net = NetworkSpec::single_state(7, vec![mode, AllocationMode::idle(7)]);
        let s = spec(CostKind::AveragePower, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![1.0], vec![0.0; 7]).unwrap();
        let x = AllocationVector::new(vec![vec![0.25, 0.75]]).unwrap();
        assert_eq!(obj.eval_cost(&x, &y).unwrap(), 2.0 * 0.25);
    }

    #[test]
    fn stability_rows() {
        let net = two_link_net();
        let s = spec(CostKind::Zero, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![1.0], vec![0.3, 0.3]).unwrap();
        let h = obj
            .eval_constraints(&AllocationVector::new(vec![vec![0.5, 0.5, 0.0]]).unwrap(), &y)
            .unwrap();
        assert!((h[0] + 0.2).abs() < 1e-15 && (h[1] + 0.2).abs() < 1e-15);
        let h = obj
            .eval_constraints(&AllocationVector::new(vec![vec![0.0, 0.0, 1.0]]).unwrap(), &y)
            .unwrap();
        assert_eq!(h, vec![0.3, 0.3]);
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_value(&[3.0, 4.0], 2.0), 12.5);
        assert_eq!(penalty_value(&[0.0, 0.0], 2.0), 0.0);
        assert!((penalty_value(&[1.0, 1.0], 4.0) - 1.0).abs() < 1e-15);
        assert_eq!(penalty_gradient(&[0.0, 0.0], 3.0), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_closed_forms() {
        let net = two_link_net();
        let s = spec(CostKind::Zero, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![1.0], vec![0.3, 0.3]).unwrap();
        let idle = AllocationVector::new(vec![vec![0.0, 0.0, 1.0]]).unwrap();
        let g = obj.grad_x(&idle, &[0.0, 0.0], &y, 0).unwrap();
        assert!((g[0] + 0.3).abs() < 1e-15);
        assert_eq!(g[2], 0.0);

        let half = AllocationVector::new(vec![vec![0.5, 0.5, 0.0]]).unwrap();
        let gz = obj.grad_z(&half, &[0.1, 0.1], &y).unwrap();
        assert!((gz[0] + 0.1).abs() < 1e-15 && (gz[1] + 0.1).abs() < 1e-15);
        let gz = obj.grad_z(&half, &[0.2, 0.2], &y).unwrap();
        assert!(gz.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn beta_scales_penalty_part_linearly() {
        let net = two_link_net();
        let y = UncertainParams::new(vec![1.0], vec![0.3, 0.2]).unwrap();
        let x = AllocationVector::new(vec![vec![0.1, 0.6, 0.3]]).unwrap();
        let z = [0.05, 0.01];
        let grad = |beta: f64| {
            let s = spec(CostKind::AveragePower, beta);
            Objective::new(&net, &s).unwrap().grad_x(&x, &z, &y, 0).unwrap()
        };
        let s0 = spec(CostKind::AveragePower, 1.0);
        let obj = Objective::new(&net, &s0).unwrap();
        let grad_f: Vec<f64> = net.states[0].modes.iter().map(|m| m.power * 1.0).collect();
        let (g1, g2) = (grad(1.0), grad(2.0));
        for k in 0..3 {
            let lhs = g2[k] - grad_f[k];
            let rhs = 2.0 * (g1[k] - grad_f[k]);
            assert!((lhs - rhs).abs() <= 1e-15 * rhs.abs().max(1.0));
        }
        assert_eq!(obj.num_constraints(), 2);
    }

    #[test]
    fn dimension_and_config_errors() {
        let net = two_link_net();
        let s = spec(CostKind::Zero, 1.0);
        let obj = Objective::new(&net, &s).unwrap();
        let y = UncertainParams::new(vec![1.0], vec![0.3, 0.3]).unwrap();
        let bad = AllocationVector::from_raw(vec![vec![1.0, 0.0]]);
        assert!(matches!(obj.eval_cost(&bad, &y), Err(Error::Dimension(_))));
        let x = AllocationVector::vertex(&[3], 2);
        assert!(matches!(obj.eval_penalty(&x, &[0.0], &y), Err(Error::Dimension(_))));

        let mut s = spec(CostKind::Zero, 1.0);
        s.penalty.alpha = 1.5;
        assert!(matches!(Objective::new(&net, &s), Err(Error::Config(_))));
        let mut s = spec(CostKind::Zero, 1.0);
        s.constraints.clear();
        assert!(Objective::new(&net, &s).is_err());
        let mut s = spec(CostKind::Zero, 1.0);
        s.constraints = vec![ConstraintKind::PowerBudget { budget: vec![1.0] }];
        assert!(matches!(Objective::new(&net, &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn power_budget_rows() {
        let net = two_link_net();
        let s = ProblemSpec {
            cost: CostKind::Zero,
            constraints: vec![
                ConstraintKind::RateStability,
                ConstraintKind::PowerBudget {
                    budget: vec![0.5, 0.5, 0.0],
                },
            ],
            penalty: PenaltyConfig::with_z_max(10.0),
        };
        let obj = Objective::new(&net, &s).unwrap();
        assert_eq!(obj.num_constraints(), 5);
        let y = UncertainParams::new(vec![1.0], vec![0.1, 0.1]).unwrap();
        let x = AllocationVector::new(vec![vec![0.25, 0.25, 0.5]]).unwrap();
        let h = obj.eval_constraints(&x, &y).unwrap();
        assert_eq!(h, vec![-0.15, -0.15, -0.25, -0.25, 0.0]);
    }

    #[test]
    fn auxiliary_bounds() {
        let p = PenaltyConfig::with_z_max(10.0);
        assert!(AuxiliaryVector::new(vec![1e-3, 10.0], &p).is_ok());
        assert!(AuxiliaryVector::new(vec![0.0], &p).is_err());
        assert_eq!(AuxiliaryVector::floor(2, &p).as_slice(), &[1e-3, 1e-3]);
    }
}
