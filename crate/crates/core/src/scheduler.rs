//! The per-slot greedy primal-dual scheduler.
//!
//! Each slot the scheduler observes the network state `m` and the slot's
//! arrivals, picks the mode with the smallest entry of `∇_{x(m)} g` and the
//! corner `u` of `[ε, z_max]^c` minimising `∇_z gᵀu`, then folds both into
//! its running averages:
//!
//! ```text
//! x(m)(t) = x(m)(t−1) + (v(m)(t) − x(m)(t−1)) / 1ᵀT(m)(t)
//! z(t)    = z(t−1)    + (u(t)    − z(t−1))    / t
//! ```
//!
//! Gradients at slot `t` are taken at `(x(t−1), z(t−1); y(t))`: the
//! parameters include slot `t`'s own observation. At `t = 1`, `z(0) = ε·1`.
//!
//! Two gradient paths exist. The queue path uses the counter backlog
//! `B(t) = A(t) − Σ_m R(m)G(m)T(m)(t−1)` and reads `h` off as `B(t)/t`;
//! it needs no estimate of `π` or `a`. The analytic path evaluates `h` at
//! the empirical point. They differ only in how the current state's
//! allocation is weighted, by at most `max|R(m)G(m)| / t` per row.
//!
//! `B` counts nominal service. The physical queue, which never goes
//! negative and skips links with too few packets, is tracked separately by
//! [`Simulation`].

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{apply_slot, QueueVector};
use crate::objective::{
    penalty_gradient, penalty_value, AllocationVector, CostKind, Objective, UncertainParams,
};
use crate::stochastic::{
    step_arrivals, step_state, stream_rng, ArrivalModel, CumulativeTracker, StateModel,
    ARRIVAL_STREAM, STATE_STREAM,
};

/// Index of the smallest entry, lowest index on ties.
pub fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Bang-bang slack choice: `ε` where the penalty gradient is `≥ 0`,
/// `z_max` elsewhere.
pub fn choose_aux(grad_z: &[f64], epsilon: f64, z_max: f64) -> Vec<f64> {
    grad_z
        .iter()
        .map(|&g| if g >= 0.0 { epsilon } else { z_max })
        .collect()
}

/// Mode selection from a gradient vector.
pub fn choose_mode(gradient: &[f64]) -> usize {
    argmin_lowest(gradient)
}

/// `prev + (sample − prev) / count`, generic so tests can run it in exact
/// rational arithmetic.
pub fn running_mean_step<N>(prev: N, sample: N, count: N) -> N
where
    N: Clone + std::ops::Add<Output = N> + std::ops::Sub<Output = N> + std::ops::Div<Output = N>,
{
    prev.clone() + (sample - prev) / count
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientPath {
    Queue,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedulerOptions {
    pub gradient: GradientPath,
    /// Compare the two gradient paths every this many slots.
    pub check_every: Option<u64>,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        Self {
            gradient: GradientPath::Queue,
            check_every: if cfg!(debug_assertions) { Some(1000) } else { None },
        }
    }
}

/// One slot's decision.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleDecision {
    pub state: usize,
    pub mode: usize,
    pub gradient: Vec<f64>,
    pub u: Vec<f64>,
    /// Filled in once service has been applied.
    pub effective_departures: Vec<i64>,
}

/// Counters and running averages maintained by the scheduler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalState {
    t: u64,
    /// `T(m)_k`: slots in which mode `k` was chosen in state `m`.
    counts: Vec<Vec<u64>>,
    /// `Z(t) = Σ u(τ)`.
    aux_total: Vec<f64>,
    /// `A(t) − Σ_m R(m)G(m)T(m)`.
    backlog: Vec<i64>,
    /// Total nominal energy `Σ_τ p(m(τ))_{k(τ)}`.
    energy: f64,
    arrivals: CumulativeTracker,
    occupancy: CumulativeTracker,
    x_recursive: Vec<Vec<f64>>,
    z_recursive: Vec<f64>,
    /// State observed for the slot in progress, if any.
    pending: Option<usize>,
}

impl EmpiricalState {
    pub fn new(objective: &Objective, arrival_bound: f64) -> Self {
        let net = objective.network();
        let counts: Vec<Vec<u64>> = net.mode_counts().iter().map(|&k| vec![0; k]).collect();
        let c = objective.num_constraints();
        Self {
            t: 0,
            x_recursive: counts.iter().map(|k| vec![0.0; k.len()]).collect(),
            counts,
            aux_total: vec![0.0; c],
            backlog: vec![0; net.links],
            energy: 0.0,
            arrivals: CumulativeTracker::new(net.links, arrival_bound),
            occupancy: CumulativeTracker::new(net.num_states(), 1.0),
            z_recursive: vec![0.0; c],
            pending: None,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn aux_total(&self) -> &[f64] {
        &self.aux_total
    }

    pub fn backlog(&self) -> &[i64] {
        &self.backlog
    }

    pub fn arrivals(&self) -> &CumulativeTracker {
        &self.arrivals
    }

    pub fn occupancy(&self) -> &CumulativeTracker {
        &self.occupancy
    }

    /// Start slot `t + 1`: record the state and the arrivals.
    pub fn observe_slot(&mut self, state: usize, arrivals: &[i64]) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::Input("previous slot has not been committed".into()));
        }
        let m = self.counts.len();
        if state >= m {
            return Err(Error::Input(format!("state {state} out of range 0..{m}")));
        }
        if arrivals.iter().any(|&a| a < 0) {
            return Err(Error::Input("negative arrivals".into()));
        }
        self.arrivals.push(arrivals)?;
        let mut one_hot = vec![0; m];
        one_hot[state] = 1;
        self.occupancy.push(&one_hot)?;
        for (b, a) in self.backlog.iter_mut().zip(arrivals) {
            *b += a;
        }
        self.t += 1;
        self.pending = Some(state);
        Ok(())
    }

    /// Fold a decision for the observed slot into the counters and the
    /// recursive averages.
    pub fn update_empirical(&mut self, objective: &Objective, decision: &ScheduleDecision) -> Result<()> {
        let m = match self.pending.take() {
            Some(m) if m == decision.state => m,
            other => {
                self.pending = other;
                return Err(Error::Input(format!(
                    "decision for state {} does not match the observed slot",
                    decision.state
                )));
            }
        };
        let k = decision.mode;
        if k >= self.counts[m].len() || decision.u.len() != self.aux_total.len() {
            self.pending = Some(m);
            return Err(Error::Dimension("decision does not fit the problem".into()));
        }
        self.counts[m][k] += 1;
        let visits: u64 = self.counts[m].iter().sum();
        for (j, xj) in self.x_recursive[m].iter_mut().enumerate() {
            let v = if j == k { 1.0 } else { 0.0 };
            *xj = running_mean_step(*xj, v, visits as f64);
        }
        for ((zt, zr), u) in self.aux_total.iter_mut().zip(&mut self.z_recursive).zip(&decision.u) {
            *zt += u;
            *zr = running_mean_step(*zr, *u, self.t as f64);
        }
        let column = objective.routed_column(m, k);
        for (b, c) in self.backlog.iter_mut().zip(column) {
            *b -= *c as i64;
        }
        self.energy += objective.network().states[m].modes[k].power;
        Ok(())
    }

    /// `x(t)` from the counters; states never visited hold the first mode
    /// (their weight `π(m)(t)` is zero).
    pub fn x(&self) -> AllocationVector {
        AllocationVector::from_raw(
            self.counts
                .iter()
                .map(|c| {
                    let total: u64 = c.iter().sum();
                    if total == 0 {
                        (0..c.len()).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()
                    } else {
                        c.iter().map(|&v| v as f64 / total as f64).collect()
                    }
                })
                .collect(),
        )
    }

    /// `x(t)` from the recursion.
    pub fn x_recursive(&self) -> &[Vec<f64>] {
        &self.x_recursive
    }

    pub fn z_recursive(&self) -> &[f64] {
        &self.z_recursive
    }

    /// `y(t) = (S(t)/t, A(t)/t)`.
    pub fn y(&self) -> Result<UncertainParams> {
        Ok(UncertainParams {
            pi: self.occupancy.average()?,
            a: self.arrivals.average()?,
        })
    }

    /// `z(t) = Z(t)/t`.
    pub fn z(&self) -> Result<Vec<f64>> {
        if self.t == 0 {
            return Err(Error::UndefinedAverage);
        }
        Ok(self.aux_total.iter().map(|z| z / self.t as f64).collect())
    }

    /// Slack of the last committed slot, `ε·1` before the first.
    fn z_before(&self, epsilon: f64) -> Vec<f64> {
        let done = self.t - u64::from(self.pending.is_some());
        if done == 0 {
            vec![epsilon; self.aux_total.len()]
        } else {
            self.aux_total.iter().map(|z| z / done as f64).collect()
        }
    }

    /// `Σ_m p(m)_k T(m)_k` per mode index, for power-budget rows.
    fn energy_by_mode(&self, objective: &Objective) -> Vec<f64> {
        let k = objective.budget().map_or(0, <[f64]>::len);
        let mut out = vec![0.0; k];
        for (state, counts) in objective.network().states.iter().zip(&self.counts) {
            for (j, (mode, &c)) in state.modes.iter().zip(counts).enumerate().take(k) {
                out[j] += mode.power * c as f64;
            }
        }
        out
    }

    /// `h` from the counters: `B/t` for stability rows and the scaled energy
    /// counters for budget rows.
    fn counter_constraints(&self, objective: &Objective) -> Vec<f64> {
        let t = self.t as f64;
        let mut h: Vec<f64> = Vec::with_capacity(objective.num_constraints());
        if objective.has_stability_rows() {
            h.extend(self.backlog.iter().map(|&b| b as f64 / t));
        }
        if let Some(budget) = objective.budget() {
            h.extend(
                self.energy_by_mode(objective)
                    .iter()
                    .zip(budget)
                    .map(|(e, b)| e / t - b),
            );
        }
        h
    }

    /// Residual `h + z` used for the pending slot's decision.
    pub fn decision_residual(&self, objective: &Objective, path: GradientPath) -> Result<Vec<f64>> {
        if self.pending.is_none() {
            return Err(Error::Input("no slot observed".into()));
        }
        let z = self.z_before(objective.penalty_config().epsilon);
        match path {
            GradientPath::Queue => {
                let mut r = self.counter_constraints(objective);
                for (ri, zi) in r.iter_mut().zip(&z) {
                    *ri += zi;
                }
                Ok(r)
            }
            // the counters do not hold the pending slot yet, so x() is x(t-1)
            GradientPath::Analytic => objective.residual(&self.x(), &z, &self.y()?),
        }
    }

    /// Largest per-row gap the two decision residuals may show at slot `t`.
    pub fn path_tolerance(&self, objective: &Objective) -> f64 {
        let net = objective.network();
        let scale = (net.max_routed_entry() as f64).max(net.max_power());
        scale / self.t.max(1) as f64 + 1e-9
    }

    pub fn current_state(&self) -> Option<usize> {
        self.pending
    }

    /// `f(t), p(t), g(t), h(t)` at `(x(t), z(t); y(t))`, from the counters.
    pub fn metrics(&self, objective: &Objective) -> Result<SlotMetrics> {
        if self.t == 0 {
            return Err(Error::UndefinedAverage);
        }
        let t = self.t as f64;
        let f = match objective.spec().cost {
            CostKind::AveragePower => self.energy / t,
            CostKind::Zero => 0.0,
        };
        let h = self.counter_constraints(objective);
        let z = self.z()?;
        let r: Vec<f64> = h.iter().zip(&z).map(|(a, b)| a + b).collect();
        let p = penalty_value(&r, objective.penalty_config().alpha);
        Ok(SlotMetrics {
            f,
            p,
            g: f + objective.penalty_config().beta * p,
            h,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotMetrics {
    pub f: f64,
    pub p: f64,
    pub g: f64,
    pub h: Vec<f64>,
}

/// The algorithm's two per-slot steps against an [`EmpiricalState`].
#[derive(Clone, Debug)]
pub struct Scheduler {
    objective: Objective,
    options: SchedulerOptions,
}

impl Scheduler {
    pub fn new(objective: Objective, options: SchedulerOptions) -> Self {
        Self { objective, options }
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn options(&self) -> SchedulerOptions {
        self.options
    }

    /// Decide mode and slack for the slot `empirical` has just observed.
    pub fn decide(&self, empirical: &EmpiricalState) -> Result<ScheduleDecision> {
        let m = empirical
            .current_state()
            .ok_or_else(|| Error::Input("no slot observed".into()))?;
        let t = empirical.t();
        let residual = empirical.decision_residual(&self.objective, self.options.gradient)?;

        if let Some(every) = self.options.check_every {
            if every > 0 && t.is_multiple_of(every) {
                let other = match self.options.gradient {
                    GradientPath::Queue => GradientPath::Analytic,
                    GradientPath::Analytic => GradientPath::Queue,
                };
                let alt = empirical.decision_residual(&self.objective, other)?;
                let deviation = residual
                    .iter()
                    .zip(&alt)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let tolerance = empirical.path_tolerance(&self.objective);
                if deviation > tolerance {
                    return Err(Error::GradientMismatch {
                        t,
                        deviation,
                        tolerance,
                    });
                }
            }
        }

        let pi_m = empirical.occupancy().total()[m] as f64 / t as f64;
        let gradient = self.objective.grad_x_from_residual(m, pi_m, &residual);
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite mode gradient at slot {t}")));
        }
        let mode = choose_mode(&gradient);
        let pen = self.objective.penalty_config();
        let u = choose_aux(&penalty_gradient(&residual, pen.alpha), pen.epsilon, pen.z_max);
        Ok(ScheduleDecision {
            state: m,
            mode,
            gradient,
            u,
            effective_departures: Vec::new(),
        })
    }
}

/// Everything emitted for one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    pub state: usize,
    pub mode: usize,
    pub u: Vec<f64>,
    pub arrivals: Vec<i64>,
    /// Physical queue after the slot.
    pub queue: Vec<i64>,
    pub nominal_departures: Vec<i64>,
    pub effective_departures: Vec<i64>,
    pub metrics: SlotMetrics,
}

/// A full closed-loop run: random processes, scheduler, physical queues.
#[derive(Clone, Debug)]
pub struct Simulation {
    scheduler: Scheduler,
    arrival_model: ArrivalModel,
    state_model: StateModel,
    seed: u64,
    arrival_rng: ChaCha8Rng,
    state_rng: ChaCha8Rng,
    queue: QueueVector,
    empirical: EmpiricalState,
    last_state: Option<usize>,
    departed: Vec<i64>,
    max_queue: i64,
}

impl Simulation {
    pub fn new(
        objective: Objective,
        arrival_model: ArrivalModel,
        state_model: StateModel,
        seed: u64,
        options: SchedulerOptions,
    ) -> Result<Self> {
        let net = objective.network();
        if arrival_model.links() != net.links {
            return Err(Error::Dimension(format!(
                "arrival model has {} links, network {}",
                arrival_model.links(),
                net.links
            )));
        }
        if state_model.num_states() != net.num_states() {
            return Err(Error::Dimension(format!(
                "state model has {} states, network {}",
                state_model.num_states(),
                net.num_states()
            )));
        }
        arrival_model.validate()?;
        state_model.validate()?;
        let links = net.links;
        let empirical = EmpiricalState::new(&objective, arrival_model.a_max() as f64);
        Ok(Self {
            scheduler: Scheduler::new(objective, options),
            arrival_model,
            state_model,
            seed,
            arrival_rng: stream_rng(seed, ARRIVAL_STREAM),
            state_rng: stream_rng(seed, STATE_STREAM),
            queue: QueueVector::zeros(links),
            empirical,
            last_state: None,
            departed: vec![0; links],
            max_queue: 0,
        })
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn objective(&self) -> &Objective {
        self.scheduler.objective()
    }

    pub fn empirical(&self) -> &EmpiricalState {
        &self.empirical
    }

    pub fn queue(&self) -> &QueueVector {
        &self.queue
    }

    pub fn arrival_model(&self) -> &ArrivalModel {
        &self.arrival_model
    }

    pub fn state_model(&self) -> &StateModel {
        &self.state_model
    }

    /// Largest physical queue entry seen so far.
    pub fn max_queue(&self) -> i64 {
        self.max_queue
    }

    /// Cumulative effective departures `D(t)`.
    pub fn departed(&self) -> &[i64] {
        &self.departed
    }

    /// Draw state, draw arrivals, decide, serve, update.
    pub fn run_slot(&mut self) -> Result<SlotRecord> {
        let t = self.empirical.t() + 1;
        let m = step_state(&self.state_model, &mut self.state_rng, self.last_state)?;
        let arrivals = step_arrivals(&self.arrival_model, &mut self.arrival_rng, t)?;
        self.empirical.observe_slot(m, &arrivals)?;
        let mut decision = self.scheduler.decide(&self.empirical)?;

        let state = &self.objective().network().states[m];
        let mode = &state.modes[decision.mode];
        let (queue, effective) = apply_slot(&self.queue, &arrivals, &state.routing, mode)?;
        let nominal = mode.departures.clone();
        decision.effective_departures = effective.clone();

        let objective = self.scheduler.objective();
        self.empirical.update_empirical(objective, &decision)?;
        self.queue = queue;
        self.last_state = Some(m);
        for (d, e) in self.departed.iter_mut().zip(&effective) {
            *d += e;
        }
        self.max_queue = self.max_queue.max(self.queue.max());

        Ok(SlotRecord {
            t,
            state: m,
            mode: decision.mode,
            u: decision.u,
            arrivals,
            queue: self.queue.as_slice().to_vec(),
            nominal_departures: nominal,
            effective_departures: effective,
            metrics: self.empirical.metrics(objective)?,
        })
    }

    pub fn snapshot(&self) -> SimulationSnapshot {
        SimulationSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            seed: self.seed,
            arrival_word_pos: self.arrival_rng.get_word_pos().to_string(),
            state_word_pos: self.state_rng.get_word_pos().to_string(),
            last_state: self.last_state,
            queue: self.queue.clone(),
            departed: self.departed.clone(),
            max_queue: self.max_queue,
            empirical: self.empirical.clone(),
        }
    }

    /// Resume from a snapshot taken of a simulation built from the same
    /// network, problem and models.
    pub fn restore(&mut self, snap: SimulationSnapshot) -> Result<()> {
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported snapshot schema_version {}",
                snap.schema_version
            )));
        }
        let fresh = EmpiricalState::new(self.objective(), self.arrival_model.a_max() as f64);
        let shape = |e: &EmpiricalState| {
            (
                e.counts.iter().map(Vec::len).collect::<Vec<_>>(),
                e.aux_total.len(),
                e.backlog.len(),
            )
        };
        if shape(&fresh) != shape(&snap.empirical) || snap.queue.len() != self.queue.len() {
            return Err(Error::Dimension("snapshot does not match this simulation".into()));
        }
        if snap.empirical.pending.is_some() {
            return Err(Error::Format("snapshot taken mid-slot".into()));
        }
        let parse = |s: &str| {
            s.parse::<u128>()
                .map_err(|e| Error::Format(format!("rng position: {e}")))
        };
        self.seed = snap.seed;
        self.arrival_rng = stream_rng(snap.seed, ARRIVAL_STREAM);
        self.arrival_rng.set_word_pos(parse(&snap.arrival_word_pos)?);
        self.state_rng = stream_rng(snap.seed, STATE_STREAM);
        self.state_rng.set_word_pos(parse(&snap.state_word_pos)?);
        self.last_state = snap.last_state;
        self.queue = snap.queue;
        self.departed = snap.departed;
        self.max_queue = snap.max_queue;
        self.empirical = snap.empirical;
        Ok(())
    }
}

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Checkpoint of a running [`Simulation`], stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSnapshot {
    pub schema_version: u32,
    pub seed: u64,
    /// ChaCha word positions, as decimal strings (they exceed 64 bits).
    pub arrival_word_pos: String,
    pub state_word_pos: String,
    pub last_state: Option<usize>,
    pub queue: QueueVector,
    pub departed: Vec<i64>,
    pub max_queue: i64,
    pub empirical: EmpiricalState,
}

impl SimulationSnapshot {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("snapshot: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("snapshot: {e}")))
    }
}
