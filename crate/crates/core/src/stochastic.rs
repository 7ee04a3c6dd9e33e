//! Arrival and network-state processes with bounded per-slot increments,
//! and the cumulative trackers whose time averages the scheduler consumes.
//!
//! Randomness comes from ChaCha8 ([`rand_chacha::ChaCha8Rng`]) seeded with
//! `seed_from_u64(seed)`. Each process draws from its own stream
//! (`set_stream`), so adding draws to one process never shifts another.
//! Uniform draws are `random::<f64>()`, i.e. 53 random mantissa bits.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability rows summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Default decay horizon of the drifting-rate model.
pub const DEFAULT_DECAY_HORIZON: f64 = 1e4;

pub const ARRIVAL_STREAM: u64 = 1;
pub const STATE_STREAM: u64 = 2;

/// Independent generator for one process.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Recorded per-slot arrivals, replayed exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalTrace {
    links: usize,
    rows: Vec<Vec<i64>>,
}

impl ArrivalTrace {
    pub fn new(links: usize, rows: Vec<Vec<i64>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != links {
                return Err(Error::Dimension(format!(
                    "trace slot {}: {} entries for {links} links",
                    i + 1,
                    r.len()
                )));
            }
            if r.iter().any(|&a| a < 0) {
                return Err(Error::Input(format!("trace slot {}: negative arrival", i + 1)));
            }
        }
        Ok(Self { links, rows })
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn slot(&self, t: u64) -> Option<&[i64]> {
        let idx = usize::try_from(t.checked_sub(1)?).ok()?;
        self.rows.get(idx).map(Vec::as_slice)
    }

    /// Largest single-slot arrival count in the trace.
    pub fn a_max(&self) -> i64 {
        self.rows.iter().flatten().copied().max().unwrap_or(0)
    }

    /// CSV with columns `t, a_1, …, a_n`; `t` starts at 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.links).map(|i| format!("a_{i}")));
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(i64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a trace written by [`write_csv`](Self::write_csv). Slots must
    /// be consecutive from 1. `label` names the source in error messages.
    pub fn read_csv<R: Read>(input: R, label: &Path) -> Result<Self> {
        let parse_err = |row: usize, msg: String| Error::Parse {
            path: label.to_path_buf(),
            row,
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if header.get(0) != Some("t") {
            return Err(parse_err(1, "first column must be `t`".into()));
        }
        let links = header.len() - 1;
        for (i, name) in header.iter().skip(1).enumerate() {
            if name != format!("a_{}", i + 1) {
                return Err(parse_err(1, format!("unexpected column `{name}`")));
            }
        }
        if links == 0 {
            return Err(parse_err(1, "no arrival columns".into()));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != links + 1 {
                return Err(parse_err(line, format!("expected {} fields", links + 1)));
            }
            let t: u64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| parse_err(line, format!("slot: {e}")))?;
            if t != (i + 1) as u64 {
                return Err(parse_err(line, format!("expected slot {}, found {t}", i + 1)));
            }
            let mut row = Vec::with_capacity(links);
            for f in rec.iter().skip(1) {
                let a: i64 = f
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(line, format!("arrival: {e}")))?;
                if a < 0 {
                    return Err(parse_err(line, "negative arrival".into()));
                }
                row.push(a);
            }
            rows.push(row);
        }
        Ok(Self { links, rows })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalModel {
    /// Entry `i` is Binomial(`a_max`, `rates[i] / a_max`) each slot.
    IidBernoulliBatch { rates: Vec<f64>, a_max: u32 },
    /// Exactly `floor(r·t) − floor(r·(t−1))` packets in slot `t`.
    DeterministicRate { rates: Vec<f64> },
    /// Binomial batches whose mean decays from `initial_rates` towards
    /// `rates` as `rates + (initial_rates − rates)·τ/(τ + t)`.
    DriftingRate {
        rates: Vec<f64>,
        initial_rates: Vec<f64>,
        a_max: u32,
        decay_horizon: f64,
    },
    Replay { trace: ArrivalTrace },
}

impl ArrivalModel {
    pub fn links(&self) -> usize {
        match self {
            Self::IidBernoulliBatch { rates, .. }
            | Self::DeterministicRate { rates }
            | Self::DriftingRate { rates, .. } => rates.len(),
            Self::Replay { trace } => trace.links(),
        }
    }

    /// Per-slot bound on every entry of the increment.
    pub fn a_max(&self) -> i64 {
        match self {
            Self::IidBernoulliBatch { a_max, .. } | Self::DriftingRate { a_max, .. } => {
                i64::from(*a_max)
            }
            Self::DeterministicRate { rates } => {
                rates.iter().map(|r| r.ceil() as i64).max().unwrap_or(0)
            }
            Self::Replay { trace } => trace.a_max(),
        }
    }

    /// Long-run arrival rates `a`.
    pub fn rates(&self) -> Vec<f64> {
        match self {
            Self::IidBernoulliBatch { rates, .. }
            | Self::DeterministicRate { rates }
            | Self::DriftingRate { rates, .. } => rates.clone(),
            Self::Replay { trace } => {
                let t = trace.len().max(1) as f64;
                (0..trace.links())
                    .map(|i| trace.rows.iter().map(|r| r[i] as f64).sum::<f64>() / t)
                    .collect()
            }
        }
    }

    /// Mean of slot `t`'s arrivals.
    pub fn mean_at(&self, t: u64) -> Vec<f64> {
        match self {
            Self::IidBernoulliBatch { rates, .. } => rates.clone(),
            Self::DeterministicRate { rates } => rates
                .iter()
                .map(|r| (r * t as f64).floor() - (r * t.saturating_sub(1) as f64).floor())
                .collect(),
            Self::DriftingRate {
                rates,
                initial_rates,
                decay_horizon,
                ..
            } => {
                let w = decay_horizon / (decay_horizon + t as f64);
                rates
                    .iter()
                    .zip(initial_rates)
                    .map(|(r, r0)| r + (r0 - r) * w)
                    .collect()
            }
            Self::Replay { trace } => trace
                .slot(t)
                .map(|r| r.iter().map(|&a| a as f64).collect())
                .unwrap_or_else(|| vec![0.0; trace.links()]),
        }
    }

    /// `E[A(T)] / T`, the value `A(T)/T` concentrates around.
    pub fn expected_average(&self, horizon: u64) -> Vec<f64> {
        let mut acc = vec![0.0; self.links()];
        for t in 1..=horizon {
            for (a, m) in acc.iter_mut().zip(self.mean_at(t)) {
                *a += m;
            }
        }
        acc.iter().map(|a| a / horizon.max(1) as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let check_rates = |name: &str, rates: &[f64], a_max: Option<u32>| -> Result<()> {
            for (i, &r) in rates.iter().enumerate() {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::Config(format!("{name}[{i}] must be finite and non-negative")));
                }
                if let Some(a_max) = a_max {
                    if r > f64::from(a_max) {
                        return Err(Error::Config(format!(
                            "{name}[{i}] = {r} exceeds the per-slot bound a_max = {a_max}"
                        )));
                    }
                }
            }
            Ok(())
        };
        match self {
            Self::IidBernoulliBatch { rates, a_max } => {
                if *a_max == 0 {
                    return Err(Error::Config("a_max must be positive".into()));
                }
                check_rates("rates", rates, Some(*a_max))
            }
            Self::DeterministicRate { rates } => check_rates("rates", rates, None),
            Self::DriftingRate {
                rates,
                initial_rates,
                a_max,
                decay_horizon,
            } => {
                if *a_max == 0 {
                    return Err(Error::Config("a_max must be positive".into()));
                }
                if initial_rates.len() != rates.len() {
                    return Err(Error::Config("initial_rates and rates differ in length".into()));
                }
                if !(*decay_horizon > 0.0) || !decay_horizon.is_finite() {
                    return Err(Error::Config("decay_horizon must be positive".into()));
                }
                check_rates("rates", rates, Some(*a_max))?;
                check_rates("initial_rates", initial_rates, Some(*a_max))
            }
            Self::Replay { .. } => Ok(()),
        }
    }
}

/// Draw slot `t`'s arrivals (`t ≥ 1`).
pub fn step_arrivals<R: Rng + ?Sized>(model: &ArrivalModel, rng: &mut R, t: u64) -> Result<Vec<i64>> {
    if t == 0 {
        return Err(Error::Input("slots are numbered from 1".into()));
    }
    let binomial = |rng: &mut R, trials: u32, p: f64| -> i64 {
        (0..trials).filter(|_| rng.random::<f64>() < p).count() as i64
    };
    Ok(match model {
        ArrivalModel::IidBernoulliBatch { rates, a_max } => rates
            .iter()
            .map(|&r| binomial(rng, *a_max, r / f64::from(*a_max)))
            .collect(),
        ArrivalModel::DeterministicRate { .. } => {
            model.mean_at(t).into_iter().map(|a| a as i64).collect()
        }
        ArrivalModel::DriftingRate { a_max, .. } => model
            .mean_at(t)
            .into_iter()
            .map(|mean| binomial(rng, *a_max, mean / f64::from(*a_max)))
            .collect(),
        ArrivalModel::Replay { trace } => trace
            .slot(t)
            .ok_or(Error::TraceExhausted(t))?
            .to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateModel {
    IidCategorical { distribution: Vec<f64> },
    /// Row-stochastic transition matrix; the first state is drawn from the
    /// stationary distribution.
    MarkovChain { transition: Vec<Vec<f64>> },
}

impl StateModel {
    pub fn single() -> Self {
        Self::IidCategorical {
            distribution: vec![1.0],
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Self::IidCategorical { distribution } => distribution.len(),
            Self::MarkovChain { transition } => transition.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_row = |what: String, row: &[f64]| -> Result<()> {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Config(format!("{what}: probabilities must be non-negative")));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::Config(format!("{what}: probabilities must sum to 1")));
            }
            Ok(())
        };
        match self {
            Self::IidCategorical { distribution } => {
                if distribution.is_empty() {
                    return Err(Error::Config("distribution is empty".into()));
                }
                check_row("distribution".into(), distribution)
            }
            Self::MarkovChain { transition } => {
                let m = transition.len();
                if m == 0 {
                    return Err(Error::Config("transition matrix is empty".into()));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::Config(format!("transition row {i} has length {}", row.len())));
                    }
                    check_row(format!("transition row {i}"), row)?;
                }
                if !strongly_connected(transition) {
                    return Err(Error::Config("markov chain is not irreducible".into()));
                }
                Ok(())
            }
        }
    }

    /// Long-run state occupancy fractions.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        match self {
            Self::IidCategorical { distribution } => Ok(distribution.clone()),
            Self::MarkovChain { transition } => stationary_distribution(transition),
        }
    }
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let m = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let w = if forward { p[i][j] } else { p[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Solve `π P = π`, `Σ π = 1` for an irreducible chain.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = p.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular stationary system".into()))?;
    Ok(sol.iter().copied().collect())
}

fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draw the next network state (0-based).
pub fn step_state<R: Rng + ?Sized>(
    model: &StateModel,
    rng: &mut R,
    previous: Option<usize>,
) -> Result<usize> {
    match model {
        StateModel::IidCategorical { distribution } => {
            if distribution.len() == 1 {
                return Ok(0);
            }
            Ok(sample_categorical(rng, distribution))
        }
        StateModel::MarkovChain { transition } => match previous {
            Some(prev) => {
                let row = transition
                    .get(prev)
                    .ok_or_else(|| Error::Input(format!("previous state {prev} out of range")))?;
                Ok(sample_categorical(rng, row))
            }
            None => Ok(sample_categorical(rng, &model.stationary()?)),
        },
    }
}

/// Running total `Y(t)` of an integer process with bounded increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativeTracker {
    total: Vec<i64>,
    t: u64,
    increment_bound: f64,
}

impl CumulativeTracker {
    pub fn new(dim: usize, increment_bound: f64) -> Self {
        Self {
            total: vec![0; dim],
            t: 0,
            increment_bound,
        }
    }

    /// Record one slot's increment; its max-norm must not exceed the bound.
    pub fn push(&mut self, increment: &[i64]) -> Result<()> {
        if increment.len() != self.total.len() {
            return Err(Error::Dimension(format!(
                "increment of length {} for tracker of dimension {}",
                increment.len(),
                self.total.len()
            )));
        }
        let norm = increment.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0) as f64;
        if norm > self.increment_bound {
            return Err(Error::IncrementBound {
                norm,
                bound: self.increment_bound,
            });
        }
        for (y, d) in self.total.iter_mut().zip(increment) {
            *y += d;
        }
        self.t += 1;
        Ok(())
    }

    pub fn total(&self) -> &[i64] {
        &self.total
    }

    pub fn slots(&self) -> u64 {
        self.t
    }

    pub fn increment_bound(&self) -> f64 {
        self.increment_bound
    }

    pub fn average(&self) -> Result<Vec<f64>> {
        empirical_average(self)
    }
}

/// `Y(t) / t`.
pub fn empirical_average(tracker: &CumulativeTracker) -> Result<Vec<f64>> {
    if tracker.t == 0 {
        return Err(Error::UndefinedAverage);
    }
    let t = tracker.t as f64;
    Ok(tracker.total.iter().map(|&y| y as f64 / t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_arrivals(model: &ArrivalModel, seed: u64, slots: u64) -> Vec<Vec<i64>> {
        let mut rng = stream_rng(seed, ARRIVAL_STREAM);
        (1..=slots).map(|t| step_arrivals(model, &mut rng, t).unwrap()).collect()
    }

    /// Standard error of a per-slot series' mean by non-overlapping batch
    /// means, which stays honest for autocorrelated (Markov) series.
    fn batch_standard_error(series: &[f64]) -> f64 {
        let batches = 100;
        let len = series.len() / batches;
        let means: Vec<f64> = series
            .chunks(len)
            .take(batches)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let mu = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    }

    #[test]
    fn deterministic_rate_is_exact() {
        let model = ArrivalModel::DeterministicRate { rates: vec![1.0, 0.0] };
        for row in run_arrivals(&model, 0, 5) {
            assert_eq!(row, vec![1, 0]);
        }
        let model = ArrivalModel::DeterministicRate { rates: vec![0.25] };
        let total: i64 = run_arrivals(&model, 0, 400).iter().map(|r| r[0]).sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn iid_rates_converge() {
        let model = ArrivalModel::IidBernoulliBatch {
            rates: vec![0.3, 0.3],
            a_max: 1,
        };
        let rows = run_arrivals(&model, 11, 100_000);
        for i in 0..2 {
            let mean = rows.iter().map(|r| r[i] as f64).sum::<f64>() / rows.len() as f64;
            assert!((mean - 0.3).abs() <= 0.01, "link {i}: {mean}");
        }
    }

    #[test]
    fn drifting_rate_tail_window() {
        let model = ArrivalModel::DriftingRate {
            rates: vec![0.3, 0.2],
            initial_rates: vec![0.05, 0.6],
            a_max: 1,
            decay_horizon: DEFAULT_DECAY_HORIZON,
        };
        let rows = run_arrivals(&model, 5, 100_000);
        let window = &rows[90_000..];
        // slots 90_001..=100_000 still carry about a tenth of the initial offset
        for (i, (rate, start)) in [(0.3, 0.05), (0.2, 0.6)].into_iter().enumerate() {
            let expected = (90_001..=100_000u32)
                .map(|t| rate + (start - rate) * 1e4 / (1e4 + f64::from(t)))
                .sum::<f64>()
                / 10_000.0;
            let mean = window.iter().map(|r| r[i] as f64).sum::<f64>() / window.len() as f64;
            assert!((mean - expected).abs() <= 0.015, "link {i}: {mean} vs {expected}");
            assert!((mean - rate).abs() < (start - rate).abs() / 5.0);
        }
    }

    #[test]
    fn increments_respect_a_max_and_rates_are_checked() {
        let model = ArrivalModel::IidBernoulliBatch {
            rates: vec![2.5, 0.1],
            a_max: 3,
        };
        model.validate().unwrap();
        assert!(run_arrivals(&model, 3, 10_000).iter().flatten().all(|&a| (0..=3).contains(&a)));

        let bad = ArrivalModel::IidBernoulliBatch {
            rates: vec![1.5],
            a_max: 1,
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn arrivals_are_deterministic_per_seed() {
        let model = ArrivalModel::IidBernoulliBatch {
            rates: vec![0.4, 0.1, 0.7],
            a_max: 2,
        };
        assert_eq!(run_arrivals(&model, 9, 500), run_arrivals(&model, 9, 500));
        assert_ne!(run_arrivals(&model, 9, 500), run_arrivals(&model, 10, 500));
    }

    #[test]
    fn single_state_always_zero() {
        let mut rng = stream_rng(1, STATE_STREAM);
        for _ in 0..100 {
            assert_eq!(step_state(&StateModel::single(), &mut rng, None).unwrap(), 0);
        }
    }

    fn occupancy(model: &StateModel, seed: u64, slots: usize) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, STATE_STREAM);
        let mut prev = None;
        let m = model.num_states();
        (0..slots)
            .map(|_| {
                let s = step_state(model, &mut rng, prev).unwrap();
                prev = Some(s);
                (0..m).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
            })
            .collect()
    }

    #[test]
    fn categorical_occupancy() {
        let model = StateModel::IidCategorical {
            distribution: vec![0.5, 0.5],
        };
        let rows = occupancy(&model, 21, 100_000);
        let frac = rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64;
        assert!((frac - 0.5).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn symmetric_markov_chain() {
        let model = StateModel::MarkovChain {
            transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        };
        model.validate().unwrap();
        let pi = model.stationary().unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);
        let rows = occupancy(&model, 4, 100_000);
        let frac = rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn markov_validation() {
        let reducible = StateModel::MarkovChain {
            transition: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        };
        assert!(reducible.validate().is_err());
        let not_stochastic = StateModel::MarkovChain {
            transition: vec![vec![0.7, 0.2], vec![0.5, 0.5]],
        };
        assert!(not_stochastic.validate().is_err());
        // periodic but irreducible is fine; occupancy still converges
        let flip = StateModel::MarkovChain {
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        };
        flip.validate().unwrap();
        assert_eq!(flip.stationary().unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn stationary_of_asymmetric_chain() {
        // detailed balance: π0·0.2 = π1·0.6  →  π = (0.75, 0.25)
        let p = vec![vec![0.8, 0.2], vec![0.6, 0.4]];
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-12 && (pi[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn slln_desk_scale_for_every_model() {
        const T: u64 = 100_000;
        let arrival_models = [
            ArrivalModel::IidBernoulliBatch {
                rates: vec![0.3, 1.2],
                a_max: 2,
            },
            ArrivalModel::DriftingRate {
                rates: vec![0.3, 0.6],
                initial_rates: vec![0.1, 0.9],
                a_max: 1,
                decay_horizon: DEFAULT_DECAY_HORIZON,
            },
        ];
        for model in &arrival_models {
            let rows = run_arrivals(model, 77, T);
            let y = model.expected_average(T);
            for i in 0..model.links() {
                let series: Vec<f64> = rows
                    .iter()
                    .enumerate()
                    .map(|(t, r)| r[i] as f64 - model.mean_at(t as u64 + 1)[i])
                    .collect();
                let avg = rows.iter().map(|r| r[i] as f64).sum::<f64>() / T as f64;
                let se = batch_standard_error(&series);
                assert!((avg - y[i]).abs() <= 3.0 * se, "{model:?} link {i}: |{avg} - {}| > 3·{se}", y[i]);
            }
        }
        let state_models = [
            StateModel::IidCategorical {
                distribution: vec![0.2, 0.3, 0.5],
            },
            StateModel::MarkovChain {
                transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            },
        ];
        for model in &state_models {
            let rows = occupancy(model, 78, T as usize);
            let pi = model.stationary().unwrap();
            for m in 0..model.num_states() {
                let series: Vec<f64> = rows.iter().map(|r| r[m]).collect();
                let avg = series.iter().sum::<f64>() / T as f64;
                let se = batch_standard_error(&series);
                assert!((avg - pi[m]).abs() <= 3.0 * se, "{model:?} state {m}");
            }
        }
    }

    #[test]
    fn tracker_averages() {
        let mut tr = CumulativeTracker::new(2, 20.0);
        assert!(matches!(tr.average(), Err(Error::UndefinedAverage)));
        tr.push(&[1, 0]).unwrap();
        tr.push(&[0, 1]).unwrap();
        assert_eq!(tr.average().unwrap(), vec![0.5, 0.5]);

        let mut tr = CumulativeTracker::new(2, 20.0);
        for _ in 0..10 {
            tr.push(&[1, 2]).unwrap();
        }
        assert_eq!(tr.total(), &[10, 20]);
        assert_eq!(tr.average().unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn tracker_enforces_bound() {
        let mut tr = CumulativeTracker::new(2, 1.0);
        assert!(matches!(tr.push(&[2, 0]), Err(Error::IncrementBound { .. })));
        assert_eq!(tr.slots(), 0);
    }

    #[test]
    fn trace_round_trip_and_replay() {
        let model = ArrivalModel::IidBernoulliBatch {
            rates: vec![0.5, 0.2],
            a_max: 2,
        };
        let rows = run_arrivals(&model, 8, 50);
        let trace = ArrivalTrace::new(2, rows.clone()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,a_1,a_2\n1,"));
        let back = ArrivalTrace::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, trace);

        let replay = ArrivalModel::Replay { trace: back };
        assert_eq!(run_arrivals(&replay, 0, 50), rows);
        let mut rng = stream_rng(0, ARRIVAL_STREAM);
        assert!(matches!(
            step_arrivals(&replay, &mut rng, 51),
            Err(Error::TraceExhausted(51))
        ));
    }

    #[test]
    fn trace_parse_errors_carry_row_numbers() {
        let err = ArrivalTrace::read_csv("t,a_1\n1,0\n3,1\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let err = ArrivalTrace::read_csv("t,a_1\n1,-2\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
        let err = ArrivalTrace::read_csv("t,b\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }
}
