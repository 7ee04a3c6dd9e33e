//! Closed-loop runs: metrics CSV and summary.
//!
//! `metrics.csv` columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `t` | slot |
//! | `state` | network state observed in slot `t` (0-based) |
//! | `mode` | mode chosen (0-based index into the state's modes) |
//! | `f`, `p`, `g` | cost, penalty and `f + β·p` at `(x(t), z(t); y(t))` |
//! | `max_queue` | largest physical queue after slot `t` |
//! | `h_<i>` | constraint `i` at `(x(t); y(t))`: stability rows, then budget rows |
//! | `thr_<i>` | effective throughput `D_i(t)/t` of link `i` |
//! | `arr_<i>` | empirical arrival rate `A_i(t)/t` of link `i` |
//!
//! A run that fails part-way leaves the rows written so far followed by a
//! line starting with `# error`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::Experiment;
use crate::objective::UncertainParams;
use crate::scheduler::{SchedulerOptions, Simulation, SlotRecord};
use crate::solver::{solve_pen_fw, FwOptions, StepRule};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

pub fn metrics_header(constraints: usize, links: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "state", "mode", "f", "p", "g", "max_queue"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..constraints).map(|i| format!("h_{i}")));
    h.extend((0..links).map(|i| format!("thr_{i}")));
    h.extend((0..links).map(|i| format!("arr_{i}")));
    h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// Cost of the static penalised optimum on the true parameters.
    pub f_true: f64,
    pub g_true: f64,
    pub gap_true: f64,
    /// The same on the run's final empirical parameters.
    pub f_empirical: f64,
    pub g_empirical: f64,
    /// `|f(T) − f_true| / max(f_true, 1e-6)`.
    pub relative_cost_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub slots: u64,
    pub seed: u64,
    pub f: f64,
    pub p: f64,
    pub g: f64,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub max_queue: i64,
    pub final_queue: Vec<i64>,
    pub throughput: Vec<f64>,
    pub arrival_rate: Vec<f64>,
    pub state_fraction: Vec<f64>,
    pub oracle: Option<OracleSummary>,
}

impl RunSummary {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("summary: {e}")))
    }
}

/// Everything a finished run produced, kept in memory.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub last: SlotRecord,
    pub simulation: Simulation,
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, r: &SlotRecord, sim: &Simulation) -> Result<()> {
    let t = r.t as f64;
    let mut row: Vec<String> = vec![
        r.t.to_string(),
        r.state.to_string(),
        r.mode.to_string(),
        r.metrics.f.to_string(),
        r.metrics.p.to_string(),
        r.metrics.g.to_string(),
        r.queue.iter().max().copied().unwrap_or(0).to_string(),
    ];
    row.extend(r.metrics.h.iter().map(f64::to_string));
    row.extend(sim.departed().iter().map(|d| (*d as f64 / t).to_string()));
    row.extend(
        sim.empirical()
            .arrivals()
            .total()
            .iter()
            .map(|a| (*a as f64 / t).to_string()),
    );
    w.write_record(&row)?;
    Ok(())
}

/// Run the experiment in memory, handing every slot to `on_slot`.
pub fn run_experiment<F>(exp: &Experiment, options: SchedulerOptions, mut on_slot: F) -> Result<RunOutcome>
where
    F: FnMut(&SlotRecord, &Simulation) -> Result<()>,
{
    let mut sim = Simulation::new(
        exp.objective.clone(),
        exp.arrivals.clone(),
        exp.states.clone(),
        exp.config.seed,
        options,
    )?;
    let mut last = None;
    for _ in 0..exp.config.slots {
        let rec = sim.run_slot()?;
        on_slot(&rec, &sim)?;
        last = Some(rec);
    }
    let last = last.expect("slots ≥ 1");
    let summary = summarize(exp, &sim, &last)?;
    Ok(RunOutcome {
        summary,
        last,
        simulation: sim,
    })
}

fn summarize(exp: &Experiment, sim: &Simulation, last: &SlotRecord) -> Result<RunSummary> {
    let emp = sim.empirical();
    let y = emp.y()?;
    let t = emp.t() as f64;
    let oracle = if exp.config.oracle {
        let y_true = UncertainParams::new(exp.pi_true.clone(), exp.arrivals.rates())?;
        let opts = FwOptions {
            step: StepRule::PairwiseLineSearch,
            trace_every: 0,
            ..Default::default()
        };
        let fw_true = solve_pen_fw(&exp.objective, &y_true, opts)?;
        let fw_emp = solve_pen_fw(&exp.objective, &y, opts)?;
        Some(OracleSummary {
            f_true: fw_true.f_at_x_star,
            g_true: fw_true.g_star,
            gap_true: fw_true.gap,
            f_empirical: fw_emp.f_at_x_star,
            g_empirical: fw_emp.g_star,
            relative_cost_gap: (last.metrics.f - fw_true.f_at_x_star).abs()
                / fw_true.f_at_x_star.max(1e-6),
        })
    } else {
        None
    };
    Ok(RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        config_hash: exp.config_hash.clone(),
        slots: emp.t(),
        seed: exp.config.seed,
        f: last.metrics.f,
        p: last.metrics.p,
        g: last.metrics.g,
        h: last.metrics.h.clone(),
        z: emp.z()?,
        max_queue: sim.max_queue(),
        final_queue: last.queue.clone(),
        throughput: sim.departed().iter().map(|d| *d as f64 / t).collect(),
        arrival_rate: y.a,
        state_fraction: y.pi,
        oracle,
    })
}

/// Run the experiment and write `metrics.csv` and `summary.toml` into
/// `exp.out_dir`.
pub fn simulate(exp: &Experiment, options: SchedulerOptions) -> Result<RunSummary> {
    fs::create_dir_all(&exp.out_dir)?;
    let file = BufWriter::new(File::create(exp.out_dir.join(METRICS_FILE))?);
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(metrics_header(exp.objective.num_constraints(), exp.network.links))?;
    let every = exp.config.report_every;
    let slots = exp.config.slots;
    let result = run_experiment(exp, options, |rec, sim| {
        if rec.t % every == 0 || rec.t == slots {
            write_row(&mut writer, rec, sim)?;
        }
        Ok(())
    });
    writer.flush()?;
    let mut file = writer
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    match result {
        Ok(outcome) => {
            file.flush()?;
            fs::write(exp.out_dir.join(SUMMARY_FILE), outcome.summary.to_toml_string()?)?;
            Ok(outcome.summary)
        }
        Err(e) => {
            writeln!(file, "# error: {}", e.to_string().replace('\n', " "))?;
            file.flush()?;
            Err(e)
        }
    }
}

/// Run several experiments on worker threads; results come back in input
/// order.
pub fn simulate_many(experiments: &[Experiment], options: SchedulerOptions) -> Vec<Result<RunSummary>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = experiments
            .iter()
            .map(|exp| s.spawn(move || simulate(exp, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Numeric("worker thread panicked".into())))
            })
            .collect()
    })
}

