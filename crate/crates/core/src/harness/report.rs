//! Plot data from a finished run directory.
//!
//! `cost.csv` starts with a `# oracle: on` or `# oracle: off` line, then
//! columns `t,f,g` plus `f_oracle` when the run solved the static problem.
//! `sources.csv` has `t`, the running arrival-rate estimate `est_<i>` and a
//! windowed estimate `win_<i>` over the last `window` slots.
//!
//! Both files keep every `⌈T/10⁴⌉`-th slot plus the last one.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::run::{RunSummary, METRICS_FILE, SUMMARY_FILE};

pub const COST_FILE: &str = "cost.csv";
pub const SOURCES_FILE: &str = "sources.csv";
pub const MAX_PLOT_ROWS: u64 = 10_000;
pub const DEFAULT_WINDOW: u64 = 1000;

const FIXED_COLUMNS: [&str; 7] = ["t", "state", "mode", "f", "p", "g", "max_queue"];

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: u64,
    pub state: usize,
    pub mode: usize,
    pub f: f64,
    pub p: f64,
    pub g: f64,
    pub max_queue: i64,
    pub h: Vec<f64>,
    pub thr: Vec<f64>,
    pub arr: Vec<f64>,
}

fn parse_err(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

/// Parse a metrics CSV. `row` numbers in errors are 1-based file lines.
pub fn read_metrics<R: Read>(mut input: R, label: &Path) -> Result<Vec<MetricsRow>> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| parse_err(label, 0, e.to_string()))?;
    if let Some((i, line)) = text.lines().enumerate().find(|(_, l)| l.starts_with('#')) {
        return Err(parse_err(label, i + 1, format!("run did not finish: {line}")));
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(label, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(parse_err(label, 1, "unexpected header"));
    }
    let rest = &header[FIXED_COLUMNS.len()..];
    let count = |prefix: &str| rest.iter().filter(|c| c.starts_with(prefix)).count();
    let (nh, nthr, narr) = (count("h_"), count("thr_"), count("arr_"));
    let expected: Vec<String> = (0..nh)
        .map(|i| format!("h_{i}"))
        .chain((0..nthr).map(|i| format!("thr_{i}")))
        .chain((0..narr).map(|i| format!("arr_{i}")))
        .collect();
    if expected != rest || nthr != narr {
        return Err(parse_err(label, 1, "unexpected header"));
    }

    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(label, line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(label, line, format!("{} fields, expected {}", rec.len(), header.len())));
        }
        let field = |j: usize| &rec[j];
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse::<f64>()
                .map_err(|e| parse_err(label, line, format!("column {}: {e}", header[j])))
        };
        let int = |j: usize| -> Result<i64> {
            field(j)
                .parse::<i64>()
                .map_err(|e| parse_err(label, line, format!("column {}: {e}", header[j])))
        };
        let nonneg = |j: usize| -> Result<u64> {
            u64::try_from(int(j)?).map_err(|_| parse_err(label, line, format!("column {} is negative", header[j])))
        };
        let t = nonneg(0)?;
        if t == 0 || rows.last().is_some_and(|r| r.t >= t) {
            return Err(parse_err(label, line, "t must be positive and increasing"));
        }
        let base = FIXED_COLUMNS.len();
        let span = |from: usize, n: usize| (from..from + n).map(num).collect::<Result<Vec<f64>>>();
        rows.push(MetricsRow {
            t,
            state: nonneg(1)? as usize,
            mode: nonneg(2)? as usize,
            f: num(3)?,
            p: num(4)?,
            g: num(5)?,
            max_queue: int(6)?,
            h: span(base, nh)?,
            thr: span(base + nh, nthr)?,
            arr: span(base + nh + nthr, narr)?,
        });
    }
    if rows.is_empty() {
        return Err(parse_err(label, 2, "no data rows"));
    }
    Ok(rows)
}

/// Indices of rows kept for plotting: `t` divisible by `⌈T/10⁴⌉`, and the
/// last row.
pub fn downsample(rows: &[MetricsRow]) -> Vec<usize> {
    let Some(last) = rows.last() else {
        return Vec::new();
    };
    let stride = last.t.div_ceil(MAX_PLOT_ROWS).max(1);
    let mut keep: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.t % stride == 0)
        .map(|(i, _)| i)
        .collect();
    if keep.last() != Some(&(rows.len() - 1)) {
        keep.push(rows.len() - 1);
    }
    keep
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub cost: PathBuf,
    pub sources: PathBuf,
    pub rows: usize,
}

/// Write `cost.csv` and `sources.csv` for the run in `run_dir` into `out_dir`.
pub fn report(run_dir: &Path, out_dir: &Path, window: u64) -> Result<ReportFiles> {
    if window == 0 {
        return Err(Error::Input("window must be at least 1 slot".into()));
    }
    let metrics_path = run_dir.join(METRICS_FILE);
    let file = fs::File::open(&metrics_path).map_err(|e| {
        Error::Input(format!("{} is not a run directory: {e}", run_dir.display()))
    })?;
    let rows = read_metrics(file, &metrics_path)?;
    let summary_path = run_dir.join(SUMMARY_FILE);
    let summary = RunSummary::from_toml_str(&fs::read_to_string(&summary_path).map_err(|e| {
        Error::Input(format!("{}: {e}", summary_path.display()))
    })?)?;
    let keep = downsample(&rows);
    fs::create_dir_all(out_dir)?;

    let oracle = summary.oracle.as_ref().map(|o| o.f_true);
    let mut cost = format!("# oracle: {}\n", if oracle.is_some() { "on" } else { "off" });
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t", "f", "g"];
        if oracle.is_some() {
            header.push("f_oracle");
        }
        w.write_record(&header)?;
        for &i in &keep {
            let r = &rows[i];
            let mut rec = vec![r.t.to_string(), r.f.to_string(), r.g.to_string()];
            if let Some(f) = oracle {
                rec.push(f.to_string());
            }
            w.write_record(&rec)?;
        }
        cost.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"));
    }
    let cost_path = out_dir.join(COST_FILE);
    fs::write(&cost_path, cost)?;

    let links = rows[0].arr.len();
    let cumulative = |r: &MetricsRow, i: usize| (r.arr[i] * r.t as f64).round();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..links).map(|i| format!("est_{i}")));
    header.extend((0..links).map(|i| format!("win_{i}")));
    w.write_record(&header)?;
    let mut anchor = 0usize; // first row index with t > current − window
    for &k in &keep {
        let r = &rows[k];
        while anchor < k && rows[anchor].t + window <= r.t {
            anchor += 1;
        }
        // window start: last row at or before t − window, or the origin
        let (t0, a0): (u64, Vec<f64>) = if anchor == 0 {
            (0, vec![0.0; links])
        } else {
            let p = &rows[anchor - 1];
            (p.t, (0..links).map(|i| cumulative(p, i)).collect())
        };
        let span = (r.t - t0) as f64;
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.arr.iter().map(f64::to_string));
        rec.extend((0..links).map(|i| ((cumulative(r, i) - a0[i]) / span).to_string()));
        w.write_record(&rec)?;
    }
    let sources_path = out_dir.join(SOURCES_FILE);
    fs::write(&sources_path, w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;

    Ok(ReportFiles {
        cost: cost_path,
        sources: sources_path,
        rows: keep.len(),
    })
}
