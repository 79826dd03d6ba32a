//! On-disk formats: trajectories, datasets, error surfaces and comparisons.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the in-memory values bit for bit. Every write goes to a
//! temporary file in the target directory and is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fracdyn_core::harness::{ComparisonReport, ErrorReport, ErrorStats, NoiseSpec};
use fracdyn_core::learn::ExperimentDataset;
use fracdyn_core::simulate::Trajectory;
use fracdyn_core::{DomainBox, State, TimeKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::format(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::format(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::format(path, e))?;
    write_atomic(path, &bytes)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    let header = r
        .headers()
        .map_err(|e| CliError::format(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("`{s}` is not a number")))
}

fn parse_usize(path: &Path, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("`{s}` is not an index")))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

// ---------------------------------------------------------------------------
// Trajectories

/// `k, t, x1..xn, u1..um`; the last row has empty input fields.
pub fn trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let (n, m) = (traj.state_dim(), traj.input_dim());
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(names("x", n));
    header.extend(names("u", m));
    let rows = traj.states.iter().enumerate().map(|(k, x)| {
        let mut row = vec![k.to_string(), fmt_f64(traj.time(k))];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        match traj.inputs.get(k) {
            Some(u) => row.extend(u.iter().map(|&v| fmt_f64(v))),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row
    });
    write_csv(path, &header, rows)
}

pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<()> {
    trajectory_csv(&dir.join(format!("{stem}.csv")), traj)?;
    write_json(&dir.join(format!("{stem}.json")), traj)
}

// ---------------------------------------------------------------------------
// Datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub time_kind: TimeKind,
    pub h: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    /// Zero-based.
    pub active_channel: usize,
    pub input_dim: usize,
    pub state_dim: usize,
    pub domain: DomainBox,
    /// Present when the recorded states carry measurement noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

const INPUT_GRIDS: [&str; 3] = ["u0", "u1", "u2"];

fn grid<'a>(ds: &'a ExperimentDataset, name: &str) -> &'a Vec<Vec<State>> {
    match name {
        "x1" => &ds.x1,
        "x2" => &ds.x2,
        "xt2" => &ds.xt2,
        "x3" => &ds.x3,
        "xt3" => &ds.xt3,
        "u0" => &ds.u0,
        "u1" => &ds.u1,
        _ => &ds.u2,
    }
}

fn grid_mut<'a>(ds: &'a mut ExperimentDataset, name: &str) -> &'a mut Vec<Vec<State>> {
    match name {
        "x1" => &mut ds.x1,
        "x2" => &mut ds.x2,
        "xt2" => &mut ds.xt2,
        "x3" => &mut ds.x3,
        "xt3" => &mut ds.xt3,
        "u0" => &mut ds.u0,
        "u1" => &mut ds.u1,
        _ => &mut ds.u2,
    }
}

fn grid_names(kind: TimeKind) -> Vec<&'static str> {
    let mut v = vec!["u0", "u1", "x1", "x2", "xt2"];
    if kind == TimeKind::Discrete {
        v.extend(["u2", "x3", "xt3"]);
    }
    v
}

/// Directory of CSV files plus `meta.json`.
pub fn write_dataset(dir: &Path, ds: &ExperimentDataset, noise: Option<NoiseSpec>) -> Result<()> {
    create_dir(dir)?;
    let n = ds.state_dim();
    let meta = DatasetMeta {
        time_kind: ds.time_kind,
        h: ds.h,
        m: ds.initial_conditions(),
        n: ds.trials(),
        seed: ds.seed,
        active_channel: ds.active_channel,
        input_dim: ds.input_dim,
        state_dim: n,
        domain: ds.domain.clone(),
        noise,
    };
    write_json(&dir.join("meta.json"), &meta)?;

    let mut header = vec!["i".to_string()];
    header.extend(names("x", n));
    let rows = ds.x0.iter().enumerate().map(|(i, x)| {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        row
    });
    write_csv(&dir.join("x0.csv"), &header, rows)?;

    for name in grid_names(ds.time_kind) {
        let width = if INPUT_GRIDS.contains(&name) { ds.input_dim } else { n };
        let prefix = if INPUT_GRIDS.contains(&name) { "u" } else { "x" };
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend(names(prefix, width));
        let rows_of = grid(ds, name);
        let rows = rows_of.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().map(move |(j, v)| {
                let mut r = vec![i.to_string(), j.to_string()];
                r.extend(v.iter().map(|&x| fmt_f64(x)));
                r
            })
        });
        write_csv(&dir.join(format!("{name}.csv")), &header, rows)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<(ExperimentDataset, DatasetMeta)> {
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let mut ds = ExperimentDataset {
        time_kind: meta.time_kind,
        h: meta.h,
        seed: meta.seed,
        active_channel: meta.active_channel,
        input_dim: meta.input_dim,
        domain: meta.domain.clone(),
        x0: vec![],
        u0: vec![],
        u1: vec![],
        u2: vec![],
        x1: vec![],
        x2: vec![],
        xt2: vec![],
        x3: vec![],
        xt3: vec![],
    };
    let path = dir.join("x0.csv");
    let (header, rows) = read_csv(&path)?;
    if header.len() != meta.state_dim + 1 || rows.len() != meta.m {
        return Err(CliError::format(&path, "shape disagrees with meta.json"));
    }
    for (k, row) in rows.iter().enumerate() {
        if parse_usize(&path, &row[0])? != k {
            return Err(CliError::format(&path, "rows must be ordered by i"));
        }
        ds.x0.push(row[1..].iter().map(|s| parse_f64(&path, s)).collect::<Result<_>>()?);
    }
    for name in grid_names(meta.time_kind) {
        let path = dir.join(format!("{name}.csv"));
        let width = if INPUT_GRIDS.contains(&name) { meta.input_dim } else { meta.state_dim };
        let (header, rows) = read_csv(&path)?;
        if header.len() != width + 2 || rows.len() != meta.m * (meta.n + 1) {
            return Err(CliError::format(&path, "shape disagrees with meta.json"));
        }
        let mut grid = vec![Vec::with_capacity(meta.n + 1); meta.m];
        for (k, row) in rows.iter().enumerate() {
            let (i, j) = (parse_usize(&path, &row[0])?, parse_usize(&path, &row[1])?);
            if i != k / (meta.n + 1) || j != k % (meta.n + 1) {
                return Err(CliError::format(&path, "rows must be ordered by (i, j)"));
            }
            grid[i].push(row[2..].iter().map(|s| parse_f64(&path, s)).collect::<Result<State>>()?);
        }
        *grid_mut(&mut ds, name) = grid;
    }
    ds.validate()?;
    Ok((ds, meta))
}

/// Channel datasets live in `channel-1`, `channel-2`, ….
pub fn channel_dir(dir: &Path, channel: usize) -> PathBuf {
    dir.join(format!("channel-{}", channel + 1))
}

pub fn write_channel_datasets(dir: &Path, datasets: &[ExperimentDataset], noise: Option<NoiseSpec>) -> Result<()> {
    for ds in datasets {
        write_dataset(&channel_dir(dir, ds.active_channel), ds, noise)?;
    }
    Ok(())
}

/// Reads `channel-*` subdirectories in channel order, or `dir` itself when
/// it holds a single dataset.
pub fn read_channel_datasets(dir: &Path) -> Result<Vec<ExperimentDataset>> {
    if dir.join("meta.json").exists() {
        return Ok(vec![read_dataset(dir)?.0]);
    }
    let mut out = Vec::new();
    for l in 0.. {
        let sub = channel_dir(dir, l);
        if !sub.join("meta.json").exists() {
            break;
        }
        out.push(read_dataset(&sub)?.0);
    }
    if out.is_empty() {
        return Err(CliError::format(dir, "no dataset (meta.json) found"));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSummary {
    pub grid_density: usize,
    pub points: usize,
    pub drift: ErrorStats,
    pub control: ErrorStats,
    pub overall: ErrorStats,
}

/// `<stem>.csv` with `x..., component, truth, estimate, abs_error` and a
/// `<stem>.json` summary.
pub fn write_error_report(dir: &Path, stem: &str, rep: &ErrorReport) -> Result<()> {
    let n = rep.rows.first().map_or(0, |r| r.x.len());
    let mut header = names("x", n);
    header.extend(["component", "truth", "estimate", "abs_error"].map(String::from));
    let rows = rep.rows.iter().map(|r| {
        let mut row: Vec<String> = r.x.iter().map(|&v| fmt_f64(v)).collect();
        row.push(r.component.clone());
        row.extend([r.truth, r.estimate, r.abs_error].map(fmt_f64));
        row
    });
    write_csv(&dir.join(format!("{stem}.csv")), &header, rows)?;
    let points = rep.grid_density.pow(n as u32);
    write_json(
        &dir.join(format!("{stem}.json")),
        &ErrorSummary {
            grid_density: rep.grid_density,
            points,
            drift: rep.drift,
            control: rep.control,
            overall: rep.overall,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub h: f64,
    pub x0: State,
    pub horizon: usize,
    pub steps_compared: usize,
    pub max_dev_fractional: f64,
    pub max_dev_integer: f64,
    pub mean_dev_fractional: f64,
    pub mean_dev_integer: f64,
    pub diverged_at: Option<usize>,
    pub diverged_runs: Vec<String>,
}

impl From<&ComparisonReport> for ComparisonSummary {
    fn from(r: &ComparisonReport) -> Self {
        Self {
            h: r.h,
            x0: r.x0.clone(),
            horizon: r.horizon,
            steps_compared: r.truth.len().saturating_sub(1),
            max_dev_fractional: r.max_dev_fractional,
            max_dev_integer: r.max_dev_integer,
            mean_dev_fractional: r.mean_dev_fractional,
            mean_dev_integer: r.mean_dev_integer,
            diverged_at: r.diverged_at,
            diverged_runs: r.diverged_runs.clone(),
        }
    }
}

/// `<stem>.csv` with `k, t, x_truth..., x_frac..., x_int..., dev_frac,
/// dev_int` and a `<stem>.json` summary.
pub fn write_comparison(dir: &Path, stem: &str, rep: &ComparisonReport) -> Result<()> {
    let n = rep.x0.len();
    let mut header = vec!["k".to_string(), "t".to_string()];
    for tag in ["truth", "frac", "int"] {
        header.extend((1..=n).map(|i| format!("x{i}_{tag}")));
    }
    header.extend(["dev_frac", "dev_int"].map(String::from));
    let rows = (0..rep.truth.len()).map(|k| {
        let mut row = vec![k.to_string(), fmt_f64(k as f64 * rep.h)];
        for traj in [&rep.truth, &rep.fractional, &rep.integer] {
            row.extend(traj[k].iter().map(|&v| fmt_f64(v)));
        }
        row.push(fmt_f64(rep.dev_fractional[k]));
        row.push(fmt_f64(rep.dev_integer[k]));
        row
    });
    write_csv(&dir.join(format!("{stem}.csv")), &header, rows)?;
    write_json(&dir.join(format!("{stem}.json")), &ComparisonSummary::from(rep))
}
