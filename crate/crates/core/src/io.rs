//! On-disk formats: key=value configs and manifests, CSV fields, midline
//! sections and node trajectories.
//!
//! Every writer goes through a temp file in the target directory followed by
//! a rename, so readers never observe half-written files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrator::RunResult;
use crate::monitor::ViolationReport;
use crate::theta::{NodeTrajectory, TrajectoryRecord};
use crate::types::{BoundaryKind, Field2D, GridSpec, InitRecipe, ModelParams, MonitorSettings, ScenarioConfig, SimState};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const FORMAT_VERSION: u32 = 1;

const CONFIG_KEYS: [&str; 25] = [
    "r_N", "mu_N", "beta_1", "beta_3", "alpha_H", "gamma_H", "r_A", "k_A", "mu_A", "eps_A", "nu",
    "tau_H", "xi_A", "xi_H", "L", "n", "boundary", "t_end", "snapshot_times", "N0", "A0", "delta_A",
    "H0", "cfl_safety", "tol",
];

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// Shortest representation that parses back to the same bits.
fn num(v: f64) -> String {
    format!("{v:?}")
}

// 17 significant digits.
fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: Option<usize>, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("{what}: '{}' is not a number", s.trim())))
}

// ---------------------------------------------------------------- configs

/// Renders a config in the flat `key=value` format.
///
/// The bump center is not part of the format and always reads back as the
/// domain center.
pub fn format_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    for (name, value) in cfg.params.named() {
        let _ = writeln!(out, "{name}={}", num(value));
    }
    let times: Vec<String> = cfg.snapshot_times.iter().map(|&t| num(t)).collect();
    let _ = writeln!(out, "L={}", num(cfg.grid.side_length()));
    let _ = writeln!(out, "n={}", cfg.grid.nodes());
    let _ = writeln!(out, "boundary={}", cfg.grid.boundary().as_str());
    let _ = writeln!(out, "t_end={}", num(cfg.t_end));
    let _ = writeln!(out, "snapshot_times={}", times.join(","));
    let _ = writeln!(out, "N0={}", num(cfg.init.n0));
    let _ = writeln!(out, "A0={}", num(cfg.init.a0_amplitude));
    let _ = writeln!(out, "delta_A={}", num(cfg.init.delta_a));
    let _ = writeln!(out, "H0={}", num(cfg.init.h0));
    let _ = writeln!(out, "cfl_safety={}", num(cfg.cfl_safety));
    let _ = writeln!(out, "tol={}", num(cfg.monitor.tol));
    out
}

/// Parses `key=value` lines, `#` comments and blank lines allowed.
/// Returns the pairs with their line numbers.
fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(Some(line_no), format!("expected key=value, got '{line}'")))?;
        pairs.push((line_no, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn config_from_pairs(pairs: &[(usize, String, String)]) -> Result<ScenarioConfig> {
    let mut seen: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (line, key, value) in pairs {
        let Some(&known) = CONFIG_KEYS.iter().find(|k| **k == key.as_str()) else {
            return Err(Error::parse(Some(*line), format!("unknown key '{key}'")));
        };
        if seen.insert(known, (*line, value.as_str())).is_some() {
            return Err(Error::parse(Some(*line), format!("duplicate key '{key}'")));
        }
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        seen.get(key)
            .copied()
            .ok_or_else(|| Error::parse(None, format!("missing key '{key}'")))
    };
    let real = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        parse_f64(v, Some(line), key)
    };

    let params = ModelParams {
        r_n: real("r_N")?,
        mu_n: real("mu_N")?,
        beta_1: real("beta_1")?,
        beta_3: real("beta_3")?,
        alpha_h: real("alpha_H")?,
        gamma_h: real("gamma_H")?,
        r_a: real("r_A")?,
        k_a: real("k_A")?,
        mu_a: real("mu_A")?,
        eps_a: real("eps_A")?,
        nu: real("nu")?,
        tau_h: real("tau_H")?,
        xi_a: real("xi_A")?,
        xi_h: real("xi_H")?,
    };
    let (n_line, n_text) = get("n")?;
    let nodes: usize = n_text
        .parse()
        .map_err(|_| Error::parse(Some(n_line), format!("n: '{n_text}' is not a node count")))?;
    let (b_line, b_text) = get("boundary")?;
    let boundary = BoundaryKind::parse(b_text).ok_or_else(|| {
        Error::parse(Some(b_line), format!("boundary must be neumann or dirichlet, got '{b_text}'"))
    })?;
    let grid = GridSpec::new(real("L")?, nodes, boundary)
        .map_err(|e| Error::parse(Some(n_line), e.to_string()))?;
    let (s_line, s_text) = get("snapshot_times")?;
    let snapshot_times = if s_text.is_empty() {
        Vec::new()
    } else {
        s_text
            .split(',')
            .map(|t| parse_f64(t, Some(s_line), "snapshot_times"))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ScenarioConfig {
        params,
        grid,
        t_end: real("t_end")?,
        snapshot_times,
        init: InitRecipe {
            n0: real("N0")?,
            a0_amplitude: real("A0")?,
            delta_a: real("delta_A")?,
            a0_center: None,
            h0: real("H0")?,
        },
        cfl_safety: real("cfl_safety")?,
        monitor: MonitorSettings {
            tol: real("tol")?,
            fatal: true,
        },
    })
}

/// Parses a config file body. Unknown or duplicated keys are errors; the
/// result is not validated beyond syntax.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    config_from_pairs(&parse_pairs(text)?)
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig> {
    parse_config(&read_text(path)?)
}

pub fn write_config(cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    write_atomic(path, format_config(cfg).as_bytes())
}

// ---------------------------------------------------------------- fields

fn check_label(label: &str) -> Result<()> {
    let bad = label.is_empty()
        || label == "."
        || label == ".."
        || label.chars().any(|c| c == '/' || c == '\\' || c == '\0');
    if bad {
        return Err(Error::Io {
            path: PathBuf::from(label),
            message: "invalid snapshot label".into(),
        });
    }
    Ok(())
}

pub fn format_field(f: &Field2D) -> String {
    let n = f.nodes();
    let mut out = String::with_capacity(n * n * 24);
    for i in 0..n {
        for (j, v) in f.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&full(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses an `n × n` CSV block. Row numbers in errors are 1-based.
pub fn parse_field(text: &str) -> Result<Field2D> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row_no = idx + 1;
        let start = values.len();
        for cell in line.split(',') {
            values.push(parse_f64(cell, Some(row_no), "field value")?);
        }
        let len = values.len() - start;
        match width {
            None => width = Some(len),
            Some(w) if w != len => {
                return Err(Error::parse(
                    Some(row_no),
                    format!("ragged row {row_no}: {len} values, expected {w}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let n = width.unwrap_or(0);
    if rows != n || n == 0 {
        return Err(Error::parse(None, format!("field is {rows}x{n}, expected a square")));
    }
    Field2D::from_vec(n, values)
}

pub fn read_field(path: &Path) -> Result<Field2D> {
    parse_field(&read_text(path)?).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn snapshot_paths(dir: &Path, label: &str) -> [PathBuf; 3] {
    ["N", "A", "H"].map(|f| dir.join(format!("{label}_{f}.csv")))
}

/// Writes `<label>_N.csv`, `<label>_A.csv` and `<label>_H.csv` into `dir`.
pub fn write_snapshot(s: &SimState, dir: &Path, label: &str) -> Result<[PathBuf; 3]> {
    check_label(label)?;
    let paths = snapshot_paths(dir, label);
    for (path, field) in paths.iter().zip(s.fields()) {
        write_atomic(path, format_field(field).as_bytes())?;
    }
    Ok(paths)
}

pub fn read_snapshot(dir: &Path, label: &str, t: f64) -> Result<SimState> {
    check_label(label)?;
    let [pn, pa, ph] = snapshot_paths(dir, label);
    let state = SimState {
        t,
        normal: read_field(&pn)?,
        tumor: read_field(&pa)?,
        acid: read_field(&ph)?,
    };
    let n = state.normal.nodes();
    for f in state.fields() {
        if f.nodes() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.nodes(),
            });
        }
    }
    Ok(state)
}

/// Values along the midline `x₁ = L/2` as `x2,N,A,H` rows.
pub fn format_section(s: &SimState, grid: &GridSpec) -> Result<String> {
    let n = grid.nodes();
    if n.is_multiple_of(2) {
        return Err(Error::MidlineOffGrid { n });
    }
    s.check_grid(grid)?;
    let mid = (n - 1) / 2;
    let mut out = String::from("x2,N,A,H\n");
    for j in 0..n {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            full(grid.coord(j)),
            full(s.normal.get(mid, j)),
            full(s.tumor.get(mid, j)),
            full(s.acid.get(mid, j))
        );
    }
    Ok(out)
}

/// Writes `<label>_section.csv`.
pub fn write_section(s: &SimState, grid: &GridSpec, dir: &Path, label: &str) -> Result<PathBuf> {
    check_label(label)?;
    let body = format_section(s, grid)?;
    let path = dir.join(format!("{label}_section.csv"));
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// Midline section rows `(x2, N, A, H)`.
pub fn read_section(path: &Path) -> Result<Vec<[f64; 4]>> {
    let text = read_text(path)?;
    parse_table(&text, "x2,N,A,H")?
        .into_iter()
        .map(|r| Ok([r[0], r[1], r[2], r[3]]))
        .collect()
}

fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::parse(Some(1), format!("expected header '{header}'"))),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| parse_f64(c, Some(idx + 1), "table value"))
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::parse(Some(idx + 1), format!("expected {width} columns")));
        }
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- trajectories

pub fn trajectory_file_name(node: (usize, usize)) -> String {
    format!("traj_{}_{}.csv", node.0, node.1)
}

pub fn format_trajectory(traj: &NodeTrajectory) -> String {
    let mut out = String::from("t,a,h\n");
    for k in 0..traj.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            full(traj.times[k]),
            full(traj.a_values[k]),
            full(traj.h_values[k])
        );
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<NodeTrajectory> {
    let rows = parse_table(text, "t,a,h")?;
    let mut traj = NodeTrajectory::default();
    for r in rows {
        traj.times.push(r[0]);
        traj.a_values.push(r[1]);
        traj.h_values.push(r[2]);
    }
    Ok(traj)
}

pub fn write_trajectory(rec: &TrajectoryRecord, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(trajectory_file_name(rec.node));
    write_atomic(&path, format_trajectory(&rec.trajectory).as_bytes())?;
    Ok(path)
}

pub fn read_trajectory(path: &Path) -> Result<NodeTrajectory> {
    parse_trajectory(&read_text(path)?)
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub time: f64,
    pub label: String,
    /// File names (relative to the run directory) of N, A, H.
    pub files: [String; 3],
    pub section: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub node: (usize, usize),
    pub n0: f64,
    pub file: String,
}

/// Index of everything a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: ScenarioConfig,
    pub dt_used: f64,
    pub step_count: u64,
    pub snapshots: Vec<SnapshotEntry>,
    pub report: ViolationReport,
    pub trajectories: Vec<TrajectoryEntry>,
}

pub fn format_manifest(m: &RunManifest) -> String {
    let mut out = format!("format_version={}\n", m.format_version);
    for line in format_config(&m.config).lines() {
        let _ = writeln!(out, "config.{line}");
    }
    let _ = writeln!(out, "dt_used={}", num(m.dt_used));
    let _ = writeln!(out, "step_count={}", m.step_count);
    let r = &m.report;
    let _ = writeln!(out, "report.violation_count={}", r.violation_count);
    let _ = writeln!(out, "report.worst_negative_N={}", num(r.worst_negative_normal));
    let _ = writeln!(out, "report.worst_negative_A={}", num(r.worst_negative_tumor));
    let _ = writeln!(out, "report.worst_negative_H={}", num(r.worst_negative_acid));
    let _ = writeln!(out, "report.worst_A_excess_over_kA={}", num(r.worst_tumor_excess));
    let _ = writeln!(out, "report.worst_N_excess_over_bound={}", num(r.worst_normal_excess));
    let _ = writeln!(
        out,
        "report.worst_N_excess_over_horizon_bound={}",
        num(r.worst_normal_excess_horizon)
    );
    let first = r.first_violation_time.map_or("none".to_string(), num);
    let _ = writeln!(out, "report.first_violation_time={first}");
    let _ = writeln!(out, "snapshot_count={}", m.snapshots.len());
    for (k, s) in m.snapshots.iter().enumerate() {
        let _ = writeln!(out, "snapshot.{k}.time={}", num(s.time));
        let _ = writeln!(out, "snapshot.{k}.label={}", s.label);
        let _ = writeln!(out, "snapshot.{k}.files={}", s.files.join(","));
        let _ = writeln!(out, "snapshot.{k}.section={}", s.section.as_deref().unwrap_or("none"));
    }
    let _ = writeln!(out, "trajectory_count={}", m.trajectories.len());
    for (k, t) in m.trajectories.iter().enumerate() {
        let _ = writeln!(out, "trajectory.{k}.node={},{}", t.node.0, t.node.1);
        let _ = writeln!(out, "trajectory.{k}.n0={}", num(t.n0));
        let _ = writeln!(out, "trajectory.{k}.file={}", t.file);
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<RunManifest> {
    let pairs = parse_pairs(text)?;
    match pairs.first() {
        Some((_, k, v)) if k == "format_version" => {
            if v.parse::<u32>().ok() != Some(FORMAT_VERSION) {
                return Err(Error::parse(Some(1), format!("unsupported format_version {v}")));
            }
        }
        _ => return Err(Error::parse(Some(1), "manifest must start with format_version")),
    }
    let mut config_pairs = Vec::new();
    let mut rest: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (line, k, v) in pairs.into_iter().skip(1) {
        if let Some(key) = k.strip_prefix("config.") {
            config_pairs.push((line, key.to_string(), v));
        } else if rest.insert(k.clone(), (line, v)).is_some() {
            return Err(Error::parse(Some(line), format!("duplicate key '{k}'")));
        }
    }
    let config = config_from_pairs(&config_pairs)?;
    let get = |key: &str| -> Result<(usize, &str)> {
        rest.get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| Error::parse(None, format!("manifest missing key '{key}'")))
    };
    let real = |key: &str| -> Result<f64> {
        let (l, v) = get(key)?;
        parse_f64(v, Some(l), key)
    };
    let count = |key: &str| -> Result<u64> {
        let (l, v) = get(key)?;
        v.parse()
            .map_err(|_| Error::parse(Some(l), format!("{key}: '{v}' is not a count")))
    };

    let first_violation_time = match get("report.first_violation_time")? {
        (_, "none") => None,
        (l, v) => Some(parse_f64(v, Some(l), "report.first_violation_time")?),
    };
    let report = ViolationReport {
        worst_negative_normal: real("report.worst_negative_N")?,
        worst_negative_tumor: real("report.worst_negative_A")?,
        worst_negative_acid: real("report.worst_negative_H")?,
        worst_tumor_excess: real("report.worst_A_excess_over_kA")?,
        worst_normal_excess: real("report.worst_N_excess_over_bound")?,
        worst_normal_excess_horizon: real("report.worst_N_excess_over_horizon_bound")?,
        first_violation_time,
        violation_count: count("report.violation_count")?,
    };

    let mut snapshots = Vec::new();
    for k in 0..count("snapshot_count")? {
        let (fl, files) = get(&format!("snapshot.{k}.files"))?;
        let files: Vec<String> = files.split(',').map(str::to_string).collect();
        let files: [String; 3] = files
            .try_into()
            .map_err(|_| Error::parse(Some(fl), "snapshot needs exactly three files"))?;
        let section = match get(&format!("snapshot.{k}.section"))?.1 {
            "none" => None,
            s => Some(s.to_string()),
        };
        snapshots.push(SnapshotEntry {
            time: real(&format!("snapshot.{k}.time"))?,
            label: get(&format!("snapshot.{k}.label"))?.1.to_string(),
            files,
            section,
        });
    }
    let mut trajectories = Vec::new();
    for k in 0..count("trajectory_count")? {
        let (nl, node) = get(&format!("trajectory.{k}.node"))?;
        let parsed = node
            .split_once(',')
            .and_then(|(i, j)| Some((i.trim().parse().ok()?, j.trim().parse().ok()?)))
            .ok_or_else(|| Error::parse(Some(nl), format!("bad node '{node}'")))?;
        trajectories.push(TrajectoryEntry {
            node: parsed,
            n0: real(&format!("trajectory.{k}.n0"))?,
            file: get(&format!("trajectory.{k}.file"))?.1.to_string(),
        });
    }

    Ok(RunManifest {
        format_version: FORMAT_VERSION,
        config,
        dt_used: real("dt_used")?,
        step_count: count("step_count")?,
        snapshots,
        report,
        trajectories,
    })
}

pub fn write_manifest(m: &RunManifest, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, format_manifest(m).as_bytes())?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    parse_manifest(&read_text(&dir.join(MANIFEST_FILE))?)
}

/// Label used for a snapshot file set, e.g. `t30.00`.
pub fn snapshot_label(t: f64) -> String {
    format!("t{t:.2}")
}

/// Writes every snapshot (fields and, for odd grids, the midline section),
/// every recorded trajectory, and the manifest into `dir`.
pub fn write_run(result: &RunResult, cfg: &ScenarioConfig, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let mut snapshots = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for s in &result.snapshots {
        let mut label = snapshot_label(s.t);
        if !used.insert(label.clone()) {
            label = format!("t{}", num(s.t));
            used.insert(label.clone());
        }
        let files = write_snapshot(s, dir, &label)?;
        let section = if cfg.grid.nodes() % 2 == 1 {
            Some(name(&write_section(s, &cfg.grid, dir, &label)?))
        } else {
            None
        };
        snapshots.push(SnapshotEntry {
            time: s.t,
            label,
            files: files.map(|p| name(&p)),
            section,
        });
    }
    let mut trajectories = Vec::new();
    for rec in &result.trajectories {
        let path = write_trajectory(rec, dir)?;
        trajectories.push(TrajectoryEntry {
            node: rec.node,
            n0: rec.n0,
            file: name(&path),
        });
    }
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        dt_used: result.dt_used,
        step_count: result.step_count,
        snapshots,
        report: result.invariant_report,
        trajectories,
    };
    write_manifest(&manifest, dir)?;
    Ok(manifest)
}

/// Loads a run directory written by [`write_run`].
pub fn read_run(dir: &Path) -> Result<(ScenarioConfig, RunResult)> {
    let m = read_manifest(dir)?;
    let mut snapshots = Vec::new();
    for s in &m.snapshots {
        let state = SimState {
            t: s.time,
            normal: read_field(&dir.join(&s.files[0]))?,
            tumor: read_field(&dir.join(&s.files[1]))?,
            acid: read_field(&dir.join(&s.files[2]))?,
        };
        state.check_grid(&m.config.grid)?;
        snapshots.push(state);
    }
    let mut trajectories = Vec::new();
    for t in &m.trajectories {
        trajectories.push(TrajectoryRecord {
            node: t.node,
            n0: t.n0,
            trajectory: read_trajectory(&dir.join(&t.file))?,
        });
    }
    let result = RunResult {
        snapshots,
        step_count: m.step_count,
        dt_used: m.dt_used,
        invariant_report: m.report,
        trajectories,
    };
    Ok((m.config, result))
}
