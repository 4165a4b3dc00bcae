//! Explicit RK4 method-of-lines stepping and the scenario run loop.

use crate::error::{Error, Result};
use crate::monitor::{check_state, ViolationReport};
use crate::reaction::{full_rhs_into, StateDerivative};
use crate::theta::{default_sample_nodes, NodeTrajectory, TrajectoryRecord};
use crate::types::{build_initial_state, check_hypotheses, BoundaryKind, Field2D, GridSpec, ModelParams, ScenarioConfig, SimState};

/// Largest step used by the run loop.
///
/// With diffusion this is `safety · dx² / (4 max(ξ_A, ξ_H))`; without it the
/// step is capped by the fastest reaction rate scale (and by 0.01).
/// `n0_max` is the sup of the initial N field.
pub fn stable_dt(p: &ModelParams, grid: &GridSpec, safety: f64, n0_max: f64) -> f64 {
    let xi = p.max_diffusion();
    if xi > 0.0 {
        return safety * grid.dx() * grid.dx() / (4.0 * xi);
    }
    let n_bar = if p.mu_n > 0.0 {
        n0_max.max(p.normal_equilibrium())
    } else {
        n0_max
    };
    let rate = (p.mu_n + p.beta_1 * p.k_a)
        .max(p.r_a + p.mu_a + p.eps_a + p.beta_3 * n_bar)
        .max(p.tau_h);
    let cap = if rate > 0.0 { 0.01f64.min(1.0 / rate) } else { 0.01 };
    safety * cap
}

/// Step sequence from `t0` through every stop time.
///
/// Steps have the nominal length `dt` except the last one of each segment,
/// which is shortened so that the stop is hit exactly. Times are computed as
/// `segment_start + m·dt`, never by accumulating `dt`.
#[derive(Debug, Clone)]
pub struct Schedule {
    stops: Vec<f64>,
    dt: f64,
    stop_idx: usize,
    seg_start: f64,
    seg_steps: usize,
    m: usize,
}

/// One step of a [`Schedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledStep {
    pub t_new: f64,
    pub dt: f64,
    /// True when `t_new` is one of the stop times.
    pub at_stop: bool,
}

impl Schedule {
    /// `stops` must be sorted; stops at or before `t0` are skipped.
    pub fn new(t0: f64, stops: &[f64], dt: f64) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        let stops: Vec<f64> = stops.iter().copied().filter(|&t| t > t0).collect();
        let mut s = Schedule {
            stops,
            dt,
            stop_idx: 0,
            seg_start: t0,
            seg_steps: 0,
            m: 0,
        };
        s.plan_segment();
        s
    }

    fn plan_segment(&mut self) {
        self.m = 0;
        self.seg_steps = match self.stops.get(self.stop_idx) {
            Some(&t_b) => {
                let ratio = (t_b - self.seg_start) / self.dt;
                ((ratio * (1.0 - 1e-10)).ceil() as usize).max(1)
            }
            None => 0,
        };
    }
}

impl Iterator for Schedule {
    type Item = ScheduledStep;

    fn next(&mut self) -> Option<ScheduledStep> {
        let t_b = *self.stops.get(self.stop_idx)?;
        self.m += 1;
        if self.m < self.seg_steps {
            return Some(ScheduledStep {
                t_new: self.seg_start + self.m as f64 * self.dt,
                dt: self.dt,
                at_stop: false,
            });
        }
        let t_prev = self.seg_start + (self.seg_steps - 1) as f64 * self.dt;
        let step = ScheduledStep {
            t_new: t_b,
            dt: t_b - t_prev,
            at_stop: true,
        };
        self.seg_start = t_b;
        self.stop_idx += 1;
        self.plan_segment();
        Some(step)
    }
}

/// Scratch storage for [`step_rk4`].
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k: [StateDerivative; 4],
    stage: SimState,
}

impl Rk4Workspace {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.nodes();
        Rk4Workspace {
            k: std::array::from_fn(|_| StateDerivative::zeros(n)),
            stage: SimState {
                t: 0.0,
                normal: Field2D::zeros(n),
                tumor: Field2D::zeros(n),
                acid: Field2D::zeros(n),
            },
        }
    }
}

fn stage_fields(s: &SimState) -> [&[f64]; 3] {
    [s.normal.values(), s.tumor.values(), s.acid.values()]
}

fn stage_fields_mut(s: &mut SimState) -> [&mut [f64]; 3] {
    [
        s.normal.values_mut(),
        s.tumor.values_mut(),
        s.acid.values_mut(),
    ]
}

fn deriv_fields(d: &StateDerivative) -> [&[f64]; 3] {
    [d.d_normal.values(), d.d_tumor.values(), d.d_acid.values()]
}

/// `dst = y + h·k`, field by field.
fn axpy(dst: &mut SimState, y: &SimState, h: f64, k: &StateDerivative) {
    for ((d, y), k) in stage_fields_mut(dst)
        .into_iter()
        .zip(stage_fields(y))
        .zip(deriv_fields(k))
    {
        for ((d, &y), &k) in d.iter_mut().zip(y).zip(k) {
            *d = y + h * k;
        }
    }
}

/// Classical four-stage Runge–Kutta update of the three fields.
///
/// Fails with [`Error::NonFiniteState`] when the result contains NaN or ±∞.
pub fn step_rk4(
    s: &SimState,
    dt: f64,
    p: &ModelParams,
    grid: &GridSpec,
    ws: &mut Rk4Workspace,
) -> Result<SimState> {
    let mut out = s.clone();
    step_rk4_into(s, dt, p, grid, ws, &mut out);
    out.t = s.t + dt;
    if !out.is_finite() {
        return Err(Error::NonFiniteState { t: out.t });
    }
    Ok(out)
}

fn step_rk4_into(
    s: &SimState,
    dt: f64,
    p: &ModelParams,
    grid: &GridSpec,
    ws: &mut Rk4Workspace,
    out: &mut SimState,
) {
    let half = 0.5 * dt;
    let Rk4Workspace { k, stage } = ws;
    let [k1, k2, k3, k4] = k;
    full_rhs_into(s, p, grid, k1);
    axpy(stage, s, half, k1);
    full_rhs_into(stage, p, grid, k2);
    axpy(stage, s, half, k2);
    full_rhs_into(stage, p, grid, k3);
    axpy(stage, s, dt, k3);
    full_rhs_into(stage, p, grid, k4);

    let sixth = dt / 6.0;
    let ks = [deriv_fields(k1), deriv_fields(k2), deriv_fields(k3), deriv_fields(k4)];
    for (f, (dst, y)) in stage_fields_mut(out)
        .into_iter()
        .zip(stage_fields(s))
        .enumerate()
    {
        for (idx, (d, &y)) in dst.iter_mut().zip(y).enumerate() {
            *d = rk4_combine(y, sixth, ks[0][f][idx], ks[1][f][idx], ks[2][f][idx], ks[3][f][idx]);
        }
    }
}

#[inline(always)]
pub(crate) fn rk4_combine(y: f64, sixth: f64, k1: f64, k2: f64, k3: f64, k4: f64) -> f64 {
    y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Optional extras for [`run_with`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record A and H at these nodes after every step; `Some(vec![])` picks
    /// the default 3×3 interior nodes.
    pub record_nodes: Option<Vec<(usize, usize)>>,
    /// Start from this state instead of the config's initial-condition recipe.
    pub initial_state: Option<SimState>,
}

impl RunOptions {
    pub fn recording_default_nodes() -> Self {
        RunOptions {
            record_nodes: Some(Vec::new()),
            initial_state: None,
        }
    }
}

/// Output of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// States at the requested snapshot times, in order.
    pub snapshots: Vec<SimState>,
    pub step_count: u64,
    /// Nominal step length.
    pub dt_used: f64,
    pub invariant_report: ViolationReport,
    /// Per-node A/H histories; empty unless recording was requested.
    pub trajectories: Vec<TrajectoryRecord>,
}

impl RunResult {
    pub fn snapshot_at(&self, t: f64) -> Option<&SimState> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// Integrates the scenario from its initial-condition recipe to `t_end`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    let grid = cfg.grid;
    let p = cfg.params;
    let mut state = match opts.initial_state {
        Some(mut s) => {
            s.check_grid(&grid)?;
            s.t = 0.0;
            if grid.boundary() == BoundaryKind::DirichletZero {
                pin_boundary(&mut s, &grid);
            }
            check_hypotheses(&s, &p)?;
            s
        }
        None => build_initial_state(cfg)?,
    };

    let n0_max = state.normal.max();
    let dt = stable_dt(&p, &grid, cfg.cfl_safety, n0_max);
    let tol = cfg.monitor.tol;

    let mut recorders: Vec<TrajectoryRecord> = match opts.record_nodes {
        None => Vec::new(),
        Some(nodes) => {
            let nodes = if nodes.is_empty() {
                default_sample_nodes(&grid)
            } else {
                nodes
            };
            let n = grid.nodes();
            if let Some(&(i, j)) = nodes.iter().find(|&&(i, j)| i >= n || j >= n) {
                return Err(Error::InvalidConfig(format!("sample node ({i}, {j}) off grid")));
            }
            nodes
                .into_iter()
                .map(|(i, j)| TrajectoryRecord {
                    node: (i, j),
                    n0: state.normal.get(i, j),
                    trajectory: NodeTrajectory::default(),
                })
                .collect()
        }
    };
    let record = |recs: &mut Vec<TrajectoryRecord>, s: &SimState| {
        for r in recs.iter_mut() {
            let (i, j) = r.node;
            r.trajectory.times.push(s.t);
            r.trajectory.a_values.push(s.tumor.get(i, j));
            r.trajectory.h_values.push(s.acid.get(i, j));
        }
    };
    record(&mut recorders, &state);

    let mut report = check_state(&state, &p, n0_max, cfg.t_end, tol);
    if !report.is_clean() && cfg.monitor.fatal {
        return Err(Error::ToleranceExceeded {
            t: 0.0,
            report: Box::new(report),
        });
    }

    let mut snapshots = Vec::with_capacity(cfg.snapshot_times.len());
    let mut wanted = cfg.snapshot_times.iter().copied().peekable();
    if wanted.peek() == Some(&0.0) {
        snapshots.push(state.clone());
        wanted.next();
    }

    let mut stops: Vec<f64> = cfg.snapshot_times.clone();
    stops.push(cfg.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut ws = Rk4Workspace::new(&grid);
    let mut next = state.clone();
    let mut step_count = 0u64;
    for step in Schedule::new(0.0, &stops, dt) {
        step_rk4_into(&state, step.dt, &p, &grid, &mut ws, &mut next);
        next.t = step.t_new;
        std::mem::swap(&mut state, &mut next);
        step_count += 1;
        if !state.is_finite() {
            return Err(Error::NonFiniteState { t: state.t });
        }
        let r = check_state(&state, &p, n0_max, cfg.t_end, tol);
        if !r.is_clean() {
            report.merge(&r);
            if cfg.monitor.fatal {
                return Err(Error::ToleranceExceeded {
                    t: state.t,
                    report: Box::new(report),
                });
            }
        }
        record(&mut recorders, &state);
        if step.at_stop && wanted.peek() == Some(&step.t_new) {
            snapshots.push(state.clone());
            wanted.next();
        }
    }

    Ok(RunResult {
        snapshots,
        step_count,
        dt_used: dt,
        invariant_report: report,
        trajectories: recorders,
    })
}

fn pin_boundary(s: &mut SimState, grid: &GridSpec) {
    let n = grid.nodes();
    for k in 0..n {
        for (i, j) in [(0, k), (n - 1, k), (k, 0), (k, n - 1)] {
            s.tumor.set(i, j, 0.0);
            s.acid.set(i, j, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioPreset;

    fn small_cfg(n: usize, t_end: f64) -> ScenarioConfig {
        let mut cfg = ScenarioPreset::Fig2.config();
        cfg.grid = GridSpec::new(1.0, n, cfg.grid.boundary()).unwrap();
        cfg.t_end = t_end;
        cfg.snapshot_times = vec![0.0, t_end];
        cfg
    }

    #[test]
    fn stable_dt_reference_value() {
        let p = ModelParams::baseline();
        let g = GridSpec::new(1.0, 101, BoundaryKind::NeumannZeroFlux).unwrap();
        let dt = stable_dt(&p, &g, 0.9, 1.0);
        assert!((dt - 2.25e-3).abs() < 1e-15, "{dt}");
        let fine = GridSpec::new(1.0, 201, BoundaryKind::NeumannZeroFlux).unwrap();
        assert!((stable_dt(&p, &fine, 0.9, 1.0) * 4.0 - dt).abs() < 1e-15);
    }

    #[test]
    fn stable_dt_without_diffusion_ignores_grid() {
        let p = ModelParams {
            xi_a: 0.0,
            xi_h: 0.0,
            ..ModelParams::baseline()
        };
        let coarse = GridSpec::new(1.0, 11, BoundaryKind::NeumannZeroFlux).unwrap();
        let fine = GridSpec::new(1.0, 201, BoundaryKind::NeumannZeroFlux).unwrap();
        let dt = stable_dt(&p, &coarse, 0.5, 1.0);
        assert_eq!(dt, stable_dt(&p, &fine, 0.5, 1.0));
        // rate scale = max(1 + 1.5, 1 + 0.1 + 1, 0.9) = 2.5 -> cap 0.01
        assert_eq!(dt, 0.005);
    }

    #[test]
    fn schedule_lands_on_stops() {
        let steps: Vec<_> = Schedule::new(0.0, &[0.25, 1.0], 0.1).collect();
        assert_eq!(steps.len(), 3 + 8);
        assert_eq!(steps[2].t_new, 0.25);
        assert!(steps[2].at_stop);
        assert!((steps[2].dt - 0.05).abs() < 1e-15);
        assert_eq!(steps.last().unwrap().t_new, 1.0);
        assert!(steps.iter().all(|s| s.dt > 0.0 && s.dt <= 0.1 * (1.0 + 1e-9)));
        // exact multiples take no extra sliver step
        let steps: Vec<_> = Schedule::new(0.0, &[0.3], 0.1).collect();
        assert_eq!(steps.len(), 3);
    }

    #[test]
    fn equilibrium_step_is_fixed_point() {
        let g = GridSpec::new(1.0, 15, BoundaryKind::NeumannZeroFlux).unwrap();
        let s = SimState {
            t: 1.0,
            normal: Field2D::constant(15, 1.0),
            tumor: Field2D::zeros(15),
            acid: Field2D::zeros(15),
        };
        let mut ws = Rk4Workspace::new(&g);
        let next = step_rk4(&s, 0.01, &ModelParams::baseline(), &g, &mut ws).unwrap();
        assert_eq!(next.normal, s.normal);
        assert_eq!(next.tumor, s.tumor);
        assert_eq!(next.t, 1.01);
    }

    #[test]
    fn pure_normal_step_matches_closed_form() {
        let p = ModelParams {
            mu_n: 0.7,
            r_n: 1.3,
            ..ModelParams::baseline()
        };
        let g = GridSpec::new(1.0, 5, BoundaryKind::NeumannZeroFlux).unwrap();
        let n0 = 2.0;
        let exact = |dt: f64| n0 * (-p.mu_n * dt).exp() + p.r_n / p.mu_n * (1.0 - (-p.mu_n * dt).exp());
        let mut ws = Rk4Workspace::new(&g);
        let mut errs = Vec::new();
        for dt in [0.2, 0.1] {
            let s = SimState {
                t: 0.0,
                normal: Field2D::constant(5, n0),
                tumor: Field2D::zeros(5),
                acid: Field2D::zeros(5),
            };
            let next = step_rk4(&s, dt, &p, &g, &mut ws).unwrap();
            errs.push((next.normal.get(2, 2) - exact(dt)).abs());
        }
        // local error of RK4 on a linear ODE: (μ dt)^5/120 · |N0 − r/μ|
        let predicted = (0.7f64 * 0.2).powi(5) / 120.0 * (n0 - 1.3 / 0.7);
        assert!((errs[0] / predicted - 1.0).abs() < 0.1, "{errs:?} vs {predicted}");
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 5.0).abs() < 0.2, "local order {order}");
    }

    #[test]
    fn dirichlet_boundary_stays_zero() {
        let mut cfg = ScenarioPreset::Fig3.config();
        cfg.grid = GridSpec::new(1.0, 21, BoundaryKind::DirichletZero).unwrap();
        cfg.init.delta_a = 5.0;
        let s0 = build_initial_state(&cfg).unwrap();
        let dt = stable_dt(&cfg.params, &cfg.grid, 0.9, 1.0);
        let mut ws = Rk4Workspace::new(&cfg.grid);
        let mut s = s0;
        for _ in 0..50 {
            s = step_rk4(&s, dt, &cfg.params, &cfg.grid, &mut ws).unwrap();
            for k in 0..21 {
                for (i, j) in [(0, k), (20, k), (k, 0), (k, 20)] {
                    assert_eq!(s.tumor.get(i, j), 0.0);
                    assert_eq!(s.acid.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn four_times_stable_dt_is_caught() {
        let cfg = ScenarioPreset::Fig2.config();
        let s0 = build_initial_state(&cfg).unwrap();
        let dt = 4.0 * stable_dt(&cfg.params, &cfg.grid, cfg.cfl_safety, 1.0);
        let mut ws = Rk4Workspace::new(&cfg.grid);
        let mut s = s0;
        let mut caught = None;
        for step in 1..=100 {
            match step_rk4(&s, dt, &cfg.params, &cfg.grid, &mut ws) {
                Err(Error::NonFiniteState { .. }) => {
                    caught = Some(step);
                    break;
                }
                Err(e) => panic!("{e}"),
                Ok(next) => s = next,
            }
            if !check_state(&s, &cfg.params, 1.0, 50.0, 1e-8).is_clean() {
                caught = Some(step);
                break;
            }
        }
        assert!(caught.is_some(), "instability not detected in 100 steps");
    }

    #[test]
    fn run_hits_snapshots_exactly_and_is_deterministic() {
        let mut cfg = small_cfg(21, 1.0);
        cfg.snapshot_times = vec![0.0, 0.123, 0.5, 1.0];
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        let times: Vec<f64> = a.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, cfg.snapshot_times);
        assert!(a.invariant_report.is_clean());
        assert!(a.trajectories.is_empty());
    }

    #[test]
    fn recording_collects_every_step() {
        let cfg = small_cfg(21, 0.2);
        let r = run_with(&cfg, RunOptions::recording_default_nodes()).unwrap();
        assert_eq!(r.trajectories.len(), 9);
        for rec in &r.trajectories {
            assert_eq!(rec.trajectory.times.len() as u64, r.step_count + 1);
            assert_eq!(rec.trajectory.times[0], 0.0);
            assert_eq!(*rec.trajectory.times.last().unwrap(), 0.2);
        }
    }

    #[test]
    fn zero_horizon_run() {
        let mut cfg = small_cfg(11, 0.0);
        cfg.snapshot_times = vec![0.0];
        let r = run(&cfg).unwrap();
        assert_eq!(r.step_count, 0);
        assert_eq!(r.snapshots.len(), 1);
    }
}
