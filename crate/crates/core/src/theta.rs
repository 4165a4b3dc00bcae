//! Independent check of the N field.
//!
//! N has no diffusion, so at every node it solves the linear ODE
//! `N' = r_N − (μ_N + β₁|A| + α_H γ_H |H|) N`, whose solution is a closed-form
//! functional of the A and H histories:
//!
//! ```text
//!            N0 + r_N ∫₀ᵗ e^{Φ(s)} ds
//! Θ(t) = ───────────────────────────,   Φ(s) = μ_N s + α_H γ_H ∫₀ˢ|H| + β₁ ∫₀ˢ|A|
//!                 e^{Φ(t)}
//! ```
//!
//! A and H are taken as piecewise linear between the recorded samples. The
//! inner integrals are then cumulative trapezoid sums (exact), Φ is piecewise
//! quadratic, and the outer integral is done per interval with composite
//! Gauss-Legendre. It is evaluated as `N0 e^{−Φ(t)} + r_N ∫₀ᵗ e^{Φ(s)−Φ(t)} ds`
//! so nothing overflows.

use crate::error::{Error, Result};
use crate::integrator::{rk4_combine, RunResult, Schedule};
use crate::reaction::reaction_rhs;
use crate::types::{GridSpec, ModelParams};

/// A and H samples at one grid node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeTrajectory {
    pub times: Vec<f64>,
    pub a_values: Vec<f64>,
    pub h_values: Vec<f64>,
}

impl NodeTrajectory {
    pub fn new(times: Vec<f64>, a_values: Vec<f64>, h_values: Vec<f64>) -> Result<Self> {
        let t = NodeTrajectory {
            times,
            a_values,
            h_values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.times.len();
        if len == 0 || self.a_values.len() != len || self.h_values.len() != len {
            return Err(Error::InvalidTrajectory(format!(
                "lengths differ or empty: t={}, a={}, h={}",
                len,
                self.a_values.len(),
                self.h_values.len()
            )));
        }
        if self.times[0] != 0.0 {
            return Err(Error::InvalidTrajectory("times must start at 0".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrajectory(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Inserts interval midpoints by linear interpolation, halving every step.
    pub fn refined(&self) -> NodeTrajectory {
        let mut out = NodeTrajectory::default();
        for k in 0..self.len() {
            if k > 0 {
                out.times.push(0.5 * (self.times[k - 1] + self.times[k]));
                out.a_values.push(0.5 * (self.a_values[k - 1] + self.a_values[k]));
                out.h_values.push(0.5 * (self.h_values[k - 1] + self.h_values[k]));
            }
            out.times.push(self.times[k]);
            out.a_values.push(self.a_values[k]);
            out.h_values.push(self.h_values[k]);
        }
        out
    }

    /// Sup norms `(‖A‖∞, ‖H‖∞)` over the samples.
    pub fn sup_norms(&self) -> (f64, f64) {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (sup(&self.a_values), sup(&self.h_values))
    }
}

/// A trajectory recorded by the integrator at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub node: (usize, usize),
    /// Initial N at the node.
    pub n0: f64,
    pub trajectory: NodeTrajectory,
}

/// 3×3 nodes at the quarter points of the grid.
pub fn default_sample_nodes(grid: &GridSpec) -> Vec<(usize, usize)> {
    let last = grid.nodes() - 1;
    let q: Vec<usize> = (1..=3).map(|k| k * last / 4).collect();
    q.iter()
        .flat_map(|&i| q.iter().map(move |&j| (i, j)))
        .collect()
}

// Gauss-Legendre, 5 points on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

// Decay rate of Φ at one sample.
fn rate(p: &ModelParams, a: f64, h: f64) -> f64 {
    p.mu_n + p.alpha_h * p.gamma_h * h.abs() + p.beta_1 * a.abs()
}

/// `∫₀ʰ e^{Φ(t₀+u) − Φ(t₀+h)} du` when the rate is linear from `r0` to `r1`.
/// Pieces are kept short enough that the exponent varies by at most 1/2
/// on each.
fn interval_tail(h: f64, r0: f64, r1: f64) -> f64 {
    // exponent as a function of v = time back from the end of the interval
    let slope = (r1 - r0) / h;
    let expo = |v: f64| -(r1 * v - 0.5 * slope * v * v);
    let d = 0.5 * h * (r0 + r1);
    let pieces = ((2.0 * d).ceil() as usize).clamp(1, 512);
    let w = h / pieces as f64;
    let mut sum = 0.0;
    for k in 0..pieces {
        let mid = (k as f64 + 0.5) * w;
        let mut piece = 0.0;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            piece += wt * expo(mid + 0.5 * w * x).exp();
        }
        sum += 0.5 * w * piece;
    }
    sum
}

/// Θ at every sample time of `traj`.
pub fn theta_series(traj: &NodeTrajectory, n0: f64, p: &ModelParams) -> Result<Vec<f64>> {
    traj.validate()?;
    let mut out = Vec::with_capacity(traj.len());
    let mut phi = 0.0;
    let mut tail = 0.0; // ∫₀ᵗ e^{Φ(s)−Φ(t)} ds
    out.push(n0);
    for k in 1..traj.len() {
        let h = traj.times[k] - traj.times[k - 1];
        let r0 = rate(p, traj.a_values[k - 1], traj.h_values[k - 1]);
        let r1 = rate(p, traj.a_values[k], traj.h_values[k]);
        let d = 0.5 * h * (r0 + r1);
        phi += d;
        tail = tail * (-d).exp() + interval_tail(h, r0, r1);
        out.push(n0 * (-phi).exp() + p.r_n * tail);
    }
    Ok(out)
}

/// Θ at time `t`; A and H are interpolated linearly between samples.
pub fn theta(traj: &NodeTrajectory, n0: f64, p: &ModelParams, t: f64) -> Result<f64> {
    traj.validate()?;
    let last = traj.end_time();
    if !(0.0..=last).contains(&t) {
        return Err(Error::OutOfRange { t, last });
    }
    // first sample with time >= t
    let k = traj.times.partition_point(|&s| s < t);
    if traj.times[k] == t {
        let cut = NodeTrajectory {
            times: traj.times[..=k].to_vec(),
            a_values: traj.a_values[..=k].to_vec(),
            h_values: traj.h_values[..=k].to_vec(),
        };
        return Ok(*theta_series(&cut, n0, p)?.last().unwrap());
    }
    let (t0, t1) = (traj.times[k - 1], traj.times[k]);
    let w = (t - t0) / (t1 - t0);
    let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
    let mut cut = NodeTrajectory {
        times: traj.times[..k].to_vec(),
        a_values: traj.a_values[..k].to_vec(),
        h_values: traj.h_values[..k].to_vec(),
    };
    cut.times.push(t);
    cut.a_values.push(lerp(&traj.a_values));
    cut.h_values.push(lerp(&traj.h_values));
    Ok(*theta_series(&cut, n0, p)?.last().unwrap())
}

/// `g(t) = ∫₀ᵗ f / f(t)` at every sample, with the integral by cumulative trapezoid.
///
/// For positive nondecreasing `f` the result never exceeds `t`.
pub fn ratio_g(f_samples: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if f_samples.len() != times.len() || times.is_empty() {
        return Err(Error::InvalidTrajectory(
            "ratio helper needs equal, nonzero sample counts".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTrajectory("times must be strictly increasing".into()));
    }
    if let Some((index, &value)) = f_samples.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveF { index, value });
    }
    if let Some(index) = (1..f_samples.len()).find(|&k| f_samples[k] < f_samples[k - 1]) {
        return Err(Error::DecreasingF { index });
    }
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(times.len());
    out.push(0.0);
    for k in 1..times.len() {
        integral += 0.5 * (times[k] - times[k - 1]) * (f_samples[k - 1] + f_samples[k]);
        out.push(integral / f_samples[k]);
    }
    Ok(out)
}

/// Sup norms of a trajectory pair used by the Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNorms {
    pub a1: f64,
    pub h1: f64,
    pub a2: f64,
    pub h2: f64,
}

impl PairNorms {
    pub fn of(first: &NodeTrajectory, second: &NodeTrajectory) -> Self {
        let (a1, h1) = first.sup_norms();
        let (a2, h2) = second.sup_norms();
        PairNorms { a1, h1, a2, h2 }
    }
}

/// Coefficients of `‖ΔA‖∞` and `‖ΔH‖∞` in the explicit Lipschitz estimate
/// for Θ over the horizon `horizon`.
///
/// ```text
/// |Θ₁ − Θ₂| ≤ ‖N0‖ (β₁T‖ΔA‖ + α_Hγ_H T‖ΔH‖)
///           + r_N ( e^{μT}T² e^{α_Hγ_H‖H₂‖} β₁‖ΔA‖ + e^{μT}T² e^{β₁T‖A₁‖} α_Hγ_H‖ΔH‖
///                 + (β₁‖ΔA‖ + α_Hγ_H‖ΔH‖) T² e^{μT} e^{α_Hγ_H T‖H₂‖} e^{β₁T‖A₂‖} )
/// ```
fn lipschitz_coefficients(p: &ModelParams, n0_sup: f64, horizon: f64, norms: &PairNorms) -> (f64, f64) {
    let t = horizon;
    let ag = p.alpha_h * p.gamma_h;
    let growth = (p.mu_n * t).exp() * t * t;
    let joint = growth * (ag * t * norms.h2).exp() * (p.beta_1 * t * norms.a2).exp();
    let coef_a = n0_sup * p.beta_1 * t
        + p.r_n * (growth * (ag * norms.h2).exp() * p.beta_1 + p.beta_1 * joint);
    let coef_h = n0_sup * ag * t
        + p.r_n * (growth * (p.beta_1 * t * norms.a1).exp() * ag + ag * joint);
    (coef_a, coef_h)
}

/// A-priori bounds on Θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    /// `‖N0‖∞ + r_N T`.
    pub upper: f64,
    /// Lipschitz constant with respect to `max(‖ΔA‖∞, ‖ΔH‖∞)`.
    pub lipschitz_c1: f64,
}

impl ThetaBounds {
    pub fn new(p: &ModelParams, n0_sup: f64, horizon: f64, norms: &PairNorms) -> Self {
        let (ca, ch) = lipschitz_coefficients(p, n0_sup, horizon, norms);
        ThetaBounds {
            upper: n0_sup + p.r_n * horizon,
            lipschitz_c1: ca + ch,
        }
    }
}

/// Right-hand side of the Lipschitz estimate for a concrete perturbation,
/// term by term (never larger than `C₁ · max(‖ΔA‖, ‖ΔH‖)`).
pub fn lipschitz_bound(
    p: &ModelParams,
    n0_sup: f64,
    horizon: f64,
    norms: &PairNorms,
    delta_a: f64,
    delta_h: f64,
) -> f64 {
    let (ca, ch) = lipschitz_coefficients(p, n0_sup, horizon, norms);
    ca * delta_a + ch * delta_h
}

/// Outcome of [`verify_n_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub max_rel_err: f64,
    pub comparisons: usize,
    /// Node and time of the worst comparison.
    pub worst_node: (usize, usize),
    pub worst_time: f64,
}

/// Compares the solver's N at every snapshot against Θ built from the
/// recorded A/H histories.
///
/// `sample_nodes = None` uses every recorded node.
pub fn verify_n_field(
    result: &RunResult,
    p: &ModelParams,
    sample_nodes: Option<&[(usize, usize)]>,
) -> Result<VerifyReport> {
    if result.trajectories.is_empty() {
        return Err(Error::MissingTrajectories);
    }
    let mut report = VerifyReport {
        max_rel_err: 0.0,
        comparisons: 0,
        worst_node: (0, 0),
        worst_time: 0.0,
    };
    for rec in &result.trajectories {
        if let Some(nodes) = sample_nodes {
            if !nodes.contains(&rec.node) {
                continue;
            }
        }
        let series = theta_series(&rec.trajectory, rec.n0, p)?;
        for snap in &result.snapshots {
            if snap.t > rec.trajectory.end_time() {
                continue;
            }
            let k = rec.trajectory.times.partition_point(|&s| s < snap.t);
            let expected = if rec.trajectory.times[k] == snap.t {
                series[k]
            } else {
                theta(&rec.trajectory, rec.n0, p, snap.t)?
            };
            let (i, j) = rec.node;
            let got = snap.normal.get(i, j);
            let rel = (got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            report.comparisons += 1;
            if !(rel <= report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_node = rec.node;
                report.worst_time = snap.t;
            }
        }
    }
    if report.comparisons == 0 {
        return Err(Error::MissingTrajectories);
    }
    Ok(report)
}

/// RK4 on the spatially homogeneous system (no diffusion) with the same
/// step schedule the PDE integrator uses; returns `(t, [N, A, H])` after
/// every step, starting with the initial value.
pub fn ode_reference_run(
    p: &ModelParams,
    initial: [f64; 3],
    t_end: f64,
    dt: f64,
) -> Vec<(f64, [f64; 3])> {
    ode_reference_run_with_stops(p, initial, &[t_end], dt)
}

/// As [`ode_reference_run`], landing exactly on each of `stops` (sorted).
pub fn ode_reference_run_with_stops(
    p: &ModelParams,
    initial: [f64; 3],
    stops: &[f64],
    dt: f64,
) -> Vec<(f64, [f64; 3])> {
    let f = |y: &[f64; 3]| {
        let (a, b, c) = reaction_rhs(y[0], y[1], y[2], p);
        [a, b, c]
    };
    let stage = |y: &[f64; 3], h: f64, k: &[f64; 3]| std::array::from_fn::<f64, 3, _>(|i| y[i] + h * k[i]);
    let mut y = initial;
    let mut out = vec![(0.0, y)];
    for step in Schedule::new(0.0, stops, dt) {
        let h = step.dt;
        let half = 0.5 * h;
        let k1 = f(&y);
        let k2 = f(&stage(&y, half, &k1));
        let k3 = f(&stage(&y, half, &k2));
        let k4 = f(&stage(&y, h, &k3));
        let sixth = h / 6.0;
        y = std::array::from_fn(|i| rk4_combine(y[i], sixth, k1[i], k2[i], k3[i], k4[i]));
        out.push((step.t_new, y));
    }
    out
}
