//! Seeded random sweeps over the Θ operator and the ratio helper.
//!
//! Every property draws its cases from its own ChaCha stream derived from
//! the base seed, so the report depends only on `(seed, cases, c1_scale)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::theta::{lipschitz_bound, ratio_g, theta_series, NodeTrajectory, PairNorms};
use crate::types::ModelParams;

/// Horizon of the ratio-helper sweep.
pub const RATIO_HORIZON: f64 = 50.0;
pub const RATIO_TOL: f64 = 1e-9;
/// Relative slack for floating-point round-off in the Θ comparisons.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropsConfig {
    pub seed: u64,
    pub cases: usize,
    /// Multiplies the Lipschitz right-hand side. Anything other than 1 is a
    /// harness sensitivity check.
    pub c1_scale: f64,
}

impl Default for PropsConfig {
    fn default() -> Self {
        PropsConfig {
            seed: 0,
            cases: 1000,
            c1_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs` over all comparisons (≤ 1 means no violation).
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropsReport {
    pub seed: u64,
    pub outcomes: Vec<PropertyOutcome>,
}

impl PropsReport {
    pub fn total_violations(&self) -> usize {
        self.outcomes.iter().map(|o| o.violations).sum()
    }

    pub fn get(&self, name: &str) -> Option<&PropertyOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }
}

impl fmt::Display for PropsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        for o in &self.outcomes {
            writeln!(
                f,
                "{:<16} cases={:<6} violations={:<6} worst_ratio={:.6e}",
                o.name, o.cases, o.violations, o.worst_ratio
            )?;
        }
        write!(f, "total_violations={}", self.total_violations())
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    violations: usize,
    worst_ratio: f64,
}

impl Tally {
    fn new(name: &'static str, cases: usize) -> Self {
        Tally {
            name,
            cases,
            violations: 0,
            worst_ratio: 0.0,
        }
    }

    /// Records one case given its worst `lhs/rhs` ratio and whether any
    /// comparison failed.
    fn case(&mut self, ratio: f64, failed: bool) {
        self.worst_ratio = self.worst_ratio.max(ratio);
        if failed {
            self.violations += 1;
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            cases: self.cases,
            violations: self.violations,
            worst_ratio: self.worst_ratio,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Strictly increasing times from 0 to exactly `horizon`.
fn random_times(rng: &mut ChaCha8Rng, samples: usize, horizon: f64) -> Vec<f64> {
    let mut acc = vec![0.0];
    for _ in 1..samples {
        let last = *acc.last().unwrap();
        acc.push(last + rng.gen_range(0.1..1.0));
    }
    let total = *acc.last().unwrap();
    let mut times: Vec<f64> = acc.iter().map(|c| horizon * (c / total)).collect();
    *times.last_mut().unwrap() = horizon;
    times
}

/// Random nonnegative trajectory with `A ≤ ra`, `H ≤ rh`.
fn random_trajectory(rng: &mut ChaCha8Rng, ra: f64, rh: f64) -> NodeTrajectory {
    let horizon = log_uniform(rng, 1e-3, 5.0);
    let samples = rng.gen_range(2..=200);
    let times = random_times(rng, samples, horizon);
    let a = (0..samples).map(|_| rng.gen_range(0.0..=ra)).collect();
    let h = (0..samples).map(|_| rng.gen_range(0.0..=rh)).collect();
    NodeTrajectory::new(times, a, h).expect("generated trajectory is valid")
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::baseline();
    p.r_n = rng.gen_range(0.0..=2.0);
    p.mu_n = rng.gen_range(0.0..=2.0);
    p.beta_1 = rng.gen_range(0.0..=3.0);
    p.alpha_h = log_uniform(rng, 1.0, 4000.0);
    p.gamma_h = log_uniform(rng, 1e-4, 0.1);
    p
}

fn prop_ratio_g(cfg: &PropsConfig) -> PropertyOutcome {
    let mut rng = stream(cfg.seed, 1);
    let mut tally = Tally::new("ratio_g", cfg.cases);
    for _ in 0..cfg.cases {
        let samples = rng.gen_range(2..=500);
        let times = random_times(&mut rng, samples, RATIO_HORIZON);
        let mut level = log_uniform(&mut rng, 1e-3, 10.0);
        let jump_prob = rng.gen_range(0.0..=0.2);
        let mut f = Vec::with_capacity(samples);
        for _ in 0..samples {
            if rng.gen_bool(jump_prob) {
                level += log_uniform(&mut rng, 1e-3, 100.0);
            }
            f.push(level);
        }
        let g = ratio_g(&f, &times).expect("generated samples are monotone and positive");
        let mut ratio: f64 = 0.0;
        let mut failed = false;
        for (&gk, &t) in g.iter().zip(&times) {
            let rhs = t.min(RATIO_HORIZON);
            if gk > rhs + RATIO_TOL {
                failed = true;
            }
            if rhs > 0.0 {
                ratio = ratio.max(gk / rhs);
            }
        }
        tally.case(ratio, failed);
    }
    tally.finish()
}

fn prop_theta_bound(cfg: &PropsConfig) -> PropertyOutcome {
    let mut rng = stream(cfg.seed, 2);
    let mut tally = Tally::new("theta_bound", cfg.cases);
    for _ in 0..cfg.cases {
        let p = random_params(&mut rng);
        let n0 = rng.gen_range(0.0..=2.0);
        let traj = random_trajectory(&mut rng, 1.0, 1.0);
        let upper = n0 + p.r_n * traj.end_time();
        let series = theta_series(&traj, n0, &p).expect("valid trajectory");
        let mut ratio: f64 = 0.0;
        let mut failed = false;
        for &v in &series {
            if v < 0.0 || !v.is_finite() || v > upper * (1.0 + REL_SLACK) {
                failed = true;
            }
            if upper > 0.0 {
                ratio = ratio.max(v / upper);
            }
        }
        tally.case(ratio, failed);
    }
    tally.finish()
}

fn prop_theta_sharp(cfg: &PropsConfig) -> PropertyOutcome {
    let mut rng = stream(cfg.seed, 3);
    let mut tally = Tally::new("theta_sharp", cfg.cases);
    for _ in 0..cfg.cases {
        let mut p = random_params(&mut rng);
        p.mu_n = rng.gen_range(0.05..=2.0);
        let eq = p.normal_equilibrium();
        let n0 = rng.gen_range(0.0..=eq);
        let traj = random_trajectory(&mut rng, 1.0, 1.0);
        let series = theta_series(&traj, n0, &p).expect("valid trajectory");
        let mut ratio: f64 = 0.0;
        let mut failed = false;
        for &v in &series {
            if v > eq * (1.0 + REL_SLACK) {
                failed = true;
            }
            if eq > 0.0 {
                ratio = ratio.max(v / eq);
            }
        }
        tally.case(ratio, failed);
    }
    tally.finish()
}

fn prop_lipschitz(cfg: &PropsConfig) -> PropertyOutcome {
    let mut rng = stream(cfg.seed, 4);
    let mut tally = Tally::new("lipschitz", cfg.cases);
    for case in 0..cfg.cases {
        let p = random_params(&mut rng);
        let n0 = rng.gen_range(0.0..=2.0);
        let first = random_trajectory(&mut rng, 1.0, 1.0);
        let delta = log_uniform(&mut rng, 1e-4, 0.1);
        let mut second = first.clone();
        // constant shifts keep the perturbation coherent in time, which is
        // where the estimate is closest to tight
        match case % 4 {
            0 => second.a_values.iter_mut().for_each(|a| *a += delta),
            1 => second.h_values.iter_mut().for_each(|h| *h += delta),
            _ => {
                for v in second.a_values.iter_mut().chain(second.h_values.iter_mut()) {
                    *v = (*v + rng.gen_range(-delta..=delta)).max(0.0);
                }
            }
        }
        let norms = PairNorms::of(&first, &second);
        let da = max_abs_diff(&first.a_values, &second.a_values);
        let dh = max_abs_diff(&first.h_values, &second.h_values);
        let rhs = cfg.c1_scale * lipschitz_bound(&p, n0, first.end_time(), &norms, da, dh);
        let s1 = theta_series(&first, n0, &p).expect("valid trajectory");
        let s2 = theta_series(&second, n0, &p).expect("valid trajectory");
        let lhs = max_abs_diff(&s1, &s2);
        let failed = lhs > rhs * (1.0 + REL_SLACK) + f64::MIN_POSITIVE;
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        tally.case(ratio, failed);
    }
    tally.finish()
}

fn prop_monotone(cfg: &PropsConfig) -> PropertyOutcome {
    let mut rng = stream(cfg.seed, 5);
    let mut tally = Tally::new("monotonicity", cfg.cases);
    for _ in 0..cfg.cases {
        let p = random_params(&mut rng);
        let n0 = rng.gen_range(0.0..=2.0);
        let low = random_trajectory(&mut rng, 1.0, 1.0);
        let mut high = low.clone();
        for v in high.a_values.iter_mut().chain(high.h_values.iter_mut()) {
            if rng.gen_bool(0.5) {
                *v += rng.gen_range(0.0..=0.5);
            }
        }
        let s_low = theta_series(&low, n0, &p).expect("valid trajectory");
        let s_high = theta_series(&high, n0, &p).expect("valid trajectory");
        let mut ratio: f64 = 0.0;
        let mut failed = false;
        for (&hi, &lo) in s_high.iter().zip(&s_low) {
            if hi > lo * (1.0 + REL_SLACK) {
                failed = true;
            }
            if lo > 0.0 {
                ratio = ratio.max(hi / lo);
            }
        }
        tally.case(ratio, failed);
    }
    tally.finish()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs all sweeps. The sweeps are independent and run in parallel; the
/// report order is fixed.
pub fn run_props(cfg: &PropsConfig) -> PropsReport {
    type Sweep = fn(&PropsConfig) -> PropertyOutcome;
    let sweeps: [Sweep; 5] = [prop_ratio_g, prop_theta_bound, prop_theta_sharp, prop_lipschitz, prop_monotone];
    use rayon::prelude::*;
    let outcomes = sweeps.par_iter().map(|s| s(cfg)).collect();
    PropsReport {
        seed: cfg.seed,
        outcomes,
    }
}
