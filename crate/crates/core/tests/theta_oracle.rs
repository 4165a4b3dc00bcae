//! Θ against a brute-force recomputation: the quotient form evaluated with
//! adaptive Simpson on every sample interval and an analytic Φ.

use acidfront::theta::{theta, theta_series, NodeTrajectory};
use acidfront::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-linear A, H and the exponent Φ(s) = ∫₀ˢ rate.
struct Oracle<'a> {
    traj: &'a NodeTrajectory,
    p: ModelParams,
    /// Φ at each sample time.
    phi_at: Vec<f64>,
}

impl<'a> Oracle<'a> {
    fn new(traj: &'a NodeTrajectory, p: ModelParams) -> Self {
        let mut phi_at = vec![0.0];
        for k in 1..traj.times.len() {
            let h = traj.times[k] - traj.times[k - 1];
            let mean = |v: &[f64]| 0.5 * (v[k - 1] + v[k]);
            let inc = p.mu_n * h
                + p.alpha_h * p.gamma_h * h * mean(&traj.h_values)
                + p.beta_1 * h * mean(&traj.a_values);
            phi_at.push(phi_at[k - 1] + inc);
        }
        Oracle { traj, p, phi_at }
    }

    fn phi(&self, k: usize, s: f64) -> f64 {
        // s in [t_k, t_{k+1}]
        let t = &self.traj.times;
        let u = s - t[k];
        let h = t[k + 1] - t[k];
        let lin = |v: &[f64]| v[k] * u + 0.5 * (v[k + 1] - v[k]) * u * u / h;
        self.phi_at[k]
            + self.p.mu_n * u
            + self.p.alpha_h * self.p.gamma_h * lin(&self.traj.h_values)
            + self.p.beta_1 * lin(&self.traj.a_values)
    }

    fn theta_at_sample(&self, n0: f64, m: usize) -> f64 {
        let mut integral = 0.0;
        for k in 0..m {
            let f = |s: f64| self.phi(k, s).exp();
            integral += adaptive_simpson(&f, self.traj.times[k], self.traj.times[k + 1], 1e-15);
        }
        (n0 + self.p.r_n * integral) / self.phi_at[m].exp()
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, rel * whole.abs().max(f64::MIN_POSITIVE), 40)
}

fn random_trajectory(rng: &mut ChaCha8Rng) -> NodeTrajectory {
    let samples = rng.gen_range(2..=25);
    let horizon = rng.gen_range(0.01..=2.0);
    let mut times = vec![0.0];
    for _ in 1..samples {
        times.push(times.last().unwrap() + rng.gen_range(0.2..1.0));
    }
    let total = *times.last().unwrap();
    for t in times.iter_mut() {
        *t *= horizon / total;
    }
    let a = (0..samples).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let h = (0..samples).map(|_| rng.gen_range(0.0..=1.0)).collect();
    NodeTrajectory::new(times, a, h).unwrap()
}

#[test]
fn theta_matches_adaptive_quadrature() {
    let p = ModelParams::baseline();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let traj = random_trajectory(&mut rng);
        let n0 = rng.gen_range(0.0..=1.0);
        let oracle = Oracle::new(&traj, p);
        let series = theta_series(&traj, n0, &p).unwrap();
        for (m, &got) in series.iter().enumerate() {
            let want = oracle.theta_at_sample(n0, m);
            let rel = (got - want).abs() / want.abs();
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn theta_between_samples_matches_quadrature() {
    let p = ModelParams::baseline();
    let traj = NodeTrajectory::new(vec![0.0, 0.4, 1.0], vec![0.1, 0.6, 0.3], vec![0.0, 0.2, 0.05]).unwrap();
    // splitting at t = 0.7 with a linearly interpolated sample is the same interpolant
    let split = NodeTrajectory::new(
        vec![0.0, 0.4, 0.7, 1.0],
        vec![0.1, 0.6, 0.45, 0.3],
        vec![0.0, 0.2, 0.125, 0.05],
    )
    .unwrap();
    let oracle = Oracle::new(&split, p);
    let want = oracle.theta_at_sample(0.8, 2);
    let got = theta(&traj, 0.8, &p, 0.7).unwrap();
    assert!((got - want).abs() <= 1e-8 * want, "{got} {want}");
}

#[test]
fn pure_decay_closed_form() {
    let p = ModelParams {
        r_n: 0.7,
        mu_n: 1.3,
        ..ModelParams::baseline()
    };
    let times: Vec<f64> = (0..=500).map(|k| k as f64 * 0.01).collect();
    let zeros = vec![0.0; times.len()];
    let traj = NodeTrajectory::new(times.clone(), zeros.clone(), zeros).unwrap();
    let series = theta_series(&traj, 2.0, &p).unwrap();
    for (t, got) in times.iter().zip(series) {
        let eq = p.r_n / p.mu_n;
        let want = 2.0 * (-p.mu_n * t).exp() + eq * (1.0 - (-p.mu_n * t).exp());
        assert!((got - want).abs() <= 1e-13 * want, "t={t}: {got} vs {want}");
    }
}

#[test]
fn pure_normal_run_agrees_with_solver() {
    use acidfront::integrator::{run_with, RunOptions};
    use acidfront::theta::verify_n_field;
    use acidfront::ScenarioPreset;

    let mut cfg = ScenarioPreset::Fig2.config().with_nodes(51).unwrap().with_t_end(5.0);
    cfg.init.a0_amplitude = 0.0;
    cfg.init.h0 = 0.0;
    cfg.init.n0 = 0.3;
    cfg.snapshot_times = vec![0.0, 1.0, 2.5, 5.0];
    let result = run_with(&cfg, RunOptions::recording_default_nodes()).unwrap();
    let report = verify_n_field(&result, &cfg.params, None).unwrap();
    assert_eq!(report.comparisons, 36);
    assert!(report.max_rel_err <= 1e-9, "{report:?}");
}
