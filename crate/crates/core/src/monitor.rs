//! Runtime checks of the a-priori bounds: nonnegativity, `A ≤ k_A`, and the
//! upper bounds on N.

use crate::types::{ModelParams, SimState};

/// Worst violations seen, stored as nonnegative magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViolationReport {
    pub worst_negative_normal: f64,
    pub worst_negative_tumor: f64,
    pub worst_negative_acid: f64,
    /// Largest `A − k_A` above tolerance.
    pub worst_tumor_excess: f64,
    /// Largest excess of N over `max(N0max, r_N/μ_N)`.
    pub worst_normal_excess: f64,
    /// Largest excess of N over `‖N0‖∞ + r_N·T` (the horizon-dependent ceiling).
    pub worst_normal_excess_horizon: f64,
    pub first_violation_time: Option<f64>,
    pub violation_count: u64,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }

    /// Accumulates another report (e.g. from a later step) into this one.
    pub fn merge(&mut self, other: &ViolationReport) {
        self.worst_negative_normal = self.worst_negative_normal.max(other.worst_negative_normal);
        self.worst_negative_tumor = self.worst_negative_tumor.max(other.worst_negative_tumor);
        self.worst_negative_acid = self.worst_negative_acid.max(other.worst_negative_acid);
        self.worst_tumor_excess = self.worst_tumor_excess.max(other.worst_tumor_excess);
        self.worst_normal_excess = self.worst_normal_excess.max(other.worst_normal_excess);
        self.worst_normal_excess_horizon = self
            .worst_normal_excess_horizon
            .max(other.worst_normal_excess_horizon);
        self.first_violation_time = match (self.first_violation_time, other.first_violation_time) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.violation_count += other.violation_count;
    }
}

/// Scans every node of `s` against the bounds.
///
/// `n0_max` is the sup of the initial N field and `t_horizon` the final time
/// of the run. A value counts as a violation only when it is beyond `tol`;
/// each (node, bound) pair counts once.
pub fn check_state(
    s: &SimState,
    p: &ModelParams,
    n0_max: f64,
    t_horizon: f64,
    tol: f64,
) -> ViolationReport {
    let sharp_normal = if p.mu_n > 0.0 {
        n0_max.max(p.normal_equilibrium())
    } else {
        f64::INFINITY
    };
    let horizon_normal = n0_max + p.r_n * t_horizon;

    let mut r = ViolationReport::default();
    let mut count = 0u64;
    let mut check = |worst: &mut f64, excess: f64| {
        if excess > tol {
            *worst = worst.max(excess);
            count += 1;
        }
    };
    for ((&n, &a), &h) in s
        .normal
        .values()
        .iter()
        .zip(s.tumor.values())
        .zip(s.acid.values())
    {
        check(&mut r.worst_negative_normal, -n);
        check(&mut r.worst_negative_tumor, -a);
        check(&mut r.worst_negative_acid, -h);
        check(&mut r.worst_tumor_excess, a - p.k_a);
        check(&mut r.worst_normal_excess, n - sharp_normal);
        check(&mut r.worst_normal_excess_horizon, n - horizon_normal);
    }
    r.violation_count = count;
    if count > 0 {
        r.first_violation_time = Some(s.t);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Field2D;

    fn state(n: f64, a: f64, h: f64) -> SimState {
        SimState {
            t: 2.5,
            normal: Field2D::constant(9, n),
            tumor: Field2D::constant(9, a),
            acid: Field2D::constant(9, h),
        }
    }

    #[test]
    fn equilibrium_is_clean() {
        let r = check_state(&state(1.0, 0.0, 0.0), &ModelParams::baseline(), 1.0, 50.0, 1e-8);
        assert!(r.is_clean());
        assert_eq!(r, ViolationReport::default());
    }

    #[test]
    fn capacity_bound_is_inclusive() {
        let r = check_state(&state(0.5, 1.0, 0.3), &ModelParams::baseline(), 1.0, 50.0, 1e-8);
        assert!(r.is_clean());
    }

    #[test]
    fn single_excess_is_counted_once() {
        let mut s = state(1.0, 0.5, 0.0);
        s.tumor.set(3, 4, 1.0 + 1e-4);
        let r = check_state(&s, &ModelParams::baseline(), 1.0, 50.0, 1e-8);
        assert_eq!(r.violation_count, 1);
        assert!((r.worst_tumor_excess - 1e-4).abs() < 1e-15);
        assert_eq!(r.first_violation_time, Some(2.5));
    }

    #[test]
    fn negatives_and_normal_bounds() {
        let mut s = state(1.0, 0.1, 0.1);
        s.normal.set(0, 0, -1e-3);
        s.acid.set(1, 1, -2e-6);
        s.tumor.set(2, 2, -1e-9); // inside tolerance
        s.normal.set(4, 4, 1.5);
        let r = check_state(&s, &ModelParams::baseline(), 1.0, 0.1, 1e-8);
        assert_eq!(r.worst_negative_normal, 1e-3);
        assert_eq!(r.worst_negative_acid, 2e-6);
        assert_eq!(r.worst_negative_tumor, 0.0);
        assert!((r.worst_normal_excess - 0.5).abs() < 1e-15);
        // horizon ceiling 1 + 1*0.1
        assert!((r.worst_normal_excess_horizon - 0.4).abs() < 1e-15);
        assert_eq!(r.violation_count, 4);
    }

    #[test]
    fn pure_and_mergeable() {
        let mut s = state(1.0, 0.5, 0.0);
        s.tumor.set(0, 0, 2.0);
        let p = ModelParams::baseline();
        let a = check_state(&s, &p, 1.0, 50.0, 1e-8);
        let b = check_state(&s, &p, 1.0, 50.0, 1e-8);
        assert_eq!(a, b);
        let mut m = a;
        m.merge(&ViolationReport::default());
        assert_eq!(m, a);
        m.merge(&b);
        assert_eq!(m.violation_count, 2);
        assert_eq!(m.worst_tumor_excess, 1.0);
    }
}
