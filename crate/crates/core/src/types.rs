//! Parameter sets, grid geometry, field storage and scenario configuration.

use crate::error::{Error, ParamViolation, Result};

/// Rate and diffusion constants of the normal/tumor/acid system.
///
/// Normal cells (N) do not diffuse; tumor cells (A) and excess acid (H) do,
/// with coefficients `xi_a` and `xi_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Normal-cell inflow rate.
    pub r_n: f64,
    /// Normal-cell mortality.
    pub mu_n: f64,
    /// Damage of tumor cells on normal cells.
    pub beta_1: f64,
    /// Damage of normal cells on tumor cells.
    pub beta_3: f64,
    /// Acid damage multiplier.
    pub alpha_h: f64,
    /// Acid absorption rate by normal cells.
    pub gamma_h: f64,
    /// Tumor growth rate.
    pub r_a: f64,
    /// Tumor carrying capacity.
    pub k_a: f64,
    /// Tumor natural mortality.
    pub mu_a: f64,
    /// Tumor apoptosis rate.
    pub eps_a: f64,
    /// Acid production rate.
    pub nu: f64,
    /// Acid clearance rate.
    pub tau_h: f64,
    /// Tumor diffusion coefficient.
    pub xi_a: f64,
    /// Acid diffusion coefficient.
    pub xi_h: f64,
}

impl ModelParams {
    /// The invasion parameter set: rescaled populations (r_N = mu_N = k_A = 1),
    /// acid damage strong enough for the tumor to invade.
    pub fn baseline() -> Self {
        ModelParams {
            r_n: 1.0,
            mu_n: 1.0,
            beta_1: 1.5,
            beta_3: 1.0,
            alpha_h: 2200.0,
            gamma_h: 0.01,
            r_a: 1.0,
            k_a: 1.0,
            mu_a: 0.05,
            eps_a: 0.05,
            nu: 2.0,
            tau_h: 0.9,
            xi_a: 0.001,
            xi_h: 0.01,
        }
    }

    pub(crate) fn named(&self) -> [(&'static str, f64); 14] {
        [
            ("r_N", self.r_n),
            ("mu_N", self.mu_n),
            ("beta_1", self.beta_1),
            ("beta_3", self.beta_3),
            ("alpha_H", self.alpha_h),
            ("gamma_H", self.gamma_h),
            ("r_A", self.r_a),
            ("k_A", self.k_a),
            ("mu_A", self.mu_a),
            ("eps_A", self.eps_a),
            ("nu", self.nu),
            ("tau_H", self.tau_h),
            ("xi_A", self.xi_a),
            ("xi_H", self.xi_h),
        ]
    }

    /// Healthy equilibrium density of normal cells, `r_N / mu_N`.
    ///
    /// Infinite when `mu_N = 0`.
    pub fn normal_equilibrium(&self) -> f64 {
        self.r_n / self.mu_n
    }

    pub fn max_diffusion(&self) -> f64 {
        self.xi_a.max(self.xi_h)
    }
}

/// Checks every constraint on a parameter set and returns all violations at once.
pub fn validate_params(p: &ModelParams) -> Result<()> {
    let mut violations = Vec::new();
    for (name, value) in p.named() {
        if !value.is_finite() {
            violations.push(ParamViolation::NonFinite(name));
        } else if value < 0.0 {
            violations.push(ParamViolation::NegativeRate(name));
        }
    }
    if p.k_a == 0.0 {
        violations.push(ParamViolation::ZeroCarryingCapacity);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(violations))
    }
}

/// Boundary condition applied to the diffusing fields (A and H).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Homogeneous Neumann (zero flux), realised with mirrored ghost nodes.
    NeumannZeroFlux,
    /// Homogeneous Dirichlet: A and H pinned to zero on the boundary.
    DirichletZero,
}

impl BoundaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::NeumannZeroFlux => "neumann",
            BoundaryKind::DirichletZero => "dirichlet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "neumann" => Some(BoundaryKind::NeumannZeroFlux),
            "dirichlet" => Some(BoundaryKind::DirichletZero),
            _ => None,
        }
    }
}

/// Uniform square grid on `[0, L]²` including both boundary nodes on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    side_length: f64,
    nodes: usize,
    dx: f64,
    boundary: BoundaryKind,
}

impl GridSpec {
    pub fn new(side_length: f64, nodes: usize, boundary: BoundaryKind) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per side, got {nodes}"
            )));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive and finite, got {side_length}"
            )));
        }
        Ok(GridSpec {
            side_length,
            nodes,
            dx: side_length / (nodes - 1) as f64,
            boundary,
        })
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    /// Nodes per side, boundary nodes included.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: BoundaryKind) -> Self {
        self.boundary = boundary;
        self
    }

    /// Coordinate of node index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        self.side_length * i as f64 / (self.nodes - 1) as f64
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let last = self.nodes - 1;
        i == 0 || j == 0 || i == last || j == last
    }

    /// Composite trapezoidal weight of node `(i, j)` (without the `dx²` factor).
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        let edge = |k: usize| if k == 0 || k == self.nodes - 1 { 0.5 } else { 1.0 };
        edge(i) * edge(j)
    }

    /// Trapezoidal-rule integral of a field over the domain.
    pub fn integrate(&self, f: &Field2D) -> f64 {
        let n = self.nodes;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                sum += self.trapezoid_weight(i, j) * f.get(i, j);
            }
        }
        sum * self.dx * self.dx
    }
}

/// One scalar unknown sampled on an `n × n` grid, row-major with row = x₁ index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n: usize,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field2D {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Field2D { n, values }
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: (values.len() as f64).sqrt() as usize,
            });
        }
        Ok(Field2D { n, values })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n + j] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &Field2D) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.n != grid.nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.nodes(),
                found: self.n,
            });
        }
        Ok(())
    }
}

/// The `(N, A, H)` triple at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Normal cells, N.
    pub normal: Field2D,
    /// Tumor cells, A.
    pub tumor: Field2D,
    /// Excess acid, H.
    pub acid: Field2D,
}

impl SimState {
    pub fn fields(&self) -> [&Field2D; 3] {
        [&self.normal, &self.tumor, &self.acid]
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        for f in self.fields() {
            f.check_grid(grid)?;
        }
        if !(self.t >= 0.0) {
            return Err(Error::InvalidRecipe(format!("negative start time {}", self.t)));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.is_finite())
    }

    /// Largest absolute difference over all three fields.
    pub fn max_abs_diff(&self, other: &SimState) -> f64 {
        self.normal
            .max_abs_diff(&other.normal)
            .max(self.tumor.max_abs_diff(&other.tumor))
            .max(self.acid.max_abs_diff(&other.acid))
    }
}

/// Initial data: constant N and H, Gaussian bump of tumor cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitRecipe {
    pub n0: f64,
    pub a0_amplitude: f64,
    /// Decay rate `δ_A` of the bump, in 1/length².
    pub delta_a: f64,
    /// Bump center; `None` means the domain center.
    pub a0_center: Option<(f64, f64)>,
    pub h0: f64,
}

impl InitRecipe {
    pub fn baseline() -> Self {
        InitRecipe {
            n0: 1.0,
            a0_amplitude: 0.22,
            delta_a: 1000.0,
            a0_center: None,
            h0: 0.0,
        }
    }

    /// Checks nonnegativity of the initial data and `A0 ≤ k_A`.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        let finite = [self.n0, self.a0_amplitude, self.delta_a, self.h0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRecipe("non-finite value".into()));
        }
        if self.n0 < 0.0 {
            return Err(Error::InvalidRecipe(format!("N0 = {} is negative", self.n0)));
        }
        if self.h0 < 0.0 {
            return Err(Error::InvalidRecipe(format!("H0 = {} is negative", self.h0)));
        }
        if self.a0_amplitude < 0.0 || self.a0_amplitude > p.k_a {
            return Err(Error::InvalidRecipe(format!(
                "A0 = {} outside [0, k_A = {}]",
                self.a0_amplitude, p.k_a
            )));
        }
        if self.delta_a < 0.0 {
            return Err(Error::InvalidRecipe(format!(
                "delta_A = {} is negative",
                self.delta_a
            )));
        }
        Ok(())
    }
}

/// Invariant-monitor settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSettings {
    pub tol: f64,
    /// Abort the run on the first step with violations.
    pub fatal: bool,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        MonitorSettings {
            tol: 1e-8,
            fatal: true,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub t_end: f64,
    /// Strictly increasing, inside `[0, t_end]`.
    pub snapshot_times: Vec<f64>,
    pub init: InitRecipe,
    pub cfl_safety: f64,
    pub monitor: MonitorSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        validate_params(&self.params)?;
        self.init.validate(&self.params)?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidConfig(format!("t_end = {} invalid", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cfl_safety = {} outside (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.monitor.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol = {} invalid", self.monitor.tol)));
        }
        for (k, &t) in self.snapshot_times.iter().enumerate() {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(Error::InvalidConfig(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.t_end
                )));
            }
            if k > 0 && t <= self.snapshot_times[k - 1] {
                return Err(Error::InvalidConfig(
                    "snapshot times must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Samples the initial-condition recipe on the grid.
///
/// Under `DirichletZero` the boundary values of A and H are set to zero.
pub fn build_initial_state(cfg: &ScenarioConfig) -> Result<SimState> {
    cfg.validate()?;
    let grid = &cfg.grid;
    let n = grid.nodes();
    let init = &cfg.init;
    let (cx, cy) = init
        .a0_center
        .unwrap_or((grid.side_length() / 2.0, grid.side_length() / 2.0));
    let dirichlet = grid.boundary() == BoundaryKind::DirichletZero;

    let tumor = Field2D::from_fn(n, |i, j| {
        if dirichlet && grid.is_boundary(i, j) {
            return 0.0;
        }
        let dx1 = grid.coord(i) - cx;
        let dx2 = grid.coord(j) - cy;
        // sum of squares is commutative, so the bump is exactly symmetric
        // under transposition when the center sits on the diagonal
        init.a0_amplitude * (-init.delta_a * (dx1 * dx1 + dx2 * dx2)).exp()
    });
    let acid = Field2D::from_fn(n, |i, j| {
        if dirichlet && grid.is_boundary(i, j) {
            0.0
        } else {
            init.h0
        }
    });
    let state = SimState {
        t: 0.0,
        normal: Field2D::constant(n, init.n0),
        tumor,
        acid,
    };
    check_hypotheses(&state, &cfg.params)?;
    Ok(state)
}

/// Pointwise nonnegativity of N, H and `0 ≤ A ≤ k_A`.
pub fn check_hypotheses(state: &SimState, p: &ModelParams) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::InvalidRecipe("initial state is not finite".into()));
    }
    if state.normal.min() < 0.0 || state.acid.min() < 0.0 {
        return Err(Error::InvalidRecipe("negative N or H in initial state".into()));
    }
    if state.tumor.min() < 0.0 || state.tumor.max() > p.k_a {
        return Err(Error::InvalidRecipe(format!(
            "initial A outside [0, k_A = {}]",
            p.k_a
        )));
    }
    Ok(())
}
