//! The three reference scenarios: extinction, invasion, hostile boundary.

use std::fmt;
use std::str::FromStr;

use crate::types::{BoundaryKind, GridSpec, InitRecipe, ModelParams, MonitorSettings, ScenarioConfig};

/// Default nodes per side (`Δx = 0.01` on the unit square).
pub const DEFAULT_NODES: usize = 101;
pub const DEFAULT_T_END: f64 = 50.0;
pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioPreset {
    /// No acid production: the initial tumor dies out.
    Fig1,
    /// Full model with zero-flux boundaries: the tumor invades.
    Fig2,
    /// Full model with A and H pinned to zero on the boundary.
    Fig3,
}

impl ScenarioPreset {
    pub const ALL: [ScenarioPreset; 3] = [ScenarioPreset::Fig1, ScenarioPreset::Fig2, ScenarioPreset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioPreset::Fig1 => "fig1",
            ScenarioPreset::Fig2 => "fig2",
            ScenarioPreset::Fig3 => "fig3",
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let mut params = ModelParams::baseline();
        let (boundary, snapshot_times) = match self {
            ScenarioPreset::Fig1 => {
                params.nu = 0.0;
                (BoundaryKind::NeumannZeroFlux, vec![0.0, 5.0, 30.0])
            }
            // t = 0 is not one of the published frames; kept for completeness
            ScenarioPreset::Fig2 => (BoundaryKind::NeumannZeroFlux, vec![0.0, 23.0, 27.0, 31.0, 35.0]),
            ScenarioPreset::Fig3 => (BoundaryKind::DirichletZero, vec![0.0, 33.0, 39.0, 45.0]),
        };
        ScenarioConfig {
            params,
            grid: GridSpec::new(1.0, DEFAULT_NODES, boundary).expect("preset grid is valid"),
            t_end: DEFAULT_T_END,
            snapshot_times,
            init: InitRecipe::baseline(),
            cfl_safety: DEFAULT_CFL_SAFETY,
            monitor: MonitorSettings::default(),
        }
    }
}

impl fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(ScenarioPreset::Fig1),
            "fig2" => Ok(ScenarioPreset::Fig2),
            "fig3" => Ok(ScenarioPreset::Fig3),
            other => Err(format!("unknown scenario '{other}' (expected fig1, fig2 or fig3)")),
        }
    }
}

impl ScenarioConfig {
    /// Replaces the grid resolution, keeping side length and boundary kind.
    pub fn with_nodes(mut self, nodes: usize) -> crate::Result<Self> {
        self.grid = GridSpec::new(self.grid.side_length(), nodes, self.grid.boundary())?;
        Ok(self)
    }

    /// Replaces the horizon. Snapshots past the new horizon are dropped and
    /// the horizon itself becomes a snapshot.
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self.snapshot_times.retain(|&t| t <= t_end);
        if self.snapshot_times.last() != Some(&t_end) {
            self.snapshot_times.push(t_end);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in ScenarioPreset::ALL {
            let cfg = p.config();
            cfg.validate().unwrap();
            assert_eq!(cfg.grid.nodes(), 101);
            assert_eq!(cfg.t_end, 50.0);
            assert_eq!(p.name().parse::<ScenarioPreset>().unwrap(), p);
        }
        assert_eq!(ScenarioPreset::Fig1.config().params.nu, 0.0);
        assert_eq!(ScenarioPreset::Fig2.config().params.nu, 2.0);
        assert_eq!(ScenarioPreset::Fig3.config().grid.boundary(), BoundaryKind::DirichletZero);
        assert!("fig4".parse::<ScenarioPreset>().is_err());
    }

    #[test]
    fn horizon_override() {
        let cfg = ScenarioPreset::Fig2.config().with_t_end(5.0);
        assert_eq!(cfg.snapshot_times, vec![0.0, 5.0]);
        let cfg = ScenarioPreset::Fig2.config().with_t_end(35.0);
        assert_eq!(cfg.snapshot_times, vec![0.0, 23.0, 27.0, 31.0, 35.0]);
        cfg.validate().unwrap();
    }
}
