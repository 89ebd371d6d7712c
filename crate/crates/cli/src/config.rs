//! Scenario files: strict JSON in, validated [`Scenario`] out.

use std::fs;
use std::path::Path;

use hnf_precoding::geometry::SPEED_OF_LIGHT;
use hnf_precoding::{
    ArrayGeometry, GainMode, PskConstellation, Role, Scenario, SolverConfig, UserSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub geometry: GeometryBlock,
    pub users: Vec<UserEntry>,
    pub modulation: ModulationBlock,
    #[serde(default)]
    pub ref_phase_deg: f64,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub n_elements: usize,
    pub spacing: Spacing,
    pub carrier_hz: f64,
    #[serde(default)]
    pub gain_mode: GainName,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Named(SpacingName),
    Meters(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingName {
    HalfWavelength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainName {
    #[default]
    Unit,
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Legitimate,
    Eavesdropper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub range_m: f64,
    pub angle_deg: f64,
    pub role: RoleName,
    #[serde(default = "unit_noise")]
    pub noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_snr_db: Option<f64>,
}

fn unit_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationBlock {
    pub order: usize,
    /// Defaults to half a decision sector, `180 / M` degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_offset_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub repair: bool,
    pub equilibrate: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            lambda: d.lambda,
            epsilon: d.epsilon,
            max_iter: d.max_iter,
            repair: d.repair,
            equilibrate: d.equilibrate,
        }
    }
}

/// A validated scenario together with the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    /// File position of each legitimate user, in precoding order.
    pub legit_ids: Vec<usize>,
    /// File position of each eavesdropper.
    pub eve_ids: Vec<usize>,
}

pub fn load_scenario(path: &Path) -> CliResult<LoadedScenario> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.resolve()
}

impl ScenarioFile {
    pub fn spacing_m(&self) -> f64 {
        match self.geometry.spacing {
            Spacing::Named(SpacingName::HalfWavelength) => {
                SPEED_OF_LIGHT / self.geometry.carrier_hz / 2.0
            }
            Spacing::Meters(m) => m,
        }
    }

    /// Converts to a [`Scenario`], reporting every problem at once.
    pub fn resolve(self) -> CliResult<LoadedScenario> {
        let mut problems = Vec::new();

        let geometry = ArrayGeometry::new(
            self.geometry.n_elements,
            self.spacing_m(),
            self.geometry.carrier_hz,
        )
        .map_err(|e| problems.push(e.to_string()))
        .ok();
        let order = self.modulation.order;
        let offset_deg = self
            .modulation
            .phase_offset_deg
            .unwrap_or(180.0 / order.max(1) as f64);
        let constellation = PskConstellation::new(order, offset_deg.to_radians())
            .map_err(|e| problems.push(e.to_string()))
            .ok();

        let (mut users, mut eves) = (Vec::new(), Vec::new());
        let (mut legit_ids, mut eve_ids) = (Vec::new(), Vec::new());
        for (i, entry) in self.users.iter().enumerate() {
            let role = match entry.role {
                RoleName::Legitimate => Role::Legitimate,
                RoleName::Eavesdropper => Role::Eavesdropper,
            };
            let target = match (role, entry.target_amplitude, entry.target_snr_db) {
                (Role::Legitimate, Some(a), None) => a,
                // a bad noise variance is reported on its own below
                (Role::Legitimate, None, Some(db)) => {
                    (entry.noise_var.max(0.0) * 10f64.powf(db / 10.0)).sqrt()
                }
                (Role::Legitimate, None, None) => {
                    problems.push(format!(
                        "users[{i}]: needs target_amplitude or target_snr_db"
                    ));
                    0.0
                }
                (Role::Legitimate, Some(_), Some(_)) => {
                    problems.push(format!(
                        "users[{i}]: give target_amplitude or target_snr_db, not both"
                    ));
                    0.0
                }
                (Role::Eavesdropper, None, None) => 0.0,
                (Role::Eavesdropper, _, _) => {
                    problems.push(format!("users[{i}]: eavesdroppers take no target"));
                    0.0
                }
            };
            let spec = UserSpec {
                range_m: entry.range_m,
                angle_rad: entry.angle_deg.to_radians(),
                role,
                noise_var: entry.noise_var,
                target_amplitude: target,
            };
            problems.extend(
                spec.problems()
                    .into_iter()
                    .map(|p| format!("users[{i}]: {p}")),
            );
            if role == Role::Legitimate {
                users.push(spec);
                legit_ids.push(i);
            } else {
                eves.push(spec);
                eve_ids.push(i);
            }
        }

        let solver = SolverConfig {
            lambda: self.solver.lambda,
            epsilon: self.solver.epsilon,
            max_iter: self.solver.max_iter,
            repair: self.solver.repair,
            equilibrate: self.solver.equilibrate,
            warm_start: None,
        };
        problems.extend(
            solver
                .problems()
                .into_iter()
                .map(|p| format!("solver: {p}")),
        );

        let (Some(geometry), Some(constellation)) = (geometry, constellation) else {
            return Err(CliError::Invalid(problems));
        };
        let scenario = Scenario {
            geometry,
            users,
            eves,
            constellation,
            ref_phase: self.ref_phase_deg.to_radians(),
            gain_mode: match self.geometry.gain_mode {
                GainName::Unit => GainMode::Unit,
                GainName::FreeSpace => GainMode::FreeSpace,
            },
            solver,
            seed: self.seed,
        };
        // per-user and solver problems are already listed with file positions
        if problems.is_empty() {
            problems.extend(scenario.problems());
        }
        if !problems.is_empty() {
            return Err(CliError::Invalid(problems));
        }
        Ok(LoadedScenario {
            file: self,
            scenario,
            legit_ids,
            eve_ids,
        })
    }
}

impl LoadedScenario {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.scenario.seed = s;
            self.file.seed = s;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }
}
