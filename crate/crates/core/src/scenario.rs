//! A validated simulation setup: array, receivers, modulation and solver.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Channel, ChannelModel, GainMode, Role, UserSpec};
use crate::modulation::PskConstellation;
use crate::precoder::{build_constraints, ConstraintSystem, PrecoderSolution, SlotAssignment};
use crate::rng;
use crate::solver::{solve_iterative, IterTrace, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    /// Legitimate users, in precoding order.
    pub users: Vec<UserSpec>,
    pub eves: Vec<UserSpec>,
    pub constellation: PskConstellation,
    /// Common phase every rotated receive point is steered to.
    pub ref_phase: f64,
    pub gain_mode: GainMode,
    pub solver: SolverConfig,
    pub seed: u64,
}

/// Outcome of precoding one symbol slot.
#[derive(Debug, Clone)]
pub struct SlotSolution {
    pub assignment: SlotAssignment,
    pub system: ConstraintSystem,
    pub solution: PrecoderSolution,
    pub trace: IterTrace,
}

impl Scenario {
    /// Every violated invariant, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.users.is_empty() {
            out.push("at least one legitimate user is required".to_string());
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.role != Role::Legitimate {
                out.push(format!(
                    "user {i}: listed as legitimate but has role {:?}",
                    u.role
                ));
            }
            out.extend(u.problems().into_iter().map(|p| format!("user {i}: {p}")));
        }
        for (i, e) in self.eves.iter().enumerate() {
            if e.role != Role::Eavesdropper {
                out.push(format!(
                    "eve {i}: listed as eavesdropper but has role {:?}",
                    e.role
                ));
            }
            out.extend(e.problems().into_iter().map(|p| format!("eve {i}: {p}")));
        }
        let n = self.geometry.n_elements();
        if self.users.len() > n {
            out.push(format!(
                "{} legitimate users exceed {n} antennas",
                self.users.len()
            ));
        }
        if let Err(e) =
            crate::precoder::sector_lines(1.0, self.ref_phase, self.constellation.order())
        {
            out.push(e.to_string());
        }
        out.extend(self.solver.problems());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::User(problems))
        }
    }

    pub fn legit_channels(&self, model: ChannelModel) -> Vec<Channel> {
        self.users
            .iter()
            .map(|u| {
                self.geometry
                    .channel_at(u.range_m, u.angle_rad, self.gain_mode, model)
            })
            .collect()
    }

    pub fn eve_channels(&self) -> Vec<Channel> {
        self.eves
            .iter()
            .map(|e| self.geometry.build_channel(e, self.gain_mode))
            .collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.target_amplitude).collect()
    }

    pub fn noise_vars(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.noise_var).collect()
    }

    /// Copy where every legitimate user's target amplitude meets the given
    /// SNR (dB) against its own noise variance.
    pub fn with_snr_db(&self, snr_db: f64) -> Scenario {
        let mut out = self.clone();
        let linear = 10f64.powf(snr_db / 10.0);
        for u in &mut out.users {
            u.target_amplitude = (u.noise_var * linear).sqrt();
        }
        out
    }

    /// Symbol assignment for slot `slot`, drawn from its own seeded stream.
    pub fn draw_assignment(&self, seed: u64, slot: u64) -> SlotAssignment {
        let mut stream = rng::stream(seed, rng::domain::SYMBOLS, 0, slot);
        SlotAssignment::random(self.users.len(), self.constellation.order(), &mut stream)
    }

    /// Builds and solves the precoding problem for one slot. Fails when the
    /// solver cannot reach a feasible point with repair enabled.
    pub fn solve_slot(
        &self,
        channels: &[Channel],
        assignment: &SlotAssignment,
    ) -> Result<SlotSolution> {
        let out = self.solve_slot_raw(channels, assignment)?;
        if out.solution.repair.failed() {
            return Err(Error::Solver(out.failure_summary()));
        }
        Ok(out)
    }

    /// Like [`Scenario::solve_slot`] but hands back failed repairs too.
    pub fn solve_slot_raw(
        &self,
        channels: &[Channel],
        assignment: &SlotAssignment,
    ) -> Result<SlotSolution> {
        let system = build_constraints(
            channels,
            assignment,
            &self.constellation,
            &self.targets(),
            self.ref_phase,
        )?;
        let (solution, trace) = solve_iterative(&system, &self.solver)?;
        Ok(SlotSolution {
            assignment: assignment.clone(),
            system,
            solution,
            trace,
        })
    }
}

impl SlotSolution {
    pub fn v(&self) -> &DVector<num_complex::Complex64> {
        &self.solution.v
    }

    pub fn failure_summary(&self) -> String {
        format!(
            "no feasible scaling after {} iterations (violation {:.3e})",
            self.solution.iterations,
            self.trace.records.last().map_or(f64::NAN, |r| r.violation)
        )
    }
}
