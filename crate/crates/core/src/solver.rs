//! Minimum-power solve of `min |v|^2 s.t. F v >= rho`.
//!
//! [`solve_iterative`] is the alternating penalty scheme: with slack
//! variables `delta >= 0` it minimizes
//!
//! ```text
//! f(v, delta) = |v|^2 / lambda + |F v - rho - delta|^2
//! ```
//!
//! by exact block updates, `delta = max(F v - rho, 0)` and
//! `v = (I / lambda + F^T F)^-1 F^T (rho + delta)`. Each update is a true
//! block minimizer, so `f` never increases. Because every iterate lies in
//! the row space of `F`, the loop runs on the small `2K x 2K` Gram matrix
//! `F F^T` and only maps back to `2N` coordinates at the end.
//!
//! [`solve_oracle`] is an exhaustive active-set search used to validate the
//! iterative solver on small systems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::precoder::{ConstraintSystem, PrecoderSolution, RepairOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Penalty weight; larger values favour constraint fit over power.
    pub lambda: f64,
    /// Stop once the relative objective decrease falls to this level.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Scale the final beamformer outward until it is feasible.
    pub repair: bool,
    /// Iterate on a rescaled system with unit rows and smallest Gram
    /// eigenvalue one. The penalty accuracy then depends on `lambda` only.
    pub equilibrate: bool,
    /// Initial stacked beamformer; zero when absent.
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e2,
            epsilon: 1e-8,
            max_iter: 10_000,
            repair: true,
            equilibrate: true,
            warm_start: None,
        }
    }
}

impl SolverConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            out.push(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            out.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_iter < 1 {
            out.push("max_iter must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::SolverConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub objective: f64,
    /// `|max(rho - F v, 0)|_2` on the unscaled system.
    pub violation: f64,
    pub power: f64,
}

/// Entry 0 is the starting point; entry `r` follows iteration `r`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterTrace {
    pub records: Vec<IterRecord>,
}

impl IterTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Largest increase between consecutive objective values (0 if none).
    pub fn max_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(0.0, f64::max)
    }
}

pub fn penalty_objective(
    stacked: &DVector<f64>,
    delta: &DVector<f64>,
    system: &ConstraintSystem,
    lambda: f64,
) -> f64 {
    let residual = system.f() * stacked - system.rho() - delta;
    stacked.norm_squared() / lambda + residual.norm_squared()
}

/// Minimizer of the penalty objective over `delta >= 0` for fixed `v`.
pub fn delta_update(stacked: &DVector<f64>, system: &ConstraintSystem) -> DVector<f64> {
    system.slack(stacked).map(|s| s.max(0.0))
}

/// Minimizer of the penalty objective over `v` for fixed `delta`.
pub fn v_update(
    delta: &DVector<f64>,
    system: &ConstraintSystem,
    lambda: f64,
) -> Result<DVector<f64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::SolverConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if delta.len() != system.n_constraints() {
        return Err(Error::Dimension(format!(
            "delta has {} entries, system has {} constraints",
            delta.len(),
            system.n_constraints()
        )));
    }
    let f = system.f();
    let target = system.rho() + delta;
    let (m, n) = f.shape();
    if n <= m {
        let normal = DMatrix::identity(n, n) / lambda + f.transpose() * f;
        let chol = spd_factor(normal)?;
        Ok(chol.solve(&(f.transpose() * target)))
    } else {
        // (I/l + F^T F)^-1 F^T = F^T (I/l + F F^T)^-1
        let gram = DMatrix::identity(m, m) / lambda + f * f.transpose();
        let chol = spd_factor(gram)?;
        Ok(f.transpose() * chol.solve(&target))
    }
}

fn spd_factor(matrix: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let diag_max = matrix
        .diagonal()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b.abs()));
    let diag_min = matrix
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let chol = Cholesky::new(matrix).ok_or(Error::Factorization {
        condition: diag_max / diag_min,
    })?;
    let l = chol.l_dirty().diagonal();
    let lmax = l.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let lmin = l.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let condition = (lmax / lmin).powi(2);
    if !condition.is_finite() || condition > 1e15 {
        return Err(Error::Factorization { condition });
    }
    Ok(chol)
}

/// Row-normalized copy of `system`, further scaled by a common factor so
/// the smallest eigenvalue of `F F^T` is one. The penalty shortfall on any
/// active set is then at most `1 / (1 + lambda)` of its target. When the
/// Gram matrix is singular only the row normalization is applied.
fn conditioned(system: &ConstraintSystem) -> (ConstraintSystem, DVector<f64>) {
    let (rows, mut scales) = system.equilibrated();
    if rows.n_constraints() == 0 {
        return (rows, scales);
    }
    let gram = rows.f() * rows.f().transpose();
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo.is_nan() || lo <= 1e-10 * hi {
        return (rows, scales);
    }
    let common = 1.0 / lo.sqrt();
    scales *= common;
    let f = rows.f() * common;
    let rho = rows.rho() * common;
    (rows.with_parts(f, rho), scales)
}

/// Scales `stacked` by the smallest factor `c >= 1` with `c F v >= rho`.
pub fn scale_to_feasibility(
    system: &ConstraintSystem,
    stacked: &DVector<f64>,
) -> (DVector<f64>, RepairOutcome) {
    let fv = system.f() * stacked;
    let rho = system.rho();
    if fv.iter().zip(rho.iter()).all(|(y, r)| y >= r) {
        return (stacked.clone(), RepairOutcome::NotNeeded);
    }
    let mut factor = 1.0_f64;
    for (&y, &r) in fv.iter().zip(rho.iter()) {
        if y >= r {
            continue;
        }
        if y > 0.0 && r > 0.0 {
            factor = factor.max(r / y);
        } else {
            return (stacked.clone(), RepairOutcome::Failed);
        }
    }
    // absorb rounding in r / y
    let factor = factor * (1.0 + 1e-12);
    let ok = fv
        .iter()
        .zip(rho.iter())
        .all(|(&y, &r)| factor * y >= r - 1e-12 * r.abs());
    if ok {
        (stacked * factor, RepairOutcome::Scaled(factor))
    } else {
        (stacked.clone(), RepairOutcome::Failed)
    }
}

/// Alternating penalty minimization followed by optional feasibility repair.
pub fn solve_iterative(
    system: &ConstraintSystem,
    config: &SolverConfig,
) -> Result<(PrecoderSolution, IterTrace)> {
    config.validate()?;
    let n_vars = system.n_variables();
    let m = system.n_constraints();
    if let Some(w) = &config.warm_start {
        if w.len() != n_vars {
            return Err(Error::Dimension(format!(
                "warm start has {} entries, expected {n_vars}",
                w.len()
            )));
        }
    }
    let lambda = config.lambda;

    let (work, scales) = if config.equilibrate {
        conditioned(system)
    } else {
        (system.clone(), DVector::from_element(m, 1.0))
    };
    let f = work.f();
    let rho = work.rho();

    let unscaled_violation = |y: &DVector<f64>| -> f64 {
        y.iter()
            .zip(rho.iter())
            .zip(scales.iter())
            .map(|((&yi, &ri), &s)| ((ri - yi) / s).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let (y0, p0) = match &config.warm_start {
        Some(w) => (f * w, w.norm_squared()),
        None => (DVector::zeros(m), 0.0),
    };
    let mut delta = (&y0 - rho).map(|s| s.max(0.0));
    let mut f_prev = p0 / lambda + (&y0 - rho - &delta).norm_squared();
    let mut trace = IterTrace {
        records: vec![IterRecord {
            objective: f_prev,
            violation: unscaled_violation(&y0),
            power: p0,
        }],
    };

    let gram = f * f.transpose();
    let system_matrix = DMatrix::identity(m, m) / lambda + &gram;
    let inverse = if m > 0 {
        spd_factor(system_matrix)?.inverse()
    } else {
        DMatrix::zeros(0, 0)
    };
    let gram_inverse = &gram * &inverse;

    let mut dual = DVector::zeros(m);
    let mut converged = false;
    let mut iterations = 0;
    for r in 1..=config.max_iter {
        let target = rho + &delta;
        dual = &inverse * &target;
        let y = &gram_inverse * &target;
        let power = dual.dot(&y).max(0.0);
        let objective = power / lambda + (&y - &target).norm_squared();
        trace.records.push(IterRecord {
            objective,
            violation: unscaled_violation(&y),
            power,
        });
        iterations = r;
        delta = (&y - rho).map(|s| s.max(0.0));
        if f_prev - objective <= config.epsilon * f_prev {
            converged = true;
            break;
        }
        f_prev = objective;
    }

    let mut stacked = f.transpose() * dual;
    let repair = if config.repair {
        let (fixed, outcome) = scale_to_feasibility(system, &stacked);
        stacked = fixed;
        outcome
    } else {
        RepairOutcome::NotRequested
    };

    let mut solution = PrecoderSolution::from_stacked(stacked)?;
    solution.iterations = iterations;
    solution.objective_trace = trace.objectives();
    solution.converged = converged;
    solution.repair = repair;
    Ok((solution, trace))
}

/// Largest system the exhaustive oracle accepts.
pub const ORACLE_MAX_VARIABLES: usize = 64;
pub const ORACLE_MAX_CONSTRAINTS: usize = 32;

/// Exact minimizer of `|v|^2 s.t. F v >= rho` by enumerating active sets.
///
/// For each subset `S` of constraints with linearly independent rows, the
/// equality-constrained least-norm point is `v = F_S^T mu` with
/// `(F_S F_S^T) mu = rho_S`. A subset is a KKT point when `mu >= 0` and `v` is
/// feasible; the cheapest such point is returned. Ties go to the
/// lexicographically smallest subset mask, so the result does not depend on
/// the number of worker threads.
pub fn solve_oracle(system: &ConstraintSystem) -> Result<PrecoderSolution> {
    let m = system.n_constraints();
    let n = system.n_variables();
    if n > ORACLE_MAX_VARIABLES || m > ORACLE_MAX_CONSTRAINTS {
        return Err(Error::TooLarge(format!(
            "{m} constraints x {n} variables (limit {ORACLE_MAX_CONSTRAINTS} x {ORACLE_MAX_VARIABLES})"
        )));
    }
    let max_active = m.min(n) as u32;
    let best = (0u64..(1u64 << m))
        .into_par_iter()
        .filter(|mask| mask.count_ones() <= max_active)
        .filter_map(|mask| kkt_candidate(system, mask).map(|v| (v.norm_squared(), mask)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (_, mask) = best.ok_or(Error::Infeasible)?;
    let stacked = kkt_candidate(system, mask).ok_or(Error::Infeasible)?;
    PrecoderSolution::from_stacked(stacked)
}

fn kkt_candidate(system: &ConstraintSystem, mask: u64) -> Option<DVector<f64>> {
    let f = system.f();
    let rho = system.rho();
    let rows: Vec<usize> = (0..f.nrows()).filter(|i| mask >> i & 1 == 1).collect();
    let stacked = if rows.is_empty() {
        DVector::zeros(f.ncols())
    } else {
        let fs = f.select_rows(&rows);
        let rs = DVector::from_iterator(rows.len(), rows.iter().map(|&i| rho[i]));
        let gram = &fs * fs.transpose();
        let dmax = gram.diagonal().max();
        let chol = Cholesky::new(gram)?;
        let lmin = chol
            .l_dirty()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if lmin * lmin < 1e-12 * dmax {
            return None;
        }
        let mu = chol.solve(&rs);
        let mu_scale = mu.amax();
        if mu.iter().any(|&x| x < -1e-9 * mu_scale) {
            return None;
        }
        fs.transpose() * mu
    };
    let norm = stacked.norm();
    let feasible = f.row_iter().zip(rho.iter()).all(|(row, &r)| {
        let y = row.dot(&stacked.transpose());
        y >= r - 1e-9 * (r.abs() + row.norm() * norm)
    });
    feasible.then_some(stacked)
}
