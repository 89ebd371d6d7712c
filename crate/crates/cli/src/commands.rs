//! Experiment drivers behind each subcommand. `compute_*` does the numbers,
//! `run_*` adds files and the manifest.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hnf_precoding::metrics::{
    linear_grid, log_range_grid, power_spectrum, secrecy_capacity, ser_monte_carlo,
    CapacityScaling, EveSet, SpectrumGrid,
};
use hnf_precoding::precoder::SlotAssignment;
use hnf_precoding::{
    in_relaxed_region, Channel, ChannelModel, Error, FieldRegion, Scenario, SectorSpec,
    SlotSolution, UserSpec,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::LoadedScenario;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_float, write_output, Csv, Manifest, OutputEntry};

/// Why a slot could not be precoded.
#[derive(Debug)]
pub enum SlotError {
    Core(Error),
    Unrepaired(Box<SlotSolution>),
}

#[derive(Debug)]
pub struct Failure {
    pub context: serde_json::Value,
    pub error: SlotError,
}

impl Failure {
    fn message(&self) -> String {
        match &self.error {
            SlotError::Core(e) => e.to_string(),
            SlotError::Unrepaired(s) => s.failure_summary(),
        }
    }

    /// Writes `solver_trace.json` next to the other outputs.
    fn into_cli_error(self, out: &Path) -> CliError {
        let message = self.message();
        let (symbols, trace) = match &self.error {
            SlotError::Core(_) => (None, Vec::new()),
            SlotError::Unrepaired(s) => (
                Some(s.assignment.symbols().to_vec()),
                s.trace
                    .records
                    .iter()
                    .map(|r| json!({"objective": r.objective, "violation": r.violation, "power": r.power}))
                    .collect(),
            ),
        };
        let doc = json!({
            "context": self.context,
            "error": message,
            "symbols": symbols,
            "trace": trace,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("trace serializes");
        text.push('\n');
        let trace = out.join("solver_trace.json");
        if let Err(e) = write_output(out, "solver_trace.json", text.as_bytes()) {
            return e;
        }
        CliError::Solver { message, trace }
    }
}

/// Error from a `compute_*` function: bad input or a slot the solver could
/// not handle.
#[derive(Debug)]
pub enum RunError {
    Cli(CliError),
    Slot(Failure),
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        RunError::Cli(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Cli(e.into())
    }
}

impl From<Failure> for RunError {
    fn from(f: Failure) -> Self {
        RunError::Slot(f)
    }
}

impl RunError {
    pub fn into_cli_error(self, out: &Path) -> CliError {
        match self {
            RunError::Cli(e) => e,
            RunError::Slot(f) => f.into_cli_error(out),
        }
    }
}

fn solve(
    scenario: &Scenario,
    channels: &[Channel],
    assignment: &SlotAssignment,
    context: impl FnOnce() -> serde_json::Value,
) -> Result<SlotSolution, Failure> {
    let fail = |error| Failure {
        context: context(),
        error,
    };
    match scenario.solve_slot_raw(channels, assignment) {
        Ok(s) if s.solution.repair.failed() => Err(fail(SlotError::Unrepaired(Box::new(s)))),
        Ok(s) => Ok(s),
        Err(e) => Err(fail(SlotError::Core(e))),
    }
}

fn first_failure<T>(results: Vec<Result<T, Failure>>) -> Result<Vec<T>, Failure> {
    results.into_iter().collect()
}

fn snr_points(min: f64, max: f64, points: usize) -> CliResult<Vec<f64>> {
    if points == 0 || !(min.is_finite() && max.is_finite()) || max < min {
        return Err(CliError::Argument(format!(
            "SNR sweep needs finite min <= max and at least one point, got [{min}, {max}] x {points}"
        )));
    }
    Ok(linear_grid(min, max, points))
}

fn finish<P: Serialize>(
    loaded: &LoadedScenario,
    command: &str,
    params: &P,
    out: &Path,
    outputs: Vec<OutputEntry>,
) -> CliResult<PathBuf> {
    Manifest::new(command, loaded.seed(), params, &loaded.file, outputs).write(out)
}

// ---------------------------------------------------------------- pattern

#[derive(Debug, Clone, Args, Serialize)]
pub struct PatternParams {
    /// Angles evenly spaced over 0..180 degrees.
    #[arg(long, default_value_t = 181)]
    pub angles: usize,
    /// Log-spaced ranges; user ranges are always included.
    #[arg(long, default_value_t = 60)]
    pub ranges: usize,
    #[arg(long, default_value_t = 2.0)]
    pub range_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub range_max: f64,
    /// Symbol slot whose beamformer is plotted.
    #[arg(long, default_value_t = 0)]
    pub slot: u64,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            angles: 181,
            ranges: 60,
            range_min: 2.0,
            range_max: 1000.0,
            slot: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatternData {
    pub angles_deg: Vec<f64>,
    pub grid: SpectrumGrid,
    pub solution: SlotSolution,
}

impl PatternData {
    /// Grid indices of the cell holding `(angle_deg, range_m)`, if on the grid.
    pub fn cell(&self, angle_deg: f64, range_m: f64) -> Option<(usize, usize)> {
        let i = self
            .angles_deg
            .iter()
            .position(|&a| (a - angle_deg).abs() < 1e-9)?;
        let j = self
            .grid
            .ranges_m
            .iter()
            .position(|&r| (r - range_m).abs() < 1e-9 * range_m)?;
        Some((i, j))
    }
}

pub fn compute_pattern(
    loaded: &LoadedScenario,
    params: &PatternParams,
) -> Result<PatternData, RunError> {
    if params.angles < 2 || params.ranges < 2 {
        return Err(
            CliError::Argument("pattern grid needs at least 2 angles and 2 ranges".into()).into(),
        );
    }
    let s = &loaded.scenario;
    let pins: Vec<f64> = s.users.iter().chain(&s.eves).map(|u| u.range_m).collect();
    let ranges = log_range_grid(params.range_min, params.range_max, params.ranges, &pins)?;
    let angles_deg = linear_grid(0.0, 180.0, params.angles);
    let angles_rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();

    let channels = s.legit_channels(ChannelModel::Hybrid);
    let assignment = s.draw_assignment(s.seed, params.slot);
    let solution = solve(
        s,
        &channels,
        &assignment,
        || json!({"command": "pattern", "slot": params.slot}),
    )?;
    let grid = power_spectrum(&s.geometry, solution.v(), &angles_rad, &ranges, s.gain_mode)?;
    Ok(PatternData {
        angles_deg,
        grid,
        solution,
    })
}

pub fn pattern_csv(data: &PatternData) -> Csv {
    let mut csv = Csv::new(&["angle_deg", "range_m", "power_db"]);
    for (i, &a) in data.angles_deg.iter().enumerate() {
        for (j, &r) in data.grid.ranges_m.iter().enumerate() {
            let db = 10.0 * data.grid.power[(i, j)].max(1e-30).log10();
            csv.row(&[fmt_float(a), fmt_float(r), fmt_float(db)]);
        }
    }
    csv
}

pub fn run_pattern(
    loaded: &LoadedScenario,
    params: &PatternParams,
    out: &Path,
) -> CliResult<String> {
    let data = compute_pattern(loaded, params).map_err(|e| e.into_cli_error(out))?;
    let csv = pattern_csv(&data);
    let entry = write_output(out, "pattern.csv", csv.as_str().as_bytes())?;
    let manifest = finish(loaded, "pattern", params, out, vec![entry])?;
    Ok(format!(
        "wrote {} cells to {} ({})",
        data.angles_deg.len() * data.grid.ranges_m.len(),
        out.join("pattern.csv").display(),
        manifest.display()
    ))
}

// ---------------------------------------------------------- constellation

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstellationParams {
    #[arg(long, default_value_t = 200)]
    pub slots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationPoint {
    pub slot: usize,
    pub user_id: usize,
    pub symbol: usize,
    /// Receive point after removing the symbol rotation.
    pub rotated: Complex64,
    pub physical: Complex64,
    pub sector: SectorSpec,
}

impl ConstellationPoint {
    pub fn in_region(&self) -> bool {
        in_relaxed_region(self.rotated, &self.sector)
    }
}

#[derive(Debug, Clone)]
pub struct ConstellationData {
    pub points: Vec<ConstellationPoint>,
    pub solutions: Vec<SlotSolution>,
}

pub fn compute_constellation(
    loaded: &LoadedScenario,
    params: &ConstellationParams,
) -> Result<ConstellationData, RunError> {
    let s = &loaded.scenario;
    let channels = s.legit_channels(ChannelModel::Hybrid);
    let solved: Vec<_> = (0..params.slots)
        .into_par_iter()
        .map(|slot| {
            let a = s.draw_assignment(s.seed, slot as u64);
            solve(
                s,
                &channels,
                &a,
                || json!({"command": "constellation", "slot": slot}),
            )
        })
        .collect();
    let solutions = first_failure(solved)?;
    let mut points = Vec::new();
    for (slot, sol) in solutions.iter().enumerate() {
        for (k, h) in channels.iter().enumerate() {
            points.push(ConstellationPoint {
                slot,
                user_id: loaded.legit_ids[k],
                symbol: sol.assignment.symbols()[k],
                rotated: sol.system.rotated_point(k, sol.v()),
                physical: h.vector.dotc(sol.v()),
                sector: sol.system.sector(k),
            });
        }
    }
    Ok(ConstellationData { points, solutions })
}

pub fn constellation_csv(data: &ConstellationData) -> Csv {
    let mut csv = Csv::new(&[
        "slot",
        "user",
        "symbol",
        "re",
        "im",
        "phys_re",
        "phys_im",
        "in_region",
    ]);
    for p in &data.points {
        csv.row(&[
            p.slot.to_string(),
            p.user_id.to_string(),
            p.symbol.to_string(),
            fmt_float(p.rotated.re),
            fmt_float(p.rotated.im),
            fmt_float(p.physical.re),
            fmt_float(p.physical.im),
            p.in_region().to_string(),
        ]);
    }
    csv
}

pub fn run_constellation(
    loaded: &LoadedScenario,
    params: &ConstellationParams,
    out: &Path,
) -> CliResult<String> {
    let data = compute_constellation(loaded, params).map_err(|e| e.into_cli_error(out))?;
    let entry = write_output(
        out,
        "constellation.csv",
        constellation_csv(&data).as_str().as_bytes(),
    )?;
    finish(loaded, "constellation", params, out, vec![entry])?;
    let outside = data.points.iter().filter(|p| !p.in_region()).count();
    Ok(format!(
        "wrote {} receive points ({outside} outside their sector) to {}",
        data.points.len(),
        out.join("constellation.csv").display()
    ))
}

// ---------------------------------------------------------------- secrecy

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityName {
    PerOrder,
    Unscaled,
}

impl From<CapacityName> for CapacityScaling {
    fn from(c: CapacityName) -> Self {
        match c {
            CapacityName::PerOrder => CapacityScaling::PerOrder,
            CapacityName::Unscaled => CapacityScaling::Unscaled,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SecrecyParams {
    #[arg(long, default_value_t = 0.0)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub snr_max: f64,
    #[arg(long, default_value_t = 5)]
    pub snr_points: usize,
    /// Symbol slots averaged per SNR point.
    #[arg(long, default_value_t = 50)]
    pub slots: usize,
    /// Eavesdropper as RANGE_M:ANGLE_DEG[:NOISE_VAR]; replaces those in the
    /// scenario file. Repeatable.
    #[arg(long = "eve")]
    pub eves: Vec<String>,
    #[arg(long, value_enum, default_value_t = CapacityName::PerOrder)]
    pub capacity: CapacityName,
}

impl Default for SecrecyParams {
    fn default() -> Self {
        Self {
            snr_min: 0.0,
            snr_max: 20.0,
            snr_points: 5,
            slots: 50,
            eves: Vec::new(),
            capacity: CapacityName::PerOrder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyRow {
    pub snr_db: f64,
    pub cs_proposed: f64,
    pub cs_no_eve: f64,
    pub cs_far_baseline: f64,
}

pub fn parse_eve(text: &str) -> CliResult<UserSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Argument(format!("eve `{text}`: `{s}` is not a number")))
    };
    let (range, angle, noise) = match parts.as_slice() {
        [r, a] => (num(r)?, num(a)?, 1.0),
        [r, a, n] => (num(r)?, num(a)?, num(n)?),
        _ => {
            return Err(CliError::Argument(format!(
                "eve `{text}`: expected RANGE_M:ANGLE_DEG[:NOISE_VAR]"
            )))
        }
    };
    UserSpec::eavesdropper(range, angle.to_radians(), noise)
        .map_err(|e| CliError::Argument(format!("eve `{text}`: {e}")))
}

pub fn compute_secrecy(
    loaded: &LoadedScenario,
    params: &SecrecyParams,
) -> Result<Vec<SecrecyRow>, RunError> {
    if params.slots == 0 {
        return Err(CliError::Argument("secrecy sweep needs at least one slot".into()).into());
    }
    let snrs = snr_points(params.snr_min, params.snr_max, params.snr_points)?;
    let mut base = loaded.scenario.clone();
    if !params.eves.is_empty() {
        base.eves = params
            .eves
            .iter()
            .map(|e| parse_eve(e))
            .collect::<CliResult<_>>()?;
    }
    let truth = base.legit_channels(ChannelModel::Hybrid);
    let far = base.legit_channels(ChannelModel::FarOnly);
    let eves = EveSet::build(&base.geometry, &base.eves, base.gain_mode);
    let noise = base.noise_vars();
    let order = base.constellation.order();
    let scaling = params.capacity.into();

    let mut rows = Vec::with_capacity(snrs.len());
    for &snr_db in &snrs {
        let s = base.with_snr_db(snr_db);
        let per_slot: Vec<Result<(f64, f64, f64), Failure>> = (0..params.slots)
            .into_par_iter()
            .map(|slot| {
                let ctx = |design: &'static str| move || json!({"command": "secrecy-sweep", "snr_db": snr_db, "slot": slot, "design": design});
                // one symbol draw per slot, shared by every SNR point and design
                let a = s.draw_assignment(s.seed, slot as u64);
                let proposed = solve(&s, &truth, &a, ctx("hybrid"))?;
                let baseline = solve(&s, &far, &a, ctx("far-field"))?;
                let p = secrecy_capacity(&truth, &noise, &eves, proposed.v(), order, scaling);
                let b = secrecy_capacity(&truth, &noise, &eves, baseline.v(), order, scaling);
                Ok((p.c_secrecy, p.c_legit.max(0.0), b.c_secrecy))
            })
            .collect();
        let per_slot = first_failure(per_slot)?;
        let n = params.slots as f64;
        let sum = per_slot.iter().fold((0.0, 0.0, 0.0), |acc, x| {
            (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
        });
        rows.push(SecrecyRow {
            snr_db,
            cs_proposed: sum.0 / n,
            cs_no_eve: sum.1 / n,
            cs_far_baseline: sum.2 / n,
        });
    }
    Ok(rows)
}

pub fn secrecy_csv(rows: &[SecrecyRow]) -> Csv {
    let mut csv = Csv::new(&["snr_db", "cs_proposed", "cs_no_eve", "cs_far_baseline"]);
    for r in rows {
        csv.row(&[
            fmt_float(r.snr_db),
            fmt_float(r.cs_proposed),
            fmt_float(r.cs_no_eve),
            fmt_float(r.cs_far_baseline),
        ]);
    }
    csv
}

pub fn run_secrecy(
    loaded: &LoadedScenario,
    params: &SecrecyParams,
    out: &Path,
) -> CliResult<String> {
    let rows = compute_secrecy(loaded, params).map_err(|e| e.into_cli_error(out))?;
    let entry = write_output(out, "secrecy.csv", secrecy_csv(&rows).as_str().as_bytes())?;
    finish(loaded, "secrecy-sweep", params, out, vec![entry])?;
    Ok(format!(
        "wrote {} SNR points to {}",
        rows.len(),
        out.join("secrecy.csv").display()
    ))
}

// -------------------------------------------------------------------- SER

#[derive(Debug, Clone, Args, Serialize)]
pub struct SerParams {
    #[arg(long, default_value_t = 0.0)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub snr_max: f64,
    #[arg(long, default_value_t = 5)]
    pub snr_points: usize,
    /// Monte Carlo trials per SNR point.
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerRow {
    pub snr_db: f64,
    pub user_id: usize,
    pub role: hnf_precoding::Role,
    pub ser: f64,
    pub ci95_halfwidth: f64,
}

pub fn compute_ser(loaded: &LoadedScenario, params: &SerParams) -> CliResult<Vec<SerRow>> {
    let snrs = snr_points(params.snr_min, params.snr_max, params.snr_points)?;
    if params.trials == 0 {
        return Err(CliError::Argument(
            "SER sweep needs at least one trial".into(),
        ));
    }
    let mut rows = Vec::new();
    for &snr_db in &snrs {
        let s = loaded.scenario.with_snr_db(snr_db);
        let report = ser_monte_carlo(&s, params.trials, s.seed)?;
        let legit = loaded
            .legit_ids
            .iter()
            .zip(report.legit_ser())
            .map(|(&id, p)| (id, hnf_precoding::Role::Legitimate, p));
        let eve = loaded
            .eve_ids
            .iter()
            .zip(report.eve_ser())
            .map(|(&id, p)| (id, hnf_precoding::Role::Eavesdropper, p));
        let mut point: Vec<SerRow> = legit
            .chain(eve)
            .map(|(user_id, role, ser)| SerRow {
                snr_db,
                user_id,
                role,
                ser,
                ci95_halfwidth: report.ci95(ser),
            })
            .collect();
        point.sort_by_key(|r| r.user_id);
        rows.extend(point);
    }
    Ok(rows)
}

pub fn ser_csv(rows: &[SerRow]) -> Csv {
    let mut csv = Csv::new(&["snr_db", "user_id", "ser", "ci95_halfwidth"]);
    for r in rows {
        csv.row(&[
            fmt_float(r.snr_db),
            r.user_id.to_string(),
            fmt_float(r.ser),
            fmt_float(r.ci95_halfwidth),
        ]);
    }
    csv
}

pub fn run_ser(loaded: &LoadedScenario, params: &SerParams, out: &Path) -> CliResult<String> {
    let rows = match compute_ser(loaded, params) {
        Ok(rows) => rows,
        Err(CliError::Core(e @ Error::Trial { .. })) => {
            let failure = Failure {
                context: json!({"command": "ser-sweep"}),
                error: SlotError::Core(e),
            };
            return Err(failure.into_cli_error(out));
        }
        Err(e) => return Err(e),
    };
    let entry = write_output(out, "ser.csv", ser_csv(&rows).as_str().as_bytes())?;
    finish(loaded, "ser-sweep", params, out, vec![entry])?;
    Ok(format!(
        "wrote {} rows to {}",
        rows.len(),
        out.join("ser.csv").display()
    ))
}

// --------------------------------------------------------------- validate

pub fn validation_summary(loaded: &LoadedScenario) -> String {
    let s = &loaded.scenario;
    let g = &s.geometry;
    let mut lines = vec![
        format!(
            "array: {} elements, spacing {} m, carrier {} Hz",
            g.n_elements(),
            fmt_float(g.spacing_m()),
            fmt_float(g.carrier_hz())
        ),
        format!("wavelength: {} m", fmt_float(g.wavelength_m())),
        format!(
            "channel gain: {}",
            match s.gain_mode {
                hnf_precoding::GainMode::Unit => "unit",
                hnf_precoding::GainMode::FreeSpace => "free space",
            }
        ),
        format!("rayleigh distance: {} m", fmt_float(g.rayleigh_distance())),
        format!(
            "modulation: {}-PSK, offset {} deg",
            s.constellation.order(),
            fmt_float(s.constellation.phase_offset().to_degrees())
        ),
    ];
    let mut entries: Vec<(usize, &UserSpec)> = loaded
        .legit_ids
        .iter()
        .copied()
        .zip(&s.users)
        .chain(loaded.eve_ids.iter().copied().zip(&s.eves))
        .collect();
    entries.sort_by_key(|e| e.0);
    for (id, u) in entries {
        let region = match g.classify(u.range_m) {
            FieldRegion::Near => "near",
            FieldRegion::Far => "far",
        };
        let role = match u.role {
            hnf_precoding::Role::Legitimate => format!(
                "legitimate, target amplitude {}",
                fmt_float(u.target_amplitude)
            ),
            hnf_precoding::Role::Eavesdropper => "eavesdropper".to_string(),
        };
        lines.push(format!(
            "users[{id}]: {} m at {} deg, {region} field, {role}",
            fmt_float(u.range_m),
            fmt_float(u.angle_rad.to_degrees())
        ));
    }
    lines.push("ok".into());
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

pub fn run_validate(loaded: &LoadedScenario, out: Option<&Path>) -> CliResult<String> {
    let summary = validation_summary(loaded);
    if let Some(dir) = out {
        let entry = write_output(dir, "summary.txt", summary.as_bytes())?;
        finish(loaded, "validate", &json!({}), dir, vec![entry])?;
    }
    Ok(summary.trim_end().to_string())
}
