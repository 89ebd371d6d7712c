//! Receive-side evaluation: SNR, secrecy capacity, spatial power spectra
//! and Monte Carlo symbol error rates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Channel, ChannelModel, GainMode, UserSpec};
use crate::rng;
use crate::scenario::Scenario;

/// Noise-free receive point `h^H v`.
pub fn receive_point(channel: &DVector<Complex64>, v: &DVector<Complex64>) -> Complex64 {
    channel.dotc(v)
}

pub fn user_snr(channel: &DVector<Complex64>, v: &DVector<Complex64>, noise_var: f64) -> f64 {
    receive_point(channel, v).norm_sqr() / noise_var
}

/// Eavesdroppers with their channels; column `j` of [`EveSet::matrix`] is
/// the channel of Eve `j`.
#[derive(Debug, Clone, Default)]
pub struct EveSet {
    pub specs: Vec<UserSpec>,
    pub channels: Vec<Channel>,
}

impl EveSet {
    pub fn build(geometry: &ArrayGeometry, eves: &[UserSpec], mode: GainMode) -> Self {
        Self {
            specs: eves.to_vec(),
            channels: eves
                .iter()
                .map(|e| geometry.build_channel(e, mode))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.channels.first().map_or(0, |c| c.len());
        DMatrix::from_fn(n, self.channels.len(), |i, j| self.channels[j].vector[i])
    }

    /// Noise-free Eve observations `H^H v`.
    pub fn receive(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.matrix().ad_mul(v)
    }

    pub fn snrs(&self, v: &DVector<Complex64>) -> Vec<f64> {
        self.channels
            .iter()
            .zip(&self.specs)
            .map(|(c, s)| user_snr(&c.vector, v, s.noise_var))
            .collect()
    }
}

/// Per-stream normalization of the mutual information terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapacityScaling {
    /// `(1/M) log2(1 + SNR)` per stream.
    #[default]
    PerOrder,
    /// Plain `log2(1 + SNR)`.
    Unscaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyReport {
    pub c_legit: f64,
    pub c_eve: f64,
    pub c_secrecy: f64,
    pub legit_snr: Vec<f64>,
    pub eve_snr: Vec<f64>,
}

/// Secrecy capacity from SNR lists.
pub fn secrecy_from_snrs(
    legit_snr: &[f64],
    eve_snr: &[f64],
    order: usize,
    scaling: CapacityScaling,
) -> SecrecyReport {
    let weight = match scaling {
        CapacityScaling::PerOrder => 1.0 / order as f64,
        CapacityScaling::Unscaled => 1.0,
    };
    let info = |snrs: &[f64]| {
        snrs.iter()
            .map(|s| weight * s.ln_1p() / std::f64::consts::LN_2)
            .sum::<f64>()
    };
    let c_legit = info(legit_snr);
    let c_eve = info(eve_snr);
    SecrecyReport {
        c_legit,
        c_eve,
        c_secrecy: (c_legit - c_eve).max(0.0),
        legit_snr: legit_snr.to_vec(),
        eve_snr: eve_snr.to_vec(),
    }
}

pub fn secrecy_capacity(
    legit: &[Channel],
    legit_noise: &[f64],
    eves: &EveSet,
    v: &DVector<Complex64>,
    order: usize,
    scaling: CapacityScaling,
) -> SecrecyReport {
    let legit_snr: Vec<f64> = legit
        .iter()
        .zip(legit_noise)
        .map(|(c, &s)| user_snr(&c.vector, v, s))
        .collect();
    secrecy_from_snrs(&legit_snr, &eves.snrs(v), order, scaling)
}

/// Normalized received power over an angle x range grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub angles_rad: Vec<f64>,
    pub ranges_m: Vec<f64>,
    /// `power[(i, j)]` at `angles_rad[i]`, `ranges_m[j]`; maximum exactly 1.
    pub power: DMatrix<f64>,
}

impl SpectrumGrid {
    pub fn power_db(&self, i: usize, j: usize) -> f64 {
        10.0 * self.power[(i, j)].log10()
    }

    /// Fraction of grid cells with strictly more power than cell `(i, j)`.
    pub fn fraction_above(&self, i: usize, j: usize) -> f64 {
        let p = self.power[(i, j)];
        self.power.iter().filter(|&&x| x > p).count() as f64 / self.power.len() as f64
    }

    pub fn argmax(&self) -> (usize, usize) {
        self.power.iamax_full()
    }
}

/// `|h(theta, r)^H v|^2` for every grid cell, near or far steering by range,
/// normalized to a peak of 1.
pub fn power_spectrum(
    geometry: &ArrayGeometry,
    v: &DVector<Complex64>,
    angles_rad: &[f64],
    ranges_m: &[f64],
    mode: GainMode,
) -> Result<SpectrumGrid> {
    if angles_rad.is_empty() || ranges_m.is_empty() {
        return Err(Error::Argument("spectrum grid must be non-empty".into()));
    }
    if v.len() != geometry.n_elements() {
        return Err(Error::Dimension(format!(
            "beamformer has {} entries, array has {}",
            v.len(),
            geometry.n_elements()
        )));
    }
    let cells: Vec<f64> = (0..angles_rad.len() * ranges_m.len())
        .into_par_iter()
        .map(|c| {
            // column-major: angle index varies fastest
            let (i, j) = (c % angles_rad.len(), c / angles_rad.len());
            let h = geometry.channel_at(ranges_m[j], angles_rad[i], mode, ChannelModel::Hybrid);
            receive_point(&h.vector, v).norm_sqr()
        })
        .collect();
    let mut power = DMatrix::from_vec(angles_rad.len(), ranges_m.len(), cells);
    let peak = power.max();
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    power /= peak;
    Ok(SpectrumGrid {
        angles_rad: angles_rad.to_vec(),
        ranges_m: ranges_m.to_vec(),
        power,
    })
}

/// `count` log-spaced ranges over `[min, max]` that also contain every
/// in-span value of `pinned`. The total stays `count` as long as the pins
/// fit.
pub fn log_range_grid(min: f64, max: f64, count: usize, pinned: &[f64]) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min) || count == 0 {
        return Err(Error::Argument(format!(
            "range grid needs 0 < min < max and count > 0, got [{min}, {max}] x {count}"
        )));
    }
    let mut pins: Vec<f64> = pinned
        .iter()
        .copied()
        .filter(|&r| r >= min && r <= max)
        .collect();
    pins.sort_by(f64::total_cmp);
    pins.dedup();
    let free = count.saturating_sub(pins.len()).max(2);
    let (lo, hi) = (min.ln(), max.ln());
    let mut out: Vec<f64> = (0..free)
        .map(|i| (lo + (hi - lo) * i as f64 / (free - 1) as f64).exp())
        .collect();
    out.extend(pins);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// `n` evenly spaced angles over `[start, end]` (inclusive).
pub fn linear_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Circular complex Gaussian sample with total variance `variance`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Symbol error counts from [`ser_monte_carlo`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerReport {
    pub trials: usize,
    pub legit_errors: Vec<usize>,
    pub eve_errors: Vec<usize>,
    /// Legitimate user whose stream each Eve tries to decode.
    pub eve_targets: Vec<usize>,
}

impl SerReport {
    pub fn legit_ser(&self) -> Vec<f64> {
        self.legit_errors
            .iter()
            .map(|&e| e as f64 / self.trials as f64)
            .collect()
    }

    pub fn eve_ser(&self) -> Vec<f64> {
        self.eve_errors
            .iter()
            .map(|&e| e as f64 / self.trials as f64)
            .collect()
    }

    /// Normal-approximation 95% half-width for an error rate.
    pub fn ci95(&self, ser: f64) -> f64 {
        1.96 * (ser * (1.0 - ser) / self.trials as f64).sqrt()
    }
}

/// The legitimate user whose channel is most aligned with `eve`.
pub fn eve_target(eve: &Channel, legit: &[Channel]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, h) in legit.iter().enumerate() {
        let c = h.vector.dotc(&eve.vector).norm() / (h.vector.norm() * eve.vector.norm());
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0
}

/// Per-slot re-solve with fresh symbols, AWGN at every receiver and hard
/// PSK decisions. Each Eve decodes the stream of the legitimate user it is
/// best aligned with.
pub fn ser_monte_carlo(scenario: &Scenario, trials: usize, seed: u64) -> Result<SerReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    scenario.validate()?;
    let legit = scenario.legit_channels(ChannelModel::Hybrid);
    let eves = scenario.eve_channels();
    let eve_targets: Vec<usize> = eves.iter().map(|e| eve_target(e, &legit)).collect();
    let constellation = &scenario.constellation;

    let outcomes: Vec<Result<(Vec<bool>, Vec<bool>)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let t = trial as u64;
            let assignment = scenario.draw_assignment(seed, t);
            let slot = scenario
                .solve_slot(&legit, &assignment)
                .map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })?;
            let v = slot.v();
            let decide =
                |y: Complex64, expected: usize| constellation.demodulate(y).ok() != Some(expected);
            let legit_err = legit
                .iter()
                .zip(&scenario.users)
                .enumerate()
                .map(|(k, (h, u))| {
                    let mut noise = rng::stream(seed, rng::domain::LEGIT_NOISE, k as u64, t);
                    let y = receive_point(&h.vector, v) + complex_noise(&mut noise, u.noise_var);
                    decide(y, assignment.symbols()[k])
                })
                .collect();
            let eve_err = eves
                .iter()
                .zip(&scenario.eves)
                .enumerate()
                .map(|(j, (h, e))| {
                    let mut noise = rng::stream(seed, rng::domain::EVE_NOISE, j as u64, t);
                    let y = receive_point(&h.vector, v) + complex_noise(&mut noise, e.noise_var);
                    decide(y, assignment.symbols()[eve_targets[j]])
                })
                .collect();
            Ok((legit_err, eve_err))
        })
        .collect();

    let mut legit_errors = vec![0; legit.len()];
    let mut eve_errors = vec![0; eves.len()];
    for outcome in outcomes {
        let (l, e) = outcome?;
        for (acc, hit) in legit_errors.iter_mut().zip(l) {
            *acc += hit as usize;
        }
        for (acc, hit) in eve_errors.iter_mut().zip(e) {
            *acc += hit as usize;
        }
    }
    Ok(SerReport {
        trials,
        legit_errors,
        eve_errors,
        eve_targets,
    })
}
