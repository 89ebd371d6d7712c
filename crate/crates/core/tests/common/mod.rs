#![allow(dead_code)]

use std::f64::consts::PI;

use hnf_precoding::geometry::FieldRegion;
use hnf_precoding::*;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_channel<R: Rng>(rng: &mut R, n: usize) -> Channel {
    let v = DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    });
    Channel::from_vector(v, FieldRegion::Far)
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<Complex64> {
    gaussian_channel(rng, n).vector
}

/// Random system of the standard small suite: Gaussian channels, uniform
/// symbols, targets in [0.5, 2).
pub fn random_system<R: Rng>(rng: &mut R, n: usize, k: usize, order: usize) -> ConstraintSystem {
    let c = PskConstellation::new(order, PI / order as f64).unwrap();
    let channels: Vec<_> = (0..k).map(|_| gaussian_channel(rng, n)).collect();
    let assignment = SlotAssignment::random(k, order, rng);
    let targets: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    build_constraints(&channels, &assignment, &c, &targets, 0.0).unwrap()
}

/// The four-user 28 GHz setup with one off-angle eavesdropper.
pub fn four_user_scenario(order: usize) -> Scenario {
    let geometry = ArrayGeometry::half_wavelength(256, 28e9).unwrap();
    let users = [(10.0, 45.0), (390.0, 80.0), (35.0, 105.0), (420.0, 150.0)]
        .iter()
        .map(|&(r, a): &(f64, f64)| UserSpec::legitimate(r, a.to_radians(), 1.0, 2.0).unwrap())
        .collect();
    let eves = vec![UserSpec::eavesdropper(20.0, 60f64.to_radians(), 1.0).unwrap()];
    Scenario {
        geometry,
        users,
        eves,
        constellation: PskConstellation::new(order, PI / order as f64).unwrap(),
        ref_phase: 0.0,
        gain_mode: GainMode::Unit,
        solver: SolverConfig::default(),
        seed: 11,
    }
}
