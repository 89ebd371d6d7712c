//! Uniform linear array geometry and line-of-sight channel synthesis.
//!
//! Users closer than the Rayleigh distance see a spherical wavefront and get
//! a range-dependent steering vector; users beyond it get the plane-wave
//! (angle-only) steering vector. Angles are measured from the array axis and
//! element 0 is the phase reference.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_elements: usize,
    spacing_m: f64,
    carrier_hz: f64,
    wavelength_m: f64,
    aperture_m: f64,
    rayleigh_m: f64,
}

impl ArrayGeometry {
    pub fn new(n_elements: usize, spacing_m: f64, carrier_hz: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if n_elements < 2 {
            problems.push(format!("n_elements must be >= 2, got {n_elements}"));
        }
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            problems.push(format!("spacing must be positive, got {spacing_m}"));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            problems.push(format!(
                "carrier frequency must be positive, got {carrier_hz}"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Geometry(problems.join("; ")));
        }
        let wavelength_m = SPEED_OF_LIGHT / carrier_hz;
        let aperture_m = (n_elements - 1) as f64 * spacing_m;
        let rayleigh_m = 2.0 * aperture_m * aperture_m / wavelength_m;
        Ok(Self {
            n_elements,
            spacing_m,
            carrier_hz,
            wavelength_m,
            aperture_m,
            rayleigh_m,
        })
    }

    /// Array with half-wavelength element spacing.
    pub fn half_wavelength(n_elements: usize, carrier_hz: f64) -> Result<Self> {
        Self::new(n_elements, SPEED_OF_LIGHT / carrier_hz / 2.0, carrier_hz)
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn aperture_m(&self) -> f64 {
        self.aperture_m
    }

    /// Near/far boundary `2 D^2 / lambda`.
    pub fn rayleigh_distance(&self) -> f64 {
        self.rayleigh_m
    }

    /// A range exactly at the Rayleigh distance counts as far field.
    pub fn classify(&self, range_m: f64) -> FieldRegion {
        if range_m < self.rayleigh_m {
            FieldRegion::Near
        } else {
            FieldRegion::Far
        }
    }

    /// Plane-wave steering vector for a departure angle (radians).
    pub fn far_steering(&self, angle_rad: f64) -> SteeringVector {
        let n = self.n_elements;
        let scale = 1.0 / (n as f64).sqrt();
        let step = 2.0 * PI * self.carrier_hz * self.spacing_m * angle_rad.cos() / SPEED_OF_LIGHT;
        SteeringVector(DVector::from_fn(n, |i, _| {
            Complex64::from_polar(scale, step * i as f64)
        }))
    }

    /// Distance from element `n` to a point at `(range_m, angle_rad)`
    /// measured from element 0.
    pub fn near_element_distance(&self, range_m: f64, angle_rad: f64, n: usize) -> f64 {
        if n == 0 {
            return range_m;
        }
        let offset = self.spacing_m * n as f64;
        (range_m * range_m + offset * offset - 2.0 * range_m * offset * angle_rad.cos())
            .max(0.0)
            .sqrt()
    }

    /// Spherical-wave steering vector for a point at `(range_m, angle_rad)`.
    ///
    /// Entry `n` carries the propagation phase `exp(-j 2 pi (r_n - r) / lambda)`,
    /// whose first-order expansion `r_n - r ~ -n d cos(angle)` reproduces
    /// [`far_steering`](Self::far_steering) at large range.
    pub fn near_steering(&self, range_m: f64, angle_rad: f64) -> SteeringVector {
        let n = self.n_elements;
        let scale = 1.0 / (n as f64).sqrt();
        let k = 2.0 * PI / self.wavelength_m;
        SteeringVector(DVector::from_fn(n, |i, _| {
            let excess = self.near_element_distance(range_m, angle_rad, i) - range_m;
            Complex64::from_polar(scale, -k * excess)
        }))
    }

    /// Free-space amplitude `lambda / (4 pi r)` with propagation phase, or
    /// exactly one in unit-gain mode.
    pub fn channel_gain(&self, range_m: f64, mode: GainMode) -> Complex64 {
        match mode {
            GainMode::Unit => Complex64::new(1.0, 0.0),
            GainMode::FreeSpace => {
                let amplitude = self.wavelength_m / (4.0 * PI * range_m);
                Complex64::from_polar(amplitude, -2.0 * PI * range_m / self.wavelength_m)
            }
        }
    }

    pub fn build_channel(&self, user: &UserSpec, mode: GainMode) -> Channel {
        self.channel_at(user.range_m, user.angle_rad, mode, ChannelModel::Hybrid)
    }

    /// Channel toward an arbitrary point. `ChannelModel::FarOnly` ignores the
    /// Rayleigh classification and always uses plane-wave steering.
    pub fn channel_at(
        &self,
        range_m: f64,
        angle_rad: f64,
        mode: GainMode,
        model: ChannelModel,
    ) -> Channel {
        let field = match model {
            ChannelModel::Hybrid => self.classify(range_m),
            ChannelModel::FarOnly => FieldRegion::Far,
        };
        let steering = match field {
            FieldRegion::Near => self.near_steering(range_m, angle_rad),
            FieldRegion::Far => self.far_steering(angle_rad),
        };
        let gain = self.channel_gain(range_m, mode);
        let factor = gain * (self.n_elements as f64).sqrt();
        Channel {
            vector: steering.0 * factor,
            gain,
            field,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRegion {
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// Every channel gain is exactly 1.
    #[default]
    Unit,
    /// Free-space path loss with propagation phase.
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelModel {
    /// Near-field users get spherical-wave steering.
    #[default]
    Hybrid,
    /// Plane-wave steering for every user, regardless of range.
    FarOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Legitimate,
    Eavesdropper,
}

/// A receiver placement. `target_amplitude` is the receive amplitude the
/// precoder must reach and is ignored for eavesdroppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSpec {
    pub range_m: f64,
    pub angle_rad: f64,
    pub role: Role,
    pub noise_var: f64,
    pub target_amplitude: f64,
}

impl UserSpec {
    pub fn legitimate(
        range_m: f64,
        angle_rad: f64,
        noise_var: f64,
        target_amplitude: f64,
    ) -> Result<Self> {
        let user = Self {
            range_m,
            angle_rad,
            role: Role::Legitimate,
            noise_var,
            target_amplitude,
        };
        user.validate().map(|_| user)
    }

    pub fn eavesdropper(range_m: f64, angle_rad: f64, noise_var: f64) -> Result<Self> {
        let user = Self {
            range_m,
            angle_rad,
            role: Role::Eavesdropper,
            noise_var,
            target_amplitude: 0.0,
        };
        user.validate().map(|_| user)
    }

    /// Every violated invariant, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            out.push(format!("range must be positive, got {}", self.range_m));
        }
        if !(self.angle_rad > 0.0 && self.angle_rad < PI) {
            out.push(format!(
                "angle must lie strictly between 0 and 180 degrees, got {:.6} deg",
                self.angle_rad.to_degrees()
            ));
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            out.push(format!(
                "noise variance must be positive, got {}",
                self.noise_var
            ));
        }
        if self.role == Role::Legitimate
            && !(self.target_amplitude.is_finite() && self.target_amplitude >= 0.0)
        {
            out.push(format!(
                "target amplitude must be non-negative, got {}",
                self.target_amplitude
            ));
        }
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
}

/// Unit-norm array response.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(DVector<Complex64>);

impl SteeringVector {
    pub fn entries(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Full channel vector `sqrt(N) * gain * steering`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub vector: DVector<Complex64>,
    pub gain: Complex64,
    pub field: FieldRegion,
}

impl Channel {
    /// Wraps an arbitrary channel vector. The gain is recorded as the real
    /// scalar that keeps `|vector| = sqrt(N) |gain|`.
    pub fn from_vector(vector: DVector<Complex64>, field: FieldRegion) -> Self {
        let n = vector.len().max(1) as f64;
        let gain = Complex64::new(vector.norm() / n.sqrt(), 0.0);
        Self {
            vector,
            gain,
            field,
        }
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }
}
