//! M-PSK constellations, hard-decision demodulation and relaxed-phase
//! sector membership.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    order: usize,
    phase_offset: f64,
    points: Vec<Complex64>,
}

impl PskConstellation {
    pub fn new(order: usize, phase_offset: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::ModulationOrder(order));
        }
        let points = (0..order)
            .map(|m| Complex64::from_polar(1.0, phase_offset + 2.0 * PI * m as f64 / order as f64))
            .collect();
        Ok(Self {
            order,
            phase_offset,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Phase of symbol `index` (not wrapped).
    pub fn phase(&self, index: usize) -> f64 {
        self.phase_offset + 2.0 * PI * index as f64 / self.order as f64
    }

    /// Hard decision by phase. A point exactly on a decision boundary goes
    /// to the lower of the two neighbouring indices.
    pub fn demodulate(&self, point: Complex64) -> Result<usize> {
        if point.re == 0.0 && point.im == 0.0 {
            return Err(Error::ZeroPoint);
        }
        let m = self.order as f64;
        let sector = 2.0 * PI / m;
        let pos = ((point.arg() - self.phase_offset) / sector).rem_euclid(m);
        let base = pos.floor();
        let frac = pos - base;
        let lower = base as usize % self.order;
        let upper = (lower + 1) % self.order;
        const TIE: f64 = 1e-12;
        Ok(if frac < 0.5 - TIE {
            lower
        } else if frac > 0.5 + TIE {
            upper
        } else {
            lower.min(upper)
        })
    }
}

/// Relaxed-phase region around the constellation point `amplitude * e^{j ref_phase}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorSpec {
    pub ref_phase: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl SectorSpec {
    pub fn new(ref_phase: f64, order: usize, amplitude: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::ModulationOrder(order));
        }
        Ok(Self {
            ref_phase,
            half_width: PI / order as f64,
            amplitude,
        })
    }

    pub fn apex(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.ref_phase)
    }

    /// Membership with both boundary inequalities relaxed by `slack`.
    pub fn contains_within(&self, point: Complex64, slack: f64) -> bool {
        let z = point * Complex64::from_polar(1.0, -self.ref_phase);
        let excess = z.re - self.amplitude;
        // half-plane form for BPSK: tan(pi/2) is unbounded
        if self.half_width >= PI / 2.0 - 1e-15 {
            return excess >= -slack;
        }
        excess >= -slack && z.im.abs() <= excess * self.half_width.tan() + slack
    }
}

/// Whether a receive point lies in the relaxed sector (boundaries inclusive).
pub fn in_relaxed_region(point: Complex64, sector: &SectorSpec) -> bool {
    sector.contains_within(point, 0.0)
}

/// `count` i.i.d. uniform symbol indices drawn from a seeded stream.
pub fn random_symbols(constellation: &PskConstellation, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_symbols(constellation.order(), count, &mut rng)
}

pub fn draw_symbols<R: Rng + ?Sized>(order: usize, count: usize, rng: &mut R) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..order)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn qpsk_points() {
        let c = PskConstellation::new(4, PI / 4.0).unwrap();
        for (m, p) in c.points().iter().enumerate() {
            let expected = Complex64::from_polar(1.0, PI / 4.0 + m as f64 * PI / 2.0);
            assert!((p - expected).norm() < 1e-15);
        }
        let b = PskConstellation::new(2, 0.0).unwrap();
        assert!((b.point(0) - 1.0).norm() < 1e-15);
        assert!((b.point(1) + 1.0).norm() < 1e-15);
        assert!(matches!(
            PskConstellation::new(1, 0.0),
            Err(Error::ModulationOrder(1))
        ));
    }

    #[test]
    fn unit_average_energy() {
        for m in [2, 4, 8, 16, 5] {
            let c = PskConstellation::new(m, 0.3).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert_relative_eq!(e, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn demodulation_cases() {
        let c = PskConstellation::new(4, PI / 4.0).unwrap();
        assert_eq!(
            c.demodulate(Complex64::from_polar(2.0, PI / 4.0)).unwrap(),
            0
        );
        assert_eq!(
            c.demodulate(Complex64::from_polar(1.0, PI / 4.0 + PI / 5.0))
                .unwrap(),
            0
        );
        assert_eq!(
            c.demodulate(Complex64::from_polar(1.0, -3.0 * PI / 4.0))
                .unwrap(),
            2
        );
        // boundary between symbols 0 and 1
        assert_eq!(c.demodulate(Complex64::new(0.0, 1.0)).unwrap(), 0);
        // boundary between symbols 3 and 0 wraps to 0
        assert_eq!(c.demodulate(Complex64::new(1.0, 0.0)).unwrap(), 0);
        // boundary between 1 and 2
        assert_eq!(c.demodulate(Complex64::new(-1.0, 0.0)).unwrap(), 1);
        assert_eq!(
            c.demodulate(Complex64::new(0.0, 0.0)),
            Err(Error::ZeroPoint)
        );
    }

    #[test]
    fn sector_membership_cases() {
        let s = SectorSpec::new(0.7, 8, 1.5).unwrap();
        assert!(in_relaxed_region(s.apex(), &s));
        assert!(!in_relaxed_region(s.apex() * 0.5, &s));

        let q = SectorSpec::new(0.0, 4, 1.0).unwrap();
        assert!(in_relaxed_region(Complex64::new(2.0, 0.5), &q));
        assert!(in_relaxed_region(Complex64::new(2.0, 0.999), &q));
        assert!(q.contains_within(Complex64::new(2.0, 1.0), 1e-12));
        assert!(!in_relaxed_region(Complex64::new(2.0, 1.01), &q));
        assert!(!in_relaxed_region(Complex64::new(0.99, 0.0), &q));

        let b = SectorSpec::new(0.0, 2, 1.0).unwrap();
        assert!(in_relaxed_region(Complex64::new(1.0, 100.0), &b));
        assert!(!in_relaxed_region(Complex64::new(0.9, 0.0), &b));
    }

    #[test]
    fn empty_and_repeatable_symbol_draws() {
        let c = PskConstellation::new(4, 0.0).unwrap();
        assert!(random_symbols(&c, 0, 9).is_empty());
        assert_eq!(random_symbols(&c, 500, 42), random_symbols(&c, 500, 42));
        assert_ne!(random_symbols(&c, 500, 42), random_symbols(&c, 500, 43));
    }

    #[test]
    fn symbol_frequencies_are_uniform() {
        let c = PskConstellation::new(4, 0.0).unwrap();
        let n = 100_000;
        let draws = random_symbols(&c, n, 2024);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for m in 0..4 {
            let count = draws.iter().filter(|&&d| d == m).count() as f64;
            assert!(
                (count - 0.25 * n as f64).abs() < 3.0 * sigma,
                "symbol {m}: {count}"
            );
        }
    }

    proptest! {
        #[test]
        fn apex_always_inside(amp in 0.0f64..10.0, phase in -PI..PI, m in prop::sample::select(vec![2usize, 3, 4, 8, 16])) {
            let s = SectorSpec::new(phase, m, amp).unwrap();
            prop_assert!(s.contains_within(s.apex(), 1e-12 * (1.0 + amp)));
        }

        #[test]
        fn outward_scaling_preserves_membership(
            amp in 0.0f64..5.0, phase in -PI..PI,
            re in -10.0f64..10.0, im in -10.0f64..10.0, scale in 1.0f64..20.0,
            m in prop::sample::select(vec![2usize, 4, 8]),
        ) {
            let s = SectorSpec::new(phase, m, amp).unwrap();
            let p = Complex64::new(re, im);
            if in_relaxed_region(p, &s) {
                prop_assert!(s.contains_within(p * scale, 1e-9 * scale * (1.0 + p.norm())));
            }
        }

        #[test]
        fn sector_points_demodulate_to_their_symbol(
            m in prop::sample::select(vec![2usize, 4, 8]),
            sym_seed in 0usize..64, amp in 0.01f64..5.0,
            dist in 0.0f64..10.0, tilt in -1.0f64..1.0, offset in -PI..PI,
        ) {
            let c = PskConstellation::new(m, offset).unwrap();
            let sym = sym_seed % m;
            let s = SectorSpec::new(c.phase(sym), m, amp).unwrap();
            // walk from the apex along a direction inside the cone
            let dir = Complex64::from_polar(1.0, c.phase(sym) + tilt * s.half_width * 0.999);
            let p = s.apex() + dir * dist;
            prop_assume!(in_relaxed_region(p, &s));
            prop_assert_eq!(c.demodulate(p).unwrap(), sym);
        }

        #[test]
        fn demodulation_is_scale_invariant(
            re in -5.0f64..5.0, im in -5.0f64..5.0, scale in 1e-3f64..1e3,
            m in prop::sample::select(vec![2usize, 4, 8]),
        ) {
            prop_assume!(re.abs() + im.abs() > 1e-6);
            let c = PskConstellation::new(m, PI / m as f64).unwrap();
            let p = Complex64::new(re, im);
            prop_assert_eq!(c.demodulate(p).unwrap(), c.demodulate(p * scale).unwrap());
        }
    }
}
