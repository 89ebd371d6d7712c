//! Linear constraint system for minimum-power symbol-level precoding.
//!
//! Each legitimate user's channel is rotated so that its intended symbol
//! sits at the common reference phase. The two edges of the relaxed sector
//! then become two real linear inequalities on the stacked beamformer
//! `[Re v; Im v]`, giving the system `F v >= rho`:
//!
//! ```text
//! F   = [ H2 - k1 H1 ]      rho = [  rho1 ]
//!       [ k2 H1 - H2 ]            [ -rho2 ]
//! ```
//!
//! where `H1 v = Re(H^H v)` and `H2 v = Im(H^H v)` for the rotated channels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Channel;
use crate::modulation::{draw_symbols, PskConstellation, SectorSpec};

/// Symbol index per legitimate user for one symbol slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment(Vec<usize>);

impl SlotAssignment {
    pub fn new(symbols: Vec<usize>, order: usize) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s >= order) {
            return Err(Error::Argument(format!(
                "symbol index {bad} out of range for M = {order}"
            )));
        }
        Ok(Self(symbols))
    }

    pub fn random<R: Rng + ?Sized>(users: usize, order: usize, rng: &mut R) -> Self {
        Self(draw_symbols(order, users, rng))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Phase rotation that moves user `k`'s intended symbol onto the reference phase.
pub fn rotation_phase(
    user: usize,
    assignment: &SlotAssignment,
    constellation: &PskConstellation,
    ref_phase: f64,
) -> f64 {
    constellation.phase(assignment.symbols()[user]) - ref_phase
}

/// Sector edge lines `Im = k Re + rho` through the apex `amplitude * e^{j ref_phase}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorLines {
    pub kappa1: f64,
    pub kappa2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Slopes `tan(phi0 -+ pi/M)` and intercepts of the two sector edges.
///
/// Both edge directions must point into the right half-plane, otherwise the
/// inequality directions of the line form flip; such frames are rejected.
pub fn sector_lines(amplitude: f64, ref_phase: f64, order: usize) -> Result<SectorLines> {
    let half = PI / order as f64;
    let (lo, hi) = (ref_phase - half, ref_phase + half);
    const MIN_COS: f64 = 1e-9;
    if order < 3 || lo.cos() <= MIN_COS || hi.cos() <= MIN_COS {
        return Err(Error::SlopeSingularity { ref_phase, order });
    }
    let kappa1 = lo.tan();
    let kappa2 = hi.tan();
    let (s, c) = ref_phase.sin_cos();
    Ok(SectorLines {
        kappa1,
        kappa2,
        rho1: amplitude * (s - kappa1 * c),
        rho2: amplitude * (s - kappa2 * c),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    f: DMatrix<f64>,
    rho: DVector<f64>,
    rotated_channels: Vec<DVector<Complex64>>,
    lines: Vec<SectorLines>,
    amplitudes: Vec<f64>,
    ref_phase: f64,
    order: usize,
}

impl ConstraintSystem {
    /// A bare system `F v >= rho` without channel bookkeeping.
    pub fn from_parts(f: DMatrix<f64>, rho: DVector<f64>) -> Result<Self> {
        if f.nrows() != rho.len() {
            return Err(Error::Dimension(format!(
                "F has {} rows but rho has {} entries",
                f.nrows(),
                rho.len()
            )));
        }
        Ok(Self {
            f,
            rho,
            rotated_channels: Vec::new(),
            lines: Vec::new(),
            amplitudes: Vec::new(),
            ref_phase: 0.0,
            order: 0,
        })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn rho(&self) -> &DVector<f64> {
        &self.rho
    }

    pub fn rotated_channels(&self) -> &[DVector<Complex64>] {
        &self.rotated_channels
    }

    pub fn lines(&self) -> &[SectorLines] {
        &self.lines
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn ref_phase(&self) -> f64 {
        self.ref_phase
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_constraints(&self) -> usize {
        self.f.nrows()
    }

    /// Length of the stacked real beamformer (2N).
    pub fn n_variables(&self) -> usize {
        self.f.ncols()
    }

    /// Rotated noise-free receive point `h~_k^H v` of user `k`.
    pub fn rotated_point(&self, user: usize, v: &DVector<Complex64>) -> Complex64 {
        self.rotated_channels[user].dotc(v)
    }

    pub fn sector(&self, user: usize) -> SectorSpec {
        SectorSpec {
            ref_phase: self.ref_phase,
            half_width: PI / self.order as f64,
            amplitude: self.amplitudes[user],
        }
    }

    /// `F v - rho`; non-negative entries mean the constraint holds.
    pub fn slack(&self, stacked: &DVector<f64>) -> DVector<f64> {
        &self.f * stacked - &self.rho
    }

    /// `|max(rho - F v, 0)|_2`.
    pub fn violation_norm(&self, stacked: &DVector<f64>) -> f64 {
        self.slack(stacked).map(|s| (-s).max(0.0)).norm()
    }

    pub fn is_satisfied(&self, stacked: &DVector<f64>, tol: f64) -> bool {
        self.slack(stacked).iter().all(|&s| s >= -tol)
    }

    /// Same bookkeeping with a replaced `F` and `rho` of identical shape.
    pub(crate) fn with_parts(&self, f: DMatrix<f64>, rho: DVector<f64>) -> Self {
        debug_assert_eq!(f.shape(), self.f.shape());
        Self {
            f,
            rho,
            ..self.clone()
        }
    }

    /// Copy with every row of `F` (and the matching entry of `rho`) scaled
    /// to unit norm, together with the scale applied to each row. The
    /// feasible set is unchanged. Zero rows are left alone.
    pub fn equilibrated(&self) -> (ConstraintSystem, DVector<f64>) {
        let scales = DVector::from_iterator(
            self.f.nrows(),
            self.f.row_iter().map(|row| {
                let n = row.norm();
                if n > 0.0 {
                    1.0 / n
                } else {
                    1.0
                }
            }),
        );
        let mut out = self.clone();
        for (i, s) in scales.iter().enumerate() {
            out.f.row_mut(i).scale_mut(*s);
            out.rho[i] *= s;
        }
        (out, scales)
    }
}

/// Assembles `F` and `rho` for one slot.
pub fn build_constraints(
    channels: &[Channel],
    assignment: &SlotAssignment,
    constellation: &PskConstellation,
    targets: &[f64],
    ref_phase: f64,
) -> Result<ConstraintSystem> {
    let k = channels.len();
    if k == 0 {
        return Err(Error::Argument(
            "at least one legitimate user is required".into(),
        ));
    }
    let n = channels[0].len();
    if channels.iter().any(|h| h.len() != n) {
        return Err(Error::Dimension("channel vectors differ in length".into()));
    }
    if assignment.len() != k || targets.len() != k {
        return Err(Error::Dimension(format!(
            "{k} channels, {} symbols, {} targets",
            assignment.len(),
            targets.len()
        )));
    }
    if k > n {
        return Err(Error::TooManyUsers {
            users: k,
            antennas: n,
        });
    }
    if let Some(t) = targets.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Argument(format!(
            "target amplitude must be non-negative, got {t}"
        )));
    }
    let order = constellation.order();
    if assignment.symbols().iter().any(|&s| s >= order) {
        return Err(Error::Argument("symbol index out of range".into()));
    }

    let lines = targets
        .iter()
        .map(|&z| sector_lines(z, ref_phase, order))
        .collect::<Result<Vec<_>>>()?;

    let rotated_channels: Vec<DVector<Complex64>> = (0..k)
        .map(|u| {
            let beta = rotation_phase(u, assignment, constellation, ref_phase);
            &channels[u].vector * Complex64::from_polar(1.0, beta)
        })
        .collect();

    let mut f = DMatrix::zeros(2 * k, 2 * n);
    let mut rho = DVector::zeros(2 * k);
    for (u, h) in rotated_channels.iter().enumerate() {
        let SectorLines {
            kappa1,
            kappa2,
            rho1,
            rho2,
        } = lines[u];
        for (i, hc) in h.iter().enumerate() {
            // row u of H^H is conj(h); Re part acts on Re v, Im part on Im v
            let (hr, hi) = (hc.re, -hc.im);
            // H1 row: [Re, -Im], H2 row: [Im, Re]
            let (h1_re, h1_im) = (hr, -hi);
            let (h2_re, h2_im) = (hi, hr);
            f[(u, i)] = h2_re - kappa1 * h1_re;
            f[(u, n + i)] = h2_im - kappa1 * h1_im;
            f[(k + u, i)] = kappa2 * h1_re - h2_re;
            f[(k + u, n + i)] = kappa2 * h1_im - h2_im;
        }
        rho[u] = rho1;
        rho[k + u] = -rho2;
    }

    Ok(ConstraintSystem {
        f,
        rho,
        rotated_channels,
        lines,
        amplitudes: targets.to_vec(),
        ref_phase,
        order,
    })
}

/// `[Re v; Im v]`.
pub fn stack(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn unstack(stacked: &DVector<f64>) -> Result<DVector<Complex64>> {
    if !stacked.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "stacked vector has odd length {}",
            stacked.len()
        )));
    }
    let n = stacked.len() / 2;
    Ok(DVector::from_fn(n, |i, _| {
        Complex64::new(stacked[i], stacked[n + i])
    }))
}

/// Splits the aggregate beamformer into per-user beamformers with
/// `sum_k w_k x_k = v`, using the equal split `w_k = v conj(x_k) / K`.
pub fn per_user_beamformers(
    v: &DVector<Complex64>,
    assignment: &SlotAssignment,
    constellation: &PskConstellation,
) -> Vec<DVector<Complex64>> {
    let k = assignment.len() as f64;
    assignment
        .symbols()
        .iter()
        .map(|&s| v * (constellation.point(s).conj() / k))
        .collect()
}

/// How the optional feasibility scaling ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepairOutcome {
    NotRequested,
    /// Already feasible; nothing scaled.
    NotNeeded,
    /// Beamformer scaled by this factor (>= 1).
    Scaled(f64),
    /// No outward scaling reaches feasibility.
    Failed,
}

impl RepairOutcome {
    pub fn failed(&self) -> bool {
        matches!(self, RepairOutcome::Failed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution {
    pub v: DVector<Complex64>,
    pub v_stacked: DVector<f64>,
    /// Transmit power `|v|^2`.
    pub objective: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub repair: RepairOutcome,
}

impl PrecoderSolution {
    pub fn from_stacked(v_stacked: DVector<f64>) -> Result<Self> {
        let v = unstack(&v_stacked)?;
        let objective = v_stacked.norm_squared();
        Ok(Self {
            v,
            v_stacked,
            objective,
            iterations: 0,
            objective_trace: Vec::new(),
            converged: true,
            repair: RepairOutcome::NotRequested,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FieldRegion;
    use approx::assert_relative_eq;

    fn unit_channel(entries: &[(f64, f64)]) -> Channel {
        let v = DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&(r, i)| Complex64::new(r, i)),
        );
        Channel::from_vector(v, FieldRegion::Far)
    }

    #[test]
    fn rotation_phases() {
        let c = PskConstellation::new(4, PI / 4.0).unwrap();
        let a = SlotAssignment::new(vec![0, 1], 4).unwrap();
        assert_relative_eq!(rotation_phase(0, &a, &c, PI / 4.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            rotation_phase(1, &a, &c, PI / 4.0),
            PI / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rotated_points_share_reference_phase() {
        // orthogonal channels, v matched to each user's symbol
        let c = PskConstellation::new(8, 0.1).unwrap();
        let a = SlotAssignment::new(vec![3, 6, 1], 8).unwrap();
        let chans: Vec<Channel> = (0..3)
            .map(|u| {
                let mut e = vec![(0.0, 0.0); 4];
                e[u] = (0.0, 2.0);
                unit_channel(&e)
            })
            .collect();
        let mut v = DVector::zeros(4);
        for (u, h) in chans.iter().enumerate() {
            let x = c.point(a.symbols()[u]);
            v += &h.vector * (x * (u + 1) as f64 / h.vector.norm_squared());
        }
        let ref_phase = 0.3;
        let sys = build_constraints(&chans, &a, &c, &[1.0, 1.0, 1.0], ref_phase).unwrap();
        for (u, h) in chans.iter().enumerate() {
            // physical point carries the symbol phase
            let y = h.vector.dotc(&v);
            assert_relative_eq!(y.arg(), c.point(a.symbols()[u]).arg(), epsilon = 1e-12);
            assert_relative_eq!(sys.rotated_point(u, &v).arg(), ref_phase, epsilon = 1e-12);
        }
    }

    #[test]
    fn qpsk_sector_lines() {
        let l = sector_lines(1.0, 0.0, 4).unwrap();
        assert_relative_eq!(l.kappa1, -1.0, epsilon = 1e-15);
        assert_relative_eq!(l.kappa2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(l.rho1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(l.rho2, -1.0, epsilon = 1e-15);

        let l8 = sector_lines(1.0, 0.0, 8).unwrap();
        assert_relative_eq!(l8.kappa2, 2f64.sqrt() - 1.0, epsilon = 1e-15);

        let l0 = sector_lines(0.0, 0.2, 8).unwrap();
        assert_eq!((l0.rho1, l0.rho2), (0.0, 0.0));
    }

    #[test]
    fn singular_frames_are_rejected() {
        assert!(matches!(
            sector_lines(1.0, PI / 4.0, 4),
            Err(Error::SlopeSingularity { .. })
        ));
        assert!(sector_lines(1.0, 0.0, 2).is_err());
        assert!(sector_lines(1.0, PI, 8).is_err());
    }

    #[test]
    fn hand_assembled_single_user_system() {
        let c = PskConstellation::new(4, 0.0).unwrap();
        let a = SlotAssignment::new(vec![0], 4).unwrap();
        let h = unit_channel(&[(1.0, 0.0), (0.0, 0.0)]);
        let sys = build_constraints(&[h], &a, &c, &[1.0], 0.0).unwrap();
        let expected_f = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        assert!((sys.f() - expected_f).norm() < 1e-15);
        assert!((sys.rho() - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-15);

        let good = DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        assert!((sys.f() * &good - DVector::from_vec(vec![2.0, 2.0])).norm() < 1e-15);
        assert!(sys.is_satisfied(&good, 0.0));
        let v = unstack(&good).unwrap();
        assert!(crate::modulation::in_relaxed_region(
            sys.rotated_point(0, &v),
            &sys.sector(0)
        ));

        let bad = DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0]);
        assert!(!sys.is_satisfied(&bad, 0.0));
    }

    #[test]
    fn build_rejects_bad_shapes() {
        let c = PskConstellation::new(4, 0.0).unwrap();
        let h = unit_channel(&[(1.0, 0.0)]);
        let a2 = SlotAssignment::new(vec![0, 1], 4).unwrap();
        assert!(matches!(
            build_constraints(&[h.clone(), h.clone()], &a2, &c, &[1.0, 1.0], 0.0),
            Err(Error::TooManyUsers { .. })
        ));
        let a1 = SlotAssignment::new(vec![0], 4).unwrap();
        assert!(matches!(
            build_constraints(std::slice::from_ref(&h), &a1, &c, &[1.0, 2.0], 0.0),
            Err(Error::Dimension(_))
        ));
        assert!(build_constraints(&[], &a1, &c, &[], 0.0).is_err());
        assert!(SlotAssignment::new(vec![4], 4).is_err());
    }

    #[test]
    fn stacking() {
        let v = DVector::from_vec(vec![Complex64::new(1.0, 2.0)]);
        assert_eq!(stack(&v), DVector::from_vec(vec![1.0, 2.0]));
        let w = DVector::from_vec(vec![Complex64::new(-0.5, 3.0), Complex64::new(4.0, -1.0)]);
        assert_eq!(unstack(&stack(&w)).unwrap(), w);
        assert_relative_eq!(stack(&w).norm(), w.norm(), epsilon = 1e-14);
        assert!(unstack(&DVector::from_vec(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn beamformer_split() {
        let c = PskConstellation::new(8, 0.0).unwrap();
        let v = DVector::from_vec(vec![Complex64::new(1.0, -2.0), Complex64::new(0.3, 0.4)]);
        let one = SlotAssignment::new(vec![5], 8).unwrap();
        let w = per_user_beamformers(&v, &one, &c);
        assert!((&w[0] * c.point(5) - &v).norm() < 1e-12);

        let many = SlotAssignment::new(vec![1, 7, 2], 8).unwrap();
        let w = per_user_beamformers(&v, &many, &c);
        let sum = w
            .iter()
            .zip(many.symbols())
            .fold(DVector::zeros(2), |acc: DVector<Complex64>, (wk, &s)| {
                acc + wk * c.point(s)
            });
        assert!((sum - &v).norm() < 1e-12);
        assert_relative_eq!(w[0].norm(), w[2].norm(), epsilon = 1e-14);
    }

    #[test]
    fn equilibration_keeps_feasible_set() {
        let c = PskConstellation::new(8, 0.0).unwrap();
        let a = SlotAssignment::new(vec![2], 8).unwrap();
        let h = unit_channel(&[(3.0, 1.0), (0.0, -2.0)]);
        let sys = build_constraints(&[h], &a, &c, &[2.0], 0.0).unwrap();
        let (eq, scales) = sys.equilibrated();
        for (i, row) in eq.f().row_iter().enumerate() {
            assert_relative_eq!(row.norm(), 1.0, epsilon = 1e-14);
            assert_relative_eq!(eq.rho()[i], sys.rho()[i] * scales[i], epsilon = 1e-14);
        }
    }
}
