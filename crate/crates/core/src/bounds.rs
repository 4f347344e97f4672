//! Overlap factor, relative phase, Fubini-Study distances and the relative-phase
//! inequalities.
//!
//! Every inequality is reported as a [`BoundReport`] with a uniform sign convention:
//! `slack >= 0` means satisfied. Raw forms (the Robertson relation on the live state,
//! the triangle inequality on live vectors) are reported next to the simplified
//! closed-form bounds so that any algebraic slip in a simplification shows up as a
//! disagreement rather than going unnoticed.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::composite::{couple, BranchSpec, CompositeState, PhasePair, StateVector};
use crate::dynamics::{select_time_step, ApparatusHamiltonian, Evolver, PropagatorConfig};
use crate::pointer::PointerWave;
use crate::{Error, Result};

/// Denominators below this make a bound undefined.
pub const DEGENERATE_THRESHOLD: f64 = 1e-14;
/// Slack down to `-VERDICT_TOLERANCE` still counts as satisfied (rounding).
pub const VERDICT_TOLERANCE: f64 = 1e-10;
/// Numerators `S|Z|^2 - 1` and `S - 1` this close to zero are taken as zero. Weights
/// and overlaps carry round-off of order 1e-15, which the small denominators of the
/// bounds would otherwise turn into spurious signs.
pub const UNIT_SNAP: f64 = 1e-12;
/// Required agreement between the two routes to `Z_ij(t)`.
pub const OVERLAP_ROUTE_TOLERANCE: f64 = 1e-7;

/// `Z_ij(t) = <psi| exp(i t H(q + L_i)) exp(-i t H(q + L_j)) |psi>`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OverlapZ {
    pub value: Complex64,
}

impl OverlapZ {
    pub fn new(value: Complex64) -> Self {
        OverlapZ { value }
    }

    pub fn unit() -> Self {
        OverlapZ { value: Complex64::new(1.0, 0.0) }
    }

    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }

    /// `theta(t)` in `(-pi, pi]`.
    pub fn phase(&self) -> f64 {
        wrap_phase(self.value.arg())
    }

    pub fn conj(&self) -> Self {
        OverlapZ { value: self.value.conj() }
    }
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = libm::fmod(x, 2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Route (a): evolve the unshifted wave under `H(q + L_i)` and `H(q + L_j)` and take
/// the inner product. Returns the overlap and the step used.
pub fn overlap_z_shifted(
    initial: &PointerWave,
    h: &ApparatusHamiltonian,
    shift_i: f64,
    shift_j: f64,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<(OverlapZ, f64)> {
    if t == 0.0 {
        return Ok((OverlapZ::new(initial.inner(initial)?), 0.0));
    }
    let hi = h.shifted(shift_i);
    let hj = h.shifted(shift_j);
    let dt_i = select_time_step(&[initial], &hi, t, cfg)?;
    let dt_j = select_time_step(&[initial], &hj, t, cfg)?;
    let dt = dt_i.min(dt_j);
    let wi = Evolver::new(initial.grid(), &hi, dt)?.advance_wave(initial, t)?;
    let wj = Evolver::new(initial.grid(), &hj, dt)?.advance_wave(initial, t)?;
    crate::dynamics::check_wave(&wi)?;
    crate::dynamics::check_wave(&wj)?;
    Ok((OverlapZ::new(wi.inner(&wj)?), dt))
}

/// Route (b): couple an equal-weight two-branch reference state with shifts
/// `(L_i, L_j)`, evolve it, and read `Z = 2 (<A1> + i <A2>)`.
pub fn overlap_z_from_state(
    initial: &PointerWave,
    h: &ApparatusHamiltonian,
    shift_i: f64,
    shift_j: f64,
    t: f64,
    dt: f64,
) -> Result<OverlapZ> {
    let w = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    // unit coupling length so that the eigenvalues are the shifts themselves
    let state = couple(&[BranchSpec::new(1, w, shift_i), BranchSpec::new(2, w, shift_j)], 1.0, initial)?;
    let evolved = if t == 0.0 {
        state
    } else {
        let out = Evolver::new(initial.grid(), h, dt)?.advance_state(&state, t)?;
        crate::dynamics::check_propagated(&out)?;
        out
    };
    let (a1, a2) = evolved.expect_phase_ops(&evolved.pair(1, 2)?)?;
    Ok(OverlapZ::new(Complex64::new(2.0 * a1, 2.0 * a2)))
}

/// `Z_ij(t)` by both routes; fails if they disagree by more than
/// [`OVERLAP_ROUTE_TOLERANCE`].
pub fn overlap_z(
    initial: &PointerWave,
    h: &ApparatusHamiltonian,
    shift_i: f64,
    shift_j: f64,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<OverlapZ> {
    let (direct, dt) = overlap_z_shifted(initial, h, shift_i, shift_j, t, cfg)?;
    let via_state = overlap_z_from_state(initial, h, shift_i, shift_j, t, dt)?;
    let gap = (direct.value - via_state.value).norm();
    if gap > OVERLAP_ROUTE_TOLERANCE {
        return Err(Error::Instability(format!(
            "overlap routes disagree by {gap:.3e}; use shifts that are multiples of dq or a finer grid"
        )));
    }
    Ok(direct)
}

/// `Phi_ij = arg(conj(c_i) c_j Z_ij)` in `(-pi, pi]`.
pub fn relative_phase(ci: Complex64, cj: Complex64, z: &OverlapZ) -> Result<f64> {
    if ci.norm() < DEGENERATE_THRESHOLD || cj.norm() < DEGENERATE_THRESHOLD || z.magnitude() < DEGENERATE_THRESHOLD {
        return Err(Error::Degenerate("relative phase of a vanishing amplitude".into()));
    }
    Ok(wrap_phase((ci.conj() * cj * z.value).arg()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundKind {
    /// `var1 var2 >= <[A1, A2]>^2 / 4` on the live state (ray-normalised).
    Robertson,
    /// `sin^2 2Phi >= (S|Z|^2 - 1) / (P|Z|^4)`.
    Uncertainty,
    /// `D12 + D23 >= D13` on the live vectors `Psi, A1 Psi, A2 Psi`.
    TriangleRaw,
    /// `cos 2Phi <= 1 / (|Z|^2 S)`.
    Triangle,
    /// `sin^2 Phi >= (1/2) (|Z|^2 S - 1)/(|Z|^2 S + 1) S / (P |Z|^2)`.
    Tight,
    /// Small-angle form `Phi^2 >= (Phi^2)_min` with the same right-hand side as `Tight`.
    MinPhase,
    /// `sin^2 phi >= (1/2) (S - 1)/(S + 1) S / (P |Z|^2)` with the coupling-time phase.
    PostMeasurement,
    /// `PostMeasurement` with `|Z| = 1`.
    PostMeasurementUnitZ,
    /// Two-outcome form of `Uncertainty` with `S = 1`.
    SgUncertainty,
    /// Two-outcome form of `Tight` with `S = 1`.
    SgTight,
}

impl BoundKind {
    pub const ALL: [BoundKind; 10] = [
        BoundKind::Robertson,
        BoundKind::Uncertainty,
        BoundKind::TriangleRaw,
        BoundKind::Triangle,
        BoundKind::Tight,
        BoundKind::MinPhase,
        BoundKind::PostMeasurement,
        BoundKind::PostMeasurementUnitZ,
        BoundKind::SgUncertainty,
        BoundKind::SgTight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Robertson => "robertson",
            BoundKind::Uncertainty => "uncertainty",
            BoundKind::TriangleRaw => "triangle_raw",
            BoundKind::Triangle => "triangle",
            BoundKind::Tight => "tight",
            BoundKind::MinPhase => "min_phase",
            BoundKind::PostMeasurement => "post_measurement",
            BoundKind::PostMeasurementUnitZ => "post_measurement_unit_z",
            BoundKind::SgUncertainty => "sg_uncertainty",
            BoundKind::SgTight => "sg_tight",
        }
    }

    /// `lhs <= rhs` bounds; all others read `lhs >= rhs`.
    pub fn is_upper_bound(self) -> bool {
        matches!(self, BoundKind::Triangle)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Satisfied,
    Violated,
    Undefined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Undefined => "undefined",
        }
    }
}

/// `|c_i|^2`, `|c_j|^2`, `|Z|` and the phase entering a bound.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BoundInputs {
    pub ci2: f64,
    pub cj2: f64,
    pub abs_z: f64,
    pub phi: f64,
}

impl BoundInputs {
    pub fn new(ci2: f64, cj2: f64, abs_z: f64, phi: f64) -> Self {
        BoundInputs { ci2, cj2, abs_z, phi }
    }

    /// `S = |c_i|^2 + |c_j|^2`.
    pub fn sum(&self) -> f64 {
        self.ci2 + self.cj2
    }

    /// `P = |c_i|^2 |c_j|^2`.
    pub fn product(&self) -> f64 {
        self.ci2 * self.cj2
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn evaluate(kind: BoundKind, lhs: f64, rhs: f64, denominators: &[f64], inputs: BoundInputs) -> Self {
        let degenerate = denominators.iter().any(|d| d.is_nan() || d.abs() < DEGENERATE_THRESHOLD);
        if degenerate || !lhs.is_finite() || !rhs.is_finite() {
            return BoundReport { kind, lhs, rhs, slack: f64::NAN, verdict: Verdict::Undefined, inputs };
        }
        let slack = if kind.is_upper_bound() { rhs - lhs } else { lhs - rhs };
        let verdict = if slack >= -VERDICT_TOLERANCE { Verdict::Satisfied } else { Verdict::Violated };
        BoundReport { kind, lhs, rhs, slack, verdict, inputs }
    }
}

fn sin_sqr(x: f64) -> f64 {
    let s = libm::sin(x);
    s * s
}

fn excess_over_unit(x: f64) -> f64 {
    let d = x - 1.0;
    if d.abs() <= UNIT_SNAP { 0.0 } else { d }
}

fn uncertainty_rhs(s: f64, p: f64, z2: f64) -> (f64, f64) {
    let denominator = p * z2 * z2;
    (excess_over_unit(s * z2) / denominator, denominator)
}

fn tight_rhs(s: f64, p: f64, z2: f64) -> (f64, [f64; 2]) {
    let x = z2 * s;
    let (num_den, prefactor_den) = (x + 1.0, p * z2);
    (0.5 * (excess_over_unit(x) / num_den) * s / prefactor_den, [num_den, prefactor_den])
}

fn post_measurement_rhs(s: f64, p: f64, z2: f64) -> (f64, [f64; 2]) {
    let (num_den, prefactor_den) = (s + 1.0, p * z2);
    (0.5 * (excess_over_unit(s) / num_den) * s / prefactor_den, [num_den, prefactor_den])
}

/// The raw uncertainty relation for given variances and `Im <[A1, A2]>`.
pub fn robertson(var1: f64, var2: f64, commutator: f64, inputs: BoundInputs) -> BoundReport {
    BoundReport::evaluate(BoundKind::Robertson, var1 * var2, 0.25 * commutator * commutator, &[], inputs)
}

pub fn bound_uncertainty(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, den) = uncertainty_rhs(inputs.sum(), inputs.product(), z2);
    BoundReport::evaluate(BoundKind::Uncertainty, sin_sqr(2.0 * inputs.phi), rhs, &[den], inputs)
}

pub fn bound_sg_uncertainty(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, den) = uncertainty_rhs(1.0, inputs.product(), z2);
    BoundReport::evaluate(BoundKind::SgUncertainty, sin_sqr(2.0 * inputs.phi), rhs, &[den], inputs)
}

pub fn bound_triangle(inputs: BoundInputs) -> BoundReport {
    let den = inputs.abs_z * inputs.abs_z * inputs.sum();
    BoundReport::evaluate(BoundKind::Triangle, libm::cos(2.0 * inputs.phi), 1.0 / den, &[den], inputs)
}

/// The triangle inequality evaluated on distances of live vectors.
pub fn triangle_raw(d: &FSDistances, inputs: BoundInputs) -> BoundReport {
    BoundReport::evaluate(BoundKind::TriangleRaw, d.d12 + d.d23, d.d13, &[], inputs)
}

pub fn bound_tight(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, dens) = tight_rhs(inputs.sum(), inputs.product(), z2);
    BoundReport::evaluate(BoundKind::Tight, sin_sqr(inputs.phi), rhs, &dens, inputs)
}

pub fn bound_sg_tight(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, dens) = tight_rhs(1.0, inputs.product(), z2);
    BoundReport::evaluate(BoundKind::SgTight, sin_sqr(inputs.phi), rhs, &dens, inputs)
}

/// Smallest relative phase compatible with the tight bound in the small-angle limit,
/// `sqrt(max(rhs, 0))`.
pub fn min_phase(ci2: f64, cj2: f64, abs_z: f64) -> Result<f64> {
    let (rhs, dens) = tight_rhs(ci2 + cj2, ci2 * cj2, abs_z * abs_z);
    if dens.iter().any(|d| d.is_nan() || d.abs() < DEGENERATE_THRESHOLD) || !rhs.is_finite() {
        return Err(Error::Degenerate("minimum phase needs nonzero weights and overlap".into()));
    }
    Ok(libm::sqrt(rhs.max(0.0)))
}

pub fn bound_min_phase(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, dens) = tight_rhs(inputs.sum(), inputs.product(), z2);
    BoundReport::evaluate(BoundKind::MinPhase, inputs.phi * inputs.phi, rhs, &dens, inputs)
}

/// `inputs.phi` is the coupling-time phase `arg(conj(c_i) c_j)`; `inputs.abs_z` is
/// the later overlap as it appears in the printed bound.
pub fn bound_post_measurement(inputs: BoundInputs) -> BoundReport {
    let z2 = inputs.abs_z * inputs.abs_z;
    let (rhs, dens) = post_measurement_rhs(inputs.sum(), inputs.product(), z2);
    BoundReport::evaluate(BoundKind::PostMeasurement, sin_sqr(inputs.phi), rhs, &dens, inputs)
}

pub fn bound_post_measurement_unit_z(inputs: BoundInputs) -> BoundReport {
    let (rhs, dens) = post_measurement_rhs(inputs.sum(), inputs.product(), 1.0);
    let inputs = BoundInputs { abs_z: 1.0, ..inputs };
    BoundReport::evaluate(BoundKind::PostMeasurementUnitZ, sin_sqr(inputs.phi), rhs, &dens, inputs)
}

/// `var1 var2 - <[A1,A2]>^2 / 4` expressed through `S`, `P`, `|Z|`, `Phi`:
/// `(P/4) (1 - S|Z|^2 + P|Z|^4 sin^2 2Phi)`.
pub fn uncertainty_gap_closed_form(inputs: BoundInputs) -> f64 {
    let (s, p) = (inputs.sum(), inputs.product());
    let z2 = inputs.abs_z * inputs.abs_z;
    0.25 * p * (1.0 - s * z2 + p * z2 * z2 * sin_sqr(2.0 * inputs.phi))
}

/// Fubini-Study distances between `Psi`, `A1 Psi` and `A2 Psi`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FSDistances {
    pub d12: f64,
    pub d23: f64,
    pub d13: f64,
}

impl FSDistances {
    pub fn undefined() -> Self {
        FSDistances { d12: f64::NAN, d23: f64::NAN, d13: f64::NAN }
    }

    pub fn max_abs_diff(&self, other: &FSDistances) -> f64 {
        (self.d12 - other.d12)
            .abs()
            .max((self.d23 - other.d23).abs())
            .max((self.d13 - other.d13).abs())
    }
}

/// `D(a, b) = 1 - |<a|b>|^2 / (|a|^2 |b|^2)` on plain coordinate vectors.
pub fn fubini_study_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config("vectors of different length".into()));
    }
    let na: f64 = a.iter().map(Complex64::norm_sqr).sum();
    let nb: f64 = b.iter().map(Complex64::norm_sqr).sum();
    ray_distance(crate::pointer::raw_inner(a, b), na, nb)
}

/// [`fubini_study_distance`] for joint state vectors.
pub fn fubini_study_distance_states(a: &StateVector, b: &StateVector) -> Result<f64> {
    ray_distance(a.inner(b)?, a.norm_sqr(), b.norm_sqr())
}

fn ray_distance(overlap: Complex64, na: f64, nb: f64) -> Result<f64> {
    if !(na > DEGENERATE_THRESHOLD && nb > DEGENERATE_THRESHOLD) {
        return Err(Error::Degenerate("Fubini-Study distance of a zero vector".into()));
    }
    Ok((1.0 - overlap.norm_sqr() / (na * nb)).clamp(0.0, 1.0))
}

/// Distances computed directly on the vectors `Psi(t)`, `A1 Psi(t)`, `A2 Psi(t)`.
pub fn distances_triple(state: &CompositeState, pair: &PhasePair) -> Result<FSDistances> {
    let psi = state.to_vector();
    let v2 = pair.apply_a1(&psi)?;
    let v3 = pair.apply_a2(&psi)?;
    Ok(FSDistances {
        d12: fubini_study_distance_states(&psi, &v2)?,
        d23: fubini_study_distance_states(&v2, &v3)?,
        d13: fubini_study_distance_states(&psi, &v3)?,
    })
}

/// Closed forms of the three distances for a normalised state.
pub fn distances_closed_form(inputs: BoundInputs) -> FSDistances {
    let (s, p) = (inputs.sum(), inputs.product());
    let z2 = inputs.abs_z * inputs.abs_z;
    let c = libm::cos(inputs.phi);
    let sn = libm::sin(inputs.phi);
    let diff = inputs.ci2 - inputs.cj2;
    FSDistances {
        d12: 1.0 - 4.0 * p * z2 * c * c / s,
        d23: 1.0 - diff * diff / (s * s),
        d13: 1.0 - 4.0 * p * z2 * sn * sn / s,
    }
}

/// All bounds for one branch pair of a live state.
///
/// `initial_phase` is `arg(conj(c_i) c_j)` used by the post-measurement bound; the
/// relative phase is `NaN` (and phase-dependent bounds undefined) when it does not
/// exist.
pub fn evaluate_all(state: &CompositeState, pair: &PhasePair) -> Result<PairEvaluation> {
    let bi = state.branch(pair.i)?;
    let bj = state.branch(pair.j)?;
    let (ci, cj) = (bi.spec.coefficient, bj.spec.coefficient);
    let inputs_base = (ci.norm_sqr(), cj.norm_sqr());
    let z = OverlapZ::new(state.overlap(pair)?);
    let phi = relative_phase(ci, cj, &z).unwrap_or(f64::NAN);
    let initial_phase = if ci.norm() < DEGENERATE_THRESHOLD || cj.norm() < DEGENERATE_THRESHOLD {
        f64::NAN
    } else {
        wrap_phase((ci.conj() * cj).arg())
    };
    let (a1, a2) = state.expect_phase_ops(pair)?;
    let (var1, var2) = state.variance_phase_ops(pair)?;
    let moments = state.direct_moments(pair)?;
    let (rv1, rv2, rcomm) = moments.ray_normalized();
    let distances = distances_triple(state, pair).unwrap_or_else(|_| FSDistances::undefined());

    let inputs = BoundInputs::new(inputs_base.0, inputs_base.1, z.magnitude(), phi);
    let post_inputs = BoundInputs { phi: initial_phase, ..inputs };
    let mut bounds = Vec::with_capacity(BoundKind::ALL.len());
    bounds.push(robertson(rv1, rv2, rcomm, inputs));
    bounds.push(bound_uncertainty(inputs));
    bounds.push(if distances.d12.is_nan() {
        BoundReport::evaluate(BoundKind::TriangleRaw, f64::NAN, f64::NAN, &[0.0], inputs)
    } else {
        triangle_raw(&distances, inputs)
    });
    bounds.push(guard_phase(bound_triangle(inputs)));
    bounds.push(bound_tight(inputs));
    bounds.push(bound_min_phase(inputs));
    bounds.push(bound_post_measurement(post_inputs));
    bounds.push(bound_post_measurement_unit_z(post_inputs));
    bounds.push(bound_sg_uncertainty(inputs));
    bounds.push(bound_sg_tight(inputs));

    Ok(PairEvaluation {
        z,
        phi,
        initial_phase,
        a1,
        a2,
        var1,
        var2,
        commutator: moments.commutator,
        distances,
        bounds,
    })
}

// An undefined phase with finite denominators would otherwise read as NaN slack.
fn guard_phase(report: BoundReport) -> BoundReport {
    if report.inputs.phi.is_nan() {
        BoundReport { verdict: Verdict::Undefined, slack: f64::NAN, ..report }
    } else {
        report
    }
}

/// Observables and bound reports for one pair at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEvaluation {
    pub z: OverlapZ,
    pub phi: f64,
    pub initial_phase: f64,
    pub a1: f64,
    pub a2: f64,
    pub var1: f64,
    pub var2: f64,
    pub commutator: f64,
    pub distances: FSDistances,
    pub bounds: Vec<BoundReport>,
}

impl PairEvaluation {
    pub fn bound(&self, kind: BoundKind) -> &BoundReport {
        self.bounds
            .iter()
            .find(|b| b.kind == kind)
            .expect("every bound kind is evaluated")
    }
}
