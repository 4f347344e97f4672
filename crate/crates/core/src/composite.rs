//! System (x) apparatus states in branch form.
//!
//! System labels are exactly orthogonal, so a joint state is a list of
//! `(label, c_n, chi_n)` and every operator built from `|phi_i><phi_j|` and functions
//! of the pointer momentum reduces to pointer inner products.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::pointer::{Grid, PointerWave};
use crate::{Error, Result};

/// Tolerance on `sum |c_n|^2 = 1` for normalised states.
pub const WEIGHT_TOLERANCE: f64 = 1e-8;
/// Tolerance on the norm of each branch pointer wave.
pub const WAVE_NORM_TOLERANCE: f64 = 1e-10;

/// One outcome of the measured observable.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BranchSpec {
    pub label: u32,
    pub coefficient: Complex64,
    pub eigenvalue: f64,
}

impl BranchSpec {
    pub fn new(label: u32, coefficient: Complex64, eigenvalue: f64) -> Self {
        BranchSpec { label, coefficient, eigenvalue }
    }

    pub fn weight(&self) -> f64 {
        self.coefficient.norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Normalization {
    Normalized,
    /// `sum |c_n|^2 != 1`; only produced deliberately for stress tests.
    Unnormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub spec: BranchSpec,
    /// Pointer displacement applied at coupling, `L_n = L O_n`.
    pub shift: f64,
    /// Eigenvalue of a system Hamiltonian diagonal in the branch basis.
    pub energy: f64,
    pub wave: PointerWave,
}

impl Branch {
    pub fn new(spec: BranchSpec, shift: f64, wave: PointerWave) -> Self {
        Branch { spec, shift, energy: 0.0, wave }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    grid: Grid,
    branches: Vec<Branch>,
    normalization: Normalization,
}

/// Premeasurement: `chi_n = exp(-i L O_n p) psi` for every branch.
pub fn couple(branches: &[BranchSpec], coupling_length: f64, initial: &PointerWave) -> Result<CompositeState> {
    couple_with(branches, coupling_length, initial, Normalization::Normalized)
}

/// As [`couple`] but accepts `sum |c_n|^2 != 1`.
pub fn couple_unnormalized(
    branches: &[BranchSpec],
    coupling_length: f64,
    initial: &PointerWave,
) -> Result<CompositeState> {
    couple_with(branches, coupling_length, initial, Normalization::Unnormalized)
}

fn couple_with(
    branches: &[BranchSpec],
    coupling_length: f64,
    initial: &PointerWave,
    normalization: Normalization,
) -> Result<CompositeState> {
    if (initial.norm_sqr() - 1.0).abs() > WAVE_NORM_TOLERANCE {
        return Err(Error::Precondition("initial pointer wave is not normalised".into()));
    }
    let built = branches
        .iter()
        .map(|spec| {
            let shift = coupling_length * spec.eigenvalue;
            let wave = initial.translate(shift).map_err(|e| match e {
                Error::Geometry(msg) => Error::Geometry(format!("branch {}: {msg}", spec.label)),
                other => other,
            })?;
            Ok(Branch::new(*spec, shift, wave))
        })
        .collect::<Result<Vec<_>>>()?;
    CompositeState::from_branches(built, normalization)
}

impl CompositeState {
    pub fn from_branches(branches: Vec<Branch>, normalization: Normalization) -> Result<Self> {
        let first = branches
            .first()
            .ok_or_else(|| Error::Config("a composite state needs at least one branch".into()))?;
        let grid = first.wave.grid().clone();
        for (k, b) in branches.iter().enumerate() {
            if b.wave.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            if branches[..k].iter().any(|o| o.spec.label == b.spec.label) {
                return Err(Error::Config(format!("duplicate branch label {}", b.spec.label)));
            }
            let norm = b.wave.norm_sqr();
            if (norm - 1.0).abs() > WAVE_NORM_TOLERANCE {
                return Err(Error::Precondition(format!(
                    "pointer wave of branch {} has norm^2 {norm}",
                    b.spec.label
                )));
            }
        }
        let state = CompositeState { grid, branches, normalization };
        if normalization == Normalization::Normalized {
            let total = state.total_weight();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::Config(format!(
                    "branch weights sum to {total}, expected 1 (use the unnormalised mode deliberately)"
                )));
            }
        }
        Ok(state)
    }

    /// Sets the system energy of one branch (diagonal system Hamiltonian).
    pub fn with_system_energy(mut self, label: u32, energy: f64) -> Result<Self> {
        let idx = self.index_of(label)?;
        self.branches[idx].energy = energy;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub(crate) fn branches_mut(&mut self) -> &mut [Branch] {
        &mut self.branches
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn branch(&self, label: u32) -> Result<&Branch> {
        Ok(&self.branches[self.index_of(label)?])
    }

    fn index_of(&self, label: u32) -> Result<usize> {
        self.branches
            .iter()
            .position(|b| b.spec.label == label)
            .ok_or(Error::UnknownLabel(label))
    }

    /// `sum_n |c_n|^2`.
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.spec.weight()).sum()
    }

    /// `<Psi|Psi>` computed from the amplitudes.
    pub fn norm_sqr(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.spec.weight() * b.wave.norm_sqr())
            .sum()
    }

    pub fn pair(&self, i: u32, j: u32) -> Result<PhasePair> {
        let bi = self.branch(i)?;
        let bj = self.branch(j)?;
        PhasePair::new(i, j, bi.shift, bj.shift)
    }

    /// Joint amplitudes `c_n chi_n` per label.
    pub fn to_vector(&self) -> StateVector {
        StateVector {
            grid: self.grid.clone(),
            components: self
                .branches
                .iter()
                .map(|b| {
                    let amps = b.wave.amplitudes().iter().map(|a| a * b.spec.coefficient).collect();
                    (b.spec.label, amps)
                })
                .collect(),
        }
    }

    /// `zeta_ij = <chi_i| exp(-i (L_i - L_j) p) |chi_j>`; equals `Z_ij(t)` for a coupled
    /// and evolved state.
    pub fn overlap(&self, pair: &PhasePair) -> Result<Complex64> {
        let bi = self.branch(pair.i)?;
        let bj = self.branch(pair.j)?;
        bi.wave.shifted_inner(&bj.wave, pair.shift_i - pair.shift_j)
    }

    /// `(<A1>, <A2>) = (Re, Im)` of `conj(c_i) c_j zeta_ij`.
    pub fn expect_phase_ops(&self, pair: &PhasePair) -> Result<(f64, f64)> {
        let w = self.coherence(pair)?;
        Ok((w.re, w.im))
    }

    /// `conj(c_i) c_j zeta_ij = <A1> + i <A2>`.
    pub fn coherence(&self, pair: &PhasePair) -> Result<Complex64> {
        let ci = self.branch(pair.i)?.spec.coefficient;
        let cj = self.branch(pair.j)?.spec.coefficient;
        Ok(ci.conj() * cj * self.overlap(pair)?)
    }

    /// Variances from `A1^2 = A2^2 = (P_i + P_j) / 4`.
    pub fn variance_phase_ops(&self, pair: &PhasePair) -> Result<(f64, f64)> {
        let projected = self.projector_weight(pair.i)? + self.projector_weight(pair.j)?;
        let (a1, a2) = self.expect_phase_ops(pair)?;
        Ok((0.25 * projected - a1 * a1, 0.25 * projected - a2 * a2))
    }

    /// `<P_n>`.
    pub fn projector_weight(&self, label: u32) -> Result<f64> {
        let b = self.branch(label)?;
        Ok(b.spec.weight() * b.wave.norm_sqr())
    }

    /// `Im <[A1, A2]>`, evaluated on the joint vector as `2 Im <A1 Psi | A2 Psi>`.
    ///
    /// Operator algebra gives `[A1, A2] = (i/2)(P_i - P_j)`, so this equals
    /// `(|c_i|^2 - |c_j|^2) / 2` for normalised pointer waves.
    pub fn commutator_expect(&self, pair: &PhasePair) -> Result<f64> {
        Ok(self.direct_moments(pair)?.commutator)
    }

    /// `sum_n |c_n|^2 O_n` evaluated on the joint vector.
    pub fn expect_observable(&self) -> f64 {
        let v = self.to_vector();
        let dq = self.grid.dq();
        self.branches
            .iter()
            .zip(&v.components)
            .map(|(b, (_, amps))| b.spec.eigenvalue * amps.iter().map(Complex64::norm_sqr).sum::<f64>() * dq)
            .sum()
    }

    /// Phase-operator moments computed by applying the operators to the joint vector.
    pub fn direct_moments(&self, pair: &PhasePair) -> Result<DirectMoments> {
        let psi = self.to_vector();
        let a1_psi = pair.apply_a1(&psi)?;
        let a2_psi = pair.apply_a2(&psi)?;
        let cross = a1_psi.inner(&a2_psi)?;
        Ok(DirectMoments {
            norm_sqr: psi.norm_sqr(),
            a1: psi.inner(&a1_psi)?.re,
            a2: psi.inner(&a2_psi)?.re,
            a1_sqr: a1_psi.norm_sqr(),
            a2_sqr: a2_psi.norm_sqr(),
            commutator: 2.0 * cross.im,
        })
    }
}

/// Unnormalised expectations `<Psi|.|Psi>` of the phase operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectMoments {
    pub norm_sqr: f64,
    pub a1: f64,
    pub a2: f64,
    pub a1_sqr: f64,
    pub a2_sqr: f64,
    /// `Im <Psi|[A1, A2]|Psi>`.
    pub commutator: f64,
}

impl DirectMoments {
    /// Variances and commutator of the ray `Psi / |Psi|`.
    pub fn ray_normalized(&self) -> (f64, f64, f64) {
        let n = self.norm_sqr;
        let var1 = self.a1_sqr / n - (self.a1 / n) * (self.a1 / n);
        let var2 = self.a2_sqr / n - (self.a2 / n) * (self.a2 / n);
        (var1, var2, self.commutator / n)
    }
}

/// Branch pair `(i, j)` with their coupling shifts.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PhasePair {
    pub i: u32,
    pub j: u32,
    pub shift_i: f64,
    pub shift_j: f64,
}

impl PhasePair {
    pub fn new(i: u32, j: u32, shift_i: f64, shift_j: f64) -> Result<Self> {
        if i == j {
            return Err(Error::Config(format!("phase pair needs distinct labels, got ({i}, {j})")));
        }
        Ok(PhasePair { i, j, shift_i, shift_j })
    }

    /// `X = exp(-i L_i p) |phi_i><phi_j| exp(i L_j p)`; also the operator `A1 + i A2`.
    pub fn apply_x(&self, v: &StateVector) -> Result<StateVector> {
        let mut out = v.zeros_like();
        let moved = v.grid.translate_amplitudes(v.component(self.j)?, self.shift_i - self.shift_j);
        *out.component_mut(self.i)? = moved;
        Ok(out)
    }

    pub fn apply_x_adjoint(&self, v: &StateVector) -> Result<StateVector> {
        let mut out = v.zeros_like();
        let moved = v.grid.translate_amplitudes(v.component(self.i)?, self.shift_j - self.shift_i);
        *out.component_mut(self.j)? = moved;
        Ok(out)
    }

    /// `A1 = (X + X^dagger) / 2`.
    pub fn apply_a1(&self, v: &StateVector) -> Result<StateVector> {
        let x = self.apply_x(v)?;
        let xd = self.apply_x_adjoint(v)?;
        Ok(x.combine(&xd, Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)))
    }

    /// `A2 = (i/2)(X^dagger - X)`.
    pub fn apply_a2(&self, v: &StateVector) -> Result<StateVector> {
        let x = self.apply_x(v)?;
        let xd = self.apply_x_adjoint(v)?;
        Ok(x.combine(&xd, Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)))
    }

    /// `(P_i + P_j) v`.
    pub fn apply_projectors(&self, v: &StateVector) -> Result<StateVector> {
        let mut out = v.zeros_like();
        for label in [self.i, self.j] {
            *out.component_mut(label)? = v.component(label)?.to_vec();
        }
        Ok(out)
    }
}

impl Grid {
    pub(crate) fn translate_amplitudes(&self, amps: &[Complex64], distance: f64) -> Vec<Complex64> {
        let mut out = amps.to_vec();
        if distance != 0.0 {
            self.apply_momentum_factor(&mut out, |p| Complex64::from_polar(1.0, -p * distance));
        }
        out
    }
}

/// A general vector in `span{|phi_n>} (x) pointer space`, one pointer component per label.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    grid: Grid,
    components: Vec<(u32, Vec<Complex64>)>,
}

impl StateVector {
    pub fn new(grid: Grid, components: Vec<(u32, Vec<Complex64>)>) -> Result<Self> {
        for (k, (label, amps)) in components.iter().enumerate() {
            if amps.len() != grid.n_points() {
                return Err(Error::Config(format!("component {label} has the wrong length")));
            }
            if components[..k].iter().any(|(l, _)| l == label) {
                return Err(Error::Config(format!("duplicate component label {label}")));
            }
        }
        Ok(StateVector { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[(u32, Vec<Complex64>)] {
        &self.components
    }

    pub fn component(&self, label: u32) -> Result<&[Complex64]> {
        self.components
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, a)| a.as_slice())
            .ok_or(Error::UnknownLabel(label))
    }

    fn component_mut(&mut self, label: u32) -> Result<&mut Vec<Complex64>> {
        self.components
            .iter_mut()
            .find(|(l, _)| *l == label)
            .map(|(_, a)| a)
            .ok_or(Error::UnknownLabel(label))
    }

    pub fn zeros_like(&self) -> StateVector {
        StateVector {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .map(|(l, a)| (*l, alloc::vec![Complex64::new(0.0, 0.0); a.len()]))
                .collect(),
        }
    }

    /// `a self + b other` (same label layout).
    pub fn combine(&self, other: &StateVector, a: Complex64, b: Complex64) -> StateVector {
        StateVector {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|((l, x), (_, y))| (*l, x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()))
                .collect(),
        }
    }

    /// Scales the component with `label` by `factor`.
    pub fn scale_component(&mut self, label: u32, factor: f64) -> Result<()> {
        for a in self.component_mut(label)?.iter_mut() {
            *a *= factor;
        }
        Ok(())
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (label, a) in &self.components {
            let b = other.component(*label)?;
            sum += crate::pointer::raw_inner(a, b);
        }
        Ok(sum * self.grid.dq())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|(_, a)| a.iter())
            .map(Complex64::norm_sqr)
            .sum::<f64>()
            * self.grid.dq()
    }

    /// Largest amplitude difference, `max |a - b|`.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (label, a) in &self.components {
            let b = other.component(*label)?;
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        Ok(worst)
    }

    /// Dense column `[component_1; component_2; ...]` in label order of the layout.
    pub fn flatten(&self) -> Vec<Complex64> {
        self.components.iter().flat_map(|(_, a)| a.iter().copied()).collect()
    }
}
