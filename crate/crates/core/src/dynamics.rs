//! Apparatus Hamiltonians and the split-step Fourier propagator.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::composite::CompositeState;
use crate::pointer::{Grid, PointerWave};
use crate::{Error, Result};

/// Fraction of the grid (each side) in which a propagated packet may not carry
/// more than [`EDGE_MASS_LIMIT`] probability.
pub const EDGE_BAND: f64 = 0.02;
pub const EDGE_MASS_LIMIT: f64 = 1e-6;
/// Largest relative `<H>` drift accepted by the step gate, measured against
/// [`ApparatusHamiltonian::energy_scale`].
pub const ENERGY_DRIFT_LIMIT: f64 = 5e-7;
/// Allowed norm drift of a propagated wave before the run is declared unstable.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
const MAX_STEPS: u64 = 50_000_000;

/// Pointer potential `V_a(q)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Potential {
    Free,
    /// `k q`
    Linear { k: f64 },
    /// `M omega^2 q^2 / 2`
    Harmonic { omega: f64 },
    /// `lambda q^4`
    Quartic { lambda: f64 },
    /// `sum_n a_n q^n`
    Polynomial { coefficients: Vec<f64> },
}

/// `H = p^2 / 2M + V(q + shift)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ApparatusHamiltonian {
    mass: f64,
    potential: Potential,
    shift: f64,
}

impl ApparatusHamiltonian {
    pub fn new(mass: f64, potential: Potential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("mass must be positive, got {mass}")));
        }
        let finite = match &potential {
            Potential::Free => true,
            Potential::Linear { k } => k.is_finite(),
            Potential::Harmonic { omega } => omega.is_finite(),
            Potential::Quartic { lambda } => lambda.is_finite(),
            Potential::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
        };
        if !finite {
            return Err(Error::Config("potential parameters must be finite".into()));
        }
        Ok(ApparatusHamiltonian { mass, potential, shift: 0.0 })
    }

    pub fn free(mass: f64) -> Result<Self> {
        Self::new(mass, Potential::Free)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `H(q + L)`: the same Hamiltonian with its coordinate displaced by `L`.
    pub fn shifted(&self, distance: f64) -> Self {
        ApparatusHamiltonian { shift: self.shift + distance, ..self.clone() }
    }

    pub fn potential_at(&self, q: f64) -> f64 {
        let x = q + self.shift;
        match &self.potential {
            Potential::Free => 0.0,
            Potential::Linear { k } => k * x,
            Potential::Harmonic { omega } => 0.5 * self.mass * omega * omega * x * x,
            Potential::Quartic { lambda } => lambda * x * x * x * x,
            Potential::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }

    pub fn kinetic_at(&self, p: f64) -> f64 {
        p * p / (2.0 * self.mass)
    }

    /// True when `V` is constant, so `H` commutes with every translation.
    pub fn is_position_independent(&self) -> bool {
        match &self.potential {
            Potential::Free => true,
            Potential::Linear { k } => *k == 0.0,
            Potential::Harmonic { omega } => *omega == 0.0,
            Potential::Quartic { lambda } => *lambda == 0.0,
            Potential::Polynomial { coefficients } => coefficients.iter().skip(1).all(|c| *c == 0.0),
        }
    }

    /// `<H>` of a normalised wave.
    pub fn energy(&self, wave: &PointerWave) -> f64 {
        let grid = wave.grid();
        let kinetic: f64 = wave
            .momentum_amplitudes()
            .iter()
            .enumerate()
            .map(|(k, a)| self.kinetic_at(grid.momentum(k)) * a.norm_sqr())
            .sum::<f64>()
            * grid.dp();
        let potential: f64 = grid
            .positions()
            .zip(wave.amplitudes())
            .map(|(q, a)| self.potential_at(q) * a.norm_sqr())
            .sum::<f64>()
            * grid.dq();
        (kinetic + potential) / wave.norm_sqr()
    }

    /// `<T> + <|V|>`, the scale against which energy drift is measured.
    pub fn energy_scale(&self, wave: &PointerWave) -> f64 {
        let grid = wave.grid();
        let abs_v: f64 = grid
            .positions()
            .zip(wave.amplitudes())
            .map(|(q, a)| self.potential_at(q).abs() * a.norm_sqr())
            .sum::<f64>()
            * grid.dq();
        (wave.mean_momentum_sqr() / (2.0 * self.mass) + abs_v / wave.norm_sqr()).max(f64::MIN_POSITIVE)
    }

    fn check_on_grid(&self, grid: &Grid) -> Result<()> {
        if grid.positions().all(|q| self.potential_at(q).is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("potential overflows on the grid".into()))
        }
    }
}

/// Step-size control for [`propagate`].
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PropagatorConfig {
    /// Fixed step; `None` selects one automatically.
    pub dt: Option<f64>,
    /// Largest `|psi_dt - psi_{dt/2}|^2` accepted by the convergence gate.
    pub gate_tolerance: f64,
    pub max_halvings: u32,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { dt: None, gate_tolerance: 1e-8, max_halvings: 16 }
    }
}

impl PropagatorConfig {
    pub fn with_dt(dt: f64) -> Self {
        PropagatorConfig { dt: Some(dt), ..Self::default() }
    }
}

/// Second-order symmetric split-step propagator for a fixed grid, Hamiltonian and
/// nominal step.
#[derive(Clone, Debug)]
pub struct Evolver {
    grid: Grid,
    hamiltonian: ApparatusHamiltonian,
    dt: f64,
    potential: Vec<f64>,
    kinetic: Vec<f64>,
}

impl Evolver {
    pub fn new(grid: &Grid, hamiltonian: &ApparatusHamiltonian, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        hamiltonian.check_on_grid(grid)?;
        Ok(Evolver {
            grid: grid.clone(),
            hamiltonian: hamiltonian.clone(),
            dt,
            potential: grid.positions().map(|q| hamiltonian.potential_at(q)).collect(),
            kinetic: grid.momenta().map(|p| hamiltonian.kinetic_at(p)).collect(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hamiltonian(&self) -> &ApparatusHamiltonian {
        &self.hamiltonian
    }

    /// Number of steps used for an interval of length `|t|`.
    pub fn steps_for(&self, t: f64) -> u64 {
        let ratio = t.abs() / self.dt;
        // guard against 1.0000000001-style ceilings from accumulated decimal times
        let steps = libm::ceil(ratio - 1e-9);
        if steps < 1.0 && t != 0.0 { 1 } else { steps as u64 }
    }

    /// Applies `exp(-i t H)` in place. Negative `t` is allowed and inverts a forward
    /// call with the same `|t|` to rounding error.
    pub fn advance(&self, amplitudes: &mut [Complex64], t: f64) -> Result<()> {
        if t == 0.0 {
            return Ok(());
        }
        let steps = self.steps_for(t);
        if steps > MAX_STEPS {
            return Err(Error::Config(format!("{steps} split steps requested; increase dt")));
        }
        let h = t / steps as f64;
        let half_v: Vec<Complex64> =
            self.potential.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * h)).collect();
        let full_v: Vec<Complex64> = half_v.iter().map(|z| z * z).collect();
        let kin: Vec<Complex64> =
            self.kinetic.iter().map(|k| Complex64::from_polar(1.0, -k * h)).collect();
        let plan = self.grid.fft();

        mul_in_place(amplitudes, &half_v);
        for step in 0..steps {
            plan.forward(amplitudes);
            mul_in_place(amplitudes, &kin);
            plan.inverse(amplitudes);
            if step + 1 < steps {
                mul_in_place(amplitudes, &full_v);
            }
        }
        mul_in_place(amplitudes, &half_v);
        Ok(())
    }

    pub fn advance_wave(&self, wave: &PointerWave, t: f64) -> Result<PointerWave> {
        if wave.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = wave.clone();
        self.advance(out.amplitudes_mut(), t)?;
        Ok(out)
    }

    /// Evolves every branch by `exp(-i t (E_n + H))`, leaving `c_n` untouched.
    pub fn advance_state(&self, state: &CompositeState, t: f64) -> Result<CompositeState> {
        let mut out = state.clone();
        for branch in out.branches_mut() {
            self.advance(branch.wave.amplitudes_mut(), t)?;
            if branch.energy != 0.0 {
                let phase = Complex64::from_polar(1.0, -branch.energy * t);
                for a in branch.wave.amplitudes_mut() {
                    *a *= phase;
                }
            }
        }
        Ok(out)
    }
}

fn mul_in_place(a: &mut [Complex64], b: &[Complex64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x *= y;
    }
}

/// First guess for the step: `0.01 min(1, 2 pi / omega)` where `omega` is the largest
/// energy scale `<T> + <|V|>` among the waves.
pub fn initial_time_step(waves: &[&PointerWave], hamiltonian: &ApparatusHamiltonian) -> f64 {
    let omega = waves.iter().map(|w| hamiltonian.energy_scale(w)).fold(0.0, f64::max);
    let period = if omega > 0.0 { 2.0 * PI / omega } else { 1.0 };
    0.01 * period.min(1.0)
}

/// Chooses a step for evolving `waves` over `horizon` by halving until halving once
/// more changes every final wave by less than `cfg.gate_tolerance` (squared norm)
/// and the coarse run keeps `<H>` within [`ENERGY_DRIFT_LIMIT`].
///
/// A fixed `cfg.dt` is checked against the same gate and rejected if it fails.
pub fn select_time_step(
    waves: &[&PointerWave],
    hamiltonian: &ApparatusHamiltonian,
    horizon: f64,
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let Some(first) = waves.first() else {
        return Err(Error::Precondition("no waves to propagate".into()));
    };
    let grid = first.grid();
    let mut dt = match cfg.dt {
        Some(dt) => dt,
        None => initial_time_step(waves, hamiltonian),
    };
    if horizon == 0.0 || hamiltonian.is_position_independent() {
        // kinetic-only evolution is exact in the momentum representation
        return if cfg.dt.is_some() || horizon == 0.0 { Ok(dt) } else { Ok(horizon.abs()) };
    }
    for _ in 0..=cfg.max_halvings {
        let coarse = Evolver::new(grid, hamiltonian, dt)?;
        let fine = Evolver::new(grid, hamiltonian, dt / 2.0)?;
        let mut change: f64 = 0.0;
        let mut drift: f64 = 0.0;
        for w in waves {
            let a = coarse.advance_wave(w, horizon)?;
            drift = drift.max((hamiltonian.energy(&a) - hamiltonian.energy(w)).abs() / hamiltonian.energy_scale(w));
            let b = fine.advance_wave(w, horizon)?;
            let d: f64 = a
                .amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                * grid.dq();
            change = change.max(d);
        }
        if change < cfg.gate_tolerance && drift <= ENERGY_DRIFT_LIMIT {
            return Ok(dt);
        }
        if cfg.dt.is_some() {
            return Err(Error::Instability(format!(
                "dt = {dt} fails the convergence gate (halving changes the state by {change:.3e}, energy drift {drift:.3e})"
            )));
        }
        dt /= 2.0;
    }
    Err(Error::Instability(format!(
        "no step passed the convergence gate after {} halvings",
        cfg.max_halvings
    )))
}

/// `|Psi(t)> = exp(-i t H) |Psi>` applied branch by branch.
pub fn propagate(
    state: &CompositeState,
    hamiltonian: &ApparatusHamiltonian,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<CompositeState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("propagation time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let waves: Vec<&PointerWave> = state.branches().iter().map(|b| &b.wave).collect();
    let dt = select_time_step(&waves, hamiltonian, t, cfg)?;
    let evolver = Evolver::new(state.grid(), hamiltonian, dt)?;
    let out = evolver.advance_state(state, t)?;
    check_propagated(&out)?;
    Ok(out)
}

/// Norm drift and boundary checks on an evolved state.
pub fn check_propagated(state: &CompositeState) -> Result<()> {
    for b in state.branches() {
        check_wave(&b.wave).map_err(|e| match e {
            Error::Geometry(msg) => Error::Geometry(format!("branch {}: {msg}", b.spec.label)),
            Error::Instability(msg) => Error::Instability(format!("branch {}: {msg}", b.spec.label)),
            other => other,
        })?;
    }
    Ok(())
}

pub fn check_wave(wave: &PointerWave) -> Result<()> {
    let drift = (wave.norm_sqr() - 1.0).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::Instability(format!("norm drifted by {drift:.3e}")));
    }
    let edge = wave.edge_mass(EDGE_BAND);
    if edge > EDGE_MASS_LIMIT {
        return Err(Error::Geometry(format!(
            "packet reached the grid boundary (edge mass {edge:.3e})"
        )));
    }
    let fast = wave.momentum_edge_mass(EDGE_BAND);
    if fast > EDGE_MASS_LIMIT {
        return Err(Error::Geometry(format!(
            "packet reached the momentum cutoff (mass {fast:.3e}); refine the grid"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(512, -25.6, 25.6).unwrap()
    }

    #[test]
    fn potentials_evaluate_with_shift() {
        let h = ApparatusHamiltonian::new(2.0, Potential::Harmonic { omega: 1.5 }).unwrap();
        assert!((h.potential_at(1.0) - 0.5 * 2.0 * 2.25).abs() < 1e-15);
        let s = h.shifted(3.0);
        // minimum moves to q = -3
        assert_eq!(s.potential_at(-3.0), 0.0);
        assert_eq!(s.shifted(-3.0).shift(), 0.0);
        let poly = ApparatusHamiltonian::new(1.0, Potential::Polynomial { coefficients: alloc::vec![1.0, -2.0, 0.5] }).unwrap();
        assert!((poly.potential_at(2.0) - (1.0 - 4.0 + 2.0)).abs() < 1e-15);
        assert!(!poly.is_position_independent());
        assert!(ApparatusHamiltonian::free(1.0).unwrap().is_position_independent());
        assert!(ApparatusHamiltonian::new(0.0, Potential::Free).is_err());
        assert!(ApparatusHamiltonian::new(1.0, Potential::Linear { k: f64::NAN }).is_err());
    }

    #[test]
    fn backward_advance_inverts_forward() {
        let g = grid();
        let h = ApparatusHamiltonian::new(1.0, Potential::Quartic { lambda: 0.05 }).unwrap();
        let w = PointerWave::gaussian(&g, 2.0, 1.0, 0.5).unwrap();
        let ev = Evolver::new(&g, &h, 0.01).unwrap();
        let fwd = ev.advance_wave(&w, 1.234).unwrap();
        let back = ev.advance_wave(&fwd, -1.234).unwrap();
        for (a, b) in back.amplitudes().iter().zip(w.amplitudes()) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn unitarity_over_many_steps() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 1.0, 1.0, 0.0).unwrap();
        for pot in [
            Potential::Free,
            Potential::Linear { k: 0.3 },
            Potential::Harmonic { omega: 1.0 },
            Potential::Quartic { lambda: 0.05 },
        ] {
            let h = ApparatusHamiltonian::new(1.0, pot).unwrap();
            let ev = Evolver::new(&g, &h, 0.001).unwrap();
            let out = ev.advance_wave(&w, 1.0).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 1.0, 1.0, 0.0).unwrap();
        let psi = crate::composite::couple(
            &[crate::BranchSpec::new(1, Complex64::new(1.0, 0.0), 0.0)],
            0.0,
            &w,
        )
        .unwrap();
        let h = ApparatusHamiltonian::new(1.0, Potential::Quartic { lambda: 0.1 }).unwrap();
        let out = propagate(&psi, &h, 0.0, &PropagatorConfig::default()).unwrap();
        assert_eq!(out, psi);
        assert!(propagate(&psi, &h, -1.0, &PropagatorConfig::default()).is_err());
    }

    #[test]
    fn fixed_step_must_pass_gate() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let h = ApparatusHamiltonian::new(1.0, Potential::Quartic { lambda: 0.05 }).unwrap().shifted(8.0);
        let err = select_time_step(&[&w], &h, 2.0, &PropagatorConfig::with_dt(0.2));
        assert!(matches!(err, Err(Error::Instability(_))));
    }

    #[test]
    fn boundary_is_detected() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 0.0, 1.0, 4.0).unwrap();
        let psi = crate::composite::couple(&[crate::BranchSpec::new(1, Complex64::new(1.0, 0.0), 0.0)], 0.0, &w)
            .unwrap();
        let h = ApparatusHamiltonian::free(1.0).unwrap();
        let err = propagate(&psi, &h, 6.0, &PropagatorConfig::default());
        assert!(matches!(err, Err(Error::Geometry(_))));
    }
}
