//! End-to-end runs: the general n-outcome measurement, the Stern-Gerlach experiment
//! and the Peres "undoing" analysis.
//!
//! Stern-Gerlach conventions: the spin-up branch has `s_z = +1/2`, spin-down
//! `s_z = -1/2`, and the coupling `L sigma_z p = 2 L s_z p` moves the pointer by
//! `+L` / `-L`. The default pair is `(down, up)` so that `conj(c_i) c_j = alpha
//! conj(beta)` and `A = A1 + i A2 = exp(2iLp) s_-`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundKind, BoundReport, FSDistances, OverlapZ, Verdict};
use crate::composite::{couple, couple_unnormalized, BranchSpec, CompositeState, PhasePair, StateVector};
use crate::dense::DenseMatrix;
use crate::dynamics::{check_propagated, select_time_step, ApparatusHamiltonian, Evolver, Potential, PropagatorConfig};
use crate::pointer::{Grid, PointerWave};
use crate::{Error, Result};

/// Largest grid on which the Stern-Gerlach run builds dense `2n x 2n` operators.
pub const STRUCTURAL_MAX_POINTS: usize = 128;
/// Number of random probe vectors for the `[A, s_z] = A` check.
pub const COMMUTATOR_PROBES: usize = 50;
/// A coefficient this close to modulus one makes the state definite.
pub const DEFINITE_TOLERANCE: f64 = 1e-12;
const SPIN_UP: u32 = 1;
const SPIN_DOWN: u32 = 2;

pub const DEFINITE_STATE_INTERPRETATION: &str = "definite macroscopic state: the relative-phase bound has a vanishing \
denominator and cannot be satisfied; possessing which-branch information excludes a defined relative phase";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScenarioKind {
    General,
    SternGerlach,
    Peres,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::General => "general",
            ScenarioKind::SternGerlach => "stern_gerlach",
            ScenarioKind::Peres => "peres",
        }
    }

    fn is_spin(self) -> bool {
        !matches!(self, ScenarioKind::General)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GridSpec {
    pub n_points: usize,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PacketSpec {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        PacketSpec { center: 0.0, width: 1.0, momentum: 0.0 }
    }
}

/// Fully resolved description of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub grid: GridSpec,
    pub mass: f64,
    pub potential: Potential,
    pub packet: PacketSpec,
    pub branches: Vec<BranchSpec>,
    /// `L`; branch `n` moves by `L O_n` (general) or `2 L s_z` (spin scenarios).
    pub coupling_length: f64,
    pub times: Vec<f64>,
    pub pair: Option<(u32, u32)>,
    pub seed: u64,
    /// Allows `sum |c_n|^2 != 1`.
    pub falsifier_mode: bool,
    pub propagator: PropagatorConfig,
    /// Coefficient `b` of a system Hamiltonian `b s_z` (spin scenarios only).
    pub spin_field: f64,
    /// `|Z|` level whose first crossing is reported by the Peres run.
    pub decay_threshold: f64,
}

impl ScenarioConfig {
    /// A two-outcome spin configuration with branches `(up, alpha)` and `(down, beta)`.
    pub fn stern_gerlach(grid: GridSpec, alpha: Complex64, beta: Complex64, coupling_length: f64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::SternGerlach,
            grid,
            mass: 1.0,
            potential: Potential::Free,
            packet: PacketSpec::default(),
            branches: vec![BranchSpec::new(SPIN_UP, alpha, 0.5), BranchSpec::new(SPIN_DOWN, beta, -0.5)],
            coupling_length,
            times: vec![0.0],
            pair: None,
            seed: 0,
            falsifier_mode: false,
            propagator: PropagatorConfig::default(),
            spin_field: 0.0,
            decay_threshold: 0.1,
        }
    }

    /// A general configuration with the given branches.
    pub fn general(grid: GridSpec, branches: Vec<BranchSpec>, coupling_length: f64) -> Self {
        ScenarioConfig { kind: ScenarioKind::General, branches, ..Self::stern_gerlach(grid, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), coupling_length) }
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_points, self.grid.q_min, self.grid.q_max)
    }

    pub fn hamiltonian(&self) -> Result<ApparatusHamiltonian> {
        ApparatusHamiltonian::new(self.mass, self.potential.clone())
    }

    pub fn initial_wave(&self, grid: &Grid) -> Result<PointerWave> {
        PointerWave::gaussian(grid, self.packet.center, self.packet.width, self.packet.momentum)
    }

    /// The configured pair, or the default: `(down, up)` for spin scenarios and the
    /// first two branches otherwise.
    pub fn resolved_pair(&self) -> Result<(u32, u32)> {
        if let Some(p) = self.pair {
            return Ok(p);
        }
        if self.kind.is_spin() {
            return Ok((self.spin_label(-0.5)?, self.spin_label(0.5)?));
        }
        match self.branches.as_slice() {
            [a, b, ..] => Ok((a.label, b.label)),
            _ => Err(Error::Config("a phase pair needs at least two branches".into())),
        }
    }

    fn spin_label(&self, sz: f64) -> Result<u32> {
        self.branches
            .iter()
            .find(|b| b.eigenvalue == sz)
            .map(|b| b.label)
            .ok_or_else(|| Error::Config(format!("no branch with s_z = {sz}")))
    }

    /// Pointer displacement per unit eigenvalue.
    fn coupling_scale(&self) -> f64 {
        if self.kind.is_spin() { 2.0 * self.coupling_length } else { self.coupling_length }
    }

    /// `alpha` and `beta` of a spin configuration.
    pub fn spin_amplitudes(&self) -> Result<(Complex64, Complex64)> {
        let up = self.spin_label(0.5)?;
        let down = self.spin_label(-0.5)?;
        let find = |l: u32| self.branches.iter().find(|b| b.label == l).map(|b| b.coefficient);
        Ok((find(up).unwrap_or_default(), find(down).unwrap_or_default()))
    }

    pub fn is_definite(&self) -> bool {
        self.branches
            .iter()
            .any(|b| (b.coefficient.norm() - 1.0).abs() <= DEFINITE_TOLERANCE)
            && self.branches.iter().filter(|b| b.coefficient.norm() > DEFINITE_TOLERANCE).count() == 1
    }

    /// Checks everything that does not need a propagation.
    pub fn validate(&self) -> Result<()> {
        let grid = self.build_grid()?;
        if self.branches.is_empty() {
            return Err(Error::Config("at least one branch is required".into()));
        }
        if self.branches.iter().any(|b| !(b.coefficient.re.is_finite() && b.coefficient.im.is_finite() && b.eigenvalue.is_finite())) {
            return Err(Error::Config("branch coefficients and eigenvalues must be finite".into()));
        }
        if !self.coupling_length.is_finite() {
            return Err(Error::Config("coupling_length must be finite".into()));
        }
        if self.times.is_empty() {
            return Err(Error::Config("times must not be empty".into()));
        }
        if self.times.iter().any(|t| !t.is_finite()) || self.times[0] < 0.0 {
            return Err(Error::Config("times must be finite and start at t >= 0".into()));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("times must be sorted ascending".into()));
        }
        if !(self.decay_threshold > 0.0 && self.decay_threshold < 1.0) {
            return Err(Error::Config("decay_threshold must lie in (0, 1)".into()));
        }
        if !self.spin_field.is_finite() {
            return Err(Error::Config("spin_field must be finite".into()));
        }
        if self.spin_field != 0.0 && !self.kind.is_spin() {
            return Err(Error::Config("spin_field applies to spin scenarios only".into()));
        }
        if !self.falsifier_mode {
            let total: f64 = self.branches.iter().map(BranchSpec::weight).sum();
            if (total - 1.0).abs() > crate::composite::WEIGHT_TOLERANCE {
                return Err(Error::Config(format!(
                    "branch weights sum to {total}, expected 1 (set falsifier_mode to allow this)"
                )));
            }
        }
        if self.kind.is_spin() {
            let mut sz: Vec<f64> = self.branches.iter().map(|b| b.eigenvalue).collect();
            sz.sort_by(f64::total_cmp);
            if sz != [-0.5, 0.5] {
                return Err(Error::Config(format!(
                    "{} needs exactly two branches with s_z = +1/2 and -1/2",
                    self.kind.as_str()
                )));
            }
        }
        let (i, j) = self.resolved_pair()?;
        if i == j {
            return Err(Error::Config(format!("phase pair needs distinct labels, got ({i}, {j})")));
        }
        for l in [i, j] {
            if !self.branches.iter().any(|b| b.label == l) {
                return Err(Error::UnknownLabel(l));
            }
        }
        self.hamiltonian()?;
        self.initial_wave(&grid)?;
        Ok(())
    }

    fn coupled_state(&self) -> Result<(Grid, PointerWave, CompositeState)> {
        self.validate()?;
        let grid = self.build_grid()?;
        let psi = self.initial_wave(&grid)?;
        let mut state = if self.falsifier_mode {
            couple_unnormalized(&self.branches, self.coupling_scale(), &psi)?
        } else {
            couple(&self.branches, self.coupling_scale(), &psi)?
        };
        if self.kind.is_spin() && self.spin_field != 0.0 {
            for b in &self.branches {
                state = state.with_system_energy(b.label, self.spin_field * b.eigenvalue)?;
            }
        }
        Ok((grid, psi, state))
    }
}

/// One time point of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    pub z: Complex64,
    pub abs_z: f64,
    pub theta: f64,
    /// `Phi_ij(t)`; `NaN` when undefined.
    pub phi: f64,
    pub a1: f64,
    pub a2: f64,
    pub var1: f64,
    pub var2: f64,
    /// `Im <[A1, A2]>`.
    pub comm: f64,
    /// `<O>` (general) or `<s_z>` (spin scenarios).
    pub observable: f64,
    pub distances: FSDistances,
    pub bounds: Vec<BoundReport>,
    /// Largest deviation between dense spin-operator matrices and the branch-form
    /// phase-operator moments; only on small Stern-Gerlach grids.
    pub structural_residual: Option<f64>,
}

impl TimeRow {
    pub fn bound(&self, kind: BoundKind) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.kind == kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub kind: ScenarioKind,
    pub pair: PhasePair,
    pub ci2: f64,
    pub cj2: f64,
    /// Step used by the split-step propagator (`0` when no propagation was needed).
    pub dt: f64,
    pub definite_state: bool,
    pub rows: Vec<TimeRow>,
}

impl TimeSeries {
    pub fn violations(&self) -> impl Iterator<Item = (f64, &BoundReport)> + '_ {
        self.rows
            .iter()
            .flat_map(|r| r.bounds.iter().map(move |b| (r.t, b)))
            .filter(|(_, b)| b.verdict == Verdict::Violated)
    }

    /// True when a bound is violated or the state is definite.
    pub fn any_violation(&self) -> bool {
        self.definite_state || self.violations().next().is_some()
    }
}

/// Runs the configuration's own kind. Peres configurations yield the Stern-Gerlach
/// time series of the same state; use [`run_peres`] for the undoing report.
pub fn run(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    match cfg.kind {
        ScenarioKind::General => run_general(cfg),
        ScenarioKind::SternGerlach | ScenarioKind::Peres => run_spin_series(cfg),
    }
}

pub fn run_general(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    if cfg.kind != ScenarioKind::General {
        return Err(Error::Config(format!("run_general given a {} configuration", cfg.kind.as_str())));
    }
    run_series(cfg)
}

pub fn run_stern_gerlach(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    if cfg.kind != ScenarioKind::SternGerlach {
        return Err(Error::Config(format!("run_stern_gerlach given a {} configuration", cfg.kind.as_str())));
    }
    run_spin_series(cfg)
}

fn run_spin_series(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    run_series(cfg)
}

/// Couples once, then advances the state through the sorted time list with one step
/// size chosen for the whole horizon.
struct Stepper {
    evolver: Option<Evolver>,
    now: f64,
}

impl Stepper {
    fn new(grid: &Grid, h: &ApparatusHamiltonian, waves: &[&PointerWave], horizon: f64, cfg: &PropagatorConfig) -> Result<Self> {
        let evolver = if horizon > 0.0 {
            let dt = select_time_step(waves, h, horizon, cfg)?;
            Some(Evolver::new(grid, h, dt)?)
        } else {
            None
        };
        Ok(Stepper { evolver, now: 0.0 })
    }

    fn dt(&self) -> f64 {
        self.evolver.as_ref().map_or(0.0, Evolver::dt)
    }

    /// Interval to reach `t`, after which `now = t`.
    fn segment(&mut self, t: f64) -> f64 {
        let d = t - self.now;
        self.now = t;
        d
    }

    fn advance_state(&self, state: &CompositeState, d: f64) -> Result<CompositeState> {
        match &self.evolver {
            Some(ev) if d != 0.0 => {
                let out = ev.advance_state(state, d)?;
                check_propagated(&out)?;
                Ok(out)
            }
            _ => Ok(state.clone()),
        }
    }
}

fn run_series(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    let (grid, _psi, initial) = cfg.coupled_state()?;
    let h = cfg.hamiltonian()?;
    let (i, j) = cfg.resolved_pair()?;
    let pair = initial.pair(i, j)?;
    let horizon = *cfg.times.last().unwrap_or(&0.0);
    let waves: Vec<&PointerWave> = initial.branches().iter().map(|b| &b.wave).collect();
    let mut stepper = Stepper::new(&grid, &h, &waves, horizon, &cfg.propagator)?;
    let structural = if cfg.kind.is_spin() && grid.n_points() <= STRUCTURAL_MAX_POINTS {
        Some(SpinOperators::new(&grid, cfg.coupling_length))
    } else {
        None
    };

    let mut state = initial.clone();
    let mut rows = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let d = stepper.segment(t);
        state = stepper.advance_state(&state, d).map_err(|e| e.at_time(t))?;
        let row = evaluate_row(cfg, &state, &pair, t, structural.as_ref()).map_err(|e| e.at_time(t))?;
        rows.push(row);
    }
    let bi = initial.branch(i)?;
    let bj = initial.branch(j)?;
    Ok(TimeSeries {
        kind: cfg.kind,
        pair,
        ci2: bi.spec.weight(),
        cj2: bj.spec.weight(),
        dt: stepper.dt(),
        definite_state: cfg.is_definite(),
        rows,
    })
}

fn evaluate_row(
    cfg: &ScenarioConfig,
    state: &CompositeState,
    pair: &PhasePair,
    t: f64,
    structural: Option<&SpinOperators>,
) -> Result<TimeRow> {
    let ev = bounds::evaluate_all(state, pair)?;
    let structural_residual = match structural {
        Some(ops) => Some(ops.residual(state, pair, cfg)?),
        None => None,
    };
    Ok(TimeRow {
        t,
        z: ev.z.value,
        abs_z: ev.z.magnitude(),
        theta: ev.z.phase(),
        phi: ev.phi,
        a1: ev.a1,
        a2: ev.a2,
        var1: ev.var1,
        var2: ev.var2,
        comm: ev.commutator,
        observable: state.expect_observable(),
        distances: ev.distances,
        bounds: ev.bounds,
        structural_residual,
    })
}

/// `A1 = s_x cos 2Lp + s_y sin 2Lp` and `A2 = s_x sin 2Lp - s_y cos 2Lp` as dense
/// matrices on `(up, down) (x) grid`.
struct SpinOperators {
    a1: DenseMatrix,
    a2: DenseMatrix,
}

impl SpinOperators {
    fn new(grid: &Grid, coupling_length: f64) -> Self {
        let l2 = 2.0 * coupling_length;
        let cos = DenseMatrix::momentum_function(grid, |p| Complex64::new(libm::cos(l2 * p), 0.0));
        let sin = DenseMatrix::momentum_function(grid, |p| Complex64::new(libm::sin(l2 * p), 0.0));
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        let zero = DenseMatrix::zeros(grid.n_points());
        // s_x = [[0, 1/2], [1/2, 0]], s_y = [[0, -i/2], [i/2, 0]]
        let a1 = DenseMatrix::from_blocks(&[
            vec![zero.clone(), &cos.scale(half) - &sin.scale(half_i)],
            vec![&cos.scale(half) + &sin.scale(half_i), zero.clone()],
        ]);
        let a2 = DenseMatrix::from_blocks(&[
            vec![zero.clone(), &sin.scale(half) + &cos.scale(half_i)],
            vec![&sin.scale(half) - &cos.scale(half_i), zero],
        ]);
        SpinOperators { a1, a2 }
    }

    /// Max deviation of `<A1>`, `<A2>`, `<A1^2>`, `<A2^2>` between the dense forms and
    /// the branch-form evaluation.
    fn residual(&self, state: &CompositeState, pair: &PhasePair, cfg: &ScenarioConfig) -> Result<f64> {
        let psi = state.to_vector();
        let up = psi.component(cfg.spin_label(0.5)?)?;
        let down = psi.component(cfg.spin_label(-0.5)?)?;
        let v: Vec<Complex64> = up.iter().chain(down).copied().collect();
        let dq = state.grid().dq();
        let expect = |m: &DenseMatrix| -> (f64, f64) {
            let mv = m.mul_vec(&v);
            let first = crate::pointer::raw_inner(&v, &mv).re * dq;
            let second = crate::pointer::raw_inner(&mv, &mv).re * dq;
            (first, second)
        };
        let (d1, d1sq) = expect(&self.a1);
        let (d2, d2sq) = expect(&self.a2);
        let m = state.direct_moments(pair)?;
        let quarter = 0.25 * (state.projector_weight(pair.i)? + state.projector_weight(pair.j)?);
        Ok([(d1 - m.a1), (d2 - m.a2), (d1sq - quarter), (d2sq - quarter)]
            .iter()
            .fold(0.0, |acc: f64, x| acc.max(x.abs())))
    }
}

/// One time point of the undoing analysis.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PeresRow {
    pub t: f64,
    /// `Z(t)` from separately evolved pointer waves under `H(q - L)` and `H(q + L)`.
    pub z: Complex64,
    pub abs_z: f64,
    /// `<A>` on the evolved joint vector.
    pub expect_a: Complex64,
    /// `alpha conj(beta) Z(t)` (times the system-energy phase when a spin field is set).
    pub predicted: Complex64,
    /// `|<A> - predicted|`.
    pub residual_a: f64,
    /// `||<A>| - |alpha beta| |Z(t)||`.
    pub residual_abs: f64,
    /// `<A'>` with `A' = exp(-itH) A exp(itH)`.
    pub expect_a_prime: Complex64,
    /// `|<A'> - alpha conj(beta)|`.
    pub residual_a_prime: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PeresReport {
    pub alpha_beta: Complex64,
    pub dt: f64,
    pub rows: Vec<PeresRow>,
    /// `max_v |([A, s_z] - A) v|` over the probe vectors.
    pub commutator_residual: f64,
    pub probes: usize,
    pub decay_threshold: f64,
    /// First sampled time with `|Z| < decay_threshold`.
    pub first_decay_time: Option<f64>,
    pub min_abs_z: f64,
}

impl PeresReport {
    /// First sampled time with `|Z| < level`.
    pub fn first_time_below(&self, level: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.abs_z < level).map(|r| r.t)
    }

    pub fn max_residual_a(&self) -> f64 {
        self.rows.iter().map(|r| r.residual_a).fold(0.0, f64::max)
    }

    pub fn max_residual_a_prime(&self) -> f64 {
        self.rows.iter().map(|r| r.residual_a_prime).fold(0.0, f64::max)
    }
}

pub fn run_peres(cfg: &ScenarioConfig) -> Result<PeresReport> {
    if !cfg.kind.is_spin() {
        return Err(Error::Config("the undoing analysis needs a spin configuration".into()));
    }
    let (grid, psi, initial) = cfg.coupled_state()?;
    let h = cfg.hamiltonian()?;
    let (up, down) = (cfg.spin_label(0.5)?, cfg.spin_label(-0.5)?);
    let pair = initial.pair(down, up)?;
    let (alpha, beta) = cfg.spin_amplitudes()?;
    let alpha_beta = alpha * beta.conj();
    let (e_down, e_up) = (initial.branch(down)?.energy, initial.branch(up)?.energy);

    let horizon = *cfg.times.last().unwrap_or(&0.0);
    let waves: Vec<&PointerWave> = initial.branches().iter().map(|b| &b.wave).collect();
    let mut stepper = Stepper::new(&grid, &h, &waves, horizon, &cfg.propagator)?;
    let shifted = match &stepper.evolver {
        Some(ev) => Some((
            Evolver::new(&grid, &h.shifted(pair.shift_i), ev.dt())?,
            Evolver::new(&grid, &h.shifted(pair.shift_j), ev.dt())?,
        )),
        None => None,
    };

    let mut state = initial.clone();
    let mut wi = psi.clone();
    let mut wj = psi;
    let mut segments: Vec<f64> = Vec::new();
    let mut rows = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let mut step = |t: f64| -> Result<PeresRow> {
            let d = stepper.segment(t);
            state = stepper.advance_state(&state, d)?;
            if let (Some((ei, ej)), true) = (&shifted, d != 0.0) {
                wi = ei.advance_wave(&wi, d)?;
                wj = ej.advance_wave(&wj, d)?;
                crate::dynamics::check_wave(&wi)?;
                crate::dynamics::check_wave(&wj)?;
            }
            if d != 0.0 {
                segments.push(d);
            }
            let z = OverlapZ::new(wi.inner(&wj)?);
            let psi_t = state.to_vector();
            let expect_a = psi_t.inner(&pair.apply_x(&psi_t)?)?;
            let predicted = alpha_beta * z.value * Complex64::from_polar(1.0, (e_down - e_up) * t);
            // exp(itH) Psi(t) by retracing every forward segment backwards
            let mut back = state.clone();
            if let Some(ev) = &stepper.evolver {
                for seg in segments.iter().rev() {
                    back = ev.advance_state(&back, -seg)?;
                }
            }
            let back_v = back.to_vector();
            let expect_a_prime = back_v.inner(&pair.apply_x(&back_v)?)?;
            Ok(PeresRow {
                t,
                z: z.value,
                abs_z: z.magnitude(),
                expect_a,
                predicted,
                residual_a: (expect_a - predicted).norm(),
                residual_abs: (expect_a.norm() - alpha_beta.norm() * z.magnitude()).abs(),
                expect_a_prime,
                residual_a_prime: (expect_a_prime - alpha_beta).norm(),
            })
        };
        rows.push(step(t).map_err(|e| e.at_time(t))?);
    }

    let probes = probe_vectors(&grid, up, down, cfg.seed, COMMUTATOR_PROBES)?;
    let mut commutator_residual: f64 = 0.0;
    for v in &probes {
        commutator_residual = commutator_residual.max(commutator_identity_residual(&pair, v, up, down)?);
    }
    let report = PeresReport {
        alpha_beta,
        dt: stepper.dt(),
        first_decay_time: rows.iter().find(|r| r.abs_z < cfg.decay_threshold).map(|r| r.t),
        min_abs_z: rows.iter().map(|r| r.abs_z).fold(f64::INFINITY, f64::min),
        rows,
        commutator_residual,
        probes: probes.len(),
        decay_threshold: cfg.decay_threshold,
    };
    Ok(report)
}

/// `s_z v` on the `(up, down)` layout.
pub fn apply_sz(v: &StateVector, up: u32, down: u32) -> Result<StateVector> {
    let mut out = v.clone();
    out.scale_component(up, 0.5)?;
    out.scale_component(down, -0.5)?;
    Ok(out)
}

/// `|([A, s_z] - A) v|` with `A = X` of the `(down, up)` pair.
pub fn commutator_identity_residual(pair: &PhasePair, v: &StateVector, up: u32, down: u32) -> Result<f64> {
    let a_sz = pair.apply_x(&apply_sz(v, up, down)?)?;
    let sz_a = apply_sz(&pair.apply_x(v)?, up, down)?;
    let a = pair.apply_x(v)?;
    let one = Complex64::new(1.0, 0.0);
    let comm = a_sz.combine(&sz_a, one, -one);
    Ok(libm::sqrt(comm.combine(&a, one, -one).norm_sqr()))
}

/// Random joint vectors with independent standard normal entries, unit norm.
pub fn probe_vectors(grid: &Grid, up: u32, down: u32, seed: u64, count: usize) -> Result<Vec<StateVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5052_4f42);
    let n = grid.n_points();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut draw = || -> Vec<Complex64> {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect()
        };
        let u = draw();
        let d = draw();
        let v = StateVector::new(grid.clone(), vec![(up, u), (down, d)])?;
        let scale = 1.0 / libm::sqrt(v.norm_sqr());
        out.push(v.combine(&v, Complex64::new(scale, 0.0), Complex64::new(0.0, 0.0)));
    }
    Ok(out)
}

/// Outcome of evaluating the two-outcome tight bound on a definite state.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DefiniteStateReport {
    pub report: BoundReport,
    pub interpretation: String,
}

/// Evaluates the two-outcome tight bound at coupling for a definite state
/// (`|c| = 1` for one branch). The verdict is always `Undefined`.
pub fn definite_state_check(cfg: &ScenarioConfig) -> Result<DefiniteStateReport> {
    if !cfg.is_definite() {
        return Err(Error::Precondition("no coefficient has modulus one; the state is not definite".into()));
    }
    let (i, j) = cfg.resolved_pair()?;
    let weight = |l: u32| {
        cfg.branches
            .iter()
            .find(|b| b.label == l)
            .map(BranchSpec::weight)
            .ok_or(Error::UnknownLabel(l))
    };
    let inputs = BoundInputs::new(weight(i)?, weight(j)?, 1.0, f64::NAN);
    let mut report = bounds::bound_sg_tight(inputs);
    report.verdict = Verdict::Undefined;
    Ok(DefiniteStateReport { report, interpretation: DEFINITE_STATE_INTERPRETATION.into() })
}
