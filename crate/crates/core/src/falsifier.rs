//! Monte-Carlo stress tests of the raw inequalities and sign census of the simplified
//! bounds.
//!
//! Every trial draws from its own ChaCha8 stream, selected by `(population, index)`
//! under the report seed, so any trial can be replayed in isolation and reports are
//! reproducible bit for bit.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, FSDistances, OverlapZ, VERDICT_TOLERANCE};
use crate::composite::{Branch, BranchSpec, CompositeState, Normalization};
use crate::pointer::{Grid, PointerWave};
use crate::{Error, Result};

pub const HISTOGRAM_BINS: usize = 64;
/// Right-hand sides above this count as positive in the sign census.
pub const CENSUS_TOLERANCE: f64 = 1e-12;
const MAX_SAMPLE_RETRIES: usize = 32;

/// Default sampling grid.
pub fn default_grid() -> Grid {
    Grid::new(64, -16.0, 16.0).expect("valid grid")
}

/// ChaCha8 stream for one trial.
pub fn trial_rng(seed: u64, population: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((population as u64) << 32) | index as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// Normalised random Gaussian mixture, with centres within `0.2 span` of the grid
/// middle, widths in `[span/48, span/24]` and mean momenta within `p_max / 8`.
pub fn random_wave(rng: &mut ChaCha8Rng, grid: &Grid) -> Result<PointerWave> {
    let span = grid.span();
    let middle = 0.5 * (grid.q_min() + grid.q_max());
    for _ in 0..MAX_SAMPLE_RETRIES {
        let components = rng.random_range(1..=3);
        let mut amps = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        let mut ok = true;
        for _ in 0..components {
            let center = middle + rng.random_range(-0.2..=0.2) * span;
            let width = span * rng.random_range(1.0 / 48.0..=1.0 / 24.0);
            let momentum = grid.p_max() * rng.random_range(-0.125..=0.125);
            let weight = complex_normal(rng);
            match PointerWave::gaussian(grid, center, width, momentum) {
                Ok(g) => {
                    for (a, b) in amps.iter_mut().zip(g.amplitudes()) {
                        *a += weight * b;
                    }
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let wave = PointerWave::new(grid.clone(), amps)?;
        if wave.norm_sqr() > 1e-6 {
            return wave.normalized();
        }
    }
    Err(Error::Geometry(format!("no admissible random wave after {MAX_SAMPLE_RETRIES} attempts")))
}

/// Random composite state with labels `1..=n_branches`.
///
/// Coefficients are uniform on the complex unit sphere; unnormalised states are
/// additionally scaled by a factor uniform in `(0, 2]`. Branch shifts are random
/// multiples of `dq` within `span / 8`.
pub fn sample_random_composite_with(
    rng: &mut ChaCha8Rng,
    n_branches: usize,
    grid: &Grid,
    normalized: bool,
) -> Result<CompositeState> {
    if n_branches < 2 {
        return Err(Error::Precondition(format!("need at least two branches, got {n_branches}")));
    }
    let mut coefficients: Vec<Complex64> = (0..n_branches).map(|_| complex_normal(rng)).collect();
    let norm = libm::sqrt(coefficients.iter().map(Complex64::norm_sqr).sum::<f64>());
    let scale = if normalized { 1.0 } else { 2.0 * (1.0 - rng.random::<f64>()) };
    for c in &mut coefficients {
        *c *= scale / norm;
    }
    let max_cells = (grid.n_points() / 8) as i64;
    let mut branches = Vec::with_capacity(n_branches);
    for (k, c) in coefficients.into_iter().enumerate() {
        let shift = grid.dq() * rng.random_range(-max_cells..=max_cells) as f64;
        let wave = random_wave(rng, grid)?;
        branches.push(Branch::new(BranchSpec::new(k as u32 + 1, c, shift), shift, wave));
    }
    let normalization = if normalized { Normalization::Normalized } else { Normalization::Unnormalized };
    CompositeState::from_branches(branches, normalization)
}

pub fn sample_random_composite(seed: u64, n_branches: usize, grid: &Grid, normalized: bool) -> Result<CompositeState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_random_composite_with(&mut rng, n_branches, grid, normalized)
}

/// Fixed-bin histogram over `[-1, 1]`; values outside are clamped into the end bins.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SlackHistogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Default for SlackHistogram {
    fn default() -> Self {
        SlackHistogram { lo: -1.0, hi: 1.0, counts: vec![0; HISTOGRAM_BINS] }
    }
}

impl SlackHistogram {
    pub fn add(&mut self, x: f64) {
        if x.is_nan() {
            return;
        }
        let n = self.counts.len();
        let pos = (x - self.lo) / (self.hi - self.lo) * n as f64;
        let bin = if pos < 0.0 { 0 } else { (libm::floor(pos) as usize).min(n - 1) };
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Statistics of one quantity over one sampling population.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CensusEntry {
    pub population: String,
    pub quantity: String,
    pub trials: u64,
    pub evaluated: u64,
    /// Trials with a degenerate norm or denominator.
    pub skipped: u64,
    /// Violations (stress tests) or positive right-hand sides (sign census).
    pub hits: u64,
    pub fraction: f64,
    /// Largest violation magnitude or largest right-hand side seen.
    pub extreme: f64,
    /// Whether a nonzero `hits` count is a failure of the implementation.
    pub counts_as_violation: bool,
}

impl CensusEntry {
    fn new(population: &str, quantity: &str, counts_as_violation: bool) -> Self {
        CensusEntry {
            population: population.to_string(),
            quantity: quantity.to_string(),
            trials: 0,
            evaluated: 0,
            skipped: 0,
            hits: 0,
            fraction: 0.0,
            extreme: f64::NEG_INFINITY,
            counts_as_violation,
        }
    }

    fn record(&mut self, hit: bool, value: f64) {
        self.trials += 1;
        if value.is_nan() {
            self.skipped += 1;
            return;
        }
        self.evaluated += 1;
        if hit {
            self.hits += 1;
        }
        self.extreme = self.extreme.max(value);
    }

    fn skip(&mut self) {
        self.trials += 1;
        self.skipped += 1;
    }

    fn finish(&mut self) {
        self.fraction = if self.evaluated > 0 { self.hits as f64 / self.evaluated as f64 } else { 0.0 };
        if self.extreme == f64::NEG_INFINITY {
            self.extreme = 0.0;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FalsifierKind {
    Uncertainty,
    Triangle,
    BoundSign,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FalsifierReport {
    pub kind: FalsifierKind,
    pub seed: u64,
    pub trials: u64,
    /// Sum of `hits` over the entries that count as violations.
    pub violations: u64,
    pub max_violation_magnitude: f64,
    pub tolerance: f64,
    /// Slack (stress tests) or right-hand side (census) distribution.
    pub histogram: SlackHistogram,
    pub breakdown: Vec<CensusEntry>,
}

impl FalsifierReport {
    fn assemble(kind: FalsifierKind, seed: u64, tolerance: f64, histogram: SlackHistogram, mut breakdown: Vec<CensusEntry>) -> Self {
        breakdown.iter_mut().for_each(CensusEntry::finish);
        let counted = breakdown.iter().filter(|e| e.counts_as_violation);
        let violations = counted.clone().map(|e| e.hits).sum();
        let max_violation_magnitude = counted
            .filter(|e| e.hits > 0)
            .map(|e| e.extreme)
            .fold(0.0, f64::max);
        let trials = breakdown.iter().map(|e| e.trials).max().unwrap_or(0);
        FalsifierReport { kind, seed, trials, violations, max_violation_magnitude, tolerance, histogram, breakdown }
    }

    pub fn entry(&self, population: &str, quantity: &str) -> Option<&CensusEntry> {
        self.breakdown.iter().find(|e| e.population == population && e.quantity == quantity)
    }
}

fn require_trials(trials: u32) -> Result<()> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    Ok(())
}

fn random_branch_count(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(2..=4)
}

/// Robertson relation `var1 var2 >= <[A1, A2]>^2 / 4` on random states.
///
/// Normalised states are checked as they are; unnormalised states on their ray
/// (the relation is stated for unit vectors). The unnormalised moments taken
/// literally are recorded for information only.
pub fn falsify_uncertainty(trials: u32, seed: u64) -> Result<FalsifierReport> {
    require_trials(trials)?;
    let grid = default_grid();
    let mut hist = SlackHistogram::default();
    let mut normalized = CensusEntry::new("normalized", "robertson", true);
    let mut ray = CensusEntry::new("unnormalized", "robertson_on_ray", true);
    let mut literal = CensusEntry::new("unnormalized", "robertson_unscaled_moments", false);
    for index in 0..trials {
        for (population, is_normalized) in [(0u32, true), (1u32, false)] {
            let mut rng = trial_rng(seed, population, index);
            let n = random_branch_count(&mut rng);
            let state = sample_random_composite_with(&mut rng, n, &grid, is_normalized)?;
            let pair = state.pair(1, 2)?;
            let m = state.direct_moments(&pair)?;
            let (v1, v2, comm) = m.ray_normalized();
            let slack = v1 * v2 - 0.25 * comm * comm;
            hist.add(slack);
            if is_normalized {
                normalized.record(slack < -VERDICT_TOLERANCE, -slack);
            } else {
                ray.record(slack < -VERDICT_TOLERANCE, -slack);
                let u1 = m.a1_sqr - m.a1 * m.a1;
                let u2 = m.a2_sqr - m.a2 * m.a2;
                let raw = u1 * u2 - 0.25 * m.commutator * m.commutator;
                literal.record(raw < -VERDICT_TOLERANCE, -raw);
            }
        }
    }
    Ok(FalsifierReport::assemble(FalsifierKind::Uncertainty, seed, VERDICT_TOLERANCE, hist, vec![normalized, ray, literal]))
}

/// Triangle inequality `D12 + D23 >= D13`, on the structured triples
/// `(Psi, A1 Psi, A2 Psi)` and on fully random triples in `C^d`, `2 <= d <= 16`.
pub fn falsify_triangle(trials: u32, seed: u64) -> Result<FalsifierReport> {
    require_trials(trials)?;
    let grid = default_grid();
    let mut hist = SlackHistogram::default();
    let mut structured = CensusEntry::new("structured", "triangle", true);
    let mut random = CensusEntry::new("random_vectors", "triangle", false);
    for index in 0..trials {
        let mut rng = trial_rng(seed, 0, index);
        let n = random_branch_count(&mut rng);
        let is_normalized = rng.random::<bool>();
        let state = sample_random_composite_with(&mut rng, n, &grid, is_normalized)?;
        match bounds::distances_triple(&state, &state.pair(1, 2)?) {
            Ok(d) => {
                let slack = triangle_slack(&d);
                hist.add(slack);
                structured.record(slack < -VERDICT_TOLERANCE, -slack);
            }
            Err(_) => structured.skip(),
        }

        let mut rng = trial_rng(seed, 1, index);
        let dim = rng.random_range(2..=16);
        let mut draw = || -> Vec<Complex64> { (0..dim).map(|_| complex_normal(&mut rng)).collect() };
        let (a, b, c) = (draw(), draw(), draw());
        let d = (|| -> Result<FSDistances> {
            Ok(FSDistances {
                d12: bounds::fubini_study_distance(&a, &b)?,
                d23: bounds::fubini_study_distance(&b, &c)?,
                d13: bounds::fubini_study_distance(&a, &c)?,
            })
        })();
        match d {
            Ok(d) => {
                let slack = triangle_slack(&d);
                random.record(slack < -VERDICT_TOLERANCE, -slack);
            }
            Err(_) => random.skip(),
        }
    }
    Ok(FalsifierReport::assemble(FalsifierKind::Triangle, seed, VERDICT_TOLERANCE, hist, vec![structured, random]))
}

pub fn triangle_slack(d: &FSDistances) -> f64 {
    d.d12 + d.d23 - d.d13
}

/// Sign census of the simplified bounds' right-hand sides at the default tolerance.
pub fn bound_sign_census(trials: u32, seed: u64) -> Result<FalsifierReport> {
    bound_sign_census_with_tolerance(trials, seed, CENSUS_TOLERANCE)
}

/// Counts right-hand sides above `tolerance`.
///
/// Normalised states: any positive right-hand side counts as a violation of the sign
/// analysis. Unnormalised states: positive right-hand sides are split by whether
/// `S |Z|^2` exceeds one, which locates where the bounds become non-trivial.
pub fn bound_sign_census_with_tolerance(trials: u32, seed: u64, tolerance: f64) -> Result<FalsifierReport> {
    require_trials(trials)?;
    let grid = default_grid();
    let mut hist = SlackHistogram::default();
    let quantities = ["uncertainty", "tight", "post_measurement", "sg_uncertainty", "sg_tight"];
    let mut normalized: Vec<CensusEntry> =
        quantities.iter().map(|q| CensusEntry::new("normalized", q, true)).collect();
    let mut above: Vec<CensusEntry> =
        quantities.iter().map(|q| CensusEntry::new("unnormalized_s_z2_above_1", q, false)).collect();
    let mut below: Vec<CensusEntry> =
        quantities.iter().map(|q| CensusEntry::new("unnormalized_s_z2_at_most_1", q, false)).collect();
    for index in 0..trials {
        for (population, is_normalized) in [(0u32, true), (1u32, false)] {
            let mut rng = trial_rng(seed, population, index);
            let n = random_branch_count(&mut rng);
            let state = sample_random_composite_with(&mut rng, n, &grid, is_normalized)?;
            let pair = state.pair(1, 2)?;
            let (ci, cj) = (state.branch(1)?.spec.coefficient, state.branch(2)?.spec.coefficient);
            let z = OverlapZ::new(state.overlap(&pair)?);
            let phi = bounds::relative_phase(ci, cj, &z).unwrap_or(f64::NAN);
            let inputs = BoundInputs::new(ci.norm_sqr(), cj.norm_sqr(), z.magnitude(), phi);
            let rhs = census_rhs(inputs);
            let entries = if is_normalized {
                &mut normalized
            } else if inputs.sum() * inputs.abs_z * inputs.abs_z > 1.0 {
                &mut above
            } else {
                &mut below
            };
            for (e, r) in entries.iter_mut().zip(rhs) {
                e.record(r > tolerance, r);
            }
            if is_normalized {
                hist.add(rhs[0]);
            }
        }
    }
    let breakdown = normalized.into_iter().chain(above).chain(below).collect();
    Ok(FalsifierReport::assemble(FalsifierKind::BoundSign, seed, tolerance, hist, breakdown))
}

/// Right-hand sides of the uncertainty, tight, post-measurement and two-outcome
/// bounds; `NaN` when undefined.
pub fn census_rhs(inputs: BoundInputs) -> [f64; 5] {
    let defined = |r: bounds::BoundReport| if r.verdict == bounds::Verdict::Undefined { f64::NAN } else { r.rhs };
    [
        defined(bounds::bound_uncertainty(inputs)),
        defined(bounds::bound_tight(inputs)),
        defined(bounds::bound_post_measurement(inputs)),
        defined(bounds::bound_sg_uncertainty(inputs)),
        defined(bounds::bound_sg_tight(inputs)),
    ]
}
