//! Discretised one-dimensional pointer space.
//!
//! The grid is periodic under the discrete Fourier transform. Physical validity is
//! enforced by refusing operations that would push probability across the seam,
//! never by absorbing boundaries, so every translation stays exactly unitary.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::{Error, Result};

/// Probability allowed to cross the periodic seam during a translation.
pub const WRAP_TOLERANCE: f64 = 1e-8;

/// Half-widths (in units of `width`) a Gaussian packet must keep from the boundary.
pub const PACKET_MARGIN_WIDTHS: f64 = 6.0;

/// Uniform position lattice `q_m = q_min + m dq`, `m = 0..n`, with the matching
/// momentum lattice in FFT order.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    q_min: f64,
    q_max: f64,
    plan: Arc<FftPlan>,
}

impl Grid {
    pub fn new(n_points: usize, q_min: f64, q_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_points must be a power of two and at least 8, got {n_points}"
            )));
        }
        if !(q_min.is_finite() && q_max.is_finite()) || q_max <= q_min {
            return Err(Error::Config(format!(
                "grid bounds must satisfy q_min < q_max, got [{q_min}, {q_max}]"
            )));
        }
        Ok(Grid { n: n_points, q_min, q_max, plan: Arc::new(FftPlan::new(n_points)) })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn span(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn dq(&self) -> f64 {
        self.span() / self.n as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dq())
    }

    /// Largest representable momentum magnitude, `pi / dq`.
    pub fn p_max(&self) -> f64 {
        PI / self.dq()
    }

    pub fn position(&self, m: usize) -> f64 {
        self.q_min + m as f64 * self.dq()
    }

    /// Momentum of FFT bin `k`; the Nyquist bin is taken as `-pi/dq`.
    pub fn momentum(&self, k: usize) -> f64 {
        let signed = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        signed * self.dp()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |m| self.position(m))
    }

    pub fn momenta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.momentum(k))
    }

    pub(crate) fn fft(&self) -> &FftPlan {
        &self.plan
    }

    /// Multiplies the amplitudes by `factor(p_k)` in the momentum representation.
    pub(crate) fn apply_momentum_factor(
        &self,
        amplitudes: &mut [Complex64],
        factor: impl Fn(f64) -> Complex64,
    ) {
        self.plan.forward(amplitudes);
        for (k, a) in amplitudes.iter_mut().enumerate() {
            *a *= factor(self.momentum(k));
        }
        self.plan.inverse(amplitudes);
    }

    /// Position amplitudes to momentum amplitudes normalised so that
    /// `sum |phi_k|^2 dp` equals `sum |psi_m|^2 dq`.
    pub fn to_momentum(&self, position: &[Complex64]) -> Vec<Complex64> {
        let mut out = position.to_vec();
        self.plan.forward(&mut out);
        let scale = self.dq() / libm::sqrt(2.0 * PI);
        for (k, a) in out.iter_mut().enumerate() {
            *a *= Complex64::from_polar(scale, -self.momentum(k) * self.q_min);
        }
        out
    }

    pub fn from_momentum(&self, momentum: &[Complex64]) -> Vec<Complex64> {
        let scale = libm::sqrt(2.0 * PI) / self.dq();
        let mut out: Vec<Complex64> = momentum
            .iter()
            .enumerate()
            .map(|(k, a)| a * Complex64::from_polar(scale, self.momentum(k) * self.q_min))
            .collect();
        self.plan.inverse(&mut out);
        out
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.q_min == other.q_min && self.q_max == other.q_max
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.n)
            .field("q_min", &self.q_min)
            .field("q_max", &self.q_max)
            .finish()
    }
}

/// Pointer wavefunction in the position representation.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerWave {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl PointerWave {
    /// Wraps raw amplitudes without normalising them.
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::Config(format!(
                "expected {} amplitudes, got {}",
                grid.n_points(),
                amplitudes.len()
            )));
        }
        Ok(PointerWave { grid, amplitudes })
    }

    /// Normalised Gaussian `exp(-(q - center)^2 / (4 width^2) + i momentum q)`, so that
    /// `width` is the standard deviation of the position density.
    pub fn gaussian(grid: &Grid, center: f64, width: f64, momentum: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("packet width must be positive, got {width}")));
        }
        let lo = center - PACKET_MARGIN_WIDTHS * width;
        let hi = center + PACKET_MARGIN_WIDTHS * width;
        if lo < grid.q_min() || hi > grid.q_max() {
            return Err(Error::Geometry(format!(
                "packet at {center} with width {width} needs [{lo}, {hi}] inside the grid [{}, {}]",
                grid.q_min(),
                grid.q_max()
            )));
        }
        let amplitudes = grid
            .positions()
            .map(|q| {
                let x = q - center;
                Complex64::from_polar(libm::exp(-x * x / (4.0 * width * width)), momentum * q)
            })
            .collect();
        PointerWave { grid: grid.clone(), amplitudes }.normalized()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum::<f64>() * self.grid.dq()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = libm::sqrt(self.norm_sqr());
        if norm.is_nan() || norm <= 1e-300 {
            return Err(Error::Degenerate("cannot normalise a zero wave".into()));
        }
        for a in &mut self.amplitudes {
            *a /= norm;
        }
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
        self
    }

    /// `<self|other> = sum conj(a_m) b_m dq`.
    pub fn inner(&self, other: &PointerWave) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(raw_inner(&self.amplitudes, &other.amplitudes) * self.grid.dq())
    }

    /// `<self| exp(-i d p) |other>`, evaluated in the momentum representation.
    ///
    /// The periodic translation is exactly unitary, so this needs no boundary check.
    pub fn shifted_inner(&self, other: &PointerWave, distance: f64) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let plan = self.grid.fft();
        let mut a = self.amplitudes.clone();
        let mut b = other.amplitudes.clone();
        plan.forward(&mut a);
        plan.forward(&mut b);
        let sum = a
            .iter()
            .zip(&b)
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, (x, y))| {
                acc + x.conj() * y * Complex64::from_polar(1.0, -self.grid.momentum(k) * distance)
            });
        Ok(sum * (self.grid.dq() / self.grid.n_points() as f64))
    }

    /// Applies `exp(-i d p)`, moving the wave by `+d`. Fails if more than
    /// [`WRAP_TOLERANCE`] of probability would cross the periodic seam.
    pub fn translate(&self, distance: f64) -> Result<PointerWave> {
        let wrapped = self.wraparound_mass(distance);
        if wrapped > WRAP_TOLERANCE {
            return Err(Error::Geometry(format!(
                "translation by {distance} wraps probability {wrapped:.3e} across the grid boundary"
            )));
        }
        Ok(self.translate_periodic(distance))
    }

    /// Periodic translation with no boundary check.
    pub fn translate_periodic(&self, distance: f64) -> PointerWave {
        if distance == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        self.grid
            .apply_momentum_factor(&mut out.amplitudes, |p| Complex64::from_polar(1.0, -p * distance));
        out
    }

    /// Probability that a translation by `distance` carries across the seam.
    pub fn wraparound_mass(&self, distance: f64) -> f64 {
        let grid = &self.grid;
        if distance.abs() >= grid.span() {
            return self.norm_sqr();
        }
        let dq = grid.dq();
        let mass: f64 = grid
            .positions()
            .zip(&self.amplitudes)
            .filter(|(q, _)| {
                if distance > 0.0 {
                    *q >= grid.q_max() - distance
                } else if distance < 0.0 {
                    *q < grid.q_min() - distance
                } else {
                    false
                }
            })
            .map(|(_, a)| a.norm_sqr())
            .sum();
        mass * dq
    }

    /// Probability within `fraction` of the grid span from either boundary.
    pub fn edge_mass(&self, fraction: f64) -> f64 {
        let band = fraction * self.grid.span();
        let lo = self.grid.q_min() + band;
        let hi = self.grid.q_max() - band;
        self.grid
            .positions()
            .zip(&self.amplitudes)
            .filter(|(q, _)| *q < lo || *q >= hi)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dq()
    }

    /// Momentum-space probability within `fraction` of the Nyquist limit.
    pub fn momentum_edge_mass(&self, fraction: f64) -> f64 {
        let cutoff = (1.0 - fraction) * self.grid.p_max();
        let phi = self.momentum_amplitudes();
        phi.iter()
            .enumerate()
            .filter(|(k, _)| self.grid.momentum(*k).abs() >= cutoff)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dp()
    }

    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        self.grid.to_momentum(&self.amplitudes)
    }

    pub fn mean_position(&self) -> f64 {
        self.position_moment(1) / self.norm_sqr()
    }

    /// `<q^2>` for the normalised wave.
    pub fn mean_position_sqr(&self) -> f64 {
        self.position_moment(2) / self.norm_sqr()
    }

    pub fn position_variance(&self) -> f64 {
        let mean = self.mean_position();
        self.mean_position_sqr() - mean * mean
    }

    fn position_moment(&self, power: i32) -> f64 {
        self.grid
            .positions()
            .zip(&self.amplitudes)
            .map(|(q, a)| libm::pow(q, power as f64) * a.norm_sqr())
            .sum::<f64>()
            * self.grid.dq()
    }

    pub fn mean_momentum(&self) -> f64 {
        let phi = self.momentum_amplitudes();
        let weighted: f64 = phi
            .iter()
            .enumerate()
            .map(|(k, a)| self.grid.momentum(k) * a.norm_sqr())
            .sum();
        weighted * self.grid.dp() / self.norm_sqr()
    }

    pub fn mean_momentum_sqr(&self) -> f64 {
        let phi = self.momentum_amplitudes();
        let weighted: f64 = phi
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let p = self.grid.momentum(k);
                p * p * a.norm_sqr()
            })
            .sum();
        weighted * self.grid.dp() / self.norm_sqr()
    }
}

/// `sum conj(a_m) b_m` without the measure.
pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid() -> Grid {
        Grid::new(1024, -40.0, 40.0).unwrap()
    }

    #[test]
    fn grid_spacings() {
        let g = grid();
        assert_eq!(g.dq(), 0.078125);
        let g = Grid::new(8, 0.0, 8.0).unwrap();
        assert_eq!(g.dq(), 1.0);
        assert!((g.dp() - 2.0 * PI / 8.0).abs() < 1e-15);
        assert!((g.momentum(4) + PI).abs() < 1e-15);
        assert!((g.momentum(3) - 3.0 * 2.0 * PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(matches!(Grid::new(1000, -10.0, 10.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(4, -10.0, 10.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(64, 1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(64, 2.0, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn gaussian_moments() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(w.mean_position().abs() < 1e-8);
        assert!((w.mean_position_sqr() - 1.0).abs() < 1e-6);

        let w = PointerWave::gaussian(&g, 2.0, 0.5, 3.0).unwrap();
        assert!((w.mean_position() - 2.0).abs() < 1e-6);
        assert!((w.mean_momentum() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_clipped_by_boundary() {
        let g = Grid::new(256, -4.0, 4.0).unwrap();
        assert!(matches!(PointerWave::gaussian(&g, 3.9, 1.0, 0.0), Err(Error::Geometry(_))));
        assert!(matches!(PointerWave::gaussian(&g, 0.0, 0.0, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn translation_moves_centre_by_plus_distance() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let moved = w.translate(5.0).unwrap();
        assert!((moved.mean_position() - 5.0).abs() < 1e-6);
        assert!((moved.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(w.translate(0.0).unwrap().amplitudes(), w.amplitudes());
    }

    #[test]
    fn translation_round_trip_matches_resampled_gaussian() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let there = w.translate(3.0).unwrap();
        let direct = PointerWave::gaussian(&g, 3.0, 1.0, 0.0).unwrap();
        let fidelity = there.inner(&direct).unwrap().norm_sqr();
        assert!((fidelity - 1.0).abs() < 1e-10);
        let back = there.translate(-3.0).unwrap();
        assert!((back.inner(&w).unwrap().norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn translation_refuses_to_wrap() {
        let g = grid();
        let w = PointerWave::gaussian(&g, 30.0, 1.0, 0.0).unwrap();
        assert!(matches!(w.translate(15.0), Err(Error::Geometry(_))));
        assert!(w.translate(-50.0).is_ok());
        assert!(matches!(w.translate(100.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn gaussian_overlap_closed_form() {
        let g = grid();
        let a = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        for &d in &[0.5, 1.0, 2.5, 4.0] {
            let b = PointerWave::gaussian(&g, d, 1.0, 0.0).unwrap();
            let expected = libm::exp(-d * d / 8.0);
            assert!((a.inner(&b).unwrap().re - expected).abs() < 1e-6);
            // quadrature oracle on a finer grid
            let fine = Grid::new(4096, -40.0, 40.0).unwrap();
            let (fa, fb) = (
                PointerWave::gaussian(&fine, 0.0, 1.0, 0.0).unwrap(),
                PointerWave::gaussian(&fine, d, 1.0, 0.0).unwrap(),
            );
            assert!((fa.inner(&fb).unwrap().re - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn shifted_inner_matches_explicit_translation() {
        let g = grid();
        let a = PointerWave::gaussian(&g, 1.0, 1.2, 0.4).unwrap();
        let b = PointerWave::gaussian(&g, -2.0, 0.8, -0.3).unwrap();
        let direct = a.inner(&b.translate(2.7).unwrap()).unwrap();
        let fast = a.shifted_inner(&b, 2.7).unwrap();
        assert!((direct - fast).norm() < 1e-12);
    }

    #[test]
    fn odd_and_even_are_orthogonal() {
        let g = grid();
        let even = PointerWave::gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let odd: Vec<Complex64> = g
            .positions()
            .zip(even.amplitudes())
            .map(|(q, a)| a * q)
            .collect();
        let odd = PointerWave::new(g.clone(), odd).unwrap().normalized().unwrap();
        assert!(even.inner(&odd).unwrap().norm() < 1e-10);
    }

    #[test]
    fn grid_mismatch() {
        let a = PointerWave::gaussian(&grid(), 0.0, 1.0, 0.0).unwrap();
        let g2 = Grid::new(512, -40.0, 40.0).unwrap();
        let b = PointerWave::gaussian(&g2, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(a.inner(&b), Err(Error::GridMismatch));
        assert!(PointerWave::new(g2, vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn momentum_round_trip_and_parseval() {
        let g = grid();
        let w = PointerWave::gaussian(&g, -3.0, 0.7, 1.5).unwrap();
        let phi = w.momentum_amplitudes();
        let p_norm: f64 = phi.iter().map(Complex64::norm_sqr).sum::<f64>() * g.dp();
        assert!((p_norm - w.norm_sqr()).abs() < 1e-12);
        let back = g.from_momentum(&phi);
        for (a, b) in back.iter().zip(w.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
