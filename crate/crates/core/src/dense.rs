//! Dense complex matrices on small grids: the matrix-exponential propagator used to
//! cross-check the split-step scheme, and explicit operator matrices for structural
//! checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::dynamics::ApparatusHamiltonian;
use crate::pointer::{Grid, PointerWave};
use crate::{Error, Result};

/// Largest grid accepted by [`propagate_dense`].
pub const DENSE_MAX_POINTS: usize = 256;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Matrix of the operator `f(p)` on the grid (multiplication by `f(p_k)` in the
    /// momentum representation). It is circulant in the position basis.
    pub fn momentum_function(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let n = grid.n_points();
        let mut column: Vec<Complex64> = grid.momenta().map(&f).collect();
        grid.fft().inverse(&mut column);
        Self::from_fn(n, |m, l| column[(m + n - l) % n])
    }

    /// `blocks[a][b]` placed at block row `a`, block column `b`.
    pub fn from_blocks(blocks: &[Vec<DenseMatrix>]) -> Self {
        let nb = blocks.len();
        let n = blocks[0][0].n;
        let mut m = Self::zeros(nb * n);
        for (a, row) in blocks.iter().enumerate() {
            for (b, block) in row.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        m[(a * n + i, b * n + j)] = block[(i, j)];
                    }
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: Complex64) -> Self {
        DenseMatrix { n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).fold(ZERO, |acc, (a, b)| acc + a * b))
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Solves `self * X = rhs` by LU decomposition with partial pivoting.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        let mut lu = self.clone();
        let mut x = rhs.clone();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| lu[(a, col)].norm().total_cmp(&lu[(b, col)].norm()))
                .unwrap_or(col);
            if lu[(pivot, col)].norm() < 1e-300 {
                return Err(Error::Instability("singular matrix in dense solve".into()));
            }
            if pivot != col {
                lu.swap_rows(pivot, col);
                x.swap_rows(pivot, col);
            }
            let inv = ONE / lu[(col, col)];
            for row in col + 1..n {
                let factor = lu[(row, col)] * inv;
                if factor == ZERO {
                    continue;
                }
                for k in col..n {
                    let v = lu[(col, k)];
                    lu[(row, k)] -= factor * v;
                }
                for k in 0..n {
                    let v = x[(col, k)];
                    x[(row, k)] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = ONE / lu[(col, col)];
            for k in 0..n {
                x[(col, k)] *= inv;
            }
            for row in 0..col {
                let factor = lu[(row, col)];
                if factor == ZERO {
                    continue;
                }
                for k in 0..n {
                    let v = x[(col, k)];
                    x[(row, k)] -= factor * v;
                }
            }
        }
        Ok(x)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for k in 0..self.n {
            self.data.swap(a * self.n + k, b * self.n + k);
        }
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        assert_eq!(n, rhs.n);
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(&rhs.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        DenseMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        DenseMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

// Numerator coefficients of the [13/13] Pade approximant to exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a [13/13] Pade approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.n;
    let norm = a.norm_one();
    if !norm.is_finite() {
        return Err(Error::Instability("non-finite matrix in expm".into()));
    }
    let squarings = if norm > THETA13 { libm::ceil(libm::log2(norm / THETA13)) as i32 } else { 0 };
    let a = a.scale(Complex64::new(libm::pow(2.0, -squarings as f64), 0.0));
    let id = DenseMatrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| Complex64::new(PADE13[k], 0.0);

    let lincomb = |c6: usize, c4: usize, c2: usize| -> DenseMatrix {
        &(&a6.scale(b(c6)) + &a4.scale(b(c4))) + &a2.scale(b(c2))
    };
    let u_inner = &(&a6 * &lincomb(13, 11, 9)) + &(&lincomb(7, 5, 3) + &id.scale(b(1)));
    let u = &a * &u_inner;
    let v = &(&a6 * &lincomb(12, 10, 8)) + &(&lincomb(6, 4, 2) + &id.scale(b(0)));

    let mut r = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Dense `H = K + diag(V)` on the grid, with `K` built from `p^2 / 2M` in the
/// momentum representation.
pub fn hamiltonian_matrix(grid: &Grid, h: &ApparatusHamiltonian) -> DenseMatrix {
    let kinetic = DenseMatrix::momentum_function(grid, |p| Complex64::new(h.kinetic_at(p), 0.0));
    let potential: Vec<Complex64> = grid.positions().map(|q| Complex64::new(h.potential_at(q), 0.0)).collect();
    &kinetic + &DenseMatrix::diagonal(&potential)
}

/// `exp(-i t H)` applied through an explicit matrix exponential.
pub fn propagate_dense(wave: &PointerWave, h: &ApparatusHamiltonian, t: f64) -> Result<PointerWave> {
    let grid = wave.grid();
    if grid.n_points() > DENSE_MAX_POINTS {
        return Err(Error::Config(format!(
            "dense propagation is limited to {DENSE_MAX_POINTS} points, grid has {}",
            grid.n_points()
        )));
    }
    if t == 0.0 {
        return Ok(wave.clone());
    }
    let generator = hamiltonian_matrix(grid, h).scale(Complex64::new(0.0, -t));
    let u = expm(&generator)?;
    PointerWave::new(grid.clone(), u.mul_vec(wave.amplitudes()))
}
