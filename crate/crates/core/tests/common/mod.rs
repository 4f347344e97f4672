#![allow(dead_code)]

use macrophase_core::dense::DenseMatrix;
use macrophase_core::falsifier::sample_random_composite;
use macrophase_core::{Complex64, CompositeState, Grid, PhasePair, PointerWave};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn small_grid() -> Grid {
    Grid::new(64, -16.0, 16.0).unwrap()
}

pub fn random_state(seed: u64, n_branches: usize, normalized: bool) -> CompositeState {
    sample_random_composite(seed, n_branches, &small_grid(), normalized).unwrap()
}

/// Sum of `conj(a) b dq` written out independently of the library.
pub fn quad_inner(a: &[Complex64], b: &[Complex64], dq: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dq
}

pub fn fidelity(a: &PointerWave, b: &PointerWave) -> f64 {
    let dq = a.grid().dq();
    let ab = quad_inner(a.amplitudes(), b.amplitudes(), dq).norm_sqr();
    let aa = quad_inner(a.amplitudes(), a.amplitudes(), dq).re;
    let bb = quad_inner(b.amplitudes(), b.amplitudes(), dq).re;
    ab / (aa * bb)
}

/// Dense `A1`, `A2` on the flattened joint space (branch order of the state), built
/// from circulant translation blocks.
pub fn dense_phase_ops(state: &CompositeState, pair: &PhasePair) -> (DenseMatrix, DenseMatrix) {
    let grid = state.grid();
    let n = grid.n_points();
    let labels: Vec<u32> = state.branches().iter().map(|b| b.spec.label).collect();
    let translation = DenseMatrix::momentum_function(grid, |p| Complex64::from_polar(1.0, -p * (pair.shift_i - pair.shift_j)));
    let blocks: Vec<Vec<DenseMatrix>> = labels
        .iter()
        .map(|&r| {
            labels
                .iter()
                .map(|&col| if r == pair.i && col == pair.j { translation.clone() } else { DenseMatrix::zeros(n) })
                .collect()
        })
        .collect();
    let x = DenseMatrix::from_blocks(&blocks);
    let xd = x.adjoint();
    let a1 = (&x + &xd).scale(c(0.5, 0.0));
    let a2 = (&xd - &x).scale(c(0.0, 0.5));
    (a1, a2)
}

pub fn dense_expect(m: &DenseMatrix, v: &[Complex64], dq: f64) -> Complex64 {
    quad_inner(v, &m.mul_vec(v), dq)
}

pub fn joint_vector(state: &CompositeState) -> Vec<Complex64> {
    state
        .branches()
        .iter()
        .flat_map(|b| b.wave.amplitudes().iter().map(move |a| a * b.spec.coefficient))
        .collect()
}
