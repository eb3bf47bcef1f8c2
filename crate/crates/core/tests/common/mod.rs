#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zeno_core::{CMatrix, ChainParams, QuadraticHamiltonian, Statistics};

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(rng.gen_range(-scale..=scale));
        for j in i + 1..n {
            let z = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            let z = z * (scale * rng.gen_range(0.0..=1.0) / z.norm().max(1e-300));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `exp(-i M t)` by scaling and squaring of a truncated Taylor series.
pub fn expm_taylor(m: &CMatrix, t: f64) -> CMatrix {
    let n = m.nrows();
    let a = m.map(|z| z * Complex64::new(0.0, -t));
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil().max(0.0) as i32) + 1;
    let a = a.unscale(2f64.powi(squarings));
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / c(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `conj(U) rho U^T`.
pub fn step(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    u.map(|z| z.conj()) * rho * u.transpose()
}

/// Random fermionic SPDM from a random unitary and occupations in `[0, 1]`.
pub fn random_spdm(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let u = expm_taylor(&random_hermitian(rng, n, 1.0), 1.7);
    let occ = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|_| c(rng.gen_range(0.0..=1.0))),
    ));
    let rho = &u * occ * u.adjoint();
    (&rho + rho.adjoint()).scale(0.5)
}

pub fn random_closed_pairs(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a..n {
            if rng.gen_bool(p) {
                pairs.push((a, b));
                if a != b {
                    pairs.push((b, a));
                }
            }
        }
    }
    pairs
}

pub fn chain(omega0: f64, coupling: f64, n_bath: usize) -> QuadraticHamiltonian {
    QuadraticHamiltonian::single_level_chain(ChainParams::new(omega0, 1.0, coupling, n_bath))
        .unwrap()
}

/// Level 0 coupled to the rest of a random Hermitian matrix.
pub fn random_single_level(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> QuadraticHamiltonian {
    QuadraticHamiltonian::new(
        random_hermitian(rng, n, scale),
        vec![0],
        (1..n).collect(),
        Statistics::Fermion,
    )
    .unwrap()
}

/// Bath mode energies and couplings `g_k = sum_x M_0x <x|k>` from a real
/// or complex environment block, computed directly with nalgebra.
pub fn bath_modes(h: &QuadraticHamiltonian) -> (Vec<f64>, Vec<Complex64>) {
    let env = h.env();
    let block = DMatrix::from_fn(env.len(), env.len(), |i, j| h.matrix()[(env[i], env[j])]);
    let eig = SymmetricEigen::new(block);
    let g = (0..env.len())
        .map(|k| {
            env.iter()
                .enumerate()
                .map(|(a, &x)| h.matrix()[(0, x)] * eig.eigenvectors[(a, k)])
                .sum()
        })
        .collect();
    (eig.eigenvalues.as_slice().to_vec(), g)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}
