#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use oblique::ambient::{DenseOperator, DenseTerm, GridHamiltonian, Well};
use oblique::basis::{BasisFamily, ChainOrbital, FrameSource, Grid, Law, MixedFamily, SmoothMix};
use oblique::tensor_core::{c, CMat, CVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cvec(n: usize, rng: &mut impl Rng) -> CVec {
    DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_cmat(n: usize, m: usize, rng: &mut impl Rng) -> CMat {
    DMatrix::from_fn(n, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    let a = random_cmat(n, n, rng);
    (&a + a.adjoint()).unscale(2.0)
}

pub fn rotating() -> BasisFamily {
    BasisFamily::Rotating2d {
        theta: Law::Poly {
            coeffs: vec![0.3, 0.7, 0.2],
        },
        ambient_dim: 3,
    }
}

pub fn breathing() -> BasisFamily {
    BasisFamily::Breathing2d {
        alpha1: Law::Sine {
            offset: 2.0,
            amplitude: 0.5,
            omega: 1.3,
            phase: 0.2,
        },
        alpha2: Law::Poly {
            coeffs: vec![1.0, 0.4, 0.1],
        },
        ambient_dim: 2,
    }
}

pub fn overlap_law() -> Law {
    Law::Sine {
        offset: 0.5,
        amplitude: 0.2,
        omega: 1.1,
        phase: 0.0,
    }
}

pub fn overlap_symmetric() -> BasisFamily {
    BasisFamily::OverlapPairSymmetric {
        overlap: overlap_law(),
        width: 1.0,
        grid: Grid::default(),
    }
}

pub fn overlap_pinned() -> BasisFamily {
    BasisFamily::OverlapPairPinned {
        overlap: overlap_law(),
        width: 1.0,
        anchor: 0.0,
        grid: Grid::default(),
    }
}

/// Three complex-momentum Gaussians driven by two parameters.
pub fn chain() -> BasisFamily {
    BasisFamily::GaussianChain {
        orbitals: vec![
            ChainOrbital {
                center: -1.5,
                width: 1.0,
                momentum: 0.3,
            },
            ChainOrbital {
                center: 0.0,
                width: 0.8,
                momentum: -0.2,
            },
            ChainOrbital {
                center: 1.5,
                width: 1.2,
                momentum: 0.5,
            },
        ],
        center_coupling: vec![vec![0.5, 0.0, -0.3], vec![0.1, 0.4, 0.2]],
        width_coupling: Some(vec![vec![0.1, 0.0, 0.0], vec![0.0, 0.2, -0.1]]),
        grid: Grid::default(),
    }
}

pub fn sphere() -> BasisFamily {
    BasisFamily::TwoLevelSphere { field: 1.0 }
}

/// Every model family, labelled.
pub fn model_families() -> Vec<(&'static str, BasisFamily)> {
    vec![
        ("rotating2d", rotating()),
        ("breathing2d", breathing()),
        ("overlap_pair_symmetric", overlap_symmetric()),
        ("overlap_pair_pinned", overlap_pinned()),
        ("gaussian_chain", chain()),
        ("two_level_sphere", sphere()),
    ]
}

pub fn mixed(inner: BasisFamily, seed: u64, strength: f64) -> MixedFamily {
    let mut r = rng(seed);
    let n = inner.dim();
    let p = inner.n_params();
    MixedFamily::new(Arc::new(inner), SmoothMix::random(n, p, strength, &mut r)).unwrap()
}

/// Grid Hamiltonian with two wells that follow the chain parameters.
pub fn chain_hamiltonian(n_coords: usize) -> GridHamiltonian {
    GridHamiltonian {
        grid: Grid::default(),
        mass: 1.0,
        wells: vec![
            Well {
                center: -1.0,
                depth: 1.5,
                width: 1.0,
                coupling: vec![0.6, -0.2][..n_coords].to_vec(),
            },
            Well {
                center: 1.2,
                depth: 1.0,
                width: 0.7,
                coupling: vec![-0.3, 0.5][..n_coords].to_vec(),
            },
        ],
        n_coords,
    }
}

/// Dense Hermitian `H(x) = H₀ + Σ_i sin(x_i) H_i` on a small ambient space.
pub fn dense_hamiltonian(m: usize, n_coords: usize, seed: u64) -> DenseOperator {
    let mut r = rng(seed);
    let base = random_hermitian(m, &mut r);
    let terms = (0..n_coords)
        .map(|i| DenseTerm {
            matrix: random_hermitian(m, &mut r),
            law: Law::Sine {
                offset: 0.0,
                amplitude: 1.0,
                omega: 1.0,
                phase: 0.0,
            },
            coord: i,
        })
        .collect();
    DenseOperator::new(base, terms, n_coords).unwrap()
}

/// `cos(t) 1 − i sin(t) σ_x`.
pub fn exp_sigma_x(t: f64) -> CMat {
    DMatrix::from_row_slice(2, 2, &[c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)])
}

pub fn sigma_x() -> CMat {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn rel(a: f64, scale: f64) -> f64 {
    a / (1.0 + scale)
}
