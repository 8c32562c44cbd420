//! Built-in families for `oblique verify <family>`.

use oblique::basis::{BasisFamily, ChainOrbital, Grid, Law};

pub const NAMES: [&str; 6] = [
    "rotating2d",
    "breathing2d",
    "overlap_pair_symmetric",
    "overlap_pair_pinned",
    "gaussian_chain",
    "two_level_sphere",
];

fn overlap() -> Law {
    Law::Sine {
        offset: 0.5,
        amplitude: 0.2,
        omega: 1.1,
        phase: 0.0,
    }
}

pub fn family(name: &str) -> Option<BasisFamily> {
    Some(match name {
        "rotating2d" => BasisFamily::Rotating2d {
            theta: Law::Poly {
                coeffs: vec![0.3, 0.7, 0.2],
            },
            ambient_dim: 3,
        },
        "breathing2d" => BasisFamily::Breathing2d {
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
        },
        "overlap_pair_symmetric" => BasisFamily::OverlapPairSymmetric {
            overlap: overlap(),
            width: 1.0,
            grid: Grid::default(),
        },
        "overlap_pair_pinned" => BasisFamily::OverlapPairPinned {
            overlap: overlap(),
            width: 1.0,
            anchor: 0.0,
            grid: Grid::default(),
        },
        "gaussian_chain" => BasisFamily::GaussianChain {
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
        },
        "two_level_sphere" => BasisFamily::TwoLevelSphere { field: 1.0 },
        _ => return None,
    })
}
