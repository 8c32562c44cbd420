mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use oblique::ambient::{DenseOperator, GridHamiltonian, Well};
use oblique::basis::{BasisFamily, ChainOrbital, Grid, Law};
use oblique::forces::{
    eigen_at, eigenvalue_fd, hamiltonian_at, hf_derivative, pulay_decomposition, solve_generalized_eigen, HfFormula,
};
use oblique::tensor_core::{c, identity, BasisFrame, Operator};
use oblique::Error;

fn plane() -> BasisFrame {
    BasisFrame::from_columns(identity(2), vec![]).unwrap()
}

fn overlap_frame(s: f64) -> BasisFrame {
    let v = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(s, 0.0), c(0.0, 0.0), c((1.0 - s * s).sqrt(), 0.0)]);
    BasisFrame::from_columns(v, vec![]).unwrap()
}

fn static_plane() -> BasisFamily {
    BasisFamily::Rotating2d {
        theta: Law::constant(0.2),
        ambient_dim: 2,
    }
}

fn centered_chain(widths: &[f64]) -> BasisFamily {
    BasisFamily::GaussianChain {
        orbitals: widths
            .iter()
            .map(|&width| ChainOrbital {
                center: 0.0,
                width,
                momentum: 0.0,
            })
            .collect(),
        center_coupling: vec![vec![1.0; widths.len()]],
        width_coupling: None,
        grid: Grid::default(),
    }
}

fn moving_well() -> GridHamiltonian {
    GridHamiltonian {
        grid: Grid::default(),
        mass: 1.0,
        wells: vec![Well {
            center: 0.0,
            depth: 2.0,
            width: 0.9,
            coupling: vec![1.0],
        }],
        n_coords: 1,
    }
}

#[test]
fn diagonal_hamiltonian_in_orthonormal_frame() {
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
    let sols = solve_generalized_eigen(&Operator::matrix(h), &plane()).unwrap();
    assert!((sols[0].energy - 1.0).abs() < 1e-15 && (sols[1].energy - 2.0).abs() < 1e-15);
    assert!((sols[0].ket.comps[1] - c(1.0, 0.0)).norm() < 1e-15);
    assert!((sols[0].gap - 1.0).abs() < 1e-15);
}

#[test]
fn overlapping_pencil_closed_form() {
    let s = 0.3;
    let frame = overlap_frame(s);
    let sols = solve_generalized_eigen(&Operator::matrix(sigma_x()), &frame).unwrap();
    assert!((sols[0].energy + 1.0 / (1.0 - s)).abs() < 1e-13);
    assert!((sols[1].energy - 1.0 / (1.0 + s)).abs() < 1e-13);
    for sol in &sols {
        assert!(sol.residual(&sigma_x(), &frame) < 1e-13);
        assert!(sol.ket.comps.iter().all(|z| z.im.abs() < 1e-15));
    }
}

#[test]
fn eigenvectors_are_metric_orthonormal() {
    let mut r = rng(81);
    let frame = BasisFrame::from_columns(random_cmat(6, 4, &mut r), vec![]).unwrap();
    let h = random_hermitian(4, &mut r);
    let sols = solve_generalized_eigen(&Operator::matrix(h.clone()), &frame).unwrap();
    for a in &sols {
        assert!(a.residual(&h, &frame) < 1e-10);
        for b in &sols {
            let overlap = (a.ket.comps.adjoint() * frame.metric() * &b.ket.comps)[(0, 0)];
            let expected = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
            assert!((overlap - c(expected, 0.0)).norm() < 1e-10);
        }
    }
    assert!(sols.windows(2).all(|w| w[0].energy <= w[1].energy));
}

#[test]
fn natural_operator_is_rejected() {
    let err = solve_generalized_eigen(&Operator::natural(identity(2)), &plane()).unwrap_err();
    assert!(matches!(err, Error::RepMismatch { .. }));
}

#[test]
fn parameter_independent_problem_has_no_force() {
    let mut r = rng(82);
    let op = DenseOperator::constant(random_hermitian(2, &mut r), 1);
    let fam = static_plane();
    let sol = &eigen_at(&fam, &op, &[0.4]).unwrap()[0];
    for formula in HfFormula::ALL {
        assert!(hf_derivative(sol, &fam, &op, &[0.4], formula).unwrap()[0].abs() < 1e-14);
    }
    let terms = pulay_decomposition(sol, &fam, &op, &[0.4]).unwrap()[0];
    assert!(terms.hellmann.abs() + terms.pulay_in_space.abs() + terms.pulay_out_of_space.abs() < 1e-14);
}

#[test]
fn chain_forces_match_finite_differences() {
    let fam = chain();
    let op = chain_hamiltonian(2);
    let r = [0.15, -0.1];
    let sols = eigen_at(&fam, &op, &r).unwrap();
    for index in 0..2 {
        let fd = eigenvalue_fd(&fam, &op, &r, index, 1e-4).unwrap();
        for formula in HfFormula::ALL {
            let hf = hf_derivative(&sols[index], &fam, &op, &r, formula).unwrap();
            for (a, b) in hf.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{formula:?} state {index}: {a} vs {b}");
            }
        }
        let total: Vec<f64> = pulay_decomposition(&sols[index], &fam, &op, &r).unwrap().iter().map(|t| t.total()).collect();
        for (a, b) in total.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn breathing_frame_with_fixed_operator() {
    let fam = breathing();
    let op = dense_hamiltonian(2, 1, 83);
    let r = [0.3];
    let sols = eigen_at(&fam, &op, &r).unwrap();
    let values: Vec<f64> = HfFormula::ALL
        .iter()
        .map(|f| hf_derivative(&sols[0], &fam, &op, &r, *f).unwrap()[0])
        .collect();
    assert!((values[0] - values[1]).abs() < 1e-10 && (values[0] - values[2]).abs() < 1e-10);
    // The frame spans the whole space, so nothing leaks out of it.
    let terms = pulay_decomposition(&sols[0], &fam, &op, &r).unwrap()[0];
    assert!(terms.pulay_out_of_space.abs() < 1e-12);
    assert!(terms.pulay_in_space.abs() < 1e-10);
    assert!((terms.total() - values[0]).abs() < 1e-10);
}

#[test]
fn static_frame_has_no_pulay_terms() {
    let fam = static_plane();
    let op = dense_hamiltonian(2, 1, 84);
    let r = [0.6];
    let sol = &eigen_at(&fam, &op, &r).unwrap()[1];
    let terms = pulay_decomposition(sol, &fam, &op, &r).unwrap()[0];
    assert!(terms.pulay_in_space.abs() < 1e-14 && terms.pulay_out_of_space.abs() < 1e-14);
    let fd = eigenvalue_fd(&fam, &op, &r, 1, 1e-5).unwrap()[0];
    assert!((terms.hellmann - fd).abs() < 1e-8);
}

#[test]
fn richer_basis_shrinks_the_out_of_space_term() {
    let op = moving_well();
    let r = [0.25];
    let mut previous = f64::INFINITY;
    for widths in [&[1.0][..], &[1.0, 0.5], &[1.0, 0.5, 2.0]] {
        let fam = centered_chain(widths);
        let sol = &eigen_at(&fam, &op, &r).unwrap()[0];
        let terms = pulay_decomposition(sol, &fam, &op, &r).unwrap()[0];
        let out = terms.pulay_out_of_space.abs();
        assert!(out < previous, "{widths:?}: {out:e} vs {previous:e}");
        previous = out;
    }
}

#[test]
fn degenerate_state_is_rejected() {
    let fam = static_plane();
    let op = DenseOperator::constant(identity(2), 1);
    let sol = &eigen_at(&fam, &op, &[0.0]).unwrap()[0];
    assert!(matches!(
        hf_derivative(sol, &fam, &op, &[0.0], HfFormula::MatrixRaw),
        Err(Error::DegenerateState { .. })
    ));
    assert!(matches!(pulay_decomposition(sol, &fam, &op, &[0.0]), Err(Error::DegenerateState { .. })));
}

#[test]
fn argument_errors() {
    let fam = chain();
    let op = chain_hamiltonian(2);
    assert!(eigenvalue_fd(&fam, &op, &[0.0, 0.0], 0, 0.0).is_err());
    assert!(eigenvalue_fd(&fam, &op, &[0.0, 0.0], 7, 1e-4).is_err());
    assert!(matches!(hamiltonian_at(&fam, &op, &[0.0]), Err(Error::DimensionMismatch { .. })));
    let (frame, h) = hamiltonian_at(&fam, &op, &[0.0, 0.0]).unwrap();
    assert_eq!(frame.dim(), 3);
    assert!(oblique::tensor_core::max_abs(&(&h.entries - h.entries.adjoint())) == 0.0);
}
