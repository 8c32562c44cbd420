mod common;

use common::*;
use nalgebra::DMatrix;
use oblique::basis::{frame_derivatives, BasisFamily, DerivativeScheme, FrameSource, Law};
use oblique::connection::{
    christoffel, covariant_derivative_bra, covariant_derivative_ket, covariant_derivative_operator,
    parallel_transport_step, propagate_affine, propagate_components, propagate_projective, rotation_deformation_split,
    verify_connection_identities, ChristoffelSet, Variant,
};
use oblique::curvature::{christoffel_at, riemann};
use oblique::tensor_core::{c, identity, lower_bra, max_abs, max_abs_vec, CMat, CVec, Operator, Rep, StateKet};
use oblique::Error;

#[test]
fn rotating_connection_is_antisymmetric_rate() {
    let fam = rotating();
    let BasisFamily::Rotating2d { theta, .. } = &fam else { unreachable!() };
    let t = 0.6;
    let w = theta.d1(t);
    let d = christoffel_at(&fam, &[t]).unwrap().natural(0);
    let expected = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-w, 0.0), c(w, 0.0), c(0.0, 0.0)]);
    assert!(max_abs(&(d - expected)) < 1e-14);
}

#[test]
fn breathing_connection_is_log_rate() {
    let fam = breathing();
    let BasisFamily::Breathing2d { alpha1, alpha2, .. } = &fam else { unreachable!() };
    let t = 0.35;
    let d = christoffel_at(&fam, &[t]).unwrap().natural(0);
    assert!((d[(0, 0)].re - alpha1.d1(t) / alpha1.value(t)).abs() < 1e-14);
    assert!((d[(1, 1)].re - alpha2.d1(t) / alpha2.value(t)).abs() < 1e-14);
    assert!(d[(0, 1)].norm() + d[(1, 0)].norm() < 1e-15);
}

#[test]
fn symmetric_pair_connection_is_half_overlap_rate() {
    let t = 0.7;
    let sp = overlap_law().d1(t);
    let d = christoffel_at(&overlap_symmetric(), &[t]).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(sp / 2.0, 0.0), c(sp / 2.0, 0.0), c(0.0, 0.0)]);
    assert!(max_abs(&(d.down_down(0) - expected)) < 1e-8);
}

#[test]
fn identity_suite_holds_for_analytic_and_fd_derivatives() {
    let mut r = rng(20);
    for (name, fam) in model_families() {
        let point = fam.sample_point(&mut r);
        let frame = fam.frame(&point).unwrap();
        for (scheme, tol) in [(DerivativeScheme::Analytic, 1e-10), (DerivativeScheme::CentralFd { h: 1e-4 }, 1e-6)] {
            let derivs = frame_derivatives(&fam, &point, scheme).unwrap();
            let chris = christoffel(&frame, &derivs).unwrap();
            let report = verify_connection_identities(&chris, &frame, &derivs).unwrap();
            assert!(report.max() < tol, "{name}: {:?}", report.entries());
            assert_eq!(report.entries().len(), 4 + 4 + 8 + 6 + 2 + 8);
        }
    }
}

#[test]
fn rotating_metric_constancy_is_trivial() {
    let fam = rotating();
    let frame = fam.frame(&[0.2]).unwrap();
    let derivs = frame_derivatives(&fam, &[0.2], DerivativeScheme::Analytic).unwrap();
    let report = verify_connection_identities(&christoffel(&frame, &derivs).unwrap(), &frame, &derivs).unwrap();
    assert!(report.max_metric_residual() < 1e-15);
}

#[test]
fn variants_follow_the_shifting_rule() {
    let chris = christoffel_at(&chain(), &[0.1, 0.3]).unwrap();
    for i in 0..2 {
        let a = chris.variant(Variant::UpDownI, i);
        let b = chris.variant(Variant::UpIDown, i);
        assert!(max_abs(&(a + b)) < 1e-14);
        assert!(max_abs(&(chris.variant(Variant::DownDownI, i) - chris.variant(Variant::DownIDown, i).adjoint())) < 1e-15);
    }
}

#[test]
fn covariant_derivative_vanishes_without_connection() {
    let frame = BasisFamily::Rotating2d {
        theta: Law::constant(0.3),
        ambient_dim: 3,
    }
    .frame(&[0.0])
    .unwrap();
    let chris = ChristoffelSet::from_down_down(&frame, vec![CMat::zeros(2, 2)]).unwrap();
    let mut r = rng(1);
    let psi = StateKet::new(random_cvec(2, &mut r));
    let dpsi = vec![random_cvec(2, &mut r)];
    let cov = covariant_derivative_ket(&dpsi, &psi, &chris).unwrap();
    assert!((&cov[0] - &dpsi[0]).norm() == 0.0);
    let bra = lower_bra(&psi, &frame).unwrap();
    let cov = covariant_derivative_bra(&dpsi, &bra, &chris).unwrap();
    assert!((&cov[0] - &dpsi[0]).norm() == 0.0);
    let h = Operator::matrix(random_hermitian(2, &mut r));
    let dh = vec![random_hermitian(2, &mut r)];
    let cov = covariant_derivative_operator(&dh, &h, &chris, Rep::Matrix).unwrap();
    assert!(max_abs(&(&cov[0] - &dh[0])) == 0.0);
}

#[test]
fn fixed_ambient_state_has_zero_covariant_derivative() {
    let fam = BasisFamily::Rotating2d {
        theta: Law::Poly {
            coeffs: vec![0.1, 1.3, -0.4],
        },
        ambient_dim: 2,
    };
    let t = 0.45;
    let v = CVec::from_vec(vec![c(0.3, 0.2), c(-0.7, 0.1)]);
    let frame = fam.frame(&[t]).unwrap();
    let derivs = frame_derivatives(&fam, &[t], DerivativeScheme::Analytic).unwrap();
    let psi = StateKet::new(frame.inv_metric() * (frame.vectors().adjoint() * &v));
    let dpsi = vec![derivs.d_vectors[0].adjoint() * &v];
    let chris = christoffel(&frame, &derivs).unwrap();
    let cov = covariant_derivative_ket(&dpsi, &psi, &chris).unwrap();
    assert!(max_abs_vec(&dpsi[0]) > 0.1);
    assert!(max_abs_vec(&cov[0]) < 1e-14);
}

#[test]
fn identity_operator_is_covariantly_constant() {
    let chris = christoffel_at(&mixed(chain(), 4, 0.5), &[0.2, 0.1]).unwrap();
    let zero = vec![CMat::zeros(3, 3); 2];
    let cov = covariant_derivative_operator(&zero, &Operator::natural(identity(3)), &chris, Rep::Natural).unwrap();
    assert!(cov.iter().all(|m| max_abs(m) < 1e-15));
}

#[test]
fn covariant_metric_vanishes_in_matrix_and_upper_upper_placement() {
    let fam = mixed(chain(), 5, 0.5);
    let r = [0.3, -0.2];
    let chris = christoffel_at(&fam, &r).unwrap();
    let frame = chris.frame().clone();
    let ds: Vec<CMat> = (0..2).map(|i| chris.metric_derivative(i)).collect();
    let cov = covariant_derivative_operator(&ds, &Operator::matrix(frame.metric().clone()), &chris, Rep::Matrix).unwrap();
    assert!(cov.iter().all(|m| max_abs(m) < 1e-10));
    let dsi: Vec<CMat> = (0..2).map(|i| chris.inv_metric_derivative(i)).collect();
    let uu = Operator::new(frame.inv_metric().clone(), Rep::UpperUpper);
    let cov = covariant_derivative_operator(&dsi, &uu, &chris, Rep::UpperUpper).unwrap();
    assert!(cov.iter().all(|m| max_abs(m) < 1e-10));
}

#[test]
fn operator_rep_must_match() {
    let chris = christoffel_at(&breathing(), &[0.1]).unwrap();
    let h = Operator::natural(identity(2));
    let err = covariant_derivative_operator(&[CMat::zeros(2, 2)], &h, &chris, Rep::Matrix).unwrap_err();
    assert!(matches!(err, Error::RepMismatch { .. }));
    let err = covariant_derivative_ket(&[CVec::zeros(3)], &StateKet::new(CVec::zeros(2)), &chris).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }));
}

#[test]
fn parallel_transport_with_zero_connection_is_identity() {
    let frame = breathing().frame(&[0.0]).unwrap();
    let chris = ChristoffelSet::from_down_down(&frame, vec![CMat::zeros(2, 2)]).unwrap();
    let psi = StateKet::from_slice(&[c(0.3, 0.1), c(0.5, -0.2)]);
    let out = parallel_transport_step(&psi, &chris, &[0.1]).unwrap();
    assert_eq!(out, psi);
}

#[test]
fn parallel_transport_keeps_orthogonality_to_second_order() {
    let fam = rotating();
    let drift = |dt: f64| {
        let chris = christoffel_at(&fam, &[0.3]).unwrap();
        let a = parallel_transport_step(&StateKet::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]), &chris, &[dt]).unwrap();
        let b = parallel_transport_step(&StateKet::from_slice(&[c(0.0, 0.0), c(1.0, 0.0)]), &chris, &[dt]).unwrap();
        let frame = fam.frame(&[0.3 + dt]).unwrap();
        let overlap = |x: &StateKet, y: &StateKet| lower_bra(x, &frame).unwrap().contract(y);
        (overlap(&a, &b).norm()).max((overlap(&a, &a) - c(1.0, 0.0)).norm())
    };
    let ratio = drift(1e-2) / drift(5e-3);
    assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
}

/// RK4 transport of components along a straight segment.
fn transport_segment(fam: &dyn FrameSource, start: &[f64], delta: &[f64], psi: CVec, substeps: usize) -> CVec {
    let rhs = |s: f64, y: &CVec| -> CVec {
        let point: Vec<f64> = start.iter().zip(delta).map(|(a, d)| a + s * d).collect();
        let chris = christoffel_at(fam, &point).unwrap();
        let mut out = CVec::zeros(y.len());
        for (i, d) in delta.iter().enumerate() {
            out -= (chris.natural(i) * y).scale(*d);
        }
        out
    };
    let h = 1.0 / substeps as f64;
    let mut y = psi;
    for k in 0..substeps {
        let s = k as f64 * h;
        let k1 = rhs(s, &y);
        let k2 = rhs(s + h / 2.0, &(&y + k1.scale(h / 2.0)));
        let k3 = rhs(s + h / 2.0, &(&y + k2.scale(h / 2.0)));
        let k4 = rhs(s + h, &(&y + k3.scale(h)));
        y += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    y
}

#[test]
fn loop_holonomy_matches_curvature() {
    let fam = chain();
    let center = [0.1, -0.1];
    let psi0 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let curvature = riemann(&fam, &center, DerivativeScheme::Analytic).unwrap();
    let residual = |eps: f64| {
        let corner = [center[0] - eps / 2.0, center[1] - eps / 2.0];
        let legs = [[eps, 0.0], [0.0, eps], [-eps, 0.0], [0.0, -eps]];
        let mut at = corner.to_vec();
        let mut psi = psi0.clone();
        for leg in legs {
            psi = transport_segment(&fam, &at, &leg, psi, 8);
            at = at.iter().zip(leg).map(|(a, d)| a + d).collect();
        }
        let predicted = &psi0 - (&curvature.r[0][1] * &psi0).scale(eps * eps);
        max_abs_vec(&(psi - predicted))
    };
    let (coarse, fine) = (residual(0.1), residual(0.05));
    assert!(coarse < 1e-2 * 0.1 * 0.1, "holonomy residual {coarse:e}");
    assert!(coarse / fine > 7.0, "ratio {}", coarse / fine);
}

#[test]
fn rotation_and_deformation_parts() {
    let (rot, def) = rotation_deformation_split(&christoffel_at(&rotating(), &[0.2]).unwrap());
    assert!(max_abs(&def[0]) < 1e-15 && max_abs(&rot[0]) > 0.1);
    let (rot, def) = rotation_deformation_split(&christoffel_at(&breathing(), &[0.2]).unwrap());
    assert!(max_abs(&rot[0]) < 1e-15 && max_abs(&def[0]) > 0.1);
    let chris = christoffel_at(&chain(), &[0.2, 0.4]).unwrap();
    let (rot, def) = rotation_deformation_split(&chris);
    for i in 0..2 {
        assert!(max_abs(&(&rot[i] + &def[i] - chris.down_down(i))) < 1e-15);
        assert!(max_abs(&(&rot[i] + rot[i].adjoint())) < 1e-12);
        assert!(max_abs(&(&def[i] - def[i].adjoint())) < 1e-12);
    }
    let t = 0.3;
    let diff = christoffel_at(&overlap_pinned(), &[t]).unwrap().down_down(0) - christoffel_at(&overlap_symmetric(), &[t]).unwrap().down_down(0);
    assert!(max_abs(&(&diff + diff.adjoint())) < 1e-6);
}

#[test]
fn propagation_forms_agree_to_second_order() {
    let fam = chain();
    let r = [0.1, 0.2];
    let frame = fam.frame(&r).unwrap();
    let derivs = frame_derivatives(&fam, &r, DerivativeScheme::Analytic).unwrap();
    let chris = christoffel(&frame, &derivs).unwrap();
    let mut rg = rng(33);
    let psi = StateKet::new(random_cvec(3, &mut rg));
    let dpsi = vec![random_cvec(3, &mut rg), random_cvec(3, &mut rg)];
    let gap = |h: f64| {
        let dr = [h, -0.5 * h];
        let to = fam.frame(&[r[0] + dr[0], r[1] + dr[1]]).unwrap();
        let a = propagate_components(&psi, &dpsi, &dr).unwrap();
        let b = propagate_projective(&frame, &derivs, &to, &psi, &dpsi, &dr).unwrap();
        let c = propagate_affine(&to, &chris, &psi, &dpsi, &dr).unwrap();
        max_abs_vec(&(&a.comps - &b.comps)).max(max_abs_vec(&(&a.comps - &c.comps)))
    };
    let ratio = gap(1e-3) / gap(5e-4);
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}
