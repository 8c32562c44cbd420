mod common;

use std::sync::Arc;

use common::*;
use oblique::basis::{frame_derivatives, DerivativeScheme, FrameSource};
use oblique::connection::{christoffel, verify_connection_identities};
use oblique::curvature::{christoffel_at, riemann, trace_cancellation_residual};
use oblique::propagators::{
    loglog_fit, reorthonormalize, step, PropagationModel, PropagatorKind, PropagatorTag, StateBundle, TimeHamiltonian,
    Trajectory,
};
use oblique::tensor_core::{
    convert_rep, herm_sqrt_pair, identity, lower_bra, max_abs, raise_ket, BasisFrame, CMat, Operator, Rep, StateKet,
};
use proptest::prelude::*;

fn random_frame(m: usize, n: usize, seed: u64) -> BasisFrame {
    let mut r = rng(seed);
    BasisFrame::from_columns(random_cmat(m, n, &mut r), vec![]).unwrap()
}

/// A frame that never moves.
struct Frozen(CMat);

impl FrameSource for Frozen {
    fn n_params(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        self.0.ncols()
    }
    fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }
    fn vectors(&self, _r: &[f64]) -> oblique::Result<CMat> {
        Ok(self.0.clone())
    }
    fn analytic_derivatives(&self, _r: &[f64]) -> oblique::Result<Vec<CMat>> {
        Ok(vec![CMat::zeros(self.0.nrows(), self.0.ncols())])
    }
    fn sample_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }
}

struct Fixed(CMat);

impl TimeHamiltonian for Fixed {
    fn matrix(&self, _t: f64, _r: &[f64], _frame: &BasisFrame, _states: &CMat) -> oblique::Result<CMat> {
        Ok(self.0.clone())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_square_roots_reconstruct(seed in any::<u64>(), n in 1usize..6) {
        let f = random_frame(n + 2, n, seed);
        let (root, inv_root) = herm_sqrt_pair(f.metric()).unwrap();
        let scale = 1.0 + max_abs(f.metric());
        prop_assert!(max_abs(&(&root * &root - f.metric())) < 1e-10 * scale);
        prop_assert!(max_abs(&(&root * &inv_root - identity(n))) < 1e-8);
    }

    #[test]
    fn raise_lower_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let f = random_frame(n + 1, n, seed);
        let psi = StateKet::new(random_cvec(n, &mut rng(seed ^ 1)));
        let back = raise_ket(&lower_bra(&psi, &f).unwrap(), &f).unwrap();
        prop_assert!((back.comps - &psi.comps).norm() < 1e-8 * (1.0 + psi.comps.norm()));
    }

    #[test]
    fn representation_round_trip(seed in any::<u64>(), n in 1usize..5) {
        let f = random_frame(n + 2, n, seed);
        let h = Operator::matrix(random_hermitian(n, &mut rng(seed ^ 2)));
        for target in [Rep::Natural, Rep::UpperUpper] {
            let there = convert_rep(&h, &f, target).unwrap();
            let back = convert_rep(&there, &f, Rep::Matrix).unwrap();
            prop_assert!(max_abs(&(back.entries - &h.entries)) < 1e-8);
        }
    }

    #[test]
    fn projector_is_idempotent(seed in any::<u64>(), n in 1usize..5) {
        let f = random_frame(n + 3, n, seed);
        let p = f.projector();
        prop_assert!(max_abs(&(&p * &p - &p)) < 1e-9);
        prop_assert!(max_abs(&(&p - p.adjoint())) < 1e-9);
    }

    #[test]
    fn fixed_step_preserves_metric_norm(seed in any::<u64>(), n in 1usize..5, dt in 0.001f64..0.5) {
        let mut r = rng(seed);
        let v = random_cmat(n + 1, n, &mut r);
        let h = random_hermitian(n, &mut r);
        let frame = BasisFrame::from_columns(v.clone(), vec![0.0]).unwrap();
        let coeffs = reorthonormalize(&random_cmat(n, 1, &mut r), frame.metric()).unwrap();
        let model = PropagationModel {
            family: Arc::new(Frozen(v)),
            trajectory: Trajectory::time(),
            hamiltonian: Arc::new(Fixed(h)),
        };
        let b = StateBundle::new(coeffs, 0.0, frame).unwrap();
        let out = step(&PropagatorKind::new(PropagatorTag::CnFixed, dt), &b, &model).unwrap();
        prop_assert!(out.orthonormality_deviation() < 1e-9);
    }

    #[test]
    fn loglog_recovers_power(order in 0.5f64..4.0, amp in 0.01f64..100.0) {
        let xs = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| amp * x.powf(order)).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        prop_assert!((fit.order - order).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn identities_hold_on_mixed_chain(seed in any::<u64>(), strength in 0.0f64..0.8) {
        let fam = mixed(chain(), seed, strength);
        let point = fam.sample_point(&mut rng(seed ^ 3));
        let frame = fam.frame(&point).unwrap();
        let derivs = frame_derivatives(&fam, &point, DerivativeScheme::Analytic).unwrap();
        let chris = christoffel(&frame, &derivs).unwrap();
        let report = verify_connection_identities(&chris, &frame, &derivs).unwrap();
        prop_assert!(report.max() < 1e-9, "{:?}", report.entries());
        prop_assert!(trace_cancellation_residual(&christoffel_at(&fam, &point).unwrap()) < 1e-9);
    }

    #[test]
    fn curvature_is_antisymmetric_on_mixed_sphere(seed in any::<u64>(), strength in 0.0f64..0.8) {
        let fam = mixed(sphere(), seed, strength);
        let point = fam.sample_point(&mut rng(seed ^ 4));
        let tensor = riemann(&fam, &point, DerivativeScheme::Analytic).unwrap();
        prop_assert!(tensor.antisymmetry_residual() < 1e-10);
        let plain = riemann(&sphere(), &point, DerivativeScheme::Analytic).unwrap();
        // a one-state basis change multiplies by a scalar, so R is unchanged
        prop_assert!((tensor.r[0][1][(0, 0)] - plain.r[0][1][(0, 0)]).norm() < 1e-7);
    }
}
