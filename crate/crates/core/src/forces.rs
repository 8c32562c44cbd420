//! Energy derivatives with respect to frame parameters.
//!
//! The Hamiltonian is an ambient operator `H(R)` and the frame `V(R)` moves
//! with the same parameters. Writing `H_m = V†HV` for the matrix
//! representation and `D = D_{••i}`:
//!
//! - natural covariant: `∂E = ψ_μ (ð_i H)^μ_ν ψ^ν`
//! - matrix raw: `∂E = ψ†[∂H_m − E(D + D†)]ψ`
//! - matrix covariant: `∂E = ψ†(ð_i H)_{••}ψ`

use serde::{Deserialize, Serialize};

use crate::ambient::AmbientOperator;
use crate::basis::{frame_derivatives, shifted, DerivativeScheme, FrameSource};
use crate::connection::{christoffel, covariant_derivative_operator, ChristoffelSet};
use crate::error::{Error, Result};
use crate::tensor_core::{
    check_len, check_square, hermitian_eigh, hermitian_part, herm_sqrt_pair, BasisFrame, CMat, Operator, Rep,
    StateKet, C64,
};

/// Smallest eigenvalue gap for which a single-state derivative is defined.
pub const DEGENERACY_GAP_TOL: f64 = 1e-8;

/// One eigenpair of `H ψ = E S ψ`.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub energy: f64,
    /// Normalized so that `ψ† S ψ = 1`, largest component real positive.
    pub ket: StateKet,
    /// Distance to the nearest other eigenvalue, infinite for `N = 1`.
    pub gap: f64,
}

impl EigenSolution {
    /// `‖Hψ − E Sψ‖_∞`.
    pub fn residual(&self, h: &CMat, frame: &BasisFrame) -> f64 {
        let r = h * &self.ket.comps - frame.metric() * &self.ket.comps * C64::from(self.energy);
        r.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn fix_phase(v: &mut crate::tensor_core::CVec) {
    let mut best = 0;
    for k in 0..v.len() {
        if v[k].norm() > v[best].norm() {
            best = k;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        *v *= phase;
    }
}

/// Full spectrum of the pencil `(H_m, S)`, sorted ascending.
///
/// Reduced to a Hermitian problem with `X = S^{-1/2}`: `X H X y = E y`,
/// `ψ = X y`.
pub fn solve_generalized_eigen(h: &Operator, frame: &BasisFrame) -> Result<Vec<EigenSolution>> {
    h.expect_rep(Rep::Matrix)?;
    let n = frame.dim();
    check_square("generalized eigenproblem", n, &h.entries)?;
    let (_, x) = herm_sqrt_pair(frame.metric())?;
    let reduced = hermitian_part(&(&x * &h.entries * &x));
    let (values, vectors) = hermitian_eigh(&reduced);
    let coeffs = x * vectors;
    Ok((0..n)
        .map(|k| {
            let mut v = coeffs.column(k).into_owned();
            let norm = (v.adjoint() * frame.metric() * &v)[(0, 0)].re.sqrt();
            v.unscale_mut(norm);
            fix_phase(&mut v);
            let below = if k > 0 { values[k] - values[k - 1] } else { f64::INFINITY };
            let above = if k + 1 < n { values[k + 1] - values[k] } else { f64::INFINITY };
            EigenSolution {
                energy: values[k],
                ket: StateKet::new(v),
                gap: below.min(above),
            }
        })
        .collect())
}

/// Frame and matrix-representation Hamiltonian at `r`.
pub fn hamiltonian_at(family: &dyn FrameSource, op: &dyn AmbientOperator, r: &[f64]) -> Result<(BasisFrame, Operator)> {
    check_len("hamiltonian coordinates", op.n_coords(), r.len())?;
    let frame = family.frame(r)?;
    let v = frame.vectors();
    let h = hermitian_part(&op.sandwich(r, v, v)?);
    Ok((frame, Operator::matrix(h)))
}

/// Eigenpairs at `r`.
pub fn eigen_at(family: &dyn FrameSource, op: &dyn AmbientOperator, r: &[f64]) -> Result<Vec<EigenSolution>> {
    let (frame, h) = hamiltonian_at(family, op, r)?;
    solve_generalized_eigen(&h, &frame)
}

/// Hellmann–Feynman route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HfFormula {
    NaturalCovariant,
    MatrixRaw,
    MatrixCovariant,
}

impl HfFormula {
    pub const ALL: [HfFormula; 3] = [HfFormula::NaturalCovariant, HfFormula::MatrixRaw, HfFormula::MatrixCovariant];
}

/// Quantities shared by the derivative formulas at one point.
struct ForceContext {
    frame: BasisFrame,
    chris: ChristoffelSet,
    d_vectors: Vec<CMat>,
    h_matrix: CMat,
    /// `∂_i H_m = ∂V†HV + V†∂H V + V†H∂V`.
    dh_matrix: Vec<CMat>,
    /// `V†(∂_i H)V`.
    hellmann_blocks: Vec<CMat>,
    /// `H V`.
    hv: CMat,
}

fn context(family: &dyn FrameSource, op: &dyn AmbientOperator, r: &[f64]) -> Result<ForceContext> {
    check_len("force coordinates", op.n_coords(), r.len())?;
    check_len("force parameters", family.n_params(), r.len())?;
    let frame = family.frame(r)?;
    let derivs = frame_derivatives(family, r, DerivativeScheme::Analytic)?;
    let chris = christoffel(&frame, &derivs)?;
    let v = frame.vectors();
    let hv = op.apply(r, v)?;
    let h_matrix = hermitian_part(&(v.adjoint() * &hv));
    let mut dh_matrix = Vec::with_capacity(r.len());
    let mut hellmann_blocks = Vec::with_capacity(r.len());
    for (i, dv) in derivs.d_vectors.iter().enumerate() {
        let explicit = v.adjoint() * op.apply_derivative(r, i, v)?;
        let moving = dv.adjoint() * &hv;
        dh_matrix.push(&explicit + &moving + moving.adjoint());
        hellmann_blocks.push(explicit);
    }
    Ok(ForceContext {
        frame,
        chris,
        d_vectors: derivs.d_vectors,
        h_matrix,
        dh_matrix,
        hellmann_blocks,
        hv,
    })
}

fn expectation(psi: &StateKet, m: &CMat) -> C64 {
    (psi.comps.adjoint() * m * &psi.comps)[(0, 0)]
}

fn check_isolated(sol: &EigenSolution) -> Result<()> {
    if sol.gap < DEGENERACY_GAP_TOL {
        return Err(Error::DegenerateState { gap: sol.gap });
    }
    Ok(())
}

/// `∂_i E` for each parameter through the chosen formula.
pub fn hf_derivative(
    sol: &EigenSolution,
    family: &dyn FrameSource,
    op: &dyn AmbientOperator,
    r: &[f64],
    formula: HfFormula,
) -> Result<Vec<f64>> {
    check_isolated(sol)?;
    let ctx = context(family, op, r)?;
    check_len("eigen solution", ctx.frame.dim(), sol.ket.len())?;
    let psi = &sol.ket;
    let s = ctx.frame.metric();
    let si = ctx.frame.inv_metric();
    let out = match formula {
        HfFormula::NaturalCovariant => {
            let h_nat = Operator::natural(si * &ctx.h_matrix);
            let dh_nat: Vec<CMat> = (0..ctx.chris.n_params())
                .map(|i| ctx.chris.inv_metric_derivative(i) * &ctx.h_matrix + si * &ctx.dh_matrix[i])
                .collect();
            covariant_derivative_operator(&dh_nat, &h_nat, &ctx.chris, Rep::Natural)?
                .iter()
                .map(|d| expectation(psi, &(s * d)).re)
                .collect()
        }
        HfFormula::MatrixRaw => (0..ctx.chris.n_params())
            .map(|i| {
                let ds = ctx.chris.metric_derivative(i);
                expectation(psi, &(&ctx.dh_matrix[i] - ds * C64::from(sol.energy))).re
            })
            .collect(),
        HfFormula::MatrixCovariant => {
            let h = Operator::matrix(ctx.h_matrix.clone());
            covariant_derivative_operator(&ctx.dh_matrix, &h, &ctx.chris, Rep::Matrix)?
                .iter()
                .map(|d| expectation(psi, d).re)
                .collect()
        }
    };
    Ok(out)
}

/// Split of `∂_i E` into the explicit operator derivative and basis terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulayTerms {
    /// `ψ_μ⟨e^μ|∂_iH|e_ν⟩ψ^ν`.
    pub hellmann: f64,
    /// `ψ_μ(H D − D H)^μ_ν ψ^ν`, zero for exact eigenstates.
    pub pulay_in_space: f64,
    /// `ψ_μ[⟨∂_i e^μ|Q H|e_ν⟩ + ⟨e^μ|H Q|∂_i e_ν⟩]ψ^ν`.
    pub pulay_out_of_space: f64,
}

impl PulayTerms {
    pub fn total(&self) -> f64 {
        self.hellmann + self.pulay_in_space + self.pulay_out_of_space
    }
}

/// Hellmann and Pulay contributions per parameter, using `Q = 1 − P` of the frame.
pub fn pulay_decomposition(
    sol: &EigenSolution,
    family: &dyn FrameSource,
    op: &dyn AmbientOperator,
    r: &[f64],
) -> Result<Vec<PulayTerms>> {
    check_isolated(sol)?;
    let ctx = context(family, op, r)?;
    check_len("eigen solution", ctx.frame.dim(), sol.ket.len())?;
    let psi = &sol.ket;
    let s = ctx.frame.metric();
    let si = ctx.frame.inv_metric();
    let v = ctx.frame.vectors();
    let h_nat = si * &ctx.h_matrix;
    let q_hv = ctx.frame.complement_block(&ctx.hv);
    Ok((0..ctx.chris.n_params())
        .map(|i| {
            let dv = &ctx.d_vectors[i];
            let d_nat = ctx.chris.natural(i);
            // dual derivative ∂E = ∂V S⁻¹ + V ∂S⁻¹
            let dsi = ctx.chris.inv_metric_derivative(i);
            let d_duals = dv * si + v * &dsi;
            // ⟨e^μ|H = S⁻¹(HV)†
            let out_nat = d_duals.adjoint() * &q_hv + si * ctx.hv.adjoint() * ctx.frame.complement_block(dv);
            let in_nat = &h_nat * &d_nat - &d_nat * &h_nat;
            PulayTerms {
                hellmann: expectation(psi, &ctx.hellmann_blocks[i]).re,
                pulay_in_space: expectation(psi, &(s * in_nat)).re,
                pulay_out_of_space: expectation(psi, &(s * out_nat)).re,
            }
        })
        .collect())
}

/// Central difference of the `index`-th eigenvalue in each parameter.
pub fn eigenvalue_fd(
    family: &dyn FrameSource,
    op: &dyn AmbientOperator,
    r: &[f64],
    index: usize,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let energy = |point: &[f64]| -> Result<f64> {
        let sols = eigen_at(family, op, point)?;
        sols.get(index)
            .map(|s| s.energy)
            .ok_or_else(|| Error::InvalidParameter(format!("state index {index} out of range")))
    };
    (0..r.len())
        .map(|i| Ok((energy(&shifted(r, i, h))? - energy(&shifted(r, i, -h))?) / (2.0 * h)))
        .collect()
}
