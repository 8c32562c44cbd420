//! Curvature of the frame bundle and Berry quantities.
//!
//! `R^μ_{iνj} = ∂_i D^μ_{νj} − ∂_j D^μ_{νi} + D^μ_{λi} D^λ_{νj} − D^μ_{λj} D^λ_{νi}`.
//!
//! Sign conventions: the Ricci trace `ℛ_ij = R^μ_{iμj}` is purely imaginary
//! for a normalized single band. The conventional real Berry curvature
//! `F_ij = −2 Im⟨∂_i ψ|∂_j ψ⟩` equals `i ℛ_ij`; see [`berry_curvature`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{frame_derivatives, shifted, DerivativeScheme, FrameSource};
use crate::connection::{christoffel, ChristoffelSet};
use crate::error::{Error, Result};
use crate::tensor_core::{c, max_abs, max_abs_vec, CMat, CVec, StateKet, C64, I};

/// Riemann tensor at a point, stored as `r[i][j]` blocks with entries `(μ, ν)`.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub r: Vec<Vec<CMat>>,
    pub point: Vec<f64>,
}

impl CurvatureTensor {
    pub fn n_params(&self) -> usize {
        self.r.len()
    }

    /// `R^μ_{iνj}`.
    pub fn component(&self, mu: usize, i: usize, nu: usize, j: usize) -> C64 {
        self.r[i][j][(mu, nu)]
    }

    /// `max |R_{ij} + R_{ji}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let p = self.n_params();
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                worst = worst.max(max_abs(&(&self.r[i][j] + &self.r[j][i])));
            }
        }
        worst
    }

    /// Quantum-index trace `ℛ_ij = R^μ_{iμj}`.
    pub fn ricci(&self) -> CMat {
        let p = self.n_params();
        CMat::from_fn(p, p, |i, j| self.r[i][j].trace())
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.r.iter().flatten().map(max_abs).fold(0.0, f64::max)
    }
}

fn require_two(family: &dyn FrameSource) -> Result<usize> {
    let p = family.n_params();
    if p < 2 {
        return Err(Error::InsufficientParameters { needed: 2, found: p });
    }
    Ok(p)
}

/// Christoffel set at `r` built from exact frame derivatives.
pub fn christoffel_at(family: &dyn FrameSource, r: &[f64]) -> Result<ChristoffelSet> {
    let frame = family.frame(r)?;
    let derivs = frame_derivatives(family, r, DerivativeScheme::Analytic)?;
    christoffel(&frame, &derivs)
}

/// `∂_i D^•_{•j}` blocks indexed `[i][j]`.
fn natural_christoffel_derivatives(family: &dyn FrameSource, r: &[f64], scheme: DerivativeScheme) -> Result<Vec<Vec<CMat>>> {
    let p = family.n_params();
    match scheme {
        DerivativeScheme::Analytic => {
            let second = family
                .analytic_second_derivatives(r)?
                .ok_or_else(|| Error::Unsupported("family has no analytic second derivatives".into()))?;
            let chris = christoffel_at(family, r)?;
            let frame = chris.frame();
            let v = frame.vectors();
            let si = frame.inv_metric();
            let dv = family.analytic_derivatives(r)?;
            Ok((0..p)
                .map(|i| {
                    let dsi = chris.inv_metric_derivative(i);
                    (0..p)
                        .map(|j| {
                            let d_down = dv[i].adjoint() * &dv[j] + v.adjoint() * &second[i][j];
                            &dsi * chris.down_down(j) + si * d_down
                        })
                        .collect()
                })
                .collect())
        }
        DerivativeScheme::CentralFd { h } => (0..p)
            .map(|i| {
                let plus = christoffel_at(family, &shifted(r, i, h))?;
                let minus = christoffel_at(family, &shifted(r, i, -h))?;
                Ok((0..p)
                    .map(|j| (plus.natural(j) - minus.natural(j)).unscale(2.0 * h))
                    .collect())
            })
            .collect(),
    }
}

/// Assembles the Riemann tensor from Christoffel symbols and their parameter
/// derivatives.
pub fn riemann(family: &dyn FrameSource, r: &[f64], scheme: DerivativeScheme) -> Result<CurvatureTensor> {
    let p = require_two(family)?;
    family.check_params(r)?;
    let chris = christoffel_at(family, r)?;
    let dd = natural_christoffel_derivatives(family, r, scheme)?;
    let d: Vec<CMat> = (0..p).map(|i| chris.natural(i)).collect();
    let blocks = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| &dd[i][j] - &dd[j][i] + &d[i] * &d[j] - &d[j] * &d[i])
                .collect()
        })
        .collect();
    Ok(CurvatureTensor {
        r: blocks,
        point: r.to_vec(),
    })
}

/// Richardson-extrapolated finite-difference Riemann tensor from steps `h`
/// and `h/2`.
fn riemann_reference(family: &dyn FrameSource, r: &[f64], h: f64) -> Result<CurvatureTensor> {
    if let Ok(t) = riemann(family, r, DerivativeScheme::Analytic) {
        return Ok(t);
    }
    let coarse = riemann(family, r, DerivativeScheme::CentralFd { h })?;
    let fine = riemann(family, r, DerivativeScheme::CentralFd { h: 0.5 * h })?;
    let blocks = fine
        .r
        .iter()
        .zip(&coarse.r)
        .map(|(rf, rc)| rf.iter().zip(rc).map(|(a, b)| (a.scale(4.0) - b).unscale(3.0)).collect())
        .collect();
    Ok(CurvatureTensor {
        r: blocks,
        point: r.to_vec(),
    })
}

/// Compares `R^μ_{iνj}ψ^ν` with `(ð_i ð_j − ð_j ð_i)ψ^μ` for a field with
/// constant components, the outer derivative taken by central differences
/// with step `h` over neighbouring frames. Returns the largest deviation.
pub fn commutator_check(family: &dyn FrameSource, r: &[f64], psi: &StateKet, h: f64) -> Result<f64> {
    let p = require_two(family)?;
    crate::tensor_core::check_len("ket", family.dim(), psi.len())?;
    let reference = riemann_reference(family, r, h)?;
    let center = christoffel_at(family, r)?;
    // ð_j ψ at a point is D_j ψ because ∂_j ψ = 0.
    let cov = |chris: &ChristoffelSet, j: usize| -> CVec { chris.natural(j) * &psi.comps };
    let mut second: Vec<Vec<CVec>> = Vec::with_capacity(p);
    for i in 0..p {
        let plus = christoffel_at(family, &shifted(r, i, h))?;
        let minus = christoffel_at(family, &shifted(r, i, -h))?;
        let di = center.natural(i);
        second.push(
            (0..p)
                .map(|j| (cov(&plus, j) - cov(&minus, j)).unscale(2.0 * h) + &di * cov(&center, j))
                .collect(),
        );
    }
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let commutator = &second[i][j] - &second[j][i];
            let expected = &reference.r[i][j] * &psi.comps;
            worst = worst.max(max_abs_vec(&(commutator - expected)));
        }
    }
    Ok(worst)
}

/// `𝒜_j = i D^μ_{μj}`.
pub fn berry_connection_trace(chris: &ChristoffelSet) -> Vec<C64> {
    (0..chris.n_params()).map(|j| I * chris.natural(j).trace()).collect()
}

/// `max_ij |tr(D_i D_j − D_j D_i)|` over natural-placement blocks.
pub fn trace_cancellation_residual(chris: &ChristoffelSet) -> f64 {
    let p = chris.n_params();
    let d: Vec<CMat> = (0..p).map(|i| chris.natural(i)).collect();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            worst = worst.max((&d[i] * &d[j] - &d[j] * &d[i]).trace().norm());
        }
    }
    worst
}

/// Formula used for the Ricci–Berry curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RicciForm {
    /// `2i Im Σ_μ ⟨∂_i e_μ|∂_j e_μ⟩`, valid for orthonormal frames.
    Orthonormal,
    /// `2i Im{S^{μν}⟨∂_i e_ν|∂_j e_μ⟩} + (∂_i S^{μν}) D_{νμj} − (∂_j S^{μν}) D_{νμi}`.
    Nonorthogonal,
    /// Direct quantum-index trace of [`riemann`].
    Trace,
}

/// Ricci–Berry curvature `ℛ_ij` as a `P×P` matrix.
pub fn ricci_berry(family: &dyn FrameSource, r: &[f64], scheme: DerivativeScheme, form: RicciForm) -> Result<CMat> {
    let p = require_two(family)?;
    if form == RicciForm::Trace {
        return Ok(riemann(family, r, scheme)?.ricci());
    }
    let frame = family.frame(r)?;
    let derivs = frame_derivatives(family, r, scheme)?;
    let dv = &derivs.d_vectors;
    let two_i_im = |z: C64| c(0.0, 2.0 * z.im);
    match form {
        RicciForm::Orthonormal => Ok(CMat::from_fn(p, p, |i, j| {
            two_i_im((dv[i].adjoint() * &dv[j]).trace())
        })),
        RicciForm::Nonorthogonal => {
            let chris = christoffel(&frame, &derivs)?;
            let si = frame.inv_metric();
            let dsi: Vec<CMat> = (0..p).map(|i| chris.inv_metric_derivative(i)).collect();
            Ok(CMat::from_fn(p, p, |i, j| {
                let x = (si * (dv[i].adjoint() * &dv[j])).trace();
                two_i_im(x) + (&dsi[i] * chris.down_down(j)).trace() - (&dsi[j] * chris.down_down(i)).trace()
            }))
        }
        RicciForm::Trace => unreachable!(),
    }
}

/// Conventional real Berry curvature `F_ij = i ℛ_ij`.
pub fn berry_curvature(ricci: &CMat) -> DMatrix<f64> {
    ricci.map(|z| (I * z).re)
}

/// Result of a Chern-number quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChernResult {
    /// `Re[(1/2πi) ∫ ℛ_01]`.
    pub value: f64,
    /// Imaginary part of the same quantity, zero for a Hermitian connection.
    pub imag: f64,
    pub n0: usize,
    pub n1: usize,
}

/// `(1/2πi) ∫∫ ℛ_01 dR⁰ dR¹` over a rectangle by the midpoint rule.
///
/// Cells are offset by half a step so no node sits on the rectangle edges,
/// which keeps the singular pole of a sphere gauge out of the sample set.
pub fn chern_number(
    family: &dyn FrameSource,
    range0: (f64, f64),
    range1: (f64, f64),
    n0: usize,
    n1: usize,
    scheme: DerivativeScheme,
    form: RicciForm,
) -> Result<ChernResult> {
    require_two(family)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one cell per axis".into()));
    }
    let h0 = (range0.1 - range0.0) / n0 as f64;
    let h1 = (range1.1 - range1.0) / n1 as f64;
    let mut total = C64::new(0.0, 0.0);
    for a in 0..n0 {
        let x0 = range0.0 + (a as f64 + 0.5) * h0;
        let mut row = C64::new(0.0, 0.0);
        for b in 0..n1 {
            let x1 = range1.0 + (b as f64 + 0.5) * h1;
            let mut point = vec![0.0; family.n_params()];
            point[0] = x0;
            point[1] = x1;
            row += ricci_berry(family, &point, scheme, form)?[(0, 1)];
        }
        total += row;
    }
    let integral = total * (h0 * h1) / (2.0 * std::f64::consts::PI * I);
    Ok(ChernResult {
        value: integral.re,
        imag: integral.im,
        n0,
        n1,
    })
}
