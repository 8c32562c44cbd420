//! Parameter-dependent basis families and frame-to-frame overlaps.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_core::{c, check_len, hermitian_eigh, BasisFrame, CMat, C64, I};

/// Default central finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Largest tolerated relative Gaussian amplitude at the grid edge.
pub const BOUNDARY_AMPLITUDE: f64 = 1e-12;
/// Target agreement between a requested overlap law and the realized overlap.
pub const OVERLAP_MATCH_TOL: f64 = 1e-8;

/// Scalar function of one variable with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Law {
    /// `Σ_k c_k t^k`.
    Poly { coeffs: Vec<f64> },
    /// `offset + amplitude · sin(omega t + phase)`.
    Sine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Law {
    pub fn constant(value: f64) -> Self {
        Law::Poly {
            coeffs: vec![value],
        }
    }

    pub fn linear(value: f64, rate: f64) -> Self {
        Law::Poly {
            coeffs: vec![value, rate],
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Law::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            Law::Sine {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match self {
            Law::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck),
            Law::Sine {
                amplitude,
                omega,
                phase,
                ..
            } => amplitude * omega * (omega * t + phase).cos(),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match self {
            Law::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + (k * (k - 1)) as f64 * ck),
            Law::Sine {
                amplitude,
                omega,
                phase,
                ..
            } => -amplitude * omega * omega * (omega * t + phase).sin(),
        }
    }
}

/// Uniform one-dimensional grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            points: 2048,
            x_min: -20.0,
            x_max: 20.0,
        }
    }
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.spacing()
    }

    fn validate(&self) -> Result<()> {
        if self.points < 3 || !(self.x_max > self.x_min) {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 points and x_max > x_min, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Normalized grid Gaussian `(πσ²)^{-1/4} exp(−u²/2σ²) exp(ipu)`, `u = x − c`,
/// sampled with weight `√dx` so the ambient inner product is the grid quadrature.
#[derive(Debug, Clone, Copy)]
struct GridGaussian {
    center: f64,
    width: f64,
    momentum: f64,
}

/// Samples of a grid Gaussian and its center/width derivatives.
struct GaussianSamples {
    d_center: Vec<C64>,
    d_width: Vec<C64>,
    d_cc: Vec<C64>,
    d_cw: Vec<C64>,
    d_ww: Vec<C64>,
}

impl GridGaussian {
    fn amplitude_at_edges(&self, grid: &Grid) -> f64 {
        let u = (self.center - grid.x_min).min(grid.x_max - self.center);
        if u <= 0.0 {
            return 1.0;
        }
        (-(u * u) / (2.0 * self.width * self.width)).exp()
    }

    fn values(&self, grid: &Grid) -> Vec<C64> {
        let norm = grid.spacing().sqrt() * (std::f64::consts::PI * self.width * self.width).powf(-0.25);
        (0..grid.points)
            .map(|k| {
                let u = grid.x(k) - self.center;
                let env = norm * (-(u * u) / (2.0 * self.width * self.width)).exp();
                C64::from_polar(env, self.momentum * u)
            })
            .collect()
    }

    fn samples(&self, grid: &Grid, second: bool) -> GaussianSamples {
        let value = self.values(grid);
        let s = self.width;
        let p = self.momentum;
        let n = grid.points;
        let mut d_center = Vec::with_capacity(n);
        let mut d_width = Vec::with_capacity(n);
        let (mut d_cc, mut d_cw, mut d_ww) = (Vec::new(), Vec::new(), Vec::new());
        for (k, &g) in value.iter().enumerate() {
            let u = grid.x(k) - self.center;
            let a_c = c(u / (s * s), -p);
            let a_w = c(-0.5 / s + u * u / (s * s * s), 0.0);
            d_center.push(g * a_c);
            d_width.push(g * a_w);
            if second {
                d_cc.push(g * (a_c * a_c - 1.0 / (s * s)));
                d_cw.push(g * (a_w * a_c - 2.0 * u / (s * s * s)));
                d_ww.push(g * (a_w * a_w + 0.5 / (s * s) - 3.0 * u * u / (s * s * s * s)));
            }
        }
        GaussianSamples {
            d_center,
            d_width,
            d_cc,
            d_cw,
            d_ww,
        }
    }
}

/// One orbital of a [`BasisFamily::GaussianChain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOrbital {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

fn default_ambient() -> usize {
    2
}

fn default_width() -> f64 {
    1.0
}

fn default_field() -> f64 {
    1.0
}

/// Parameter-dependent basis family `e_μ(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisFamily {
    /// Orthonormal pair rotating by `θ(t)` in the plane of ambient axes 1 and 2.
    Rotating2d {
        theta: Law,
        #[serde(default = "default_ambient")]
        ambient_dim: usize,
    },
    /// Orthogonal pair `α₁(t) u₁`, `α₂(t) u₂`.
    Breathing2d {
        alpha1: Law,
        alpha2: Law,
        #[serde(default = "default_ambient")]
        ambient_dim: usize,
    },
    /// Two real grid Gaussians moving apart symmetrically with overlap `s(t)`.
    OverlapPairSymmetric {
        overlap: Law,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        grid: Grid,
    },
    /// Orbital 1 moves towards orbital 2, which stays at `anchor`.
    OverlapPairPinned {
        overlap: Law,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        anchor: f64,
        #[serde(default)]
        grid: Grid,
    },
    /// Grid Gaussians whose centers and widths depend linearly and
    /// exponentially on the parameters:
    /// `c_k = c_k⁰ + Σ_i center_coupling[i][k] R_i`,
    /// `σ_k = σ_k⁰ exp(Σ_i width_coupling[i][k] R_i)`.
    GaussianChain {
        orbitals: Vec<ChainOrbital>,
        center_coupling: Vec<Vec<f64>>,
        #[serde(default)]
        width_coupling: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        grid: Grid,
    },
    /// Lower eigenvector of `−B n̂(θ,φ)·σ` with a real positive first component.
    TwoLevelSphere {
        #[serde(default = "default_field")]
        field: f64,
    },
}

/// How frame derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeScheme {
    Analytic,
    CentralFd { h: f64 },
}

impl Default for DerivativeScheme {
    fn default() -> Self {
        DerivativeScheme::Analytic
    }
}

/// Ambient derivative vectors `∂_i|e_μ⟩`, one `M×N` block per parameter.
#[derive(Debug, Clone)]
pub struct FrameDerivatives {
    pub d_vectors: Vec<CMat>,
    pub scheme: DerivativeScheme,
}

/// Anything that yields a frame and its derivatives at a parameter point.
pub trait FrameSource: Send + Sync {
    /// Number of parameters P.
    fn n_params(&self) -> usize;

    /// Basis dimension N.
    fn dim(&self) -> usize;

    /// Ambient dimension M.
    fn ambient_dim(&self) -> usize;

    /// `M×N` matrix of basis kets at `r`.
    fn vectors(&self, r: &[f64]) -> Result<CMat>;

    /// Exact `∂_i|e_μ⟩` blocks.
    fn analytic_derivatives(&self, r: &[f64]) -> Result<Vec<CMat>>;

    /// Exact `∂_i∂_j|e_μ⟩` blocks indexed `[i][j]`, where available.
    fn analytic_second_derivatives(&self, _r: &[f64]) -> Result<Option<Vec<Vec<CMat>>>> {
        Ok(None)
    }

    /// Box from which random test points are drawn.
    fn sample_box(&self) -> Vec<(f64, f64)>;

    fn frame(&self, r: &[f64]) -> Result<BasisFrame> {
        self.check_params(r)?;
        BasisFrame::from_columns(self.vectors(r)?, r.to_vec())
    }

    fn check_params(&self, r: &[f64]) -> Result<()> {
        check_len("parameter vector", self.n_params(), r.len())
    }

    fn sample_point(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.sample_box()
            .into_iter()
            .map(|(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Shifts parameter `i` by `delta`.
pub fn shifted(r: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut out = r.to_vec();
    out[i] += delta;
    out
}

/// Evaluates the frame of a family at `r`.
pub fn evaluate_frame(family: &dyn FrameSource, r: &[f64]) -> Result<BasisFrame> {
    family.frame(r)
}

/// Derivative vectors at `r` under the requested scheme.
pub fn frame_derivatives(family: &dyn FrameSource, r: &[f64], scheme: DerivativeScheme) -> Result<FrameDerivatives> {
    family.check_params(r)?;
    let d_vectors = match scheme {
        DerivativeScheme::Analytic => family.analytic_derivatives(r)?,
        DerivativeScheme::CentralFd { h } => {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
            }
            (0..family.n_params())
                .map(|i| {
                    let plus = family.vectors(&shifted(r, i, h))?;
                    let minus = family.vectors(&shifted(r, i, -h))?;
                    Ok((plus - minus).unscale(2.0 * h))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(FrameDerivatives { d_vectors, scheme })
}

/// Index placement of a frame-to-frame overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// `A_{μν} = ⟨e_μ(to)|e_ν(from)⟩`.
    LowerLower,
    /// `A^μ_ν = ⟨e^μ(to)|e_ν(from)⟩`.
    UpperLower,
    /// `A_μ^ν = ⟨e_μ(to)|e^ν(from)⟩`.
    LowerUpper,
    /// `A^{μν} = ⟨e^μ(to)|e^ν(from)⟩`.
    UpperUpper,
}

/// Gauge overlap `A(to:from)` in the requested placement.
pub fn frame_gauge_overlap(frame_to: &BasisFrame, frame_from: &BasisFrame, placement: Placement) -> Result<CMat> {
    check_len("gauge overlap: ambient dimension", frame_to.ambient_dim(), frame_from.ambient_dim())?;
    check_len("gauge overlap: basis dimension", frame_to.dim(), frame_from.dim())?;
    let cross = frame_to.vectors().adjoint() * frame_from.vectors();
    Ok(match placement {
        Placement::LowerLower => cross,
        Placement::UpperLower => frame_to.inv_metric() * cross,
        Placement::LowerUpper => cross * frame_from.inv_metric(),
        Placement::UpperUpper => frame_to.inv_metric() * cross * frame_from.inv_metric(),
    })
}

fn unit_pair(m: usize) -> (CMat, CMat) {
    let mut u = CMat::zeros(m, 2);
    u[(0, 0)] = c(1.0, 0.0);
    u[(1, 1)] = c(1.0, 0.0);
    let v = CMat::zeros(m, 2);
    (u, v)
}

fn column_from(values: &[C64], m: &mut CMat, col: usize) {
    for (k, z) in values.iter().enumerate() {
        m[(k, col)] = *z;
    }
}

impl BasisFamily {
    fn ambient_check(ambient_dim: usize) -> Result<()> {
        if ambient_dim < 2 {
            return Err(Error::InvalidParameter(format!("ambient_dim must be at least 2, got {ambient_dim}")));
        }
        Ok(())
    }

    fn pair_centers(&self, d: f64) -> (f64, f64) {
        match self {
            BasisFamily::OverlapPairPinned { anchor, .. } => (anchor - d, *anchor),
            _ => (-0.5 * d, 0.5 * d),
        }
    }

    /// Rates `(c₁′, c₂′)` per unit separation rate.
    fn pair_center_rates(&self) -> (f64, f64) {
        match self {
            BasisFamily::OverlapPairPinned { .. } => (-1.0, 0.0),
            _ => (-0.5, 0.5),
        }
    }

    fn grid_overlap(grid: &Grid, width: f64, c1: f64, c2: f64) -> f64 {
        let g1 = GridGaussian {
            center: c1,
            width,
            momentum: 0.0,
        }
        .values(grid);
        let g2 = GridGaussian {
            center: c2,
            width,
            momentum: 0.0,
        }
        .values(grid);
        g1.iter().zip(&g2).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Separation realizing overlap `s` on the grid, by bisection.
    fn solve_separation(&self, s: f64, width: f64, grid: &Grid) -> Result<f64> {
        let overlap_at = |d: f64| {
            let (c1, c2) = self.pair_centers(d);
            Self::grid_overlap(grid, width, c1, c2)
        };
        let guess = 2.0 * width * (-s.ln()).sqrt();
        if (overlap_at(guess) - s).abs() <= 1e-14 {
            return Ok(guess);
        }
        let (mut lo, mut hi) = (0.0, (grid.x_max - grid.x_min));
        let mut d = guess;
        for _ in 0..200 {
            d = 0.5 * (lo + hi);
            let f = overlap_at(d);
            if (f - s).abs() <= 1e-15 || hi - lo <= f64::EPSILON * hi {
                break;
            }
            if f > s {
                lo = d;
            } else {
                hi = d;
            }
        }
        let realized = overlap_at(d);
        if (realized - s).abs() > OVERLAP_MATCH_TOL {
            return Err(Error::OutOfDomain(format!(
                "overlap {s} not reachable on the grid (closest {realized})"
            )));
        }
        Ok(d)
    }

    fn pair_setup(&self, t: f64) -> Result<(f64, f64, f64, f64, Grid)> {
        let (overlap, width, grid) = match self {
            BasisFamily::OverlapPairSymmetric { overlap, width, grid }
            | BasisFamily::OverlapPairPinned {
                overlap, width, grid, ..
            } => (overlap, *width, *grid),
            _ => unreachable!(),
        };
        grid.validate()?;
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("width must be positive, got {width}")));
        }
        let s = overlap.value(t);
        if s >= 1.0 {
            return Err(Error::SingularFrame {
                min_eigenvalue: 1.0 - s,
                threshold: crate::tensor_core::LIN_INDEP_THRESHOLD,
            });
        }
        if !(s > 0.0) {
            return Err(Error::OutOfDomain(format!("overlap pair needs 0 < s < 1, got s = {s}")));
        }
        let d = self.solve_separation(s, width, &grid)?;
        let (c1, c2) = self.pair_centers(d);
        for center in [c1, c2] {
            let g = GridGaussian {
                center,
                width,
                momentum: 0.0,
            };
            if g.amplitude_at_edges(&grid) > BOUNDARY_AMPLITUDE {
                return Err(Error::OutOfDomain(format!("orbital at {center} reaches the grid edge")));
            }
        }
        // ds/dd for same-width Gaussians: s = exp(−d²/4σ²).
        let ds_dd = -d / (2.0 * width * width) * s;
        let d_rate = overlap.d1(t) / ds_dd;
        Ok((c1, c2, d_rate, width, grid))
    }

    fn chain_setup(&self, r: &[f64]) -> Result<(Vec<GridGaussian>, Grid)> {
        let BasisFamily::GaussianChain {
            orbitals,
            center_coupling,
            width_coupling,
            grid,
        } = self
        else {
            unreachable!()
        };
        grid.validate()?;
        let n = orbitals.len();
        let mut out = Vec::with_capacity(n);
        for (k, orb) in orbitals.iter().enumerate() {
            if !(orb.width > 0.0) {
                return Err(Error::InvalidParameter(format!("orbital {k} width must be positive")));
            }
            let mut center = orb.center;
            let mut log_scale = 0.0;
            for (i, &ri) in r.iter().enumerate() {
                center += center_coupling[i][k] * ri;
                if let Some(wc) = width_coupling {
                    log_scale += wc[i][k] * ri;
                }
            }
            let g = GridGaussian {
                center,
                width: orb.width * log_scale.exp(),
                momentum: orb.momentum,
            };
            if g.amplitude_at_edges(grid) > BOUNDARY_AMPLITUDE {
                return Err(Error::OutOfDomain(format!("orbital {k} at {center} reaches the grid edge")));
            }
            out.push(g);
        }
        Ok((out, *grid))
    }

    fn chain_width_coupling(&self, i: usize, k: usize) -> f64 {
        match self {
            BasisFamily::GaussianChain {
                width_coupling: Some(wc),
                ..
            } => wc[i][k],
            _ => 0.0,
        }
    }

    fn chain_center_coupling(&self, i: usize, k: usize) -> f64 {
        match self {
            BasisFamily::GaussianChain { center_coupling, .. } => center_coupling[i][k],
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BasisFamily::Rotating2d { ambient_dim, .. } | BasisFamily::Breathing2d { ambient_dim, .. } => {
                Self::ambient_check(*ambient_dim)
            }
            BasisFamily::GaussianChain {
                orbitals,
                center_coupling,
                width_coupling,
                ..
            } => {
                if orbitals.is_empty() {
                    return Err(Error::InvalidParameter("gaussian_chain needs at least one orbital".into()));
                }
                let rows_ok = |rows: &Vec<Vec<f64>>| rows.iter().all(|row| row.len() == orbitals.len());
                if center_coupling.is_empty() || !rows_ok(center_coupling) {
                    return Err(Error::InvalidParameter(
                        "center_coupling must have one row per parameter and one column per orbital".into(),
                    ));
                }
                if let Some(wc) = width_coupling {
                    if wc.len() != center_coupling.len() || !rows_ok(wc) {
                        return Err(Error::InvalidParameter(
                            "width_coupling must match the shape of center_coupling".into(),
                        ));
                    }
                }
                Ok(())
            }
            BasisFamily::TwoLevelSphere { field } => {
                if !(*field > 0.0) {
                    return Err(Error::InvalidParameter(format!("field must be positive, got {field}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Two-level Hamiltonian `−B n̂·σ` at `(θ, φ)`.
    pub fn sphere_hamiltonian(field: f64, theta: f64, phi: f64) -> CMat {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let b = -field;
        CMat::from_row_slice(
            2,
            2,
            &[c(b * ct, 0.0), c(b * st * cp, -b * st * sp), c(b * st * cp, b * st * sp), c(-b * ct, 0.0)],
        )
    }

    fn sphere_vector(&self, theta: f64, phi: f64) -> Result<CMat> {
        let BasisFamily::TwoLevelSphere { field } = self else {
            unreachable!()
        };
        if !(0.0..std::f64::consts::PI).contains(&theta) || (std::f64::consts::PI - theta) < 1e-6 {
            return Err(Error::OutOfDomain(format!(
                "two_level_sphere needs 0 <= θ < π away from the south pole, got θ = {theta}"
            )));
        }
        let h = Self::sphere_hamiltonian(*field, theta, phi);
        let (_, vecs) = hermitian_eigh(&h);
        let mut v = vecs.column(0).into_owned();
        let lead = v[0];
        if lead.norm() < 1e-12 {
            return Err(Error::OutOfDomain("gauge undefined at the south pole".into()));
        }
        v *= lead.conj() / lead.norm();
        v.unscale_mut(v.norm());
        Ok(CMat::from_column_slice(2, 1, v.as_slice()))
    }
}

impl FrameSource for BasisFamily {
    fn n_params(&self) -> usize {
        match self {
            BasisFamily::GaussianChain { center_coupling, .. } => center_coupling.len(),
            BasisFamily::TwoLevelSphere { .. } => 2,
            _ => 1,
        }
    }

    fn dim(&self) -> usize {
        match self {
            BasisFamily::GaussianChain { orbitals, .. } => orbitals.len(),
            BasisFamily::TwoLevelSphere { .. } => 1,
            _ => 2,
        }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            BasisFamily::Rotating2d { ambient_dim, .. } | BasisFamily::Breathing2d { ambient_dim, .. } => *ambient_dim,
            BasisFamily::OverlapPairSymmetric { grid, .. }
            | BasisFamily::OverlapPairPinned { grid, .. }
            | BasisFamily::GaussianChain { grid, .. } => grid.points,
            BasisFamily::TwoLevelSphere { .. } => 2,
        }
    }

    fn vectors(&self, r: &[f64]) -> Result<CMat> {
        self.validate()?;
        self.check_params(r)?;
        match self {
            BasisFamily::Rotating2d { theta, ambient_dim } => {
                let (s, co) = theta.value(r[0]).sin_cos();
                let (mut v, _) = unit_pair(*ambient_dim);
                v[(0, 0)] = c(co, 0.0);
                v[(1, 0)] = c(s, 0.0);
                v[(0, 1)] = c(-s, 0.0);
                v[(1, 1)] = c(co, 0.0);
                Ok(v)
            }
            BasisFamily::Breathing2d {
                alpha1,
                alpha2,
                ambient_dim,
            } => {
                let (mut v, _) = unit_pair(*ambient_dim);
                v[(0, 0)] = c(alpha1.value(r[0]), 0.0);
                v[(1, 1)] = c(alpha2.value(r[0]), 0.0);
                Ok(v)
            }
            BasisFamily::OverlapPairSymmetric { .. } | BasisFamily::OverlapPairPinned { .. } => {
                let (c1, c2, _, width, grid) = self.pair_setup(r[0])?;
                let mut v = CMat::zeros(grid.points, 2);
                for (col, center) in [c1, c2].into_iter().enumerate() {
                    let g = GridGaussian {
                        center,
                        width,
                        momentum: 0.0,
                    };
                    column_from(&g.values(&grid), &mut v, col);
                }
                Ok(v)
            }
            BasisFamily::GaussianChain { .. } => {
                let (orbs, grid) = self.chain_setup(r)?;
                let mut v = CMat::zeros(grid.points, orbs.len());
                for (col, g) in orbs.iter().enumerate() {
                    column_from(&g.values(&grid), &mut v, col);
                }
                Ok(v)
            }
            BasisFamily::TwoLevelSphere { .. } => self.sphere_vector(r[0], r[1]),
        }
    }

    fn analytic_derivatives(&self, r: &[f64]) -> Result<Vec<CMat>> {
        self.validate()?;
        self.check_params(r)?;
        match self {
            BasisFamily::Rotating2d { theta, ambient_dim } => {
                let w = theta.d1(r[0]);
                let (s, co) = theta.value(r[0]).sin_cos();
                let (_, mut d) = unit_pair(*ambient_dim);
                d[(0, 0)] = c(-w * s, 0.0);
                d[(1, 0)] = c(w * co, 0.0);
                d[(0, 1)] = c(-w * co, 0.0);
                d[(1, 1)] = c(-w * s, 0.0);
                Ok(vec![d])
            }
            BasisFamily::Breathing2d {
                alpha1,
                alpha2,
                ambient_dim,
            } => {
                let (_, mut d) = unit_pair(*ambient_dim);
                d[(0, 0)] = c(alpha1.d1(r[0]), 0.0);
                d[(1, 1)] = c(alpha2.d1(r[0]), 0.0);
                Ok(vec![d])
            }
            BasisFamily::OverlapPairSymmetric { .. } | BasisFamily::OverlapPairPinned { .. } => {
                let (c1, c2, d_rate, width, grid) = self.pair_setup(r[0])?;
                let (k1, k2) = self.pair_center_rates();
                let mut d = CMat::zeros(grid.points, 2);
                // c′ = k d′ and ∂_t g = (∂g/∂c) c′.
                for (col, (center, k)) in [(c1, k1), (c2, k2)].into_iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    let g = GridGaussian {
                        center,
                        width,
                        momentum: 0.0,
                    };
                    let vals: Vec<C64> = g.samples(&grid, false).d_center.iter().map(|z| z * (k * d_rate)).collect();
                    column_from(&vals, &mut d, col);
                }
                Ok(vec![d])
            }
            BasisFamily::GaussianChain { .. } => {
                let (orbs, grid) = self.chain_setup(r)?;
                let samples: Vec<GaussianSamples> = orbs.iter().map(|g| g.samples(&grid, false)).collect();
                Ok((0..r.len())
                    .map(|i| {
                        let mut d = CMat::zeros(grid.points, orbs.len());
                        for (k, (g, smp)) in orbs.iter().zip(&samples).enumerate() {
                            let jc = self.chain_center_coupling(i, k);
                            let jw = g.width * self.chain_width_coupling(i, k);
                            let vals: Vec<C64> = smp
                                .d_center
                                .iter()
                                .zip(&smp.d_width)
                                .map(|(dc, dw)| dc * jc + dw * jw)
                                .collect();
                            column_from(&vals, &mut d, k);
                        }
                        d
                    })
                    .collect())
            }
            BasisFamily::TwoLevelSphere { .. } => {
                self.sphere_vector(r[0], r[1])?;
                let (sh, ch) = (0.5 * r[0]).sin_cos();
                let ph = C64::from_polar(1.0, r[1]);
                let d_theta = CMat::from_column_slice(2, 1, &[c(-0.5 * sh, 0.0), ph * (0.5 * ch)]);
                let d_phi = CMat::from_column_slice(2, 1, &[c(0.0, 0.0), I * ph * sh]);
                Ok(vec![d_theta, d_phi])
            }
        }
    }

    fn analytic_second_derivatives(&self, r: &[f64]) -> Result<Option<Vec<Vec<CMat>>>> {
        self.validate()?;
        self.check_params(r)?;
        match self {
            BasisFamily::Rotating2d { theta, ambient_dim } => {
                let w = theta.d1(r[0]);
                let a = theta.d2(r[0]);
                let (s, co) = theta.value(r[0]).sin_cos();
                let (_, mut d) = unit_pair(*ambient_dim);
                d[(0, 0)] = c(-a * s - w * w * co, 0.0);
                d[(1, 0)] = c(a * co - w * w * s, 0.0);
                d[(0, 1)] = c(-a * co + w * w * s, 0.0);
                d[(1, 1)] = c(-a * s - w * w * co, 0.0);
                Ok(Some(vec![vec![d]]))
            }
            BasisFamily::Breathing2d {
                alpha1,
                alpha2,
                ambient_dim,
            } => {
                let (_, mut d) = unit_pair(*ambient_dim);
                d[(0, 0)] = c(alpha1.d2(r[0]), 0.0);
                d[(1, 1)] = c(alpha2.d2(r[0]), 0.0);
                Ok(Some(vec![vec![d]]))
            }
            BasisFamily::OverlapPairSymmetric { .. } | BasisFamily::OverlapPairPinned { .. } => Ok(None),
            BasisFamily::GaussianChain { .. } => {
                let (orbs, grid) = self.chain_setup(r)?;
                let samples: Vec<GaussianSamples> = orbs.iter().map(|g| g.samples(&grid, true)).collect();
                let p = r.len();
                let mut out = vec![Vec::with_capacity(p); p];
                for (i, row) in out.iter_mut().enumerate() {
                    for j in 0..p {
                        let mut d = CMat::zeros(grid.points, orbs.len());
                        for (k, (g, smp)) in orbs.iter().zip(&samples).enumerate() {
                            let (ci, cj) = (self.chain_center_coupling(i, k), self.chain_center_coupling(j, k));
                            let (wi, wj) = (
                                g.width * self.chain_width_coupling(i, k),
                                g.width * self.chain_width_coupling(j, k),
                            );
                            // ∂_j σ = σ J_j, hence ∂_i∂_j σ = σ J_i J_j.
                            let wij = g.width * self.chain_width_coupling(i, k) * self.chain_width_coupling(j, k);
                            let vals: Vec<C64> = (0..grid.points)
                                .map(|x| {
                                    smp.d_cc[x] * (ci * cj)
                                        + smp.d_cw[x] * (ci * wj + cj * wi)
                                        + smp.d_ww[x] * (wi * wj)
                                        + smp.d_width[x] * wij
                                })
                                .collect();
                            column_from(&vals, &mut d, k);
                        }
                        row.push(d);
                    }
                }
                Ok(Some(out))
            }
            BasisFamily::TwoLevelSphere { .. } => {
                self.sphere_vector(r[0], r[1])?;
                let (sh, ch) = (0.5 * r[0]).sin_cos();
                let ph = C64::from_polar(1.0, r[1]);
                let tt = CMat::from_column_slice(2, 1, &[c(-0.25 * ch, 0.0), ph * (-0.25 * sh)]);
                let tp = CMat::from_column_slice(2, 1, &[c(0.0, 0.0), I * ph * (0.5 * ch)]);
                let pp = CMat::from_column_slice(2, 1, &[c(0.0, 0.0), -ph * sh]);
                Ok(Some(vec![vec![tt, tp.clone()], vec![tp, pp]]))
            }
        }
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        match self {
            BasisFamily::GaussianChain { center_coupling, .. } => vec![(-0.5, 0.5); center_coupling.len()],
            BasisFamily::TwoLevelSphere { .. } => {
                vec![(0.1, std::f64::consts::PI - 0.1), (0.0, 2.0 * std::f64::consts::PI)]
            }
            _ => vec![(0.0, 1.0)],
        }
    }
}

/// Smooth bounded invertible mixing matrix
/// `M(R) = I + A₀ + Σ_i [A_i sin(ω_i R_i) + B_i (1 − cos(ω_i R_i))]`.
#[derive(Debug, Clone)]
pub struct SmoothMix {
    pub base: CMat,
    pub sines: Vec<CMat>,
    pub cosines: Vec<CMat>,
    pub omegas: Vec<f64>,
}

fn random_cmat(n: usize, rng: &mut dyn rand::RngCore) -> CMat {
    DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

impl SmoothMix {
    /// Random mix with `‖M − I‖₂ ≤ strength < 1`, hence invertible.
    pub fn random(n: usize, p: usize, strength: f64, rng: &mut dyn rand::RngCore) -> Self {
        assert!(strength > 0.0 && strength < 1.0, "strength must lie in (0, 1)");
        let mut base = random_cmat(n, rng);
        let mut sines: Vec<CMat> = (0..p).map(|_| random_cmat(n, rng)).collect();
        let mut cosines: Vec<CMat> = (0..p).map(|_| random_cmat(n, rng)).collect();
        let omegas = (0..p).map(|_| rng.gen_range(0.5..2.0)).collect();
        let total = base.norm() + sines.iter().map(|m| m.norm()).sum::<f64>() + 2.0 * cosines.iter().map(|m| m.norm()).sum::<f64>();
        let k = strength / total;
        base *= c(k, 0.0);
        for m in sines.iter_mut().chain(cosines.iter_mut()) {
            *m *= c(k, 0.0);
        }
        Self {
            base,
            sines,
            cosines,
            omegas,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.omegas.len()
    }

    pub fn matrix(&self, r: &[f64]) -> CMat {
        let n = self.dim();
        let mut m = CMat::identity(n, n) + &self.base;
        for i in 0..self.n_params() {
            let (s, co) = (self.omegas[i] * r[i]).sin_cos();
            m += &self.sines[i] * c(s, 0.0) + &self.cosines[i] * c(1.0 - co, 0.0);
        }
        m
    }

    pub fn derivative(&self, r: &[f64], i: usize) -> CMat {
        let w = self.omegas[i];
        let (s, co) = (w * r[i]).sin_cos();
        &self.sines[i] * c(w * co, 0.0) + &self.cosines[i] * c(w * s, 0.0)
    }

    pub fn second_derivative(&self, r: &[f64], i: usize, j: usize) -> CMat {
        if i != j {
            return CMat::zeros(self.dim(), self.dim());
        }
        let w = self.omegas[i];
        let (s, co) = (w * r[i]).sin_cos();
        &self.sines[i] * c(-w * w * s, 0.0) + &self.cosines[i] * c(w * w * co, 0.0)
    }
}

/// Family re-expressed in a parameter-dependent basis `|a_n⟩ = |e_μ⟩ M^μ_n(R)`.
#[derive(Clone)]
pub struct MixedFamily {
    pub inner: Arc<dyn FrameSource>,
    pub mix: SmoothMix,
}

impl MixedFamily {
    pub fn new(inner: Arc<dyn FrameSource>, mix: SmoothMix) -> Result<Self> {
        check_len("mix dimension", inner.dim(), mix.dim())?;
        check_len("mix parameters", inner.n_params(), mix.n_params())?;
        Ok(Self { inner, mix })
    }
}

impl FrameSource for MixedFamily {
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn vectors(&self, r: &[f64]) -> Result<CMat> {
        Ok(self.inner.vectors(r)? * self.mix.matrix(r))
    }

    fn analytic_derivatives(&self, r: &[f64]) -> Result<Vec<CMat>> {
        let v = self.inner.vectors(r)?;
        let dv = self.inner.analytic_derivatives(r)?;
        let m = self.mix.matrix(r);
        Ok(dv
            .iter()
            .enumerate()
            .map(|(i, d)| d * &m + &v * self.mix.derivative(r, i))
            .collect())
    }

    fn analytic_second_derivatives(&self, r: &[f64]) -> Result<Option<Vec<Vec<CMat>>>> {
        let Some(ddv) = self.inner.analytic_second_derivatives(r)? else {
            return Ok(None);
        };
        let v = self.inner.vectors(r)?;
        let dv = self.inner.analytic_derivatives(r)?;
        let m = self.mix.matrix(r);
        let p = self.n_params();
        let dm: Vec<CMat> = (0..p).map(|i| self.mix.derivative(r, i)).collect();
        Ok(Some(
            (0..p)
                .map(|i| {
                    (0..p)
                        .map(|j| {
                            &ddv[i][j] * &m + &dv[i] * &dm[j] + &dv[j] * &dm[i] + &v * self.mix.second_derivative(r, i, j)
                        })
                        .collect()
                })
                .collect(),
        ))
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        self.inner.sample_box()
    }
}
