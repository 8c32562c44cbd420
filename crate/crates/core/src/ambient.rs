//! Operators acting on ambient coefficient vectors.

use serde::{Deserialize, Serialize};

use crate::basis::{Grid, Law};
use crate::error::{Error, Result};
use crate::tensor_core::{c, check_len, check_square, CMat, C64};

/// Hermitian operator on the ambient space depending on coordinates `x`.
///
/// The coordinates are whatever the caller drives the operator with: the
/// parameter point `R` for force evaluations, or `[t]` for explicitly
/// time-dependent propagation.
pub trait AmbientOperator: Send + Sync {
    fn ambient_dim(&self) -> usize;

    fn n_coords(&self) -> usize;

    /// `H(x) v` for each column of `v`.
    fn apply(&self, x: &[f64], v: &CMat) -> Result<CMat>;

    /// `(∂H/∂x_i) v` for each column of `v`.
    fn apply_derivative(&self, x: &[f64], i: usize, v: &CMat) -> Result<CMat>;

    /// `⟨a|H(x)|b⟩` blocks.
    fn sandwich(&self, x: &[f64], a: &CMat, b: &CMat) -> Result<CMat> {
        Ok(a.adjoint() * self.apply(x, b)?)
    }
}

/// One term `f(x_coord) · matrix` of a [`DenseOperator`].
#[derive(Debug, Clone)]
pub struct DenseTerm {
    pub matrix: CMat,
    pub law: Law,
    pub coord: usize,
}

/// `H(x) = H₀ + Σ_k f_k(x_{c_k}) H_k` with dense Hermitian matrices.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub base: CMat,
    pub terms: Vec<DenseTerm>,
    pub n_coords: usize,
}

impl DenseOperator {
    pub fn constant(base: CMat, n_coords: usize) -> Self {
        Self {
            base,
            terms: Vec::new(),
            n_coords,
        }
    }

    pub fn new(base: CMat, terms: Vec<DenseTerm>, n_coords: usize) -> Result<Self> {
        let m = base.nrows();
        check_square("dense operator", m, &base)?;
        for term in &terms {
            check_square("dense operator term", m, &term.matrix)?;
            if term.coord >= n_coords {
                return Err(Error::InvalidParameter(format!(
                    "term coordinate {} out of range for {} coordinates",
                    term.coord, n_coords
                )));
            }
        }
        Ok(Self { base, terms, n_coords })
    }

    pub fn matrix(&self, x: &[f64]) -> CMat {
        self.terms
            .iter()
            .fold(self.base.clone(), |acc, term| acc + term.matrix.scale(term.law.value(x[term.coord])))
    }

    pub fn derivative_matrix(&self, x: &[f64], i: usize) -> CMat {
        let m = self.base.nrows();
        self.terms
            .iter()
            .filter(|term| term.coord == i)
            .fold(CMat::zeros(m, m), |acc, term| acc + term.matrix.scale(term.law.d1(x[term.coord])))
    }
}

impl AmbientOperator for DenseOperator {
    fn ambient_dim(&self) -> usize {
        self.base.nrows()
    }

    fn n_coords(&self) -> usize {
        self.n_coords
    }

    fn apply(&self, x: &[f64], v: &CMat) -> Result<CMat> {
        check_len("dense operator coordinates", self.n_coords, x.len())?;
        check_len("dense operator input", self.ambient_dim(), v.nrows())?;
        Ok(self.matrix(x) * v)
    }

    fn apply_derivative(&self, x: &[f64], i: usize, v: &CMat) -> Result<CMat> {
        check_len("dense operator coordinates", self.n_coords, x.len())?;
        check_len("dense operator input", self.ambient_dim(), v.nrows())?;
        Ok(self.derivative_matrix(x, i) * v)
    }
}

/// Attractive Gaussian well `−depth · exp(−(x − X)²/2w²)` with
/// `X = center + Σ_i coupling[i] x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub center: f64,
    pub depth: f64,
    pub width: f64,
    #[serde(default)]
    pub coupling: Vec<f64>,
}

impl Well {
    fn position(&self, x: &[f64]) -> f64 {
        self.center + self.coupling.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn default_mass() -> f64 {
    1.0
}

/// One-body grid Hamiltonian: central-difference kinetic energy with
/// Dirichlet ends plus a sum of Gaussian wells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHamiltonian {
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub wells: Vec<Well>,
    #[serde(default)]
    pub n_coords: usize,
}

impl GridHamiltonian {
    fn potential(&self, x: &[f64]) -> Vec<f64> {
        let positions: Vec<f64> = self.wells.iter().map(|w| w.position(x)).collect();
        (0..self.grid.points)
            .map(|k| {
                let xk = self.grid.x(k);
                self.wells
                    .iter()
                    .zip(&positions)
                    .map(|(w, &p)| -w.depth * (-(xk - p).powi(2) / (2.0 * w.width * w.width)).exp())
                    .sum()
            })
            .collect()
    }

    fn potential_derivative(&self, x: &[f64], i: usize) -> Vec<f64> {
        let positions: Vec<f64> = self.wells.iter().map(|w| w.position(x)).collect();
        (0..self.grid.points)
            .map(|k| {
                let xk = self.grid.x(k);
                self.wells
                    .iter()
                    .zip(&positions)
                    .map(|(w, &p)| {
                        let a = w.coupling.get(i).copied().unwrap_or(0.0);
                        if a == 0.0 {
                            return 0.0;
                        }
                        let u = xk - p;
                        -w.depth * (-(u * u) / (2.0 * w.width * w.width)).exp() * u / (w.width * w.width) * a
                    })
                    .sum()
            })
            .collect()
    }

    fn check(&self, x: &[f64], v: &CMat) -> Result<()> {
        check_len("grid hamiltonian coordinates", self.n_coords, x.len())?;
        check_len("grid hamiltonian input", self.grid.points, v.nrows())?;
        for w in &self.wells {
            if w.coupling.len() > self.n_coords {
                return Err(Error::InvalidParameter("well coupling longer than coordinate count".into()));
            }
        }
        Ok(())
    }
}

impl AmbientOperator for GridHamiltonian {
    fn ambient_dim(&self) -> usize {
        self.grid.points
    }

    fn n_coords(&self) -> usize {
        self.n_coords
    }

    fn apply(&self, x: &[f64], v: &CMat) -> Result<CMat> {
        self.check(x, v)?;
        let m = self.grid.points;
        let dx = self.grid.spacing();
        let kin = -0.5 / (self.mass * dx * dx);
        let pot = self.potential(x);
        let mut out = CMat::zeros(m, v.ncols());
        for col in 0..v.ncols() {
            for k in 0..m {
                let left = if k > 0 { v[(k - 1, col)] } else { C64::new(0.0, 0.0) };
                let right = if k + 1 < m { v[(k + 1, col)] } else { C64::new(0.0, 0.0) };
                out[(k, col)] = (left + right - v[(k, col)] * 2.0) * kin + v[(k, col)] * pot[k];
            }
        }
        Ok(out)
    }

    fn apply_derivative(&self, x: &[f64], i: usize, v: &CMat) -> Result<CMat> {
        self.check(x, v)?;
        let dpot = self.potential_derivative(x, i);
        Ok(CMat::from_fn(v.nrows(), v.ncols(), |k, col| v[(k, col)] * c(dpot[k], 0.0)))
    }
}
