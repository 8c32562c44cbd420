//! Dense complex tensor algebra for oblique frames.
//!
//! Index conventions: a ket has contravariant components `ψ^μ`, a bra has
//! covariant components `ψ_μ = ψ^{ν*} S_{νμ}`. Operators carry a [`Rep`] tag.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative threshold on the smallest metric eigenvalue.
pub const LIN_INDEP_THRESHOLD: f64 = 1e-8;
/// Absolute eigenvalue floor for matrix square roots.
pub const SQRT_EIG_FLOOR: f64 = 1e-12;
/// Pivot ratio below which an operator is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest absolute entry of a vector.
pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Hermitian part `(A + A†)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Anti-Hermitian part `(A − A†)/2`.
pub fn anti_hermitian_part(a: &CMat) -> CMat {
    (a - a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Builds `U diag(f(λ)) U†`.
fn spectral_map(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for k in 0..n {
        let w = f(values[k]);
        scaled.column_mut(k).scale_mut(w);
    }
    scaled * vectors.adjoint()
}

/// Coefficient vector in the fixed orthonormal ambient basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector {
    pub coeffs: CVec,
}

impl AmbientVector {
    pub fn new(coeffs: CVec) -> Self {
        Self { coeffs }
    }

    pub fn from_slice(values: &[C64]) -> Self {
        Self::new(CVec::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Ambient inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &AmbientVector) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }
}

/// N basis kets at a parameter point with cached metric and inverse metric.
#[derive(Debug, Clone)]
pub struct BasisFrame {
    vectors: CMat,
    metric: CMat,
    inv_metric: CMat,
    param: Vec<f64>,
}

/// Builds a frame from individual ambient vectors.
pub fn build_frame(vectors: &[AmbientVector], param: &[f64]) -> Result<BasisFrame> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "build_frame: number of vectors",
            expected: 1,
            found: 0,
        });
    }
    let m = vectors[0].len();
    let mut cols = CMat::zeros(m, n);
    for (mu, v) in vectors.iter().enumerate() {
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                context: "build_frame: ambient length",
                expected: m,
                found: v.len(),
            });
        }
        cols.set_column(mu, &v.coeffs);
    }
    BasisFrame::from_columns(cols, param.to_vec())
}

impl BasisFrame {
    /// Builds a frame from an `M×N` matrix whose columns are the basis kets.
    pub fn from_columns(vectors: CMat, param: Vec<f64>) -> Result<Self> {
        let (m, n) = vectors.shape();
        if n == 0 || m < n {
            return Err(Error::DimensionMismatch {
                context: "frame: ambient dimension must be at least N",
                expected: n.max(1),
                found: m,
            });
        }
        if vectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("frame vector has non-finite entry".into()));
        }
        let metric = hermitian_part(&(vectors.adjoint() * &vectors));
        let (values, _) = hermitian_eigh(&metric);
        let largest = values[n - 1];
        let threshold = LIN_INDEP_THRESHOLD * largest.max(0.0);
        if !(values[0] > threshold) {
            return Err(Error::SingularFrame {
                min_eigenvalue: values[0],
                threshold,
            });
        }
        let chol = Cholesky::new(metric.clone()).ok_or(Error::SingularFrame {
            min_eigenvalue: values[0],
            threshold,
        })?;
        let inv_metric = hermitian_part(&chol.inverse());
        Ok(Self {
            vectors,
            metric,
            inv_metric,
            param,
        })
    }

    /// Basis dimension N.
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Ambient dimension M.
    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// `M×N` matrix of basis kets.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn vector(&self, mu: usize) -> AmbientVector {
        AmbientVector::new(self.vectors.column(mu).into_owned())
    }

    /// `S_{μν}`.
    pub fn metric(&self) -> &CMat {
        &self.metric
    }

    /// `S^{μν}`.
    pub fn inv_metric(&self) -> &CMat {
        &self.inv_metric
    }

    pub fn param(&self) -> &[f64] {
        &self.param
    }

    /// Dual kets `|e^μ⟩ = |e_ν⟩ S^{νμ}` as an `M×N` matrix.
    pub fn duals(&self) -> CMat {
        &self.vectors * &self.inv_metric
    }

    /// Ambient projector onto the span, `P = Σ |e_μ⟩⟨e^μ|`.
    pub fn projector(&self) -> CMat {
        &self.vectors * &self.inv_metric * self.vectors.adjoint()
    }

    /// Applies the projector to a block of ambient columns.
    pub fn project_block(&self, v: &CMat) -> CMat {
        &self.vectors * (&self.inv_metric * (self.vectors.adjoint() * v))
    }

    /// Applies `Q = 1 − P` to a block of ambient columns.
    pub fn complement_block(&self, v: &CMat) -> CMat {
        v - self.project_block(v)
    }

    /// Ket components `⟨e^μ|v⟩` of an ambient vector.
    pub fn components_of(&self, v: &AmbientVector) -> Result<StateKet> {
        self.check_ambient(v)?;
        Ok(StateKet::new(&self.inv_metric * (self.vectors.adjoint() * &v.coeffs)))
    }

    /// Ambient vector `|e_μ⟩ψ^μ`.
    pub fn synthesize(&self, psi: &StateKet) -> Result<AmbientVector> {
        check_len("synthesize", self.dim(), psi.len())?;
        Ok(AmbientVector::new(&self.vectors * &psi.comps))
    }

    fn check_ambient(&self, v: &AmbientVector) -> Result<()> {
        check_len("ambient vector", self.ambient_dim(), v.len())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn check_square(context: &'static str, n: usize, m: &CMat) -> Result<()> {
    check_len(context, n, m.nrows())?;
    check_len(context, n, m.ncols())
}

/// `P v`.
pub fn project(frame: &BasisFrame, v: &AmbientVector) -> Result<AmbientVector> {
    frame.check_ambient(v)?;
    let block = CMat::from_column_slice(v.len(), 1, v.coeffs.as_slice());
    Ok(AmbientVector::new(frame.project_block(&block).column(0).into_owned()))
}

/// `(1 − P) v`.
pub fn complement_project(frame: &BasisFrame, v: &AmbientVector) -> Result<AmbientVector> {
    let p = project(frame, v)?;
    Ok(AmbientVector::new(&v.coeffs - p.coeffs))
}

/// Contravariant state components `ψ^μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateKet {
    pub comps: CVec,
}

/// Covariant state components `ψ_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBra {
    pub comps: CVec,
}

impl StateKet {
    pub fn new(comps: CVec) -> Self {
        Self { comps }
    }

    pub fn from_slice(values: &[C64]) -> Self {
        Self::new(CVec::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }
}

impl StateBra {
    pub fn new(comps: CVec) -> Self {
        Self { comps }
    }

    pub fn from_slice(values: &[C64]) -> Self {
        Self::new(CVec::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// Full contraction `ψ_μ φ^μ`.
    pub fn contract(&self, ket: &StateKet) -> C64 {
        self.comps.dot(&ket.comps)
    }
}

/// `ψ_μ = ψ^{ν*} S_{νμ}`.
pub fn lower_bra(psi: &StateKet, frame: &BasisFrame) -> Result<StateBra> {
    check_len("lower_bra", frame.dim(), psi.len())?;
    Ok(StateBra::new((frame.metric() * &psi.comps).conjugate()))
}

/// `ψ^μ = S^{μν} ψ_ν^*`.
pub fn raise_ket(bra: &StateBra, frame: &BasisFrame) -> Result<StateKet> {
    check_len("raise_ket", frame.dim(), bra.len())?;
    Ok(StateKet::new(frame.inv_metric() * bra.comps.conjugate()))
}

/// Index placement of a second-rank tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rep {
    /// `H^μ_ν = ⟨e^μ|H|e_ν⟩`.
    Natural,
    /// `H_{μν} = ⟨e_μ|H|e_ν⟩`.
    Matrix,
    /// `H^{μν} = ⟨e^μ|H|e^ν⟩`.
    UpperUpper,
}

impl Rep {
    pub fn name(self) -> &'static str {
        match self {
            Rep::Natural => "natural",
            Rep::Matrix => "matrix",
            Rep::UpperUpper => "upper_upper",
        }
    }
}

/// Second-rank operator tensor with its index placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub entries: CMat,
    pub rep: Rep,
}

impl Operator {
    pub fn new(entries: CMat, rep: Rep) -> Self {
        Self { entries, rep }
    }

    pub fn natural(entries: CMat) -> Self {
        Self::new(entries, Rep::Natural)
    }

    pub fn matrix(entries: CMat) -> Self {
        Self::new(entries, Rep::Matrix)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn expect_rep(&self, rep: Rep) -> Result<()> {
        if self.rep == rep {
            Ok(())
        } else {
            Err(Error::RepMismatch {
                expected: rep.name(),
                found: self.rep.name(),
            })
        }
    }
}

/// Re-expresses an operator in another index placement.
pub fn convert_rep(op: &Operator, frame: &BasisFrame, target: Rep) -> Result<Operator> {
    check_square("convert_rep", frame.dim(), &op.entries)?;
    let s = frame.metric();
    let si = frame.inv_metric();
    let natural = match op.rep {
        Rep::Natural => op.entries.clone(),
        Rep::Matrix => si * &op.entries,
        Rep::UpperUpper => &op.entries * s,
    };
    let entries = match target {
        Rep::Natural => natural,
        Rep::Matrix => s * natural,
        Rep::UpperUpper => natural * si,
    };
    Ok(Operator::new(entries, target))
}

/// Deviation from Hermiticity under the rule of the operator's placement.
///
/// For the natural placement the rule is `H^μ_ν = (S_{νλ} H^λ_σ S^{σμ})^*`.
pub fn hermiticity_residual(op: &Operator, frame: &BasisFrame) -> Result<f64> {
    check_square("hermiticity_residual", frame.dim(), &op.entries)?;
    let h = &op.entries;
    let mirrored = match op.rep {
        Rep::Natural => (frame.metric() * h * frame.inv_metric()).adjoint(),
        Rep::Matrix | Rep::UpperUpper => h.adjoint(),
    };
    Ok(max_abs(&(h - mirrored)))
}

/// Returns `(S^{1/2}, S^{-1/2})` for a Hermitian positive definite `S`.
pub fn herm_sqrt_pair(s: &CMat) -> Result<(CMat, CMat)> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch {
            context: "herm_sqrt_pair: square input",
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    let (values, vectors) = hermitian_eigh(s);
    if let Some(&bad) = values.iter().find(|&&v| !(v > SQRT_EIG_FLOOR)) {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: bad,
            floor: SQRT_EIG_FLOOR,
        });
    }
    let root = hermitian_part(&spectral_map(&values, &vectors, f64::sqrt));
    let inv_root = hermitian_part(&spectral_map(&values, &vectors, |v| 1.0 / v.sqrt()));
    Ok((root, inv_root))
}

/// Inverse second-rank tensor.
///
/// A lower-lower `A_{μν}` yields `B^{μν}` with `A_{νσ}B^{σμ} = δ`; a natural
/// `A^μ_ν` yields a natural `B` with `A^μ_σ B^σ_ν = δ`; upper-upper yields
/// lower-lower.
pub fn invert_second_rank(op: &Operator) -> Result<Operator> {
    let n = op.dim();
    check_square("invert_second_rank", n, &op.entries)?;
    let lu = LU::new(op.entries.clone());
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|k| u[(k, k)].norm()).collect();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    let smallest = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || smallest <= SINGULAR_PIVOT_RATIO * largest {
        return Err(Error::SingularOperator);
    }
    let inverse = lu.solve(&identity(n)).ok_or(Error::SingularOperator)?;
    let rep = match op.rep {
        Rep::Natural => Rep::Natural,
        Rep::Matrix => Rep::UpperUpper,
        Rep::UpperUpper => Rep::Matrix,
    };
    Ok(Operator::new(inverse, rep))
}

/// Solves `A X = B` by LU factorization.
pub fn lu_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    LU::new(a.clone()).solve(b).ok_or(Error::SingularOperator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_frame(s: f64) -> BasisFrame {
        let a = AmbientVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = AmbientVector::from_slice(&[c(s, 0.0), c((1.0 - s * s).sqrt(), 0.0)]);
        build_frame(&[a, b], &[]).unwrap()
    }

    #[test]
    fn overlapping_pair_metric_and_inverse() {
        let s = 0.3;
        let f = pair_frame(s);
        let expected = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(s, 0.0), c(s, 0.0), c(1.0, 0.0)]);
        assert!(max_abs(&(f.metric() - &expected)) < 1e-14);
        let k = 1.0 / (1.0 - s * s);
        let inv = CMat::from_row_slice(2, 2, &[c(k, 0.0), c(-s * k, 0.0), c(-s * k, 0.0), c(k, 0.0)]);
        assert!(max_abs(&(f.inv_metric() - inv)) < 1e-14);
    }

    #[test]
    fn parallel_vectors_are_rejected() {
        let a = AmbientVector::from_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let b = AmbientVector::from_slice(&[c(2.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(build_frame(&[a, b], &[]), Err(Error::SingularFrame { .. })));
    }

    #[test]
    fn ragged_input_is_rejected() {
        let a = AmbientVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = AmbientVector::from_slice(&[c(1.0, 0.0)]);
        assert!(matches!(build_frame(&[a, b], &[]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lowering_examples() {
        let id = pair_frame(0.0);
        let bra = lower_bra(&StateKet::from_slice(&[c(1.0, 0.0), c(0.0, 1.0)]), &id).unwrap();
        assert!((bra.comps[1] - c(0.0, -1.0)).norm() < 1e-15);
        let f = pair_frame(0.4);
        let bra = lower_bra(&StateKet::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]), &f).unwrap();
        assert!((bra.comps[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((bra.comps[1] - c(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sqrt_pair_of_overlap_matrix() {
        let s = 0.6;
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(s, 0.0), c(s, 0.0), c(1.0, 0.0)]);
        let (root, inv_root) = herm_sqrt_pair(&m).unwrap();
        let a = (1.0 + s).sqrt();
        let b = (1.0 - s).sqrt();
        assert!((root[(0, 0)].re - (a + b) / 2.0).abs() < 1e-14);
        assert!((root[(0, 1)].re - (a - b) / 2.0).abs() < 1e-14);
        assert!((inv_root[(0, 0)].re - (1.0 / a + 1.0 / b) / 2.0).abs() < 1e-14);
        assert!((inv_root[(0, 1)].re - (1.0 / a - 1.0 / b) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_pair_rejects_indefinite() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(herm_sqrt_pair(&m), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn inverse_of_diagonal_natural() {
        let a = Operator::natural(CMat::from_diagonal(&CVec::from_column_slice(&[c(2.0, 0.0), c(4.0, 0.0)])));
        let b = invert_second_rank(&a).unwrap();
        assert_eq!(b.rep, Rep::Natural);
        assert!((b.entries[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((b.entries[(1, 1)] - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_of_metric_is_inverse_metric() {
        let f = pair_frame(0.7);
        let b = invert_second_rank(&Operator::matrix(f.metric().clone())).unwrap();
        assert_eq!(b.rep, Rep::UpperUpper);
        assert!(max_abs(&(b.entries - f.inv_metric())) < 1e-12);
    }

    #[test]
    fn singular_operator_is_rejected() {
        let a = Operator::matrix(CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]));
        assert_eq!(invert_second_rank(&a), Err(Error::SingularOperator));
    }
}
