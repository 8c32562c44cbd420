//! Time propagation in an evolving frame.
//!
//! All integrators work in the matrix representation. A step maps the
//! coefficient block `C` (one column per state) at time `t` to `t + dt`:
//!
//! | kind | update |
//! |---|---|
//! | `cn_fixed` | `CN(t) C`, frame frozen |
//! | `cn_moving_naive` | Crank–Nicholson with `H − i D_{••t}` |
//! | `cn_moving_gauge` | `S⁻¹(t+dt) A_{••}(t+dt:t) CN(t) C` |
//! | `cn_moving_sc` | `[S + i dt/2 H](t+dt)⁻¹ A_{••}(t+dt:t) (1 − i dt/2 S⁻¹H)(t) C` |
//! | `lowdin` | `S^{-1/2}(t+dt) S^{1/2}(t) CN(t) C` |
//! | `cn_unitary_*` | as above, then `C 𝒮^{-1/2}` |
//!
//! with `CN(t) = [S + i dt/2 H]⁻¹ [S − i dt/2 H]` evaluated at `t`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ambient::AmbientOperator;
use crate::basis::{frame_derivatives, DerivativeScheme, FrameSource, Law};
use crate::connection::christoffel;
use crate::curvature::berry_connection_trace;
use crate::error::{Error, Result};
use crate::tensor_core::{
    anti_hermitian_part, check_len, herm_sqrt_pair, hermitian_part, identity, lu_solve, max_abs, BasisFrame, CMat,
    Rep, StateKet, C64, I,
};

/// Maps time to a parameter point, `R^i(t)`, with velocities `v^i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub laws: Vec<Law>,
}

impl Trajectory {
    /// `R = t` for one-parameter families whose parameter is time.
    pub fn time() -> Self {
        Self {
            laws: vec![Law::linear(0.0, 1.0)],
        }
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.laws.iter().map(|l| l.value(t)).collect()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.laws.iter().map(|l| l.d1(t)).collect()
    }
}

/// Hamiltonian supplier in the matrix representation.
pub trait TimeHamiltonian: Send + Sync {
    /// `H_{μν}` at time `t`, parameter point `r`, for the given frame. The
    /// current coefficient block is passed for state-dependent suppliers.
    fn matrix(&self, t: f64, r: &[f64], frame: &BasisFrame, states: &CMat) -> Result<CMat>;

    fn depends_on_state(&self) -> bool {
        false
    }
}

/// What an ambient Hamiltonian is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianArgument {
    /// `H([t])`.
    Time,
    /// `H(R(t))`.
    Trajectory,
}

/// Projects an ambient operator onto the frame: `H_{μν} = ⟨e_μ|H|e_ν⟩`.
#[derive(Clone)]
pub struct AmbientHamiltonian {
    pub op: Arc<dyn AmbientOperator>,
    pub argument: HamiltonianArgument,
}

impl TimeHamiltonian for AmbientHamiltonian {
    fn matrix(&self, t: f64, r: &[f64], frame: &BasisFrame, _states: &CMat) -> Result<CMat> {
        let x = match self.argument {
            HamiltonianArgument::Time => vec![t],
            HamiltonianArgument::Trajectory => r.to_vec(),
        };
        let v = frame.vectors();
        Ok(hermitian_part(&self.op.sandwich(&x, v, v)?))
    }
}

/// Frame family, its trajectory and the Hamiltonian.
#[derive(Clone)]
pub struct PropagationModel {
    pub family: Arc<dyn FrameSource>,
    pub trajectory: Trajectory,
    pub hamiltonian: Arc<dyn TimeHamiltonian>,
}

impl PropagationModel {
    pub fn frame_at(&self, t: f64) -> Result<BasisFrame> {
        self.family.frame(&self.trajectory.point(t))
    }

    /// `D_{μνt} = v^i D_{μνi}` at time `t`.
    pub fn temporal_christoffel(&self, t: f64, frame: &BasisFrame) -> Result<CMat> {
        let r = self.trajectory.point(t);
        let derivs = frame_derivatives(self.family.as_ref(), &r, DerivativeScheme::Analytic)?;
        christoffel(frame, &derivs)?.contract_down_down(&self.trajectory.velocity(t))
    }

    fn hamiltonian_at(&self, t: f64, frame: &BasisFrame, states: &CMat) -> Result<CMat> {
        self.hamiltonian.matrix(t, &self.trajectory.point(t), frame, states)
    }
}

/// Integrator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorTag {
    CnFixed,
    CnMovingNaive,
    CnMovingGauge,
    CnMovingSc,
    Lowdin,
    CnUnitaryGauge,
    CnUnitarySc,
}

impl PropagatorTag {
    pub const ALL: [PropagatorTag; 7] = [
        PropagatorTag::CnFixed,
        PropagatorTag::CnMovingNaive,
        PropagatorTag::CnMovingGauge,
        PropagatorTag::CnMovingSc,
        PropagatorTag::Lowdin,
        PropagatorTag::CnUnitaryGauge,
        PropagatorTag::CnUnitarySc,
    ];

    pub fn is_unitary_variant(self) -> bool {
        matches!(self, PropagatorTag::CnUnitaryGauge | PropagatorTag::CnUnitarySc)
    }
}

/// When the `cn_unitary_*` kinds re-orthonormalize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Cadence {
    EveryStep,
    /// Every `n`-th step, counted on the bundle's step counter.
    Every { n: usize },
    /// Whenever `‖𝒮 − I‖_∞` exceeds `tol`.
    Tolerance {
        #[serde(default = "default_reortho_tol")]
        tol: f64,
    },
}

fn default_reortho_tol() -> f64 {
    1e-8
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence::EveryStep
    }
}

fn default_sc_tol() -> f64 {
    1e-12
}

fn default_sc_max_iter() -> usize {
    50
}

/// Integrator and its step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorKind {
    pub tag: PropagatorTag,
    pub dt: f64,
    #[serde(default = "default_sc_tol")]
    pub sc_tol: f64,
    #[serde(default = "default_sc_max_iter")]
    pub sc_max_iter: usize,
    #[serde(default)]
    pub cadence: Cadence,
}

impl PropagatorKind {
    pub fn new(tag: PropagatorTag, dt: f64) -> Self {
        Self {
            tag,
            dt,
            sc_tol: default_sc_tol(),
            sc_max_iter: default_sc_max_iter(),
            cadence: Cadence::EveryStep,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.dt == 0.0 || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be finite and non-zero, got {}", self.dt)));
        }
        if !(self.sc_tol > 0.0) || self.sc_max_iter == 0 {
            return Err(Error::InvalidParameter("sc_tol and sc_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A set of states sharing one frame.
#[derive(Debug, Clone)]
pub struct StateBundle {
    /// `N × K` block, column `m` holds `ψ^μ_m`.
    pub coeffs: CMat,
    pub time: f64,
    pub frame: BasisFrame,
    pub steps: usize,
}

impl StateBundle {
    pub fn new(coeffs: CMat, time: f64, frame: BasisFrame) -> Result<Self> {
        check_len("bundle coefficients", frame.dim(), coeffs.nrows())?;
        Ok(Self {
            coeffs,
            time,
            frame,
            steps: 0,
        })
    }

    /// Bundle from individual kets.
    pub fn from_kets(kets: &[StateKet], time: f64, frame: BasisFrame) -> Result<Self> {
        let n = frame.dim();
        let mut coeffs = CMat::zeros(n, kets.len());
        for (m, k) in kets.iter().enumerate() {
            check_len("bundle ket", n, k.len())?;
            coeffs.set_column(m, &k.comps);
        }
        Self::new(coeffs, time, frame)
    }

    pub fn n_states(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn kets(&self) -> Vec<StateKet> {
        (0..self.n_states())
            .map(|m| StateKet::new(self.coeffs.column(m).into_owned()))
            .collect()
    }

    /// `𝒮_{nm} = ψ_{μn} ψ^μ_m = ψ_n† S ψ_m`.
    pub fn overlap_matrix(&self) -> CMat {
        self.coeffs.adjoint() * self.frame.metric() * &self.coeffs
    }

    /// `‖𝒮 − I‖_∞` as the largest absolute entry.
    pub fn orthonormality_deviation(&self) -> f64 {
        let k = self.n_states();
        max_abs(&(self.overlap_matrix() - identity(k)))
    }
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub bundle: StateBundle,
    /// Linear solves performed by the self-consistent kinds.
    pub sc_iterations: usize,
    pub reorthonormalized: bool,
}

fn cn_apply(s: &CMat, h: &CMat, dt: f64, c: &CMat) -> Result<CMat> {
    let a = I * (0.5 * dt);
    let lhs = s + h * a;
    let rhs = (s - h * a) * c;
    lu_solve(&lhs, &rhs)
}

/// `C 𝒮^{-1/2}` with `𝒮 = C† S C`.
pub fn reorthonormalize(coeffs: &CMat, metric: &CMat) -> Result<CMat> {
    let overlap = hermitian_part(&(coeffs.adjoint() * metric * coeffs));
    let (_, inv_root) = herm_sqrt_pair(&overlap)?;
    Ok(coeffs * inv_root)
}

/// Advances the bundle by one step of `kind`.
pub fn step(kind: &PropagatorKind, bundle: &StateBundle, model: &PropagationModel) -> Result<StateBundle> {
    Ok(step_with_info(kind, bundle, model)?.bundle)
}

/// [`step`] with iteration and re-orthonormalization diagnostics.
pub fn step_with_info(kind: &PropagatorKind, bundle: &StateBundle, model: &PropagationModel) -> Result<StepOutcome> {
    kind.validate()?;
    let dt = kind.dt;
    let t0 = bundle.time;
    let t1 = t0 + dt;
    let f0 = &bundle.frame;
    let c0 = &bundle.coeffs;
    let s0 = f0.metric();
    let h0 = model.hamiltonian_at(t0, f0, c0)?;
    let mut sc_iterations = 0;

    let (coeffs, frame) = match kind.tag {
        PropagatorTag::CnFixed => (cn_apply(s0, &h0, dt, c0)?, f0.clone()),
        PropagatorTag::CnMovingNaive => {
            let d_t = model.temporal_christoffel(t0, f0)?;
            let h_eff = &h0 - d_t * I;
            (cn_apply(s0, &h_eff, dt, c0)?, model.frame_at(t1)?)
        }
        PropagatorTag::CnMovingGauge | PropagatorTag::CnUnitaryGauge => {
            let f1 = model.frame_at(t1)?;
            let cross = f1.vectors().adjoint() * f0.vectors();
            let moved = f1.inv_metric() * cross * cn_apply(s0, &h0, dt, c0)?;
            (moved, f1)
        }
        PropagatorTag::CnMovingSc | PropagatorTag::CnUnitarySc => {
            let f1 = model.frame_at(t1)?;
            let cross = f1.vectors().adjoint() * f0.vectors();
            let explicit = f0.inv_metric() * &h0 * c0;
            let rhs = &cross * (c0 - explicit * (I * (0.5 * dt)));
            let a = I * (0.5 * dt);
            let solve = |h1: &CMat| lu_solve(&(f1.metric() + h1 * a), &rhs);
            let mut guess = f1.inv_metric() * &cross * cn_apply(s0, &h0, dt, c0)?;
            if model.hamiltonian.depends_on_state() {
                loop {
                    let h1 = model.hamiltonian_at(t1, &f1, &guess)?;
                    let next = solve(&h1)?;
                    sc_iterations += 1;
                    let change = max_abs(&(&next - &guess));
                    guess = next;
                    if change < kind.sc_tol {
                        break;
                    }
                    if sc_iterations >= kind.sc_max_iter {
                        return Err(Error::ScNotConverged {
                            iterations: sc_iterations,
                            residual: change,
                        });
                    }
                }
            } else {
                let h1 = model.hamiltonian_at(t1, &f1, &guess)?;
                guess = solve(&h1)?;
                sc_iterations = 1;
            }
            (guess, f1)
        }
        PropagatorTag::Lowdin => {
            let f1 = model.frame_at(t1)?;
            let (root0, _) = herm_sqrt_pair(s0)?;
            let (_, inv_root1) = herm_sqrt_pair(f1.metric())?;
            (inv_root1 * root0 * cn_apply(s0, &h0, dt, c0)?, f1)
        }
    };

    let steps = bundle.steps + 1;
    let mut out = StateBundle {
        coeffs,
        time: t1,
        frame,
        steps,
    };
    let mut reorthonormalized = false;
    if kind.tag.is_unitary_variant() {
        let due = match kind.cadence {
            Cadence::EveryStep => true,
            Cadence::Every { n } => n > 0 && steps % n == 0,
            Cadence::Tolerance { tol } => out.orthonormality_deviation() > tol,
        };
        if due {
            out.coeffs = reorthonormalize(&out.coeffs, out.frame.metric())?;
            reorthonormalized = true;
        }
    }
    Ok(StepOutcome {
        bundle: out,
        sc_iterations,
        reorthonormalized,
    })
}

/// Effective connection of the Löwdin propagator,
/// `G^μ_{νt} = −∂_t S^{-1/2 μλ} S^{1/2}_{λν}`, with a central difference of
/// `S^{-1/2}` over `t ± dt_fd`.
pub fn g_tensor(family: &dyn FrameSource, trajectory: &Trajectory, t: f64, dt_fd: f64) -> Result<CMat> {
    if !(dt_fd > 0.0) {
        return Err(Error::InvalidParameter(format!("dt_fd must be positive, got {dt_fd}")));
    }
    let inv_root = |time: f64| -> Result<CMat> {
        let frame = family.frame(&trajectory.point(time))?;
        Ok(herm_sqrt_pair(frame.metric())?.1)
    };
    let frame = family.frame(&trajectory.point(t))?;
    let (root, _) = herm_sqrt_pair(frame.metric())?;
    let d_inv_root = (inv_root(t + dt_fd)? - inv_root(t - dt_fd)?).unscale(2.0 * dt_fd);
    Ok(-(d_inv_root * root))
}

/// Comparison of the gauge connection `D^•_{•t}` with the Löwdin `G`.
#[derive(Debug, Clone, Serialize)]
pub struct DgReport {
    pub time: f64,
    pub max_abs_diff: f64,
    pub frobenius_diff: f64,
    /// Frobenius norm of the anti-Hermitian part of `S(D − G)`.
    pub rotation_part_norm: f64,
    /// Frobenius norm of the Hermitian part of `S(D − G)`.
    pub deformation_part_norm: f64,
    #[serde(skip)]
    pub d_natural: CMat,
    #[serde(skip)]
    pub g: CMat,
    #[serde(skip)]
    pub diff_lower: CMat,
}

/// Quantifies how far the Löwdin propagator's implied connection is from `D`.
pub fn compare_d_vs_g(family: &dyn FrameSource, trajectory: &Trajectory, t: f64, dt_fd: f64) -> Result<DgReport> {
    let r = trajectory.point(t);
    let frame = family.frame(&r)?;
    let derivs = frame_derivatives(family, &r, DerivativeScheme::Analytic)?;
    let chris = christoffel(&frame, &derivs)?;
    let d_lower = chris.contract_down_down(&trajectory.velocity(t))?;
    let d_natural = frame.inv_metric() * &d_lower;
    let g = g_tensor(family, trajectory, t, dt_fd)?;
    let diff = &d_natural - &g;
    let diff_lower = frame.metric() * &diff;
    Ok(DgReport {
        time: t,
        max_abs_diff: max_abs(&diff),
        frobenius_diff: diff.norm(),
        rotation_part_norm: anti_hermitian_part(&diff_lower).norm(),
        deformation_part_norm: hermitian_part(&diff_lower).norm(),
        d_natural,
        g,
        diff_lower,
    })
}

/// Density tensor in natural (`ρ^μ_ν`) or upper-upper (`ρ^{μν}`) placement.
#[derive(Debug, Clone)]
pub struct DensityTensor {
    pub rho: CMat,
    pub rep: Rep,
    pub time: f64,
    pub frame: BasisFrame,
}

impl DensityTensor {
    /// `ρ = Σ_m ψ_m ψ_m†` built from a bundle.
    pub fn from_bundle(bundle: &StateBundle, rep: Rep) -> Result<Self> {
        let upper = &bundle.coeffs * bundle.coeffs.adjoint();
        let rho = match rep {
            Rep::UpperUpper => upper,
            Rep::Natural => upper * bundle.frame.metric(),
            Rep::Matrix => {
                return Err(Error::RepMismatch {
                    expected: "natural or upper_upper",
                    found: "matrix",
                })
            }
        };
        Ok(Self {
            rho,
            rep,
            time: bundle.time,
            frame: bundle.frame.clone(),
        })
    }

    fn upper_upper(&self) -> CMat {
        match self.rep {
            Rep::Natural => &self.rho * self.frame.inv_metric(),
            _ => self.rho.clone(),
        }
    }

    /// `S_{μν}ρ^{νμ}`, equal to `ρ^μ_μ`.
    pub fn trace(&self) -> C64 {
        (self.frame.metric() * self.upper_upper()).trace()
    }

    /// Idempotency defect `max |ρρ − ρ|` in the natural placement.
    pub fn idempotency_defect(&self) -> f64 {
        let nat = self.upper_upper() * self.frame.metric();
        max_abs(&(&nat * &nat - &nat))
    }
}

/// One step of the Liouville–von Neumann equation.
///
/// The step map `T` of the chosen kind acts as `ρ^{μν} → T ρ T†`, which is
/// the Crank–Nicholson discretization of `i ð_t ρ = [H, ρ]` on both sides.
pub fn liouville_step(rho: &DensityTensor, kind: &PropagatorKind, model: &PropagationModel) -> Result<DensityTensor> {
    if kind.tag.is_unitary_variant() {
        return Err(Error::Unsupported("re-orthonormalizing kinds act on state sets, not on densities".into()));
    }
    if model.hamiltonian.depends_on_state() {
        return Err(Error::Unsupported("density steps need a state-independent Hamiltonian".into()));
    }
    if !matches!(rho.rep, Rep::Natural | Rep::UpperUpper) {
        return Err(Error::RepMismatch {
            expected: "natural or upper_upper",
            found: rho.rep.name(),
        });
    }
    let n = rho.frame.dim();
    let probe = StateBundle::new(identity(n), rho.time, rho.frame.clone())?;
    let moved = step(kind, &probe, model)?;
    let t = &moved.coeffs;
    let upper = t * rho.upper_upper() * t.adjoint();
    let out = match rho.rep {
        Rep::Natural => upper * moved.frame.metric(),
        _ => upper,
    };
    Ok(DensityTensor {
        rho: out,
        rep: rho.rep,
        time: moved.time,
        frame: moved.frame,
    })
}

/// Which optional observables [`run_trajectory`] records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observers {
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub berry: bool,
    #[serde(default)]
    pub overlap_matrix: bool,
}

fn yes() -> bool {
    true
}

impl Default for Observers {
    fn default() -> Self {
        Self {
            energy: true,
            berry: true,
            overlap_matrix: false,
        }
    }
}

/// Observables after one step.
#[derive(Debug, Clone, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub time: f64,
    /// `√(ψ_m† S ψ_m)` per state.
    pub norms: Vec<f64>,
    /// `Re ψ_m† H ψ_m` per state.
    pub energies: Vec<f64>,
    pub ortho_deviation: f64,
    /// `i tr D^•_{•i}` per parameter as `(re, im)`.
    pub berry: Vec<(f64, f64)>,
    /// `𝒮` as row-major `(re, im)` pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<Vec<(f64, f64)>>,
    pub sc_iterations: usize,
}

/// Per-step record of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableLog {
    pub kind: PropagatorKind,
    pub n_states: usize,
    pub n_params: usize,
    pub rows: Vec<LogRow>,
}

impl ObservableLog {
    pub fn max_ortho_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.ortho_deviation).fold(0.0, f64::max)
    }
}

fn observe(bundle: &StateBundle, model: &PropagationModel, observers: &Observers, sc_iterations: usize) -> Result<LogRow> {
    let overlap = bundle.overlap_matrix();
    let k = bundle.n_states();
    let norms = (0..k).map(|m| overlap[(m, m)].re.max(0.0).sqrt()).collect();
    let energies = if observers.energy {
        let h = model.hamiltonian_at(bundle.time, &bundle.frame, &bundle.coeffs)?;
        let e = bundle.coeffs.adjoint() * h * &bundle.coeffs;
        (0..k).map(|m| e[(m, m)].re).collect()
    } else {
        Vec::new()
    };
    let berry = if observers.berry {
        let r = bundle.frame.param().to_vec();
        let derivs = frame_derivatives(model.family.as_ref(), &r, DerivativeScheme::Analytic)?;
        berry_connection_trace(&christoffel(&bundle.frame, &derivs)?)
            .into_iter()
            .map(|z| (z.re, z.im))
            .collect()
    } else {
        Vec::new()
    };
    Ok(LogRow {
        step: bundle.steps,
        time: bundle.time,
        norms,
        energies,
        ortho_deviation: max_abs(&(&overlap - identity(k))),
        berry,
        overlap: observers
            .overlap_matrix
            .then(|| overlap.transpose().iter().map(|z| (z.re, z.im)).collect()),
        sc_iterations,
    })
}

/// Runs `n_steps` steps and records observables after each.
pub fn run_trajectory(
    kind: &PropagatorKind,
    bundle0: &StateBundle,
    model: &PropagationModel,
    n_steps: usize,
    observers: &Observers,
) -> Result<(ObservableLog, StateBundle)> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    let mut bundle = bundle0.clone();
    let mut rows = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let outcome = step_with_info(kind, &bundle, model)?;
        bundle = outcome.bundle;
        rows.push(observe(&bundle, model, observers, outcome.sc_iterations)?);
    }
    Ok((
        ObservableLog {
            kind: *kind,
            n_states: bundle0.n_states(),
            n_params: model.family.n_params(),
            rows,
        },
        bundle,
    ))
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogLogFit {
    pub order: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln y = order · ln x + intercept`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("log-log fit needs at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(LogLogFit {
        order,
        intercept,
        r_squared,
    })
}
