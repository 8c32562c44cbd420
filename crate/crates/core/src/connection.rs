//! Affine connection of an evolving frame.
//!
//! Only `D_{μνi} = ⟨e_μ|∂_i e_ν⟩` is stored. Every other index placement is
//! derived from it with the metric; [`verify_connection_identities`] checks
//! the whole relation algebra against ambient inner products computed
//! independently from the frame vectors.

use serde::Serialize;

use crate::basis::{frame_gauge_overlap, FrameDerivatives, Placement};
use crate::error::{Error, Result};
use crate::tensor_core::{
    anti_hermitian_part, check_len, check_square, hermitian_part, max_abs, BasisFrame, CMat, CVec, Operator, Rep,
    StateBra, StateKet,
};

/// Index placement of a Christoffel symbol. `I` marks the derivative slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `D^μ_{νi} = ⟨e^μ|∂_i e_ν⟩`
    UpDownI,
    /// `D^μ_{iν} = ⟨∂_i e^μ|e_ν⟩`
    UpIDown,
    /// `D_{μi}^ν = ⟨∂_i e_μ|e^ν⟩`
    DownIUp,
    /// `D_μ^ν_i = ⟨e_μ|∂_i e^ν⟩`
    DownUpI,
    /// `D_{μνi} = ⟨e_μ|∂_i e_ν⟩`
    DownDownI,
    /// `D_{μiν} = ⟨∂_i e_μ|e_ν⟩`
    DownIDown,
    /// `D^μ_i^ν = ⟨∂_i e^μ|e^ν⟩`
    UpIUp,
    /// `D^{μν}_i = ⟨e^μ|∂_i e^ν⟩`
    UpUpI,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::UpDownI,
        Variant::UpIDown,
        Variant::DownIUp,
        Variant::DownUpI,
        Variant::DownDownI,
        Variant::DownIDown,
        Variant::UpIUp,
        Variant::UpUpI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::UpDownI => "D^mu_(nu i)",
            Variant::UpIDown => "D^mu_(i nu)",
            Variant::DownIUp => "D_(mu i)^nu",
            Variant::DownUpI => "D_mu^nu_i",
            Variant::DownDownI => "D_(mu nu i)",
            Variant::DownIDown => "D_(mu i nu)",
            Variant::UpIUp => "D^mu_i^nu",
            Variant::UpUpI => "D^(mu nu)_i",
        }
    }
}

/// Connection coefficients at one parameter point.
#[derive(Debug, Clone)]
pub struct ChristoffelSet {
    d_down_down: Vec<CMat>,
    frame: BasisFrame,
}

/// `D_{μνi} = ⟨e_μ|∂_i e_ν⟩` from the frame and its derivative vectors.
pub fn christoffel(frame: &BasisFrame, derivs: &FrameDerivatives) -> Result<ChristoffelSet> {
    let d_down_down = derivs
        .d_vectors
        .iter()
        .map(|dv| {
            check_len("christoffel: derivative ambient dimension", frame.ambient_dim(), dv.nrows())?;
            check_len("christoffel: derivative basis dimension", frame.dim(), dv.ncols())?;
            Ok(frame.vectors().adjoint() * dv)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChristoffelSet {
        d_down_down,
        frame: frame.clone(),
    })
}

impl ChristoffelSet {
    /// Builds a set directly from `D_{μνi}` blocks.
    pub fn from_down_down(frame: &BasisFrame, d_down_down: Vec<CMat>) -> Result<Self> {
        for d in &d_down_down {
            check_square("christoffel block", frame.dim(), d)?;
        }
        Ok(Self {
            d_down_down,
            frame: frame.clone(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.d_down_down.len()
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &BasisFrame {
        &self.frame
    }

    /// Stored `D_{μνi}`.
    pub fn down_down(&self, i: usize) -> &CMat {
        &self.d_down_down[i]
    }

    /// `D^μ_{νi} = S^{μσ} D_{σνi}`.
    pub fn natural(&self, i: usize) -> CMat {
        self.frame.inv_metric() * &self.d_down_down[i]
    }

    /// Any index placement, derived from the stored one.
    pub fn variant(&self, v: Variant, i: usize) -> CMat {
        let d = &self.d_down_down[i];
        let si = self.frame.inv_metric();
        match v {
            Variant::UpDownI => si * d,
            Variant::UpIDown => -(si * d),
            Variant::DownIUp => d.adjoint() * si,
            Variant::DownUpI => -(d.adjoint() * si),
            Variant::DownDownI => d.clone(),
            Variant::DownIDown => d.adjoint(),
            Variant::UpIUp => -(si * d * si),
            Variant::UpUpI => -(si * d.adjoint() * si),
        }
    }

    /// `∂_i S_{μν} = D_{μiν} + D_{μνi}`.
    pub fn metric_derivative(&self, i: usize) -> CMat {
        let d = &self.d_down_down[i];
        d + d.adjoint()
    }

    /// `∂_i S^{μν} = −S^{μσ}(∂_i S_{σλ})S^{λν}`.
    pub fn inv_metric_derivative(&self, i: usize) -> CMat {
        let si = self.frame.inv_metric();
        -(si * self.metric_derivative(i) * si)
    }

    /// Velocity contraction `v^i D_{μνi}`.
    pub fn contract_down_down(&self, velocity: &[f64]) -> Result<CMat> {
        check_len("velocity", self.n_params(), velocity.len())?;
        let n = self.dim();
        Ok(self
            .d_down_down
            .iter()
            .zip(velocity)
            .fold(CMat::zeros(n, n), |acc, (d, &v)| acc + d.scale(v)))
    }
}

/// Maximum residuals of the connection relation algebra, each relative to
/// `‖D‖_∞ + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    pub shifting: [f64; 4],
    pub conjugation: [f64; 4],
    pub raising_lowering: [f64; 8],
    pub derived: [f64; 6],
    pub metric_constancy: [f64; 2],
    pub stored_vs_ambient: [f64; 8],
    pub scale: f64,
}

const SHIFTING_NAMES: [&str; 4] = [
    "D^mu_(nu i) + D^mu_(i nu) = 0",
    "D_mu^nu_i + D_(mu i)^nu = 0",
    "D_(mu nu i) + D_(mu i nu) = d S_(mu nu)",
    "D^(mu nu)_i + D^mu_i^nu = d S^(mu nu)",
];
const CONJUGATION_NAMES: [&str; 4] = [
    "D^mu_(nu i) = conj D_(nu i)^mu",
    "D^mu_(i nu) = conj D_nu^mu_i",
    "D_(mu nu i) = conj D_(nu i mu)",
    "D^mu_i^nu = conj D^(nu mu)_i",
];
const RAISING_NAMES: [&str; 8] = [
    "D^mu_(nu i) = S^(mu s) D_(s nu i)",
    "D^mu_(i nu) = D^mu_i^s S_(s nu)",
    "D_mu^nu_i = S_(mu s) D^(s nu)_i",
    "D_(mu i)^nu = D_(mu i s) S^(s nu)",
    "D_(mu nu i) = S_(mu s) D^s_(nu i)",
    "D_(mu i nu) = D_(mu i)^s S_(s nu)",
    "D^(mu nu)_i = S^(mu s) D_s^nu_i",
    "D^mu_i^nu = D^mu_(i s) S^(s nu)",
];
const DERIVED_NAMES: [&str; 6] = [
    "D^(mu s)_i S_(s nu) = -S^(mu s) D_(s i nu)",
    "D_(mu s i) S^(s nu) = -S_(mu s) D^s_i^nu",
    "D_mu^s_i S_(s nu) = -D_(mu i nu)",
    "D^mu_(s i) S^(s nu) = -D^mu_i^nu",
    "S_(mu s) D^s_(i nu) = -D_(mu nu i)",
    "S^(mu s) D_(s i)^nu = -D^(mu nu)_i",
];
const METRIC_NAMES: [&str; 2] = ["covariant d S_(mu nu) = 0", "covariant d S^(mu nu) = 0"];

impl ConnectionReport {
    /// Every residual with a readable identity label.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let mut push = |group: &str, names: &[&str], values: &[f64]| {
            for (n, v) in names.iter().zip(values) {
                out.push((format!("{group}: {n}"), *v));
            }
        };
        push("shifting", &SHIFTING_NAMES, &self.shifting);
        push("conjugation", &CONJUGATION_NAMES, &self.conjugation);
        push("raising_lowering", &RAISING_NAMES, &self.raising_lowering);
        push("derived", &DERIVED_NAMES, &self.derived);
        push("metric_constancy", &METRIC_NAMES, &self.metric_constancy);
        let stored: Vec<String> = Variant::ALL.iter().map(|v| format!("stored {} = ambient", v.name())).collect();
        let stored_refs: Vec<&str> = stored.iter().map(String::as_str).collect();
        push("stored_vs_ambient", &stored_refs, &self.stored_vs_ambient);
        out
    }

    /// Largest relative residual over the Christoffel relation families.
    pub fn max_identity_residual(&self) -> f64 {
        self.shifting
            .iter()
            .chain(&self.conjugation)
            .chain(&self.raising_lowering)
            .chain(&self.derived)
            .chain(&self.stored_vs_ambient)
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn max_metric_residual(&self) -> f64 {
        self.metric_constancy.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.max_identity_residual().max(self.max_metric_residual())
    }

    fn merge(&mut self, other: &ConnectionReport) {
        fn upd<const K: usize>(a: &mut [f64; K], b: &[f64; K]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = x.max(*y);
            }
        }
        upd(&mut self.shifting, &other.shifting);
        upd(&mut self.conjugation, &other.conjugation);
        upd(&mut self.raising_lowering, &other.raising_lowering);
        upd(&mut self.derived, &other.derived);
        upd(&mut self.metric_constancy, &other.metric_constancy);
        upd(&mut self.stored_vs_ambient, &other.stored_vs_ambient);
        self.scale = self.scale.max(other.scale);
    }
}

/// All eight placements built from ambient inner products, with explicitly
/// differentiated duals.
fn ambient_variants(frame: &BasisFrame, dv: &CMat) -> ([CMat; 8], CMat, CMat) {
    let v = frame.vectors();
    let si = frame.inv_metric();
    let e_up = frame.duals();
    let ds = dv.adjoint() * v + v.adjoint() * dv;
    let dsi = -(si * &ds * si);
    let de_up = dv * si + v * &dsi;
    let vars = [
        e_up.adjoint() * dv,
        de_up.adjoint() * v,
        dv.adjoint() * &e_up,
        v.adjoint() * &de_up,
        v.adjoint() * dv,
        dv.adjoint() * v,
        de_up.adjoint() * &e_up,
        e_up.adjoint() * &de_up,
    ];
    (vars, ds, dsi)
}

/// Checks the full Christoffel relation algebra at one point.
pub fn verify_connection_identities(
    chris: &ChristoffelSet,
    frame: &BasisFrame,
    derivs: &FrameDerivatives,
) -> Result<ConnectionReport> {
    check_len("verify: parameters", chris.n_params(), derivs.d_vectors.len())?;
    let s = frame.metric();
    let si = frame.inv_metric();
    let mut total: Option<ConnectionReport> = None;
    for (i, dv) in derivs.d_vectors.iter().enumerate() {
        let (a, ds, dsi) = ambient_variants(frame, dv);
        let scale = 1.0 + a.iter().map(max_abs).fold(0.0, f64::max);
        let r = |m: CMat| max_abs(&m) / scale;
        let [a1, a2, a3, a4, a5, a6, a7, a8] = &a;
        let report = ConnectionReport {
            shifting: [r(a1 + a2), r(a4 + a3), r(a5 + a6 - &ds), r(a8 + a7 - &dsi)],
            conjugation: [r(a1 - a3.adjoint()), r(a2 - a4.adjoint()), r(a5 - a6.adjoint()), r(a7 - a8.adjoint())],
            raising_lowering: [
                r(a1 - si * a5),
                r(a2 - a7 * s),
                r(a4 - s * a8),
                r(a3 - a6 * si),
                r(a5 - s * a1),
                r(a6 - a3 * s),
                r(a8 - si * a4),
                r(a7 - a2 * si),
            ],
            derived: [
                r(a8 * s + si * a6),
                r(a5 * si + s * a7),
                r(a4 * s + a6),
                r(a1 * si + a7),
                r(s * a2 + a5),
                r(si * a3 + a8),
            ],
            metric_constancy: [r(&ds + a4 * s + s * a2), r(&dsi + a1 * si + si * a3)],
            stored_vs_ambient: {
                let mut out = [0.0; 8];
                for (k, var) in Variant::ALL.iter().enumerate() {
                    out[k] = r(chris.variant(*var, i) - &a[k]);
                }
                out
            },
            scale,
        };
        match total.as_mut() {
            Some(t) => t.merge(&report),
            None => total = Some(report),
        }
    }
    total.ok_or(Error::InsufficientParameters { needed: 1, found: 0 })
}

fn check_field_shapes(n: usize, p: usize, fields: &[CVec]) -> Result<()> {
    check_len("derivative field: parameter count", p, fields.len())?;
    for f in fields {
        check_len("derivative field: component count", n, f.len())?;
    }
    Ok(())
}

/// `ð_i ψ^μ = ∂_i ψ^μ + D^μ_{νi} ψ^ν`.
pub fn covariant_derivative_ket(dpsi: &[CVec], psi: &StateKet, chris: &ChristoffelSet) -> Result<Vec<CVec>> {
    check_len("ket", chris.dim(), psi.len())?;
    check_field_shapes(chris.dim(), chris.n_params(), dpsi)?;
    Ok(dpsi
        .iter()
        .enumerate()
        .map(|(i, d)| d + chris.natural(i) * &psi.comps)
        .collect())
}

/// `ð_i ψ_μ = ∂_i ψ_μ − ψ_ν D^ν_{μi}`.
pub fn covariant_derivative_bra(dpsi_bar: &[CVec], psi_bar: &StateBra, chris: &ChristoffelSet) -> Result<Vec<CVec>> {
    check_len("bra", chris.dim(), psi_bar.len())?;
    check_field_shapes(chris.dim(), chris.n_params(), dpsi_bar)?;
    Ok(dpsi_bar
        .iter()
        .enumerate()
        .map(|(i, d)| d - chris.natural(i).transpose() * &psi_bar.comps)
        .collect())
}

/// Covariant derivative of a second-rank tensor in its own placement.
///
/// Natural: `∂H + D H − H D` with `D = D^•_{•i}`. Matrix:
/// `∂H_{μν} + D_μ^σ_i H_{σν} + H_{μσ} D^σ_{iν}`. Upper-upper:
/// `∂H^{μν} + D^μ_{σi} H^{σν} + H^{μσ} D_{σi}^ν`.
pub fn covariant_derivative_operator(dh: &[CMat], h: &Operator, chris: &ChristoffelSet, rep: Rep) -> Result<Vec<CMat>> {
    h.expect_rep(rep)?;
    check_square("operator", chris.dim(), &h.entries)?;
    check_len("operator derivative: parameter count", chris.n_params(), dh.len())?;
    let hm = &h.entries;
    dh.iter()
        .enumerate()
        .map(|(i, d)| {
            check_square("operator derivative", chris.dim(), d)?;
            Ok(match rep {
                Rep::Natural => {
                    let dn = chris.natural(i);
                    d + &dn * hm - hm * &dn
                }
                Rep::Matrix => d + chris.variant(Variant::DownUpI, i) * hm + hm * chris.variant(Variant::UpIDown, i),
                Rep::UpperUpper => d + chris.natural(i) * hm + hm * chris.variant(Variant::DownIUp, i),
            })
        })
        .collect()
}

/// `ψ^μ(R + dR) = ψ^μ − D^μ_{νi} ψ^ν dR^i`.
pub fn parallel_transport_step(psi: &StateKet, chris: &ChristoffelSet, dr: &[f64]) -> Result<StateKet> {
    check_len("ket", chris.dim(), psi.len())?;
    check_len("displacement", chris.n_params(), dr.len())?;
    let mut out = psi.comps.clone();
    for (i, &step) in dr.iter().enumerate() {
        out -= (chris.natural(i) * &psi.comps).scale(step);
    }
    Ok(StateKet::new(out))
}

/// Anti-Hermitian (rotation) and Hermitian (deformation) parts of `D_{••i}`.
pub fn rotation_deformation_split(chris: &ChristoffelSet) -> (Vec<CMat>, Vec<CMat>) {
    chris
        .d_down_down
        .iter()
        .map(|d| (anti_hermitian_part(d), hermitian_part(d)))
        .unzip()
}

fn displaced(vs: &[CVec], dr: &[f64]) -> CVec {
    vs.iter().zip(dr).fold(CVec::zeros(vs[0].len()), |acc, (v, &x)| acc + v.scale(x))
}

/// Component propagation `ψ^μ + ∂_iψ^μ dR^i`, reinterpreted in the new frame.
pub fn propagate_components(psi: &StateKet, dpsi: &[CVec], dr: &[f64]) -> Result<StateKet> {
    check_field_shapes(psi.len(), dr.len(), dpsi)?;
    Ok(StateKet::new(&psi.comps + displaced(dpsi, dr)))
}

/// Projective propagation `P(R+dR){Pψ + P ∂_i(Pψ) dR^i}` in ambient space,
/// returned as components in `frame_to`.
pub fn propagate_projective(
    frame_from: &BasisFrame,
    derivs: &FrameDerivatives,
    frame_to: &BasisFrame,
    psi: &StateKet,
    dpsi: &[CVec],
    dr: &[f64],
) -> Result<StateKet> {
    check_field_shapes(psi.len(), dr.len(), dpsi)?;
    check_len("derivative blocks", dr.len(), derivs.d_vectors.len())?;
    let v = frame_from.vectors();
    let mut moved = v * &psi.comps;
    for (i, &x) in dr.iter().enumerate() {
        let d_amb = &derivs.d_vectors[i] * &psi.comps + v * &dpsi[i];
        let d_block = CMat::from_column_slice(d_amb.len(), 1, d_amb.as_slice());
        moved += frame_from.project_block(&d_block).column(0).scale(x);
    }
    Ok(StateKet::new(frame_to.inv_metric() * (frame_to.vectors().adjoint() * moved)))
}

/// Gauge-overlap propagation `A^μ_ν(R+dR:R){ψ^ν + ð_iψ^ν dR^i}`.
pub fn propagate_affine(
    frame_to: &BasisFrame,
    chris: &ChristoffelSet,
    psi: &StateKet,
    dpsi: &[CVec],
    dr: &[f64],
) -> Result<StateKet> {
    let cov = covariant_derivative_ket(dpsi, psi, chris)?;
    let a = frame_gauge_overlap(frame_to, chris.frame(), Placement::UpperLower)?;
    Ok(StateKet::new(a * (&psi.comps + displaced(&cov, dr))))
}
