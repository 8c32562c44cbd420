//! Scenario execution.

use std::collections::BTreeMap;
use std::sync::Arc;

use oblique::basis::{frame_derivatives, DerivativeScheme, FrameSource, MixedFamily, SmoothMix};
use oblique::connection::{christoffel, verify_connection_identities};
use oblique::curvature::{chern_number, christoffel_at, ricci_berry, riemann, trace_cancellation_residual, RicciForm};
use oblique::forces::{eigen_at, eigenvalue_fd, hf_derivative, pulay_decomposition, solve_generalized_eigen, HfFormula};
use oblique::propagators::{
    compare_d_vs_g, loglog_fit, reorthonormalize, run_trajectory, step, AmbientHamiltonian, ObservableLog, Observers,
    PropagationModel, PropagatorKind, StateBundle,
};
use oblique::tensor_core::{c, max_abs, CMat, Operator};
use oblique::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Initial, Scenario, SweepMeasure, Task};

/// Rows for CSV output, already formatted.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Outcome of one scenario.
#[derive(Debug, Clone)]
pub struct Report {
    pub passed: bool,
    pub summary: String,
    pub json: Value,
    pub table: Option<Table>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn model(scenario: &Scenario) -> Result<PropagationModel> {
    let trajectory = scenario
        .trajectory()
        .ok_or_else(|| Error::InvalidParameter("scenario needs a trajectory".into()))?;
    let spec = scenario.hamiltonian.as_ref().ok_or(Error::AmbientUnavailable)?;
    let op = spec
        .operator
        .build(spec.n_coords(&scenario.family))
        .map_err(Error::InvalidParameter)?;
    Ok(PropagationModel {
        family: Arc::new(scenario.family.clone()),
        trajectory,
        hamiltonian: Arc::new(AmbientHamiltonian {
            op: op.into_arc(),
            argument: spec.argument,
        }),
    })
}

fn initial_bundle(model: &PropagationModel, t0: f64, k: usize, initial: Initial, seed: u64) -> Result<StateBundle> {
    let frame = model.frame_at(t0)?;
    let n = frame.dim();
    let coeffs = match initial {
        Initial::Eigen => {
            let r = model.trajectory.point(t0);
            let h = model.hamiltonian.matrix(t0, &r, &frame, &CMat::zeros(n, 0))?;
            let sols = solve_generalized_eigen(&Operator::matrix(h), &frame)?;
            CMat::from_fn(n, k, |i, j| sols[j].ket.comps[i])
        }
        Initial::Random => {
            let mut r = rng(seed);
            let raw = CMat::from_fn(n, k, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
            reorthonormalize(&raw, frame.metric())?
        }
    };
    StateBundle::new(coeffs, t0, frame)
}

fn sample_points(family: &dyn FrameSource, given: &Option<Vec<Vec<f64>>>, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match given {
        Some(points) => points.clone(),
        None => {
            let mut r = rng(seed);
            (0..count).map(|_| family.sample_point(&mut r)).collect()
        }
    }
}

/// Runs a scenario. `halvings` overrides the sweep depth of `dt_sweep` tasks.
pub fn run(scenario: &Scenario, seed: u64, halvings: Option<usize>) -> Result<Report> {
    let mut report = match &scenario.task {
        Task::VerifyIdentities {
            points,
            fd_step,
            tolerance,
            fd_tolerance,
        } => verify_identities(scenario, seed, *points, *fd_step, *tolerance, *fd_tolerance)?,
        Task::Propagate {
            kind,
            n_steps,
            n_states,
            initial,
            t0,
            observers,
            max_ortho_deviation,
        } => {
            let model = model(scenario)?;
            let bundle = initial_bundle(&model, *t0, *n_states, *initial, seed)?;
            let (log, last) = run_trajectory(kind, &bundle, &model, *n_steps, observers)?;
            propagate_report(&log, last.time, *max_ortho_deviation)
        }
        Task::DtSweep {
            kind,
            halvings: configured,
            t_final,
            measure,
            n_states,
            initial,
            min_order,
            min_r_squared,
        } => {
            let model = model(scenario)?;
            let bundle = initial_bundle(&model, 0.0, *n_states, *initial, seed)?;
            let sweep = Sweep {
                kind: *kind,
                halvings: halvings.unwrap_or(*configured),
                t_final: *t_final,
                measure: *measure,
                min_order: *min_order,
                min_r_squared: *min_r_squared,
            };
            sweep.run(&model, &bundle)?
        }
        Task::Curvature {
            points,
            random_points,
            scheme,
            tolerance,
            gauges,
        } => {
            let points = sample_points(&scenario.family, points, *random_points, seed);
            curvature(scenario, &points, *scheme, *tolerance, *gauges, seed)?
        }
        Task::Chern {
            n0,
            n1,
            range0,
            range1,
            scheme,
            form,
            tolerance,
            expected,
        } => {
            let res = chern_number(&scenario.family, (range0[0], range0[1]), (range1[0], range1[1]), *n0, *n1, *scheme, *form)?;
            let target = expected.unwrap_or(res.value.round());
            let deviation = (res.value - target).abs();
            Report {
                passed: deviation < *tolerance,
                summary: format!("chern {:.6} (target {target}, deviation {deviation:.1e})", res.value),
                json: json!({
                    "value": res.value,
                    "imag": res.imag,
                    "target": target,
                    "deviation": deviation,
                    "n0": n0,
                    "n1": n1,
                    "tolerance": tolerance,
                }),
                table: None,
            }
        }
        Task::Forces {
            points,
            random_points,
            state,
            fd_step,
            tolerance,
        } => {
            let points = sample_points(&scenario.family, points, *random_points, seed);
            forces(scenario, &points, *state, *fd_step, *tolerance)?
        }
        Task::CompareDg { times, dt_fd, tolerance } => compare_dg(scenario, times, *dt_fd, *tolerance)?,
    };
    if let Value::Object(map) = &mut report.json {
        map.insert("scenario".into(), json!(scenario.name));
        map.insert("task".into(), json!(scenario.task.name()));
        map.insert("seed".into(), json!(seed));
        map.insert("passed".into(), json!(report.passed));
    }
    Ok(report)
}

/// The identity suite on seeded random points of a family.
pub fn verify_identities(
    scenario: &Scenario,
    seed: u64,
    points: usize,
    fd_step: f64,
    tolerance: f64,
    fd_tolerance: f64,
) -> Result<Report> {
    let family = &scenario.family;
    let mut r = rng(seed);
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let (mut analytic, mut fd, mut metric) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..points {
        let point = family.sample_point(&mut r);
        let frame = family.frame(&point)?;
        for scheme in [DerivativeScheme::Analytic, DerivativeScheme::CentralFd { h: fd_step }] {
            let derivs = frame_derivatives(family, &point, scheme)?;
            let chris = christoffel(&frame, &derivs)?;
            let report = verify_connection_identities(&chris, &frame, &derivs)?;
            if scheme == DerivativeScheme::Analytic {
                analytic = analytic.max(report.max());
                metric = metric.max(report.max_metric_residual());
                for (name, value) in report.entries() {
                    let slot = worst.entry(name).or_insert(0.0);
                    *slot = slot.max(value);
                }
            } else {
                fd = fd.max(report.max());
            }
        }
    }
    let passed = analytic < tolerance && fd < fd_tolerance;
    Ok(Report {
        passed,
        summary: format!("identities analytic {analytic:.1e} (< {tolerance:e}), fd {fd:.1e} (< {fd_tolerance:e})"),
        json: json!({
            "points": points,
            "max_residual_analytic": analytic,
            "max_residual_fd": fd,
            "max_metric_residual": metric,
            "tolerance": tolerance,
            "fd_tolerance": fd_tolerance,
            "fd_step": fd_step,
            "residuals": worst,
        }),
        table: None,
    })
}

fn propagate_report(log: &ObservableLog, final_time: f64, gate: Option<f64>) -> Report {
    let k = log.n_states;
    let first = log.rows.first();
    let has_energy = first.is_some_and(|r| !r.energies.is_empty());
    let has_berry = first.is_some_and(|r| !r.berry.is_empty());
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend((0..k).map(|m| format!("norm_{m}")));
    if has_energy {
        header.extend((0..k).map(|m| format!("energy_{m}")));
    }
    header.push("ortho_dev".into());
    if has_berry {
        for i in 0..log.n_params {
            header.push(format!("berry_re_{i}"));
            header.push(format!("berry_im_{i}"));
        }
    }
    let rows = log
        .rows
        .iter()
        .map(|row| {
            let mut out = vec![row.step.to_string(), num(row.time)];
            out.extend(row.norms.iter().map(|x| num(*x)));
            out.extend(row.energies.iter().map(|x| num(*x)));
            out.push(num(row.ortho_deviation));
            for (re, im) in &row.berry {
                out.push(num(*re));
                out.push(num(*im));
            }
            out
        })
        .collect();
    let max_dev = log.max_ortho_deviation();
    let passed = gate.map_or(true, |tol| max_dev < tol);
    Report {
        passed,
        summary: format!("{} steps, max ortho deviation {max_dev:.1e}", log.rows.len()),
        json: json!({
            "kind": log.kind,
            "n_steps": log.rows.len(),
            "n_states": k,
            "final_time": final_time,
            "max_ortho_deviation": max_dev,
            "max_ortho_deviation_gate": gate,
            "rows": log.rows,
        }),
        table: Some(Table { header, rows }),
    }
}

struct Sweep {
    kind: PropagatorKind,
    halvings: usize,
    t_final: Option<f64>,
    measure: SweepMeasure,
    min_order: Option<f64>,
    min_r_squared: f64,
}

impl Sweep {
    fn evolve(&self, dt: f64, model: &PropagationModel, bundle: &StateBundle) -> Result<(f64, StateBundle)> {
        let kind = self.kind.with_dt(dt);
        match self.t_final {
            None => {
                let out = step(&kind, bundle, model)?;
                Ok((out.orthonormality_deviation(), out))
            }
            Some(t) => {
                let n = (t / dt).round() as usize;
                let quiet = Observers {
                    energy: false,
                    berry: false,
                    overlap_matrix: false,
                };
                let (log, last) = run_trajectory(&kind, bundle, model, n, &quiet)?;
                Ok((log.max_ortho_deviation(), last))
            }
        }
    }

    fn run(&self, model: &PropagationModel, bundle: &StateBundle) -> Result<Report> {
        let dts: Vec<f64> = (0..=self.halvings).map(|k| self.kind.dt / 2f64.powi(k as i32)).collect();
        let reference = match self.measure {
            SweepMeasure::Reference => Some(self.evolve(dts[dts.len() - 1] / 4.0, model, bundle)?.1.coeffs),
            SweepMeasure::Orthonormality => None,
        };
        let mut errors = Vec::with_capacity(dts.len());
        for dt in &dts {
            let (ortho, last) = self.evolve(*dt, model, bundle)?;
            errors.push(match &reference {
                Some(r) => max_abs(&(&last.coeffs - r)),
                None => ortho,
            });
        }
        let fit = if errors.iter().all(|e| *e > 0.0) {
            Some(loglog_fit(&dts, &errors)?)
        } else {
            None
        };
        let passed = match (self.min_order, fit) {
            (None, _) => true,
            (Some(order), Some(f)) => f.order >= order && f.r_squared >= self.min_r_squared,
            (Some(_), None) => false,
        };
        let summary = match fit {
            Some(f) => format!("fitted order {:.3}, R² {:.5} over {} step sizes", f.order, f.r_squared, dts.len()),
            None => format!("error vanished at some step size, no fit over {} step sizes", dts.len()),
        };
        let rows = dts.iter().zip(&errors).map(|(d, e)| vec![num(*d), num(*e)]).collect();
        Ok(Report {
            passed,
            summary,
            json: json!({
                "kind": self.kind,
                "measure": match self.measure {
                    SweepMeasure::Orthonormality => "orthonormality",
                    SweepMeasure::Reference => "reference",
                },
                "halvings": self.halvings,
                "t_final": self.t_final,
                "dts": dts,
                "errors": errors,
                "fitted_order": fit.map(|f| f.order),
                "r_squared": fit.map(|f| f.r_squared),
                "intercept": fit.map(|f| f.intercept),
                "min_order": self.min_order,
                "min_r_squared": self.min_r_squared,
            }),
            table: Some(Table {
                header: vec!["dt".into(), "error".into()],
                rows,
            }),
        })
    }
}

fn curvature(
    scenario: &Scenario,
    points: &[Vec<f64>],
    scheme: DerivativeScheme,
    tolerance: f64,
    gauges: usize,
    seed: u64,
) -> Result<Report> {
    let family: Arc<dyn FrameSource> = Arc::new(scenario.family.clone());
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mixes: Vec<MixedFamily> = (0..gauges)
        .map(|_| MixedFamily::new(family.clone(), SmoothMix::random(family.dim(), family.n_params(), 0.5, &mut r)))
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(points.len());
    let (mut antisym, mut trace_cancel, mut ricci_gap) = (0.0f64, 0.0f64, 0.0f64);
    for point in points {
        let tensor = riemann(family.as_ref(), point, scheme)?;
        let a = tensor.antisymmetry_residual();
        let t = trace_cancellation_residual(&christoffel_at(family.as_ref(), point)?);
        let trace = tensor.ricci();
        let mut gap = max_abs(&(ricci_berry(family.as_ref(), point, scheme, RicciForm::Nonorthogonal)? - &trace));
        for mix in &mixes {
            let mixed_trace = ricci_berry(mix, point, scheme, RicciForm::Trace)?;
            let mixed_general = ricci_berry(mix, point, scheme, RicciForm::Nonorthogonal)?;
            gap = gap.max(max_abs(&(mixed_general - mixed_trace)));
        }
        antisym = antisym.max(a);
        trace_cancel = trace_cancel.max(t);
        ricci_gap = ricci_gap.max(gap);
        entries.push(json!({
            "point": point,
            "max_abs": tensor.max_abs(),
            "antisymmetry_residual": a,
            "trace_cancellation_residual": t,
            "ricci_formula_gap": gap,
            "ricci_01": [trace[(0, 1)].re, trace[(0, 1)].im],
        }));
    }
    let worst = antisym.max(trace_cancel).max(ricci_gap);
    Ok(Report {
        passed: worst < tolerance,
        summary: format!(
            "{} points, antisymmetry {antisym:.1e}, trace cancellation {trace_cancel:.1e}, ricci gap {ricci_gap:.1e}",
            points.len()
        ),
        json: json!({
            "points": entries,
            "gauges": gauges,
            "max_antisymmetry_residual": antisym,
            "max_trace_cancellation_residual": trace_cancel,
            "max_ricci_formula_gap": ricci_gap,
            "tolerance": tolerance,
        }),
        table: None,
    })
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}

fn forces(scenario: &Scenario, points: &[Vec<f64>], state: usize, fd_step: f64, tolerance: f64) -> Result<Report> {
    let spec = scenario.hamiltonian.as_ref().ok_or(Error::AmbientUnavailable)?;
    let family = &scenario.family;
    let op = spec.operator.build(family.n_params()).map_err(Error::InvalidParameter)?.into_arc();
    let mut entries = Vec::with_capacity(points.len());
    let mut worst = 0.0f64;
    for point in points {
        let sols = eigen_at(family, op.as_ref(), point)?;
        let sol = &sols[state];
        let fd = eigenvalue_fd(family, op.as_ref(), point, state, fd_step)?;
        let mut by_formula = serde_json::Map::new();
        let mut natural = Vec::new();
        for formula in HfFormula::ALL {
            let values = hf_derivative(sol, family, op.as_ref(), point, formula)?;
            worst = worst.max(relative_gap(&values, &fd));
            if formula == HfFormula::NaturalCovariant {
                natural = values.clone();
            }
            by_formula.insert(serde_json::to_value(formula).unwrap().as_str().unwrap().to_string(), json!(values));
        }
        let pulay = pulay_decomposition(sol, family, op.as_ref(), point)?;
        let totals: Vec<f64> = pulay.iter().map(|t| t.total()).collect();
        worst = worst.max(relative_gap(&totals, &natural));
        entries.push(json!({
            "point": point,
            "energy": sol.energy,
            "gap": sol.gap,
            "finite_difference": fd,
            "hellmann_feynman": by_formula,
            "pulay": pulay,
        }));
    }
    Ok(Report {
        passed: worst < tolerance,
        summary: format!("{} points, worst relative disagreement {worst:.1e}", points.len()),
        json: json!({
            "state": state,
            "fd_step": fd_step,
            "points": entries,
            "max_relative_gap": worst,
            "tolerance": tolerance,
        }),
        table: None,
    })
}

fn compare_dg(scenario: &Scenario, times: &[f64], dt_fd: f64, tolerance: Option<f64>) -> Result<Report> {
    let trajectory = scenario
        .trajectory()
        .ok_or_else(|| Error::InvalidParameter("scenario needs a trajectory".into()))?;
    let mut worst = 0.0f64;
    let mut entries = Vec::with_capacity(times.len());
    for t in times {
        let report = compare_d_vs_g(&scenario.family, &trajectory, *t, dt_fd)?;
        worst = worst.max(report.max_abs_diff);
        entries.push(serde_json::to_value(&report).expect("report serializes"));
    }
    Ok(Report {
        passed: tolerance.map_or(true, |tol| worst < tol),
        summary: format!("max |D - G| {worst:.1e} over {} times", times.len()),
        json: json!({
            "dt_fd": dt_fd,
            "times": entries,
            "max_abs_diff": worst,
            "tolerance": tolerance,
        }),
        table: None,
    })
}
