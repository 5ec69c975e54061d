//! Scenario execution: build the reference schedule, rescale it, propagate
//! both protocols and assemble the report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use faer::c64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ResolvedModel, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::matrix::{max_abs, max_abs_diff, CMat};
use crate::metrics::{
    energy_uncertainty, fidelity, instantaneous_populations, mt_product, operator_integral, peak_drive_norm,
    relative_phase, ProtocolReport,
};
use crate::models::{
    compression_ramp, oscillator_schedule, spin_schedule, time_rescale, transport_position, transport_schedule,
    HamiltonianSchedule, OscillatorParams, SpinField, SpinParams,
};
use crate::propagate::{
    converge_with, propagate_commuting, propagate_ordered_with, ConvergeSettings, OrderedSettings, PropagationResult,
    StateVector,
};
use crate::rescale::{validate_sta, RescalingSpec, StaValidationReport};
use crate::schedules::{
    emit_spin_field_table, emit_tr_field_table, emit_tr_frequency_table, emit_tr_transport_table, fmt_f64,
    WaveformTable,
};

const STA_TOL: f64 = 1e-9;
const ENDPOINT_REL_TOL: f64 = 1e-12;

/// Complex number as it appears in JSON reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<c64> for JsonComplex {
    fn from(z: c64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

fn encode_state(s: &StateVector) -> Vec<JsonComplex> {
    s.amplitudes().iter().copied().map(JsonComplex::from).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationSummary {
    pub method: &'static str,
    pub steps_used: usize,
    pub unitarity_defect: f64,
    pub achieved_difference: Option<f64>,
    /// `‖U_ordered − U_commuting‖_max` when both routes were run.
    pub oracle_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

/// Everything a scenario run produces; serialises to `report.json`
/// (trajectories excluded).
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioRun {
    pub scenario: &'static str,
    pub family: String,
    pub a: f64,
    pub t_f: f64,
    pub tr_duration: f64,
    pub report: ProtocolReport,
    pub mt_product_reference: f64,
    pub relative_integral_mismatch: f64,
    /// `‖U_ref − U_TR‖_max` over the compared levels.
    pub operator_mismatch: f64,
    pub compared_levels: usize,
    pub sta: StaValidationReport,
    pub reference: PropagationSummary,
    pub rescaled: PropagationSummary,
    pub initial_state: Vec<JsonComplex>,
    pub target_state: Vec<JsonComplex>,
    pub final_state_reference: Vec<JsonComplex>,
    pub final_state_rescaled: Vec<JsonComplex>,
    pub populations_initial: Vec<f64>,
    pub populations_final_reference: Vec<f64>,
    pub populations_final_rescaled: Vec<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub trajectory_reference: Vec<(f64, StateVector)>,
    #[serde(skip)]
    pub trajectory_rescaled: Vec<(f64, StateVector)>,
    #[serde(skip)]
    pub unitary_reference: CMat,
    #[serde(skip)]
    pub unitary_rescaled: CMat,
}

impl ScenarioRun {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Reference schedule, rescaling and states for one configuration.
pub struct ScenarioSetup {
    pub model: ResolvedModel,
    pub spec: RescalingSpec,
    pub reference: HamiltonianSchedule,
    pub rescaled: HamiltonianSchedule,
    pub initial: StateVector,
    /// Analytic target when the scenario has one; otherwise the reference
    /// final state is used.
    pub target: Option<StateVector>,
}

fn spin_state(sign: f64) -> StateVector {
    StateVector::normalized(vec![c64::new(1.0, 0.0), c64::new(sign, 0.0)]).expect("nonzero")
}

fn ground_state(schedule: &HamiltonianSchedule, t: f64) -> Result<StateVector> {
    let (_, vecs) = schedule.evaluate(t)?.eigh()?;
    let n = schedule.dim();
    // Fix the gauge: largest component real and positive.
    let pivot = (0..n)
        .max_by(|&i, &j| vecs[(i, 0)].norm().total_cmp(&vecs[(j, 0)].norm()))
        .unwrap();
    let p = vecs[(pivot, 0)];
    let phase = p.conj() / p.norm();
    StateVector::normalized((0..n).map(|i| vecs[(i, 0)] * phase).collect())
}

pub fn build_setup(config: &ScenarioConfig) -> Result<ScenarioSetup> {
    let model = config.resolve()?;
    let spec = config.rescaling_spec()?;
    let t_f = model.t_f;
    let domain = (0.0, t_f);
    let spin = SpinParams {
        gamma: model.gamma,
        hbar: model.hbar,
    };
    let osc = OscillatorParams {
        mass: model.mass,
        hbar: model.hbar,
        basis_dim: model.basis_dim,
        basis_frequency: model.basis_frequency,
    };
    let (reference, target) = match config.scenario {
        Scenario::SpinFlipConstantZ => (
            spin_schedule(spin, SpinField::constant([0.0, 0.0, model.b0]), domain)?,
            Some(spin_state(-1.0)),
        ),
        Scenario::SpinRotatingField => (
            spin_schedule(spin, SpinField::rotating(model.b0, model.tilt, model.omega_rot), domain)?,
            None,
        ),
        Scenario::OscillatorCompression => {
            let (w0, wf) = (model.omega0, model.omega_f);
            (
                oscillator_schedule(osc, domain, |_| 1.0, move |t| compression_ramp(w0, wf, t_f, t))?,
                None,
            )
        }
        Scenario::TrapTransport => {
            let (w, d) = (model.omega, model.d);
            (
                transport_schedule(osc, domain, |_| 1.0, move |_| w, move |t| transport_position(d, t_f, t))?,
                None,
            )
        }
    };
    let rescaled = time_rescale(&reference, &spec)?;
    let initial = if config.scenario.is_spin() {
        spin_state(1.0)
    } else {
        ground_state(&reference, 0.0)?
    };
    Ok(ScenarioSetup {
        model,
        spec,
        reference,
        rescaled,
        initial,
        target,
    })
}

struct Propagated {
    result: PropagationResult,
    final_state: StateVector,
    summary: PropagationSummary,
}

fn ordered(
    schedule: &HamiltonianSchedule,
    config: &ScenarioConfig,
    hbar: f64,
    initial: &StateVector,
) -> Result<PropagationResult> {
    let s = &config.solver;
    match s.n_steps {
        Some(n_steps) => propagate_ordered_with(
            schedule,
            &OrderedSettings {
                n_steps,
                hbar,
                columns: s.compare_levels,
                initial: Some(initial.clone()),
                trajectory_samples: s.trajectory_samples,
            },
        ),
        None => converge_with(
            schedule,
            &ConvergeSettings {
                target_tol: s.target_tol,
                max_steps: s.max_steps,
                initial_steps: s.initial_steps,
                hbar,
                columns: s.compare_levels,
                initial: Some(initial.clone()),
                trajectory_samples: s.trajectory_samples,
            },
        ),
    }
}

fn propagate(
    schedule: &HamiltonianSchedule,
    config: &ScenarioConfig,
    hbar: f64,
    initial: &StateVector,
) -> Result<Propagated> {
    let ordered = ordered(schedule, config, hbar, initial)?;
    let ordered_state = ordered.final_state().cloned().expect("trajectory recorded");
    if schedule.commuting_family() {
        let commuting = propagate_commuting(schedule, config.solver.quadrature_points, hbar)?;
        let k = ordered.final_unitary.ncols();
        let block = commuting.final_unitary.as_ref().subcols(0, k);
        let gap = max_abs_diff(ordered.final_unitary.as_ref(), block);
        let final_state = initial.evolve(&commuting.final_unitary)?;
        let summary = PropagationSummary {
            method: "commuting",
            steps_used: commuting.steps_used,
            unitarity_defect: commuting.unitarity_defect,
            achieved_difference: ordered.achieved_difference,
            oracle_gap: Some(gap),
        };
        let mut result = commuting;
        result.trajectory = ordered.trajectory;
        return Ok(Propagated {
            result,
            final_state,
            summary,
        });
    }
    let summary = PropagationSummary {
        method: "ordered",
        steps_used: ordered.steps_used,
        unitarity_defect: ordered.unitarity_defect,
        achieved_difference: ordered.achieved_difference,
        oracle_gap: None,
    };
    Ok(Propagated {
        result: ordered,
        final_state: ordered_state,
        summary,
    })
}

fn top_left_diff(a: &CMat, b: &CMat, k: usize) -> f64 {
    let k = k.min(a.ncols()).min(b.ncols());
    max_abs_diff(a.as_ref().submatrix(0, 0, k, k), b.as_ref().submatrix(0, 0, k, k))
}

/// Runs a scenario without touching the filesystem.
pub fn evaluate_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let setup = build_setup(config)?;
    let hbar = setup.model.hbar;
    let solver = &config.solver;
    let ScenarioSetup {
        spec,
        reference,
        rescaled,
        initial,
        target,
        ..
    } = &setup;

    let reference_run = propagate(reference, config, hbar, initial)?;
    let rescaled_run = propagate(rescaled, config, hbar, initial)?;
    let target = target.clone().unwrap_or_else(|| reference_run.final_state.clone());

    let fid = fidelity(&target, &rescaled_run.final_state)?;
    let phase = relative_phase(&target, &rescaled_run.final_state).unwrap_or(f64::NAN);

    let h0 = reference.evaluate(0.0)?;
    let h_end = reference.evaluate(spec.t_f())?;
    let de = energy_uncertainty(&h0, initial)?;
    let de_tr = energy_uncertainty(&rescaled.evaluate(0.0)?, initial)?;
    let mt_reference = mt_product(spec.t_f(), de);
    let mt_rescaled = mt_product(spec.duration(), de_tr);

    let endpoint_mismatch = max_abs_diff(rescaled.evaluate(0.0)?.as_ref(), h0.as_ref()).max(max_abs_diff(
        rescaled.evaluate(spec.duration())?.as_ref(),
        h_end.as_ref(),
    ));
    let int_ref = operator_integral(reference, solver.quadrature_points)?;
    let int_tr = operator_integral(rescaled, solver.quadrature_points)?;
    let integral_mismatch = max_abs_diff(int_tr.as_ref(), int_ref.as_ref());
    let int_scale = max_abs(int_ref.as_ref());
    let relative_integral_mismatch = if int_scale > 0.0 {
        integral_mismatch / int_scale
    } else {
        integral_mismatch
    };
    let peak = peak_drive_norm(rescaled, solver.norm_samples)?;

    let dim = reference.dim();
    let compared_levels = solver.compare_levels.unwrap_or(dim);
    let operator_mismatch = top_left_diff(
        &reference_run.result.final_unitary,
        &rescaled_run.result.final_unitary,
        compared_levels,
    );

    let populations_initial = instantaneous_populations(reference, 0.0, initial)?;
    let populations_final_reference =
        instantaneous_populations(reference, spec.t_f(), &reference_run.final_state)?;
    let populations_final_rescaled =
        instantaneous_populations(rescaled, spec.duration(), &rescaled_run.final_state)?;

    let sta = validate_sta(spec, STA_TOL)?;
    let endpoint_scale = h0.max_norm().max(1.0);
    let checks = vec![
        Check::at_least("fidelity", fid, solver.fidelity_threshold),
        Check::at_most("operator_mismatch", operator_mismatch, solver.operator_tol),
        Check::at_most(
            "unitarity_defect",
            reference_run.summary.unitarity_defect.max(rescaled_run.summary.unitarity_defect),
            solver.unitarity_tol,
        ),
        Check::at_most("endpoint_mismatch", endpoint_mismatch, ENDPOINT_REL_TOL * endpoint_scale),
        Check::at_most("relative_integral_mismatch", relative_integral_mismatch, solver.integral_tol),
    ];
    let passed = checks.iter().all(|c| c.passed);

    Ok(ScenarioRun {
        scenario: config.scenario.name(),
        family: spec.family().label().to_string(),
        a: spec.a(),
        t_f: spec.t_f(),
        tr_duration: spec.duration(),
        report: ProtocolReport {
            fidelity: fid,
            relative_phase: phase,
            mt_product: mt_rescaled,
            peak_drive_norm: peak,
            integral_mismatch,
            endpoint_mismatch,
        },
        mt_product_reference: mt_reference,
        relative_integral_mismatch,
        operator_mismatch,
        compared_levels,
        sta,
        reference: reference_run.summary,
        rescaled: rescaled_run.summary,
        initial_state: encode_state(initial),
        target_state: encode_state(&target),
        final_state_reference: encode_state(&reference_run.final_state),
        final_state_rescaled: encode_state(&rescaled_run.final_state),
        populations_initial,
        populations_final_reference,
        populations_final_rescaled,
        checks,
        passed,
        trajectory_reference: reference_run.result.trajectory.unwrap_or_default(),
        trajectory_rescaled: rescaled_run.result.trajectory.unwrap_or_default(),
        unitary_reference: reference_run.result.final_unitary,
        unitary_rescaled: rescaled_run.result.final_unitary,
    })
}

pub fn trajectory_csv(run: &ScenarioRun, which: &str, trajectory: &[(f64, StateVector)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# scenario={}, a={}, t_f={}, family={}, protocol={which}",
        run.scenario, run.a, run.t_f, run.family
    );
    let dim = trajectory.first().map_or(0, |(_, s)| s.dim());
    let mut header = String::from("time");
    for k in 0..dim {
        let _ = write!(header, ",re{k},im{k}");
    }
    let _ = writeln!(out, "{header}");
    for (t, s) in trajectory {
        out.push_str(&fmt_f64(*t));
        for z in s.amplitudes() {
            let _ = write!(out, ",{},{}", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push('\n');
    }
    out
}

/// Waveform tables relevant to a scenario, keyed by file name.
pub fn scenario_tables(config: &ScenarioConfig) -> Result<Vec<(&'static str, WaveformTable)>> {
    let model = config.resolve()?;
    let spec = config.rescaling_spec()?;
    let rows = config.solver.trajectory_samples;
    let tables = match config.scenario {
        Scenario::SpinFlipConstantZ | Scenario::SpinRotatingField => {
            vec![("spin_field.csv", emit_spin_field_table(model.b0, &spec, rows)?)]
        }
        Scenario::OscillatorCompression => vec![
            (
                "tr_frequency.csv",
                emit_tr_frequency_table(model.omega0, model.omega_f, &spec, rows)?,
            ),
            ("tr_field.csv", emit_tr_field_table(model.b0, &spec, rows)?),
        ],
        Scenario::TrapTransport => vec![
            ("tr_transport.csv", emit_tr_transport_table(model.d, &spec, rows)?),
            (
                "tr_frequency.csv",
                emit_tr_frequency_table(model.omega, model.omega, &spec, rows)?,
            ),
            ("tr_field.csv", emit_tr_field_table(model.b0, &spec, rows)?),
        ],
    };
    Ok(tables)
}

pub fn write_tables(config: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, table) in scenario_tables(config)? {
        let path = dir.join(name);
        table.write_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_outputs(config: &ScenarioConfig, run: &ScenarioRun, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report = dir.join("report.json");
    std::fs::write(&report, run.to_json()?)?;
    written.push(report);
    for (name, which, traj) in [
        ("trajectory_ref.csv", "reference", &run.trajectory_reference),
        ("trajectory_tr.csv", "rescaled", &run.trajectory_rescaled),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, trajectory_csv(run, which, traj))?;
        written.push(path);
    }
    written.extend(write_tables(config, dir)?);
    Ok(written)
}

/// Evaluates a scenario and writes `report.json`, both trajectories and the
/// waveform tables to the effective output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let run = evaluate_scenario(config)?;
    write_outputs(config, &run, &config.effective_output_dir())?;
    Ok(run)
}

/// One sweep row; `error` is set instead of the metrics when the run failed.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub run: Option<ScenarioRun>,
    pub error: Option<String>,
}

/// Runs the configuration once per contraction parameter. Rows are
/// independent and come back in input order.
pub fn sweep(config: &ScenarioConfig, a_values: &[f64]) -> Result<Vec<SweepRow>> {
    if a_values.is_empty() {
        return Err(Error::Parameter("sweep needs at least one value of a".into()));
    }
    Ok(a_values
        .par_iter()
        .map(|&a| match evaluate_scenario(&config.with_a(a)) {
            Ok(run) => SweepRow {
                a,
                run: Some(run),
                error: None,
            },
            Err(e) => SweepRow {
                a,
                run: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

pub fn sweep_csv(config: &ScenarioConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# scenario={}, family={}",
        config.scenario.name(),
        config.rescaling.family
    );
    let _ = writeln!(
        out,
        "a,fidelity,relative_phase,mt_product,peak_drive_norm,integral_mismatch,endpoint_mismatch,operator_mismatch,passed,error"
    );
    for row in rows {
        match &row.run {
            Some(run) => {
                let r = &run.report;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},",
                    row.a,
                    fmt_f64(r.fidelity),
                    fmt_f64(r.relative_phase),
                    fmt_f64(r.mt_product),
                    fmt_f64(r.peak_drive_norm),
                    fmt_f64(r.integral_mismatch),
                    fmt_f64(r.endpoint_mismatch),
                    fmt_f64(run.operator_mismatch),
                    run.passed
                );
            }
            None => {
                let msg = row.error.as_deref().unwrap_or("").replace(['\n', ','], ";");
                let _ = writeln!(out, "{},,,,,,,,false,{msg}", row.a);
            }
        }
    }
    out
}

/// Text rendering of an STA validation, one requirement per line.
pub fn render_validation(spec: &RescalingSpec, report: &StaValidationReport) -> String {
    let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rescaling family={} a={} t_f={} (tolerance {:e})",
        spec.family().label(),
        spec.a(),
        spec.t_f(),
        report.tolerance
    );
    let _ = writeln!(out, "  initial_time_ok  {}  f^-1(0) = 0", flag(report.initial_time_ok));
    let _ = writeln!(out, "  faster_ok        {}  f^-1(t_f) < t_f", flag(report.faster_ok));
    let _ = writeln!(out, "  initial_rate_ok  {}  f'(f^-1(0)) = 1", flag(report.initial_rate_ok));
    let _ = writeln!(out, "  final_rate_ok    {}  f'(f^-1(t_f)) = 1", flag(report.final_rate_ok));
    let _ = writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" });
    out
}

/// Validates a built-in rescaling; returns the text report and the verdict.
pub fn validate_command(family: &str, a: f64, t_f: f64, tol: f64) -> Result<(String, bool)> {
    let spec = RescalingSpec::new(crate::rescale::RescalingFamily::parse(family)?, a, t_f)?;
    let report = validate_sta(&spec, tol)?;
    Ok((render_validation(&spec, &report), report.passed()))
}
