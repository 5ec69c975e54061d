//! Time-ordered propagation.
//!
//! The ordered propagator is the exponential midpoint rule,
//! `U = ∏ₖ exp(−iΔt H(t_k + Δt/2)/ħ)` applied right to left on a uniform
//! grid. Each factor comes from a Hermitian eigendecomposition, so the
//! product is unitary to eigensolver precision and globally second order in
//! `Δt`. For commuting families a single exponential of the integrated
//! Hamiltonian gives an independent route to the same operator.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::matrix::{max_abs_diff, unitarity_defect, CMat, HermitianMatrix};
use crate::metrics::operator_integral;
use crate::models::HamiltonianSchedule;

/// Number of trajectory samples recorded when none is requested explicitly.
pub const DEFAULT_TRAJECTORY_SAMPLES: usize = 201;

/// Normalised state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<c64>,
}

pub const NORM_TOL: f64 = 1e-10;

impl StateVector {
    pub fn new(amplitudes: Vec<c64>) -> Result<Self> {
        let norm = l2(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!("state is not normalised: ‖ψ‖ = {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm; fails for the zero vector.
    pub fn normalized(amplitudes: Vec<c64>) -> Result<Self> {
        let norm = l2(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Parameter("cannot normalise a zero or non-finite vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|z| z / norm).collect(),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut amplitudes = vec![c64::new(0.0, 0.0); dim];
        amplitudes[index] = c64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<c64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, z: c64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * z).collect(),
        }
    }

    /// `m·ψ` for a square matrix of matching size. The caller guarantees `m`
    /// is unitary (or at least norm preserving on `ψ`).
    pub fn evolve(&self, m: &CMat) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.ncols(),
                found: self.dim(),
            });
        }
        let amplitudes = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * self.amplitudes[j]).sum())
            .collect();
        Ok(Self { amplitudes })
    }

    fn from_column(m: &CMat, col: usize) -> Self {
        Self {
            amplitudes: (0..m.nrows()).map(|i| m[(i, col)]).collect(),
        }
    }
}

fn l2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    /// Propagated columns of `U(t_end, t_start)`: the full operator unless a
    /// column subset was requested.
    pub final_unitary: CMat,
    /// `‖U†U − I‖_max` over the propagated columns.
    pub unitarity_defect: f64,
    pub steps_used: usize,
    pub trajectory: Option<Vec<(f64, StateVector)>>,
    /// `‖U_{2n} − U_n‖_max` reached by [`converge`], if it was used.
    pub achieved_difference: Option<f64>,
    /// `(n_steps, ‖U_n − U_{n/2}‖_max)` for every refinement [`converge`] ran.
    pub refinements: Vec<(usize, f64)>,
}

impl PropagationResult {
    pub fn final_state(&self) -> Option<&StateVector> {
        self.trajectory.as_ref().and_then(|t| t.last()).map(|(_, s)| s)
    }

    /// Largest deviation of `‖ψ‖` from 1 along the recorded trajectory.
    pub fn max_norm_deviation(&self) -> f64 {
        self.trajectory
            .iter()
            .flatten()
            .map(|(_, s)| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Settings for [`propagate_ordered_with`].
#[derive(Clone, Debug)]
pub struct OrderedSettings {
    pub n_steps: usize,
    pub hbar: f64,
    /// Propagate only the first `k` columns of `U` (the evolution of the
    /// lowest `k` basis states). `None` propagates the full operator.
    pub columns: Option<usize>,
    pub initial: Option<StateVector>,
    pub trajectory_samples: usize,
}

impl OrderedSettings {
    pub fn new(n_steps: usize, hbar: f64) -> Self {
        Self {
            n_steps,
            hbar,
            columns: None,
            initial: None,
            trajectory_samples: DEFAULT_TRAJECTORY_SAMPLES,
        }
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::Parameter(format!("ħ must be > 0, got {hbar}")));
    }
    Ok(())
}

/// Exponential-midpoint propagation of the full operator; records the
/// trajectory of `initial` when given.
pub fn propagate_ordered(
    schedule: &HamiltonianSchedule,
    n_steps: usize,
    hbar: f64,
    initial: Option<&StateVector>,
) -> Result<PropagationResult> {
    let mut settings = OrderedSettings::new(n_steps, hbar);
    settings.initial = initial.cloned();
    propagate_ordered_with(schedule, &settings)
}

pub fn propagate_ordered_with(schedule: &HamiltonianSchedule, settings: &OrderedSettings) -> Result<PropagationResult> {
    let n_steps = settings.n_steps;
    if n_steps == 0 {
        return Err(Error::Parameter("n_steps must be ≥ 1".into()));
    }
    check_hbar(settings.hbar)?;
    let dim = schedule.dim();
    let k = settings.columns.unwrap_or(dim);
    if k == 0 || k > dim {
        return Err(Error::Parameter(format!("column count {k} not in 1..={dim}")));
    }
    if let Some(psi) = &settings.initial {
        if psi.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.dim(),
            });
        }
    }

    // Columns 0..k carry U; an optional extra column carries ψ(t).
    let with_state = settings.initial.is_some();
    let width = k + usize::from(with_state);
    let mut block = Mat::from_fn(dim, width, |i, j| {
        if j < k {
            if i == j {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        } else {
            settings.initial.as_ref().unwrap().amplitudes()[i]
        }
    });

    let (t0, t1) = schedule.domain();
    let dt = (t1 - t0) / n_steps as f64;
    let sample_steps = sample_indices(n_steps, settings.trajectory_samples.max(2));
    let mut trajectory = with_state.then(|| Vec::with_capacity(sample_steps.len()));
    let mut next_sample = 0;
    let mut record = |step: usize, block: &CMat, traj: &mut Option<Vec<(f64, StateVector)>>| {
        if let Some(traj) = traj {
            if next_sample < sample_steps.len() && sample_steps[next_sample] == step {
                let t = if step == n_steps { t1 } else { t0 + step as f64 * dt };
                traj.push((t, StateVector::from_column(block, k)));
                next_sample += 1;
            }
        }
    };
    record(0, &block, &mut trajectory);

    let scale = dt / settings.hbar;
    for step in 0..n_steps {
        let mid = t0 + (step as f64 + 0.5) * dt;
        let h = schedule.evaluate(mid)?;
        h.exp_i(scale)?.apply_left(&mut block);
        record(step + 1, &block, &mut trajectory);
    }

    let u = if with_state {
        Mat::from_fn(dim, k, |i, j| block[(i, j)])
    } else {
        block
    };
    Ok(PropagationResult {
        unitarity_defect: unitarity_defect(u.as_ref()),
        final_unitary: u,
        steps_used: n_steps,
        trajectory,
        achieved_difference: None,
        refinements: Vec::new(),
    })
}

fn sample_indices(n_steps: usize, samples: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..samples)
        .map(|s| ((s as f64) * n_steps as f64 / (samples - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// `exp(−(i/ħ) ∫H dt)` with the integral done by composite Simpson.
/// Only valid for commuting families.
pub fn propagate_commuting(
    schedule: &HamiltonianSchedule,
    quadrature_points: usize,
    hbar: f64,
) -> Result<PropagationResult> {
    if !schedule.commuting_family() {
        return Err(Error::Contract(format!(
            "schedule `{}` is not a commuting family; use the ordered propagator",
            schedule.label()
        )));
    }
    check_hbar(hbar)?;
    let integral = HermitianMatrix::new(operator_integral(schedule, quadrature_points)?)?;
    let u = integral.exp_i(1.0 / hbar)?.to_dense();
    Ok(PropagationResult {
        unitarity_defect: unitarity_defect(u.as_ref()),
        final_unitary: u,
        steps_used: quadrature_points,
        trajectory: None,
        achieved_difference: None,
        refinements: Vec::new(),
    })
}

#[derive(Clone, Debug)]
pub struct ConvergeSettings {
    pub target_tol: f64,
    pub max_steps: usize,
    pub initial_steps: usize,
    pub hbar: f64,
    pub columns: Option<usize>,
    pub initial: Option<StateVector>,
    pub trajectory_samples: usize,
}

impl ConvergeSettings {
    pub fn new(target_tol: f64, max_steps: usize, hbar: f64) -> Self {
        Self {
            target_tol,
            max_steps,
            initial_steps: 16,
            hbar,
            columns: None,
            initial: None,
            trajectory_samples: DEFAULT_TRAJECTORY_SAMPLES,
        }
    }
}

/// Doubles the step count until `‖U_{2n} − U_n‖_max < target_tol`.
pub fn converge(
    schedule: &HamiltonianSchedule,
    target_tol: f64,
    max_steps: usize,
    hbar: f64,
) -> Result<PropagationResult> {
    converge_with(schedule, &ConvergeSettings::new(target_tol, max_steps, hbar))
}

pub fn converge_with(schedule: &HamiltonianSchedule, settings: &ConvergeSettings) -> Result<PropagationResult> {
    if !(settings.target_tol > 0.0) {
        return Err(Error::Parameter(format!(
            "target tolerance must be > 0, got {}",
            settings.target_tol
        )));
    }
    let mut n = settings.initial_steps.max(1);
    if n * 2 > settings.max_steps {
        return Err(Error::Parameter(format!(
            "max_steps {} leaves no room to refine from {n} steps",
            settings.max_steps
        )));
    }
    let ordered = |n_steps: usize| {
        propagate_ordered_with(
            schedule,
            &OrderedSettings {
                n_steps,
                hbar: settings.hbar,
                columns: settings.columns,
                initial: settings.initial.clone(),
                trajectory_samples: settings.trajectory_samples,
            },
        )
    };
    let mut prev = ordered(n)?;
    let mut refinements = Vec::new();
    let mut last_diff = f64::INFINITY;
    while n * 2 <= settings.max_steps {
        n *= 2;
        let mut cur = ordered(n)?;
        last_diff = max_abs_diff(cur.final_unitary.as_ref(), prev.final_unitary.as_ref());
        refinements.push((n, last_diff));
        if last_diff < settings.target_tol {
            cur.achieved_difference = Some(last_diff);
            cur.refinements = refinements;
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numerical {
        message: format!(
            "ordered propagation of `{}` did not reach {:e} within {} steps",
            schedule.label(),
            settings.target_tol,
            settings.max_steps
        ),
        residual: last_diff,
    })
}
