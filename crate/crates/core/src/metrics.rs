//! Figures of merit for a shortcut: state overlap and phase, energy spread,
//! Mandelstam–Tamm products, level populations and drive-cost diagnostics.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{CMat, HermitianMatrix};
use crate::models::HamiltonianSchedule;
use crate::propagate::StateVector;

/// Eigenvalues closer than this fraction of `‖H‖` are treated as degenerate.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub fidelity: f64,
    pub relative_phase: f64,
    pub mt_product: f64,
    pub peak_drive_norm: f64,
    pub integral_mismatch: f64,
    pub endpoint_mismatch: f64,
}

/// `|⟨ψ₁|ψ₂⟩|²`
pub fn fidelity(psi1: &StateVector, psi2: &StateVector) -> Result<f64> {
    Ok(psi1.inner(psi2)?.norm_sqr().clamp(0.0, 1.0))
}

/// `arg⟨target|ψ⟩` in `(−π, π]`. Only meaningful for near-parallel states,
/// so overlaps with fidelity ≤ 0.5 are rejected.
pub fn relative_phase(target: &StateVector, psi: &StateVector) -> Result<f64> {
    let overlap = target.inner(psi)?;
    let fid = overlap.norm_sqr();
    if fid <= 0.5 {
        return Err(Error::UndefinedPhase { fidelity: fid });
    }
    let phase = overlap.im.atan2(overlap.re);
    Ok(if phase <= -PI { PI } else { phase })
}

fn expectation(h: &CMat, psi: &StateVector) -> c64 {
    let amps = psi.amplitudes();
    let n = amps.len();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..n {
        let mut col = c64::new(0.0, 0.0);
        for i in 0..n {
            col += amps[i].conj() * h[(i, j)];
        }
        acc += col * amps[j];
    }
    acc
}

/// `ΔE = √(⟨H²⟩ − ⟨H⟩²)`, clamped at zero against round-off.
pub fn energy_uncertainty(h: &HermitianMatrix, psi: &StateVector) -> Result<f64> {
    if h.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.dim(),
        });
    }
    let m = h.as_ref().to_owned();
    let mean = expectation(&m, psi).re;
    let sq = &m * &m;
    let mean_sq = expectation(&sq, psi).re;
    Ok((mean_sq - mean * mean).max(0.0).sqrt())
}

pub fn mt_product(dt: f64, de: f64) -> f64 {
    dt * de
}

/// Eigenvalues of `h` grouped into degenerate levels: `(energy, indices)`.
fn grouped_levels(values: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = DEGENERACY_REL_TOL * scale;
    let mut levels: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match levels.last_mut() {
            Some((_, idx)) if (v - values[*idx.last().unwrap()]).abs() <= gap => idx.push(i),
            _ => levels.push((v, vec![i])),
        }
    }
    levels
}

/// Populations of `ψ` in the instantaneous eigenbasis of `H(t)`, energies
/// ascending; a degenerate level contributes one summed entry.
pub fn instantaneous_populations(schedule: &HamiltonianSchedule, t: f64, psi: &StateVector) -> Result<Vec<f64>> {
    if psi.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: psi.dim(),
        });
    }
    let h = schedule.evaluate(t)?;
    let (values, vectors) = h.eigh()?;
    let amps = psi.amplitudes();
    let weight = |col: usize| -> f64 {
        (0..amps.len())
            .map(|i| vectors[(i, col)].conj() * amps[i])
            .sum::<c64>()
            .norm_sqr()
    };
    Ok(grouped_levels(&values)
        .into_iter()
        .map(|(_, idx)| idx.into_iter().map(weight).sum())
        .collect())
}

/// `∫ H(t) dt` over the schedule's domain by composite Simpson.
pub fn operator_integral(schedule: &HamiltonianSchedule, n_points: usize) -> Result<CMat> {
    if n_points < 3 || n_points % 2 == 0 {
        return Err(Error::Parameter(format!(
            "Simpson quadrature needs an odd number of points ≥ 3, got {n_points}"
        )));
    }
    let (t0, t1) = schedule.domain();
    let intervals = n_points - 1;
    let h = (t1 - t0) / intervals as f64;
    let dim = schedule.dim();
    let mut acc = Mat::<c64>::zeros(dim, dim);
    for k in 0..n_points {
        let t = if k == intervals { t1 } else { t0 + k as f64 * h };
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let m = schedule.evaluate(t)?;
        let m = m.as_ref();
        for j in 0..dim {
            for i in 0..dim {
                acc[(i, j)] += m[(i, j)] * w;
            }
        }
    }
    let factor = h / 3.0;
    Ok(Mat::from_fn(dim, dim, |i, j| acc[(i, j)] * factor))
}

/// Largest spectral norm of `H(t)` over `n_samples` evenly spaced times,
/// endpoints included.
pub fn peak_drive_norm(schedule: &HamiltonianSchedule, n_samples: usize) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n_samples}")));
    }
    let (t0, t1) = schedule.domain();
    let mut peak = 0.0f64;
    for k in 0..n_samples {
        let t = if k == n_samples - 1 {
            t1
        } else {
            t0 + (t1 - t0) * k as f64 / (n_samples - 1) as f64
        };
        peak = peak.max(schedule.evaluate(t)?.spectral_norm()?);
    }
    Ok(peak)
}
