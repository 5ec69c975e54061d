//! Tabulated control waveforms of the rescaled protocols, written as CSV.
//!
//! Note the two field scalings: the oscillator's kinetic-term field goes as
//! `√f'(τ)`, the spin drive as `f'(τ)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{param, Result};
use crate::models::{tr_frequency, tr_transport_position};
use crate::rescale::RescalingSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct WaveformTable {
    pub columns: [String; 2],
    pub rows: Vec<(f64, f64)>,
    /// Ordered `key=value` pairs for the CSV comment header.
    pub metadata: Vec<(String, String)>,
}

impl WaveformTable {
    pub fn first(&self) -> (f64, f64) {
        self.rows[0]
    }

    pub fn last(&self) -> (f64, f64) {
        *self.rows.last().unwrap()
    }

    pub fn peak(&self) -> (f64, f64) {
        self.rows
            .iter()
            .copied()
            .fold((0.0, f64::MIN), |best, row| if row.1 > best.1 { row } else { best })
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header = self
            .metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "# {header}");
        let _ = writeln!(out, "{},{}", self.columns[0], self.columns[1]);
        for (tau, value) in &self.rows {
            let _ = writeln!(out, "{},{}", fmt_f64(*tau), fmt_f64(*value));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn tabulate(
    scenario: &str,
    spec: &RescalingSpec,
    n_rows: usize,
    value: impl Fn(f64) -> Result<f64>,
) -> Result<WaveformTable> {
    if n_rows < 2 {
        return param(format!("a waveform table needs at least 2 rows, got {n_rows}"));
    }
    let end = spec.duration();
    let rows = (0..n_rows)
        .map(|k| {
            let tau = if k == n_rows - 1 {
                end
            } else {
                end * k as f64 / (n_rows - 1) as f64
            };
            value(tau).map(|v| (tau, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveformTable {
        columns: ["tau".into(), "value".into()],
        rows,
        metadata: vec![
            ("scenario".into(), scenario.into()),
            ("a".into(), spec.a().to_string()),
            ("t_f".into(), spec.t_f().to_string()),
            ("family".into(), spec.family().label().into()),
        ],
    })
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return param(format!("{name} must be finite, got {v}"));
    }
    Ok(())
}

/// `ω̃(τ)` for the oscillator compression stroke.
pub fn emit_tr_frequency_table(omega0: f64, omega_f: f64, spec: &RescalingSpec, n_rows: usize) -> Result<WaveformTable> {
    if !(omega0 > 0.0 && omega_f > 0.0) {
        return param("trap frequencies must be > 0");
    }
    tabulate("oscillator_frequency", spec, n_rows, |tau| tr_frequency(omega0, omega_f, spec, tau))
}

/// `B(τ) = B₀ √f'(τ)`, the field modulating the oscillator's kinetic term.
pub fn emit_tr_field_table(b0: f64, spec: &RescalingSpec, n_rows: usize) -> Result<WaveformTable> {
    check_finite("B0", b0)?;
    tabulate("oscillator_field", spec, n_rows, |tau| Ok(b0 * spec.f_prime(tau).sqrt()))
}

/// `x̃₀(τ)`, the rescaled trap trajectory.
pub fn emit_tr_transport_table(d: f64, spec: &RescalingSpec, n_rows: usize) -> Result<WaveformTable> {
    check_finite("d", d)?;
    tabulate("transport_position", spec, n_rows, |tau| tr_transport_position(d, spec, tau))
}

/// `B₀ f'(τ)`, the spin drive of the rescaled fixed-axis protocol.
pub fn emit_spin_field_table(b0: f64, spec: &RescalingSpec, n_rows: usize) -> Result<WaveformTable> {
    check_finite("B0", b0)?;
    tabulate("spin_field", spec, n_rows, |tau| Ok(b0 * spec.f_prime(tau)))
}
