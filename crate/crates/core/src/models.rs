//! Reference Hamiltonian schedules (spin-1/2, parametric oscillator, moving
//! trap) and the generic time-rescaling transform `H(t) → H(f(τ))·f'(τ)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{param, Error, Result};
use crate::matrix::{CMat, HermitianMatrix};
use crate::rescale::RescalingSpec;

type Evaluator = Arc<dyn Fn(f64) -> Result<HermitianMatrix> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// A time-dependent Hamiltonian on a closed time domain.
///
/// `commuting_family` is declared by the constructor, never inferred: it
/// promises `[H(t₁), H(t₂)] = 0` for all pairs of times in the domain.
#[derive(Clone)]
pub struct HamiltonianSchedule {
    label: String,
    dim: usize,
    domain: (f64, f64),
    commuting_family: bool,
    evaluator: Evaluator,
}

impl fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("commuting_family", &self.commuting_family)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSchedule {
    /// Wraps an arbitrary matrix-valued function. Every evaluation is checked
    /// for shape and Hermiticity.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        domain: (f64, f64),
        commuting_family: bool,
        evaluator: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Result<Self> {
        check_domain(domain)?;
        Ok(Self {
            label: label.into(),
            dim,
            domain,
            commuting_family,
            evaluator: Arc::new(move |t| HermitianMatrix::new(evaluator(t))),
        })
    }

    fn trusted(
        label: impl Into<String>,
        dim: usize,
        domain: (f64, f64),
        commuting_family: bool,
        evaluator: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            domain,
            commuting_family,
            evaluator: Arc::new(move |t| Ok(HermitianMatrix::from_trusted(evaluator(t)))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn duration(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn commuting_family(&self) -> bool {
        self.commuting_family
    }

    pub fn evaluate(&self, t: f64) -> Result<HermitianMatrix> {
        let h = (self.evaluator)(t)?;
        if h.dim() != self.dim {
            return Err(Error::Schedule(format!(
                "schedule `{}` produced a {}×{} matrix at t = {t}, expected dimension {}",
                self.label,
                h.dim(),
                h.dim(),
                self.dim
            )));
        }
        Ok(h)
    }
}

fn check_domain((start, end): (f64, f64)) -> Result<()> {
    if !(start.is_finite() && end.is_finite() && end > start) {
        return param(format!("schedule domain [{start}, {end}] is empty or not finite"));
    }
    Ok(())
}

/// Applies the time-rescaling transform to a reference schedule on `[0, t_f]`,
/// producing `ℋ(τ) = f'(τ)·H(f(τ))` on `[0, t_f/a]`.
pub fn time_rescale(reference: &HamiltonianSchedule, spec: &RescalingSpec) -> Result<HamiltonianSchedule> {
    let (start, end) = reference.domain();
    let t_f = spec.t_f();
    if start != 0.0 || (end - t_f).abs() > 1e-12 * t_f.max(1.0) {
        return param(format!(
            "reference domain [{start}, {end}] does not match rescaling t_f = {t_f}"
        ));
    }
    let inner = reference.evaluator.clone();
    let spec_eval = spec.clone();
    let label = format!("{} (rescaled, {} a={})", reference.label, spec.family().label(), spec.a());
    Ok(HamiltonianSchedule {
        label,
        dim: reference.dim,
        domain: (0.0, spec.duration()),
        commuting_family: reference.commuting_family,
        evaluator: Arc::new(move |tau| {
            let rate = spec_eval.f_prime(tau);
            let h = inner(spec_eval.f(tau))?;
            if rate == 1.0 {
                Ok(h)
            } else {
                Ok(h.scaled(rate))
            }
        }),
    })
}

// ---------------------------------------------------------------------------
// Spin-1/2

#[derive(Clone, Copy, Debug)]
pub struct SpinParams {
    /// Gyromagnetic ratio γ.
    pub gamma: f64,
    pub hbar: f64,
}

impl Default for SpinParams {
    fn default() -> Self {
        Self { gamma: 1.0, hbar: 1.0 }
    }
}

/// Magnetic field driving a spin. A field along a fixed axis yields a
/// commuting family; a general vector field does not.
#[derive(Clone)]
pub enum SpinField {
    Along { axis: [f64; 3], magnitude: ScalarFn },
    Vector(VectorFn),
}

impl SpinField {
    pub fn constant(b: [f64; 3]) -> Self {
        SpinField::Along {
            axis: b,
            magnitude: Arc::new(|_| 1.0),
        }
    }

    pub fn along(axis: [f64; 3], magnitude: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpinField::Along {
            axis,
            magnitude: Arc::new(magnitude),
        }
    }

    pub fn vector(field: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        SpinField::Vector(Arc::new(field))
    }

    /// `B₀ (sin θ cos ωt, sin θ sin ωt, cos θ)`: a field of fixed magnitude
    /// tilted by `θ` from z and precessing about z at rate `ω`.
    pub fn rotating(b0: f64, tilt: f64, omega_rot: f64) -> Self {
        SpinField::vector(move |t| {
            let (s, c) = tilt.sin_cos();
            [b0 * s * (omega_rot * t).cos(), b0 * s * (omega_rot * t).sin(), b0 * c]
        })
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        match self {
            SpinField::Along { axis, magnitude } => {
                let m = magnitude(t);
                [axis[0] * m, axis[1] * m, axis[2] * m]
            }
            SpinField::Vector(f) => f(t),
        }
    }
}

/// `γ B·S` as a 2×2 matrix in the `{|+⟩, |−⟩}` basis of `S_z`.
pub fn spin_hamiltonian(params: SpinParams, b: [f64; 3]) -> CMat {
    let k = params.gamma * params.hbar / 2.0;
    let [bx, by, bz] = b;
    let mut m = Mat::zeros(2, 2);
    m[(0, 0)] = c64::new(k * bz, 0.0);
    m[(1, 1)] = c64::new(-k * bz, 0.0);
    m[(0, 1)] = c64::new(k * bx, -k * by);
    m[(1, 0)] = c64::new(k * bx, k * by);
    m
}

pub fn spin_schedule(params: SpinParams, field: SpinField, domain: (f64, f64)) -> Result<HamiltonianSchedule> {
    check_domain(domain)?;
    if !(params.gamma != 0.0 && params.gamma.is_finite()) {
        return param("gyromagnetic ratio must be finite and nonzero");
    }
    if !(params.hbar > 0.0) {
        return param("ħ must be > 0");
    }
    let commuting = matches!(field, SpinField::Along { .. });
    let label = if commuting { "spin, fixed-axis field" } else { "spin, vector field" };
    Ok(HamiltonianSchedule::trusted(label, 2, domain, commuting, move |t| {
        spin_hamiltonian(params, field.at(t))
    }))
}

// ---------------------------------------------------------------------------
// Harmonic oscillator in a truncated Fock basis

#[derive(Clone, Copy, Debug)]
pub struct OscillatorParams {
    pub mass: f64,
    pub hbar: f64,
    /// Number of Fock levels kept.
    pub basis_dim: usize,
    /// Frequency defining the fixed matrix representation of `x̂`, `p̂`.
    pub basis_frequency: f64,
}

impl OscillatorParams {
    pub fn natural(basis_dim: usize, basis_frequency: f64) -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            basis_dim,
            basis_frequency,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.basis_dim < 2 {
            return param(format!("Fock basis needs at least 2 levels, got {}", self.basis_dim));
        }
        if !(self.mass > 0.0 && self.hbar > 0.0 && self.basis_frequency > 0.0) {
            return param("mass, ħ and basis frequency must all be > 0");
        }
        Ok(())
    }
}

/// `x̂`, `p̂`, `x̂²`, `p̂²` in the Fock basis of frequency `ω_b`.
///
/// Built with two extra levels and cropped, so `x̂²` and `p̂²` are exact on
/// every retained level; only `x̂`, `p̂` themselves feel the cut (their
/// commutator is wrong in the last row/column).
#[derive(Clone, Debug)]
pub struct FockOperators {
    pub x: Mat<f64>,
    /// `p̂ = i·p_im`; `p_im` is real antisymmetric.
    pub p_im: Mat<f64>,
    pub x2: Mat<f64>,
    pub p2: Mat<f64>,
}

impl FockOperators {
    pub fn new(params: &OscillatorParams) -> Result<Self> {
        params.validate()?;
        let n = params.basis_dim;
        let big = n + 2;
        // a|k⟩ = √k |k−1⟩  ⇒  a[k−1, k] = √k
        let lower = Mat::from_fn(big, big, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
        let sum = Mat::from_fn(big, big, |i, j| lower[(i, j)] + lower[(j, i)]);
        let diff = Mat::from_fn(big, big, |i, j| lower[(j, i)] - lower[(i, j)]);
        let x_scale = (params.hbar / (2.0 * params.mass * params.basis_frequency)).sqrt();
        let p_scale = (params.hbar * params.mass * params.basis_frequency / 2.0).sqrt();
        let sum2 = &sum * &sum;
        let diff2 = &diff * &diff;
        let crop = |m: &Mat<f64>, s: f64| Mat::from_fn(n, n, |i, j| m[(i, j)] * s);
        Ok(Self {
            x: crop(&sum, x_scale),
            p_im: crop(&diff, p_scale),
            x2: crop(&sum2, x_scale * x_scale),
            p2: crop(&diff2, -p_scale * p_scale),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> CMat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| c64::new(0.0, self.p_im[(i, j)]))
    }

    pub fn x_complex(&self) -> CMat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| c64::new(self.x[(i, j)], 0.0))
    }
}

/// `κ(t) p̂²/2m + ½ m ω(t)² (x̂ − x₀(t))²` assembled from the Fock matrices.
fn trap_matrix(ops: &FockOperators, mass: f64, kinetic: f64, omega: f64, x0: f64) -> CMat {
    let n = ops.dim();
    let kin = kinetic / (2.0 * mass);
    let pot = 0.5 * mass * omega * omega;
    Mat::from_fn(n, n, |i, j| {
        let mut v = kin * ops.p2[(i, j)] + pot * ops.x2[(i, j)];
        if x0 != 0.0 {
            v -= pot * 2.0 * x0 * ops.x[(i, j)];
            if i == j {
                v += pot * x0 * x0;
            }
        }
        c64::new(v, 0.0)
    })
}

pub fn oscillator_schedule(
    params: OscillatorParams,
    domain: (f64, f64),
    kinetic_scale: impl Fn(f64) -> f64 + Send + Sync + 'static,
    omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<HamiltonianSchedule> {
    transport_schedule(params, domain, kinetic_scale, omega, |_| 0.0)
}

pub fn transport_schedule(
    params: OscillatorParams,
    domain: (f64, f64),
    kinetic_scale: impl Fn(f64) -> f64 + Send + Sync + 'static,
    omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
    x0: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<HamiltonianSchedule> {
    check_domain(domain)?;
    let ops = Arc::new(FockOperators::new(&params)?);
    let mass = params.mass;
    Ok(HamiltonianSchedule::trusted(
        "harmonic trap",
        params.basis_dim,
        domain,
        false,
        move |t| trap_matrix(&ops, mass, kinetic_scale(t), omega(t), x0(t)),
    ))
}

// ---------------------------------------------------------------------------
// Closed-form reference and rescaled control functions

fn check_time(t: f64, end: f64, what: &str) -> Result<()> {
    if !(t >= 0.0 && t <= end * (1.0 + 1e-14)) {
        return param(format!("{what} {t} lies outside [0, {end}]"));
    }
    Ok(())
}

/// Reference compression ramp `ω(t) = ω₀ + (ω_f − ω₀) sin²(πt/2t_f)`.
pub fn compression_frequency(omega0: f64, omega_f: f64, t_f: f64, t: f64) -> Result<f64> {
    if !(t_f > 0.0) {
        return param("t_f must be > 0");
    }
    check_time(t, t_f, "time")?;
    Ok(compression_ramp(omega0, omega_f, t_f, t))
}

pub(crate) fn compression_ramp(omega0: f64, omega_f: f64, t_f: f64, t: f64) -> f64 {
    if t == t_f {
        return omega_f;
    }
    let s = (PI * t / (2.0 * t_f)).sin();
    omega0 + (omega_f - omega0) * s * s
}

/// Rescaled trap frequency `ω̃(τ) = √f'(τ) · ω(f(τ))`.
pub fn tr_frequency(omega0: f64, omega_f: f64, spec: &RescalingSpec, tau: f64) -> Result<f64> {
    check_time(tau, spec.duration(), "rescaled time")?;
    let t = spec.f(tau).clamp(0.0, spec.t_f());
    Ok(spec.f_prime(tau).sqrt() * compression_ramp(omega0, omega_f, spec.t_f(), t))
}

/// Reference trap position `x₀(t) = d sin²(πt/2t_f)`.
pub fn transport_position(d: f64, t_f: f64, t: f64) -> f64 {
    if t == t_f {
        return d;
    }
    let s = (PI * t / (2.0 * t_f)).sin();
    d * s * s
}

/// Rescaled trap position `x̃₀(τ) = x₀(f(τ))`.
pub fn tr_transport_position(d: f64, spec: &RescalingSpec, tau: f64) -> Result<f64> {
    check_time(tau, spec.duration(), "rescaled time")?;
    Ok(transport_position(d, spec.t_f(), spec.f(tau)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::max_abs_diff;

    fn natural(n: usize) -> OscillatorParams {
        OscillatorParams::natural(n, 1.0)
    }

    #[test]
    fn constant_z_field() {
        let p = SpinParams { gamma: 2.0, hbar: 1.0 };
        let h = spin_schedule(p, SpinField::constant([0.0, 0.0, 0.75]), (0.0, 1.0))
            .unwrap()
            .evaluate(0.3)
            .unwrap();
        let omega = 2.0 * 0.75;
        assert_eq!(h.entry(0, 0), c64::new(omega / 2.0, 0.0));
        assert_eq!(h.entry(1, 1), c64::new(-omega / 2.0, 0.0));
        assert_eq!(h.entry(0, 1), c64::new(0.0, 0.0));
    }

    #[test]
    fn x_field_is_off_diagonal() {
        let s = spin_schedule(SpinParams::default(), SpinField::constant([1.3, 0.0, 0.0]), (0.0, 1.0)).unwrap();
        let h = s.evaluate(0.0).unwrap();
        assert_eq!(h.entry(0, 1), c64::new(0.65, 0.0));
        assert_eq!(h.entry(1, 0), c64::new(0.65, 0.0));
        assert_eq!(h.entry(0, 0), c64::new(0.0, 0.0));
        assert!(s.commuting_family());
    }

    #[test]
    fn zero_field_gives_zero_matrix() {
        let s = spin_schedule(SpinParams::default(), SpinField::constant([0.0; 3]), (0.0, 1.0)).unwrap();
        assert_eq!(s.evaluate(0.5).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn rotating_field_is_not_commuting() {
        let s = spin_schedule(SpinParams::default(), SpinField::rotating(1.0, 0.5, 0.3), (0.0, 1.0)).unwrap();
        assert!(!s.commuting_family());
        assert!(spin_schedule(SpinParams { gamma: 0.0, hbar: 1.0 }, SpinField::constant([0.0; 3]), (0.0, 1.0)).is_err());
    }

    #[test]
    fn oscillator_is_diagonal_in_own_basis() {
        let s = oscillator_schedule(natural(8), (0.0, 1.0), |_| 1.0, |_| 1.0).unwrap();
        let h = s.evaluate(0.2).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { i as f64 + 0.5 } else { 0.0 };
                assert!((h.entry(i, j).re - want).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn ground_state_position_variance() {
        let params = OscillatorParams {
            mass: 2.0,
            hbar: 0.5,
            basis_dim: 2,
            basis_frequency: 3.0,
        };
        let ops = FockOperators::new(&params).unwrap();
        assert!((ops.x2[(0, 0)] - 0.5 / (2.0 * 2.0 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn canonical_commutator_on_interior_block() {
        let params = OscillatorParams {
            mass: 1.7,
            hbar: 0.8,
            basis_dim: 12,
            basis_frequency: 2.2,
        };
        let ops = FockOperators::new(&params).unwrap();
        let x = ops.x_complex();
        let p = ops.p();
        let comm = &x * &p - &p * &x;
        let n = ops.dim();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j { c64::new(0.0, params.hbar) } else { c64::new(0.0, 0.0) };
                assert!((comm[(i, j)] - want).norm() < 1e-12);
            }
        }
        // The last diagonal element carries the truncation error.
        assert!((comm[(n - 1, n - 1)] - c64::new(0.0, params.hbar)).norm() > 1.0);
    }

    #[test]
    fn rejects_tiny_basis() {
        assert!(FockOperators::new(&natural(1)).is_err());
        assert!(oscillator_schedule(natural(1), (0.0, 1.0), |_| 1.0, |_| 1.0).is_err());
    }

    #[test]
    fn compression_starts_as_pure_initial_oscillator() {
        let s = oscillator_schedule(natural(6), (0.0, 5.0), |_| 1.0, |t| compression_ramp(1.0, 6.0, 5.0, t)).unwrap();
        let h = s.evaluate(0.0).unwrap();
        let pure = oscillator_schedule(natural(6), (0.0, 5.0), |_| 1.0, |_| 1.0).unwrap().evaluate(0.0).unwrap();
        assert_eq!(max_abs_diff(h.as_ref(), pure.as_ref()), 0.0);
    }

    #[test]
    fn transport_reduces_to_oscillator_at_zero_offset() {
        let a = transport_schedule(natural(10), (0.0, 1.0), |_| 1.3, |_| 2.0, |_| 0.0).unwrap();
        let b = oscillator_schedule(natural(10), (0.0, 1.0), |_| 1.3, |_| 2.0).unwrap();
        let (ha, hb) = (a.evaluate(0.4).unwrap(), b.evaluate(0.4).unwrap());
        assert_eq!(max_abs_diff(ha.as_ref(), hb.as_ref()), 0.0);
    }

    #[test]
    fn displaced_trap_ground_energy() {
        // ⟨0|H|0⟩ − ħω/2 = ½ m ω² x₀², from the Gaussian ground-state moments
        // ⟨x⟩ = 0 and ⟨x²⟩ = ħ/2mω.
        let params = OscillatorParams {
            mass: 1.5,
            hbar: 1.0,
            basis_dim: 16,
            basis_frequency: 0.7,
        };
        let x0 = 1.9;
        let s = transport_schedule(params, (0.0, 1.0), |_| 1.0, |_| 0.7, move |_| x0).unwrap();
        let e = s.evaluate(0.0).unwrap().entry(0, 0).re - 0.5 * 0.7;
        assert!((e - 0.5 * 1.5 * 0.49 * x0 * x0).abs() < 1e-13);
    }

    #[test]
    fn transport_endpoints() {
        assert_eq!(transport_position(3.0, 2.0, 0.0), 0.0);
        assert_eq!(transport_position(3.0, 2.0, 2.0), 3.0);
    }

    #[test]
    fn compression_frequency_values() {
        assert_eq!(compression_frequency(1.0, 6.0, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(compression_frequency(1.0, 6.0, 2.0, 2.0).unwrap(), 6.0);
        assert!((compression_frequency(1.0, 6.0, 2.0, 1.0).unwrap() - 3.5).abs() < 1e-15);
        assert!(compression_frequency(1.0, 6.0, 2.0, 2.5).is_err());
        assert!(compression_frequency(1.0, 6.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn tr_frequency_values() {
        let spec = RescalingSpec::sinusoidal(2.0, 1.0).unwrap();
        assert_eq!(tr_frequency(1.0, 6.0, &spec, 0.0).unwrap(), 1.0);
        assert_eq!(tr_frequency(1.0, 6.0, &spec, 0.5).unwrap(), 6.0);
        assert!((tr_frequency(1.0, 6.0, &spec, 0.25).unwrap() - 3.0f64.sqrt() * 3.5).abs() < 1e-14);
        assert!(tr_frequency(1.0, 6.0, &spec, 0.6).is_err());
    }

    #[test]
    fn tr_frequency_matches_closed_form() {
        // Closed form for the sinusoidal family, written out term by term.
        let (a, t_f, w0, wf) = (3.0, 7.0, 1.0, 6.0);
        let spec = RescalingSpec::sinusoidal(a, t_f).unwrap();
        for k in 0..=50 {
            let tau = spec.duration() * k as f64 / 50.0;
            let arg = 2.0 * PI * a * tau / t_f;
            let phase = PI * a * tau / (2.0 * t_f) - (a - 1.0) / (4.0 * a) * arg.sin();
            let want = (a - (a - 1.0) * arg.cos()).sqrt() * (w0 + (wf - w0) * phase.sin().powi(2));
            assert!((tr_frequency(w0, wf, &spec, tau).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_identity_and_domain() {
        let reference = oscillator_schedule(natural(6), (0.0, 2.0), |_| 1.0, |t| 1.0 + t).unwrap();
        let same = time_rescale(&reference, &RescalingSpec::sinusoidal(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(same.domain(), (0.0, 2.0));
        for t in [0.0, 0.3, 1.1, 2.0] {
            let d = max_abs_diff(same.evaluate(t).unwrap().as_ref(), reference.evaluate(t).unwrap().as_ref());
            assert_eq!(d, 0.0);
        }
        assert!(time_rescale(&reference, &RescalingSpec::sinusoidal(2.0, 3.0).unwrap()).is_err());
    }

    #[test]
    fn rescaled_spin_z_follows_rate() {
        let (a, t_f, omega) = (3.0, PI, 1.0);
        let reference = spin_schedule(SpinParams::default(), SpinField::constant([0.0, 0.0, omega]), (0.0, t_f)).unwrap();
        let spec = RescalingSpec::sinusoidal(a, t_f).unwrap();
        let tr = time_rescale(&reference, &spec).unwrap();
        assert!(tr.commuting_family());
        for k in 0..=20 {
            let tau = spec.duration() * k as f64 / 20.0;
            let rate = a - (a - 1.0) * (2.0 * PI * a * tau / t_f).cos();
            let h = tr.evaluate(tau).unwrap();
            assert!((h.entry(0, 0).re - rate * omega / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rescaled_oscillator_carries_tr_frequency() {
        let (a, t_f) = (2.5, 10.0);
        let params = natural(10);
        let reference = oscillator_schedule(params, (0.0, t_f), |_| 1.0, move |t| compression_ramp(1.0, 6.0, t_f, t)).unwrap();
        let spec = RescalingSpec::polynomial(a, t_f).unwrap();
        let tr = time_rescale(&reference, &spec).unwrap();
        let spec2 = spec.clone();
        let explicit = oscillator_schedule(
            params,
            (0.0, spec.duration()),
            move |tau| spec2.f_prime(tau),
            move |tau| tr_frequency(1.0, 6.0, &RescalingSpec::polynomial(a, t_f).unwrap(), tau).unwrap(),
        )
        .unwrap();
        for k in 0..=10 {
            let tau = spec.duration() * k as f64 / 10.0;
            let d = max_abs_diff(tr.evaluate(tau).unwrap().as_ref(), explicit.evaluate(tau).unwrap().as_ref());
            assert!(d < 1e-11, "tau={tau} diff={d}");
        }
    }

    #[test]
    fn endpoint_hamiltonians_match_exactly() {
        for spec in [RescalingSpec::sinusoidal(4.0, 100.0).unwrap(), RescalingSpec::polynomial(4.0, 100.0).unwrap()] {
            let reference = transport_schedule(
                natural(12),
                (0.0, 100.0),
                |_| 1.0,
                |t| compression_ramp(1.0, 6.0, 100.0, t),
                |t| transport_position(5.0, 100.0, t),
            )
            .unwrap();
            let tr = time_rescale(&reference, &spec).unwrap();
            let d0 = max_abs_diff(tr.evaluate(0.0).unwrap().as_ref(), reference.evaluate(0.0).unwrap().as_ref());
            let d1 = max_abs_diff(
                tr.evaluate(spec.duration()).unwrap().as_ref(),
                reference.evaluate(100.0).unwrap().as_ref(),
            );
            assert_eq!(d0, 0.0);
            assert_eq!(d1, 0.0);
        }
    }

    #[test]
    fn custom_schedule_checks_hermiticity() {
        let bad = HamiltonianSchedule::new("bad", 2, (0.0, 1.0), false, |_| {
            Mat::from_fn(2, 2, |i, j| c64::new((i * 2 + j) as f64, 0.0))
        })
        .unwrap();
        assert!(matches!(bad.evaluate(0.0), Err(Error::Schedule(_))));
        let wrong_dim = HamiltonianSchedule::new("dim", 3, (0.0, 1.0), false, |_| Mat::zeros(2, 2)).unwrap();
        assert!(wrong_dim.evaluate(0.0).is_err());
        assert!(HamiltonianSchedule::new("empty", 2, (1.0, 1.0), false, |_| Mat::zeros(2, 2)).is_err());
    }
}
