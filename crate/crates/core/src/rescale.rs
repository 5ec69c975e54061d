//! Time-rescaling functions `t = f(τ)` and their STA qualification checks.
//!
//! A rescaling maps the compressed protocol clock `τ ∈ [0, t_f/a]` onto the
//! reference clock `t ∈ [0, t_f]`. The two built-in families both satisfy
//! `f(0) = 0`, `f(t_f/a) = t_f` and `f'(0) = f'(t_f/a) = 1`, so the rescaled
//! Hamiltonian `H(f(τ)) f'(τ)` starts and ends on the reference Hamiltonian.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};

/// Default absolute tolerance (scaled by `max(1, t_f)`) for [`invert_f`].
pub const DEFAULT_INVERSE_TOL: f64 = 1e-12;

const MAX_INVERSE_ITERATIONS: usize = 200;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied rescaling given as a pair of callables `(f, f')`.
///
/// Nothing about a custom rescaling is assumed analytically; use
/// [`validate_sta`] to check it numerically.
#[derive(Clone)]
pub struct CustomRescaling {
    name: String,
    f: ScalarFn,
    f_prime: ScalarFn,
}

impl CustomRescaling {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_prime: Arc::new(f_prime),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomRescaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRescaling")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum RescalingFamily {
    /// `f(τ) = aτ − t_f (a−1)/(2πa) · sin(2πaτ/t_f)`
    Sinusoidal,
    /// `f(τ) = 2(a²−a³)/t_f² τ³ + 3(a²−a)/t_f τ² + τ`
    Polynomial,
    Custom(CustomRescaling),
}

impl RescalingFamily {
    pub fn label(&self) -> &str {
        match self {
            RescalingFamily::Sinusoidal => "sin",
            RescalingFamily::Polynomial => "poly",
            RescalingFamily::Custom(c) => c.name(),
        }
    }

    /// Parses the CLI/config spelling of a built-in family.
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "sin" | "sinusoidal" => Ok(RescalingFamily::Sinusoidal),
            "poly" | "polynomial" => Ok(RescalingFamily::Polynomial),
            other => param(format!("unknown rescaling family `{other}` (expected sin or poly)")),
        }
    }
}

/// A concrete time-rescaling: family, contraction parameter `a` and the
/// reference duration `t_f`. Immutable; cheap to clone.
#[derive(Clone, Debug)]
pub struct RescalingSpec {
    family: RescalingFamily,
    a: f64,
    t_f: f64,
}

impl RescalingSpec {
    pub fn new(family: RescalingFamily, a: f64, t_f: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return param(format!("contraction parameter a must be > 0, got {a}"));
        }
        if !(t_f.is_finite() && t_f > 0.0) {
            return param(format!("reference duration t_f must be > 0, got {t_f}"));
        }
        Ok(Self { family, a, t_f })
    }

    pub fn sinusoidal(a: f64, t_f: f64) -> Result<Self> {
        Self::new(RescalingFamily::Sinusoidal, a, t_f)
    }

    pub fn polynomial(a: f64, t_f: f64) -> Result<Self> {
        Self::new(RescalingFamily::Polynomial, a, t_f)
    }

    pub fn family(&self) -> &RescalingFamily {
        &self.family
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Nominal length `t_f / a` of the rescaled protocol.
    pub fn duration(&self) -> f64 {
        self.t_f / self.a
    }

    fn is_builtin(&self) -> bool {
        !matches!(self.family, RescalingFamily::Custom(_))
    }

    /// `f(τ)`. The built-in families return the endpoints `0` and `t_f`
    /// exactly at `τ = 0` and `τ = t_f/a`.
    pub fn f(&self, tau: f64) -> f64 {
        let (a, t_f) = (self.a, self.t_f);
        if self.is_builtin() {
            if tau == 0.0 {
                return 0.0;
            }
            if tau == self.duration() {
                return t_f;
            }
        }
        match &self.family {
            RescalingFamily::Sinusoidal => {
                a * tau - t_f * (a - 1.0) / (2.0 * PI * a) * (2.0 * PI * a * tau / t_f).sin()
            }
            RescalingFamily::Polynomial => {
                let c3 = 2.0 * (a * a - a * a * a) / (t_f * t_f);
                let c2 = 3.0 * (a * a - a) / t_f;
                ((c3 * tau + c2) * tau + 1.0) * tau
            }
            RescalingFamily::Custom(c) => (c.f)(tau),
        }
    }

    /// `f'(τ)`, the instantaneous rate of the reference clock.
    pub fn f_prime(&self, tau: f64) -> f64 {
        let (a, t_f) = (self.a, self.t_f);
        if self.is_builtin() && (tau == 0.0 || tau == self.duration()) {
            return 1.0;
        }
        match &self.family {
            RescalingFamily::Sinusoidal => a - (a - 1.0) * (2.0 * PI * a * tau / t_f).cos(),
            RescalingFamily::Polynomial => {
                let c3 = 2.0 * (a * a - a * a * a) / (t_f * t_f);
                let c2 = 3.0 * (a * a - a) / t_f;
                (3.0 * c3 * tau + 2.0 * c2) * tau + 1.0
            }
            RescalingFamily::Custom(c) => (c.f_prime)(tau),
        }
    }

    /// Upper bound of `f'` on `[0, t_f/a]` for the built-in families
    /// (`2a−1` sinusoidal, `(3a−1)/2` polynomial) when `a ≥ 1`.
    pub fn peak_rate(&self) -> Option<f64> {
        if self.a < 1.0 {
            return None;
        }
        match self.family {
            RescalingFamily::Sinusoidal => Some(2.0 * self.a - 1.0),
            RescalingFamily::Polynomial => Some((3.0 * self.a - 1.0) / 2.0),
            RescalingFamily::Custom(_) => None,
        }
    }
}

pub fn eval_f(spec: &RescalingSpec, tau: f64) -> f64 {
    spec.f(tau)
}

pub fn eval_f_prime(spec: &RescalingSpec, tau: f64) -> f64 {
    spec.f_prime(tau)
}

/// Solves `f(τ) = t` for `τ` by Newton iteration safeguarded by a bisection
/// bracket. Returns `τ` with `|f(τ) − t| ≤ tol·max(1, t_f)`.
pub fn invert_f(spec: &RescalingSpec, t: f64, tol: f64) -> Result<f64> {
    let t_f = spec.t_f();
    if !(tol > 0.0) {
        return param(format!("inverse tolerance must be > 0, got {tol}"));
    }
    if !(0.0..=t_f).contains(&t) {
        return param(format!("t = {t} lies outside [0, {t_f}]"));
    }
    let abs_tol = tol * t_f.max(1.0);
    if t == 0.0 && spec.is_builtin() {
        return Ok(0.0);
    }

    let g = |tau: f64| spec.f(tau) - t;
    let mut lo = 0.0;
    let mut hi = spec.duration();
    let mut g_lo = g(lo);
    if g_lo.abs() <= abs_tol {
        return Ok(lo);
    }
    let mut g_hi = g(hi);
    // Custom rescalings need not reach t_f at t_f/a; widen the bracket.
    let mut widen = 0;
    while g_hi < 0.0 {
        widen += 1;
        if widen > 60 || !g_hi.is_finite() {
            return Err(Error::Numerical {
                message: format!("could not bracket f(τ) = {t}"),
                residual: g_hi.abs(),
            });
        }
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = g(hi);
    }
    if g_hi.abs() <= abs_tol {
        return Ok(hi);
    }
    if g_lo > 0.0 {
        return Err(Error::Numerical {
            message: format!("f(τ) − {t} does not change sign on the search bracket"),
            residual: g_lo.abs(),
        });
    }

    let mut tau = (t / spec.a()).clamp(lo, hi);
    for _ in 0..MAX_INVERSE_ITERATIONS {
        let r = g(tau);
        if r.abs() <= abs_tol {
            return Ok(tau);
        }
        if r < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let slope = spec.f_prime(tau);
        let newton = tau - r / slope;
        tau = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            let r = g(tau);
            if r.abs() <= abs_tol {
                return Ok(tau);
            }
            return Err(Error::Numerical {
                message: format!("bracket collapsed while inverting f at t = {t}"),
                residual: r.abs(),
            });
        }
    }
    Err(Error::Numerical {
        message: format!("inverse of f did not converge at t = {t}"),
        residual: g(tau).abs(),
    })
}

/// Outcome of checking the four STA requirements on a rescaling.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StaValidationReport {
    /// `f⁻¹(0) = 0`
    pub initial_time_ok: bool,
    /// `f⁻¹(t_f) < t_f`
    pub faster_ok: bool,
    /// `f'(f⁻¹(0)) = 1`
    pub initial_rate_ok: bool,
    /// `f'(f⁻¹(t_f)) = 1`
    pub final_rate_ok: bool,
    pub tolerance: f64,
}

impl StaValidationReport {
    pub fn passed(&self) -> bool {
        self.initial_time_ok && self.faster_ok && self.initial_rate_ok && self.final_rate_ok
    }
}

/// Numerically checks the four STA requirements. Failure to invert `f` (only
/// possible for custom rescalings) turns the affected flags false.
pub fn validate_sta(spec: &RescalingSpec, tol: f64) -> Result<StaValidationReport> {
    if !(tol > 0.0) {
        return param(format!("validation tolerance must be > 0, got {tol}"));
    }
    let scale = spec.t_f().max(1.0);
    let inv_tol = DEFAULT_INVERSE_TOL.min(tol);
    let start = invert_f(spec, 0.0, inv_tol).ok();
    let end = invert_f(spec, spec.t_f(), inv_tol).ok();

    let initial_time_ok = start.is_some_and(|s| s.abs() <= tol * scale);
    let faster_ok = end.is_some_and(|e| e < spec.t_f() - tol * scale);
    let initial_rate_ok = start.is_some_and(|s| (spec.f_prime(s) - 1.0).abs() <= tol);
    let final_rate_ok = end.is_some_and(|e| (spec.f_prime(e) - 1.0).abs() <= tol);
    Ok(StaValidationReport {
        initial_time_ok,
        faster_ok,
        initial_rate_ok,
        final_rate_ok,
        tolerance: tol,
    })
}
