//! Filon–Legendre quadrature for `∫ e^{ikt} f(t) dt`.
//!
//! The smooth factor `f` is expanded in Legendre polynomials on the
//! interval and each term is integrated against the exponential in closed
//! form, `∫_{−1}^{1} P_n(x) e^{iκx} dx = 2 iⁿ j_n(κ)`, so the cost of a
//! plan is independent of the frequency.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, legendre_polynomials};
use crate::special::spherical_j_sequence;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

const COEFF_REL_TOL: f64 = 1e-14;
const MAX_TERMS: usize = 200;
const SINGULAR_PANEL_TERMS: usize = 128;
/// Upper bound on `k'` for the singular panel next to `t = 1`.
const SINGULAR_PANEL_MAX_KAPPA: f64 = 50.0;

/// Legendre expansion of a smooth factor on `(c1, c2)`.
#[derive(Debug, Clone)]
pub struct FilonPlan {
    c1: f64,
    c2: f64,
    coeffs: Vec<f64>,
    endpoint_transform: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryIntegralResult {
    pub value: f64,
    pub error: f64,
    pub terms: usize,
}

fn check_interval(c1: f64, c2: f64) -> Result<()> {
    if !(c1.is_finite() && c2.is_finite()) || c2 <= c1 {
        return Err(Error::invalid(format!("invalid interval ({c1}, {c2})")));
    }
    Ok(())
}

/// `a_0, …, a_{m−1}` of `f∘g` with `g(x) = (x+1)(c2−c1)/2 + c1`.
pub fn legendre_coefficients<F: Fn(f64) -> f64>(f: F, c1: f64, c2: f64, m: usize) -> Result<Vec<f64>> {
    check_interval(c1, c2)?;
    if m == 0 {
        return Err(Error::invalid("coefficient count must be positive"));
    }
    let rule = gauss_legendre(2 * m + 8);
    let half = 0.5 * (c2 - c1);
    let mut coeffs = vec![0.0; m];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = f((x + 1.0) * half + c1);
        if !fx.is_finite() {
            return Err(Error::NumericDomain(format!("integrand not finite at t = {}", (x + 1.0) * half + c1)));
        }
        for (c, p) in coeffs.iter_mut().zip(legendre_polynomials(m - 1, x)) {
            *c += w * fx * p;
        }
    }
    for (n, c) in coeffs.iter_mut().enumerate() {
        *c *= (2 * n + 1) as f64 / 2.0;
    }
    Ok(coeffs)
}

/// Index after which two consecutive coefficients are negligible.
fn converged_length(coeffs: &[f64]) -> Option<usize> {
    let (peak_at, peak) = coeffs
        .iter()
        .map(|c| c.abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
    if peak == 0.0 {
        return Some(1);
    }
    let tol = COEFF_REL_TOL * peak;
    (peak_at + 1..coeffs.len().saturating_sub(1))
        .find(|&n| coeffs[n].abs() <= tol && coeffs[n + 1].abs() <= tol)
}

impl FilonPlan {
    /// Expansion truncated adaptively once two consecutive coefficients
    /// drop below `1e-14` of the largest; at most 200 terms.
    pub fn new<F: Fn(f64) -> f64>(f: F, c1: f64, c2: f64) -> Result<Self> {
        let mut m = 16;
        loop {
            let coeffs = legendre_coefficients(&f, c1, c2, m)?;
            if let Some(len) = converged_length(&coeffs) {
                return Ok(Self::from_coefficients(c1, c2, coeffs[..len].to_vec(), false));
            }
            if m == MAX_TERMS {
                let peak = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                return Err(Error::AccuracyFailure {
                    estimate: coeffs[m - 1].abs() / peak,
                    error: COEFF_REL_TOL,
                });
            }
            m = (2 * m).min(MAX_TERMS);
        }
    }

    pub fn with_terms<F: Fn(f64) -> f64>(f: F, c1: f64, c2: f64, m: usize) -> Result<Self> {
        Ok(Self::from_coefficients(c1, c2, legendre_coefficients(f, c1, c2, m)?, false))
    }

    pub fn from_coefficients(c1: f64, c2: f64, coeffs: Vec<f64>, endpoint_transform: bool) -> Self {
        Self {
            c1,
            c2,
            coeffs,
            endpoint_transform,
        }
    }

    /// Shared plan for the function identified by `tag`; the cache key is
    /// `(tag, c1, c2)` with the endpoints rounded to `1e-12`.
    pub fn cached<F: Fn(f64) -> f64>(tag: u64, f: F, c1: f64, c2: f64) -> Result<Arc<Self>> {
        cached_plan(tag, c1, c2, || Self::new(f, c1, c2))
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Whether the plan expands the antiderivative factor of the
    /// integration-by-parts form next to `t = 1`.
    pub fn endpoint_transform(&self) -> bool {
        self.endpoint_transform
    }

    /// Value of the truncated expansion at `t ∈ [c1, c2]`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        let x = 2.0 * (t - self.c1) / (self.c2 - self.c1) - 1.0;
        let p = legendre_polynomials(self.coeffs.len() - 1, x);
        self.coeffs.iter().zip(p).map(|(a, p)| a * p).sum()
    }

    /// `∫_{c1}^{c2} e^{ikt} f(t) dt` with an error estimate.
    pub fn integrate_complex(&self, k: f64) -> Result<(Complex64, f64)> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::invalid(format!("wavenumber must be finite and non-negative, got {k}")));
        }
        let half = 0.5 * (self.c2 - self.c1);
        let kappa = k * half;
        let m = self.coeffs.len();
        let j = spherical_j_sequence(m - 1, kappa);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut magnitude = 0.0;
        let mut i_pow = Complex64::new(1.0, 0.0);
        for (a, jn) in self.coeffs.iter().zip(&j) {
            let term = i_pow * (2.0 * a * jn);
            magnitude += term.norm();
            sum += term;
            i_pow *= Complex64::i();
        }
        let phase = Complex64::from_polar(half, k * (self.c1 + half));
        let peak = self.coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let tail = self.coeffs[m.saturating_sub(2)..].iter().map(|c| c.abs()).sum::<f64>() + COEFF_REL_TOL * peak;
        let error = half * (4.0 * tail + 64.0 * f64::EPSILON * magnitude);
        Ok((phase * sum, error))
    }
}

type PlanKey = (u64, i128, i128);

static PLAN_CACHE: OnceLock<RwLock<HashMap<PlanKey, Arc<FilonPlan>>>> = OnceLock::new();

fn cached_plan<B>(tag: u64, c1: f64, c2: f64, build: B) -> Result<Arc<FilonPlan>>
where
    B: FnOnce() -> Result<FilonPlan>,
{
    let key = (tag, (c1 * 1e12).round() as i128, (c2 * 1e12).round() as i128);
    let cache = PLAN_CACHE.get_or_init(Default::default);
    if let Some(plan) = cache.read().unwrap().get(&key) {
        return Ok(Arc::clone(plan));
    }
    let plan = Arc::new(build()?);
    cache.write().unwrap().insert(key, Arc::clone(&plan));
    Ok(plan)
}

/// `Re ∫_{c1}^{c2} e^{ikt} f(t) dt` for the function expanded by `plan`.
pub fn oscillatory_integral(plan: &FilonPlan, k: f64) -> Result<OscillatoryIntegralResult> {
    let (value, error) = plan.integrate_complex(k)?;
    Ok(OscillatoryIntegralResult {
        value: value.re,
        error,
        terms: plan.terms(),
    })
}

const TAG_INVERSE_SQRT: u64 = 1;
const TAG_ARCCOSH: u64 = 2;
const TAG_ARCCOSH_SINGULAR: u64 = 3;

fn inverse_sqrt(t: f64) -> f64 {
    1.0 / ((t - 1.0) * (t + 1.0)).sqrt()
}

/// Cached plan of `1/√(t²−1)` on `(c1, c2)`, `c1 > 1`.
pub fn inverse_sqrt_plan(c1: f64, c2: f64) -> Result<Arc<FilonPlan>> {
    if c1 <= 1.0 {
        return Err(Error::invalid("1/sqrt(t^2-1) plan needs c1 > 1"));
    }
    FilonPlan::cached(TAG_INVERSE_SQRT, inverse_sqrt, c1, c2)
}

/// Coefficients of `arccosh` on `(1, 1+d)` from the substitution
/// `x = 2s² − 1`, which makes the square-root endpoint behaviour smooth.
fn arccosh_singular_plan(d: f64) -> Result<Arc<FilonPlan>> {
    cached_plan(TAG_ARCCOSH_SINGULAR, 1.0, 1.0 + d, || {
        let m = SINGULAR_PANEL_TERMS;
        let rule = gauss_legendre(2 * m + 40);
        let mut coeffs = vec![0.0; m];
        for (s, w) in rule.mapped(0.0, 1.0) {
            let x = 2.0 * s * s - 1.0;
            let fx = 4.0 * s * (d * s * s).ln_1p_acosh();
            for (c, p) in coeffs.iter_mut().zip(legendre_polynomials(m - 1, x)) {
                *c += w * fx * p;
            }
        }
        for (n, c) in coeffs.iter_mut().enumerate() {
            *c *= (2 * n + 1) as f64 / 2.0;
        }
        Ok(FilonPlan::from_coefficients(1.0, 1.0 + d, coeffs, true))
    })
}

trait Acosh1p {
    /// `arccosh(1 + self)` without cancellation for small arguments.
    fn ln_1p_acosh(self) -> f64;
}

impl Acosh1p for f64 {
    fn ln_1p_acosh(self) -> f64 {
        (self + (self * (self + 2.0)).sqrt()).ln_1p()
    }
}

/// `Im ∫_{1}^{b} e^{ikt} arccosh(t) dt`, `1 < b ≤ 2`.
fn sin_arccosh_from_one(b: f64, k: f64) -> Result<f64> {
    let d = b - 1.0;
    let mut j = 0;
    while k * d * 0.5f64.powi(j) / 2.0 > SINGULAR_PANEL_MAX_KAPPA && j < 60 {
        j += 1;
    }
    let delta = d * 0.5f64.powi(j);
    let mut total = arccosh_singular_plan(delta)?.integrate_complex(k)?.0.im;
    let mut lo = 1.0 + delta;
    for i in 0..j {
        let hi = if i + 1 == j { b } else { 1.0 + delta * 2f64.powi(i + 1) };
        total += arccosh_panel(lo, hi, k)?;
        lo = hi;
    }
    Ok(total)
}

fn arccosh_panel(lo: f64, hi: f64, k: f64) -> Result<f64> {
    let plan = FilonPlan::cached(TAG_ARCCOSH, |t| (t - 1.0).ln_1p_acosh(), lo, hi)?;
    Ok(plan.integrate_complex(k)?.0.im)
}

/// `Im ∫_{c1}^{c2} e^{ikt} arccosh(t) dt` on panels graded towards `t = 1`.
fn sin_arccosh(c1: f64, c2: f64, k: f64) -> Result<f64> {
    if c1 - 1.0 < 0.25 * (c2 - c1) {
        let upper = sin_arccosh_from_one(c2, k)?;
        let lower = if c1 > 1.0 { sin_arccosh_from_one(c1, k)? } else { 0.0 };
        return Ok(upper - lower);
    }
    let mut total = 0.0;
    let mut lo = c1;
    while lo < c2 {
        let hi = (1.0 + 2.0 * (lo - 1.0)).min(c2);
        total += arccosh_panel(lo, hi, k)?;
        lo = hi;
    }
    Ok(total)
}

/// `∫_{c1}^{c2} cos(kt)/√(t²−1) dt` for `1 ≤ c1 < c2 ≤ 2`, via
/// `[cos(kt) arccosh t] + k ∫ sin(kt) arccosh(t) dt`.
pub fn endpoint_singular_integral(c1: f64, c2: f64, k: f64) -> Result<f64> {
    if !(c1 >= 1.0) {
        return Err(Error::invalid(format!("endpoint integral needs c1 >= 1, got {c1}")));
    }
    check_interval(c1, c2)?;
    if c2 > 2.0 + 1e-12 {
        return Err(Error::invalid(format!("endpoint integral needs c2 <= 2, got {c2}")));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(Error::invalid(format!("wavenumber must be finite and non-negative, got {k}")));
    }
    let l1 = (c1 - 1.0).ln_1p_acosh();
    let l2 = (c2 - 1.0).ln_1p_acosh();
    if k == 0.0 {
        return Ok(l2 - l1);
    }
    let boundary = (k * c2).cos() * l2 - (k * c1).cos() * l1;
    Ok(boundary + k * sin_arccosh(c1, c2, k)?)
}

/// `∫_1^{α/k} cos(k r t)/√(t²−1) dt`.
pub fn mehler_sonine_tail(r: f64, k: f64, alpha: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    if !(alpha > k) || !alpha.is_finite() {
        return Err(Error::invalid(format!("cutoff alpha = {alpha} must exceed k = {k}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("distance must be non-negative, got {r}")));
    }
    let top = alpha / k;
    if r == 0.0 {
        return Ok(top.acosh());
    }
    let w = k * r;
    let split = top.min(2.0);
    let mut total = endpoint_singular_integral(1.0, split, w)?;
    let mut lo = 2.0;
    while lo < top {
        let hi = (2.0 * lo).min(top);
        total += oscillatory_integral(&*inverse_sqrt_plan(lo, hi)?, w)?.value;
        lo = hi;
    }
    Ok(total)
}
