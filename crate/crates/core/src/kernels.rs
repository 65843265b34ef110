//! Free-space Green's functions of the 2D Helmholtz and Laplace equations
//! and their spectrally filtered versions.
//!
//! Conventions: `g(r) = −(i/4) H₀⁽²⁾(kr)`, `g₀(r) = −ln(r)/(2π)`. The three
//! filtered kernels drop the part of a spectral representation of `g`
//! above the cutoff `α`:
//!
//! * static: `g₀^α = g₀ − (1/2π) ∫_α^∞ J₀(sr)/s ds`
//! * 2D Fourier: `g^α = g − (1/2π) ∫_α^∞ J₀(sr) s/(s²−k²) ds`
//! * Mehler–Sonine: `g^α = −(i/4) J₀(kr) + (1/2π) ∫_1^{α/k} cos(krt)/√(t²−1) dt`
//!
//! All three are even entire functions of `r`.

use crate::error::{Error, Result};
use crate::filon::mehler_sonine_tail;
use crate::quadrature::gauss_legendre;
use crate::special::{
    bessel_j0, bessel_jy01, bessel_y0_regular, hankel_coefficients, one_minus_j0, EULER_GAMMA,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_PI, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

const INV_2PI: f64 = 0.5 * FRAC_1_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    StaticUnfiltered,
    DynamicUnfiltered,
    StaticFiltered,
    DynamicFourierFiltered,
    DynamicMsFiltered,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::StaticUnfiltered,
        KernelFamily::DynamicUnfiltered,
        KernelFamily::StaticFiltered,
        KernelFamily::DynamicFourierFiltered,
        KernelFamily::DynamicMsFiltered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::StaticUnfiltered => "static",
            KernelFamily::DynamicUnfiltered => "dynamic",
            KernelFamily::StaticFiltered => "static-filtered",
            KernelFamily::DynamicFourierFiltered => "fourier-filtered",
            KernelFamily::DynamicMsFiltered => "ms-filtered",
        }
    }

    pub fn is_filtered(self) -> bool {
        matches!(
            self,
            KernelFamily::StaticFiltered | KernelFamily::DynamicFourierFiltered | KernelFamily::DynamicMsFiltered
        )
    }

    pub fn is_static(self) -> bool {
        matches!(self, KernelFamily::StaticUnfiltered | KernelFamily::StaticFiltered)
    }

    /// The family with the same wavenumber convention and no filter.
    pub fn unfiltered(self) -> KernelFamily {
        if self.is_static() {
            KernelFamily::StaticUnfiltered
        } else {
            KernelFamily::DynamicUnfiltered
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" | "static-unfiltered" => Ok(KernelFamily::StaticUnfiltered),
            "dynamic" | "dynamic-unfiltered" => Ok(KernelFamily::DynamicUnfiltered),
            "static-filtered" => Ok(KernelFamily::StaticFiltered),
            "fourier-filtered" | "dynamic-fourier-filtered" => Ok(KernelFamily::DynamicFourierFiltered),
            "ms-filtered" | "dynamic-ms-filtered" | "mehler-sonine-filtered" => Ok(KernelFamily::DynamicMsFiltered),
            other => Err(Error::invalid(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Kernel family with its wavenumber and cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    k: f64,
    alpha: Option<f64>,
    #[serde(skip, default = "unit_sign")]
    ms_sign: f64,
}

fn unit_sign() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(family: KernelFamily, k: f64, alpha: Option<f64>) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::invalid(format!("wavenumber must be finite and non-negative, got {k}")));
        }
        if family.is_static() && k != 0.0 {
            return Err(Error::invalid(format!("{family} kernel requires k = 0")));
        }
        if !family.is_static() && k <= 0.0 {
            return Err(Error::invalid(format!("{family} kernel requires k > 0")));
        }
        let alpha = if family.is_filtered() {
            let a = alpha.ok_or_else(|| Error::invalid(format!("{family} kernel requires a cutoff alpha")))?;
            if !a.is_finite() || a <= k || a <= 0.0 {
                return Err(Error::invalid(format!("cutoff alpha = {a} must exceed k = {k}")));
            }
            Some(a)
        } else {
            None
        };
        Ok(Self {
            family,
            k,
            alpha,
            ms_sign: 1.0,
        })
    }

    pub fn static_unfiltered() -> Self {
        Self::new(KernelFamily::StaticUnfiltered, 0.0, None).expect("valid")
    }

    pub fn dynamic(k: f64) -> Result<Self> {
        Self::new(KernelFamily::DynamicUnfiltered, k, None)
    }

    pub fn static_filtered(alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::StaticFiltered, 0.0, Some(alpha))
    }

    pub fn fourier_filtered(k: f64, alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::DynamicFourierFiltered, k, Some(alpha))
    }

    pub fn ms_filtered(k: f64, alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::DynamicMsFiltered, k, Some(alpha))
    }

    /// Same spec with the Mehler–Sonine tail entering with the opposite
    /// sign. Only used to check that verification detects the mistake.
    #[doc(hidden)]
    pub fn with_flipped_ms_sign(mut self) -> Self {
        self.ms_sign = -self.ms_sign;
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// The unfiltered kernel with the same wavenumber.
    pub fn unfiltered(&self) -> Self {
        Self {
            family: self.family.unfiltered(),
            k: self.k,
            alpha: None,
            ms_sign: 1.0,
        }
    }

    /// Highest spatial frequency present in the kernel.
    pub fn bandwidth(&self) -> f64 {
        self.alpha.unwrap_or(0.0).max(self.k)
    }

    pub fn evaluate(&self, r: f64) -> Result<Complex64> {
        let alpha = self.alpha.unwrap_or(0.0);
        match self.family {
            KernelFamily::StaticUnfiltered => g_static(r).map(Complex64::from),
            KernelFamily::DynamicUnfiltered => g_dynamic(r, self.k),
            KernelFamily::StaticFiltered => g_static_filtered(r, alpha).map(Complex64::from),
            KernelFamily::DynamicFourierFiltered => g_dynamic_fourier_filtered(r, self.k, alpha),
            KernelFamily::DynamicMsFiltered => ms_filtered_signed(r, self.k, alpha, self.ms_sign),
        }
    }

    /// `g(r) = a(r) ln r + b(r)` with `a`, `b` even entire functions.
    pub fn log_split(&self, r: f64) -> Result<LogSplit> {
        check_distance(r)?;
        match self.family {
            KernelFamily::StaticUnfiltered => Ok(LogSplit {
                log_coeff: -INV_2PI,
                regular: Complex64::new(0.0, 0.0),
            }),
            KernelFamily::DynamicUnfiltered => {
                let x = self.k * r;
                let j0 = bessel_j0(x);
                let y0r = bessel_y0_regular(x);
                Ok(LogSplit {
                    log_coeff: -INV_2PI * j0,
                    regular: Complex64::new(-INV_2PI * j0 * (0.5 * self.k).ln() - 0.25 * y0r, -0.25 * j0),
                })
            }
            _ => Ok(LogSplit {
                log_coeff: 0.0,
                regular: self.evaluate(r)?,
            }),
        }
    }
}

/// Kernel value split as `log_coeff · ln r + regular`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSplit {
    pub log_coeff: f64,
    pub regular: Complex64,
}

impl LogSplit {
    pub fn value(&self, r: f64) -> Complex64 {
        if self.log_coeff == 0.0 {
            self.regular
        } else {
            self.regular + self.log_coeff * r.ln()
        }
    }
}

fn check_distance(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("distance must be finite and non-negative, got {r}")));
    }
    Ok(())
}

fn check_positive_distance(r: f64) -> Result<()> {
    check_distance(r)?;
    if r == 0.0 {
        return Err(Error::Singularity(r));
    }
    Ok(())
}

fn check_cutoff(k: f64, alpha: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    if !(alpha > k) || !alpha.is_finite() {
        return Err(Error::invalid(format!("cutoff alpha = {alpha} must exceed k = {k}")));
    }
    Ok(())
}

pub fn g_static(r: f64) -> Result<f64> {
    check_positive_distance(r)?;
    Ok(-INV_2PI * r.ln())
}

pub fn g_dynamic(r: f64, k: f64) -> Result<Complex64> {
    check_positive_distance(r)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    let [j0, _, y0, _] = bessel_jy01(k * r);
    Ok(Complex64::new(-0.25 * y0, -0.25 * j0))
}

/// `C(x) = ∫_0^x (1 − J₀(u))/u du` by its power series.
fn bessel_log_integral_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (−q)^m / (m!)²
    let mut sum = 0.0;
    for m in 1..200 {
        let mf = m as f64;
        term *= -q / (mf * mf);
        let add = -term / (2.0 * mf);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

const SERIES_LIMIT: f64 = 10.0;
const TAIL_ASYMPTOTIC_LIMIT: f64 = 30.0;

fn j0_tail_at_series_limit() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        bessel_log_integral_series(SERIES_LIMIT) - EULER_GAMMA - (0.5 * SERIES_LIMIT).ln()
    })
}

/// `∫_x^∞ J₀(u)/u du` for `x > 0`.
pub fn j0_tail(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        bessel_log_integral_series(x) - EULER_GAMMA - (0.5 * x).ln()
    } else if x < TAIL_ASYMPTOTIC_LIMIT {
        let rule = gauss_legendre(48);
        j0_tail_at_series_limit() - rule.integrate(SERIES_LIMIT, x, |u| bessel_j0(u) / u)
    } else {
        asymptotic_tail(x, Weight::Reciprocal)
    }
}

/// `∫_0^x (1 − J₀(u))/u du`.
pub fn bessel_log_integral(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        bessel_log_integral_series(x)
    } else {
        j0_tail(x) + EULER_GAMMA + (0.5 * x).ln()
    }
}

#[derive(Clone, Copy)]
enum Weight {
    /// `1/u`
    Reciprocal,
    /// `u/(u² − w²)`
    Shifted(f64),
}

const TAYLOR_TERMS: usize = 96;

/// `∫_x^∞ J₀(u) ρ(u) du` by repeated integration by parts of
/// `Re ∫ e^{iu} φ(u) du` with `φ(u) = √(2/π) e^{−iπ/4} S(u) u^{−1/2} ρ(u)`
/// and `S` the Hankel series. The derivatives of `φ` at `x` come from
/// Taylor arithmetic; the sum is cut at its smallest term.
fn asymptotic_tail(x: f64, weight: Weight) -> f64 {
    let n = TAYLOR_TERMS;
    // Hankel series: Σ_k i^k a_k (x+ε)^{−k−1/2}
    let a = hankel_coefficients(0.0, 40);
    let mut amp = vec![Complex64::new(0.0, 0.0); n];
    let mut i_pow = Complex64::new(1.0, 0.0);
    for (kk, &ak) in a.iter().enumerate() {
        let nu = kk as f64 + 0.5;
        let lead = ak * x.powf(-nu);
        if lead.abs() < 1e-18 * x.powf(-0.5) {
            break;
        }
        let mut b = lead;
        for (m, slot) in amp.iter_mut().enumerate() {
            *slot += i_pow * b;
            b *= (-nu - m as f64) / ((m + 1) as f64 * x);
        }
        i_pow *= Complex64::i();
    }
    let rho: Vec<f64> = match weight {
        Weight::Reciprocal => {
            let mut out = Vec::with_capacity(n);
            let mut c = 1.0 / x;
            for _ in 0..n {
                out.push(c);
                c *= -1.0 / x;
            }
            out
        }
        Weight::Shifted(w) => {
            let q0 = (x - w) * (x + w);
            let q1 = 2.0 * x;
            let mut inv = vec![0.0; n];
            inv[0] = 1.0 / q0;
            for m in 1..n {
                let prev2 = if m >= 2 { inv[m - 2] } else { 0.0 };
                inv[m] = -(q1 * inv[m - 1] + prev2) / q0;
            }
            (0..n)
                .map(|m| x * inv[m] + if m >= 1 { inv[m - 1] } else { 0.0 })
                .collect()
        }
    };
    let prefactor = Complex64::from_polar((2.0 / PI).sqrt(), -0.25 * PI);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut factorial = 1.0;
    let mut i_pow = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for m in 0..n {
        let c: Complex64 = (0..=m).map(|j| amp[j] * rho[m - j]).sum();
        let term = i_pow * c * (prefactor * factorial);
        let mag = term.norm();
        if m > 1 && mag > last {
            break;
        }
        sum += term;
        if mag < 1e-17 * sum.norm() {
            break;
        }
        last = mag;
        factorial *= (m + 1) as f64;
        i_pow *= Complex64::i();
    }
    (Complex64::i() * Complex64::from_polar(1.0, x) * sum).re
}

/// `∫_x^∞ J₀(u) u/(u² − w²) du` for `x ≥ w + 36`.
fn shifted_tail(x: f64, w: f64) -> f64 {
    asymptotic_tail(x, Weight::Shifted(w))
}

/// Static filtered kernel, finite at `r = 0`.
pub fn g_static_filtered(r: f64, alpha: f64) -> Result<f64> {
    check_distance(r)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("cutoff must be positive, got {alpha}")));
    }
    let x = alpha * r;
    if x <= SERIES_LIMIT {
        Ok(INV_2PI * (EULER_GAMMA + (0.5 * alpha).ln() - bessel_log_integral_series(x)))
    } else {
        Ok(INV_2PI * (-r.ln() - j0_tail(x)))
    }
}

/// Above this value of `(α − k) r` the Fourier tail is summed asymptotically.
const SHIFTED_ASYMPTOTIC_GAP: f64 = 36.0;

/// 2D Fourier filtered kernel, finite at `r = 0`.
pub fn g_dynamic_fourier_filtered(r: f64, k: f64, alpha: f64) -> Result<Complex64> {
    check_distance(r)?;
    check_cutoff(k, alpha)?;
    let w = k * r;
    if (alpha - k) * r >= SHIFTED_ASYMPTOTIC_GAP {
        let g = g_dynamic(r, k)?;
        return Ok(g - INV_2PI * shifted_tail(alpha * r, w));
    }
    // g^α = −(i/4) J₀ + (1/2π) PV∫_0^α J₀(sr) s/(s² − k²) ds, with the
    // principal value taken in closed form after subtracting J₀ ≡ 1.
    let ratio = k / alpha;
    let mut re = (alpha / k).ln() + 0.5 * (-ratio * ratio).ln_1p() - bessel_log_integral(alpha * r);
    if r > 0.0 {
        re += fourier_pv_remainder(r, k, alpha);
    }
    Ok(Complex64::new(INV_2PI * re, -0.25 * bessel_j0(w)))
}

/// `PV∫_0^α (J₀(sr) − 1) k² / (s (s² − k²)) ds`.
fn fourier_pv_remainder(r: f64, k: f64, alpha: f64) -> f64 {
    let h = |s: f64| -one_minus_j0(s * r) * k * k / (s * (s + k));
    let hk = h(k);
    let rule = gauss_legendre(16);
    let max_width = 3.0 / r;
    let mut breaks = vec![0.0, k];
    let mut edge = k;
    while edge < alpha {
        edge = (2.0 * edge).min(alpha);
        breaks.push(edge);
    }
    let mut total = hk * ((alpha - k) / k).ln();
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let pieces = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let width = (hi - lo) / pieces as f64;
        for p in 0..pieces {
            let a = lo + p as f64 * width;
            let b = if p + 1 == pieces { hi } else { a + width };
            total += rule.integrate(a, b, |s| (h(s) - hk) / (s - k));
        }
    }
    total
}

/// Mehler–Sonine filtered kernel, finite at `r = 0`.
pub fn g_dynamic_ms_filtered(r: f64, k: f64, alpha: f64) -> Result<Complex64> {
    ms_filtered_signed(r, k, alpha, 1.0)
}

fn ms_filtered_signed(r: f64, k: f64, alpha: f64, sign: f64) -> Result<Complex64> {
    check_distance(r)?;
    check_cutoff(k, alpha)?;
    let tail = mehler_sonine_tail(r, k, alpha)?;
    Ok(Complex64::new(sign * INV_2PI * tail, -0.25 * bessel_j0(k * r)))
}

/// Piecewise Chebyshev interpolant of `(a(r), b(r))` from
/// [`KernelSpec::log_split`] on `[0, r_max]`, validated against direct
/// evaluation between the interpolation nodes.
#[derive(Debug, Clone)]
pub struct KernelTable {
    spec: KernelSpec,
    breaks: Vec<f64>,
    log_coeffs: Vec<[f64; TABLE_NODES]>,
    regular_coeffs: Vec<[Complex64; TABLE_NODES]>,
    max_error: f64,
}

const TABLE_NODES: usize = 21;
const TABLE_TOL: f64 = 1e-12;
const TABLE_MAX_DEPTH: u32 = 12;

struct TablePanel {
    log: [f64; TABLE_NODES],
    regular: [Complex64; TABLE_NODES],
    error: f64,
}

fn chebyshev_coefficients<T>(values: &[T; TABLE_NODES]) -> [T; TABLE_NODES]
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = TABLE_NODES;
    let mut out = [T::default(); TABLE_NODES];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = T::default();
        for (i, &v) in values.iter().enumerate() {
            let theta = PI * (i as f64 + 0.5) / n as f64;
            acc = acc + v * (j as f64 * theta).cos();
        }
        let scale = if j == 0 { 1.0 } else { 2.0 } / n as f64;
        *slot = acc * scale;
    }
    out
}

fn clenshaw<T>(coeffs: &[T; TABLE_NODES], x: f64) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut b1 = T::default();
    let mut b2 = T::default();
    for &c in coeffs[1..].iter().rev() {
        let b0 = c + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + b1 * x - b2
}

impl KernelTable {
    pub fn new(spec: KernelSpec, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("table range must be positive, got {r_max}")));
        }
        let omega = spec.bandwidth().max(1.0 / r_max);
        let panels = (r_max * omega / 2.0).ceil().max(1.0) as usize;
        let width = r_max / panels as f64;
        let mut table = KernelTable {
            spec,
            breaks: vec![0.0],
            log_coeffs: Vec::new(),
            regular_coeffs: Vec::new(),
            max_error: 0.0,
        };
        for p in 0..panels {
            let lo = p as f64 * width;
            let hi = if p + 1 == panels { r_max } else { lo + width };
            table.fill(lo, hi, 0)?;
        }
        Ok(table)
    }

    fn build_panel(&self, lo: f64, hi: f64) -> Result<TablePanel> {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut log_vals = [0.0; TABLE_NODES];
        let mut reg_vals = [Complex64::default(); TABLE_NODES];
        for i in 0..TABLE_NODES {
            let x = (PI * (i as f64 + 0.5) / TABLE_NODES as f64).cos();
            let s = self.spec.log_split(mid + half * x)?;
            log_vals[i] = s.log_coeff;
            reg_vals[i] = s.regular;
        }
        let log = chebyshev_coefficients(&log_vals);
        let regular = chebyshev_coefficients(&reg_vals);
        let mut error = 0.0f64;
        for i in 0..TABLE_NODES {
            // midpoints between consecutive nodes, plus the panel ends
            let theta = PI * (i as f64 + 1.0) / TABLE_NODES as f64;
            let x = if i + 1 == TABLE_NODES { 1.0 } else { theta.cos() };
            let s = self.spec.log_split(mid + half * x)?;
            error = error
                .max((clenshaw(&log, x) - s.log_coeff).abs())
                .max((clenshaw(&regular, x) - s.regular).norm());
        }
        Ok(TablePanel { log, regular, error })
    }

    fn fill(&mut self, lo: f64, hi: f64, depth: u32) -> Result<()> {
        let panel = self.build_panel(lo, hi)?;
        if panel.error > TABLE_TOL && depth < TABLE_MAX_DEPTH {
            let mid = 0.5 * (lo + hi);
            self.fill(lo, mid, depth + 1)?;
            return self.fill(mid, hi, depth + 1);
        }
        self.max_error = self.max_error.max(panel.error);
        self.breaks.push(hi);
        self.log_coeffs.push(panel.log);
        self.regular_coeffs.push(panel.regular);
        Ok(())
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn r_max(&self) -> f64 {
        *self.breaks.last().expect("nonempty")
    }

    pub fn panels(&self) -> usize {
        self.log_coeffs.len()
    }

    /// Largest deviation from direct evaluation seen during validation.
    pub fn max_validation_error(&self) -> f64 {
        self.max_error
    }

    /// Interpolated split at `0 ≤ r ≤ r_max`.
    pub fn log_split(&self, r: f64) -> LogSplit {
        let r_max = self.r_max();
        let r = r.clamp(0.0, r_max);
        let p = match self.breaks.binary_search_by(|b| b.total_cmp(&r)) {
            Ok(i) => i.min(self.panels() - 1),
            Err(i) => i - 1,
        };
        let (lo, hi) = (self.breaks[p], self.breaks[p + 1]);
        let x = (2.0 * r - lo - hi) / (hi - lo);
        LogSplit {
            log_coeff: clenshaw(&self.log_coeffs[p], x),
            regular: clenshaw(&self.regular_coeffs[p], x),
        }
    }

    /// Interpolated kernel value; `r > 0` for unfiltered families.
    pub fn evaluate(&self, r: f64) -> Complex64 {
        self.log_split(r).value(r)
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn static_values() {
        assert_eq!(g_static(1.0).unwrap(), 0.0);
        assert!(close(g_static(std::f64::consts::E).unwrap(), -INV_2PI, 1e-16));
        assert!(close(g_static(0.5).unwrap(), 0.110_317_800_076_325_8, 1e-15));
        assert!(matches!(g_static(0.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn dynamic_value_at_unit_argument() {
        let g = g_dynamic(0.5, 2.0).unwrap();
        assert!(close(g.re, -0.25 * 0.088_256_964_215_676_96, 1e-15));
        assert!(close(g.im, -0.25 * 0.765_197_686_557_966_6, 1e-15));
    }

    #[test]
    fn j0_tail_reference() {
        // ∫_x^∞ J₀(u)/u du from a 25-digit quadrature of C(x)
        let cases = [
            (0.5, 0.840_085_682_569_273_07),
            (5.0, 0.046_840_823_211_545_057),
            (10.0, -0.008_787_157_242_297_243_1),
            (20.0, -0.002_490_150_054_768_904_1),
            (29.9, 0.003_443_076_531_300_568_1),
            (30.0, 0.003_750_810_980_046_409_4),
            (50.0, 0.001_991_644_202_624_546_8),
            (200.0, 0.000_270_723_831_779_305_68),
        ];
        for (x, v) in cases {
            assert!(close(j0_tail(x), v, 2e-14), "x={x}: {} vs {v}", j0_tail(x));
        }
    }

    #[test]
    fn shifted_tail_reference() {
        for (x, w, v) in [
            (40.0, 3.0, -0.003_151_540_257_536_618_7),
            (60.0, 20.0, -0.000_936_461_960_634_357_02),
            (37.0, 1.0, 0.003_537_347_099_195_116_2),
        ] {
            assert!(close(shifted_tail(x, w), v, 1e-13), "({x},{w}): {}", shifted_tail(x, w));
        }
    }

    #[test]
    fn filtered_reference_values() {
        for (r, a, v) in [
            (0.3, 2.0, 0.084_784_791_161_606_108),
            (0.01, 10.0, 0.347_817_844_142_065_24),
            (1.0, 30.0, -0.000_596_960_108_077_742_45),
            (0.2, 100.0, 0.256_546_319_053_645_09),
        ] {
            assert!(close(g_static_filtered(r, a).unwrap(), v, 1e-13), "static r={r} a={a}");
        }
        for (r, k, a, re, im) in [
            (0.3, 1.0, 5.0, 0.205_743_896_208_667_08, -0.244_406_561_634_574_02),
            (2.0, 10.0, 30.0, -0.015_511_106_652_316_911, -0.041_756_166_085_145_789),
            (1.7, 10.0, 30.0, 0.023_125_067_330_037_126, 0.042_463_563_037_795_898),
            (0.01, 10.0, 30.0, 0.163_278_918_467_831_55, -0.249_375_390_516_510_01),
            (1.0, 1.0, 4.0, -0.017_957_273_033_368_827, -0.191_299_421_639_491_64),
            (0.05, 2.0, 7.0, 0.189_699_328_135_877, -0.249_375_390_516_510_01),
        ] {
            let g = g_dynamic_fourier_filtered(r, k, a).unwrap();
            assert!(close(g.re, re, 1e-12) && close(g.im, im, 1e-15), "fourier ({r},{k},{a}): {g}");
        }
        for (r, k, a, re, im) in [
            (0.3, 1.0, 5.0, 0.277_269_386_372_630_85, -0.244_406_561_634_574_02),
            (1.5, 10.0, 30.0, -0.048_227_291_191_010_987, 0.003_556_118_206_695_193_3),
            (0.7, 1.0, 30.0, 0.054_177_909_152_228_839, -0.220_300_222_151_851_32),
        ] {
            let g = g_dynamic_ms_filtered(r, k, a).unwrap();
            assert!(close(g.re, re, 1e-12) && close(g.im, im, 1e-15), "ms ({r},{k},{a}): {g}");
        }
    }

    #[test]
    fn filtered_limits_at_origin() {
        let v = g_static_filtered(0.0, 2.0).unwrap();
        assert!(close(v, EULER_GAMMA * INV_2PI, 1e-16));
        let g = g_dynamic_ms_filtered(0.0, 1.0, 2.0).unwrap();
        assert!(close(g.re, 0.209_600_359_139_491_35, 1e-15));
        let g = g_dynamic_fourier_filtered(0.0, 1.0, 4.0).unwrap();
        let expected = INV_2PI * (4f64.ln() + 0.5 * (1.0 - 1.0 / 16.0f64).ln());
        assert!(close(g.re, expected, 1e-15));
        let near = g_dynamic_fourier_filtered(1e-7, 1.0, 4.0).unwrap();
        assert!(close(near.re, g.re, 1e-12));
    }

    #[test]
    fn split_reconstructs_kernel() {
        for family in KernelFamily::ALL {
            let spec = match family {
                KernelFamily::StaticUnfiltered => KernelSpec::static_unfiltered(),
                KernelFamily::DynamicUnfiltered => KernelSpec::dynamic(3.0).unwrap(),
                KernelFamily::StaticFiltered => KernelSpec::static_filtered(5.0).unwrap(),
                KernelFamily::DynamicFourierFiltered => KernelSpec::fourier_filtered(3.0, 9.0).unwrap(),
                KernelFamily::DynamicMsFiltered => KernelSpec::ms_filtered(3.0, 9.0).unwrap(),
            };
            for r in [1e-3, 0.1, 0.7, 2.0, 9.0] {
                let direct = spec.evaluate(r).unwrap();
                let split = spec.log_split(r).unwrap().value(r);
                assert!((direct - split).norm() < 1e-13, "{family} r={r}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(KernelFamily::StaticUnfiltered, 1.0, None).is_err());
        assert!(KernelSpec::dynamic(0.0).is_err());
        assert!(KernelSpec::fourier_filtered(2.0, 2.0).is_err());
        assert!(KernelSpec::new(KernelFamily::DynamicMsFiltered, 1.0, None).is_err());
        assert!(g_dynamic_ms_filtered(1.0, 2.0, 1.0).is_err());
        assert_eq!("ms-filtered".parse::<KernelFamily>().unwrap(), KernelFamily::DynamicMsFiltered);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for spec in [
            KernelSpec::dynamic(10.0).unwrap(),
            KernelSpec::static_filtered(8.0).unwrap(),
            KernelSpec::fourier_filtered(10.0, 30.0).unwrap(),
            KernelSpec::ms_filtered(10.0, 30.0).unwrap(),
        ] {
            let table = KernelTable::new(spec, 2.0).unwrap();
            assert!(table.max_validation_error() <= TABLE_TOL, "{:?}", spec.family());
            for i in 1..40 {
                let r = 2.0 * (i as f64 / 40.0).powi(2) + 1e-4;
                let d = spec.evaluate(r).unwrap();
                assert!((table.evaluate(r) - d).norm() < 1e-11, "{:?} r={r}", spec.family());
            }
        }
    }
}
