//! Slow reference implementations used to validate the fast code paths.
//!
//! Bessel functions come from integral representations and power series,
//! and the filtered kernels are evaluated from their spectral integrals
//! with the adaptive Gauss–Kronrod oracle, without calling into `special`,
//! `filon` or the kernel evaluators. The circle diagonalization in
//! [`circle_symbol_filtered`] checks the Galerkin discretization rather
//! than the kernel, so it integrates the library kernel.

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature::{adaptive_oracle, adaptive_oracle_complex};
use num_complex::Complex64;
use std::f64::consts::PI;

const GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_m(x)`, from the trapezoidal rule on `(1/2π)∫_0^{2π} cos(mτ − x sin τ) dτ`
/// when `m ≤ x`, and from the power series otherwise.
pub fn bessel_j(m: i32, x: f64) -> f64 {
    if m < 0 {
        let v = bessel_j(-m, x);
        return if m % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(m, -x);
        return if m % 2 == 0 { v } else { -v };
    }
    let mf = m as f64;
    if mf > x {
        return bessel_j_series(m, x);
    }
    let points = 2 * (mf + x + 40.0).ceil() as usize;
    let h = 2.0 * PI / points as f64;
    let sum: f64 = (0..points)
        .map(|i| {
            let tau = i as f64 * h;
            (mf * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / points as f64
}

fn bessel_j_series(m: i32, x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    for i in 1..=m {
        term *= x / (2.0 * i as f64);
    }
    let mut sum = term;
    for j in 1..500 {
        term *= q / (j as f64 * (j + m) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Schläfli's integral for `Y_n(x)`, `n ∈ {0, 1}`, `x > 0`.
fn schlafli_y(n: i32, x: f64) -> Result<f64> {
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let first = adaptive_oracle(|t| (x * t.sin() - nf * t).sin(), 0.0, PI, 5e-14)?;
    // e^{nt − x sinh t} is below 1e-40 once x sinh t − nt > 92
    let mut upper = 1.0;
    while x * f64::sinh(upper) - nf * upper < 92.0 {
        upper *= 1.5;
    }
    let second = adaptive_oracle(
        |t| ((nf * t).exp() + sign * (-nf * t).exp()) * (-x * t.sinh()).exp(),
        0.0,
        upper,
        5e-14,
    )?;
    Ok((first - second) / PI)
}

/// `Y_0 … Y_nmax` at `x > 0` by forward recurrence from Schläfli integrals.
pub fn bessel_y_values(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::NumericDomain(format!("Y_n needs x > 0, got {x}")));
    }
    let mut out = vec![schlafli_y(0, x)?];
    if nmax >= 1 {
        out.push(schlafli_y(1, x)?);
    }
    for n in 1..nmax {
        let next = 2.0 * n as f64 / x * out[n] - out[n - 1];
        out.push(next);
    }
    Ok(out)
}

/// `H_m⁽²⁾(x)` for `m = 0 … nmax`.
pub fn hankel2_values(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let y = bessel_y_values(nmax, x)?;
    Ok((0..=nmax)
        .map(|m| Complex64::new(bessel_j(m as i32, x), -y[m]))
        .collect())
}

/// Unfiltered Helmholtz kernel `−(i/4)H_0⁽²⁾(kr)`.
pub fn g_dynamic(r: f64, k: f64) -> Result<Complex64> {
    let x = k * r;
    let y0 = bessel_y_values(0, x)?[0];
    Ok(Complex64::new(-y0 / 4.0, -bessel_j(0, x) / 4.0))
}

/// Static filtered kernel from `(1/2π)[γ + ln(α/2) − ∫_0^{αr}(1 − J_0(u))/u du]`.
pub fn g_static_filtered(r: f64, alpha: f64) -> Result<f64> {
    let x = alpha * r;
    let integral = if x == 0.0 {
        0.0
    } else {
        adaptive_oracle(|u| if u == 0.0 { 0.0 } else { (1.0 - bessel_j(0, u)) / u }, 0.0, x, 1e-14)?
    };
    Ok((GAMMA + (alpha / 2.0).ln() - integral) / (2.0 * PI))
}

/// Fourier-filtered kernel `−(i/4)J_0(kr) + (1/2π) PV∫_0^α J_0(sr) s/(s² − k²) ds`.
pub fn g_fourier_filtered(r: f64, k: f64, alpha: f64) -> Result<Complex64> {
    // PV with f(s) = J_0(sr) s/(s + k):  ∫ (f(s) − f(k))/(s − k) + f(k) ln((α − k)/k)
    let f = |s: f64| bessel_j(0, s * r) * s / (s + k);
    let fk = f(k);
    let g = |s: f64| if s == k { 0.0 } else { (f(s) - fk) / (s - k) };
    let tol = 1e-13;
    let mut pv = adaptive_oracle(g, 0.0, k, tol)? + fk * ((alpha - k) / k).ln();
    // split the outer range so oscillations of J_0(sr) are resolved
    let panels = ((alpha - k) * r / 4.0).ceil().max(1.0) as usize;
    let width = (alpha - k) / panels as f64;
    for i in 0..panels {
        let a = k + i as f64 * width;
        let b = if i + 1 == panels { alpha } else { a + width };
        pv += adaptive_oracle(g, a, b, tol)?;
    }
    Ok(Complex64::new(pv / (2.0 * PI), -bessel_j(0, k * r) / 4.0))
}

/// Mehler–Sonine filtered kernel with the tail `∫_1^{α/k} cos(krt)/√(t² − 1) dt`
/// evaluated as `∫_0^{arccosh(α/k)} cos(kr cosh u) du`.
pub fn g_ms_filtered(r: f64, k: f64, alpha: f64) -> Result<Complex64> {
    let upper = (alpha / k).acosh();
    let x = k * r;
    let panels = (x * (alpha / k) / 4.0).ceil().max(1.0) as usize;
    let width = upper / panels as f64;
    let mut tail = 0.0;
    for i in 0..panels {
        let a = i as f64 * width;
        let b = if i + 1 == panels { upper } else { a + width };
        tail += adaptive_oracle(|u| (x * u.cosh()).cos(), a, b, 1e-14)?;
    }
    Ok(Complex64::new(tail / (2.0 * PI), -bessel_j(0, x) / 4.0))
}

/// Reference value of any kernel family.
pub fn kernel(spec: &KernelSpec, r: f64) -> Result<Complex64> {
    let alpha = spec.alpha().unwrap_or(0.0);
    match spec.family() {
        KernelFamily::StaticUnfiltered => {
            if r == 0.0 {
                Err(Error::Singularity(0.0))
            } else {
                Ok(Complex64::from(-r.ln() / (2.0 * PI)))
            }
        }
        KernelFamily::DynamicUnfiltered => {
            if r == 0.0 {
                Err(Error::Singularity(0.0))
            } else {
                g_dynamic(r, spec.k())
            }
        }
        KernelFamily::StaticFiltered => g_static_filtered(r, alpha).map(Complex64::from),
        KernelFamily::DynamicFourierFiltered => g_fourier_filtered(r, spec.k(), alpha),
        KernelFamily::DynamicMsFiltered => g_ms_filtered(r, spec.k(), alpha),
    }
}

/// Difference `g^α − g` of a filtered family, computed from the tail of
/// its spectral integral so that no cancellation occurs.
pub fn filtered_tail(spec: &KernelSpec, r: f64) -> Result<f64> {
    let alpha = spec
        .alpha()
        .ok_or_else(|| Error::invalid("filtered_tail needs a filtered kernel"))?;
    let k = spec.k();
    match spec.family() {
        // g^α − g = −(1/2π) ∫_α^∞ J_0(sr) s/(s² − k²) ds  (k = 0 for the static family)
        KernelFamily::StaticFiltered | KernelFamily::DynamicFourierFiltered => {
            let kr = k * r;
            let f = |u: f64| bessel_j(0, u) * u / (u * u - kr * kr);
            Ok(-oscillatory_tail(f, alpha * r)? / (2.0 * PI))
        }
        // g^α − g = −(1/2π) ∫_{α/k}^∞ cos(krt)/√(t² − 1) dt
        KernelFamily::DynamicMsFiltered => {
            let x = k * r;
            let f = |t: f64| (x * t).cos() / (t * t - 1.0).sqrt();
            Ok(-oscillatory_tail(f, alpha / k)? / (2.0 * PI))
        }
        _ => Err(Error::invalid("filtered_tail needs a filtered kernel")),
    }
}

/// `∫_a^∞ f` for a slowly decaying oscillatory `f`, by summing integrals
/// between sign changes and accelerating the alternating partial sums with
/// repeated averaging.
fn oscillatory_tail<F: Fn(f64) -> f64 + Copy>(f: F, a: f64) -> Result<f64> {
    let step = 1.0;
    let mut edges = vec![a];
    let mut x = a;
    let mut last_sign = f(a + 1e-9).signum();
    // locate sign changes on a fine grid and refine them by bisection
    while edges.len() < 161 {
        let next = x + step / 16.0;
        let s = f(next).signum();
        if s != last_sign && s != 0.0 {
            let (mut lo, mut hi) = (x, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == last_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            edges.push(0.5 * (lo + hi));
            last_sign = s;
        }
        x = next;
    }
    let mut head = 0.0;
    let mut partial = Vec::new();
    let mut acc = 0.0;
    for (i, w) in edges.windows(2).enumerate() {
        let piece = adaptive_oracle(f, w[0], w[1], 1e-16)?;
        if i < 20 {
            head += piece;
        } else {
            acc += piece;
            partial.push(head + acc);
        }
    }
    // repeated averaging of consecutive partial sums
    let mut level = partial;
    for _ in 0..40 {
        if level.len() < 2 {
            break;
        }
        level = level.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    Ok(*level.last().expect("nonempty partial sums"))
}

pub fn circle_symbol_s_static(a: f64, m: u32) -> f64 {
    if m == 0 {
        -a * a.ln()
    } else {
        a / (2.0 * m as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleOperator {
    S,
    N,
}

/// Fourier symbols on the circle of radius `a`:
/// `S_m = −(iπa/2) J_m(ka) H_m⁽²⁾(ka)` and
/// `N_m = (m²/a²) S_m − (k²/2)(S_{m−1} + S_{m+1})`.
pub fn circle_symbol_dynamic(a: f64, m: u32, k: f64, op: CircleOperator) -> Result<Complex64> {
    let x = k * a;
    let h = hankel2_values(m as usize + 1, x)?;
    let s = |n: i64| -> Complex64 {
        let n = n.unsigned_abs() as usize;
        Complex64::new(0.0, -PI * a / 2.0) * bessel_j(n as i32, x) * h[n]
    };
    let m = m as i64;
    Ok(match op {
        CircleOperator::S => s(m),
        CircleOperator::N => {
            let mf = m as f64;
            s(m) * (mf * mf / (a * a)) - (s(m - 1) + s(m + 1)) * (k * k / 2.0)
        }
    })
}

/// `2πa` times the `m`-th Fourier coefficient of `θ ↦ g(2a sin(θ/2))`,
/// by adaptive quadrature in `θ`.
pub fn circle_symbol_filtered(a: f64, m: u32, spec: &KernelSpec) -> Result<Complex64> {
    if !spec.family().is_filtered() {
        return Err(Error::invalid("circle_symbol_filtered needs a filtered kernel"));
    }
    let mf = m as f64;
    let panels = (2 * m as usize).max(8) + (spec.bandwidth() * a).ceil() as usize;
    let width = PI / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..panels {
        let lo = i as f64 * width;
        let hi = if i + 1 == panels { PI } else { lo + width };
        total += adaptive_oracle_complex(
            |t| {
                let g = spec.evaluate(2.0 * a * (t / 2.0).sin()).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                g * (mf * t).cos()
            },
            lo,
            hi,
            1e-11,
        )?;
    }
    Ok(total * (2.0 * a))
}

/// Cylindrical-harmonics series for the TM surface current on a perfectly
/// conducting circular cylinder, solving `S j = E_z/(iηk)` with the field
/// `exp(−ik d̂·r)`.
#[derive(Debug, Clone)]
pub struct MieSeries {
    pub radius: f64,
    pub k: f64,
    pub eta: f64,
    pub incidence: f64,
    /// Coefficients for `m = 0 … m_max`; negative orders follow from
    /// `H_{−m} = (−1)^m H_m`.
    coeffs: Vec<Complex64>,
    scattering: Vec<Complex64>,
}

pub fn mie_series_current_tm(a: f64, k: f64, eta: f64, incidence: f64) -> Result<MieSeries> {
    let x = k * a;
    if !(x > 0.0 && x <= 20.0) {
        return Err(Error::invalid(format!("series oracle needs ka in (0, 20], got {x}")));
    }
    let m_max = (x + 10.0 * x.cbrt() + 10.0).ceil() as usize;
    let h = hankel2_values(m_max, x)?;
    let prefactor = 2.0 / (k * eta * PI * a);
    let coeffs = (0..=m_max)
        .map(|m| Complex64::new(0.0, -1.0).powu(m as u32) * prefactor / h[m])
        .collect();
    let scattering = (0..=m_max).map(|m| -bessel_j(m as i32, x) / h[m]).collect();
    Ok(MieSeries {
        radius: a,
        k,
        eta,
        incidence,
        coeffs,
        scattering,
    })
}

impl MieSeries {
    pub fn m_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `j_z(θ)` at the polar angle `θ`.
    pub fn current(&self, theta: f64) -> Complex64 {
        let phi = theta - self.incidence;
        let mut sum = self.coeffs[0];
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            // (−i)^{−m} e^{−imφ}/H_{−m} = (−i)^m e^{−imφ}/H_m
            sum += *c * (2.0 * (m as f64 * phi).cos());
        }
        sum
    }

    /// `|Σ(|a_m|² + Re a_m)| / Σ|a_m|²` over all orders; zero for a
    /// lossless scatterer.
    pub fn optical_theorem_residual(&self) -> f64 {
        let mut balance = 0.0;
        let mut scale = 0.0;
        for (m, a) in self.scattering.iter().enumerate() {
            let mult = if m == 0 { 1.0 } else { 2.0 };
            balance += mult * (a.norm_sqr() + a.re);
            scale += mult * a.norm_sqr();
        }
        balance.abs() / scale
    }
}
