//! Oracle agreement checks behind the `verify` and `quad-selftest`
//! commands.

use crate::assembly::{assemble_g, assemble_rhs, solve_system, Assembler, ExcitationSpec, Polarization};
use crate::error::{Error, Result};
use crate::filon::{inverse_sqrt_plan, oscillatory_integral};
use crate::geometry::{build_mesh, ParametricCurve};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::oracle::{self, CircleOperator};
use crate::quadrature::{adaptive_oracle, adaptive_oracle_complex, gauss_legendre, legendre_polynomials, log_singular_panel_rule};
use crate::special;
use crate::spectral::{build_lb_basis, calderon_product, circle_angular_index, order_by_lb_modes};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Self::Quick),
            "full" => Ok(Self::Full),
            other => Err(Error::invalid(format!("unknown verify level '{other}'"))),
        }
    }
}

/// One row of the agreement table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub oracle: String,
    pub implementation: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

struct Check {
    name: &'static str,
    oracle: &'static str,
    implementation: &'static str,
    tolerance: f64,
}

impl Check {
    fn run(self, f: impl FnOnce() -> Result<f64>) -> CheckResult {
        let (max_error, failure) = match f() {
            Ok(e) if e.is_finite() => (e, None),
            Ok(e) => (e, Some("non-finite error".to_string())),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        CheckResult {
            name: self.name.into(),
            oracle: self.oracle.into(),
            implementation: self.implementation.into(),
            passed: failure.is_none() && max_error <= self.tolerance,
            max_error,
            tolerance: self.tolerance,
            failure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub level: Level,
    /// Evaluate the Mehler–Sonine kernel with the tail sign reversed; the
    /// consistency check must then fail.
    pub flip_ms_sign: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            level: Level::Quick,
            flip_ms_sign: false,
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:<34}  {:<30}  {:>10}  {:>8}  status",
        "check", "oracle", "implementation", "max error", "tol"
    );
    for r in results {
        let _ = write!(
            out,
            "{:<width$}  {:<34}  {:<30}  {:>10.2e}  {:>8.0e}  {}",
            r.name,
            r.oracle,
            r.implementation,
            r.max_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if let Some(f) = &r.failure {
            let _ = write!(out, " ({f})");
        }
        out.push('\n');
    }
    out
}

pub fn table_json(results: &[CheckResult]) -> Result<String> {
    serde_json::to_string_pretty(results).map_err(|e| Error::Numeric(format!("json: {e}")))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Relative error in `∫_2^40 e^{ikt}/√(t²−1) dt` for each `k`.
pub fn filon_vs_adaptive(ks: &[f64]) -> Result<f64> {
    let plan = inverse_sqrt_plan(2.0, 40.0)?;
    let mut worst: f64 = 0.0;
    for &k in ks {
        let (fast, _) = plan.integrate_complex(k)?;
        let re = oscillatory_integral(&plan, k)?.value;
        let reference = adaptive_oracle_complex(
            |t| Complex64::from_polar(1.0 / (t * t - 1.0).sqrt(), k * t),
            2.0,
            40.0,
            1e-13,
        )?;
        worst = worst.max(rel(fast, reference)).max((re - reference.re).abs() / reference.norm());
    }
    Ok(worst)
}

/// Max error of `∫_{−1}^{1} P_n(t) e^{ikt} dt = 2 iⁿ j_n(k)` over
/// `n ≤ 10` and the given `k`.
pub fn legendre_exponential_identity(ks: &[f64]) -> Result<f64> {
    let rule = gauss_legendre(80);
    let mut worst: f64 = 0.0;
    for &k in ks {
        let half = special::bessel_j_half_sequence(10, k);
        let mut direct = [Complex64::new(0.0, 0.0); 11];
        for (t, w) in rule.mapped(-1.0, 1.0) {
            let p = legendre_polynomials(10, t);
            let e = Complex64::from_polar(w, k * t);
            for n in 0..=10 {
                direct[n] += e * p[n];
            }
        }
        for n in 0..=10 {
            let identity = Complex64::new(0.0, 1.0).powu(n as u32) * (2.0 * PI / k).sqrt() * half[n];
            worst = worst.max((direct[n] - identity).norm());
        }
    }
    Ok(worst)
}

fn circle_mesh(a: f64, n: usize) -> Result<crate::geometry::CurveMesh> {
    build_mesh(&ParametricCurve::circle(a)?, n)
}

/// Relative mode-response errors of `S` on a circle against analytic
/// symbols for angular indices up to `m_max`.
fn circle_s_check(a: f64, n: usize, spec: KernelSpec, m_max: usize) -> Result<f64> {
    let mesh = circle_mesh(a, n)?;
    let s = Assembler::new(&mesh, spec)?.single_layer();
    let rep = order_by_lb_modes(&s, &build_lb_basis(&mesh)?, &assemble_g(&mesh))?;
    let mut worst: f64 = 0.0;
    for row in rep.rows.iter().take(2 * m_max + 1) {
        let m = circle_angular_index(row.n) as u32;
        let exact = match spec.family() {
            KernelFamily::StaticUnfiltered => oracle::circle_symbol_s_static(a, m).abs(),
            KernelFamily::DynamicUnfiltered => oracle::circle_symbol_dynamic(a, m, spec.k(), CircleOperator::S)?.norm(),
            _ => oracle::circle_symbol_filtered(a, m, &spec)?.norm(),
        };
        worst = worst.max((row.sigma - exact).abs() / exact);
    }
    Ok(worst)
}

/// Relative L² error of the TM surface current against the series oracle.
pub fn tm_current_error(ka: f64, n: usize) -> Result<f64> {
    let a = 1.0;
    let k = ka / a;
    let mesh = circle_mesh(a, n)?;
    let s = Assembler::new(&mesh, KernelSpec::dynamic(k)?)?.single_layer();
    let exc = ExcitationSpec::from_angle(Polarization::Tm, 0.0, k, 1.0)?;
    let sol = solve_system(&s, &assemble_rhs(&mesh, &exc))?;
    let mie = oracle::mie_series_current_tm(a, k, 1.0, 0.0)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, p) in mesh.nodes().iter().enumerate() {
        let exact = mie.current(p[1].atan2(p[0]));
        num += (sol.x[i] - exact).norm_sqr();
        den += exact.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Mode responses of `G⁻¹SG⁻¹N` against `|S_m N_m|`.
fn calderon_check(a: f64, k: f64, n: usize, m_max: usize) -> Result<f64> {
    let mesh = circle_mesh(a, n)?;
    let g = assemble_g(&mesh);
    let pair = Assembler::new(&mesh, KernelSpec::dynamic(k)?)?.both();
    let p = calderon_product(&pair.s, &pair.n, &g)?;
    let rep = order_by_lb_modes(&p, &build_lb_basis(&mesh)?, &g)?;
    let mut worst: f64 = 0.0;
    for row in rep.rows.iter().take(2 * m_max + 1) {
        let m = circle_angular_index(row.n) as u32;
        let exact = (oracle::circle_symbol_dynamic(a, m, k, CircleOperator::S)?
            * oracle::circle_symbol_dynamic(a, m, k, CircleOperator::N)?)
        .norm();
        worst = worst.max((row.sigma - exact).abs() / exact);
    }
    Ok(worst)
}

/// Random `(r, k, α)` with `k ∈ [0.1, 10]`, `α/k ∈ (1, 50]`, `rα ∈ (0, 100]`.
pub fn random_kernel_triples(count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k: f64 = rng.gen_range(0.1..=10.0);
            let ratio: f64 = rng.gen_range(1.05..=50.0);
            let alpha = ratio * k;
            let r = rng.gen_range(1e-3..=100.0) / alpha;
            (r, k, alpha)
        })
        .collect()
}

fn kernel_check(family: KernelFamily, triples: &[(f64, f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(r, k, alpha) in triples {
        let spec = if family.is_static() {
            KernelSpec::new(family, 0.0, Some(alpha))?
        } else {
            KernelSpec::new(family, k, Some(alpha))?
        };
        worst = worst.max((spec.evaluate(r)? - oracle::kernel(&spec, r)?).norm());
    }
    Ok(worst)
}

/// `g^α − g` of the Mehler–Sonine kernel at `kr = 1`, `α = 10³k`, against
/// the independently integrated tail.
fn ms_consistency(flip: bool) -> Result<f64> {
    let mut spec = KernelSpec::ms_filtered(1.0, 1000.0)?;
    if flip {
        spec = spec.with_flipped_ms_sign();
    }
    let diff = spec.evaluate(1.0)? - spec.unfiltered().evaluate(1.0)?;
    let tail = oracle::filtered_tail(&spec, 1.0)?;
    Ok((diff - Complex64::from(tail)).norm())
}

fn special_function_check() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in [0.1, 1.0, 5.0, 12.0, 24.9, 25.1, 40.0] {
        let fast = special::bessel_jy01(x);
        let y = oracle::bessel_y_values(1, x)?;
        let exact = [oracle::bessel_j(0, x), oracle::bessel_j(1, x), y[0], y[1]];
        for (f, e) in fast.iter().zip(exact) {
            worst = worst.max((f - e).abs() / e.abs().max(1.0));
        }
    }
    for x in [0.5, 3.0, 15.0] {
        let fast = special::hankel2_sequence(10, x);
        let exact = oracle::hankel2_values(10, x)?;
        for (f, e) in fast.iter().zip(exact) {
            worst = worst.max(rel(*f, e));
        }
    }
    Ok(worst)
}

pub fn run_verify(opts: VerifyOptions) -> Vec<CheckResult> {
    let full = opts.level == Level::Full;
    let triples = random_kernel_triples(if full { 20 } else { 6 }, 0x5eed);
    let n_circle = if full { 256 } else { 128 };
    let mut out = vec![
        Check {
            name: "bessel-functions",
            oracle: "integral representations",
            implementation: "series/asymptotic",
            tolerance: 1e-11,
        }
        .run(special_function_check),
        Check {
            name: "ms-consistency",
            oracle: "cosh-substituted tail integral",
            implementation: "ms-filtered kernel",
            tolerance: 1e-9,
        }
        .run(|| ms_consistency(opts.flip_ms_sign)),
    ];
    for (name, family) in [
        ("kernel-static-filtered", KernelFamily::StaticFiltered),
        ("kernel-fourier-filtered", KernelFamily::DynamicFourierFiltered),
        ("kernel-ms-filtered", KernelFamily::DynamicMsFiltered),
    ] {
        out.push(
            Check {
                name,
                oracle: "adaptive spectral integral",
                implementation: "closed form + tails",
                tolerance: 1e-8,
            }
            .run(|| {
                let triples: Vec<_> = triples.clone();
                if family == KernelFamily::DynamicMsFiltered && opts.flip_ms_sign {
                    let mut worst: f64 = 0.0;
                    for &(r, k, alpha) in &triples {
                        let spec = KernelSpec::ms_filtered(k, alpha)?.with_flipped_ms_sign();
                        worst = worst.max((spec.evaluate(r)? - oracle::kernel(&spec, r)?).norm());
                    }
                    return Ok(worst);
                }
                kernel_check(family, &triples)
            }),
        );
    }
    out.push(
        Check {
            name: "filon-inverse-sqrt",
            oracle: "adaptive Gauss-Kronrod",
            implementation: "Filon-Legendre",
            tolerance: 1e-9,
        }
        .run(|| filon_vs_adaptive(&[0.1, 1.0, 10.0, 100.0])),
    );
    out.push(
        Check {
            name: "legendre-exp-identity",
            oracle: "Gauss-Legendre (80 points)",
            implementation: "half-integer Bessel",
            tolerance: 1e-11,
        }
        .run(|| legendre_exponential_identity(&[0.5, 2.0, 20.0])),
    );
    out.push(
        Check {
            name: "circle-static-S",
            oracle: "analytic log-kernel symbols",
            implementation: "Galerkin S mode response",
            tolerance: 1e-2,
        }
        .run(|| circle_s_check(0.8, n_circle, KernelSpec::static_unfiltered(), 10)),
    );
    out.push(
        Check {
            name: "circle-dynamic-S",
            oracle: "Bessel-product symbols",
            implementation: "Galerkin S mode response",
            tolerance: 1e-2,
        }
        .run(|| circle_s_check(1.0, n_circle, KernelSpec::dynamic(2.0)?, 10)),
    );
    out.push(
        Check {
            name: "circle-filtered-S",
            oracle: "Fourier coefficients by quadrature",
            implementation: "Galerkin S^a mode response",
            tolerance: 1e-2,
        }
        .run(|| circle_s_check(1.0, n_circle, KernelSpec::fourier_filtered(2.0, 6.0)?, if full { 8 } else { 3 })),
    );
    out.push(
        Check {
            name: "calderon-circle",
            oracle: "product of circle symbols",
            implementation: "G^-1 S G^-1 N mode response",
            tolerance: 2e-2,
        }
        .run(|| calderon_check(1.0, 2.0, n_circle, 10)),
    );
    out.push(
        Check {
            name: "tm-current",
            oracle: "cylindrical-harmonics series",
            implementation: "LU solve of S j = E_z/(i eta k)",
            tolerance: 2e-2,
        }
        .run(|| tm_current_error(1.0, n_circle)),
    );
    out.push(
        Check {
            name: "optical-theorem",
            oracle: "energy balance",
            implementation: "series coefficients",
            tolerance: 1e-8,
        }
        .run(|| Ok(oracle::mie_series_current_tm(1.0, 5.0, 1.0, 0.0)?.optical_theorem_residual())),
    );
    out
}

/// Quadrature-engine self test.
pub fn quad_selftest() -> Vec<CheckResult> {
    vec![
        Check {
            name: "gauss-legendre-exactness",
            oracle: "monomial moments",
            implementation: "Golub-Welsch rules",
            tolerance: 1e-14,
        }
        .run(|| {
            let mut worst: f64 = 0.0;
            for n in [1usize, 2, 5, 10, 20, 40] {
                let rule = gauss_legendre(n);
                for d in 0..2 * n {
                    let got = rule.integrate(0.0, 1.0, |x| x.powi(d as i32));
                    worst = worst.max((got - 1.0 / (d as f64 + 1.0)).abs());
                }
            }
            Ok(worst)
        }),
        Check {
            name: "log-singular-rule",
            oracle: "closed forms",
            implementation: "modified-moment rule",
            tolerance: 1e-13,
        }
        .run(|| {
            let rule = log_singular_panel_rule(10)?;
            let a = rule.integrate(|_| 0.0, |x| x);
            let b = rule.integrate(|_| 0.0, |_| 1.0);
            let c = rule.integrate(|x| x * x, |x| x * x);
            Ok((a + 0.25).abs().max((b + 1.0).abs()).max((c - (1.0 / 3.0 - 1.0 / 9.0)).abs()))
        }),
        Check {
            name: "adaptive-closed-forms",
            oracle: "closed forms",
            implementation: "adaptive Gauss-Kronrod",
            tolerance: 1e-13,
        }
        .run(|| {
            let a = adaptive_oracle(f64::sin, 0.0, PI, 1e-14)?;
            let b = adaptive_oracle(|u| u.cosh() / u.cosh(), 0.0, 2f64.acosh(), 1e-14)?;
            Ok((a - 2.0).abs().max((b - 2f64.acosh()).abs()))
        }),
        Check {
            name: "filon-inverse-sqrt",
            oracle: "adaptive Gauss-Kronrod",
            implementation: "Filon-Legendre",
            tolerance: 1e-9,
        }
        .run(|| filon_vs_adaptive(&[0.1, 1.0, 10.0, 100.0])),
        Check {
            name: "legendre-exp-identity",
            oracle: "Gauss-Legendre (80 points)",
            implementation: "half-integer Bessel",
            tolerance: 1e-11,
        }
        .run(|| legendre_exponential_identity(&[0.5, 2.0, 20.0])),
    ]
}
