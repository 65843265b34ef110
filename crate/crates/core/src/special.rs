//! Bessel functions of integer and half-integer order for real, non-negative
//! arguments.
//!
//! Small and moderate arguments use Miller's backward recurrence normalized by
//! `J_0 + 2 Σ J_2k = 1`, with `Y_0`/`Y_1` from the Neumann series over the same
//! sequence. Large arguments use the Hankel asymptotic expansion. Spherical
//! Bessel functions `j_n` use the power series near zero, upward recurrence for
//! `n < x` and a normalized downward recurrence above.

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, FRAC_PI_4, PI};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument the Hankel expansion is accurate to ~1e-16.
const ASYMPTOTIC_THRESHOLD: f64 = 25.0;

const RESCALE_LIMIT: f64 = 1e250;

/// Coefficient `a_k(ν)` of the Hankel expansion, built iteratively.
pub(crate) fn hankel_coefficients(nu: f64, count: usize) -> Vec<f64> {
    let mu = 4.0 * nu * nu;
    let mut out = Vec::with_capacity(count);
    let mut a = 1.0;
    out.push(a);
    for k in 1..count {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64);
        out.push(a);
    }
    out
}

/// `(P, Q)` of the Hankel expansion so that
/// `J_ν = √(2/πx)(P cos ω − Q sin ω)`, `Y_ν = √(2/πx)(P sin ω + Q cos ω)`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        let mag = term.abs();
        if mag > last || mag < 1e-18 {
            if mag < 1e-18 {
                add_pq_term(k, term, &mut p, &mut q);
            }
            break;
        }
        add_pq_term(k, term, &mut p, &mut q);
        last = mag;
    }
    (p, q)
}

fn add_pq_term(k: usize, term: f64, p: &mut f64, q: &mut f64) {
    // i^k: real for even k, imaginary for odd k.
    match k % 4 {
        0 => *p += term,
        1 => *q += term,
        2 => *p -= term,
        _ => *q -= term,
    }
}

fn asymptotic_jy(nu: f64, x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, x);
    let omega = x - nu * FRAC_PI_2 - FRAC_PI_4;
    let (s, c) = omega.sin_cos();
    let scale = (FRAC_2_PI / x).sqrt();
    (scale * (p * c - q * s), scale * (p * s + q * c))
}

/// Miller downward recurrence. Returns `J_0..=J_top` with `top ≥ nmax` and
/// `top > x`, so the Neumann sums can use the whole sequence.
fn miller_sequence(x: f64, nmax: usize) -> Vec<f64> {
    let base = nmax.max(x.ceil() as usize);
    let mut top = base + 30 + (60.0 * base as f64).sqrt() as usize;
    if top % 2 == 1 {
        top += 1;
    }
    let mut f = vec![0.0; top + 2];
    f[top] = 1e-30;
    for j in (1..=top).rev() {
        let next = (2.0 * j as f64 / x) * f[j] - f[j + 1];
        f[j - 1] = next;
        if next.abs() > RESCALE_LIMIT {
            for v in f[j - 1..].iter_mut() {
                *v /= RESCALE_LIMIT;
            }
        }
    }
    let mut norm = f[0];
    let mut k = 2;
    while k <= top {
        norm += 2.0 * f[k];
        k += 2;
    }
    f.truncate(top + 1);
    for v in f.iter_mut() {
        *v /= norm;
    }
    f
}

/// `J_0(x)` and `J_1(x)` together.
fn j01(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.0);
    }
    if x >= ASYMPTOTIC_THRESHOLD {
        let (j0, _) = asymptotic_jy(0.0, x);
        let (j1, _) = asymptotic_jy(1.0, x);
        return (j0, j1);
    }
    let f = miller_sequence(x, 1);
    (f[0], f[1])
}

pub fn bessel_j0(x: f64) -> f64 {
    j01(x.abs()).0
}

pub fn bessel_j1(x: f64) -> f64 {
    let v = j01(x.abs()).1;
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J_0(x)`, `J_1(x)`, `Y_0(x)`, `Y_1(x)` for `x > 0`.
pub fn bessel_jy01(x: f64) -> [f64; 4] {
    debug_assert!(x > 0.0);
    if x >= ASYMPTOTIC_THRESHOLD {
        let (j0, y0) = asymptotic_jy(0.0, x);
        let (j1, y1) = asymptotic_jy(1.0, x);
        return [j0, j1, y0, y1];
    }
    let f = miller_sequence(x, 1);
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut even_sum = 0.0;
    let mut odd_sum = 0.0;
    let mut k = 1;
    while 2 * k + 1 < f.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        even_sum += sign * f[2 * k] / k as f64;
        odd_sum += sign * (f[2 * k - 1] - f[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * (log_term * f[0] - 2.0 * even_sum);
    let y1 = -FRAC_2_PI * (f[0] / x - log_term * f[1]) + FRAC_2_PI * odd_sum;
    [f[0], f[1], y0, y1]
}

pub fn bessel_y0(x: f64) -> f64 {
    bessel_jy01(x)[2]
}

pub fn bessel_y1(x: f64) -> f64 {
    bessel_jy01(x)[3]
}

/// `Y_0(x) − (2/π) ln(x/2) J_0(x)`, an even entire function of `x`.
pub fn bessel_y0_regular(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return FRAC_2_PI * EULER_GAMMA;
    }
    if x >= ASYMPTOTIC_THRESHOLD {
        let (j0, y0) = asymptotic_jy(0.0, x);
        return y0 - FRAC_2_PI * (0.5 * x).ln() * j0;
    }
    let f = miller_sequence(x, 1);
    let mut even_sum = 0.0;
    let mut k = 1;
    while 2 * k < f.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        even_sum += sign * f[2 * k] / k as f64;
        k += 1;
    }
    FRAC_2_PI * (EULER_GAMMA * f[0] - 2.0 * even_sum)
}

/// `1 − J_0(x)` without cancellation near the origin.
pub fn one_minus_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        for m in 1..30 {
            term *= -q / (m * m) as f64;
            sum -= term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - bessel_j0(x)
    }
}

/// `J_0(x), …, J_nmax(x)` for `x ≥ 0`.
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    if x < ASYMPTOTIC_THRESHOLD {
        let mut f = miller_sequence(x, nmax);
        f.truncate(nmax + 1);
        return f;
    }
    let (j0, j1) = j01(x);
    let mut out = vec![0.0; nmax + 1];
    out[0] = j0;
    if nmax == 0 {
        return out;
    }
    out[1] = j1;
    let turn = (x.floor() as usize).min(nmax);
    for n in 1..turn {
        out[n + 1] = (2.0 * n as f64 / x) * out[n] - out[n - 1];
    }
    if turn < nmax {
        // Above n ≈ x the upward recurrence is unstable; match a downward run
        // to the upward values at the turning index.
        let f = miller_sequence(x, nmax);
        let anchor = if out[turn].abs() >= out[turn - 1].abs() {
            turn
        } else {
            turn - 1
        };
        let scale = out[anchor] / f[anchor];
        for n in turn + 1..=nmax {
            out[n] = f[n] * scale;
        }
    }
    out
}

/// `Y_0(x), …, Y_nmax(x)` for `x > 0` by upward recurrence.
pub fn bessel_y_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let [_, _, y0, y1] = bessel_jy01(x);
    let mut out = vec![y0; nmax + 1];
    if nmax >= 1 {
        out[1] = y1;
    }
    for n in 1..nmax {
        out[n + 1] = (2.0 * n as f64 / x) * out[n] - out[n - 1];
    }
    out
}

/// `H_n^(2)(x) = J_n(x) − i Y_n(x)` for `n = 0..=nmax`.
pub fn hankel2_sequence(nmax: usize, x: f64) -> Vec<Complex64> {
    let j = bessel_j_sequence(nmax, x);
    let y = bessel_y_sequence(nmax, x);
    j.iter()
        .zip(&y)
        .map(|(&jn, &yn)| Complex64::new(jn, -yn))
        .collect()
}

pub fn hankel2_0(x: f64) -> Complex64 {
    let [j0, _, y0, _] = bessel_jy01(x);
    Complex64::new(j0, -y0)
}

/// Spherical Bessel functions `j_0(x), …, j_nmax(x)` for `x ≥ 0`.
pub fn spherical_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < 1.0 {
        spherical_series(x, &mut out);
        return out;
    }
    let (s, c) = x.sin_cos();
    out[0] = s / x;
    if nmax == 0 {
        return out;
    }
    out[1] = s / (x * x) - c / x;
    let turn = (x.floor() as usize).min(nmax);
    for n in 1..turn {
        out[n + 1] = ((2 * n + 1) as f64 / x) * out[n] - out[n - 1];
    }
    if turn >= nmax {
        return out;
    }
    let top = nmax.max(x.ceil() as usize) + 30 + (5.0 * x.cbrt()).ceil() as usize;
    let mut f = vec![0.0; top + 2];
    f[top] = 1e-30;
    for j in (turn..=top).rev() {
        f[j - 1] = ((2 * j + 1) as f64 / x) * f[j] - f[j + 1];
        if f[j - 1].abs() > RESCALE_LIMIT {
            for v in f[j - 1..].iter_mut() {
                *v /= RESCALE_LIMIT;
            }
        }
    }
    let anchor = if out[turn].abs() >= out[turn - 1].abs() {
        turn
    } else {
        turn - 1
    };
    let scale = out[anchor] / f[anchor];
    for n in turn + 1..=nmax {
        out[n] = f[n] * scale;
    }
    out
}

fn spherical_series(x: f64, out: &mut [f64]) {
    let q = -0.5 * x * x;
    let mut lead = 1.0; // x^n / (2n+1)!!
    for (n, slot) in out.iter_mut().enumerate() {
        if n > 0 {
            lead *= x / (2 * n + 1) as f64;
        }
        if lead == 0.0 {
            break;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= q / (k as f64 * (2 * n + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        *slot = lead * sum;
    }
}

/// Half-integer order `J_{n+1/2}(x) = √(2x/π) j_n(x)`.
pub fn bessel_j_half_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let scale = (2.0 * x.abs() / PI).sqrt();
    spherical_j_sequence(nmax, x)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values from an arbitrary-precision library.
    const J0: [(f64, f64); 6] = [
        (0.1, 0.997_501_562_066_040_0),
        (1.0, 0.765_197_686_557_966_6),
        (5.0, -0.177_596_771_314_338_3),
        (12.0, 0.047_689_310_796_833_54),
        (24.9, 0.083_245_968_353_015_49),
        (40.0, 0.007_366_890_584_237_29),
    ];
    const Y0: [(f64, f64); 5] = [
        (0.1, -1.534_238_651_350_367_2),
        (1.0, 0.088_256_964_215_676_96),
        (5.0, -0.308_517_625_249_033_6),
        (17.0, -0.092_637_198_442_323_56),
        (40.0, 0.125_936_417_058_260_93),
    ];

    #[test]
    fn j0_y0_reference_values() {
        for (x, v) in J0 {
            assert!((bessel_j0(x) - v).abs() < 2e-15, "J0({x})");
        }
        for (x, v) in Y0 {
            assert!((bessel_y0(x) - v).abs() < 5e-15, "Y0({x}) = {}", bessel_y0(x));
        }
    }

    #[test]
    fn y1_and_wronskian() {
        assert!((bessel_y1(1.0) + 0.781_212_821_300_288_7).abs() < 1e-14);
        for &x in &[0.3, 2.0, 7.7, 19.0, 24.999, 25.0, 60.0] {
            let [j0, j1, y0, y1] = bessel_jy01(x);
            let w = j1 * y0 - j0 * y1;
            assert!((w - 2.0 / (PI * x)).abs() < 1e-14 / x.min(1.0), "x={x}");
        }
    }

    #[test]
    fn branch_switch_is_continuous() {
        let below = bessel_jy01(ASYMPTOTIC_THRESHOLD * (1.0 - f64::EPSILON));
        let above = bessel_jy01(ASYMPTOTIC_THRESHOLD);
        for i in 0..4 {
            assert!((below[i] - above[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn regular_part_of_y0() {
        for &x in &[0.01, 0.5, 3.0, 20.0, 30.0] {
            let direct = bessel_y0(x) - FRAC_2_PI * (0.5 * x).ln() * bessel_j0(x);
            assert!((bessel_y0_regular(x) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn integer_order_sequences() {
        // J_5(10), Y_5(10), J_30(10)
        let j = bessel_j_sequence(30, 10.0);
        assert!((j[5] + 0.234_061_528_186_793_7).abs() < 1e-14);
        assert!((j[30] - 1.551_096_078_257_467e-12).abs() < 1e-24);
        let y = bessel_y_sequence(5, 10.0);
        assert!((y[5] - 0.135_403_047_689_362_4).abs() < 1e-13);
        // large argument, orders straddling x
        let j = bessel_j_sequence(60, 40.0);
        assert!((j[10] - 0.119_383_362_782_260_95).abs() < 1e-14);
        assert!((j[55] - 1.301_652_816_846_115_9e-5).abs() < 1e-16);
    }

    #[test]
    fn spherical_against_closed_forms() {
        for &x in &[1e-9, 0.3, 0.999, 1.0, 4.0, 37.5, 300.0] {
            let j = spherical_j_sequence(60, x);
            let (s, c) = x.sin_cos();
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert!((j[0] - s / x).abs() < 1e-15);
            if x > 1e-3 {
                assert!((j[2] - j2).abs() < 1e-13, "x={x}: {} vs {}", j[2], j2);
            }
            assert!(j.iter().take(60).all(|v| v.is_finite()));
        }
        let a = spherical_j_sequence(40, 0.999);
        let b = spherical_j_sequence(40, 1.0);
        for n in 0..40 {
            let rel = (a[n] - b[n]).abs() / b[n].abs().max(1e-300);
            assert!(rel < 0.05, "n={n}");
        }
        // j_20(10) from an arbitrary-precision reference
        let j = spherical_j_sequence(25, 10.0);
        assert!((j[20] / 2.308_371_961_319_468_7e-6 - 1.0).abs() < 1e-12);
    }
}
