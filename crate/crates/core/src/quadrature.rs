//! Gauss–Legendre panel rules, the log-weighted Gauss rule used on
//! singular panel pairs, and a globally adaptive Gauss–Kronrod integrator
//! that serves as the slow reference everywhere else in the crate.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

/// Gauss–Legendre rule on (−1, 1), nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Gauss rule order must be positive"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, x);
                dp = nf * (x * p - p_prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (p, p_prev) = legendre_pair(n, x);
            if p != 0.0 {
                dp = nf * (x * p - p_prev) / (x * x - 1.0);
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `(a, b)`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

/// `(P_n(x), P_{n−1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// `P_0(x), …, P_nmax(x)`.
pub fn legendre_polynomials(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax >= 1 {
        out.push(x);
    }
    for k in 1..nmax {
        let kf = k as f64;
        out.push(((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0));
    }
    out
}

static RULE_CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();

/// Shared Gauss–Legendre rule of order `n` (`n ≥ 1`).
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    assert!(n > 0, "Gauss rule order must be positive");
    let cache = RULE_CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.read().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussRule::legendre(n).expect("positive order"));
    cache.write().unwrap().entry(n).or_insert(rule).clone()
}

/// Rule on (0, 1) exact for `p(x) + q(x) ln x` with `deg p, deg q ≤ 2n − 1`.
///
/// The smooth part is integrated with Gauss–Legendre; the logarithmic part
/// with the Gauss rule for the weight `−ln x`.
#[derive(Debug, Clone)]
pub struct LogSingularRule {
    smooth_nodes: Vec<f64>,
    smooth_weights: Vec<f64>,
    log_nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl LogSingularRule {
    pub fn smooth(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.smooth_nodes.iter().copied().zip(self.smooth_weights.iter().copied())
    }

    /// Nodes and weights of `∫_0^1 −ln(x) f(x) dx`.
    pub fn log_weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.log_nodes.iter().copied().zip(self.log_weights.iter().copied())
    }

    /// `∫_0^1 [s(x) + c(x) ln x] dx`.
    pub fn integrate<S, C>(&self, mut smooth: S, mut log_coeff: C) -> f64
    where
        S: FnMut(f64) -> f64,
        C: FnMut(f64) -> f64,
    {
        let s: f64 = self.smooth().map(|(x, w)| w * smooth(x)).sum();
        let l: f64 = self.log_weighted().map(|(x, w)| w * log_coeff(x)).sum();
        s - l
    }
}

pub fn log_singular_panel_rule(n: usize) -> Result<LogSingularRule> {
    if n < 2 {
        return Err(Error::invalid("log-singular rule needs n >= 2"));
    }
    let gl = gauss_legendre(n);
    let (smooth_nodes, smooth_weights) = gl.mapped(0.0, 1.0).unzip();
    let (log_nodes, log_weights) = log_weight_gauss(n)?;
    Ok(LogSingularRule {
        smooth_nodes,
        smooth_weights,
        log_nodes,
        log_weights,
    })
}

/// Gauss rule for the weight `−ln x` on (0, 1) via the modified Chebyshev
/// algorithm on shifted-Legendre moments, then Golub–Welsch.
fn log_weight_gauss(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m2 = 2 * n;
    // monic shifted Legendre recurrence
    let a = vec![0.5; m2];
    let b: Vec<f64> = (0..m2)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                let kf = k as f64;
                kf * kf / (4.0 * (4.0 * kf * kf - 1.0))
            }
        })
        .collect();
    let mut moments = vec![0.0; m2];
    moments[0] = 1.0;
    let mut ratio = 1.0; // (k!)² / (2k)!
    for (k, m) in moments.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        ratio *= kf * kf / ((2.0 * kf - 1.0) * 2.0 * kf);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *m = sign / (kf * (kf + 1.0)) * ratio;
    }

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sig_prev2 = vec![0.0; m2];
    let mut sig_prev = moments.clone();
    alpha[0] = a[0] + moments[1] / moments[0];
    beta[0] = moments[0];
    for k in 1..n {
        let mut sig = vec![0.0; m2];
        for l in k..(m2 - k) {
            sig[l] = sig_prev[l + 1] - (alpha[k - 1] - a[l]) * sig_prev[l]
                - beta[k - 1] * sig_prev2[l]
                + b[l] * sig_prev[l - 1];
        }
        alpha[k] = a[k] + sig[k + 1] / sig[k] - sig_prev[k] / sig_prev[k - 1];
        beta[k] = sig[k] / sig_prev[k - 1];
        sig_prev2 = sig_prev;
        sig_prev = sig;
    }

    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i + 1].sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("log-weight Jacobi eigenproblem did not converge".into()))?;
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], beta[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.into_iter().unzip())
}

// G7K15 nodes and weights, non-negative half.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 60;
const MAX_INTERVALS: usize = 1 << 20;

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Returns the K15 value, the error estimate and whether that estimate is
/// already at the rounding floor.
fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, bool) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    (value, err.max(floor), err <= floor)
}

/// Global adaptive bisection with an embedded G7K15 estimate, until the
/// summed error estimate is at most `tol` (absolute).
pub fn adaptive_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<AdaptiveResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(AdaptiveResult { value: 0.0, error: 0.0, intervals: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    let mut settled_value = 0.0;
    let mut settled_err = 0.0;
    let mut push = |heap: &mut BinaryHeap<Segment>, seg: Segment, at_floor: bool, total_err: &mut f64| -> Result<()> {
        if !seg.value.is_finite() {
            return Err(Error::NumericDomain("integrand not finite".into()));
        }
        if at_floor {
            settled_value += seg.value;
            settled_err += seg.error;
        } else {
            *total_err += seg.error;
            heap.push(seg);
        }
        Ok(())
    };
    let (v, e, fl) = kronrod15(&mut f, a, b);
    push(&mut heap, Segment { a, b, value: v, error: e, depth: 0 }, fl, &mut total_err)?;
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    while total_err + frozen_err > tol {
        let Some(seg) = heap.pop() else { break };
        total_err -= seg.error;
        if seg.depth >= MAX_DEPTH || heap.len() >= MAX_INTERVALS {
            frozen_value += seg.value;
            frozen_err += seg.error;
            continue;
        }
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1, f1) = kronrod15(&mut f, seg.a, mid);
        let (v2, e2, f2) = kronrod15(&mut f, mid, seg.b);
        let d = seg.depth + 1;
        push(&mut heap, Segment { a: seg.a, b: mid, value: v1, error: e1, depth: d }, f1, &mut total_err)?;
        push(&mut heap, Segment { a: mid, b: seg.b, value: v2, error: e2, depth: d }, f2, &mut total_err)?;
    }
    let intervals = heap.len();
    // Re-sum in position order for a reproducible total.
    let mut segs = heap.into_vec();
    segs.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = segs.iter().map(|s| s.value).sum::<f64>() + frozen_value + settled_value;
    let unresolved = segs.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    let error = unresolved + settled_err;
    if unresolved > tol {
        return Err(Error::AccuracyFailure { estimate: value, error });
    }
    Ok(AdaptiveResult { value, error, intervals })
}

/// Reference integral of a real function; see [`adaptive_integrate`].
pub fn adaptive_oracle<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_integrate(f, a, b, tol).map(|r| r.value)
}

pub fn adaptive_oracle_complex<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let re = adaptive_oracle(|x| f(x).re, a, b, tol)?;
    let im = adaptive_oracle(|x| f(x).im, a, b, tol)?;
    Ok(Complex64::new(re, im))
}
