//! Closed parametric curves, chord meshes over them and the piecewise-linear
//! hat basis.

use crate::error::{Error, Result};
use crate::quadrature::adaptive_oracle;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParametricCurve {
    Circle { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
    /// `(cos t + 0.65 cos 2t − 0.65, 1.5 sin t)` scaled by `scale`.
    Kite { scale: f64 },
    /// Star-shaped rounded polygon `ρ(t) = radius (1 + amplitude cos(sides·t))`.
    PolygonSmooth { sides: u32, radius: f64, amplitude: f64 },
}

impl ParametricCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        Self::Circle { radius }.validated()
    }

    pub fn ellipse(semi_x: f64, semi_y: f64) -> Result<Self> {
        Self::Ellipse { semi_x, semi_y }.validated()
    }

    pub fn kite(scale: f64) -> Result<Self> {
        Self::Kite { scale }.validated()
    }

    pub fn polygon_smooth(sides: u32, radius: f64, amplitude: f64) -> Result<Self> {
        Self::PolygonSmooth { sides, radius, amplitude }.validated()
    }

    fn validated(self) -> Result<Self> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            Self::Circle { radius } => positive(radius, "radius")?,
            Self::Ellipse { semi_x, semi_y } => {
                positive(semi_x, "semi-axis")?;
                positive(semi_y, "semi-axis")?;
            }
            Self::Kite { scale } => positive(scale, "scale")?,
            Self::PolygonSmooth { sides, radius, amplitude } => {
                positive(radius, "radius")?;
                if sides < 3 {
                    return Err(Error::invalid("smoothed polygon needs at least 3 sides"));
                }
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(Error::invalid(format!("amplitude must lie in [0, 1), got {amplitude}")));
                }
            }
        }
        Ok(self)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Ellipse { .. } => "ellipse",
            Self::Kite { .. } => "kite",
            Self::PolygonSmooth { .. } => "polygon-smooth",
        }
    }

    pub fn position(&self, t: f64) -> Point {
        match *self {
            Self::Circle { radius } => [radius * t.cos(), radius * t.sin()],
            Self::Ellipse { semi_x, semi_y } => [semi_x * t.cos(), semi_y * t.sin()],
            Self::Kite { scale } => [
                scale * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65),
                scale * 1.5 * t.sin(),
            ],
            Self::PolygonSmooth { sides, radius, amplitude } => {
                let rho = radius * (1.0 + amplitude * (sides as f64 * t).cos());
                [rho * t.cos(), rho * t.sin()]
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Point {
        match *self {
            Self::Circle { radius } => [-radius * t.sin(), radius * t.cos()],
            Self::Ellipse { semi_x, semi_y } => [-semi_x * t.sin(), semi_y * t.cos()],
            Self::Kite { scale } => [
                scale * (-t.sin() - 1.3 * (2.0 * t).sin()),
                scale * 1.5 * t.cos(),
            ],
            Self::PolygonSmooth { sides, radius, amplitude } => {
                let n = sides as f64;
                let rho = radius * (1.0 + amplitude * (n * t).cos());
                let drho = -radius * amplitude * n * (n * t).sin();
                [drho * t.cos() - rho * t.sin(), drho * t.sin() + rho * t.cos()]
            }
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        let [dx, dy] = self.derivative(t);
        dx.hypot(dy)
    }

    /// Arclength between parameters `t0 ≤ t1`.
    pub fn arclength(&self, t0: f64, t1: f64) -> Result<f64> {
        if let Self::Circle { radius } = *self {
            return Ok(radius * (t1 - t0));
        }
        adaptive_oracle(|t| self.speed(t), t0, t1, 1e-14 * (1.0 + (t1 - t0)))
    }

    pub fn total_length(&self) -> Result<f64> {
        if let Self::Circle { radius } = *self {
            return Ok(TAU * radius);
        }
        // Panels keep the adaptive error estimate below the target on
        // strongly varying speeds.
        let mut total = 0.0;
        for p in 0..16 {
            let a = TAU * p as f64 / 16.0;
            total += self.arclength(a, a + TAU / 16.0)?;
        }
        Ok(total)
    }
}

impl fmt::Display for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Circle { radius } => write!(f, "circle:{radius}"),
            Self::Ellipse { semi_x, semi_y } => write!(f, "ellipse:{semi_x},{semi_y}"),
            Self::Kite { scale } => write!(f, "kite:{scale}"),
            Self::PolygonSmooth { sides, radius, amplitude } => {
                write!(f, "polygon-smooth:{sides},{radius},{amplitude}")
            }
        }
    }
}

impl FromStr for ParametricCurve {
    type Err = Error;

    /// `circle:R`, `ellipse:A,B`, `kite[:S]`, `polygon-smooth:N,R,D`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad curve parameter '{v}' in '{s}'")))
                })
                .collect::<Result<_>>()?
        };
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("curve '{kind}' expects {n} parameter(s), got {}", nums.len())))
            }
        };
        match kind.trim() {
            "circle" => {
                arity(1)?;
                Self::circle(nums[0])
            }
            "ellipse" => {
                arity(2)?;
                Self::ellipse(nums[0], nums[1])
            }
            "kite" => {
                if nums.is_empty() {
                    Self::kite(1.0)
                } else {
                    arity(1)?;
                    Self::kite(nums[0])
                }
            }
            "polygon-smooth" | "polygon" => {
                arity(3)?;
                if nums[0].fract() != 0.0 || nums[0] < 0.0 {
                    return Err(Error::invalid("polygon side count must be a whole number"));
                }
                Self::polygon_smooth(nums[0] as u32, nums[1], nums[2])
            }
            other => Err(Error::Unsupported(format!("curve kind '{other}'"))),
        }
    }
}

/// How mesh nodes are distributed along the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodePlacement {
    /// All chords have the same length.
    #[default]
    EqualChord,
    /// Consecutive nodes are separated by the same arclength.
    EqualArclength,
}

impl fmt::Display for NodePlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EqualChord => "equal-chord",
            Self::EqualArclength => "equal-arclength",
        })
    }
}

impl FromStr for NodePlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-chord" | "chord" => Ok(Self::EqualChord),
            "equal-arclength" | "arclength" => Ok(Self::EqualArclength),
            other => Err(Error::invalid(format!("unknown node placement '{other}'"))),
        }
    }
}

/// Closed chord mesh; segment `i` joins node `i` to node `(i + 1) mod N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMesh {
    curve: ParametricCurve,
    placement: NodePlacement,
    params: Vec<f64>,
    nodes: Vec<Point>,
    lengths: Vec<f64>,
    total_length: f64,
    curve_length: f64,
}

pub const MIN_SEGMENTS: usize = 8;

pub fn build_mesh(curve: &ParametricCurve, n: usize) -> Result<CurveMesh> {
    build_mesh_with(curve, n, NodePlacement::EqualChord)
}

/// Mesh whose segment count gives a chord length of at most `h`.
pub fn build_mesh_for_h(curve: &ParametricCurve, h: f64, placement: NodePlacement) -> Result<CurveMesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("target segment length must be positive, got {h}")));
    }
    let length = curve.total_length()?;
    let n = ((length / h).ceil() as usize).max(MIN_SEGMENTS);
    let mesh = build_mesh_with(curve, n, placement)?;
    if mesh.h_max() > h {
        build_mesh_with(curve, n + 1, placement)
    } else {
        Ok(mesh)
    }
}

pub fn build_mesh_with(curve: &ParametricCurve, n: usize, placement: NodePlacement) -> Result<CurveMesh> {
    if n < MIN_SEGMENTS {
        return Err(Error::invalid(format!("mesh needs at least {MIN_SEGMENTS} segments, got {n}")));
    }
    let curve = curve.validated()?;
    let curve_length = curve.total_length()?;
    let params = match curve {
        ParametricCurve::Circle { .. } => (0..n).map(|i| TAU * i as f64 / n as f64).collect(),
        _ => match placement {
            NodePlacement::EqualChord => equal_chord_params(&curve, n, curve_length)?,
            NodePlacement::EqualArclength => equal_arclength_params(&curve, n, curve_length)?,
        },
    };
    let nodes: Vec<Point> = params.iter().map(|&t| curve.position(t)).collect();
    let lengths: Vec<f64> = (0..n).map(|i| distance(nodes[i], nodes[(i + 1) % n])).collect();
    let total_length = lengths.iter().sum();
    Ok(CurveMesh {
        curve,
        placement,
        params,
        nodes,
        lengths,
        total_length,
        curve_length,
    })
}

fn distance(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// First parameter after `t0` whose chord from `t0` has length `h`.
fn chord_step(curve: &ParametricCurve, t0: f64, h: f64, dt_guess: f64) -> f64 {
    let p0 = curve.position(t0);
    let g = |t: f64| distance(curve.position(t), p0) - h;
    let probe = dt_guess / 16.0;
    let mut lo = t0;
    let mut hi = t0 + probe;
    while g(hi) < 0.0 {
        lo = hi;
        hi += probe;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn march(curve: &ParametricCurve, n: usize, h: f64, dt_guess: f64) -> Vec<f64> {
    let mut params = Vec::with_capacity(n + 1);
    let mut t = 0.0;
    params.push(t);
    for _ in 0..n {
        t = chord_step(curve, t, h, dt_guess);
        params.push(t);
    }
    params
}

/// Shooting on the common chord length until `N` chords close the curve.
fn equal_chord_params(curve: &ParametricCurve, n: usize, curve_length: f64) -> Result<Vec<f64>> {
    let dt_guess = TAU / n as f64;
    let closure = |h: f64| march(curve, n, h, dt_guess)[n] - TAU;
    let mut hi = curve_length / n as f64;
    let mut lo = 0.5 * hi;
    if closure(lo) > 0.0 || closure(hi) < 0.0 {
        return Err(Error::Numeric("equal-chord node placement failed to bracket".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if closure(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut params = march(curve, n, 0.5 * (lo + hi), dt_guess);
    params.truncate(n);
    Ok(params)
}

/// Newton iteration on cumulative arclength.
fn equal_arclength_params(curve: &ParametricCurve, n: usize, curve_length: f64) -> Result<Vec<f64>> {
    let step = curve_length / n as f64;
    let mut params = vec![0.0; n];
    let mut t_prev = 0.0;
    for slot in params.iter_mut().skip(1) {
        // arclength measured from the previous node
        let mut t = t_prev + TAU / n as f64;
        for iter in 0..60 {
            let s = curve.arclength(t_prev, t)?;
            let dt = (s - step) / curve.speed(t);
            t -= dt;
            if dt.abs() < 1e-15 * TAU {
                break;
            }
            if iter == 59 {
                return Err(Error::Numeric("equal-arclength placement did not converge".into()));
            }
        }
        *slot = t;
        t_prev = t;
    }
    Ok(params)
}

impl CurveMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn curve(&self) -> &ParametricCurve {
        &self.curve
    }

    pub fn placement(&self) -> NodePlacement {
        self.placement
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i % self.len()]
    }

    /// Segment lengths, `h_i = |x_{i+1} − x_i|`.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn h(&self, i: usize) -> f64 {
        self.lengths[i % self.len()]
    }

    pub fn h_max(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum of the chord lengths.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arclength of the underlying curve.
    pub fn curve_length(&self) -> f64 {
        self.curve_length
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        let n = self.len();
        (self.nodes[i % n], self.nodes[(i + 1) % n])
    }

    /// Unit tangent of segment `i`.
    pub fn tangent(&self, i: usize) -> Point {
        let (p, q) = self.segment(i);
        let h = self.h(i);
        [(q[0] - p[0]) / h, (q[1] - p[1]) / h]
    }

    /// Point at local coordinate `s ∈ [0, 1]` of segment `i`.
    pub fn point(&self, i: usize, s: f64) -> Point {
        let (p, q) = self.segment(i);
        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
    }

    /// Short identity used to tag matrices assembled on this mesh.
    pub fn tag(&self) -> String {
        let placement = match self.placement {
            NodePlacement::EqualChord => "equal-chord",
            NodePlacement::EqualArclength => "equal-arclength",
        };
        format!("{}/N={}/{}", self.curve, self.len(), placement)
    }

    /// Same mesh with node `shift` renumbered as node 0.
    pub fn relabeled(&self, shift: usize) -> CurveMesh {
        let n = self.len();
        let rot = |v: &Vec<f64>| (0..n).map(|i| v[(i + shift) % n]).collect::<Vec<_>>();
        CurveMesh {
            curve: self.curve,
            placement: self.placement,
            params: rot(&self.params),
            nodes: (0..n).map(|i| self.nodes[(i + shift) % n]).collect(),
            lengths: rot(&self.lengths),
            total_length: self.total_length,
            curve_length: self.curve_length,
        }
    }

    /// Locates `p` on the mesh as `(segment, local coordinate)`.
    pub fn locate(&self, p: Point) -> Result<(usize, f64)> {
        let tol = 1e-10 * self.h_max();
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.len() {
            let (a, b) = self.segment(i);
            let h = self.h(i);
            let t = self.tangent(i);
            let s = ((p[0] - a[0]) * t[0] + (p[1] - a[1]) * t[1]) / h;
            let sc = s.clamp(0.0, 1.0);
            let d = distance(p, [a[0] + sc * (b[0] - a[0]), a[1] + sc * (b[1] - a[1])]);
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((i, sc, d));
            }
        }
        match best {
            Some((i, s, d)) if d <= tol => Ok((i, s)),
            _ => Err(Error::invalid(format!("point ({}, {}) is not on the mesh", p[0], p[1]))),
        }
    }

    /// CSV with columns `index,x,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# curve={} N={} placement={:?}", self.curve, self.len(), self.placement)?;
        writeln!(out, "index,x,y")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(out, "{i},{:.17e},{:.17e}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// Piecewise-linear hats: `φ_i` is 1 at node `i` and supported on
/// segments `i − 1` and `i`.
#[derive(Debug, Clone, Copy)]
pub struct BasisSet<'a> {
    mesh: &'a CurveMesh,
}

impl<'a> BasisSet<'a> {
    pub fn new(mesh: &'a CurveMesh) -> Self {
        Self { mesh }
    }

    pub fn mesh(&self) -> &CurveMesh {
        self.mesh
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    /// `φ_i` at local coordinate `s` of `segment`.
    pub fn value_on_segment(&self, i: usize, segment: usize, s: f64) -> f64 {
        let n = self.len();
        let i = i % n;
        let segment = segment % n;
        if segment == i {
            1.0 - s
        } else if (segment + 1) % n == i {
            s
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, i: usize, p: Point) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::invalid(format!("basis index {i} out of range")));
        }
        let (seg, s) = self.mesh.locate(p)?;
        Ok(self.value_on_segment(i, seg, s))
    }
}

pub fn evaluate_basis(basis: &BasisSet<'_>, i: usize, p: Point) -> Result<f64> {
    basis.evaluate(i, p)
}

/// `2a sin(π/N)`, the chord of a regular N-gon inscribed in a circle.
pub fn circle_chord(radius: f64, n: usize) -> f64 {
    2.0 * radius * (PI / n as f64).sin()
}
