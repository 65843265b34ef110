//! Galerkin matrices of the single-layer operator `S`, the hypersingular
//! operator `N` (weak form), the Gram matrix `G` and plane-wave excitations
//! on the hat basis of a [`CurveMesh`].

use crate::error::{Error, Result};
use crate::geometry::{CurveMesh, Point};
use crate::kernels::{KernelSpec, KernelTable, LogSplit};
use crate::parallel::Execution;
use crate::quadrature::{gauss_legendre, log_singular_panel_rule, LogSingularRule};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::str::FromStr;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// How a matrix acts on hat-basis coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixForm {
    /// `A_ij = ⟨φ_i, A φ_j⟩`; the operator itself is `G⁻¹A`.
    Galerkin,
    /// Already an operator on coefficients, such as `G⁻¹SG⁻¹N`.
    Coefficient,
}

/// Dense complex matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub label: String,
    pub kernel: Option<KernelSpec>,
    pub mesh_tag: String,
    pub form: MatrixForm,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, label: impl Into<String>, kernel: Option<KernelSpec>, mesh_tag: impl Into<String>) -> Self {
        Self {
            entries,
            label: label.into(),
            kernel,
            mesh_tag: mesh_tag.into(),
            form: MatrixForm::Galerkin,
        }
    }

    pub fn with_form(mut self, form: MatrixForm) -> Self {
        self.form = form;
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `‖A − Aᵀ‖_F / ‖A‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let norm = self.entries.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.entries - self.entries.transpose()).norm() / norm
    }

    /// Binary export: `"EF2D"`, version `u32`, `N u32`, then row-major
    /// interleaved `(re, im)` little-endian `f64`.
    pub fn write_ef2d<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        if self.entries.ncols() != n {
            return Err(Error::invalid("EF2D export needs a square matrix"));
        }
        out.write_all(EF2D_MAGIC)?;
        out.write_all(&EF2D_VERSION.to_le_bytes())?;
        out.write_all(&(n as u32).to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Long-format CSV `i,j,re,im`, restricted to `N ≤ 256`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        if n > CSV_MAX_DIM {
            return Err(Error::invalid(format!("CSV export is limited to N <= {CSV_MAX_DIM}, got {n}")));
        }
        writeln!(out, "# operator={} mesh={} N={n}", self.label, self.mesh_tag)?;
        writeln!(out, "i,j,re,im")?;
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                writeln!(out, "{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

pub const EF2D_MAGIC: &[u8; 4] = b"EF2D";
pub const EF2D_VERSION: u32 = 1;
pub const CSV_MAX_DIM: usize = 256;

/// Reads a matrix written by [`OperatorMatrix::write_ef2d`].
pub fn read_ef2d<R: Read>(mut input: R) -> Result<CMatrix> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != EF2D_MAGIC {
        return Err(Error::invalid("not an EF2D file"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != EF2D_VERSION {
        return Err(Error::Unsupported(format!("EF2D version {version}")));
    }
    input.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut m = CMatrix::zeros(n, n);
    let mut buf = [0u8; 8];
    for i in 0..n {
        for j in 0..n {
            input.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            input.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Mass matrix of the hat basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub mesh_tag: String,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn to_complex(&self) -> CMatrix {
        self.entries.map(Complex64::from)
    }
}

pub fn assemble_g(mesh: &CurveMesh) -> GramMatrix {
    let n = mesh.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = mesh.h(i);
        let j = (i + 1) % n;
        g[(i, i)] += h / 3.0;
        g[(j, j)] += h / 3.0;
        g[(i, j)] += h / 6.0;
        g[(j, i)] += h / 6.0;
    }
    GramMatrix {
        entries: g,
        mesh_tag: mesh.tag(),
    }
}

/// Cyclic stiffness matrix of the hat basis (arclength second derivative).
pub fn assemble_stiffness(mesh: &CurveMesh) -> DMatrix<f64> {
    let n = mesh.len();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let inv = 1.0 / mesh.h(i);
        let j = (i + 1) % n;
        l[(i, i)] += inv;
        l[(j, j)] += inv;
        l[(i, j)] -= inv;
        l[(j, i)] -= inv;
    }
    l
}

/// Local moments `I_ab = ∫_p ∫_q ψ_a ψ_b g` of a panel pair; `a` indexes
/// the start/end node of the first panel, `b` of the second.
type Moments = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Quadrature settings for panel pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrders {
    pub far: usize,
    pub near: usize,
    /// Pairs whose cyclic index distance is at most this use `near`.
    pub near_distance: usize,
    pub log_rule: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        Self {
            far: 8,
            near: 16,
            near_distance: 3,
            log_rule: 10,
        }
    }
}

/// Shared state for assembling operators of one kernel on one mesh.
pub struct Assembler<'a> {
    mesh: &'a CurveMesh,
    spec: KernelSpec,
    table: KernelTable,
    orders: QuadratureOrders,
    log_rule: LogSingularRule,
    execution: Execution,
}

/// Both operators of one kernel, built from shared moments.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub s: OperatorMatrix,
    pub n: OperatorMatrix,
}

fn sub(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

fn table_range(mesh: &CurveMesh) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in mesh.nodes() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    norm(sub(hi, lo)) * (1.0 + 1e-9)
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a CurveMesh, spec: KernelSpec) -> Result<Self> {
        Self::with_options(mesh, spec, QuadratureOrders::default(), Execution::default())
    }

    pub fn with_options(
        mesh: &'a CurveMesh,
        spec: KernelSpec,
        orders: QuadratureOrders,
        execution: Execution,
    ) -> Result<Self> {
        let table = KernelTable::new(spec, table_range(mesh))?;
        let log_rule = log_singular_panel_rule(orders.log_rule)?;
        Ok(Self {
            mesh,
            spec,
            table,
            orders,
            log_rule,
            execution,
        })
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    /// Gauss order raised so that panels resolve the kernel's oscillation.
    fn scaled_order(&self, base: usize) -> usize {
        let kh = self.spec.bandwidth() * self.mesh.h_max();
        base.max((2.0 + kh).ceil() as usize)
    }

    fn split(&self, r: f64) -> LogSplit {
        self.table.log_split(r)
    }

    fn far_moments(&self, p: usize, q: usize, order: usize) -> Moments {
        let rule = gauss_legendre(order);
        let (a0, a1) = self.mesh.segment(p);
        let (b0, b1) = self.mesh.segment(q);
        let da = sub(a1, a0);
        let db = sub(b1, b0);
        let mut m = [[ZERO; 2]; 2];
        let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
        for &(u, wu) in &nodes {
            let x = [a0[0] + u * da[0], a0[1] + u * da[1]];
            let pu = [1.0 - u, u];
            for &(v, wv) in &nodes {
                let y = [b0[0] + v * db[0], b0[1] + v * db[1]];
                let g = self.table.evaluate(norm(sub(x, y))) * (wu * wv);
                let pv = [1.0 - v, v];
                for a in 0..2 {
                    for b in 0..2 {
                        m[a][b] += g * (pu[a] * pv[b]);
                    }
                }
            }
        }
        let scale = self.mesh.h(p) * self.mesh.h(q);
        m.map(|row| row.map(|z| z * scale))
    }

    /// `∫_0^1 ρ^power · f(ρ) · g(ρc) dρ` with the `ln ρ` part of the
    /// kernel integrated by the log-weighted rule.
    fn radial<F>(&self, c: f64, weight_power: i32, order: usize, f: F) -> Moments
    where
        F: Fn(f64) -> [[f64; 2]; 2],
    {
        let mut m = [[ZERO; 2]; 2];
        let ln_c = c.ln();
        for (rho, w) in gauss_legendre(order).mapped(0.0, 1.0) {
            let s = self.split(rho * c);
            let val = (s.regular + s.log_coeff * ln_c) * (w * rho.powi(weight_power));
            let basis = f(rho);
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += val * basis[a][b];
                }
            }
        }
        if self.spec.family().is_filtered() {
            return m;
        }
        // ∫ A(ρc) ln ρ · ρ^power f dρ = −Σ w A f for the −ln ρ weight
        for (rho, w) in self.log_rule.log_weighted() {
            let s = self.split(rho * c);
            let val = -s.log_coeff * w * rho.powi(weight_power);
            let basis = f(rho);
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += Complex64::from(val * basis[a][b]);
                }
            }
        }
        m
    }

    fn self_moments(&self, p: usize) -> Moments {
        let h = self.mesh.h(p);
        let order = self.scaled_order(self.orders.near);
        // M_ab(ρ) = ∫_0^{1−ρ} [ψ_a(w+ρ)ψ_b(w) + ψ_a(w)ψ_b(w+ρ)] dw
        let basis = |rho: f64| {
            let len = 1.0 - rho;
            let mut out = [[0.0; 2]; 2];
            for (w, wt) in gauss_legendre(2).mapped(0.0, len) {
                let x = [1.0 - w - rho, w + rho];
                let y = [1.0 - w, w];
                for a in 0..2 {
                    for b in 0..2 {
                        out[a][b] += wt * (x[a] * y[b] + y[a] * x[b]);
                    }
                }
            }
            out
        };
        let m = self.radial(h, 0, order, basis);
        m.map(|row| row.map(|z| z * (h * h)))
    }

    /// Panels `p` and `q` with the end of `p` equal to the start of `q`.
    fn adjacent_moments(&self, p: usize, q: usize) -> Moments {
        let hp = self.mesh.h(p);
        let hq = self.mesh.h(q);
        let ep = self.mesh.tangent(p);
        let eq = self.mesh.tangent(q);
        let order = self.scaled_order(self.orders.near);
        let mut m = [[ZERO; 2]; 2];
        for (tau, wt) in gauss_legendre(order).mapped(0.0, 1.0) {
            // u' = distance parameter from the shared node along p
            // triangle v ≤ u': u' = ρ, v = ρτ
            let c1 = norm([hp * ep[0] + tau * hq * eq[0], hp * ep[1] + tau * hq * eq[1]]);
            let t1 = self.radial(c1, 1, order, |rho| {
                let up = rho;
                let v = rho * tau;
                outer([up, 1.0 - up], [1.0 - v, v])
            });
            // triangle u' ≤ v: v = ρ, u' = ρτ
            let c2 = norm([tau * hp * ep[0] + hq * eq[0], tau * hp * ep[1] + hq * eq[1]]);
            let t2 = self.radial(c2, 1, order, |rho| {
                let up = rho * tau;
                let v = rho;
                outer([up, 1.0 - up], [1.0 - v, v])
            });
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += (t1[a][b] + t2[a][b]) * wt;
                }
            }
        }
        m.map(|row| row.map(|z| z * (hp * hq)))
    }

    fn pair_moments(&self, p: usize, q: usize) -> Moments {
        let n = self.mesh.len();
        if p == q {
            return self.self_moments(p);
        }
        if q == (p + 1) % n {
            return self.adjacent_moments(p, q);
        }
        if p == (q + 1) % n {
            return transpose(self.adjacent_moments(q, p));
        }
        let gap = (q + n - p) % n;
        let dist = gap.min(n - gap);
        let base = if dist <= self.orders.near_distance {
            self.orders.near
        } else {
            self.orders.far
        };
        self.far_moments(p, q, self.scaled_order(base))
    }

    /// Moments of the pairs `(p, q)`, `q ≥ p`, grouped by `p`.
    fn all_moments(&self) -> Vec<Vec<Moments>> {
        let n = self.mesh.len();
        let rows: Vec<usize> = (0..n).collect();
        self.execution
            .map(&rows, |&p| (p..n).map(|q| self.pair_moments(p, q)).collect())
    }

    fn scatter<F>(&self, moments: &[Vec<Moments>], block: F) -> CMatrix
    where
        F: Fn(usize, usize, &Moments) -> Moments,
    {
        let n = self.mesh.len();
        let mut a = CMatrix::zeros(n, n);
        for (p, row) in moments.iter().enumerate() {
            for (offset, m) in row.iter().enumerate() {
                let q = p + offset;
                let local = block(p, q, m);
                let ip = [p, (p + 1) % n];
                let iq = [q, (q + 1) % n];
                for x in 0..2 {
                    for y in 0..2 {
                        a[(ip[x], iq[y])] += local[x][y];
                        if p != q {
                            a[(iq[y], ip[x])] += local[x][y];
                        }
                    }
                }
            }
        }
        symmetrize(&mut a);
        a
    }

    fn single_layer_from(&self, moments: &[Vec<Moments>]) -> OperatorMatrix {
        let entries = self.scatter(moments, |_, _, m| *m);
        OperatorMatrix::new(entries, "S", Some(self.spec), self.mesh.tag())
    }

    fn hypersingular_from(&self, moments: &[Vec<Moments>]) -> OperatorMatrix {
        let k2 = self.spec.k() * self.spec.k();
        let entries = self.scatter(moments, |p, q, m| {
            let total = m[0][0] + m[0][1] + m[1][0] + m[1][1];
            let scale = 1.0 / (self.mesh.h(p) * self.mesh.h(q));
            let tp = self.mesh.tangent(p);
            let tq = self.mesh.tangent(q);
            let dot = tp[0] * tq[0] + tp[1] * tq[1];
            let d = [-1.0, 1.0];
            let mut out = [[ZERO; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] = total * (d[a] * d[b] * scale) - m[a][b] * (k2 * dot);
                }
            }
            out
        });
        OperatorMatrix::new(entries, "N", Some(self.spec), self.mesh.tag())
    }

    pub fn single_layer(&self) -> OperatorMatrix {
        self.single_layer_from(&self.all_moments())
    }

    pub fn hypersingular(&self) -> OperatorMatrix {
        self.hypersingular_from(&self.all_moments())
    }

    pub fn both(&self) -> OperatorPair {
        let moments = self.all_moments();
        OperatorPair {
            s: self.single_layer_from(&moments),
            n: self.hypersingular_from(&moments),
        }
    }
}

fn outer(x: [f64; 2], y: [f64; 2]) -> [[f64; 2]; 2] {
    [[x[0] * y[0], x[0] * y[1]], [x[1] * y[0], x[1] * y[1]]]
}

fn transpose(m: Moments) -> Moments {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn symmetrize(a: &mut CMatrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)]) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn assemble_s(mesh: &CurveMesh, kernel: KernelSpec) -> Result<OperatorMatrix> {
    Ok(Assembler::new(mesh, kernel)?.single_layer())
}

pub fn assemble_n(mesh: &CurveMesh, kernel: KernelSpec) -> Result<OperatorMatrix> {
    Ok(Assembler::new(mesh, kernel)?.hypersingular())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    Tm,
    Te,
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tm" => Ok(Self::Tm),
            "te" => Ok(Self::Te),
            other => Err(Error::invalid(format!("unknown polarization '{other}'"))),
        }
    }
}

/// Plane wave `exp(−ik d̂·r)` with field along `ẑ` (TM) or `ẑ × d̂` (TE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub polarization: Polarization,
    direction: [f64; 2],
    pub k: f64,
    pub eta: f64,
}

impl ExcitationSpec {
    pub fn new(polarization: Polarization, direction: [f64; 2], k: f64, eta: f64) -> Result<Self> {
        let len = norm(direction);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::invalid("incidence direction must be a nonzero vector"));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid(format!("plane-wave excitation needs k > 0, got {k}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("impedance must be positive, got {eta}")));
        }
        Ok(Self {
            polarization,
            direction: [direction[0] / len, direction[1] / len],
            k,
            eta,
        })
    }

    /// Incidence from the angle `θ` (radians) measured from `x̂`.
    pub fn from_angle(polarization: Polarization, angle: f64, k: f64, eta: f64) -> Result<Self> {
        Self::new(polarization, [angle.cos(), angle.sin()], k, eta)
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// Field component tested against the basis at `x` on a segment with
    /// unit tangent `t`, before the polarization scaling.
    fn field(&self, x: Point, t: Point) -> Complex64 {
        let d = self.direction;
        let phase = Complex64::from_polar(1.0, -self.k * (d[0] * x[0] + d[1] * x[1]));
        match self.polarization {
            Polarization::Tm => phase,
            // ê = ẑ × d̂ = (−d_y, d_x)
            Polarization::Te => phase * (-d[1] * t[0] + d[0] * t[1]),
        }
    }

    fn scaling(&self) -> Complex64 {
        match self.polarization {
            Polarization::Tm => Complex64::new(0.0, self.eta * self.k).inv(),
            Polarization::Te => Complex64::new(0.0, self.k / self.eta),
        }
    }
}

/// `⟨φ_i, E_z/(iηk)⟩` for TM, `⟨φ_i, (ik/η) E_t⟩` for TE.
pub fn assemble_rhs(mesh: &CurveMesh, exc: &ExcitationSpec) -> CVector {
    let n = mesh.len();
    let order = 8usize.max((2.0 + exc.k * mesh.h_max()).ceil() as usize);
    let rule = gauss_legendre(order);
    let scaling = exc.scaling();
    let mut rhs = CVector::zeros(n);
    for p in 0..n {
        let t = mesh.tangent(p);
        let h = mesh.h(p);
        let mut local = [ZERO; 2];
        for (u, w) in rule.mapped(0.0, 1.0) {
            let f = exc.field(mesh.point(p, u), t) * (w * h);
            local[0] += f * (1.0 - u);
            local[1] += f * u;
        }
        rhs[p] += local[0] * scaling;
        rhs[(p + 1) % n] += local[1] * scaling;
    }
    rhs
}

/// Dense LU solve with one step of iterative refinement.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: CVector,
    pub relative_residual: f64,
    pub condition_estimate: f64,
}

pub const SINGULAR_CONDITION: f64 = 1e15;

pub fn solve_system(a: &OperatorMatrix, b: &CVector) -> Result<Solution> {
    solve_dense(&a.entries, b)
}

pub fn solve_dense(a: &CMatrix, b: &CVector) -> Result<Solution> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::invalid(format!(
            "dimension mismatch: matrix {}x{}, vector {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = a.clone().lu();
    let condition = one_norm(a) * inverse_one_norm_estimate(&lu, n);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::SingularSystem(condition));
    }
    let mut x = lu.solve(b).ok_or(Error::SingularSystem(f64::INFINITY))?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let b_norm = b.norm();
    let residual = if b_norm == 0.0 { (a * &x).norm() } else { (b - a * &x).norm() / b_norm };
    Ok(Solution {
        x,
        relative_residual: residual,
        condition_estimate: condition,
    })
}

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `‖A⁻¹‖₁` from an LU factorization.
fn inverse_one_norm_estimate(lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> f64 {
    let solve_adjoint = |c: &CVector| -> Option<CVector> {
        // P A = L U  ⇒  Aᴴ y = c  ⇔  Uᴴ Lᴴ (P y) = c
        let z = lu.u().adjoint().solve_lower_triangular(c)?;
        let mut w = lu.l().adjoint().solve_upper_triangular(&z)?;
        lu.p().inv_permute_rows(&mut w);
        Some(w)
    };
    let mut x = CVector::from_element(n, Complex64::from(1.0 / n as f64));
    let mut estimate = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else { return f64::INFINITY };
        let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
        if y_norm <= estimate {
            break;
        }
        estimate = y_norm;
        let xi = y.map(|z| if z.norm() == 0.0 { Complex64::from(1.0) } else { z / z.norm() });
        let Some(z) = solve_adjoint(&xi) else { return f64::INFINITY };
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if zmax <= zx {
            break;
        }
        x = CVector::zeros(n);
        x[j] = Complex64::from(1.0);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, ParametricCurve};
    use crate::quadrature::adaptive_oracle;

    fn circle(a: f64, n: usize) -> CurveMesh {
        build_mesh(&ParametricCurve::circle(a).unwrap(), n).unwrap()
    }

    #[test]
    fn gram_structure() {
        let mesh = circle(1.0, 16);
        let g = assemble_g(&mesh);
        let h = mesh.h(0);
        assert!((g.entries[(3, 3)] - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((g.entries[(3, 4)] - h / 6.0).abs() < 1e-15);
        assert!((g.entries[(0, 15)] - h / 6.0).abs() < 1e-15);
        assert_eq!(g.entries[(0, 5)], 0.0);
        for i in 0..16 {
            assert!((g.entries.row(i).sum() - h).abs() < 1e-14);
        }
    }

    #[test]
    fn self_panel_matches_oracle() {
        // ∫∫ (1−u)(1−v) (−ln|h(u−v)|/2π) du dv on one straight panel
        let mesh = circle(1.0, 12);
        let asm = Assembler::new(&mesh, KernelSpec::static_unfiltered()).unwrap();
        let h = mesh.h(0);
        let m = asm.self_moments(0);
        let inner = |u: f64| {
            let f = |v: f64| (1.0 - u) * (1.0 - v) * -(h * (u - v).abs()).ln() / (2.0 * std::f64::consts::PI);
            adaptive_oracle(f, 0.0, u, 1e-14).unwrap() + adaptive_oracle(f, u, 1.0, 1e-14).unwrap()
        };
        let exact = h * h * adaptive_oracle(inner, 0.0, 1.0, 1e-13).unwrap();
        assert!((m[0][0].re - exact).abs() < 1e-10 * exact.abs(), "{} vs {exact}", m[0][0].re);
    }

    #[test]
    fn adjacent_panels_match_oracle() {
        let mesh = circle(1.0, 12);
        let asm = Assembler::new(&mesh, KernelSpec::dynamic(2.0).unwrap()).unwrap();
        let m = asm.pair_moments(0, 1);
        let (a0, a1) = mesh.segment(0);
        let (b0, b1) = mesh.segment(1);
        let (hp, hq) = (mesh.h(0), mesh.h(1));
        let spec = KernelSpec::dynamic(2.0).unwrap();
        for (a, b) in [(0, 0), (1, 0), (1, 1)] {
            let part = |im: bool| {
                let inner = |u: f64| {
                    let x = [a0[0] + u * (a1[0] - a0[0]), a0[1] + u * (a1[1] - a0[1])];
                    let f = |v: f64| {
                        let y = [b0[0] + v * (b1[0] - b0[0]), b0[1] + v * (b1[1] - b0[1])];
                        let g = spec.evaluate(norm(sub(x, y))).unwrap();
                        let basis = [1.0 - u, u][a] * [1.0 - v, v][b];
                        basis * if im { g.im } else { g.re }
                    };
                    adaptive_oracle(f, 0.0, 1.0, 1e-13).unwrap()
                };
                hp * hq * adaptive_oracle(inner, 0.0, 1.0, 1e-12).unwrap()
            };
            let exact = Complex64::new(part(false), part(true));
            assert!((m[a][b] - exact).norm() < 1e-10 * exact.norm(), "({a},{b}) {} vs {exact}", m[a][b]);
        }
    }

    #[test]
    fn circle_static_modes() {
        let a = 0.8;
        let mesh = circle(a, 128);
        let s = assemble_s(&mesh, KernelSpec::static_unfiltered()).unwrap();
        let g = assemble_g(&mesh);
        // Rayleigh quotients with cos(mθ) nodal vectors
        for (m, exact) in [(0usize, -a * f64::ln(a)), (3, a / 6.0)] {
            let v = DVector::from_fn(128, |i, _| Complex64::from((m as f64 * std::f64::consts::TAU * i as f64 / 128.0).cos()));
            let num = (v.adjoint() * &s.entries * &v)[(0, 0)].re;
            let den = (v.adjoint() * g.to_complex() * &v)[(0, 0)].re;
            assert!((num / den - exact).abs() < 1e-3, "m={m}: {} vs {exact}", num / den);
        }
        assert!(s.symmetry_defect() < 1e-14);
    }

    #[test]
    fn static_n_annihilates_constants() {
        let mesh = build_mesh(&ParametricCurve::kite(1.0).unwrap(), 48).unwrap();
        let n = assemble_n(&mesh, KernelSpec::static_unfiltered()).unwrap();
        let ones = CVector::from_element(48, Complex64::from(1.0));
        assert!((&n.entries * ones).norm() / n.entries.norm() < 1e-10);
    }

    #[test]
    fn tm_constant_field() {
        // E_z ≡ 1 arises from k → 0 in the phase; use normal incidence on
        // a tiny circle so the phase is constant to rounding.
        let mesh = circle(1e-12, 16);
        let exc = ExcitationSpec::from_angle(Polarization::Tm, 0.0, 1.0, 1.0).unwrap();
        let rhs = assemble_rhs(&mesh, &exc);
        let h = mesh.h(0);
        for z in rhs.iter() {
            assert!((z - Complex64::new(0.0, -h)).norm() < 1e-12 * h);
        }
    }

    #[test]
    fn te_rhs_mirror_symmetry() {
        let mesh = circle(1.0, 32);
        let exc = ExcitationSpec::from_angle(Polarization::Te, 0.0, 3.0, 1.0).unwrap();
        let rhs = assemble_rhs(&mesh, &exc);
        for i in 1..32 {
            assert!((rhs[i] - rhs[32 - i]).norm() < 1e-13);
        }
        let rhs2 = assemble_rhs(&mesh, &ExcitationSpec::from_angle(Polarization::Te, 0.0, 3.0, 2.0).unwrap());
        assert!((rhs.norm() / rhs2.norm() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn solves_constructed_systems() {
        let mesh = circle(1.0, 32);
        let g = assemble_g(&mesh).to_complex();
        let ones = CVector::from_element(32, Complex64::from(1.0));
        let sol = solve_dense(&g, &(&g * &ones)).unwrap();
        assert!((sol.x - &ones).norm() < 1e-12 * ones.norm());
        let singular = CMatrix::from_element(4, 4, Complex64::from(1.0));
        assert!(matches!(
            solve_dense(&singular, &CVector::zeros(4)),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn ef2d_roundtrip() {
        let mesh = circle(1.0, 10);
        let s = assemble_s(&mesh, KernelSpec::dynamic(1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_ef2d(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"EF2D");
        assert_eq!(buf.len(), 12 + 16 * 100);
        assert_eq!(read_ef2d(buf.as_slice()).unwrap(), s.entries);
    }
}
