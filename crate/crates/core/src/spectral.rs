//! Laplace–Beltrami mode orderings, mode responses and singular-value
//! spectra of operator matrices.

use crate::assembly::{assemble_g, assemble_stiffness, CMatrix, GramMatrix, MatrixForm, OperatorMatrix};
use crate::error::{Error, Result};
use crate::geometry::CurveMesh;
use crate::kernels::KernelSpec;
use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// Generalized eigenpairs of the hat-function stiffness and mass matrices.
#[derive(Debug, Clone)]
pub struct LaplaceBeltramiBasis {
    eigenvalues: Vec<f64>,
    /// Columns are G-orthonormal eigenvectors.
    eigenvectors: DMatrix<f64>,
    mesh_tag: String,
}

impl LaplaceBeltramiBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn mesh_tag(&self) -> &str {
        &self.mesh_tag
    }
}

/// Angular index of LB mode `n` on a circle: 0, 1, 1, 2, 2, ….
pub fn circle_angular_index(n: usize) -> usize {
    n.div_ceil(2)
}

fn gram_cholesky(g: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(g.clone()).ok_or_else(|| Error::invalid("Gram matrix is not symmetric positive definite"))
}

pub fn build_lb_basis(mesh: &CurveMesh) -> Result<LaplaceBeltramiBasis> {
    let g = assemble_g(mesh);
    let l = assemble_stiffness(mesh);
    let n = mesh.len();
    let chol = gram_cholesky(&g.entries)?;
    let c = chol.l();
    // C⁻¹ L C⁻ᵀ with G = C Cᵀ
    let left = c
        .solve_lower_triangular(&l)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let mut a = c
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let y = DMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    let mut u = c
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let mut mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    mu[0] = 0.0;
    orient_degenerate_pairs(&mut u, &mu, &g.entries);
    Ok(LaplaceBeltramiBasis {
        eigenvalues: mu,
        eigenvectors: u,
        mesh_tag: mesh.tag(),
    })
}

/// Within each cluster of equal eigenvalues, rotate the basis so that it
/// diagonalizes the node reflection `i → −i (mod N)`, symmetric vectors
/// first, and fix signs so the first significant entry is positive.
fn orient_degenerate_pairs(u: &mut DMatrix<f64>, mu: &[f64], g: &DMatrix<f64>) {
    let n = mu.len();
    let scale = mu.last().copied().unwrap_or(1.0).max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (mu[end] - mu[start]).abs() <= 1e-8 * scale {
            end += 1;
        }
        let d = end - start;
        if d > 1 {
            let block = u.columns(start, d).into_owned();
            let reflected = DMatrix::from_fn(n, d, |r, c| block[((n - r) % n, c)]);
            let m = block.transpose() * g * reflected;
            let m = (&m + m.transpose()) * 0.5;
            let eig = SymmetricEigen::new(m);
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let v = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, idx[c])]);
            let rotated = block * v;
            u.columns_mut(start, d).copy_from(&rotated);
        }
        start = end;
    }
    for c in 0..n {
        let col = u.column(c);
        let peak = col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-6 * peak) {
            if *first < 0.0 {
                u.column_mut(c).neg_mut();
            }
        }
    }
}

/// Convention for pairing operator responses with LB modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    /// `σ_n = ‖T u_n‖_G` for the operator `T` on coefficients.
    #[default]
    ModeResponse,
    /// Singular values matched to LB modes by maximal singular-vector
    /// overlap.
    Overlap,
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordering::ModeResponse => "mode-response",
            Ordering::Overlap => "overlap",
        })
    }
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode-response" | "mode" => Ok(Self::ModeResponse),
            "overlap" => Ok(Self::Overlap),
            other => Err(Error::invalid(format!("unknown ordering '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub mu: f64,
    pub sqrt_mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
    pub operator: String,
    pub kernel: Option<KernelSpec>,
    pub mesh_tag: String,
    pub ordering: Ordering,
    /// Resolved run configuration, written as header comments.
    pub metadata: BTreeMap<String, String>,
}

impl SpectrumReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sigma).collect()
    }

    fn kernel_columns(&self) -> (String, String, String) {
        match &self.kernel {
            Some(spec) => (
                spec.family().name().to_string(),
                format!("{}", spec.k()),
                spec.alpha().map(|a| format!("{a}")).unwrap_or_default(),
            ),
            None => (String::new(), String::new(), String::new()),
        }
    }

    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> Result<()> {
        let (family, k, alpha) = self.kernel_columns();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n, r.mu, r.sqrt_mu, r.sigma, self.operator, family, k, alpha
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write_csv_header(&mut out, &self.metadata)?;
        self.write_csv_rows(&mut out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("json: {e}")))
    }
}

pub const CSV_COLUMNS: &str = "n,mu_n,sqrt_mu_n,sigma_n,operator,kernel_family,k,alpha";

/// `# key=value` comment lines followed by the column header.
pub fn write_csv_header<W: Write>(out: &mut W, metadata: &BTreeMap<String, String>) -> Result<()> {
    for (key, value) in metadata {
        writeln!(out, "# {key}={value}")?;
    }
    writeln!(out, "{CSV_COLUMNS}")?;
    Ok(())
}

fn split_complex(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join_complex(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    re.zip_map(im, Complex64::new)
}

fn gram_solve(chol: &Cholesky<f64, Dyn>, b: &CMatrix) -> CMatrix {
    let (re, im) = split_complex(b);
    join_complex(&chol.solve(&re), &chol.solve(&im))
}

fn check_dims(a: &OperatorMatrix, basis: &LaplaceBeltramiBasis, g: &GramMatrix) -> Result<()> {
    let n = a.dim();
    if a.entries.ncols() != n || basis.len() != n || g.dim() != n {
        return Err(Error::invalid(format!(
            "dimension mismatch: operator {}x{}, basis {}, Gram {}",
            a.entries.nrows(),
            a.entries.ncols(),
            basis.len(),
            g.dim()
        )));
    }
    Ok(())
}

/// Mode-wise G-norm responses of the operator, in ascending LB order.
pub fn order_by_lb_modes(a: &OperatorMatrix, basis: &LaplaceBeltramiBasis, g: &GramMatrix) -> Result<SpectrumReport> {
    check_dims(a, basis, g)?;
    let chol = gram_cholesky(&g.entries)?;
    let u = basis.eigenvectors().map(Complex64::from);
    let au = &a.entries * &u;
    let gc = g.to_complex();
    // ‖x‖²_G for x = G⁻¹(Au) is (Au)ᴴ G⁻¹ (Au); for a coefficient-space
    // operator it is (Au)ᴴ G (Au)
    let weighted = match a.form {
        MatrixForm::Galerkin => gram_solve(&chol, &au),
        MatrixForm::Coefficient => &gc * &au,
    };
    let gu = &g.entries * basis.eigenvectors();
    let rows = (0..basis.len())
        .map(|n| {
            let num: f64 = au
                .column(n)
                .iter()
                .zip(weighted.column(n).iter())
                .map(|(x, y)| (x.conj() * y).re)
                .sum();
            let den: f64 = basis.eigenvectors().column(n).dot(&gu.column(n));
            let mu = basis.eigenvalues()[n];
            SpectrumRow {
                n,
                mu,
                sqrt_mu: mu.sqrt(),
                sigma: (num.max(0.0) / den).sqrt(),
            }
        })
        .collect();
    Ok(report(a, rows, Ordering::ModeResponse))
}

fn report(a: &OperatorMatrix, rows: Vec<SpectrumRow>, ordering: Ordering) -> SpectrumReport {
    SpectrumReport {
        rows,
        operator: a.label.clone(),
        kernel: a.kernel,
        mesh_tag: a.mesh_tag.clone(),
        ordering,
        metadata: BTreeMap::new(),
    }
}

/// Singular values of the operator in the G-geometry, each assigned to the
/// LB mode whose whitened eigenvector has the largest overlap with an
/// unused right singular vector.
pub fn order_by_overlap(a: &OperatorMatrix, basis: &LaplaceBeltramiBasis, g: &GramMatrix) -> Result<SpectrumReport> {
    check_dims(a, basis, g)?;
    let n = a.dim();
    let chol = gram_cholesky(&g.entries)?;
    let c = chol.l().map(Complex64::from);
    let galerkin = match a.form {
        MatrixForm::Galerkin => a.entries.clone(),
        MatrixForm::Coefficient => g.to_complex() * &a.entries,
    };
    // B = C⁻¹ A C⁻ᵀ
    let left = c
        .solve_lower_triangular(&galerkin)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let b = c
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?
        .transpose();
    let svd = b.try_svd(false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested right singular vectors");
    let y = (chol.l().transpose() * basis.eigenvectors()).map(Complex64::from);
    let overlap = v_t.conjugate() * &y;
    let mut used = vec![false; n];
    let rows = (0..n)
        .map(|mode| {
            let mut best = (usize::MAX, -1.0);
            for j in 0..n {
                let w = overlap[(j, mode)].norm_sqr();
                if !used[j] && w > best.1 {
                    best = (j, w);
                }
            }
            used[best.0] = true;
            let mu = basis.eigenvalues()[mode];
            SpectrumRow {
                n: mode,
                mu,
                sqrt_mu: mu.sqrt(),
                sigma: svd.singular_values[best.0],
            }
        })
        .collect();
    Ok(report(a, rows, Ordering::Overlap))
}

pub fn spectrum_report(
    a: &OperatorMatrix,
    basis: &LaplaceBeltramiBasis,
    g: &GramMatrix,
    ordering: Ordering,
) -> Result<SpectrumReport> {
    match ordering {
        Ordering::ModeResponse => order_by_lb_modes(a, basis, g),
        Ordering::Overlap => order_by_overlap(a, basis, g),
    }
}

/// `G⁻¹SG⁻¹N`, by Cholesky solves against `G`.
pub fn calderon_product(s: &OperatorMatrix, n: &OperatorMatrix, g: &GramMatrix) -> Result<OperatorMatrix> {
    let dim = g.dim();
    if s.dim() != dim || n.dim() != dim || s.entries.ncols() != dim || n.entries.ncols() != dim {
        return Err(Error::invalid("calderon_product: dimension mismatch"));
    }
    let chol = gram_cholesky(&g.entries)?;
    let right = gram_solve(&chol, &n.entries);
    let product = gram_solve(&chol, &(&s.entries * right));
    Ok(OperatorMatrix::new(product, format!("G^-1 {} G^-1 {}", s.label, n.label), s.kernel, s.mesh_tag.clone())
        .with_form(MatrixForm::Coefficient))
}

/// Allowed relative mismatch between `sum sigma^2` and `|A|_F^2`.
pub const SVD_ENERGY_TOL: f64 = 1e-10;

/// All singular values, descending. Only the values are computed; their
/// squares must account for the Frobenius norm of the matrix.
pub fn full_svd_spectrum(a: &OperatorMatrix) -> Result<Vec<f64>> {
    if a.dim() > 4096 {
        return Err(Error::invalid(format!("dense SVD limited to N <= 4096, got {}", a.dim())));
    }
    let values = a
        .entries
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?
        .singular_values;
    let energy = a.entries.norm_squared();
    if energy > 0.0 {
        let defect = (values.norm_squared() - energy).abs() / energy;
        if defect > SVD_ENERGY_TOL {
            return Err(Error::Numeric(format!("singular values miss the Frobenius norm by {defect:e}")));
        }
    }
    let mut values: Vec<f64> = values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// First mode whose spatial frequency `√μ_n` exceeds `alpha`, or the
/// report length when none does.
pub fn cutoff_estimate(report: &SpectrumReport, alpha: f64) -> usize {
    report
        .rows
        .iter()
        .position(|r| r.sqrt_mu > alpha)
        .unwrap_or(report.rows.len())
}
