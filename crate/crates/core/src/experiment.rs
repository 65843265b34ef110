//! End-to-end spectral experiments: mesh, assemble, order by LB modes and
//! emit reports with their resolved configuration.

use crate::assembly::{assemble_g, Assembler, OperatorMatrix, QuadratureOrders};
use crate::error::{Error, Result};
use crate::geometry::{build_mesh_with, CurveMesh, NodePlacement, ParametricCurve};
use crate::kernels::KernelSpec;
use crate::parallel::Execution;
use crate::spectral::{build_lb_basis, calderon_product, spectrum_report, Ordering, SpectrumReport};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    S,
    N,
    Calderon,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::S => "S",
            OperatorKind::N => "N",
            OperatorKind::Calderon => "calderon",
        })
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Self::S),
            "N" | "n" => Ok(Self::N),
            "calderon" | "C" | "c" => Ok(Self::Calderon),
            other => Err(Error::invalid(format!("unknown operator '{other}' (expected S, N or calderon)"))),
        }
    }
}

/// Mesh and operator choices for [`run_spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub curve: ParametricCurve,
    pub segments: usize,
    pub placement: NodePlacement,
    pub kernel: KernelSpec,
    pub operator: OperatorKind,
    pub ordering: Ordering,
    pub execution: Execution,
}

impl SpectrumConfig {
    pub fn new(curve: ParametricCurve, segments: usize, kernel: KernelSpec, operator: OperatorKind) -> Self {
        Self {
            curve,
            segments,
            placement: NodePlacement::default(),
            kernel,
            operator,
            ordering: Ordering::default(),
            execution: Execution::default(),
        }
    }

    /// Key/value description written into every artifact header.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("curve".into(), self.curve.to_string());
        m.insert("N".into(), self.segments.to_string());
        m.insert("placement".into(), self.placement.to_string());
        m.insert("kernel".into(), self.kernel.family().name().into());
        m.insert("k".into(), format!("{}", self.kernel.k()));
        if let Some(a) = self.kernel.alpha() {
            m.insert("alpha".into(), format!("{a}"));
        }
        m.insert("op".into(), self.operator.to_string());
        m.insert("ordering".into(), self.ordering.to_string());
        m
    }
}

/// Report for the configured kernel and, for filtered kernels, the report
/// of the matching unfiltered kernel on the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumArtifacts {
    pub primary: SpectrumReport,
    pub reference: Option<SpectrumReport>,
    pub mesh: CurveMesh,
}

/// Operator matrix of the requested kind. The Calderón product uses the
/// same kernel in both factors.
pub fn build_operator(mesh: &CurveMesh, kernel: KernelSpec, op: OperatorKind, execution: Execution) -> Result<OperatorMatrix> {
    let asm = Assembler::with_options(mesh, kernel, QuadratureOrders::default(), execution)?;
    Ok(match op {
        OperatorKind::S => asm.single_layer(),
        OperatorKind::N => asm.hypersingular(),
        OperatorKind::Calderon => {
            let pair = asm.both();
            calderon_product(&pair.s, &pair.n, &assemble_g(mesh))?
        }
    })
}

pub fn run_spectrum(config: &SpectrumConfig, extra_metadata: &BTreeMap<String, String>) -> Result<SpectrumArtifacts> {
    let mesh = build_mesh_with(&config.curve, config.segments, config.placement)?;
    let g = assemble_g(&mesh);
    let basis = build_lb_basis(&mesh)?;
    let mut metadata = config.metadata();
    metadata.extend(extra_metadata.iter().map(|(k, v)| (k.clone(), v.clone())));
    let report_for = |kernel: KernelSpec| -> Result<SpectrumReport> {
        let a = build_operator(&mesh, kernel, config.operator, config.execution)?;
        let mut r = spectrum_report(&a, &basis, &g, config.ordering)?;
        r.metadata = metadata.clone();
        Ok(r)
    };
    let primary = report_for(config.kernel)?;
    let reference = if config.kernel.family().is_filtered() {
        Some(report_for(config.kernel.unfiltered())?)
    } else {
        None
    };
    Ok(SpectrumArtifacts {
        primary,
        reference,
        mesh,
    })
}

impl SpectrumArtifacts {
    /// CSV bytes of the primary report.
    pub fn primary_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.primary.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn reference_csv(&self) -> Result<Option<Vec<u8>>> {
        self.reference
            .as_ref()
            .map(|r| {
                let mut buf = Vec::new();
                r.write_csv(&mut buf)?;
                Ok(buf)
            })
            .transpose()
    }
}
