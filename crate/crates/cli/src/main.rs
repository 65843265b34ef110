#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use efie2d::assembly::{assemble_rhs, solve_system, Assembler, ExcitationSpec, OperatorMatrix, Polarization};
use efie2d::experiment::{build_operator, run_spectrum, OperatorKind, SpectrumConfig};
use efie2d::geometry::{build_mesh_for_h, build_mesh_with, CurveMesh, NodePlacement, ParametricCurve};
use efie2d::kernels::{KernelFamily, KernelSpec};
use efie2d::parallel::{with_threads, Execution};
use efie2d::spectral::{cutoff_estimate, Ordering};
use efie2d::verify::{all_passed, format_table, quad_selftest, run_verify, table_json, Level, VerifyOptions};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const FREE_SPACE_IMPEDANCE: f64 = 376.730_313_668;

#[derive(Debug, Parser)]
#[command(name = "efie2d", version, about = "Spectrally filtered 2D EFIE operators")]
struct Cli {
    /// Worker threads for assembly (0 = all available cores).
    #[arg(long, global = true, env = "EFIE2D_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mode-ordered singular spectrum of S, N or the Calderón product.
    Spectrum(SpectrumArgs),
    /// Kernel values on a log-spaced grid of distances.
    KernelTrace(TraceArgs),
    /// Export an operator matrix.
    Assemble(AssembleArgs),
    /// Plane-wave scattering solve; writes the surface current.
    Solve(SolveArgs),
    /// Compare the library against independent reference computations.
    Verify(VerifyArgs),
    #[command(hide = true)]
    QuadSelftest,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("wavenumber").args(["k", "freq"])))]
struct KernelArgs {
    /// static, dynamic, static-filtered, fourier-filtered or ms-filtered.
    #[arg(long)]
    kernel: String,

    /// Wavenumber in 1/length units.
    #[arg(long)]
    k: Option<f64>,

    /// Frequency in Hz, converted with the vacuum speed of light.
    #[arg(long)]
    freq: Option<f64>,

    /// Cutoff, absolute (`8`) or as a multiple of k (`3k`).
    #[arg(long)]
    alpha: Option<String>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("resolution").required(true).args(["segments", "h", "h_over_lambda"])))]
struct MeshArgs {
    /// circle:R, ellipse:A,B, kite[:S] or polygon-smooth:N,R,D.
    #[arg(long, default_value = "circle:1")]
    curve: String,

    /// Number of segments.
    #[arg(long = "N", value_name = "N")]
    segments: Option<usize>,

    /// Target segment length.
    #[arg(long)]
    h: Option<f64>,

    /// Target segment length as a fraction of the wavelength.
    #[arg(long)]
    h_over_lambda: Option<f64>,

    /// equal-chord or equal-arclength.
    #[arg(long, default_value = "equal-chord")]
    placement: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpArg {
    #[value(name = "S")]
    S,
    #[value(name = "N")]
    N,
    Calderon,
}

impl From<OpArg> for OperatorKind {
    fn from(op: OpArg) -> Self {
        match op {
            OpArg::S => OperatorKind::S,
            OpArg::N => OperatorKind::N,
            OpArg::Calderon => OperatorKind::Calderon,
        }
    }
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    kernel: KernelArgs,

    #[arg(long, value_enum, default_value = "S", ignore_case = true)]
    op: OpArg,

    /// mode-response or overlap.
    #[arg(long, default_value = "mode-response")]
    ordering: String,

    /// CSV path; the unfiltered reference goes next to it as
    /// `<stem>.unfiltered.csv`. Without it both go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write both reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    kernel: KernelArgs,

    #[arg(long, default_value_t = 1e-3)]
    r_min: f64,

    #[arg(long, default_value_t = 1e3)]
    r_max: f64,

    #[arg(long, default_value_t = 121)]
    points: usize,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Ef2d,
    Csv,
}

#[derive(Debug, Args)]
struct AssembleArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    kernel: KernelArgs,

    #[arg(long, value_enum, default_value = "S", ignore_case = true)]
    op: OpArg,

    /// Defaults to the extension of `--out`.
    #[arg(long, value_enum)]
    format: Option<MatrixFormat>,

    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    kernel: KernelArgs,

    /// tm (solves with S) or te (solves with N).
    #[arg(long, default_value = "tm")]
    polarization: String,

    /// Incidence direction in degrees from the x axis.
    #[arg(long, default_value_t = 0.0)]
    angle: f64,

    #[arg(long, default_value_t = FREE_SPACE_IMPEDANCE)]
    eta: f64,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "quick")]
    level: String,

    /// JSON agreement table; `full` writes `verify-full.json` by default.
    #[arg(long)]
    artifact: Option<PathBuf>,

    #[arg(long, hide = true)]
    inject_ms_sign_flip: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Numeric(String),

    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<efie2d::Error> for CliError {
    fn from(e: efie2d::Error) -> Self {
        match e {
            efie2d::Error::InvalidArgument(_) | efie2d::Error::Unsupported(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Numeric(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse<T>(value: &str) -> CliResult<T>
where
    T: std::str::FromStr<Err = efie2d::Error>,
{
    value.parse().map_err(CliError::from)
}

impl KernelArgs {
    fn resolve(&self) -> CliResult<(KernelSpec, BTreeMap<String, String>)> {
        let family: KernelFamily = parse(&self.kernel)?;
        let mut extra = BTreeMap::new();
        let k = match (self.k, self.freq) {
            (Some(k), _) => k,
            (None, Some(f)) => {
                if !(f > 0.0) || !f.is_finite() {
                    return Err(CliError::Config(format!("frequency must be positive, got {f}")));
                }
                extra.insert("freq".to_string(), format!("{f}"));
                2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT
            }
            (None, None) if family.is_static() => 0.0,
            (None, None) => return Err(CliError::Config(format!("{family} kernel needs --k or --freq"))),
        };
        let alpha = match &self.alpha {
            None if family.is_filtered() => {
                return Err(CliError::Config(format!("{family} kernel needs --alpha")));
            }
            None => None,
            Some(text) => {
                let alpha = parse_alpha(text, k)?;
                if !family.is_filtered() {
                    return Err(CliError::Config(format!("--alpha given for unfiltered kernel {family}")));
                }
                Some(alpha)
            }
        };
        Ok((KernelSpec::new(family, k, alpha)?, extra))
    }
}

/// `"8"` or `"3k"` (also `"3*k"`).
fn parse_alpha(text: &str, k: f64) -> CliResult<f64> {
    let t = text.trim();
    let bad = || CliError::Config(format!("cannot parse alpha '{text}'"));
    match t.strip_suffix('k') {
        Some(factor) => {
            let factor = factor.trim().trim_end_matches('*').trim();
            let factor: f64 = if factor.is_empty() { 1.0 } else { factor.parse().map_err(|_| bad())? };
            Ok(factor * k)
        }
        None => t.parse().map_err(|_| bad()),
    }
}

impl MeshArgs {
    fn build(&self, k: f64) -> CliResult<(CurveMesh, BTreeMap<String, String>)> {
        let curve: ParametricCurve = parse(&self.curve)?;
        let placement: NodePlacement = parse(&self.placement)?;
        let mut extra = BTreeMap::new();
        let mesh = match (self.segments, self.h, self.h_over_lambda) {
            (Some(n), _, _) => build_mesh_with(&curve, n, placement)?,
            (_, Some(h), _) => {
                extra.insert("h_target".to_string(), format!("{h}"));
                build_mesh_for_h(&curve, h, placement)?
            }
            (_, _, Some(ratio)) => {
                if k <= 0.0 {
                    return Err(CliError::Config("--h-over-lambda needs a positive wavenumber".into()));
                }
                let h = ratio * 2.0 * std::f64::consts::PI / k;
                extra.insert("h_over_lambda".to_string(), format!("{ratio}"));
                extra.insert("h_target".to_string(), format!("{h}"));
                build_mesh_for_h(&curve, h, placement)?
            }
            (None, None, None) => return Err(CliError::Config("one of --N, --h, --h-over-lambda is required".into())),
        };
        Ok((mesh, extra))
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_spectrum(args: &SpectrumArgs) -> CliResult<()> {
    let (kernel, mut extra) = args.kernel.resolve()?;
    let (mesh, mesh_extra) = args.mesh.build(kernel.k())?;
    extra.extend(mesh_extra);
    let ordering: Ordering = parse(&args.ordering)?;
    let mut cfg = SpectrumConfig::new(*mesh.curve(), mesh.len(), kernel, args.op.into());
    cfg.placement = mesh.placement();
    cfg.ordering = ordering;
    let art = run_spectrum(&cfg, &extra)?;

    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            art.primary.write_csv(&mut w)?;
            w.flush()?;
            if let Some(reference) = &art.reference {
                let ref_path = sibling(path, "unfiltered.csv");
                let mut w = create(&ref_path)?;
                reference.write_csv(&mut w)?;
                w.flush()?;
                eprintln!("wrote {} and {}", path.display(), ref_path.display());
            } else {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut w = output(None)?;
            art.primary.write_csv(&mut w)?;
            if let Some(reference) = &art.reference {
                writeln!(w)?;
                reference.write_csv(&mut w)?;
            }
            w.flush()?;
        }
    }
    if let Some(path) = &args.json {
        let mut w = create(path)?;
        let primary: serde_json::Value = serde_json::from_str(&art.primary.to_json()?).map_err(json_err)?;
        let reference = match &art.reference {
            Some(r) => serde_json::from_str(&r.to_json()?).map_err(json_err)?,
            None => serde_json::Value::Null,
        };
        serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "primary": primary, "reference": reference }))
            .map_err(json_err)?;
        w.flush()?;
    }
    let resolved = kernel
        .alpha()
        .map(|a| format!(", {} modes below alpha", cutoff_estimate(&art.primary, a)))
        .unwrap_or_default();
    eprintln!(
        "N = {}, h_max = {:.4e}, k = {}{resolved}",
        art.mesh.len(),
        art.mesh.h_max(),
        kernel.k()
    );
    Ok(())
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Numeric(format!("json: {e}"))
}

fn cmd_kernel_trace(args: &TraceArgs) -> CliResult<()> {
    let (spec, extra) = args.kernel.resolve()?;
    if !(args.r_min > 0.0) || !(args.r_max > args.r_min) || !args.r_max.is_finite() {
        return Err(CliError::Config(format!(
            "need 0 < r-min < r-max, got {} and {}",
            args.r_min, args.r_max
        )));
    }
    if args.points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let (lo, hi) = (args.r_min.log10(), args.r_max.log10());
    let last = (args.points - 1) as f64;
    let mut radii: Vec<f64> = (0..args.points)
        .map(|i| 10f64.powf(lo + (hi - lo) * (i as f64 / last)))
        .collect();
    if spec.family().is_filtered() {
        radii.insert(0, 0.0);
    }
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "# kernel={}", spec.family())?;
    writeln!(w, "# k={}", spec.k())?;
    if let Some(a) = spec.alpha() {
        writeln!(w, "# alpha={a}")?;
    }
    for (key, value) in &extra {
        writeln!(w, "# {key}={value}")?;
    }
    writeln!(w, "r,re_g,im_g")?;
    for r in radii {
        let g = spec.evaluate(r)?;
        writeln!(w, "{r:.17e},{:.17e},{:.17e}", g.re, g.im)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_assemble(args: &AssembleArgs) -> CliResult<()> {
    let (kernel, _) = args.kernel.resolve()?;
    let (mesh, _) = args.mesh.build(kernel.k())?;
    let format = match args.format {
        Some(f) => f,
        None => match args.out.extension().and_then(|e| e.to_str()) {
            Some("csv") => MatrixFormat::Csv,
            Some("ef2d") | Some("bin") => MatrixFormat::Ef2d,
            _ => return Err(CliError::Config("cannot infer --format from the output extension".into())),
        },
    };
    let a: OperatorMatrix = build_operator(&mesh, kernel, args.op.into(), Execution::Parallel)?;
    let mut w = create(&args.out)?;
    match format {
        MatrixFormat::Ef2d => a.write_ef2d(&mut w)?,
        MatrixFormat::Csv => a.write_csv(&mut w)?,
    }
    w.flush()?;
    eprintln!("wrote {}x{} {} to {}", a.dim(), a.dim(), a.label, args.out.display());
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let (kernel, extra) = args.kernel.resolve()?;
    let (mesh, mesh_extra) = args.mesh.build(kernel.k())?;
    let polarization: Polarization = parse(&args.polarization)?;
    let exc = ExcitationSpec::from_angle(polarization, args.angle.to_radians(), kernel.k(), args.eta)?;
    let asm = Assembler::new(&mesh, kernel)?;
    let a = match polarization {
        Polarization::Tm => asm.single_layer(),
        Polarization::Te => asm.hypersingular(),
    };
    let sol = solve_system(&a, &assemble_rhs(&mesh, &exc))?;

    let mut w = output(args.out.as_deref())?;
    writeln!(w, "# curve={}", mesh.curve())?;
    writeln!(w, "# N={}", mesh.len())?;
    writeln!(w, "# kernel={}", kernel.family())?;
    writeln!(w, "# k={}", kernel.k())?;
    if let Some(alpha) = kernel.alpha() {
        writeln!(w, "# alpha={alpha}")?;
    }
    writeln!(w, "# polarization={}", args.polarization.to_lowercase())?;
    writeln!(w, "# angle_deg={}", args.angle)?;
    writeln!(w, "# eta={}", args.eta)?;
    for (key, value) in extra.iter().chain(&mesh_extra) {
        writeln!(w, "# {key}={value}")?;
    }
    writeln!(w, "# relative_residual={:e}", sol.relative_residual)?;
    writeln!(w, "# condition_estimate={:e}", sol.condition_estimate)?;
    writeln!(w, "node,x,y,re_j,im_j,abs_j")?;
    for (i, z) in sol.x.iter().enumerate() {
        let p = mesh.node(i);
        writeln!(w, "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", p[0], p[1], z.re, z.im, z.norm())?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let level: Level = parse(&args.level)?;
    let results = run_verify(VerifyOptions {
        level,
        flip_ms_sign: args.inject_ms_sign_flip,
    });
    print!("{}", format_table(&results));
    let artifact = match (&args.artifact, level) {
        (Some(p), _) => Some(p.clone()),
        (None, Level::Full) => Some(PathBuf::from("verify-full.json")),
        (None, Level::Quick) => None,
    };
    if let Some(path) = artifact {
        let mut w = create(&path)?;
        w.write_all(table_json(&results)?.as_bytes())?;
        w.flush()?;
        eprintln!("wrote {}", path.display());
    }
    report(&results)
}

fn report(results: &[efie2d::verify::CheckResult]) -> CliResult<()> {
    if all_passed(results) {
        return Ok(());
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    Err(CliError::Verify(failed.join(", ")))
}

fn cmd_quad_selftest() -> CliResult<()> {
    let results = quad_selftest();
    print!("{}", format_table(&results));
    report(&results)
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = match cli.threads {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    };
    let command = cli.command;
    with_threads(threads, move || match &command {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::KernelTrace(a) => cmd_kernel_trace(a),
        Command::Assemble(a) => cmd_assemble(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::QuadSelftest => cmd_quad_selftest(),
    })?
}

fn main() -> ExitCode {
    let args = match config::merge_config_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
