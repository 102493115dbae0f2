use std::path::Path;

use serde::{Deserialize, Serialize};

use cosserat::cases::case_by_name;
use cosserat::compatibility::{check_compatibility, perturb_incompatible};
use cosserat::convergence::run_convergence;
use cosserat::energy::{minimize as run_minimize, BoundarySpec, CosseratParams, MinimizeOptions, MinimizeState};
use cosserat::identities::{run_identity_suite, SuiteOptions};
use cosserat::random;
use cosserat::reconstruction::{reconstruct as run_reconstruct, Gauge};
use cosserat::{AnyField, Grid3};

use crate::output::{emit, ensure_dir, CliError, Report};
use crate::{CompatArgs, ConvergenceArgs, FieldGenArgs, IdentityArgs, MinimizeArgs, ReconstructArgs};

fn read_field(path: &Path) -> Result<AnyField, CliError> {
    AnyField::read(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_field(dir: &Path, name: &str, field: AnyField) -> Result<(), CliError> {
    emit(&field.to_json(), Some(&dir.join(name)))
}

#[derive(Serialize)]
struct IdentityConfig {
    trials: u64,
    seed: u64,
    corrupt_nye: bool,
}

pub fn check_identities(args: &IdentityArgs) -> Result<(), CliError> {
    let opts = SuiteOptions { corrupt_nye: args.corrupt_nye };
    let report = run_identity_suite(args.trials as usize, args.seed, opts);
    let config = IdentityConfig { trials: args.trials, seed: args.seed, corrupt_nye: args.corrupt_nye };
    emit(&Report::new("check-identities", config, &report).to_json(), args.output.as_deref())?;
    if report.all_passed {
        Ok(())
    } else {
        let names: Vec<_> = report.failures().map(|c| c.name).collect();
        Err(CliError::Domain(format!("identities failed: {}", names.join(", "))))
    }
}

#[derive(Serialize)]
struct ConvergenceConfig<'a> {
    case: &'a str,
    levels: usize,
    nodes: usize,
}

pub fn convergence(args: &ConvergenceArgs) -> Result<(), CliError> {
    let case = case_by_name(&args.case)?;
    let report = run_convergence(&case, args.levels, args.nodes)?;
    let path = args.output.as_deref();
    let text = if path.is_some_and(|p| p.extension().is_some_and(|e| e == "csv")) {
        report.to_csv()
    } else {
        let config = ConvergenceConfig { case: case.name, levels: args.levels, nodes: args.nodes };
        Report::new("convergence", config, &report).to_json()
    };
    emit(&text, path)
}

#[derive(Serialize)]
struct CompatConfig<'a> {
    input: &'a Path,
    tol: Option<f64>,
}

pub fn compat(args: &CompatArgs) -> Result<(), CliError> {
    let u = read_field(&args.input)?.into_mat3()?;
    let report = check_compatibility(&u, args.tol)?;
    let config = CompatConfig { input: &args.input, tol: args.tol };
    emit(&Report::new("compat", config, &report).to_json(), args.output.as_deref())?;
    if report.compatible {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "field is incompatible: residual {:.3e} > tolerance {:.3e}",
            report.max_residual, report.tolerance_used
        )))
    }
}

#[derive(Serialize)]
struct ReconstructConfig<'a> {
    input: &'a Path,
    base_node: [usize; 3],
    require_compatible: bool,
    tol: Option<f64>,
}

#[derive(Serialize)]
struct ReconstructResult {
    path_independence_error: f64,
    orthogonality_drift: f64,
    compatibility: cosserat::compatibility::CompatReport,
}

pub fn reconstruct(args: &ReconstructArgs) -> Result<(), CliError> {
    let u = read_field(&args.input)?.into_mat3()?;
    let grid = *u.grid();
    let base = [args.base_node[0], args.base_node[1], args.base_node[2]];
    if (0..3).any(|a| base[a] >= grid.dims[a]) {
        return Err(CliError::Usage(format!("base node {base:?} outside grid {:?}", grid.dims)));
    }
    let compat = check_compatibility(&u, args.tol)?;
    if args.require_compatible && !compat.compatible {
        return Err(CliError::Domain(format!(
            "field is incompatible: residual {:.3e} > tolerance {:.3e}",
            compat.max_residual, compat.tolerance_used
        )));
    }
    let rec = run_reconstruct(&u, &Gauge::identity_at(base, &grid))?;
    ensure_dir(&args.output)?;
    write_field(&args.output, "phi.json", AnyField::Vec3(rec.phi.clone()))?;
    write_field(&args.output, "rotation.json", AnyField::Rot3(rec.rotation.clone()))?;
    let d = rec.diagnostics();
    let result = ReconstructResult {
        path_independence_error: d.path_independence_error,
        orthogonality_drift: d.orthogonality_drift,
        compatibility: compat,
    };
    let config = ReconstructConfig { input: &args.input, base_node: base, require_compatible: args.require_compatible, tol: args.tol };
    emit(&Report::new("reconstruct", config, result).to_json(), Some(&args.output.join("report.json")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub dims: [usize; 3],
    /// Defaults to the unit box.
    #[serde(default)]
    pub spacing: Option<[f64; 3]>,
    #[serde(default)]
    pub origin: [f64; 3],
}

impl GridConfig {
    fn resolve(&mut self) -> Result<Grid3, CliError> {
        let spacing = *self.spacing.get_or_insert_with(|| self.dims.map(|n| 1.0 / (n.max(2) - 1) as f64));
        Ok(Grid3::new(self.dims, spacing, self.origin)?)
    }
}

/// Parameters file of `minimize`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeConfig {
    #[serde(flatten)]
    pub params: CosseratParams,
    pub bc: BoundarySpec,
    pub grid: GridConfig,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Amplitude of the random perturbation of the reference start.
    #[serde(default)]
    pub perturbation: f64,
}

fn default_max_iter() -> usize {
    MinimizeOptions::default().max_iter
}

fn default_grad_tol() -> f64 {
    MinimizeOptions::default().grad_tol
}

#[derive(Serialize)]
struct MinimizeRunConfig<'a> {
    seed: u64,
    params_file: &'a Path,
    params: &'a MinimizeConfig,
}

#[derive(Serialize)]
struct MinimizeResult<'a> {
    converged: bool,
    iterations: usize,
    final_energy: f64,
    gradient_norm: f64,
    energy_trace: &'a [f64],
}

pub fn minimize(args: &MinimizeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut config: MinimizeConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let grid = config.grid.resolve()?;
    config.params.validate()?;
    config.bc.validate()?;
    let start = MinimizeState::perturbed(grid, config.perturbation, &mut random::seeded(args.seed));
    let opts = MinimizeOptions { max_iter: config.max_iter, grad_tol: config.grad_tol, ..Default::default() };
    let out = run_minimize(&start, &config.params, &config.bc, &opts)?;

    ensure_dir(&args.output)?;
    write_field(&args.output, "phi.json", AnyField::Vec3(out.state.phi.clone()))?;
    write_field(&args.output, "rotation.json", AnyField::Rot3(out.state.rotations()))?;
    let trace = &out.state.energy_trace;
    let result = MinimizeResult {
        converged: out.converged,
        iterations: out.state.iterations,
        final_energy: *trace.last().expect("the trace holds at least the initial energy"),
        gradient_norm: out.gradient_norm,
        energy_trace: trace,
    };
    let run = MinimizeRunConfig { seed: args.seed, params_file: &args.config, params: &config };
    emit(&Report::new("minimize", run, result).to_json(), Some(&args.output.join("report.json")))
}

pub fn field_gen(args: &FieldGenArgs) -> Result<(), CliError> {
    let case = case_by_name(&args.case)?;
    let grid = Grid3::unit_cube(args.nodes)?;
    let s = case.sample_all(&grid)?;
    let stretch = match args.incompatible {
        Some(amp) => perturb_incompatible(&s.stretch, amp),
        None => s.stretch,
    };
    ensure_dir(&args.output)?;
    write_field(&args.output, "phi.json", AnyField::Vec3(s.phi))?;
    write_field(&args.output, "rotation.json", AnyField::Rot3(s.rotation))?;
    write_field(&args.output, "stretch.json", AnyField::Mat3(stretch))
}
