//! Experiment configuration: a TOML document with `[kernel]`, `[grid]`,
//! `[forcing]`, `[solver]` and `[experiment]` tables.
//!
//! Everything is validated before any computation. Unknown keys are rejected
//! and every error names the offending key path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cellsolver::{SolveOptions, SolverMethod};
use crate::error::{Error, Result};
use crate::kernel::{ConstantOverrides, Dim, KernelSpec, RadialTable};
use crate::lattice::{build_stencil, Cutoff, PairStencil, TorusGrid, WeightRule};
use crate::profile::{Direction, ForcingField};
use crate::stablenorm::{RadiusSample, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    kernel: RawKernel,
    grid: RawGrid,
    forcing: Option<RawForcing>,
    solver: Option<RawSolver>,
    experiment: Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    K1,
    K2,
    K3,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    kind: KernelFamily,
    dim: usize,
    s1: f64,
    /// Far exponent; the `S` of K3.
    s2: f64,
    delta: Option<f64>,
    table: Option<PathBuf>,
    quad_tol: Option<f64>,
    kappa1: Option<f64>,
    kappa2: Option<f64>,
    kappa3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawCutoff {
    Named(String),
    Radius(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    m: usize,
    cutoff: Option<RawCutoff>,
    weights: Option<WeightRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingKind {
    Zero,
    Cosine,
    /// Per-cell values from a CSV file with columns (cell index, value).
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    kind: ForcingKind,
    amplitude: Option<f64>,
    path: Option<PathBuf>,
}

/// Exterior data for a single plateau solve on the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlateauExterior {
    /// Cells with `p·x > t` at their centers, `p` taken from the experiment.
    Halfspace { t: f64 },
    /// Periodic 0/1 indicator, CSV with columns (cell index, value).
    Indicator { path: PathBuf },
}

/// Reads a two-column (cell index, value) CSV with a header row.
pub fn read_cell_values(path: &Path, cells: usize) -> Result<Vec<f64>> {
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::invalid(&name, e.to_string()))?;
    let mut values = vec![f64::NAN; cells];
    for (row, record) in reader.deserialize::<(usize, f64)>().enumerate() {
        let (i, v) = record.map_err(|e| Error::invalid(&name, format!("row {}: {e}", row + 1)))?;
        if i >= cells {
            return Err(Error::invalid(&name, format!("cell index {i} outside 0..{cells}")));
        }
        values[i] = v;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::invalid(&name, format!("no value for cell {i}")));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<SolverMethod>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    checkpoint_every: Option<usize>,
    step_ratio: Option<f64>,
}

fn default_samples() -> usize {
    10_000
}
fn default_periods() -> usize {
    5
}
fn one() -> usize {
    1
}
fn default_quantiles() -> usize {
    17
}
fn default_window_periods() -> usize {
    2
}
fn default_radii_cells() -> Vec<usize> {
    vec![4, 8, 16]
}
fn default_density_stride() -> usize {
    16
}
fn default_c0() -> f64 {
    0.1
}
fn default_sizes() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}
fn default_aspect() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_free_cells() -> usize {
    12
}
fn default_criteria() -> Vec<String> {
    vec!["all".to_string()]
}

/// Where the `φ` values of a recovery-sequence experiment come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhiSource {
    /// Stable norm estimates from the solved cell problems.
    #[default]
    Estimate,
    /// The flat-interface value; only meaningful for zero forcing.
    Oracle,
}

/// Which criteria of the acceptance suite apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    #[default]
    Full,
    /// One-dimensional parts only; purely planar criteria are skipped.
    #[serde(rename = "1d")]
    OneD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval2 {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortRange {
    #[serde(default)]
    pub random: usize,
}

/// The experiment to run and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    ValidateKernel {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    SolveCell {
        p: Vec<i64>,
    },
    Plateau {
        p: Vec<i64>,
        /// Defaults to the median of `T_p`.
        #[serde(default)]
        thresholds: Vec<f64>,
        #[serde(default = "default_periods")]
        periods: usize,
        /// Spacing in cells between the corners of consecutive test cubes.
        #[serde(default = "one")]
        stride: usize,
        /// Random instances compared against exhaustive enumeration.
        #[serde(default)]
        random_instances: usize,
        #[serde(default = "default_free_cells")]
        free_cells: usize,
        /// Optional single solve on the unit cube against this exterior.
        exterior: Option<PlateauExterior>,
    },
    Levelsets {
        p: Vec<i64>,
        #[serde(default = "default_quantiles")]
        thresholds: usize,
        #[serde(default = "default_window_periods")]
        window_periods: usize,
        #[serde(default = "default_radii_cells")]
        radii_cells: Vec<usize>,
        #[serde(default = "default_density_stride")]
        stride: usize,
        #[serde(default = "default_c0")]
        c0: f64,
    },
    StableNorm {
        directions: Vec<Vec<i64>>,
        #[serde(default = "default_sizes")]
        sizes: Vec<f64>,
        /// Cells per period of each level; defaults to `grid.m`.
        #[serde(default)]
        resolutions: Vec<usize>,
    },
    Gamma {
        shape: Shape,
        omega: Interval2,
        schedule: Vec<f64>,
        #[serde(default)]
        phi: PhiSource,
        #[serde(default = "default_sizes")]
        sizes: Vec<f64>,
    },
    ScanPerimeter {
        #[serde(default)]
        balls: Vec<RadiusSample>,
        #[serde(default)]
        box_sizes: Vec<f64>,
        #[serde(default = "default_aspect")]
        box_aspect: [f64; 2],
        short_range: Option<ShortRange>,
    },
    Check {
        #[serde(default = "default_criteria")]
        criteria: Vec<String>,
        #[serde(default)]
        suite: Suite,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ValidateKernel { .. } => "validate-kernel",
            Experiment::SolveCell { .. } => "solve-cell",
            Experiment::Plateau { .. } => "plateau",
            Experiment::Levelsets { .. } => "levelsets",
            Experiment::StableNorm { .. } => "stable-norm",
            Experiment::Gamma { .. } => "gamma",
            Experiment::ScanPerimeter { .. } => "scan-perimeter",
            Experiment::Check { .. } => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    pub m: usize,
    #[serde(skip)]
    pub cutoff: Cutoff,
    pub weights: WeightRule,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForcingConfig {
    pub kind: ForcingKind,
    pub amplitude: f64,
    #[serde(skip)]
    pub table: Option<std::sync::Arc<ForcingField>>,
}

/// A fully validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub kernel: KernelSpec,
    pub grid: GridConfig,
    pub forcing: ForcingConfig,
    pub solver: SolveOptions,
    pub experiment: Experiment,
    /// Hex SHA-256 of the configuration text.
    pub hash: String,
}

/// Maps a deserialization error to the table and key it concerns.
fn locate(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    let key = message.split('`').nth(1).map(str::to_string);
    // A missing field's span is the header of the table it is missing from.
    let missing = message.starts_with("missing field");
    let table = err.span().and_then(|span| {
        text[..if missing { span.end } else { span.start }.min(text.len())]
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| l.starts_with('[') && l.ends_with(']'))
            .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
    });
    // For bad values the span covers the value; the key sits left of `=` on its line.
    let value_key = err.span().and_then(|span| {
        let start = span.start.min(text.len());
        let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
        let (lhs, _) = text[line_start..start].split_once('=')?;
        let k = lhs.trim();
        (!k.is_empty() && !k.starts_with('[') && !k.contains(' ')).then(|| k.trim_matches('"').to_string())
    });
    let path = match (table, key) {
        (Some(t), Some(k)) if message.starts_with("missing field") || message.starts_with("unknown field") => {
            format!("{t}.{k}")
        }
        (Some(t), _) => match value_key {
            Some(k) => format!("{t}.{k}"),
            None => t,
        },
        (None, Some(k)) => k,
        (None, None) => "<root>".to_string(),
    };
    Error::config(&path, message)
}

/// Errors from reading a file named by `key`: reported under the key, with the file in the reason.
fn from_file(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Invalid { key: file, reason } | Error::Config { path: file, reason } => {
            Error::config(key, format!("{file}: {reason}"))
        }
        other => other,
    }
}

/// Rewrites errors from constructors as configuration errors under `table`.
fn under(table: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Invalid { key, reason } => Error::config(&format!("{table}.{key}"), reason),
        Error::Inadmissible(reason) | Error::Precondition(reason) | Error::Domain(reason) => {
            Error::config(table, reason)
        }
        other => other,
    }
}

pub fn direction(dim: Dim, p: &[i64], path: &str) -> Result<Direction> {
    match (dim, p) {
        (Dim::One, [a]) | (Dim::One, [a, 0]) => Ok([*a, 0]),
        (Dim::Two, [a, b]) => Ok([*a, *b]),
        _ => Err(Error::config(path, format!("expected {} integer components, got {p:?}", dim.n()))),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ExperimentConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses and validates; relative file names resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| locate(text, &e))?;
        let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let kernel = build_kernel(&raw.kernel, base)?;
        let dim = kernel.dim();
        let grid = build_grid(&raw.grid)?;
        let forcing = match &raw.forcing {
            None => ForcingConfig { kind: ForcingKind::Zero, amplitude: 0.0, table: None },
            Some(f) => {
                let amplitude = f.amplitude.unwrap_or(0.0);
                if !amplitude.is_finite() {
                    return Err(Error::config("forcing.amplitude", "must be finite"));
                }
                if f.kind == ForcingKind::Cosine && f.amplitude.is_none() {
                    return Err(Error::config("forcing.amplitude", "cosine forcing needs an amplitude"));
                }
                let table = match (f.kind, &f.path) {
                    (ForcingKind::Tabulated, Some(file)) => {
                        let torus = TorusGrid::new(dim, grid.m)?;
                        let values = read_cell_values(&base.join(file), torus.len()).map_err(from_file("forcing.path"))?;
                        Some(std::sync::Arc::new(ForcingField::from_values(torus, values).map_err(under("forcing"))?))
                    }
                    (ForcingKind::Tabulated, None) => {
                        return Err(Error::config("forcing.path", "required for tabulated forcing"));
                    }
                    (_, Some(_)) => return Err(Error::config("forcing.path", "only tabulated forcing reads a file")),
                    (_, None) => None,
                };
                let amplitude = table.as_ref().map_or(amplitude, |t| t.sup_norm());
                ForcingConfig { kind: f.kind, amplitude, table }
            }
        };
        let solver = build_solver(raw.solver.as_ref())?;
        validate_experiment(&raw.experiment, dim)?;
        let mut experiment = raw.experiment;
        if let Experiment::Plateau { exterior: Some(PlateauExterior::Indicator { path }), .. } = &mut experiment {
            *path = base.join(&*path);
        }
        Ok(ExperimentConfig {
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            kernel,
            grid,
            forcing,
            solver,
            experiment,
            hash,
        })
    }

    pub fn dim(&self) -> Dim {
        self.kernel.dim()
    }

    pub fn torus(&self, m: usize) -> Result<TorusGrid> {
        TorusGrid::new(self.dim(), m)
    }

    pub fn stencil(&self, m: usize) -> Result<PairStencil> {
        build_stencil(&self.kernel, m, self.grid.cutoff, self.grid.weights)
    }

    pub fn forcing_field(&self, torus: TorusGrid) -> Result<ForcingField> {
        match self.forcing.kind {
            ForcingKind::Zero => Ok(ForcingField::zero(torus)),
            ForcingKind::Cosine => ForcingField::cosine(torus, self.forcing.amplitude).map_err(under("forcing")),
            ForcingKind::Tabulated => match &self.forcing.table {
                Some(field) if field.torus() == torus => Ok((**field).clone()),
                _ => Err(Error::config("forcing.path", format!("the table is defined on the m = {} torus only", self.grid.m))),
            },
        }
    }
}

fn build_kernel(k: &RawKernel, base: &Path) -> Result<KernelSpec> {
    let dim = Dim::from_n(k.dim).map_err(|_| Error::config("kernel.dim", format!("must be 1 or 2, got {}", k.dim)))?;
    let overrides = ConstantOverrides { kappa1: k.kappa1, kappa2: k.kappa2, kappa3: k.kappa3 };
    let delta = |family: &str| {
        k.delta.ok_or_else(|| Error::config("kernel.delta", format!("required for {family}")))
    };
    let spec = match k.kind {
        KernelFamily::K1 => {
            if k.delta.is_some() || k.table.is_some() {
                return Err(Error::config("kernel", "K1 takes neither `delta` nor `table`"));
            }
            KernelSpec::k1(dim, k.s1, k.s2, overrides)
        }
        KernelFamily::K2 => KernelSpec::k2(dim, k.s1, k.s2, delta("K2")?, overrides),
        KernelFamily::K3 => KernelSpec::k3(dim, k.s1, k.s2, delta("K3")?, overrides),
        KernelFamily::Tabulated => {
            let file = k.table.as_ref().ok_or_else(|| Error::config("kernel.table", "required for tabulated kernels"))?;
            let table = RadialTable::from_csv(&base.join(file)).map_err(from_file("kernel.table"))?;
            KernelSpec::tabulated(dim, table, k.s1, k.s2, delta("tabulated kernels")?, overrides)
        }
    }
    .map_err(under("kernel"))?;
    match k.quad_tol {
        Some(t) => spec.with_quad_tol(t).map_err(under("kernel")),
        None => Ok(spec),
    }
}

fn build_grid(g: &RawGrid) -> Result<GridConfig> {
    if g.m < 2 {
        return Err(Error::config("grid.m", format!("need at least two cells per period, got {}", g.m)));
    }
    let cutoff = match &g.cutoff {
        None => Cutoff::Auto,
        Some(RawCutoff::Named(s)) if s == "auto" => Cutoff::Auto,
        Some(RawCutoff::Named(s)) => {
            return Err(Error::config("grid.cutoff", format!("expected \"auto\" or a radius, got {s:?}")));
        }
        Some(RawCutoff::Radius(r)) if *r > 0.0 && r.is_finite() => Cutoff::Radius(*r),
        Some(RawCutoff::Radius(r)) => return Err(Error::config("grid.cutoff", format!("must be positive, got {r}"))),
    };
    Ok(GridConfig { m: g.m, cutoff, weights: g.weights.unwrap_or(WeightRule::CellAverage) })
}

fn build_solver(s: Option<&RawSolver>) -> Result<SolveOptions> {
    let mut o = SolveOptions::default();
    let Some(s) = s else { return Ok(o) };
    if let Some(m) = s.method {
        o.method = m;
    }
    if let Some(t) = s.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::config("solver.tol", format!("must lie in (0, 1), got {t}")));
        }
        o.tol = t;
    }
    if let Some(k) = s.max_iter {
        if k == 0 {
            return Err(Error::config("solver.max_iter", "must be positive"));
        }
        o.max_iter = k;
    }
    if let Some(k) = s.checkpoint_every {
        if k == 0 {
            return Err(Error::config("solver.checkpoint_every", "must be positive"));
        }
        o.checkpoint_every = k;
    }
    if let Some(r) = s.step_ratio {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::config("solver.step_ratio", format!("must be positive, got {r}")));
        }
        o.step_ratio = r;
    }
    Ok(o)
}

fn positive_list(values: &[f64], path: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(path, "must not be empty"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::config(path, "entries must be positive"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(path, "entries must increase"));
    }
    Ok(())
}

fn validate_experiment(e: &Experiment, dim: Dim) -> Result<()> {
    match e {
        Experiment::ValidateKernel { samples } => {
            if *samples < 10 {
                return Err(Error::config("experiment.samples", "need at least 10 radial samples"));
            }
        }
        Experiment::SolveCell { p } => {
            direction(dim, p, "experiment.p")?;
        }
        Experiment::Plateau { p, periods, stride, free_cells, .. } => {
            direction(dim, p, "experiment.p")?;
            if *periods == 0 {
                return Err(Error::config("experiment.periods", "must be positive"));
            }
            if *stride == 0 {
                return Err(Error::config("experiment.stride", "must be positive"));
            }
            if *free_cells == 0 || *free_cells > crate::plateau::BRUTE_FORCE_LIMIT {
                return Err(Error::config(
                    "experiment.free_cells",
                    format!("must lie in 1..={}", crate::plateau::BRUTE_FORCE_LIMIT),
                ));
            }
        }
        Experiment::Levelsets { p, thresholds, window_periods, radii_cells, stride, c0 } => {
            direction(dim, p, "experiment.p")?;
            if *thresholds == 0 {
                return Err(Error::config("experiment.thresholds", "must be positive"));
            }
            if *window_periods == 0 || *stride == 0 {
                return Err(Error::config("experiment", "window_periods and stride must be positive"));
            }
            if radii_cells.contains(&0) {
                return Err(Error::config("experiment.radii_cells", "entries must be positive"));
            }
            if !(*c0 >= 0.0) {
                return Err(Error::config("experiment.c0", "must be nonnegative"));
            }
        }
        Experiment::StableNorm { directions, sizes, resolutions } => {
            if directions.is_empty() {
                return Err(Error::config("experiment.directions", "must not be empty"));
            }
            for (i, p) in directions.iter().enumerate() {
                let d = direction(dim, p, &format!("experiment.directions[{i}]"))?;
                if d == [0, 0] {
                    return Err(Error::config(&format!("experiment.directions[{i}]"), "must be nonzero"));
                }
            }
            positive_list(sizes, "experiment.sizes")?;
            if resolutions.windows(2).any(|w| w[1] <= w[0]) || resolutions.iter().any(|m| *m < 2) {
                return Err(Error::config("experiment.resolutions", "must increase and be at least 2"));
            }
        }
        Experiment::Gamma { shape, omega, schedule, sizes, .. } => {
            if shape.dim() != dim {
                return Err(Error::config("experiment.shape", "dimension does not match the kernel"));
            }
            shape.faces().map_err(under("experiment.shape"))?;
            if omega.lo.len() != dim.n() || omega.hi.len() != dim.n() {
                return Err(Error::config("experiment.omega", format!("need {} bounds per side", dim.n())));
            }
            if schedule.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) || schedule.is_empty() {
                return Err(Error::config("experiment.schedule", "entries must lie in (0, 1]"));
            }
            positive_list(sizes, "experiment.sizes")?;
        }
        Experiment::ScanPerimeter { balls, box_sizes, box_aspect, .. } => {
            if balls.iter().any(|b| !(b.r > 0.0) || b.m < 2) {
                return Err(Error::config("experiment.balls", "need r > 0 and m >= 2"));
            }
            if !box_sizes.is_empty() {
                positive_list(box_sizes, "experiment.box_sizes")?;
            }
            if box_aspect.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::config("experiment.box_aspect", "entries must be positive"));
            }
        }
        Experiment::Check { criteria, .. } => {
            crate::acceptance::parse_criteria(criteria).map_err(|e| match e {
                Error::Invalid { reason, .. } => Error::config("experiment.criteria", reason),
                other => other,
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[kernel]
kind = "k1"
dim = 1
s1 = 0.25
s2 = 0.75
[grid]
m = 16
[experiment]
kind = "solve-cell"
p = [1]
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected a configuration error, got {other}"),
        }
    }

    #[test]
    fn minimal_config() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid.m, 16);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn s1_out_of_range_names_the_key() {
        let e = parse(&BASE.replace("s1 = 0.25", "s1 = 0.6")).unwrap_err();
        assert!(e.to_string().contains("(0, 1/2)"), "{e}");
        assert_eq!(path_of(e), "kernel.s1");
    }

    #[test]
    fn missing_kernel_table() {
        let text = BASE.replace("[kernel]\nkind = \"k1\"\ndim = 1\ns1 = 0.25\ns2 = 0.75\n", "");
        let e = parse(&text).unwrap_err();
        assert!(path_of(e).contains("kernel"));
    }

    #[test]
    fn missing_field_names_the_table() {
        let e = parse(&BASE.replace("s1 = 0.25\n", "")).unwrap_err();
        assert_eq!(path_of(e), "kernel.s1");
    }

    #[test]
    fn bad_value_names_the_key() {
        let e = parse(&BASE.replace("m = 16", "m = 16\nweights = \"cells\"")).unwrap_err();
        assert_eq!(path_of(e), "grid.weights");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse(&BASE.replace("m = 16", "m = 16\nspacing = 2")).unwrap_err();
        assert_eq!(path_of(e), "grid.spacing");
    }

    #[test]
    fn wrong_direction_arity() {
        let e = parse(&BASE.replace("p = [1]", "p = [1, 1]")).unwrap_err();
        assert_eq!(path_of(e), "experiment.p");
    }
}
