//! Radial interaction kernels, their structural bounds, and radial moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Integral, Tolerance};

/// Spatial dimension of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_n(n: usize) -> Result<Dim> {
        match n {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::invalid("dim", format!("dimension must be 1 or 2, got {n}"))),
        }
    }

    /// Surface measure of the unit sphere in R^n.
    pub fn sphere_area(self) -> f64 {
        match self {
            Dim::One => 2.0,
            Dim::Two => 2.0 * std::f64::consts::PI,
        }
    }

    /// Volume of the unit ball in R^n.
    pub fn ball_volume(self) -> f64 {
        match self {
            Dim::One => 2.0,
            Dim::Two => std::f64::consts::PI,
        }
    }

    /// Diameter of the unit cube, `sqrt(n)`.
    pub fn cube_diameter(self) -> f64 {
        (self.n() as f64).sqrt()
    }
}

/// Radial samples of a kernel, interpolated linearly in log-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::invalid("table", "need at least two (radius, value) rows of equal length"));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("table", "radii must be positive and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table", "values must be finite"));
        }
        Ok(RadialTable { radii, values })
    }

    /// Reads a two-column CSV file `(radius, value)`; a header row is allowed.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::config(&path.display().to_string(), e.to_string()))?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::config(&path.display().to_string(), e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::config(&path.display().to_string(), format!("row {row}: expected 2 columns")));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(r), Ok(v)) => {
                    radii.push(r);
                    values.push(v);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::config(&path.display().to_string(), format!("row {row}: not numeric")))
                }
            }
        }
        RadialTable::new(radii, values)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn has_negative(&self) -> bool {
        self.values.iter().any(|&v| v < 0.0)
    }

    /// Log-log slope of the first segment; the table continues as this power
    /// law toward the origin.
    fn near_slope(&self) -> f64 {
        let (r0, r1) = (self.radii[0], self.radii[1]);
        let (v0, v1) = (self.values[0], self.values[1]);
        if v0 <= 0.0 || v1 <= 0.0 {
            return 0.0;
        }
        (v1.ln() - v0.ln()) / (r1.ln() - r0.ln())
    }

    fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r > self.radii[n - 1] {
            return 0.0;
        }
        if r <= self.radii[0] {
            let v0 = self.values[0];
            if v0 <= 0.0 {
                return v0.max(0.0);
            }
            return v0 * (r / self.radii[0]).powf(self.near_slope());
        }
        let k = self.radii.partition_point(|&x| x < r).clamp(1, n - 1);
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if v0 > 0.0 && v1 > 0.0 {
            let a = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
            (v0.ln() + a * (v1.ln() - v0.ln())).exp()
        } else {
            let a = (r - r0) / (r1 - r0);
            v0 + a * (v1 - v0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `r^(-n-2s1)` on `r < sqrt(n)`, zero beyond.
    K1,
    /// `r^(-n-2s1)` on `r < delta`, `exp(-r)` beyond.
    K2,
    /// `r^(-n-2s1)` on `r < delta`, `r^(-n-2s2)` beyond.
    K3,
    Tabulated(RadialTable),
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::K1 => "K1",
            KernelKind::K2 => "K2",
            KernelKind::K3 => "K3",
            KernelKind::Tabulated(_) => "tabulated",
        }
    }
}

/// Exponents and bound constants of the structural assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub s1: f64,
    pub s2: f64,
    pub delta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl BoundConstants {
    fn check(&self) -> Result<()> {
        let open = |x: f64, lo: f64, hi: f64| x > lo && x < hi;
        if !open(self.s1, 0.0, 0.5) {
            return Err(Error::invalid("s1", format!("must lie in (0, 1/2), got {}", self.s1)));
        }
        if !open(self.s2, 0.5, 1.0) {
            return Err(Error::invalid("s2", format!("must lie in (1/2, 1), got {}", self.s2)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.kappa1 > 0.0 && self.kappa1.is_finite()) {
            return Err(Error::invalid("kappa1", format!("must be positive, got {}", self.kappa1)));
        }
        if !(self.kappa2 >= self.kappa1 && self.kappa2.is_finite()) {
            return Err(Error::invalid(
                "kappa2",
                format!("must satisfy kappa1 <= kappa2, got kappa1 = {}, kappa2 = {}", self.kappa1, self.kappa2),
            ));
        }
        if !(self.kappa3 > 0.0 && self.kappa3.is_finite()) {
            return Err(Error::invalid("kappa3", format!("must be positive, got {}", self.kappa3)));
        }
        Ok(())
    }
}

/// Optional overrides for the bound constants; absent entries are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub kappa3: Option<f64>,
}

/// An immutable radial kernel together with its assumption constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kind: KernelKind,
    dim: Dim,
    bounds: BoundConstants,
    quad_tol: f64,
}

const DEFAULT_QUAD_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 20_000;

impl KernelSpec {
    /// `r^(-n-2s)` truncated at `sqrt(n)`. The far exponent `s2` only enters the
    /// upper envelope.
    pub fn k1(dim: Dim, s: f64, s2: f64, overrides: ConstantOverrides) -> Result<Self> {
        let root_n = dim.cube_diameter();
        let n = dim.n() as f64;
        let bounds = BoundConstants {
            s1: s,
            s2,
            delta: root_n,
            kappa1: overrides.kappa1.unwrap_or(1.0),
            // On [1, sqrt(n)) the truncated power exceeds the s2 envelope by r^(2(s2-s)).
            kappa2: overrides.kappa2.unwrap_or_else(|| n.powf(s2 - s).max(1.0)),
            kappa3: overrides.kappa3.unwrap_or_else(|| root_n.powf(-n - 2.0 * s)),
        };
        KernelSpec::assemble(KernelKind::K1, dim, bounds)
    }

    pub fn k2(dim: Dim, s: f64, s2: f64, delta: f64, overrides: ConstantOverrides) -> Result<Self> {
        KernelSpec::with_scanned_constants(KernelKind::K2, dim, s, s2, delta, overrides)
    }

    pub fn k3(dim: Dim, s: f64, big_s: f64, delta: f64, overrides: ConstantOverrides) -> Result<Self> {
        let ratio = delta.max(1.0 / delta);
        let mut o = overrides;
        if o.kappa2.is_none() && delta > 0.0 {
            o.kappa2 = Some(ratio.powf(2.0 * (big_s - s)));
        }
        KernelSpec::with_scanned_constants(KernelKind::K3, dim, s, big_s, delta, o)
    }

    pub fn tabulated(
        dim: Dim,
        table: RadialTable,
        s1: f64,
        s2: f64,
        delta: f64,
        overrides: ConstantOverrides,
    ) -> Result<Self> {
        KernelSpec::with_scanned_constants(KernelKind::Tabulated(table), dim, s1, s2, delta, overrides)
    }

    fn with_scanned_constants(
        kind: KernelKind,
        dim: Dim,
        s1: f64,
        s2: f64,
        delta: f64,
        overrides: ConstantOverrides,
    ) -> Result<Self> {
        // Provisional constants let the scans run through the normal evaluation path.
        let provisional = BoundConstants { s1, s2, delta, kappa1: 1.0, kappa2: 1.0, kappa3: 1.0 };
        provisional.check()?;
        let probe = KernelSpec { kind, dim, bounds: provisional, quad_tol: DEFAULT_QUAD_TOL };
        let kappa1 = overrides.kappa1.unwrap_or(1.0);
        let kappa2 = overrides.kappa2.unwrap_or_else(|| probe.required_kappa2(SCAN_POINTS).max(kappa1));
        let kappa3 = match overrides.kappa3 {
            Some(k) => k,
            None => probe.required_kappa3(SCAN_POINTS),
        };
        let bounds = BoundConstants { kappa1, kappa2, kappa3, ..provisional };
        KernelSpec::assemble(probe.kind, dim, bounds)
    }

    fn assemble(kind: KernelKind, dim: Dim, bounds: BoundConstants) -> Result<Self> {
        bounds.check()?;
        Ok(KernelSpec { kind, dim, bounds, quad_tol: DEFAULT_QUAD_TOL })
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(Error::invalid("quad_tol", format!("must lie in (0, 1e-2), got {tol}")));
        }
        self.quad_tol = tol;
        Ok(self)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn bounds(&self) -> &BoundConstants {
        &self.bounds
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Kernel value at distance `r > 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("kernel evaluated at distance {r}; distances must be positive")));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for inner loops; `r` must be positive.
    pub(crate) fn value(&self, r: f64) -> f64 {
        let n = self.dim.n() as f64;
        let b = &self.bounds;
        let near = |r: f64| r.powf(-n - 2.0 * b.s1);
        match &self.kind {
            KernelKind::K1 => {
                if r < self.dim.cube_diameter() {
                    near(r)
                } else {
                    0.0
                }
            }
            KernelKind::K2 => {
                if r < b.delta {
                    near(r)
                } else {
                    (-r).exp()
                }
            }
            KernelKind::K3 => {
                if r < b.delta {
                    near(r)
                } else {
                    r.powf(-n - 2.0 * b.s2)
                }
            }
            KernelKind::Tabulated(t) => t.eval(r),
        }
    }

    /// Radius beyond which the kernel vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            KernelKind::K1 => Some(self.dim.cube_diameter()),
            KernelKind::Tabulated(t) => Some(*t.radii.last().expect("nonempty table")),
            KernelKind::K2 | KernelKind::K3 => None,
        }
    }

    /// Radii where the kernel or its envelope changes formula.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match &self.kind {
            KernelKind::K1 => vec![1.0, self.dim.cube_diameter()],
            KernelKind::K2 | KernelKind::K3 => vec![self.bounds.delta, 1.0],
            KernelKind::Tabulated(t) => t.radii.clone(),
        };
        pts.retain(|r| r.is_finite() && *r > 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Exponent `a` with `K(r) ~ r^(-a)` as `r -> 0`.
    pub fn near_exponent(&self) -> f64 {
        match &self.kind {
            KernelKind::Tabulated(t) => -t.near_slope(),
            _ => self.dim.n() as f64 + 2.0 * self.bounds.s1,
        }
    }

    /// Decay exponent used to map infinite tails onto a finite interval.
    fn tail_exponent(&self) -> f64 {
        match &self.kind {
            KernelKind::K3 => self.dim.n() as f64 + 2.0 * self.bounds.s2,
            _ => self.dim.n() as f64 + 4.0,
        }
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance::relative(self.quad_tol)
    }

    /// `∫_lo^hi f(r) K(r) dr` where `f` is smooth between the supplied breakpoints
    /// and behaves like `r^weight_power` at the origin. `hi` may be infinite.
    pub fn integrate_radial<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        lo: f64,
        hi: f64,
        weight_power: f64,
        extra_breaks: &[f64],
    ) -> Result<Integral> {
        self.integrate_radial_abs(f, lo, hi, weight_power, extra_breaks, 0.0)
    }

    /// As [`KernelSpec::integrate_radial`], accepting each piece once its error
    /// estimate is below `abs_floor` even if the relative target is not met.
    pub fn integrate_radial_abs<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        lo: f64,
        hi: f64,
        weight_power: f64,
        extra_breaks: &[f64],
        abs_floor: f64,
    ) -> Result<Integral> {
        if lo < 0.0 || hi < lo {
            return Err(Error::Domain(format!("bad radial interval [{lo}, {hi}]")));
        }
        let hi = match self.support_radius() {
            Some(s) => hi.min(s),
            None => hi,
        };
        if hi <= lo {
            return Ok(Integral::ZERO);
        }
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(extra_breaks.iter().copied())
            .filter(|&r| r > lo && r < hi && r.is_finite())
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let g = |r: f64| if r > 0.0 { f(r) * self.value(r) } else { 0.0 };
        let tol = self.tolerance().with_abs(abs_floor);
        let finite_hi = if hi.is_finite() {
            hi
        } else {
            let floor = if lo > 0.0 { lo } else { 1.0 };
            cuts.last().copied().unwrap_or(floor).max(floor)
        };
        let mut edges = vec![lo];
        edges.extend(cuts.iter().copied().filter(|&c| c < finite_hi));
        edges.push(finite_hi);
        let mut total = Integral::ZERO;
        for w in edges.windows(2) {
            let (p, q) = (w[0], w[1]);
            if q <= p {
                continue;
            }
            let piece = if p == 0.0 {
                let alpha = self.near_exponent() - weight_power;
                quad::integrate_left_singular(&g, 0.0, q, alpha.max(0.0), tol)?
            } else {
                quad::integrate(&g, p, q, tol)?
            };
            total = total + piece;
        }
        if !hi.is_finite() {
            let beta = self.tail_exponent() - weight_power;
            total = total + quad::integrate_tail(&g, finite_hi, beta, tol)?;
        }
        Ok(total)
    }

    /// `∫_{R^n} |h| K(|h|) dh`.
    pub fn first_moment(&self) -> Result<f64> {
        let n = self.dim.n() as i32;
        let r = self.integrate_radial(&|r: f64| r.powi(n), 0.0, f64::INFINITY, n as f64, &[])?;
        Ok(self.dim.sphere_area() * r.value)
    }

    /// `∫_{|h| > radius} K(|h|) dh`.
    pub fn tail_mass(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("tail radius must be positive, got {radius}")));
        }
        let n = self.dim.n() as i32;
        let r = self.integrate_radial(&|r: f64| r.powi(n - 1), radius, f64::INFINITY, (n - 1) as f64, &[])?;
        Ok(self.dim.sphere_area() * r.value)
    }

    /// Upper envelope `kappa2 * min(r^(-n-2s1), r^(-n-2s2))`.
    pub fn upper_envelope(&self, r: f64) -> f64 {
        let n = self.dim.n() as f64;
        let b = &self.bounds;
        b.kappa2 * r.powf(-n - 2.0 * b.s1).min(r.powf(-n - 2.0 * b.s2))
    }

    /// Lower envelope `kappa1 * r^(-n-2s1) * 1{r < delta}`.
    pub fn lower_envelope(&self, r: f64) -> f64 {
        let b = &self.bounds;
        if r < b.delta {
            b.kappa1 * r.powf(-(self.dim.n() as f64) - 2.0 * b.s1)
        } else {
            0.0
        }
    }

    /// Deterministic radial sample grid: log-spaced points plus the two sides
    /// of every breakpoint.
    pub fn sample_radii(&self, count: usize) -> Vec<f64> {
        let mut reach = self.bounds.delta.max(self.dim.cube_diameter());
        if let Some(s) = self.support_radius() {
            reach = reach.max(s);
        }
        let lo = 1e-4 * self.bounds.delta.min(1.0);
        let hi = 20.0 * reach;
        let count = count.max(2);
        let mut r: Vec<f64> = (0..count)
            .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
            .collect();
        let mut edges = self.breakpoints();
        edges.push(self.bounds.delta);
        edges.push(self.dim.cube_diameter());
        for e in edges {
            r.push(e * (1.0 - 1e-9));
            r.push(e);
            r.push(e * (1.0 + 1e-9));
        }
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }

    /// Smallest `kappa2` for which the upper envelope holds on the sample grid.
    pub fn required_kappa2(&self, count: usize) -> f64 {
        let worst = self
            .sample_radii(count)
            .into_iter()
            .map(|r| {
                let n = self.dim.n() as f64;
                let env = r.powf(-n - 2.0 * self.bounds.s1).min(r.powf(-n - 2.0 * self.bounds.s2));
                self.value(r) / env
            })
            .fold(0.0, f64::max);
        worst * (1.0 + 1e-9)
    }

    /// Sampled infimum of the kernel over distances in `(0, sqrt(n))`.
    pub fn required_kappa3(&self, count: usize) -> f64 {
        let root_n = self.dim.cube_diameter();
        let inf = self
            .sample_radii(count)
            .into_iter()
            .chain(std::iter::once(root_n * (1.0 - 1e-12)))
            .filter(|&r| r < root_n)
            .map(|r| self.value(r))
            .fold(f64::INFINITY, f64::min);
        inf * (1.0 - 1e-12)
    }

    /// Checks the structural assumptions on a deterministic radial grid.
    pub fn validate_assumptions(&self, sample_count: usize) -> Result<AdmissibilityReport> {
        if sample_count < 100 {
            return Err(Error::Precondition(format!("sample_count must be at least 100, got {sample_count}")));
        }
        let radii = self.sample_radii(sample_count);
        let slack = 1e-12;
        let mut clauses = Vec::new();

        let mut negative = ClauseOutcome::passing("nonnegative");
        if let KernelKind::Tabulated(t) = &self.kind {
            if t.has_negative() {
                let k = t.values.iter().position(|&v| v < 0.0).expect("negative entry");
                negative.fail(t.radii[k], t.values[k]);
            }
        }
        for &r in &radii {
            let v = self.value(r);
            if !(v >= 0.0) || !v.is_finite() {
                negative.record(r, v, v >= 0.0 && v.is_finite());
            }
        }
        clauses.push(negative);

        let mut lower = ClauseOutcome::passing("lower_envelope");
        let mut upper = ClauseOutcome::passing("upper_envelope");
        for &r in &radii {
            let v = self.value(r);
            let lo = self.lower_envelope(r);
            if lo > 0.0 {
                lower.record(r, v / lo, v >= lo * (1.0 - slack));
            }
            let up = self.upper_envelope(r);
            upper.record(r, v / up, v <= up * (1.0 + slack));
        }
        clauses.push(lower);
        clauses.push(upper);

        let mut cube = ClauseOutcome::passing("unit_cube_infimum");
        let root_n = self.dim.cube_diameter();
        for r in radii.iter().copied().chain(std::iter::once(root_n * (1.0 - 1e-12))) {
            if r < root_n {
                let v = self.value(r);
                cube.record(r, v / self.bounds.kappa3, v >= self.bounds.kappa3 * (1.0 - slack));
            }
        }
        clauses.push(cube);

        let mut moment = ClauseOutcome::passing("first_moment_finite");
        match self.first_moment() {
            Ok(m) if m.is_finite() => moment.value = m,
            Ok(m) => moment.fail(f64::NAN, m),
            Err(_) => moment.fail(f64::NAN, f64::INFINITY),
        }
        clauses.push(moment);

        let admissible = clauses.iter().all(|c| c.passed);
        Ok(AdmissibilityReport { kernel: self.kind.name().to_string(), dim: self.dim.n(), clauses, admissible })
    }

    /// Fails with `Inadmissible` unless every clause holds.
    pub fn require_admissible(&self) -> Result<()> {
        let report = self.validate_assumptions(1000)?;
        if report.admissible {
            Ok(())
        } else {
            let failed: Vec<String> = report
                .clauses
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} (worst radius {:?})", c.name, c.worst_radius))
                .collect();
            Err(Error::Inadmissible(failed.join(", ")))
        }
    }
}

/// Outcome of one assumption clause.
#[derive(Debug, Clone, Serialize)]
pub struct ClauseOutcome {
    pub name: String,
    pub passed: bool,
    /// Radius of the worst violation, or of the tightest sample when passing.
    pub worst_radius: Option<f64>,
    /// Kernel-to-bound ratio (or moment value) at `worst_radius`.
    pub value: f64,
    #[serde(skip)]
    tightest: Option<f64>,
}

impl ClauseOutcome {
    fn passing(name: &str) -> Self {
        ClauseOutcome { name: name.to_string(), passed: true, worst_radius: None, value: f64::NAN, tightest: None }
    }

    fn fail(&mut self, r: f64, value: f64) {
        self.passed = false;
        self.worst_radius = Some(r);
        self.value = value;
    }

    /// Tracks the worst ratio: failures dominate, otherwise the value closest to 1.
    fn record(&mut self, r: f64, ratio: f64, ok: bool) {
        let distance = (ratio - 1.0).abs();
        if !ok {
            if self.passed || distance > (self.value - 1.0).abs() {
                self.fail(r, ratio);
            }
            return;
        }
        if self.passed && self.tightest.is_none_or(|d| distance < d) {
            self.tightest = Some(distance);
            self.worst_radius = Some(r);
            self.value = ratio;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub kernel: String,
    pub dim: usize,
    pub clauses: Vec<ClauseOutcome>,
    pub admissible: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1(dim: Dim) -> KernelSpec {
        KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap().with_quad_tol(1e-12).unwrap()
    }

    #[test]
    fn k1_values() {
        let k = k1(Dim::One);
        assert!((k.eval(0.5).unwrap() - 0.5f64.powf(-1.5)).abs() < 1e-14);
        assert!((k.eval(0.5).unwrap() - 2.828_427_124_746_19).abs() < 1e-12);
        assert_eq!(k.eval(1.5).unwrap(), 0.0);
        assert_eq!(k.eval(1.0).unwrap(), 0.0);
        assert!(matches!(k.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(k.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn k3_value_beyond_delta() {
        let k = KernelSpec::k3(Dim::One, 0.25, 0.75, 0.5, ConstantOverrides::default()).unwrap();
        assert!((k.eval(2.0).unwrap() - 0.176_776_695_296_636_9).abs() < 1e-12);
    }

    #[test]
    fn first_moments_closed_form() {
        // 2 ∫_0^1 r^{-1/2} dr = 4.
        assert!((k1(Dim::One).first_moment().unwrap() - 4.0).abs() < 1e-9);
        // 2π ∫_0^{√2} r^{-1/2} dr = 4π 2^{1/4}.
        let expected = 4.0 * std::f64::consts::PI * 2f64.powf(0.25);
        assert!((k1(Dim::Two).first_moment().unwrap() - expected).abs() < 1e-8 * expected);
        // 2(∫_0^1 r^{-1/2} + ∫_1^∞ r^{-3/2}) = 8.
        let k3 = KernelSpec::k3(Dim::One, 0.25, 0.75, 1.0, ConstantOverrides::default())
            .unwrap()
            .with_quad_tol(1e-12)
            .unwrap();
        assert!((k3.first_moment().unwrap() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn tail_mass_closed_form() {
        // K3 in 1D, delta = 1: 2 ∫_R^∞ r^{-5/2} dr = (4/3) R^{-3/2}.
        let k3 = KernelSpec::k3(Dim::One, 0.25, 0.75, 1.0, ConstantOverrides::default()).unwrap();
        let r = 2.0f64;
        assert!((k3.tail_mass(r).unwrap() - 4.0 / 3.0 * r.powf(-1.5)).abs() < 1e-10);
        assert_eq!(k1(Dim::One).tail_mass(1.0).unwrap(), 0.0);
        // K1 in 1D: 2 ∫_{1/2}^1 r^{-3/2} dr = 4(√2 − 1).
        assert!((k1(Dim::One).tail_mass(0.5).unwrap() - 4.0 * (2f64.sqrt() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn k2_exponential_tail_moment() {
        // 1D K2, delta = 0.5: 2(∫_0^{1/2} r^{-1/2} dr + ∫_{1/2}^∞ r e^{-r} dr).
        let k2 = KernelSpec::k2(Dim::One, 0.25, 0.75, 0.5, ConstantOverrides::default()).unwrap();
        let expected = 2.0 * (2.0 * 0.5f64.sqrt() + 1.5 * (-0.5f64).exp());
        assert!((k2.first_moment().unwrap() - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn validation_of_model_kernels() {
        for dim in [Dim::One, Dim::Two] {
            let report = k1(dim).validate_assumptions(10_000).unwrap();
            assert!(report.admissible, "{report:?}");
        }
        let k3 = KernelSpec::k3(Dim::Two, 0.25, 0.75, 0.5, ConstantOverrides::default()).unwrap();
        assert!(k3.validate_assumptions(10_000).unwrap().admissible);
    }

    #[test]
    fn k1_unit_constants_in_one_dimension() {
        let o = ConstantOverrides { kappa1: Some(1.0), kappa2: Some(1.0), kappa3: Some(1.0) };
        let k = KernelSpec::k1(Dim::One, 0.25, 0.75, o).unwrap();
        assert!(k.validate_assumptions(1000).unwrap().admissible);
    }

    #[test]
    fn halved_kappa2_fails_upper_clause() {
        let k2 = KernelSpec::k2(Dim::One, 0.25, 0.75, 0.5, ConstantOverrides::default()).unwrap();
        let valid = k2.bounds().kappa2;
        let o = ConstantOverrides { kappa1: Some(0.5 * valid), kappa2: Some(0.5 * valid), kappa3: None };
        let halved = KernelSpec::k2(Dim::One, 0.25, 0.75, 0.5, o).unwrap();
        let report = halved.validate_assumptions(1000).unwrap();
        let upper = report.clauses.iter().find(|c| c.name == "upper_envelope").unwrap();
        assert!(!upper.passed);
        assert!(upper.worst_radius.is_some());
        assert!(!report.admissible);
    }

    #[test]
    fn negative_table_entry_is_inadmissible() {
        let table = RadialTable::new(vec![0.1, 0.5, 1.0], vec![31.6, -1.0, 1.0]).unwrap();
        let o = ConstantOverrides { kappa1: Some(1.0), kappa2: Some(100.0), kappa3: Some(1e-3) };
        let k = KernelSpec::tabulated(Dim::One, table, 0.25, 0.75, 0.5, o).unwrap();
        let report = k.validate_assumptions(200).unwrap();
        assert!(!report.admissible);
        assert!(!report.clauses[0].passed);
    }

    #[test]
    fn tabulated_power_law_matches_k1() {
        let radii: Vec<f64> = (1..=64).map(|k| k as f64 / 64.0).collect();
        let values: Vec<f64> = radii.iter().map(|r| r.powf(-1.5)).collect();
        let table = RadialTable::new(radii, values).unwrap();
        let k = KernelSpec::tabulated(Dim::One, table, 0.25, 0.75, 1.0, ConstantOverrides::default()).unwrap();
        assert!((k.eval(0.3).unwrap() - 0.3f64.powf(-1.5)).abs() < 1e-12);
        assert!((k.eval(0.001).unwrap() - 0.001f64.powf(-1.5)).abs() < 1e-6);
        assert_eq!(k.eval(1.01).unwrap(), 0.0);
        assert!((k.first_moment().unwrap() - 4.0).abs() < 1e-7);
    }

    #[test]
    fn parameter_bounds_are_enforced() {
        let e = KernelSpec::k1(Dim::One, 0.6, 0.75, ConstantOverrides::default()).unwrap_err();
        assert!(e.to_string().contains("(0, 1/2)"));
        assert!(KernelSpec::k1(Dim::One, 0.25, 0.4, ConstantOverrides::default()).is_err());
        let o = ConstantOverrides { kappa1: Some(2.0), kappa2: Some(1.0), kappa3: None };
        assert!(KernelSpec::k1(Dim::One, 0.25, 0.75, o).is_err());
    }
}
