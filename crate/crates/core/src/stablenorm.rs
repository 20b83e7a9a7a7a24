//! Stable norm estimates from rescaled energies of planelike level sets, the
//! flat oracle for `g ≡ 0`, direction probes, the recovery-sequence
//! experiment for polygons, and perimeter scans for balls and boxes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{functional_f, total_perimeter};
use crate::error::{Error, Result};
use crate::geometry::{extract_level_sets, ThresholdRule};
use crate::kernel::{Dim, KernelSpec};
use crate::lattice::{build_stencil, Cell, CellBox, Cutoff, PairStencil, Region, RotatedSquare, TorusGrid, WeightRule};
use crate::profile::{dot, norm, Direction, ForcingField, PeriodicProfile};
use crate::quad::{self, Tolerance};
use crate::set::{Exterior, ExteriorRule, LatticeSet};
use crate::sum;

/// Largest window materialized for a single energy evaluation.
pub const MAX_WINDOW_CELLS: usize = 16_000_000;

fn unit(p: Direction) -> Result<[f64; 2]> {
    let l = norm(p);
    if l == 0.0 {
        return Err(Error::invalid("p", "direction must be nonzero"));
    }
    Ok([p[0] as f64 / l, p[1] as f64 / l])
}

fn guard_window(b: &CellBox) -> Result<()> {
    if b.len() > MAX_WINDOW_CELLS {
        return Err(Error::TooLarge { what: "window cells".into(), requested: b.len(), limit: MAX_WINDOW_CELLS });
    }
    Ok(())
}

/// `½ ∫_{R^n} |h·p̂| K(|h|) dh`, the energy per unit area of a flat interface
/// when the forcing vanishes.
pub fn halfspace_phi_oracle(kernel: &KernelSpec, p_hat: [f64; 2]) -> Result<f64> {
    let dim = kernel.dim();
    let n = dim.n();
    let len = match dim {
        Dim::One => p_hat[0].abs(),
        Dim::Two => p_hat[0].hypot(p_hat[1]),
    };
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::invalid("p_hat", "direction must be nonzero and finite"));
    }
    let e = [p_hat[0] / len, if n == 2 { p_hat[1] / len } else { 0.0 }];
    let radial = kernel.integrate_radial(&|r: f64| r.powi(n as i32), 0.0, f64::INFINITY, n as f64, &[])?;
    let angular = match dim {
        Dim::One => 2.0 * e[0].abs(),
        Dim::Two => {
            // Split at the two zeros of cos(θ - θp) so each piece is smooth.
            let theta_p = e[1].atan2(e[0]);
            let mut cuts: Vec<f64> =
                [theta_p + PI / 2.0, theta_p - PI / 2.0].iter().map(|a| a.rem_euclid(2.0 * PI)).collect();
            cuts.sort_by(f64::total_cmp);
            let edges = [0.0, cuts[0], cuts[1], 2.0 * PI];
            let f = |t: f64| (t.cos() * e[0] + t.sin() * e[1]).abs();
            let tol = Tolerance::relative(kernel.quad_tol());
            let mut total = 0.0;
            for w in edges.windows(2) {
                if w[1] > w[0] {
                    total += quad::integrate(&f, w[0], w[1], tol)?.value;
                }
            }
            total
        }
    };
    Ok(0.5 * angular * radial.value)
}

/// The cube `Q^p_R`: a lattice box for axis directions, a square with cell
/// center membership otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CubeRegion {
    Box(CellBox),
    Rotated(RotatedSquare),
}

impl Region for CubeRegion {
    fn contains(&self, c: Cell) -> bool {
        match self {
            CubeRegion::Box(b) => b.contains(c),
            CubeRegion::Rotated(q) => q.contains(c),
        }
    }

    fn bounding_box(&self) -> CellBox {
        match self {
            CubeRegion::Box(b) => *b,
            CubeRegion::Rotated(q) => q.bounding_box(),
        }
    }

    fn covers(&self, b: &CellBox) -> bool {
        match self {
            CubeRegion::Box(x) => x.contains_box(b),
            CubeRegion::Rotated(q) => q.covers(b),
        }
    }
}

/// `Q^p_R` centred on the point of `{p·x = t}` closest to the origin.
pub fn cube_region(dim: Dim, m: usize, p: Direction, t: f64, side: f64) -> Result<CubeRegion> {
    let e = unit(p)?;
    if !(side > 0.0) {
        return Err(Error::invalid("R", format!("must be positive, got {side}")));
    }
    let l2 = norm(p).powi(2);
    let center = [t * p[0] as f64 / l2, t * p[1] as f64 / l2];
    let cells = side * m as f64;
    let axis = p[0] == 0 || p[1] == 0 || dim == Dim::One;
    if axis {
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::Alignment(format!("R = {side} is not a multiple of 1/{m}")));
        }
        let k = cells.round() as i64;
        let lo = |c: f64| (c * m as f64 - cells / 2.0).round() as i64;
        let lo = [lo(center[0]), lo(center[1])];
        Ok(CubeRegion::Box(CellBox::new(dim, lo, [lo[0] + k, lo[1] + k])))
    } else {
        Ok(CubeRegion::Rotated(RotatedSquare { m, center, axis: e, half_side: side / 2.0 }))
    }
}

/// A solved cell problem at one resolution.
#[derive(Debug, Clone, Copy)]
pub struct SolvedCell<'a> {
    pub profile: &'a Arc<PeriodicProfile>,
    pub stencil: &'a PairStencil,
    pub g: &'a ForcingField,
}

/// Median of the thresholds whose level sets have an interface in the base cell.
pub fn median_threshold(profile: &Arc<PeriodicProfile>) -> Result<f64> {
    let family = extract_level_sets(profile, profile.torus().base_box(), &ThresholdRule::default())?;
    if family.degenerate {
        return Err(Error::invalid("p", "direction must be nonzero"));
    }
    let ts: Vec<f64> = family.thresholds.iter().zip(&family.in_tp).filter(|(_, k)| **k).map(|(t, _)| *t).collect();
    if ts.is_empty() {
        return Err(Error::Precondition("no level set crosses the base cell".into()));
    }
    Ok(ts[(ts.len() - 1) / 2])
}

#[derive(Debug, Clone, Serialize)]
pub struct CubeValue {
    pub m: usize,
    pub side: f64,
    /// `F_1(E_p, Q^p_R) / R^(n-1)`.
    pub value: f64,
    pub truncation_bound: f64,
    /// Relative difference between the lattice volume of the cube and `R^n`.
    pub geometric_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelFit {
    pub m: usize,
    pub threshold: f64,
    /// `a` in the least-squares model `a + b/R` over the last three sizes.
    pub intercept: f64,
    pub slope: f64,
    /// Largest residual of that fit.
    pub fit_spread: f64,
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StableNormEstimate {
    pub p: Direction,
    pub sizes: Vec<f64>,
    pub values: Vec<CubeValue>,
    pub levels: Vec<LevelFit>,
    /// Extrapolated `φ(p/|p|)`.
    pub value: f64,
    pub error_band: f64,
    /// Correction added by extrapolating in `h` across the last two levels.
    pub resolution_correction: f64,
    pub resolution_exponent: f64,
}

/// Least squares for `y = a + b x`; returns `(a, b, max residual)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let spread = x.iter().zip(y).map(|(u, v)| (v - a - b * u).abs()).fold(0.0, f64::max);
    (a, b, spread)
}

/// `F_1(E_{p,t}, Q^p_R) / R^(n-1)` at one resolution.
pub fn cube_value(level: SolvedCell<'_>, t: f64, side: f64) -> Result<CubeValue> {
    let torus = level.profile.torus();
    let dim = torus.dim();
    let m = torus.m();
    let region = cube_region(dim, m, level.profile.direction(), t, side)?;
    let window = region.bounding_box();
    guard_window(&window)?;
    let exterior = Exterior::new(ExteriorRule::Level { profile: level.profile.clone(), t });
    let set = LatticeSet::from_exterior(torus, window, exterior);
    let f = functional_f(&set, &region, level.stencil, level.g, 1.0)?;
    let scale = side.powi(dim.n() as i32 - 1);
    let cells = window.cells().filter(|&c| region.contains(c)).count() as f64;
    let volume = side.powi(dim.n() as i32);
    Ok(CubeValue {
        m,
        side,
        value: f.total / scale,
        truncation_bound: f.truncation_bound / scale,
        geometric_error: (cells * torus.cell_volume() - volume).abs() / volume,
    })
}

/// Extrapolates `R^(1-n) F_1(E_p, Q^p_R)` in `R` at each resolution, then in
/// `h` across the last two resolutions with error exponent `1 - 2 s1`.
pub fn stable_norm_estimate(levels: &[SolvedCell<'_>], sizes: &[f64], s1: f64) -> Result<StableNormEstimate> {
    let first = levels.first().ok_or_else(|| Error::invalid("levels", "need at least one solved cell"))?;
    let p = first.profile.direction();
    if levels.iter().any(|l| l.profile.direction() != p) {
        return Err(Error::invalid("levels", "all levels must share the direction"));
    }
    if levels.windows(2).any(|w| w[1].profile.torus().m() <= w[0].profile.torus().m()) {
        return Err(Error::invalid("levels", "resolutions must increase"));
    }
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("R", "sizes must be nonempty and increasing"));
    }
    let mut values = Vec::new();
    let mut fits = Vec::new();
    for level in levels {
        let t = median_threshold(level.profile)?;
        let row =
            sizes.par_iter().map(|&r| cube_value(*level, t, r)).collect::<Result<Vec<_>>>()?;
        let tail = &row[row.len().saturating_sub(3)..];
        let x: Vec<f64> = tail.iter().map(|v| 1.0 / v.side).collect();
        let y: Vec<f64> = tail.iter().map(|v| v.value).collect();
        let (a, b, spread) = linear_fit(&x, &y);
        fits.push(LevelFit {
            m: level.profile.torus().m(),
            threshold: t,
            intercept: a,
            slope: b,
            fit_spread: spread,
            differences: row.windows(2).map(|w| w[1].value - w[0].value).collect(),
        });
        values.extend(row);
    }
    let q = 1.0 - 2.0 * s1;
    let last = fits.last().expect("one fit per level");
    let (value, correction) = match fits.len() {
        1 => (last.intercept, 0.0),
        k => {
            let prev = &fits[k - 2];
            let r = (last.m as f64 / prev.m as f64).powf(q);
            let v = (r * last.intercept - prev.intercept) / (r - 1.0);
            (v, v - last.intercept)
        }
    };
    Ok(StableNormEstimate {
        p,
        sizes: sizes.to_vec(),
        values,
        value,
        error_band: last.fit_spread + correction.abs() / 4.0,
        resolution_correction: correction,
        resolution_exponent: q,
        levels: fits,
    })
}

/// One entry of a φ table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub p: Direction,
    /// `φ(p/|p|)`.
    pub phi: f64,
    pub error: f64,
}

impl PhiEntry {
    /// `φ̃(p) = |p| φ(p/|p|)`.
    pub fn extended(&self) -> f64 {
        norm(self.p) * self.phi
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p: Direction,
    pub angle_deg: f64,
    pub phi: f64,
    pub phi_tilde: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `max |φ(p) - φ(q)| / θ(p, q)` over angular neighbours.
    pub modulus: f64,
    pub max_gap_deg: f64,
    /// Spread of `φ` among parallel directions.
    pub collinear_spread: f64,
    pub spread: f64,
}

/// Continuity table of `φ` ordered by angle.
pub fn phi_direction_sweep(entries: &[PhiEntry]) -> Result<SweepReport> {
    let mut rows: Vec<SweepRow> = entries
        .iter()
        .map(|e| {
            unit(e.p)?;
            Ok(SweepRow {
                p: e.p,
                angle_deg: (e.p[1] as f64).atan2(e.p[0] as f64).to_degrees(),
                phi: e.phi,
                phi_tilde: e.extended(),
                error: e.error,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.angle_deg.total_cmp(&b.angle_deg).then(norm(a.p).total_cmp(&norm(b.p))));
    let mut modulus = 0.0f64;
    let mut max_gap = 0.0f64;
    let mut collinear = 0.0f64;
    for w in rows.windows(2) {
        let gap = w[1].angle_deg - w[0].angle_deg;
        let dphi = (w[1].phi - w[0].phi).abs();
        if gap.abs() < 1e-9 {
            collinear = collinear.max(dphi);
        } else {
            max_gap = max_gap.max(gap);
            modulus = modulus.max(dphi / gap.to_radians());
        }
    }
    if max_gap > 30.0 + 1e-9 {
        return Err(Error::Precondition(format!("neighbouring directions are {max_gap:.1}° apart, above 30°")));
    }
    let lo = rows.iter().map(|r| r.phi).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.phi).fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport { rows, modulus, max_gap_deg: max_gap, collinear_spread: collinear, spread: hi - lo })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityTriple {
    pub p: Direction,
    pub q: Direction,
    /// `φ̃(p) + φ̃(q) - φ̃(p+q)`.
    pub margin: f64,
    /// Combined estimate error of the three values.
    pub tolerance: f64,
    pub collinear: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub triples: Vec<ConvexityTriple>,
    pub worst_margin: f64,
    /// Triples with `margin < -tolerance`.
    pub violations: usize,
    /// Collinear triples with `|margin| > tolerance`.
    pub homogeneity_failures: usize,
}

/// Subadditivity `φ̃(p+q) ≤ φ̃(p) + φ̃(q)` over every triple present in the table.
pub fn convexity_probe(entries: &[PhiEntry]) -> ConvexityReport {
    let table: BTreeMap<Direction, &PhiEntry> = entries.iter().map(|e| (e.p, e)).collect();
    let tol = |e: &PhiEntry| norm(e.p) * e.error;
    let mut triples = Vec::new();
    let keys: Vec<Direction> = table.keys().copied().collect();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i..] {
            let s = [a[0] + b[0], a[1] + b[1]];
            let Some(sum_entry) = table.get(&s) else { continue };
            if s == [0, 0] {
                continue;
            }
            let (ea, eb) = (table[a], table[b]);
            triples.push(ConvexityTriple {
                p: *a,
                q: *b,
                margin: ea.extended() + eb.extended() - sum_entry.extended(),
                tolerance: tol(ea) + tol(eb) + tol(sum_entry),
                collinear: a[0] * b[1] - a[1] * b[0] == 0 && a[0] * b[0] + a[1] * b[1] > 0,
            });
        }
    }
    let worst_margin = triples.iter().map(|t| t.margin).fold(f64::INFINITY, f64::min);
    let violations = triples.iter().filter(|t| t.margin < -t.tolerance).count();
    let homogeneity_failures = triples.iter().filter(|t| t.collinear && t.margin.abs() > t.tolerance).count();
    ConvexityReport { triples, worst_margin, violations, homogeneity_failures }
}

/// Shape whose boundary is approximated by glued planelike sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    /// Simple polygon; either orientation is accepted.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Serialize)]
pub struct Face {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Inner normal as an integer direction.
    pub p: Direction,
    pub measure: f64,
}

fn primitive(v: [f64; 2]) -> Option<Direction> {
    let l = v[0].hypot(v[1]);
    let e = [v[0] / l, v[1] / l];
    let scale = e[0].abs().max(e[1].abs());
    for k in 1..=64i64 {
        let c = [(e[0] * k as f64 / scale).round() as i64, (e[1] * k as f64 / scale).round() as i64];
        let cl = norm(c);
        if cl > 0.0 && ((c[0] as f64 / cl - e[0]).abs() + (c[1] as f64 / cl - e[1]).abs()) < 1e-9 {
            let g = gcd(c[0].abs(), c[1].abs());
            return Some([c[0] / g, c[1] / g]);
        }
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl Shape {
    pub fn dim(&self) -> Dim {
        match self {
            Shape::Interval { .. } => Dim::One,
            Shape::Polygon { .. } => Dim::Two,
        }
    }

    /// Faces with inner normals; a face whose normal is not rational is an error.
    pub fn faces(&self) -> Result<Vec<Face>> {
        match self {
            Shape::Interval { a, b } => {
                if !(b > a) {
                    return Err(Error::invalid("shape", "interval needs a < b"));
                }
                Ok(vec![
                    Face { a: [*a, 0.0], b: [*a, 0.0], p: [1, 0], measure: 1.0 },
                    Face { a: [*b, 0.0], b: [*b, 0.0], p: [-1, 0], measure: 1.0 },
                ])
            }
            Shape::Polygon { vertices } => {
                let k = vertices.len();
                if k < 3 {
                    return Err(Error::invalid("shape", "polygon needs at least three vertices"));
                }
                let area2: f64 = (0..k)
                    .map(|i| {
                        let (u, v) = (vertices[i], vertices[(i + 1) % k]);
                        u[0] * v[1] - u[1] * v[0]
                    })
                    .sum();
                if area2 == 0.0 {
                    return Err(Error::invalid("shape", "polygon has zero area"));
                }
                let sign = area2.signum();
                (0..k)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % k]);
                        let d = [b[0] - a[0], b[1] - a[1]];
                        let len = d[0].hypot(d[1]);
                        if len == 0.0 {
                            return Err(Error::invalid("shape", "repeated vertex"));
                        }
                        // For counterclockwise order the interior is on the left.
                        let inner = [-d[1] * sign, d[0] * sign];
                        let p = primitive(inner)
                            .ok_or_else(|| Error::invalid("shape", format!("face {i} has no small integer normal")))?;
                        Ok(Face { a, b, p, measure: len })
                    })
                    .collect()
            }
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self {
            Shape::Interval { a, b } => x[0] > *a && x[0] < *b,
            Shape::Polygon { vertices } => {
                let k = vertices.len();
                let mut inside = false;
                for i in 0..k {
                    let (u, v) = (vertices[i], vertices[(i + 1) % k]);
                    if (u[1] > x[1]) != (v[1] > x[1]) {
                        let cross = u[0] + (x[1] - u[1]) / (v[1] - u[1]) * (v[0] - u[0]);
                        if x[0] < cross {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

fn segment_distance(x: [f64; 2], f: &Face) -> f64 {
    let d = [f.b[0] - f.a[0], f.b[1] - f.a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let s = if l2 > 0.0 { (((x[0] - f.a[0]) * d[0] + (x[1] - f.a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (x[0] - f.a[0] - s * d[0]).hypot(x[1] - f.a[1] - s * d[1])
}

/// A planelike family member for one face direction.
#[derive(Debug, Clone)]
pub struct FaceProfile {
    pub profile: Arc<PeriodicProfile>,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub epsilon: f64,
    pub value: f64,
    pub relative_error: f64,
    pub symmetric_difference: f64,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaExperiment {
    pub shape: Shape,
    pub faces: Vec<Face>,
    pub omega: [[f64; 2]; 2],
    pub target: f64,
    pub rows: Vec<GammaRow>,
    pub error_decreasing: bool,
}

/// Builds `E_ε` by gluing `ε`-scaled level sets of each face's profile inside
/// the Voronoi cell of that face within Ω, evaluates `F_ε(E_ε, Ω)`, and
/// compares with `Σ φ(p_j) |face_j|`.
///
/// `omega` is `[lo, hi]` in physical coordinates; `lo/ε` and `hi/ε` must lie
/// on the lattice.
pub fn gamma_limsup_experiment(
    shape: &Shape,
    omega: [[f64; 2]; 2],
    schedule: &[f64],
    family: &[FaceProfile],
    stencil: &PairStencil,
    g: &ForcingField,
) -> Result<GammaExperiment> {
    let dim = shape.dim();
    let n = dim.n();
    if stencil.dim() != dim {
        return Err(Error::invalid("shape", "dimension does not match the stencil"));
    }
    let faces = shape.faces()?;
    let by_p: BTreeMap<Direction, &FaceProfile> = family.iter().map(|f| (f.profile.direction(), f)).collect();
    let mut missing: Vec<Direction> = faces.iter().map(|f| f.p).filter(|p| !by_p.contains_key(p)).collect();
    missing.dedup();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!("no solved profile for face directions {missing:?}")));
    }
    if family.iter().any(|f| f.profile.torus() != g.torus() || f.profile.torus().m() != stencil.m()) {
        return Err(Error::Precondition("profiles, forcing and stencil must share a grid".into()));
    }
    let torus = g.torus();
    let m = torus.m();
    let h = torus.spacing();
    let (olo, ohi) = (&omega[0][..n], &omega[1][..n]);
    for f in &faces {
        let inside = |x: [f64; 2]| (0..n).all(|a| x[a] > olo[a] && x[a] < ohi[a]);
        if !inside(f.a) || !inside(f.b) {
            return Err(Error::Margin("shape is not contained in Ω".into()));
        }
    }
    let target = sum::pairwise(&faces.iter().map(|f| by_p[&f.p].phi * f.measure).collect::<Vec<_>>());
    let rows = schedule
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::invalid("epsilon", format!("must lie in (0, 1], got {eps}")));
            }
            let lo: Vec<f64> = olo.iter().map(|x| x / eps).collect();
            let hi: Vec<f64> = ohi.iter().map(|x| x / eps).collect();
            let region = CellBox::from_physical(dim, m, &lo, &hi)?;
            guard_window(&region)?;
            let physical = |c: Cell| {
                let x = torus.center(c);
                [x[0] * eps, if n == 2 { x[1] * eps } else { 0.0 }]
            };
            let mut mismatched = 0usize;
            let bits: Vec<bool> = region
                .cells()
                .map(|c| {
                    let x = physical(c);
                    let j = (0..faces.len())
                        .min_by(|&a, &b| segment_distance(x, &faces[a]).total_cmp(&segment_distance(x, &faces[b])))
                        .expect("shape has faces");
                    let face = &faces[j];
                    let level = dot(face.p, face.a) / eps;
                    let label = by_p[&face.p].profile.v(c) > level;
                    if label != shape.contains(x) {
                        mismatched += 1;
                    }
                    label
                })
                .collect();
            let set = LatticeSet::from_bits(torus, region, Exterior::empty(), bits)?;
            let f = functional_f(&set, &region, stencil, g, eps)?;
            Ok(GammaRow {
                epsilon: eps,
                value: f.total,
                relative_error: (f.total - target).abs() / target.abs(),
                symmetric_difference: mismatched as f64 * (eps * h).powi(n as i32),
                truncation_bound: f.truncation_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let error_decreasing = rows.windows(2).all(|w| w[1].relative_error <= w[0].relative_error);
    Ok(GammaExperiment { shape: shape.clone(), faces, omega, target, rows, error_decreasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSample {
    pub r: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallRow {
    pub r: f64,
    pub m: usize,
    pub perimeter: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricReport {
    pub rows: Vec<BallRow>,
    /// Log-log slope over samples with `r < δ/4`.
    pub small_slope: Option<f64>,
    /// Log-log slope over samples with `r > 4δ`.
    pub large_slope: Option<f64>,
    pub delta: f64,
}

fn log_slope(rows: &[&BallRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let x: Vec<f64> = rows.iter().map(|r| r.r.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.perimeter.ln()).collect();
    Some(linear_fit(&x, &y).1)
}

fn stencils_for(kernel: &KernelSpec, ms: impl Iterator<Item = usize>, rule: WeightRule) -> Result<BTreeMap<usize, PairStencil>> {
    let mut out = BTreeMap::new();
    for m in ms {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(m) {
            e.insert(build_stencil(kernel, m, Cutoff::Auto, rule)?);
        }
    }
    Ok(out)
}

/// Lattice ball of radius `r` centred on a lattice vertex.
pub fn lattice_ball(torus: TorusGrid, r: f64) -> LatticeSet {
    let m = torus.m() as f64;
    let k = (r * m).ceil() as i64 + 1;
    let window = CellBox::new(torus.dim(), [-k, -k], [k, k]);
    LatticeSet::from_fn(torus, window, Exterior::empty(), |c| {
        let x = torus.center(c);
        match torus.dim() {
            Dim::One => x[0].abs() < r,
            Dim::Two => x[0].hypot(x[1]) < r,
        }
    })
}

/// `P_K(B_r)` for each sample, and separate log-log slopes below `δ/4` and above `4δ`.
pub fn isoperimetric_scan(kernel: &KernelSpec, samples: &[RadiusSample], rule: WeightRule) -> Result<IsoperimetricReport> {
    for s in samples {
        if s.r < 4.0 / s.m as f64 {
            return Err(Error::Precondition(format!("radius {} is below four cells at m = {}", s.r, s.m)));
        }
    }
    let stencils = stencils_for(kernel, samples.iter().map(|s| s.m), rule)?;
    let rows = samples
        .par_iter()
        .map(|s| {
            let stencil = &stencils[&s.m];
            let torus = TorusGrid::new(kernel.dim(), s.m)?;
            let ball = lattice_ball(torus, s.r);
            guard_window(ball.window())?;
            Ok(BallRow {
                r: s.r,
                m: s.m,
                perimeter: total_perimeter(&ball, stencil)?,
                cells: ball.bits().iter().filter(|b| **b).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let delta = kernel.bounds().delta;
    let small: Vec<&BallRow> = rows.iter().filter(|r| r.r < delta / 4.0).collect();
    let large: Vec<&BallRow> = rows.iter().filter(|r| r.r > 4.0 * delta).collect();
    Ok(IsoperimetricReport { small_slope: log_slope(&small), large_slope: log_slope(&large), rows, delta })
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainRow {
    pub side: f64,
    pub perimeter: f64,
    /// `P_K(Ω_R) / R^(n-1)`.
    pub ratio: f64,
    /// Shorter side below the kernel's interaction diameter.
    pub pre_asymptotic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainReport {
    pub rows: Vec<DomainRow>,
    pub max_ratio: f64,
    /// `|ratio_last / ratio_prev - 1|`.
    pub last_two_change: Option<f64>,
}

/// `P_K(R·Ω)` for the box `Ω = [0, a_1) × [0, a_2)` and each `R`.
pub fn large_domain_scan(stencil: &PairStencil, kernel: &KernelSpec, aspect: [f64; 2], sizes: &[f64]) -> Result<DomainReport> {
    let dim = stencil.dim();
    let n = dim.n();
    let torus = TorusGrid::new(dim, stencil.m())?;
    let reach = 2.0 * kernel.support_radius().unwrap_or(kernel.bounds().delta);
    let rows = sizes
        .par_iter()
        .map(|&r| {
            let hi: Vec<f64> = aspect[..n].iter().map(|a| a * r).collect();
            let b = CellBox::from_physical(dim, stencil.m(), &vec![0.0; n], &hi)?;
            guard_window(&b)?;
            let set = LatticeSet::from_fn(torus, b, Exterior::empty(), |_| true);
            let perimeter = total_perimeter(&set, stencil)?;
            let short = hi.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(DomainRow { side: r, perimeter, ratio: perimeter / r.powi(n as i32 - 1), pre_asymptotic: short < reach })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let last_two_change = match rows.len() {
        k if k >= 2 => Some((rows[k - 1].ratio / rows[k - 2].ratio - 1.0).abs()),
        _ => None,
    };
    Ok(DomainReport { rows, max_ratio, last_two_change })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub label: String,
    pub full: f64,
    pub short: f64,
    /// `None` when the short-range sum vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShortRangeReport {
    pub s: f64,
    pub delta: f64,
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
}

/// Deterministic and seeded random mean-zero profiles on the torus.
pub fn short_range_samples(torus: TorusGrid, seed: u64, random: usize) -> Vec<(String, PeriodicProfile)> {
    let mut out = Vec::new();
    let recentered = |values: Vec<f64>| {
        let mut u = PeriodicProfile::new(torus, [0, 0], values).expect("sizes match the torus");
        u.recenter();
        u
    };
    let mut bump = vec![0.0; torus.len()];
    bump[0] = 1.0;
    out.push(("bump".to_string(), recentered(bump)));
    let cosine = (0..torus.len()).map(|i| (2.0 * PI * torus.center(torus.cell(i))[0]).cos()).collect();
    out.push(("cosine".to_string(), recentered(cosine)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random {
        let values = (0..torus.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        out.push((format!("random-{k}"), recentered(values)));
    }
    out
}

/// Ratio of `∫∫_{Q×Q} |u(x)-u(y)| / |x-y|^(n+2s)` to the same sum restricted
/// to `|x-y| < δ`, for each sample, by cell-center quadrature.
pub fn short_range_ratio(samples: &[(String, PeriodicProfile)], s: f64, delta: f64) -> Result<ShortRangeReport> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::invalid("s", "must lie in (0, 1/2)"));
    }
    let rows = samples
        .par_iter()
        .map(|(label, u)| {
            let torus = u.torus();
            let n = torus.dim().n() as i32;
            let vol2 = torus.cell_volume().powi(2);
            let centers: Vec<[f64; 2]> = (0..torus.len()).map(|i| torus.center(torus.cell(i))).collect();
            let vals = u.values();
            let mut full = sum::Compensated::default();
            let mut short = sum::Compensated::default();
            for i in 0..centers.len() {
                for j in i + 1..centers.len() {
                    let r = (centers[i][0] - centers[j][0]).hypot(centers[i][1] - centers[j][1]);
                    let t = 2.0 * (vals[i] - vals[j]).abs() * r.powf(-(n as f64) - 2.0 * s) * vol2;
                    full.add(t);
                    if r < delta {
                        short.add(t);
                    }
                }
            }
            let (full, short) = (full.value(), short.value());
            Ok(RatioRow { label: label.clone(), full, short, ratio: (short > 0.0).then(|| full / short) })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ShortRangeReport { s, delta, rows, max_ratio })
}

/// `{L1 < |p̂·x - c| < L2, |p̂⊥·x| < R}` with cell center membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripRegion {
    pub m: usize,
    pub dim: Dim,
    pub axis: [f64; 2],
    pub offset: f64,
    pub inner: f64,
    pub outer: f64,
    pub half_width: f64,
}

impl StripRegion {
    fn coords(&self, c: Cell) -> (f64, f64) {
        let h = 1.0 / self.m as f64;
        let x = [(c[0] as f64 + 0.5) * h, if self.dim == Dim::Two { (c[1] as f64 + 0.5) * h } else { 0.0 }];
        let along = x[0] * self.axis[0] + x[1] * self.axis[1] - self.offset;
        let across = -x[0] * self.axis[1] + x[1] * self.axis[0];
        (along, across)
    }
}

impl Region for StripRegion {
    fn contains(&self, c: Cell) -> bool {
        let (a, b) = self.coords(c);
        a.abs() > self.inner && a.abs() < self.outer && (self.dim == Dim::One || b.abs() < self.half_width)
    }

    fn bounding_box(&self) -> CellBox {
        let m = self.m as f64;
        let e = self.axis;
        let c = [self.offset * e[0], self.offset * e[1]];
        let (ext0, ext1) = match self.dim {
            Dim::One => (self.outer, 0.0),
            Dim::Two => (
                self.outer * e[0].abs() + self.half_width * e[1].abs(),
                self.outer * e[1].abs() + self.half_width * e[0].abs(),
            ),
        };
        let lo = [((c[0] - ext0) * m).floor() as i64 - 1, ((c[1] - ext1) * m).floor() as i64 - 1];
        let hi = [((c[0] + ext0) * m).ceil() as i64 + 1, ((c[1] + ext1) * m).ceil() as i64 + 1];
        CellBox::new(self.dim, lo, hi)
    }

    fn covers(&self, b: &CellBox) -> bool {
        b.cells().all(|c| self.contains(c))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StripRow {
    pub side: f64,
    pub outer: f64,
    /// `F_1(E, A) / R^(n-1)`.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StripReport {
    pub alpha: f64,
    pub rows: Vec<StripRow>,
    pub decreasing: bool,
}

/// Energy of a level set in the far strips `A_{R, R^(1+α), R}` with
/// `α = (2 s2 - 1)/2`, normalized by `R^(n-1)`.
pub fn far_strip_probe(level: SolvedCell<'_>, t: f64, sizes: &[f64], s2: f64) -> Result<StripReport> {
    if !(s2 > 0.5 && s2 < 1.0) {
        return Err(Error::invalid("s2", "must lie in (1/2, 1)"));
    }
    let alpha = (2.0 * s2 - 1.0) / 2.0;
    let torus = level.profile.torus();
    let p = level.profile.direction();
    let e = unit(p)?;
    let rows = sizes
        .iter()
        .map(|&r| {
            let strip = StripRegion {
                m: torus.m(),
                dim: torus.dim(),
                axis: e,
                offset: t / norm(p),
                inner: r,
                outer: r.powf(1.0 + alpha),
                half_width: r,
            };
            let window = strip.bounding_box();
            guard_window(&window)?;
            let set = LatticeSet::from_exterior(
                torus,
                window,
                Exterior::new(ExteriorRule::Level { profile: level.profile.clone(), t }),
            );
            let f = functional_f(&set, &strip, level.stencil, level.g, 1.0)?;
            Ok(StripRow { side: r, outer: strip.outer, value: f.total / r.powi(torus.dim().n() as i32 - 1) })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].value <= w[0].value);
    Ok(StripReport { alpha, rows, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ConstantOverrides;

    fn k1(dim: Dim) -> KernelSpec {
        KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap()
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let one = halfspace_phi_oracle(&k1(Dim::One), [1.0, 0.0]).unwrap();
        assert!((one - 2.0).abs() < 1e-9, "{one}");
        let two = k1(Dim::Two);
        let target = 4.0 * 2f64.powf(0.25);
        for deg in [0.0f64, 30.0, 45.0, 71.0] {
            let a = deg.to_radians();
            let v = halfspace_phi_oracle(&two, [a.cos(), a.sin()]).unwrap();
            assert!((v - target).abs() < 1e-8 * target, "{deg}: {v}");
        }
    }

    #[test]
    fn flat_one_dimensional_estimate() {
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let stencil = build_stencil(&k1(Dim::One), 16, Cutoff::Auto, WeightRule::CellAverage).unwrap();
        let u = Arc::new(PeriodicProfile::zero(torus, [1, 0]));
        let g = ForcingField::zero(torus);
        let level = SolvedCell { profile: &u, stencil: &stencil, g: &g };
        let est = stable_norm_estimate(&[level], &[4.0, 8.0, 16.0], 0.25).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn convexity_of_a_norm() {
        let table: Vec<PhiEntry> = [[1, 0], [0, 1], [1, 1], [2, 0], [2, 1], [1, 2]]
            .iter()
            .map(|&p| PhiEntry { p, phi: 3.0, error: 1e-12 })
            .collect();
        let r = convexity_probe(&table);
        assert_eq!(r.violations, 0);
        assert_eq!(r.homogeneity_failures, 0);
        assert!(r.triples.iter().any(|t| t.collinear));
    }

    #[test]
    fn primitive_normals() {
        assert_eq!(primitive([0.0, 2.0]), Some([0, 1]));
        assert_eq!(primitive([-3.0, 3.0]), Some([-1, 1]));
        assert_eq!(primitive([2.0, -4.0]), Some([1, -2]));
    }

    #[test]
    fn square_faces_point_inward() {
        let sq = Shape::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let ps: Vec<Direction> = sq.faces().unwrap().iter().map(|f| f.p).collect();
        assert_eq!(ps, vec![[0, 1], [-1, 0], [0, -1], [1, 0]]);
        assert!(sq.contains([0.5, 0.5]) && !sq.contains([1.5, 0.5]));
    }

    #[test]
    fn interval_domain_ratio_is_four() {
        let k = k1(Dim::One);
        let stencil = build_stencil(&k, 8, Cutoff::Auto, WeightRule::CellAverage).unwrap();
        let r = large_domain_scan(&stencil, &k, [1.0, 1.0], &[3.0, 4.0]).unwrap();
        for row in &r.rows {
            assert!((row.ratio - 4.0).abs() < 1e-9, "{row:?}");
        }
    }
}
