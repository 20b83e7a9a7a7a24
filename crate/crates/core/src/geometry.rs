//! Level sets of `v_p = u + p·x` and measurements on them: oscillation, slab
//! width, density ratios, the discrete layer-cake identity, and the cube count
//! behind the perimeter lower bound.

use std::sync::Arc;

use serde::Serialize;

use crate::energy::{cell_pair_terms, perimeter};
use crate::error::{Error, Result};
use crate::kernel::Dim;
use crate::lattice::{Cell, CellBox, PairStencil};
use crate::profile::{norm, Direction, PeriodicProfile};
use crate::set::{Exterior, ExteriorRule, LatticeSet};
use crate::sum::{self, Compensated};

/// How thresholds are picked from the values of `v_p` on the base cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Interior quantiles at levels `k / (count + 1)`, moved to the middle of
    /// the gap between neighboring distinct values.
    Quantiles(usize),
    Explicit(Vec<f64>),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Quantiles(17)
    }
}

/// Strict super-level sets `{v_p > t}` on a common window.
#[derive(Debug, Clone)]
pub struct LevelSetFamily {
    pub p: Direction,
    pub thresholds: Vec<f64>,
    pub sets: Vec<LatticeSet>,
    /// Whether the boundary of each set meets the base cell.
    pub in_tp: Vec<bool>,
    /// `v_p` is constant, so every threshold gives the empty or full set.
    pub degenerate: bool,
}

impl LevelSetFamily {
    /// `E_{t2} ⊆ E_{t1}` for every pair of consecutive thresholds.
    pub fn is_nested(&self) -> bool {
        self.sets.windows(2).all(|w| w[1].bits().iter().zip(w[0].bits()).all(|(b, a)| !*b || *a))
    }
}

fn base_values(u: &PeriodicProfile) -> Vec<f64> {
    let torus = u.torus();
    (0..torus.len()).map(|i| u.v(torus.cell(i))).collect()
}

/// Thresholds from the rule, never equal to a value of `v_p` on the base cell.
fn thresholds(values: &[f64], rule: &ThresholdRule) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    match rule {
        ThresholdRule::Explicit(ts) => {
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            ts
        }
        ThresholdRule::Quantiles(count) => {
            if sorted.len() < 2 {
                return sorted;
            }
            let n = values.len();
            let mut all = values.to_vec();
            all.sort_by(f64::total_cmp);
            let mut out: Vec<f64> = (1..=*count)
                .map(|k| {
                    let q = all[((k * n) / (count + 1)).min(n - 1)];
                    let j = sorted.partition_point(|v| *v < q).clamp(1, sorted.len() - 1);
                    0.5 * (sorted[j - 1] + sorted[j])
                })
                .collect();
            out.dedup();
            out
        }
    }
}

/// Cells of `b` that have an axis neighbor with the other label.
fn boundary_cells<'a>(set: &'a LatticeSet, b: &'a CellBox) -> impl Iterator<Item = Cell> + 'a {
    let axes: &[Cell] = match set.dim() {
        Dim::One => &[[1, 0], [-1, 0]],
        Dim::Two => &[[1, 0], [-1, 0], [0, 1], [0, -1]],
    };
    b.cells().filter(move |&c| {
        let mine = set.contains(c);
        axes.iter().any(|d| set.contains([c[0] + d[0], c[1] + d[1]]) != mine)
    })
}

/// Level sets `{v_p > t}` over `window`, continued outside by the same rule.
pub fn extract_level_sets(u: &Arc<PeriodicProfile>, window: CellBox, rule: &ThresholdRule) -> Result<LevelSetFamily> {
    let torus = u.torus();
    let values = base_values(u);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = u.direction() == [0, 0] && lo == hi;
    let ts = if degenerate { vec![lo] } else { thresholds(&values, rule) };
    if ts.is_empty() {
        return Err(Error::invalid("thresholds", "no thresholds selected"));
    }
    let base = torus.base_box();
    let mut sets = Vec::with_capacity(ts.len());
    let mut in_tp = Vec::with_capacity(ts.len());
    for &t in &ts {
        let exterior = Exterior::new(ExteriorRule::Level { profile: u.clone(), t });
        let set = LatticeSet::from_exterior(torus, window, exterior).with_label(format!("E(p={:?}, t={t})", u.direction()));
        in_tp.push(boundary_cells(&set, &base).next().is_some());
        sets.push(set);
    }
    Ok(LevelSetFamily { p: u.direction(), thresholds: ts, sets, in_tp, degenerate })
}

/// `(osc_Q v_p, osc_Q u_p)` as max minus min over the base cell.
pub fn oscillation(u: &PeriodicProfile) -> (f64, f64) {
    let spread = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        hi - lo
    };
    let v = base_values(u);
    (spread(&mut v.into_iter()), spread(&mut u.values().iter().copied()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SlabRow {
    pub t: f64,
    pub in_tp: bool,
    /// `max |x·p| / |p|` over boundary cells in the window.
    pub half_width: f64,
    pub boundary_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanelikeReport {
    pub p: Direction,
    pub rows: Vec<SlabRow>,
    /// Largest half-width over thresholds in `T_p`.
    pub max_half_width: f64,
    pub osc_v: f64,
    pub osc_u: f64,
    pub osc_ratio: f64,
}

/// Slab half-widths of a level-set family, with the oscillation of its profile.
pub fn planelike_report(family: &LevelSetFamily, u: &PeriodicProfile) -> Result<PlanelikeReport> {
    let p = family.p;
    let size = norm(p);
    if size == 0.0 {
        return Err(Error::invalid("p", "slab widths need a nonzero direction"));
    }
    let torus = u.torus();
    let rows: Vec<SlabRow> = family
        .sets
        .iter()
        .zip(&family.thresholds)
        .zip(&family.in_tp)
        .map(|((set, &t), &in_tp)| {
            let (mut width, mut count) = (0.0f64, 0usize);
            for c in boundary_cells(set, set.window()) {
                let x = torus.center(c);
                width = width.max((p[0] as f64 * x[0] + p[1] as f64 * x[1]).abs() / size);
                count += 1;
            }
            SlabRow { t, in_tp, half_width: width, boundary_cells: count }
        })
        .collect();
    let max_half_width = rows.iter().filter(|r| r.in_tp).map(|r| r.half_width).fold(0.0, f64::max);
    let (osc_v, osc_u) = oscillation(u);
    Ok(PlanelikeReport { p, rows, max_half_width, osc_v, osc_u, osc_ratio: osc_v / size })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityRow {
    pub x0: Cell,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Radii below two cells, not resolvable on the lattice.
    pub skipped_radii: Vec<f64>,
    pub c0_probe: f64,
    pub passed: bool,
}

/// `|E ∩ B_r(x0)| / r^n` at boundary cells `x0` of `samples`, counting cells
/// whose centers lie in the ball. Every `stride`-th boundary cell is used.
pub fn density_estimates(
    set: &LatticeSet,
    samples: &CellBox,
    radii: &[f64],
    stride: usize,
    c0_probe: f64,
) -> Result<DensityReport> {
    let h = set.torus().spacing();
    let n = set.dim().n() as i32;
    let (usable, skipped_radii): (Vec<f64>, Vec<f64>) = radii.iter().partition(|&&r| r >= 2.0 * h);
    let points: Vec<Cell> = boundary_cells(set, samples).step_by(stride.max(1)).collect();
    let mut rows = Vec::new();
    for &r in &usable {
        let reach = (r / h).ceil() as i64;
        let ball: Vec<Cell> = CellBox::new(set.dim(), [-reach, -reach], [reach + 1, reach + 1])
            .cells()
            .filter(|d| ((d[0] * d[0] + d[1] * d[1]) as f64) * h * h < r * r)
            .collect();
        for &x0 in &points {
            let inside = ball.iter().filter(|d| set.contains([x0[0] + d[0], x0[1] + d[1]])).count();
            rows.push(DensityRow { x0, radius: r, ratio: inside as f64 * h.powi(n) / r.powi(n) });
        }
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let passed = !rows.is_empty() && min_ratio >= c0_probe && max_ratio <= set.dim().ball_volume() - c0_probe;
    Ok(DensityReport { rows, min_ratio, max_ratio, skipped_radii, c0_probe, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaCheck {
    /// Pair part of the cell energy.
    pub direct: f64,
    /// Sum over threshold gaps of the gap length times the level-set pair sum.
    pub layered: f64,
    pub defect: f64,
}

/// Compares the pair energy of `u` with its layer-cake decomposition, obtained
/// by sweeping all pair endpoints in increasing order.
pub fn coarea_check(u: &PeriodicProfile, stencil: &PairStencil) -> Result<CoareaCheck> {
    let torus = u.torus();
    if torus.dim() != stencil.dim() || torus.m() != stencil.m() {
        return Err(Error::Precondition("profile and stencil must share a grid".into()));
    }
    let p = u.direction();
    let direct = sum::pairwise(&cell_pair_terms(u, p, stencil));
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * torus.len() * stencil.half_len());
    for i in 0..torus.len() {
        let c = torus.cell(i);
        let a = u.v(c);
        for (d, w) in stencil.half_offsets() {
            let b = u.v([c[0] + d[0], c[1] + d[1]]);
            if a != b {
                events.push((a.min(b), w));
                events.push((a.max(b), -w));
            }
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut active = Compensated::default();
    let mut terms = Vec::new();
    let mut k = 0;
    while k < events.len() {
        let t = events[k].0;
        while k < events.len() && events[k].0 == t {
            active.add(events[k].1);
            k += 1;
        }
        if k < events.len() {
            terms.push((events[k].0 - t) * active.value());
        }
    }
    let layered = sum::pairwise(&terms);
    Ok(CoareaCheck { direct, layered, defect: (direct - layered).abs() / direct.max(1e-30) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundProbe {
    pub perimeter: f64,
    /// Side of the counting cubes in cells.
    pub cube_cells: i64,
    pub crossing_cubes: usize,
    /// `perimeter / crossing_cubes`, zero when nothing crosses.
    pub ratio: f64,
}

/// Counts cubes of side `ζ = δ / (8√n)` whose threefold enlargement lies in
/// `omega` and which contain a boundary cell of `set`, next to `P_K(E, Ω)`.
pub fn perimeter_lower_bound_probe(
    set: &LatticeSet,
    omega: &CellBox,
    stencil: &PairStencil,
    delta: f64,
) -> Result<LowerBoundProbe> {
    let p = perimeter(set, omega, stencil)?.total;
    let n = set.dim().n();
    let side = ((delta / (8.0 * (n as f64).sqrt())) * set.m() as f64).round().max(1.0) as i64;
    let second = |lo: i64, hi: i64| match set.dim() {
        Dim::One => 0..1,
        Dim::Two => lo.div_euclid(side)..hi.div_euclid(side) + 1,
    };
    let mut count = 0usize;
    for k0 in omega.lo[0].div_euclid(side)..omega.hi[0].div_euclid(side) + 1 {
        for k1 in second(omega.lo[1], omega.hi[1]) {
            let cube = CellBox::new(set.dim(), [k0 * side, k1 * side], [(k0 + 1) * side, (k1 + 1) * side]);
            let grow = match set.dim() {
                Dim::One => [side, 0],
                Dim::Two => [side, side],
            };
            if omega.contains_box(&cube.expand(grow)) && boundary_cells(set, &cube).next().is_some() {
                count += 1;
            }
        }
    }
    let ratio = if count == 0 { 0.0 } else { p / count as f64 };
    Ok(LowerBoundProbe { perimeter: p, cube_cells: side, crossing_cubes: count, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ConstantOverrides, KernelSpec};
    use crate::lattice::{build_stencil, Cutoff, TorusGrid, WeightRule};

    #[test]
    fn flat_profile_gives_halfspaces() {
        let torus = TorusGrid::new(Dim::Two, 8).unwrap();
        let u = Arc::new(PeriodicProfile::zero(torus, [1, 1]));
        let window = CellBox::new(Dim::Two, [-8, -8], [16, 16]);
        let fam = extract_level_sets(&u, window, &ThresholdRule::default()).unwrap();
        assert!(fam.is_nested() && !fam.degenerate);
        for (set, &t) in fam.sets.iter().zip(&fam.thresholds) {
            for c in window.cells() {
                let x = torus.center(c);
                assert_eq!(set.contains(c), x[0] + x[1] > t);
            }
        }
        assert!(fam.in_tp.iter().all(|b| *b));
    }

    #[test]
    fn flat_profile_oscillation() {
        let torus = TorusGrid::new(Dim::Two, 16).unwrap();
        let (osc_v, osc_u) = oscillation(&PeriodicProfile::zero(torus, [1, 0]));
        assert!((osc_v - (1.0 - 1.0 / 16.0)).abs() < 1e-15);
        assert_eq!(osc_u, 0.0);
    }

    #[test]
    fn flat_profile_coarea_matches_energy_at_zero() {
        let k = KernelSpec::k1(Dim::One, 0.25, 0.75, ConstantOverrides::default()).unwrap();
        let st = build_stencil(&k, 16, Cutoff::Auto, WeightRule::CellAverage).unwrap();
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let c = coarea_check(&PeriodicProfile::zero(torus, [1, 0]), &st).unwrap();
        assert!(c.defect <= 1e-12, "{c:?}");
        assert!((c.direct - crate::energy::cell_energy_at_zero([1, 0], &st)).abs() < 1e-13);
    }

    #[test]
    fn constant_zero_direction_is_degenerate() {
        let torus = TorusGrid::new(Dim::One, 8).unwrap();
        let u = Arc::new(PeriodicProfile::zero(torus, [0, 0]));
        let fam = extract_level_sets(&u, torus.base_box(), &ThresholdRule::default()).unwrap();
        assert!(fam.degenerate);
        assert_eq!(fam.sets.len(), 1);
    }
}
