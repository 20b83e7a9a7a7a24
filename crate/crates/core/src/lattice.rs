//! Periodic torus grids, finite windows, interaction stencils, and exact
//! enumeration of integer cube covers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Dim, KernelSpec};

/// Integer cell coordinates. One-dimensional grids use only the first entry and
/// keep the second at zero.
pub type Cell = [i64; 2];

/// Largest stencil the toolkit will build.
pub const MAX_OFFSETS: usize = 10_000_000;

/// Periodic lattice of the unit cell with `m` cells per period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TorusGrid {
    dim: Dim,
    m: usize,
}

impl TorusGrid {
    pub fn new(dim: Dim, m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::invalid("m", format!("need at least 8 cells per period, got {m}")));
        }
        Ok(TorusGrid { dim, m })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim.n() as i32)
    }

    /// Number of cells in one period.
    pub fn len(&self) -> usize {
        self.m.pow(self.dim.n() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Storage index of the torus cell congruent to `c`.
    pub fn index(&self, c: Cell) -> usize {
        let m = self.m as i64;
        let a = c[0].rem_euclid(m) as usize;
        match self.dim {
            Dim::One => a,
            Dim::Two => a * self.m + c[1].rem_euclid(m) as usize,
        }
    }

    /// Base-cell coordinates of storage index `i`.
    pub fn cell(&self, i: usize) -> Cell {
        match self.dim {
            Dim::One => [i as i64, 0],
            Dim::Two => [(i / self.m) as i64, (i % self.m) as i64],
        }
    }

    /// Period shift `k` with `c = base + m k`.
    pub fn period_of(&self, c: Cell) -> [i64; 2] {
        let m = self.m as i64;
        [c[0].div_euclid(m), c[1].div_euclid(m)]
    }

    pub fn center(&self, c: Cell) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            Dim::One => [(c[0] as f64 + 0.5) * h, 0.0],
            Dim::Two => [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h],
        }
    }

    /// Box of the base period `[0, m)^n`.
    pub fn base_box(&self) -> CellBox {
        let m = self.m as i64;
        CellBox::new(self.dim, [0, 0], [m, m])
    }
}

/// Half-open axis-aligned box of cells `[lo, hi)`. In one dimension the second
/// axis is fixed to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CellBox {
    pub lo: Cell,
    pub hi: Cell,
}

impl CellBox {
    pub fn new(dim: Dim, lo: Cell, hi: Cell) -> Self {
        match dim {
            Dim::One => CellBox { lo: [lo[0], 0], hi: [hi[0].max(lo[0]), 1] },
            Dim::Two => CellBox { lo, hi: [hi[0].max(lo[0]), hi[1].max(lo[1])] },
        }
    }

    /// Converts physical bounds to a cell box; every bound must be an integer
    /// multiple of `1/m`.
    pub fn from_physical(dim: Dim, m: usize, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = dim.n();
        if lo.len() != n || hi.len() != n {
            return Err(Error::invalid("window", format!("expected {n} bounds per side")));
        }
        let snap = |x: f64| -> Result<i64> {
            let k = x * m as f64;
            let r = k.round();
            if (k - r).abs() > 1e-9 * k.abs().max(1.0) {
                return Err(Error::Alignment(format!("bound {x} is not a multiple of 1/{m}")));
            }
            Ok(r as i64)
        };
        let mut l = [0i64; 2];
        let mut u = [1i64; 2];
        for a in 0..n {
            l[a] = snap(lo[a])?;
            u[a] = snap(hi[a])?;
            if u[a] <= l[a] {
                return Err(Error::invalid("window", "upper bounds must exceed lower bounds"));
            }
        }
        Ok(CellBox::new(dim, l, u))
    }

    pub fn shape(&self) -> [usize; 2] {
        [(self.hi[0] - self.lo[0]).max(0) as usize, (self.hi[1] - self.lo[1]).max(0) as usize]
    }

    pub fn len(&self) -> usize {
        let s = self.shape();
        s[0] * s[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c[0] >= self.lo[0] && c[0] < self.hi[0] && c[1] >= self.lo[1] && c[1] < self.hi[1]
    }

    pub fn contains_box(&self, b: &CellBox) -> bool {
        b.is_empty()
            || (b.lo[0] >= self.lo[0] && b.hi[0] <= self.hi[0] && b.lo[1] >= self.lo[1] && b.hi[1] <= self.hi[1])
    }

    /// Row-major storage index of `c`, which must lie in the box.
    pub fn index(&self, c: Cell) -> usize {
        let s = self.shape();
        (c[0] - self.lo[0]) as usize * s[1] + (c[1] - self.lo[1]) as usize
    }

    pub fn cell(&self, i: usize) -> Cell {
        let s = self.shape();
        [self.lo[0] + (i / s[1]) as i64, self.lo[1] + (i % s[1]) as i64]
    }

    /// Grows the box by `reach[a]` cells on both sides of axis `a`.
    pub fn expand(&self, reach: [i64; 2]) -> CellBox {
        CellBox { lo: [self.lo[0] - reach[0], self.lo[1] - reach[1]], hi: [self.hi[0] + reach[0], self.hi[1] + reach[1]] }
    }

    pub fn translate(&self, k: Cell) -> CellBox {
        CellBox { lo: [self.lo[0] + k[0], self.lo[1] + k[1]], hi: [self.hi[0] + k[0], self.hi[1] + k[1]] }
    }

    pub fn intersect(&self, o: &CellBox) -> CellBox {
        let lo = [self.lo[0].max(o.lo[0]), self.lo[1].max(o.lo[1])];
        let hi = [self.hi[0].min(o.hi[0]).max(lo[0]), self.hi[1].min(o.hi[1]).max(lo[1])];
        CellBox { lo, hi }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.lo[0]..self.hi[0]).flat_map(move |a| (self.lo[1]..self.hi[1]).map(move |b| [a, b]))
    }
}

/// A lattice domain Ω: a set of cells with a bounding box.
pub trait Region: Sync {
    fn contains(&self, c: Cell) -> bool;
    fn bounding_box(&self) -> CellBox;
    /// Whether every cell of `b` lies in the region. Convex regions only need
    /// the corner cells.
    fn covers(&self, b: &CellBox) -> bool {
        b.cells().all(|c| self.contains(c))
    }
}

impl Region for CellBox {
    fn contains(&self, c: Cell) -> bool {
        CellBox::contains(self, c)
    }

    fn bounding_box(&self) -> CellBox {
        *self
    }

    fn covers(&self, b: &CellBox) -> bool {
        self.contains_box(b)
    }
}

/// Square in the plane with sides perpendicular to a unit `axis`, realized by
/// cell-center membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotatedSquare {
    pub m: usize,
    pub center: [f64; 2],
    pub axis: [f64; 2],
    pub half_side: f64,
}

impl RotatedSquare {
    fn inside(&self, c: Cell) -> bool {
        let h = 1.0 / self.m as f64;
        let x = [(c[0] as f64 + 0.5) * h - self.center[0], (c[1] as f64 + 0.5) * h - self.center[1]];
        let along = x[0] * self.axis[0] + x[1] * self.axis[1];
        let across = -x[0] * self.axis[1] + x[1] * self.axis[0];
        along.abs() < self.half_side && across.abs() < self.half_side
    }
}

impl Region for RotatedSquare {
    fn contains(&self, c: Cell) -> bool {
        self.inside(c)
    }

    fn bounding_box(&self) -> CellBox {
        let m = self.m as f64;
        let ext = self.half_side * (self.axis[0].abs() + self.axis[1].abs());
        let lo = [((self.center[0] - ext) * m).floor() as i64 - 1, ((self.center[1] - ext) * m).floor() as i64 - 1];
        let hi = [((self.center[0] + ext) * m).ceil() as i64 + 1, ((self.center[1] + ext) * m).ceil() as i64 + 1];
        CellBox { lo, hi }
    }

    fn covers(&self, b: &CellBox) -> bool {
        if b.is_empty() {
            return true;
        }
        let (l, u) = (b.lo, [b.hi[0] - 1, b.hi[1] - 1]);
        [l, [l[0], u[1]], [u[0], l[1]], u].iter().all(|&c| self.inside(c))
    }
}

/// Quadrature rule for pair weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Exact interaction of the two cells: `w(d) = ∫_{C0} ∫_{Cd} K(|x - y|) dy dx`.
    CellAverage,
    /// `w(d) = h^(2n) K(|d| h)`.
    Midpoint,
}

/// Truncation radius choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Auto,
    Radius(f64),
}

/// Lattice offsets with their pair weights.
#[derive(Debug, Clone, Serialize)]
pub struct PairStencil {
    dim: Dim,
    m: usize,
    rule: WeightRule,
    rcut: f64,
    offsets: Vec<Cell>,
    weights: Vec<f64>,
    /// Indices into `offsets` of the lexicographically positive half.
    half: Vec<usize>,
    reach: [i64; 2],
    tail_bound: f64,
}

impl PairStencil {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim.n() as i32)
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    pub fn rcut(&self) -> f64 {
        self.rcut
    }

    /// All retained offsets in lexicographic order.
    pub fn offsets(&self) -> &[Cell] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Offsets that are lexicographically positive, one per unordered pair class.
    pub fn half_offsets(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        self.half.iter().map(move |&k| (self.offsets[k], self.weights[k]))
    }

    pub fn half_len(&self) -> usize {
        self.half.len()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest |d_a| over retained offsets, per axis.
    pub fn reach(&self) -> [i64; 2] {
        self.reach
    }

    /// Bound on the weight dropped per cell by truncation.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `Σ_d w(d)` over the retained stencil.
    pub fn degree(&self) -> f64 {
        crate::sum::pairwise(&self.weights)
    }

    /// Weight of a given offset, zero when not retained.
    pub fn weight_of(&self, d: Cell) -> f64 {
        self.offsets.binary_search(&d).map(|k| self.weights[k]).unwrap_or(0.0)
    }
}

/// Builds the pair stencil of `kernel` on a lattice with `m` cells per period.
pub fn build_stencil(kernel: &KernelSpec, m: usize, cutoff: Cutoff, rule: WeightRule) -> Result<PairStencil> {
    kernel.require_admissible()?;
    let dim = kernel.dim();
    let n = dim.n();
    if m < 2 {
        return Err(Error::invalid("m", "need at least two cells per period"));
    }
    let h = 1.0 / m as f64;
    let diag = dim.cube_diameter() * h;
    let rcut = match cutoff {
        Cutoff::Radius(r) => r,
        Cutoff::Auto => auto_cutoff(kernel, h, rule)?,
    };
    if !(rcut >= 2.0 * h) {
        return Err(Error::Precondition(format!("cutoff {rcut} is below two cells (2h = {})", 2.0 * h)));
    }
    if rcut < kernel.bounds().delta * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "cutoff {rcut} is below the near-field radius {}",
            kernel.bounds().delta
        )));
    }
    let reach_cells = (rcut / h + 1e-9).floor() as i64;
    let estimate = match dim {
        Dim::One => 2 * reach_cells as usize,
        Dim::Two => (std::f64::consts::PI * (reach_cells as f64 + 1.0).powi(2)) as usize,
    };
    if estimate > MAX_OFFSETS {
        return Err(Error::TooLarge { what: "pair stencil".into(), requested: estimate, limit: MAX_OFFSETS });
    }
    let r2 = |d: Cell| (d[0] * d[0] + d[1] * d[1]) as f64;
    let limit2 = (rcut / h) * (rcut / h) * (1.0 + 1e-12);
    let mut candidates: Vec<Cell> = Vec::new();
    let side = if n == 2 { reach_cells } else { 0 };
    for a in -reach_cells..=reach_cells {
        for b in -side..=side {
            let d = [a, b];
            if d != [0, 0] && r2(d) <= limit2 {
                candidates.push(d);
            }
        }
    }
    candidates.sort();
    let mut cache: std::collections::HashMap<(i64, i64), f64> = std::collections::HashMap::new();
    let mut offsets = Vec::with_capacity(candidates.len());
    let mut weights = Vec::with_capacity(candidates.len());
    for d in candidates {
        let (p, q) = (d[0].abs().max(d[1].abs()), d[0].abs().min(d[1].abs()));
        let key = if n == 1 { (d[0].abs(), 0) } else { (p, q) };
        let w = match cache.get(&key) {
            Some(&w) => w,
            None => {
                let w = match rule {
                    WeightRule::Midpoint => h.powi(2 * n as i32) * kernel.value(r2(d).sqrt() * h),
                    WeightRule::CellAverage => cell_average_weight(kernel, key, h)?,
                };
                cache.insert(key, w);
                w
            }
        };
        if w > 0.0 {
            offsets.push(d);
            weights.push(w);
        }
    }
    let half: Vec<usize> = offsets.iter().enumerate().filter(|(_, d)| **d > [0, 0]).map(|(k, _)| k).collect();
    let mut reach = [0i64; 2];
    for d in &offsets {
        reach[0] = reach[0].max(d[0].abs());
        reach[1] = reach[1].max(d[1].abs());
    }
    let tail_bound = match rule {
        WeightRule::CellAverage => {
            let edge = (rcut - diag).max(h);
            if kernel.support_radius().is_some_and(|s| edge >= s) {
                0.0
            } else {
                h.powi(n as i32) * kernel.tail_mass(edge)?
            }
        }
        WeightRule::Midpoint => {
            if kernel.support_radius().is_some_and(|s| rcut >= s) {
                0.0
            } else {
                h.powi(n as i32) * kernel.tail_mass(rcut)?
            }
        }
    };
    Ok(PairStencil { dim, m, rule, rcut, offsets, weights, half, reach, tail_bound })
}

/// Default cutoff: the kernel support when compact, otherwise the smallest
/// radius whose tail mass is at most `1e-4` of the first moment. Cell-averaged
/// weights add one cell diagonal so no interacting cell pair is dropped.
pub fn auto_cutoff(kernel: &KernelSpec, h: f64, rule: WeightRule) -> Result<f64> {
    let base = match kernel.support_radius() {
        Some(s) => s,
        None => {
            let target = 1e-4 * kernel.first_moment()?;
            let mut hi = kernel.bounds().delta.max(1.0);
            while kernel.tail_mass(hi)? > target {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::Precondition("kernel tail too heavy for an automatic cutoff".into()));
                }
            }
            let mut lo = hi / 2.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if kernel.tail_mass(mid)? > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi.max(kernel.bounds().delta)
        }
    };
    Ok(match rule {
        WeightRule::CellAverage => base + kernel.dim().cube_diameter() * h,
        WeightRule::Midpoint => base.max(kernel.bounds().delta),
    })
}

/// Interaction of two lattice cells separated by `key = (|d_0|, |d_1|)`.
///
/// The cross-correlation of two cells is the tent `T(ξ - d h)` with
/// `T(η) = Π_k (h - |η_k|)_+`, so the weight is the radial integral of `K`
/// against the tent's mass on spheres.
fn cell_average_weight(kernel: &KernelSpec, key: (i64, i64), h: f64) -> Result<f64> {
    match kernel.dim() {
        Dim::One => {
            let c = key.0 as f64 * h;
            // Grouped so that `h - c` cancels exactly for touching cells; the
            // singular integrand near r = 0 is otherwise dominated by roundoff.
            let tent = move |r: f64| {
                let near = if r <= c { (h - c) + r } else { (h + c) - r };
                near.max(0.0) + ((h - c) - r).max(0.0)
            };
            let lo = (c - h).max(0.0);
            let touching = if key.0 == 1 { 1.0 } else { 0.0 };
            let floor = weight_floor(kernel, c, h);
            Ok(kernel.integrate_radial_abs(&tent, lo, c + h, touching, &[c], floor)?.value)
        }
        Dim::Two => {
            let (a, b) = (key.0 as f64 * h, key.1 as f64 * h);
            let mut breaks = Vec::with_capacity(16);
            let mut hi: f64 = 0.0;
            for i in [-1.0, 0.0, 1.0] {
                for j in [-1.0, 0.0, 1.0] {
                    let r = (a + i * h).hypot(b + j * h);
                    breaks.push(r);
                    hi = hi.max(r);
                }
                breaks.push((a + i * h).abs());
                breaks.push((b + i * h).abs());
            }
            let nearest = |c: f64| if c.abs() <= h { 0.0 } else { c.abs() - h };
            let lo = nearest(a).hypot(nearest(b));
            let touching = [key.0, key.1].iter().filter(|&&k| k == 1).count() as f64;
            let f = move |r: f64| r * circle_tent(r, a, b, h);
            let floor = weight_floor(kernel, a.hypot(b), h);
            Ok(kernel.integrate_radial_abs(&f, lo, hi, 1.0 + touching, &breaks, floor)?.value)
        }
    }
}

/// Absolute accuracy target for one pair weight: the relative quadrature
/// tolerance applied to the weight's midpoint-size scale. Weights of cells that
/// barely touch the kernel support are tiny and only need this absolute accuracy.
fn weight_floor(kernel: &KernelSpec, dist: f64, h: f64) -> f64 {
    let n = kernel.dim().n() as i32;
    let r = match kernel.support_radius() {
        Some(s) => dist.min(0.9 * s),
        None => dist,
    };
    kernel.quad_tol() * h.powi(2 * n) * kernel.value(r.max(h))
}

/// `∫_0^{2π} T(r cos θ - a, r sin θ - b) dθ`, splitting the circle where it
/// crosses the lines on which the bilinear tent changes formula.
///
/// Arcs are integrated in closed form near the origin. Far away the closed
/// form cancels badly (terms of size `r^2` against a result of size `h^2`), so
/// each short arc is integrated by a fixed Kronrod rule on the tent itself.
pub fn circle_tent(r: f64, a: f64, b: f64, h: f64) -> f64 {
    use std::f64::consts::PI;
    let tau = 2.0 * PI;
    let mut cuts: Vec<f64> = vec![0.0, tau];
    for k in [-1.0, 0.0, 1.0] {
        let c = a + k * h;
        if c.abs() < r {
            let t = (c / r).acos();
            cuts.push(t);
            cuts.push(tau - t);
        }
        let c = b + k * h;
        if c.abs() < r {
            let t = (c / r).asin();
            cuts.push(t.rem_euclid(tau));
            cuts.push(PI - t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= 0.0 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let e1 = r * tm.cos() - a;
        let e2 = r * tm.sin() - b;
        if e1.abs() >= h || e2.abs() >= h {
            continue;
        }
        if r > 8.0 * h {
            let tent = |t: f64| (h - (r * t.cos() - a).abs()).max(0.0) * (h - (r * t.sin() - b).abs()).max(0.0);
            total += crate::quad::kronrod21(&tent, t0, t1);
            continue;
        }
        let s1 = if e1 >= 0.0 { 1.0 } else { -1.0 };
        let s2 = if e2 >= 0.0 { 1.0 } else { -1.0 };
        // On this arc T = (alpha - s1 r cos θ)(beta - s2 r sin θ).
        let alpha = h + s1 * a;
        let beta = h + s2 * b;
        let (c0, c1) = (t0.cos(), t1.cos());
        let (n0, n1) = (t0.sin(), t1.sin());
        total += alpha * beta * (t1 - t0) + alpha * s2 * r * (c1 - c0) - beta * s1 * r * (n1 - n0)
            + 0.5 * s1 * s2 * r * r * (n1 * n1 - n0 * n0);
    }
    total
}

/// Integer cube scale for cube covers: cubes of side `epsilon` in units where
/// the period is 1.
pub fn cube_side_cells(m: usize, epsilon: f64) -> Result<i64> {
    let s = epsilon * m as f64;
    let r = s.round();
    if r < 1.0 || (s - r).abs() > 1e-9 * s.max(1.0) {
        return Err(Error::Alignment(format!("cube side {epsilon} is not a positive multiple of h = 1/{m}")));
    }
    Ok(r as i64)
}

/// Disjoint lattice-aligned cubes `ε(k + Q)` contained in a region.
#[derive(Debug, Clone, Serialize)]
pub struct CubeCover {
    pub epsilon: f64,
    pub cubes: Vec<CellBox>,
}

impl CubeCover {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Whether a cell lies in some cube of the cover.
    pub fn contains(&self, c: Cell) -> bool {
        self.cubes.iter().any(|q| q.contains(c))
    }

    /// Membership mask over `window`.
    pub fn mask(&self, window: &CellBox) -> Vec<bool> {
        let mut mask = vec![false; window.len()];
        for q in &self.cubes {
            for c in q.intersect(window).cells() {
                mask[window.index(c)] = true;
            }
        }
        mask
    }
}

/// Lists every cube `ε(k + Q)` contained in `omega` at lattice resolution.
pub fn enumerate_unit_cubes(dim: Dim, m: usize, omega: &dyn Region, epsilon: f64) -> Result<CubeCover> {
    let side = cube_side_cells(m, epsilon)?;
    let bb = omega.bounding_box();
    let k_lo = [bb.lo[0].div_euclid(side), bb.lo[1].div_euclid(side)];
    let k_hi = [bb.hi[0].div_euclid(side) + 1, bb.hi[1].div_euclid(side) + 1];
    let mut cubes = Vec::new();
    let second = match dim {
        Dim::One => 0..1,
        Dim::Two => k_lo[1]..k_hi[1],
    };
    for k0 in k_lo[0]..k_hi[0] {
        for k1 in second.clone() {
            let cube = CellBox::new(dim, [k0 * side, k1 * side], [(k0 + 1) * side, (k1 + 1) * side]);
            if bb.contains_box(&cube) && omega.covers(&cube) {
                cubes.push(cube);
            }
        }
    }
    Ok(CubeCover { epsilon, cubes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ConstantOverrides;

    fn k1(dim: Dim) -> KernelSpec {
        KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap()
    }

    #[test]
    fn midpoint_example_offsets_and_weight() {
        let st = build_stencil(&k1(Dim::One), 8, Cutoff::Radius(1.0), WeightRule::Midpoint).unwrap();
        // d = ±8 sits on the support edge where K1 vanishes, so it carries no weight.
        let ds: Vec<i64> = st.offsets().iter().map(|d| d[0]).collect();
        assert_eq!(ds, vec![-7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7]);
        let w1 = st.weight_of([1, 0]);
        assert!((w1 - 8f64.powf(1.5) / 64.0).abs() < 1e-15);
        assert!((w1 - 0.353_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn cell_average_example_offsets() {
        let a = build_stencil(&k1(Dim::One), 8, Cutoff::Radius(1.0), WeightRule::CellAverage).unwrap();
        let b = build_stencil(&k1(Dim::One), 8, Cutoff::Radius(2.0), WeightRule::CellAverage).unwrap();
        let ds: Vec<i64> = a.offsets().iter().map(|d| d[0]).collect();
        assert_eq!(ds, (-8..=8).filter(|&d| d != 0).collect::<Vec<_>>());
        assert_eq!(a.offsets(), b.offsets());
        assert_eq!(b.tail_bound(), 0.0);
        assert!(a.tail_bound() > 0.0);
    }

    #[test]
    fn small_cutoff_is_rejected() {
        let k = KernelSpec::k3(Dim::One, 0.25, 0.75, 0.1, ConstantOverrides::default()).unwrap();
        let e = build_stencil(&k, 8, Cutoff::Radius(0.2), WeightRule::Midpoint).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn one_dimensional_cell_average_closed_form() {
        // Exact cell interaction for K1 (n = 1, s = 1/4) between cells d apart:
        // ∫∫ |x-y|^{-3/2} = -4[F(d+1) - 2F(d) + F(d-1)] h^{1/2} with F(t) = t^{1/2}.
        let m = 16;
        let h = 1.0 / m as f64;
        let st = build_stencil(&k1(Dim::One), m, Cutoff::Auto, WeightRule::CellAverage).unwrap();
        let f = |t: f64| t.sqrt();
        for d in 1..(m as i64 - 1) {
            let t = d as f64;
            let exact = -4.0 * (f(t + 1.0) - 2.0 * f(t) + f(t - 1.0)) * h.sqrt();
            let w = st.weight_of([d, 0]);
            assert!((w - exact).abs() < 1e-9 * exact, "d = {d}: {w} vs {exact}");
        }
    }

    #[test]
    fn circle_tent_integrates_to_tent_mass() {
        // ∫_0^∞ r ∫ T dθ dr = ∫ T = h^4 for any offset.
        let h = 0.125;
        for (a, b) in [(0.25, 0.125), (0.5, 0.375), (0.125, 0.0), (1.0, 0.75)] {
            let f = |r: f64| r * circle_tent(r, a, b, h);
            let hi = (a + h).hypot(b + h);
            let val = crate::quad::integrate(&f, 0.0, hi * 1.01, crate::quad::Tolerance::relative(1e-12))
                .unwrap()
                .value;
            assert!((val - h.powi(4)).abs() < 1e-12 * h.powi(4) * 10.0, "({a}, {b}): {val}");
        }
    }

    #[test]
    fn axis_halfspace_crossing_weight_is_exact() {
        // Cell-averaged weights make the lattice halfspace {x_0 > 0} an exact union
        // of cells, so its perimeter per unit area, m^(n-1) Σ_{d_0 > 0} d_0 w(d),
        // equals (1/2) ∫ |ξ_0| K(|ξ|) dξ: 2 in 1D and 4·2^{1/4} in 2D.
        for (dim, m, target) in [(Dim::One, 16usize, 2.0), (Dim::Two, 16, 4.0 * 2f64.powf(0.25))] {
            let st = build_stencil(&k1(dim), m, Cutoff::Auto, WeightRule::CellAverage).unwrap();
            let per_column: f64 = st
                .offsets()
                .iter()
                .zip(st.weights())
                .filter(|(d, _)| d[0] > 0)
                .map(|(d, w)| d[0] as f64 * w)
                .sum();
            let value = per_column * (m as f64).powi(dim.n() as i32 - 1);
            assert!((value - target).abs() < 1e-8 * target, "{dim:?}: {value} vs {target}");
        }
    }

    #[test]
    fn stencil_symmetry() {
        for rule in [WeightRule::CellAverage, WeightRule::Midpoint] {
            let st = build_stencil(&k1(Dim::Two), 8, Cutoff::Auto, rule).unwrap();
            for (d, w) in st.offsets().iter().zip(st.weights()) {
                assert!(*w > 0.0);
                assert_eq!(st.weight_of([-d[0], -d[1]]).to_bits(), w.to_bits());
                assert_eq!(st.weight_of([d[1], d[0]]).to_bits(), w.to_bits());
            }
            assert_eq!(st.half_len() * 2, st.len());
        }
    }

    #[test]
    fn unit_cube_enumeration() {
        let m = 8;
        let omega = CellBox::from_physical(Dim::One, m, &[0.0], &[3.0]).unwrap();
        assert_eq!(enumerate_unit_cubes(Dim::One, m, &omega, 1.0).unwrap().len(), 3);
        let omega = CellBox::from_physical(Dim::One, m, &[0.5], &[3.5]).unwrap();
        let cover = enumerate_unit_cubes(Dim::One, m, &omega, 1.0).unwrap();
        assert_eq!(cover.cubes, vec![CellBox::new(Dim::One, [8, 0], [16, 1]), CellBox::new(Dim::One, [16, 0], [24, 1])]);
        let omega = CellBox::from_physical(Dim::Two, m, &[0.0, 0.0], &[2.5, 3.0]).unwrap();
        assert_eq!(enumerate_unit_cubes(Dim::Two, m, &omega, 1.0).unwrap().len(), 6);
        assert!(matches!(enumerate_unit_cubes(Dim::One, m, &omega, 0.3), Err(Error::Alignment(_))));
        assert_eq!(enumerate_unit_cubes(Dim::One, m, &CellBox::new(Dim::One, [0, 0], [24, 1]), 0.25).unwrap().len(), 12);
    }

    #[test]
    fn misaligned_window_is_rejected() {
        assert!(matches!(CellBox::from_physical(Dim::One, 8, &[0.1], &[1.0]), Err(Error::Alignment(_))));
    }
}
