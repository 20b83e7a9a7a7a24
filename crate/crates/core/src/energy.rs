//! Interaction, perimeter, forcing functionals and the periodic cell energy on
//! lattice sets and profiles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{enumerate_unit_cubes, Cell, CellBox, PairStencil, Region};
use crate::profile::{Direction, ForcingField, PeriodicProfile};
use crate::set::{ExteriorRule, LatticeSet};
use crate::sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Perimeter,
    J,
    F,
    ETrunc,
}

/// Parts of a set energy over a domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub functional: Functional,
    /// `L_K(E∩Ω, E^c∩Ω)`.
    pub in_in: f64,
    /// `L_K(E∩Ω, E^c∩Ω^c)`.
    pub in_out: f64,
    /// `L_K(E∩Ω^c, E^c∩Ω)`.
    pub out_in: f64,
    pub forcing: f64,
    pub total: f64,
    /// Bound on the interaction mass dropped by the stencil cutoff.
    pub truncation_bound: f64,
}

impl EnergyBreakdown {
    pub fn interaction(&self) -> f64 {
        self.in_in + (self.in_out + self.out_in)
    }

    fn scaled(mut self, factor: f64) -> Self {
        self.in_in *= factor;
        self.in_out *= factor;
        self.out_in *= factor;
        self.forcing *= factor;
        self.total *= factor;
        self.truncation_bound *= factor;
        self
    }
}

/// Dense lookup of stencil weights by offset.
pub(crate) struct WeightGrid {
    reach: [i64; 2],
    stride: usize,
    values: Vec<f64>,
}

impl WeightGrid {
    pub(crate) fn new(stencil: &PairStencil) -> Self {
        let reach = stencil.reach();
        let stride = (2 * reach[1] + 1) as usize;
        let mut values = vec![0.0; (2 * reach[0] + 1) as usize * stride];
        for (d, w) in stencil.offsets().iter().zip(stencil.weights()) {
            values[(d[0] + reach[0]) as usize * stride + (d[1] + reach[1]) as usize] = *w;
        }
        WeightGrid { reach, stride, values }
    }

    pub(crate) fn get(&self, d: Cell) -> f64 {
        if d[0].abs() > self.reach[0] || d[1].abs() > self.reach[1] {
            return 0.0;
        }
        self.values[(d[0] + self.reach[0]) as usize * self.stride + (d[1] + self.reach[1]) as usize]
    }
}

/// Labels of a set on a box, with a summed-area table for uniformity tests.
struct LabelBlock {
    block: CellBox,
    labels: Vec<bool>,
    prefix: Vec<u32>,
}

impl LabelBlock {
    fn new(set: &LatticeSet, block: CellBox) -> Self {
        let labels = set.materialize(&block);
        let [s0, s1] = block.shape();
        let mut prefix = vec![0u32; (s0 + 1) * (s1 + 1)];
        for a in 0..s0 {
            let mut row = 0u32;
            for b in 0..s1 {
                row += labels[a * s1 + b] as u32;
                prefix[(a + 1) * (s1 + 1) + b + 1] = prefix[a * (s1 + 1) + b + 1] + row;
            }
        }
        LabelBlock { block, labels, prefix }
    }

    /// Members in the sub-box `[lo, hi)` given in block-local coordinates.
    fn count(&self, lo: [usize; 2], hi: [usize; 2]) -> u32 {
        let s1 = self.block.shape()[1] + 1;
        self.prefix[hi[0] * s1 + hi[1]] + self.prefix[lo[0] * s1 + lo[1]]
            - self.prefix[lo[0] * s1 + hi[1]]
            - self.prefix[hi[0] * s1 + lo[1]]
    }
}

/// Per-cell disagreement sums over Ω, split by whether the partner lies in Ω.
struct PairScan {
    /// `Σ_{y∈Ω, χ(y)≠χ(x)} w(y-x)` per cell of the Ω bounding box.
    inner: Vec<f64>,
    /// Same sum over partners outside Ω.
    outer: Vec<f64>,
    member: Vec<bool>,
    omega_cells: usize,
}

fn scan_pairs(set: &LatticeSet, omega: &dyn Region, stencil: &PairStencil) -> Result<PairScan> {
    require_same_grid(set, stencil)?;
    let bb = omega.bounding_box();
    if !matches!(set.exterior().rule(), ExteriorRule::Periodic { .. }) {
        let inside = bb.cells().filter(|&c| omega.contains(c)).all(|c| set.window().contains(c));
        if !inside {
            return Err(Error::Margin(format!(
                "domain {:?}..{:?} leaves the set window {:?}..{:?}",
                bb.lo,
                bb.hi,
                set.window().lo,
                set.window().hi
            )));
        }
    }
    let reach = stencil.reach();
    let block = bb.expand(reach);
    let labels = LabelBlock::new(set, block);
    let [_, s1] = block.shape();
    let in_omega: Vec<bool> = block.cells().map(|c| bb.contains(c) && omega.contains(c)).collect();
    let linear: Vec<isize> = stencil.offsets().iter().map(|d| d[0] as isize * s1 as isize + d[1] as isize).collect();
    let weights = stencil.weights();
    let full = ((2 * reach[0] + 1) * (2 * reach[1] + 1)) as u32;

    let mut inner = vec![0.0; bb.len()];
    let mut outer = vec![0.0; bb.len()];
    let mut member = vec![false; bb.len()];
    let mut omega_cells = 0usize;
    for (k, x) in bb.cells().enumerate() {
        let local = [(x[0] - block.lo[0]) as usize, (x[1] - block.lo[1]) as usize];
        let xi = local[0] * s1 + local[1];
        if !in_omega[xi] {
            continue;
        }
        omega_cells += 1;
        let mine = labels.labels[xi];
        member[k] = mine;
        let lo = [local[0] - reach[0] as usize, local[1] - reach[1] as usize];
        let hi = [local[0] + reach[0] as usize + 1, local[1] + reach[1] as usize + 1];
        let count = labels.count(lo, hi);
        if count == 0 || count == full {
            continue;
        }
        let (mut a, mut b) = (0.0, 0.0);
        for (lin, w) in linear.iter().zip(weights) {
            let yi = (xi as isize + lin) as usize;
            if labels.labels[yi] != mine {
                if in_omega[yi] {
                    a += w;
                } else {
                    b += w;
                }
            }
        }
        inner[k] = a;
        outer[k] = b;
    }
    Ok(PairScan { inner, outer, member, omega_cells })
}

fn require_same_grid(set: &LatticeSet, stencil: &PairStencil) -> Result<()> {
    if set.dim() != stencil.dim() || set.m() != stencil.m() {
        return Err(Error::Precondition(format!(
            "set lives on n={}, m={} but the stencil on n={}, m={}",
            set.dim().n(),
            set.m(),
            stencil.dim().n(),
            stencil.m()
        )));
    }
    Ok(())
}

/// `L_K(A, B) = Σ_{x∈A, y∈B} w(y - x)` for disjoint sets that vanish outside
/// their common window.
pub fn interaction(a: &LatticeSet, b: &LatticeSet, stencil: &PairStencil) -> Result<f64> {
    require_same_grid(a, stencil)?;
    if a.window() != b.window() || a.torus() != b.torus() {
        return Err(Error::Precondition("sets must share window and grid".into()));
    }
    for s in [a, b] {
        if !matches!(s.exterior().rule(), ExteriorRule::Empty) || s.exterior().is_complemented() {
            return Err(Error::Precondition("interaction needs sets with an empty exterior".into()));
        }
    }
    if a.bits().iter().zip(b.bits()).any(|(x, y)| *x && *y) {
        return Err(Error::Precondition("sets overlap".into()));
    }
    let window = *a.window();
    // Unordered pairs, visited once from their lexicographically smaller end;
    // the predicate is symmetric in (A, B) so the sum is too.
    let terms: Vec<f64> = window
        .cells()
        .map(|x| {
            let (xa, xb) = (a.contains(x), b.contains(x));
            if !(xa || xb) {
                return 0.0;
            }
            let mut acc = 0.0;
            for (d, w) in stencil.half_offsets() {
                let y = [x[0] + d[0], x[1] + d[1]];
                if !window.contains(y) {
                    continue;
                }
                if (xa && b.contains(y)) || (xb && a.contains(y)) {
                    acc += w;
                }
            }
            acc
        })
        .collect();
    Ok(sum::pairwise(&terms))
}

/// `L_K(E, E^c)` over all of space for a set that vanishes outside its window.
pub fn total_perimeter(set: &LatticeSet, stencil: &PairStencil) -> Result<f64> {
    require_same_grid(set, stencil)?;
    if !matches!(set.exterior().rule(), ExteriorRule::Empty) || set.exterior().is_complemented() {
        return Err(Error::Precondition("whole-space perimeter needs a set with an empty exterior".into()));
    }
    let reach = stencil.reach();
    let window = *set.window();
    let block = window.expand(reach);
    let labels = LabelBlock::new(set, block);
    let [_, s1] = block.shape();
    let linear: Vec<isize> = stencil.offsets().iter().map(|d| d[0] as isize * s1 as isize + d[1] as isize).collect();
    let full = ((2 * reach[0] + 1) * (2 * reach[1] + 1)) as u32;
    let terms: Vec<f64> = window
        .cells()
        .map(|x| {
            let local = [(x[0] - block.lo[0]) as usize, (x[1] - block.lo[1]) as usize];
            let xi = local[0] * s1 + local[1];
            if !labels.labels[xi] {
                return 0.0;
            }
            let lo = [local[0] - reach[0] as usize, local[1] - reach[1] as usize];
            let hi = [local[0] + reach[0] as usize + 1, local[1] + reach[1] as usize + 1];
            if labels.count(lo, hi) == full {
                return 0.0;
            }
            linear
                .iter()
                .zip(stencil.weights())
                .filter(|(lin, _)| !labels.labels[(xi as isize + **lin) as usize])
                .map(|(_, w)| w)
                .sum()
        })
        .collect();
    Ok(sum::pairwise(&terms))
}

/// `P_K(E, Ω)` split into its three interaction terms.
pub fn perimeter(set: &LatticeSet, omega: &dyn Region, stencil: &PairStencil) -> Result<EnergyBreakdown> {
    let scan = scan_pairs(set, omega, stencil)?;
    Ok(breakdown_from(&scan, stencil, Functional::Perimeter, 0.0, true))
}

fn breakdown_from(
    scan: &PairScan,
    stencil: &PairStencil,
    functional: Functional,
    forcing: f64,
    with_out_in: bool,
) -> EnergyBreakdown {
    let in_in = 0.5 * sum::pairwise(&scan.inner);
    let in_out: Vec<f64> = scan.outer.iter().zip(&scan.member).map(|(v, &e)| if e { *v } else { 0.0 }).collect();
    let out_in: Vec<f64> = scan.outer.iter().zip(&scan.member).map(|(v, &e)| if e { 0.0 } else { *v }).collect();
    let in_out = sum::pairwise(&in_out);
    let out_in = if with_out_in { sum::pairwise(&out_in) } else { 0.0 };
    let total = in_in + (in_out + out_in) + forcing;
    EnergyBreakdown {
        functional,
        in_in,
        in_out,
        out_in,
        forcing,
        total,
        truncation_bound: scan.omega_cells as f64 * stencil.tail_bound(),
    }
}

/// `Σ g h^n` over member cells accepted by `filter`.
fn forcing_over(set: &LatticeSet, cells: impl Iterator<Item = Cell>, g: &ForcingField) -> f64 {
    let vol = g.torus().cell_volume();
    let terms: Vec<f64> = cells.map(|c| if set.contains(c) { g.at(c) * vol } else { 0.0 }).collect();
    sum::pairwise(&terms)
}

fn require_forcing_grid(set: &LatticeSet, g: &ForcingField) -> Result<()> {
    if g.torus() != set.torus() {
        return Err(Error::Precondition("forcing and set live on different grids".into()));
    }
    Ok(())
}

/// `J(E, Ω) = P_K(E, Ω) + ∫_{E∩Ω} g`.
pub fn functional_j(
    set: &LatticeSet,
    omega: &dyn Region,
    stencil: &PairStencil,
    g: &ForcingField,
) -> Result<EnergyBreakdown> {
    require_forcing_grid(set, g)?;
    let scan = scan_pairs(set, omega, stencil)?;
    let bb = omega.bounding_box();
    let forcing = forcing_over(set, bb.cells().filter(|&c| omega.contains(c)), g);
    Ok(breakdown_from(&scan, stencil, Functional::J, forcing, true))
}

/// `F_ε(E, Ω)`, evaluated on the blown-up lattice: `set` and `omega` are given
/// in coordinates where the forcing has period one, and the result is
/// `ε^(n-1)` times the unit-scale energy with forcing on the unit cube cover.
pub fn functional_f(
    set: &LatticeSet,
    omega: &dyn Region,
    stencil: &PairStencil,
    g: &ForcingField,
    epsilon: f64,
) -> Result<EnergyBreakdown> {
    rescaled(set, omega, stencil, g, epsilon, Functional::F)
}

/// `F_ε(E, Ω)` minus the interaction of `E∩Ω^c` with `E^c∩Ω`, i.e. the energy
/// whose pair part is `∫∫_{Ω×R^n} χ_E(x) χ_{E^c}(y) K`.
pub fn functional_e_trunc(
    set: &LatticeSet,
    omega: &dyn Region,
    stencil: &PairStencil,
    g: &ForcingField,
    epsilon: f64,
) -> Result<EnergyBreakdown> {
    rescaled(set, omega, stencil, g, epsilon, Functional::ETrunc)
}

fn rescaled(
    set: &LatticeSet,
    omega: &dyn Region,
    stencil: &PairStencil,
    g: &ForcingField,
    epsilon: f64,
    functional: Functional,
) -> Result<EnergyBreakdown> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 1], got {epsilon}")));
    }
    require_forcing_grid(set, g)?;
    let scan = scan_pairs(set, omega, stencil)?;
    let cover = enumerate_unit_cubes(set.dim(), set.m(), omega, 1.0)?;
    let forcing = cover.cubes.iter().map(|q| forcing_over(set, q.cells(), g)).collect::<Vec<_>>();
    let forcing = sum::pairwise(&forcing);
    let b = breakdown_from(&scan, stencil, functional, forcing, functional == Functional::F);
    Ok(b.scaled(epsilon.powi(set.dim().n() as i32 - 1)))
}

/// Pair and forcing parts of the discrete cell energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellEnergy {
    pub pair: f64,
    pub forcing: f64,
    pub total: f64,
}

/// Per-cell pair terms `Σ_{d>0} w(d) |u_i - u_{i+d} - h p·d|`.
pub(crate) fn cell_pair_terms(u: &PeriodicProfile, p: Direction, stencil: &PairStencil) -> Vec<f64> {
    let torus = u.torus();
    let h = torus.spacing();
    let half: Vec<(Cell, f64, f64)> =
        stencil.half_offsets().map(|(d, w)| (d, w, h * (p[0] * d[0] + p[1] * d[1]) as f64)).collect();
    (0..torus.len())
        .map(|i| {
            let c = torus.cell(i);
            let ui = u.values()[i];
            let mut acc = 0.0;
            for &(d, w, shift) in &half {
                acc += w * (ui - u.u([c[0] + d[0], c[1] + d[1]]) - shift).abs();
            }
            acc
        })
        .collect()
}

/// `E_p(u) = Σ_i Σ_d ½ w(d) |u_i - u_{i+d} - h p·d| + Σ_i g_i u_i h^n` on the torus.
pub fn cell_energy(u: &PeriodicProfile, p: Direction, stencil: &PairStencil, g: &ForcingField) -> Result<CellEnergy> {
    let torus = u.torus();
    if torus.dim() != stencil.dim() || torus.m() != stencil.m() || g.torus() != torus {
        return Err(Error::Precondition("profile, stencil and forcing must share a grid".into()));
    }
    let scale = u.values().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if u.mean().abs() > 1e-12 * scale {
        return Err(Error::Precondition(format!("profile mean {:e} is not zero", u.mean())));
    }
    let pair = sum::pairwise(&cell_pair_terms(u, p, stencil));
    let vol = torus.cell_volume();
    let forcing: Vec<f64> = u.values().iter().zip(g.values()).map(|(a, b)| a * b * vol).collect();
    let forcing = sum::pairwise(&forcing);
    Ok(CellEnergy { pair, forcing, total: pair + forcing })
}

/// `E_p(0) = |Q| Σ_{d>0} w(d) h |p·d|`.
pub fn cell_energy_at_zero(p: Direction, stencil: &PairStencil) -> f64 {
    let h = stencil.spacing();
    let terms: Vec<f64> = stencil.half_offsets().map(|(d, w)| w * h * ((p[0] * d[0] + p[1] * d[1]) as f64).abs()).collect();
    let cells = stencil.m().pow(stencil.dim().n() as u32) as f64;
    cells * sum::pairwise(&terms)
}

/// Outcome of the per-cube lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubeBound {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// Compares `L_K(F∩Q, F^c∩Q) + ∫_{F∩Q} g` with
/// `(κ3/2 - ‖g‖_∞) min(|F∩Q|, |F^c∩Q|)` on one lattice-aligned unit cube.
pub fn check_cube_bound(
    set: &LatticeSet,
    cube: &CellBox,
    stencil: &PairStencil,
    g: &ForcingField,
    kappa3: f64,
) -> Result<CubeBound> {
    require_same_grid(set, stencil)?;
    require_forcing_grid(set, g)?;
    let m = set.m() as i64;
    let side = cube.shape();
    let aligned = side[0] as i64 == m
        && cube.lo[0].rem_euclid(m) == 0
        && match set.dim() {
            crate::kernel::Dim::One => true,
            crate::kernel::Dim::Two => side[1] as i64 == m && cube.lo[1].rem_euclid(m) == 0,
        };
    if !aligned {
        return Err(Error::Alignment(format!("{cube:?} is not a unit cube of the lattice")));
    }
    let grid = WeightGrid::new(stencil);
    let cells: Vec<Cell> = cube.cells().collect();
    let labels: Vec<bool> = cells.iter().map(|&c| set.contains(c)).collect();
    let terms: Vec<f64> = cells
        .iter()
        .zip(&labels)
        .map(|(x, &lx)| {
            if !lx {
                return 0.0;
            }
            let mut acc = 0.0;
            for (y, &ly) in cells.iter().zip(&labels) {
                if !ly {
                    acc += grid.get([y[0] - x[0], y[1] - x[1]]);
                }
            }
            acc
        })
        .collect();
    let pair = sum::pairwise(&terms);
    let forcing = forcing_over(set, cube.cells(), g);
    let vol = set.torus().cell_volume();
    let inside = labels.iter().filter(|b| **b).count() as f64 * vol;
    let outside = (labels.len() as f64) * vol - inside;
    let lhs = pair + forcing;
    let rhs = (0.5 * kappa3 - g.sup_norm()) * inside.min(outside);
    Ok(CubeBound { lhs, rhs, passed: lhs >= rhs - 1e-10 * kappa3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ConstantOverrides, Dim, KernelSpec};
    use crate::lattice::{build_stencil, Cutoff, TorusGrid, WeightRule};
    use crate::set::Exterior;

    fn stencil(dim: Dim, m: usize) -> PairStencil {
        let k = KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap();
        build_stencil(&k, m, Cutoff::Auto, WeightRule::CellAverage).unwrap()
    }

    #[test]
    fn halfspace_perimeter_in_one_dimension() {
        let st = stencil(Dim::One, 32);
        let torus = TorusGrid::new(Dim::One, 32).unwrap();
        let window = CellBox::new(Dim::One, [-32, 0], [32, 1]);
        let e = LatticeSet::from_exterior(
            torus,
            window,
            Exterior::new(ExteriorRule::Halfspace { p: [-1, 0], t: 0.0 }),
        );
        let b = perimeter(&e, &window, &st).unwrap();
        assert!((b.total - 2.0).abs() < 1e-8, "{b:?}");
        let c = perimeter(&e.complement(), &window, &st).unwrap();
        assert_eq!(b.total, c.total);
        assert_eq!(b.in_out, c.out_in);
    }

    #[test]
    fn split_unit_interval_interaction() {
        // ∫_0^{1/2} ∫_{1/2}^1 (y - x)^{-3/2} dy dx
        let exact = 8.0 * 0.5f64.sqrt() - 4.0;
        let st = stencil(Dim::One, 64);
        let torus = TorusGrid::new(Dim::One, 64).unwrap();
        let window = CellBox::new(Dim::One, [0, 0], [64, 1]);
        let a = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| c[0] < 32);
        let b = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| c[0] >= 32);
        let v = interaction(&a, &b, &st).unwrap();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        assert_eq!(v, interaction(&b, &a, &st).unwrap());
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let st = stencil(Dim::One, 8);
        let torus = TorusGrid::new(Dim::One, 8).unwrap();
        let window = CellBox::new(Dim::One, [0, 0], [8, 1]);
        let a = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| c[0] < 5);
        let b = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| c[0] >= 4);
        assert!(matches!(interaction(&a, &b, &st), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_profile_cell_energy() {
        let st = stencil(Dim::One, 16);
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let u = PeriodicProfile::zero(torus, [1, 0]);
        let g = ForcingField::cosine(torus, 0.05).unwrap();
        let e = cell_energy(&u, [1, 0], &st, &g).unwrap();
        assert!((e.total - 2.0).abs() < 1e-9, "{e:?}");
        assert!((e.total - cell_energy_at_zero([1, 0], &st)).abs() < 1e-14);
    }

    #[test]
    fn left_half_cube_bound() {
        let st = stencil(Dim::One, 64);
        let torus = TorusGrid::new(Dim::One, 64).unwrap();
        let window = CellBox::new(Dim::One, [-64, 0], [128, 1]);
        let f = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| (0..32).contains(&c[0]));
        let cube = CellBox::new(Dim::One, [0, 0], [64, 1]);
        let r = check_cube_bound(&f, &cube, &st, &ForcingField::zero(torus), 1.0).unwrap();
        assert!((r.lhs - (8.0 * 0.5f64.sqrt() - 4.0)).abs() < 1e-8);
        assert_eq!(r.rhs, 0.25);
        assert!(r.passed);
    }

    #[test]
    fn f_minus_e_trunc_is_the_outer_term() {
        let st = stencil(Dim::One, 16);
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let window = CellBox::new(Dim::One, [-48, 0], [64, 1]);
        let e = LatticeSet::from_fn(torus, window, Exterior::empty(), |c| (c[0] * 7).rem_euclid(5) < 2);
        let omega = CellBox::new(Dim::One, [0, 0], [32, 1]);
        let g = ForcingField::cosine(torus, 0.1).unwrap();
        let f = functional_f(&e, &omega, &st, &g, 1.0).unwrap();
        let t = functional_e_trunc(&e, &omega, &st, &g, 1.0).unwrap();
        assert!((f.total - t.total - f.out_in).abs() < 1e-12 * f.total);
        assert!(f.out_in > 0.0);
    }
}
