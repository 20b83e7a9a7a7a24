//! The periodic cell problem: minimize `E_p` over mean-zero profiles and return
//! the profile together with a pairwise calibration certifying it.
//!
//! Two backends are provided. `PrimalDual` is a diagonally preconditioned
//! first-order primal–dual iteration whose dual variable is the calibration.
//! `MinCostFlow` solves the dual exactly as a circulation problem with integer
//! costs `p·d` and recovers the profile from the node potentials.

use std::cmp::Reverse;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circulation::Circulation;
use crate::energy::{cell_energy, cell_energy_at_zero};
use crate::error::{Error, Result};
use crate::kernel::{Dim, KernelSpec};
use crate::lattice::{Cell, PairStencil, TorusGrid};
use crate::profile::{Direction, ForcingField, PeriodicProfile};
use crate::sum;

/// Antisymmetric pair field stored once per unordered pair: entry `(i, k)` is
/// `z(x_i, x_i + d_k h)` for the `k`-th positive offset.
///
/// Storage is a per-offset default plus sorted per-cell overrides, so fields
/// that agree with a sign field on most pairs stay small.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    torus: TorusGrid,
    offsets: Vec<Cell>,
    base: Vec<f64>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl PartialEq for Calibration {
    fn eq(&self, other: &Self) -> bool {
        self.torus == other.torus
            && self.offsets == other.offsets
            && (0..self.torus.len()).all(|i| (0..self.offsets.len()).all(|k| self.get(i, k) == other.get(i, k)))
    }
}

impl Calibration {
    /// From dense values laid out as `i * H + k`.
    pub fn new(torus: TorusGrid, offsets: Vec<Cell>, values: Vec<f64>) -> Result<Self> {
        let h = offsets.len();
        if values.len() != torus.len() * h {
            return Err(Error::Precondition("calibration size does not match grid and stencil".into()));
        }
        let base = values[..h].to_vec();
        let rows = values
            .chunks(h.max(1))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(k, z)| *z != base[k])
                    .map(|(k, z)| (k as u32, *z))
                    .collect()
            })
            .collect();
        Calibration::from_parts(torus, offsets, base, rows)
    }

    pub(crate) fn from_parts(
        torus: TorusGrid,
        offsets: Vec<Cell>,
        base: Vec<f64>,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Result<Self> {
        let inside = |z: &f64| z.abs() <= 1.0;
        if !base.iter().all(inside) || !rows.iter().flatten().all(|(_, z)| inside(z)) {
            return Err(Error::Precondition("calibration leaves [-1, 1]".into()));
        }
        Ok(Calibration { torus, offsets, base, rows })
    }

    /// The odd sign field `z(x, y) = sign(p·(x - y))`, zero where `p·d = 0`.
    pub fn sign_field(stencil: &PairStencil, p: Direction) -> Result<Self> {
        let torus = TorusGrid::new(stencil.dim(), stencil.m())?;
        let offsets: Vec<Cell> = stencil.half_offsets().map(|(d, _)| d).collect();
        let base = offsets.iter().map(|d| -(p[0] * d[0] + p[1] * d[1]).signum() as f64).collect();
        Ok(Calibration { torus, offsets, base, rows: vec![Vec::new(); torus.len()] })
    }

    pub fn torus(&self) -> TorusGrid {
        self.torus
    }

    pub fn offsets(&self) -> &[Cell] {
        &self.offsets
    }

    /// `z(x_i, x_i + d_k h)`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&(k as u32), |e| e.0) {
            Ok(p) => row[p].1,
            Err(_) => self.base[k],
        }
    }

    /// Writes row `i` into `out`.
    pub fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for &(k, z) in &self.rows[i] {
            out[k as usize] = z;
        }
    }

    /// `z(c, c + d)` for any retained offset, by antisymmetry for negative ones.
    pub fn at(&self, c: Cell, d: Cell) -> Option<f64> {
        if let Ok(k) = self.offsets.binary_search(&d) {
            return Some(self.get(self.torus.index(c), k));
        }
        let neg = [-d[0], -d[1]];
        let k = self.offsets.binary_search(&neg).ok()?;
        Some(-self.get(self.torus.index([c[0] + d[0], c[1] + d[1]]), k))
    }

    pub fn max_abs(&self) -> f64 {
        let rows = self.rows.iter().flatten().map(|e| e.1);
        self.base.iter().copied().chain(rows).fold(0.0f64, |a, z| a.max(z.abs()))
    }

    /// Number of pairs whose value differs from the per-offset default.
    pub fn overrides(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `R_i = f_i + Σ_k w_k (z(i, k) - z(i - d_k, k))`. Offsets where both
    /// sides take the default contribute exactly zero and are skipped.
    fn residual(&self, graph: &PairGraph, f: &[f64]) -> Vec<f64> {
        let n = graph.nodes();
        let mut incoming: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (j, row) in self.rows.iter().enumerate() {
            let at = graph.coords(j);
            for &(k, z) in row {
                incoming[graph.forward(at, k as usize)].push((k, z));
            }
        }
        (0..n)
            .map(|i| {
                let ins = &mut incoming[i];
                ins.sort_unstable_by_key(|e| e.0);
                let outs = &self.rows[i];
                let (mut a, mut b) = (0usize, 0usize);
                let mut acc = f[i];
                while a < outs.len() || b < ins.len() {
                    let ka = outs.get(a).map_or(u32::MAX, |e| e.0);
                    let kb = ins.get(b).map_or(u32::MAX, |e| e.0);
                    let k = ka.min(kb);
                    let zo = if ka == k {
                        a += 1;
                        outs[a - 1].1
                    } else {
                        self.base[k as usize]
                    };
                    let zi = if kb == k {
                        b += 1;
                        ins[b - 1].1
                    } else {
                        self.base[k as usize]
                    };
                    acc += graph.weights[k as usize] * (zo - zi);
                }
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    PrimalDual,
    MinCostFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub method: SolverMethod,
    /// Target for the EL residual and the duality gap, relative to `E_p(0)`.
    pub tol: f64,
    pub max_iter: usize,
    pub checkpoint_every: usize,
    /// Ratio of dual to primal step sizes in the primal–dual iteration.
    pub step_ratio: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolverMethod::MinCostFlow,
            tol: 1e-8,
            max_iter: 200_000,
            checkpoint_every: 100,
            step_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Unconverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Best primal energy seen so far.
    pub energy: f64,
    pub el_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    pub status: SolveStatus,
    pub iterations: usize,
    pub energy: f64,
    pub energy_at_zero: f64,
    pub gap: f64,
    pub el_residual: f64,
    pub layering_defect: f64,
    /// Absolute target `tol · max(E_p(0), ‖g‖_1)` used by the stopping rule.
    pub target: f64,
    /// `‖g‖_{L^q(Q)}` with `q = n / (2 s1)`.
    pub forcing_norm: f64,
    pub checkpoints: Vec<Checkpoint>,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

/// Circulant pair graph on the torus: one edge per cell and positive offset.
pub(crate) struct PairGraph {
    torus: TorusGrid,
    offsets: Vec<Cell>,
    weights: Vec<f64>,
    /// `p·d` per positive offset.
    pub(crate) costs: Vec<i64>,
    /// Offsets reduced modulo `m`, for neighbor lookup.
    wrapped: Vec<[usize; 2]>,
}

impl PairGraph {
    fn new(stencil: &PairStencil, p: Direction) -> Result<Self> {
        let torus = TorusGrid::new(stencil.dim(), stencil.m())?;
        let m = stencil.m() as i64;
        let mut offsets = Vec::with_capacity(stencil.half_len());
        let mut weights = Vec::with_capacity(stencil.half_len());
        for (d, w) in stencil.half_offsets() {
            offsets.push(d);
            weights.push(w);
        }
        let costs = offsets.iter().map(|d| p[0] * d[0] + p[1] * d[1]).collect();
        let wrapped = offsets.iter().map(|d| [d[0].rem_euclid(m) as usize, d[1].rem_euclid(m) as usize]).collect();
        Ok(PairGraph { torus, offsets, weights, costs, wrapped })
    }

    pub(crate) fn nodes(&self) -> usize {
        self.torus.len()
    }

    pub(crate) fn half(&self) -> usize {
        self.offsets.len()
    }

    #[inline]
    pub(crate) fn coords(&self, i: usize) -> [usize; 2] {
        let m = self.torus.m();
        match self.torus.dim() {
            Dim::One => [i, 0],
            Dim::Two => [i / m, i % m],
        }
    }

    /// Index of `x_i + d_k`.
    #[inline]
    pub(crate) fn forward(&self, at: [usize; 2], k: usize) -> usize {
        let m = self.torus.m();
        let e = self.wrapped[k];
        let a = wrap_add(at[0], e[0], m);
        match self.torus.dim() {
            Dim::One => a,
            Dim::Two => a * m + wrap_add(at[1], e[1], m),
        }
    }

    /// Index of `x_i - d_k`.
    #[inline]
    pub(crate) fn backward(&self, at: [usize; 2], k: usize) -> usize {
        let m = self.torus.m();
        let e = self.wrapped[k];
        let a = wrap_sub(at[0], e[0], m);
        match self.torus.dim() {
            Dim::One => a,
            Dim::Two => a * m + wrap_sub(at[1], e[1], m),
        }
    }

    fn shift(&self, k: usize) -> f64 {
        self.costs[k] as f64 * self.torus.spacing()
    }

    /// `R_i = Σ_k w_k z(i,k) - Σ_k w_k z(i - d_k, k) + f_i`.
    fn dense_residual(&self, z: &[f64], f: &[f64]) -> Vec<f64> {
        let h = self.half();
        (0..self.nodes())
            .map(|i| {
                let at = self.coords(i);
                let mut acc = f[i];
                for k in 0..h {
                    acc += self.weights[k] * (z[i * h + k] - z[self.backward(at, k) * h + k]);
                }
                acc
            })
            .collect()
    }
}

#[inline]
fn wrap_add(a: usize, b: usize, m: usize) -> usize {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
fn wrap_sub(a: usize, b: usize, m: usize) -> usize {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

/// Per-cell forcing masses `g_i h^n`.
fn forcing_masses(g: &ForcingField) -> Vec<f64> {
    let vol = g.torus().cell_volume();
    g.values().iter().map(|v| v * vol).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// `max_i |R_i|` for the discrete Euler–Lagrange balance of `z` against `g`.
pub fn el_residual(z: &Calibration, stencil: &PairStencil, g: &ForcingField) -> Result<f64> {
    Ok(max_abs(&el_residual_field(z, stencil, g)?))
}

/// The residual `R_i` for every torus cell.
pub fn el_residual_field(z: &Calibration, stencil: &PairStencil, g: &ForcingField) -> Result<Vec<f64>> {
    let graph = PairGraph::new(stencil, [0, 0])?;
    if graph.offsets != z.offsets || z.torus != g.torus() {
        return Err(Error::Precondition("calibration, stencil and forcing must share a grid".into()));
    }
    Ok(z.residual(&graph, &forcing_masses(g)))
}

/// Certificate quantities for a primal–dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub energy: f64,
    pub el_residual: f64,
    /// `Σ w (|Δv| - z Δv) + Σ u_i R_i`: primal energy minus the dual value of `z`.
    pub gap: f64,
    pub layering_defect: f64,
}

/// Evaluates energy, EL residual, duality gap and layering defect of `(u, z)`.
pub fn certify(
    u: &PeriodicProfile,
    z: &Calibration,
    stencil: &PairStencil,
    g: &ForcingField,
) -> Result<Certificate> {
    let p = u.direction();
    let graph = PairGraph::new(stencil, p)?;
    if graph.offsets != z.offsets || z.torus != u.torus() || g.torus() != u.torus() {
        return Err(Error::Precondition("profile, calibration and forcing must share a grid".into()));
    }
    let f = forcing_masses(g);
    let residual = z.residual(&graph, &f);
    Ok(certificate_from(&graph, u.values(), |i, row| z.fill_row(i, row), &residual, &f))
}

fn certificate_from(
    graph: &PairGraph,
    u: &[f64],
    fill_row: impl Fn(usize, &mut [f64]),
    residual: &[f64],
    f: &[f64],
) -> Certificate {
    let h = graph.half();
    let n = graph.nodes();
    let mut pair = vec![0.0; n];
    let mut slack = vec![0.0; n];
    let mut layering: f64 = 0.0;
    let mut z = vec![0.0; h];
    for i in 0..n {
        fill_row(i, &mut z);
        let at = graph.coords(i);
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..h {
            let dv = u[i] - u[graph.forward(at, k)] - graph.shift(k);
            let w = graph.weights[k];
            a += w * dv.abs();
            b += w * (dv.abs() - z[k] * dv);
            layering = layering.max((dv.abs() * z[k] - dv).abs() / (1.0 + dv.abs()));
        }
        pair[i] = a;
        slack[i] = b;
    }
    let forcing: Vec<f64> = u.iter().zip(f).map(|(a, b)| a * b).collect();
    let pairing: Vec<f64> = u.iter().zip(residual).map(|(a, b)| a * b).collect();
    let energy = sum::pairwise(&pair) + sum::pairwise(&forcing);
    // Permutation-invariant so that translated problems stop identically.
    let gap = sum::permutation_invariant(&slack) + sum::permutation_invariant(&pairing);
    Certificate { energy, el_residual: max_abs(residual), gap, layering_defect: layering }
}

/// Solves the discrete cell problem in direction `p`.
pub fn solve_cell_problem(
    p: Direction,
    kernel: &KernelSpec,
    stencil: &PairStencil,
    g: &ForcingField,
    opts: &SolveOptions,
) -> Result<(PeriodicProfile, Calibration, SolveReport)> {
    kernel.require_admissible()?;
    if kernel.dim() != stencil.dim() {
        return Err(Error::Precondition("kernel and stencil dimensions differ".into()));
    }
    let torus = TorusGrid::new(stencil.dim(), stencil.m())?;
    if g.torus() != torus {
        return Err(Error::Precondition("forcing lives on a different grid".into()));
    }
    if torus.dim() == Dim::One && p[1] != 0 {
        return Err(Error::invalid("p", "one-dimensional directions have a single component"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::invalid("solver", "tol must be positive and max_iter nonzero"));
    }
    g.require_small(kernel.bounds().kappa3)?;
    let start = Instant::now();
    let e0 = cell_energy_at_zero(p, stencil);
    let f_norm = sum::pairwise(&forcing_masses(g).iter().map(|v| v.abs()).collect::<Vec<_>>());
    let target = opts.tol * e0.max(f_norm).max(f64::MIN_POSITIVE);
    let q = torus.dim().n() as f64 / (2.0 * kernel.bounds().s1);
    let forcing_norm = g.lebesgue_norm(q);
    let graph = PairGraph::new(stencil, p)?;
    let (u, z, iterations, checkpoints) = match opts.method {
        SolverMethod::PrimalDual => {
            let (u, z, iterations, checkpoints) = primal_dual(&graph, g, opts, target)?;
            (u, Calibration::new(torus, graph.offsets.clone(), z)?, iterations, checkpoints)
        }
        SolverMethod::MinCostFlow => {
            let (u, z, phases) = min_cost_flow(&graph, g)?;
            (u, z, phases, Vec::new())
        }
    };
    let u = PeriodicProfile::new(torus, p, u)?;
    let cert = certify(&u, &z, stencil, g)?;
    // Energy through the public evaluator so reports match independent checks.
    let energy = cell_energy(&u, p, stencil, g)?.total;
    let converged = cert.el_residual <= target && cert.gap.abs() <= target;
    let mut checkpoints = checkpoints;
    if checkpoints.is_empty() {
        checkpoints.push(Checkpoint { iteration: iterations, energy, el_residual: cert.el_residual, gap: cert.gap });
    }
    let report = SolveReport {
        method: opts.method,
        status: if converged { SolveStatus::Converged } else { SolveStatus::Unconverged },
        iterations,
        energy,
        energy_at_zero: e0,
        gap: cert.gap,
        el_residual: cert.el_residual,
        layering_defect: cert.layering_defect,
        target,
        forcing_norm,
        checkpoints,
        wall_time: start.elapsed(),
    };
    Ok((u, z, report))
}

type Iterate = (Vec<f64>, Vec<f64>, usize, Vec<Checkpoint>);

/// Preconditioned primal–dual iteration with steps `σ_e = r / (2 w_e)` and
/// `τ = 1 / (r Σ_d w(d))`, over-relaxation 1.
fn primal_dual(graph: &PairGraph, g: &ForcingField, opts: &SolveOptions, target: f64) -> Result<Iterate> {
    let n = graph.nodes();
    let h = graph.half();
    let f = forcing_masses(g);
    let degree = 2.0 * sum::pairwise(&graph.weights);
    let ratio = opts.step_ratio;
    let tau = 1.0 / (ratio * degree);
    let mut u = vec![0.0; n];
    let mut u_bar = u.clone();
    let mut z: Vec<f64> = (0..n).flat_map(|_| graph.costs.iter().map(|c| -c.signum() as f64)).collect();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut checkpoints = Vec::new();
    let every = opts.checkpoint_every.max(1);
    let mut best_energy = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        for i in 0..n {
            let at = graph.coords(i);
            for k in 0..h {
                let j = graph.forward(at, k);
                let dv = u_bar[i] - u_bar[j] - graph.shift(k);
                let e = i * h + k;
                z[e] = (z[e] + 0.5 * ratio * dv).clamp(-1.0, 1.0);
            }
        }
        let residual = graph.dense_residual(&z, &f);
        for i in 0..n {
            let next = u[i] - tau * residual[i];
            u_bar[i] = 2.0 * next - u[i];
            u[i] = next;
        }
        let mean = sum::permutation_invariant(&u) / n as f64;
        for (a, b) in u.iter_mut().zip(u_bar.iter_mut()) {
            *a -= mean;
            *b -= mean;
        }
        if iter % every == 0 || iter == opts.max_iter {
            let residual = graph.dense_residual(&z, &f);
            let cert = certificate_from(graph, &u, |i, row| row.copy_from_slice(&z[i * h..(i + 1) * h]), &residual, &f);
            let score = cert.el_residual.max(cert.gap.abs());
            best_energy = best_energy.min(cert.energy);
            checkpoints.push(Checkpoint { iteration: iter, energy: best_energy, el_residual: cert.el_residual, gap: cert.gap });
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, u.clone(), z.clone()));
            }
            if score <= target {
                return Ok((u, z, iter, checkpoints));
            }
        }
    }
    let (_, u, z) = best.expect("at least one checkpoint");
    Ok((u, z, opts.max_iter, checkpoints))
}

/// Exact solve of the dual circulation problem
/// `min Σ_e c_e y_e` over `|y_e| ≤ w_e` with `div y = -f`. Capacities and
/// supplies are scaled to integers near `2^60`.
fn min_cost_flow(graph: &PairGraph, g: &ForcingField) -> Result<(Vec<f64>, Calibration, usize)> {
    let n = graph.nodes();
    let f = forcing_masses(g);
    let total = 2.0 * n as f64 * sum::pairwise(&graph.weights) + f.iter().map(|v| v.abs()).sum::<f64>();
    let scale = (2f64.powi(60) / total).min(2f64.powi(1000));
    let caps: Vec<i64> = graph.weights.iter().map(|w| (w * scale).round() as i64).collect();
    let mut supply: Vec<i64> = f.iter().map(|v| -(v * scale).round() as i64).collect();
    // Balance rounding so supplies sum to zero exactly.
    let drift: i64 = supply.iter().sum();
    if drift != 0 {
        let k = (0..n).max_by_key(|&i| (supply[i].abs(), Reverse(i))).expect("nonempty torus");
        supply[k] -= drift;
    }
    let out = Circulation::new(graph, caps, supply).solve()?;
    let hstep = graph.torus.spacing();
    let u: Vec<f64> = out.potential.iter().map(|&pi| -hstep * pi as f64).collect();
    let ratio = |k: usize, y: i64| {
        if out.caps[k] == 0 {
            -graph.costs[k].signum() as f64
        } else {
            (y as f64 / out.caps[k] as f64).clamp(-1.0, 1.0)
        }
    };
    let base: Vec<f64> = (0..graph.half()).map(|k| ratio(k, out.start[k])).collect();
    let rows = out
        .departures
        .iter()
        .map(|row| {
            row.iter()
                .filter(|e| e.1 != 0)
                .map(|&(k, dev)| (k, ratio(k as usize, out.start[k as usize] + dev)))
                .collect()
        })
        .collect();
    let z = Calibration::from_parts(graph.torus, graph.offsets.clone(), base, rows)?;
    Ok((u, z, out.phases))
}

/// Most negative margin `E_p(u + σ η) - E_p(u)` over random mean-zero
/// perturbations `η` and steps `σ ∈ {1e-3, 1e-2, 1e-1}`, flagged as a violation
/// below `-1e-10 · max(1, |E_p(u)|)`.
pub fn subgradient_check(
    u: &PeriodicProfile,
    stencil: &PairStencil,
    g: &ForcingField,
    trials: usize,
    seed: u64,
) -> Result<SubgradientOutcome> {
    let p = u.direction();
    let base = cell_energy(u, p, stencil, g)?.total;
    let slack = 1e-10 * base.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = u.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(stencil.spacing());
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let eta: Vec<f64> = (0..u.torus().len()).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        for sigma in [1e-3, 1e-2, 1e-1] {
            let values = u.values().iter().zip(&eta).map(|(a, b)| a + sigma * b).collect();
            let w = PeriodicProfile::new(u.torus(), p, values)?;
            let margin = cell_energy(&w, p, stencil, g)?.total - base;
            worst = worst.min(margin);
        }
    }
    Ok(SubgradientOutcome { worst_margin: worst, violated: worst < -slack })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubgradientOutcome {
    pub worst_margin: f64,
    pub violated: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ConstantOverrides;
    use crate::lattice::{build_stencil, Cutoff, WeightRule};

    fn setup(dim: Dim, m: usize) -> (KernelSpec, PairStencil) {
        let k = KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap();
        let st = build_stencil(&k, m, Cutoff::Auto, WeightRule::CellAverage).unwrap();
        (k, st)
    }

    #[test]
    fn zero_forcing_gives_flat_profile_and_sign_calibration() {
        let (k, st) = setup(Dim::One, 16);
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let g = ForcingField::zero(torus);
        for method in [SolverMethod::MinCostFlow, SolverMethod::PrimalDual] {
            let opts = SolveOptions { method, ..SolveOptions::default() };
            let (u, z, r) = solve_cell_problem([1, 0], &k, &st, &g, &opts).unwrap();
            assert!(u.values().iter().all(|v| *v == 0.0));
            assert_eq!(z, Calibration::sign_field(&st, [1, 0]).unwrap());
            assert_eq!(r.el_residual, 0.0);
            assert!((r.energy - r.energy_at_zero).abs() < 1e-12);
        }
    }

    #[test]
    fn forcing_alone_leaves_residual() {
        let (_, st) = setup(Dim::One, 16);
        let torus = TorusGrid::new(Dim::One, 16).unwrap();
        let g = ForcingField::cosine(torus, 0.05).unwrap();
        let z = Calibration::new(torus, st.half_offsets().map(|(d, _)| d).collect(), vec![0.0; 16 * st.half_len()])
            .unwrap();
        let r = el_residual(&z, &st, &g).unwrap();
        let expected = g.sup_norm() / 16.0;
        assert!((r - expected).abs() < 1e-15);
    }

    #[test]
    fn backends_agree_in_one_dimension() {
        let (k, st) = setup(Dim::One, 32);
        let torus = TorusGrid::new(Dim::One, 32).unwrap();
        let g = ForcingField::cosine(torus, 0.05).unwrap();
        let exact = solve_cell_problem([1, 0], &k, &st, &g, &SolveOptions::default()).unwrap().2;
        assert_eq!(exact.status, SolveStatus::Converged);
        assert!(exact.energy < exact.energy_at_zero);
        let opts = SolveOptions { method: SolverMethod::PrimalDual, tol: 1e-6, ..SolveOptions::default() };
        let approx = solve_cell_problem([1, 0], &k, &st, &g, &opts).unwrap().2;
        assert!((approx.energy - exact.energy).abs() < 1e-5, "{} vs {}", approx.energy, exact.energy);
    }
}
