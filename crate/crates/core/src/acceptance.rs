//! The acceptance suite: thirteen numbered criteria, each producing measured
//! values and a pass/fail verdict. Shared by `planelike check` and the
//! `acceptance` integration test.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cellsolver::{solve_cell_problem, SolveOptions, SolveReport, SolveStatus};
use crate::config::Suite;
use crate::energy::check_cube_bound;
use crate::error::{Error, Result};
use crate::geometry::{coarea_check, density_estimates, extract_level_sets, planelike_report, ThresholdRule};
use crate::kernel::{ConstantOverrides, Dim, KernelSpec};
use crate::lattice::{build_stencil, CellBox, Cutoff, PairStencil, TorusGrid, WeightRule};
use crate::plateau::{brute_force_plateau, class_a_window_check, solve_plateau, PlateauObjective};
use crate::profile::{Direction, ForcingField, PeriodicProfile};
use crate::set::{Exterior, ExteriorRule, LatticeSet};
use crate::stablenorm::{
    convexity_probe, gamma_limsup_experiment, halfspace_phi_oracle, isoperimetric_scan, large_domain_scan,
    median_threshold, phi_direction_sweep, stable_norm_estimate, FaceProfile, PhiEntry, RadiusSample, Shape,
    SolvedCell,
};

pub const FORMAT_VERSION: u32 = 1;

/// `(id, key, title)` of every criterion.
pub const CRITERIA: [(u8, &str, &str); 13] = [
    (1, "kernel", "kernel admissibility and first moment"),
    (2, "coarea", "discrete coarea identity"),
    (3, "el-certification", "Euler-Lagrange certification of the cell problem"),
    (4, "class-a", "class-A windows and cut versus enumeration"),
    (5, "positivity", "per-cube lower bound"),
    (6, "stable-norm", "stable norm against the flat oracle"),
    (7, "planelike", "slab widths and oscillation"),
    (8, "density", "density estimates"),
    (9, "isoperimetric", "isoperimetric scaling of balls"),
    (10, "large-domain", "perimeter of large boxes"),
    (11, "gamma", "recovery sequence for a square"),
    (12, "convexity", "direction sweep and convexity"),
    (13, "determinism", "bit-identical reruns"),
];

/// Resolves `all`, numeric ids and keys; unknown entries are an error.
pub fn parse_criteria(list: &[String]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in list {
        let item = item.trim();
        if item == "all" {
            out.extend(CRITERIA.iter().map(|c| c.0));
            continue;
        }
        let found = CRITERIA.iter().find(|c| c.1 == item || item.parse::<u8>().ok() == Some(c.0));
        match found {
            Some(c) => out.push(c.0),
            None => {
                let known: Vec<&str> = CRITERIA.iter().map(|c| c.1).collect();
                return Err(Error::invalid("criteria", format!("unknown criterion {item:?}; known: all, {}", known.join(", "))));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("criteria", "no criteria selected"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub key: String,
    pub title: String,
    pub status: Status,
    pub measures: Vec<Measure>,
    pub notes: Vec<String>,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "[{tag}] {:>2} {:<16}", self.id, self.key)?;
        for m in &self.measures {
            write!(f, " {}={:.6e}{}", m.name, m.value, if m.ok { "" } else { "(!)" })?;
        }
        for n in &self.notes {
            write!(f, " | {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub format_version: u32,
    pub suite: Suite,
    pub outcomes: Vec<CriterionOutcome>,
    pub passed: bool,
}

/// Collects measures for one criterion.
#[derive(Default)]
struct Record {
    measures: Vec<Measure>,
    notes: Vec<String>,
}

impl Record {
    fn push(&mut self, name: impl Into<String>, value: f64, requirement: String, ok: bool) -> &mut Self {
        self.measures.push(Measure { name: name.into(), value, requirement, ok: ok && !value.is_nan() });
        self
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(name, value, format!("<= {bound:e}"), value <= bound)
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(name, value, format!(">= {bound:e}"), value >= bound)
    }

    fn between(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> &mut Self {
        self.push(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi)
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool) -> &mut Self {
        self.push(name, if ok { 1.0 } else { 0.0 }, "= 1".into(), ok)
    }

    fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    fn finish(self, id: u8) -> CriterionOutcome {
        let status = if self.measures.iter().all(|m| m.ok) { Status::Pass } else { Status::Fail };
        outcome(id, status, self.measures, self.notes)
    }
}

fn outcome(id: u8, status: Status, measures: Vec<Measure>, notes: Vec<String>) -> CriterionOutcome {
    let (_, key, title) = CRITERIA[id as usize - 1];
    CriterionOutcome { id, key: key.to_string(), title: title.to_string(), status, measures, notes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Forcing {
    Zero,
    Cosine,
}

const AMPLITUDE: f64 = 0.05;

/// A solved cell problem kept for reuse across criteria.
pub struct Solved {
    pub profile: Arc<PeriodicProfile>,
    pub report: SolveReport,
    pub stencil: Arc<PairStencil>,
    pub g: ForcingField,
}

impl Solved {
    fn cell(&self) -> SolvedCell<'_> {
        SolvedCell { profile: &self.profile, stencil: &self.stencil, g: &self.g }
    }
}

type SolveKey = (usize, usize, Direction, Forcing);

/// Kernels, stencils and cell solutions shared by the criteria of one run.
#[derive(Default)]
pub struct Context {
    stencils: Mutex<BTreeMap<(usize, usize), Arc<PairStencil>>>,
    solves: Mutex<BTreeMap<SolveKey, Arc<Solved>>>,
}

fn k1(dim: Dim) -> Result<KernelSpec> {
    KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default())
}

impl Context {
    pub fn new() -> Self {
        Context::default()
    }

    fn stencil(&self, dim: Dim, m: usize) -> Result<Arc<PairStencil>> {
        let key = (dim.n(), m);
        if let Some(s) = self.stencils.lock().expect("stencil cache").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(build_stencil(&k1(dim)?, m, Cutoff::Auto, WeightRule::CellAverage)?);
        self.stencils.lock().expect("stencil cache").insert(key, s.clone());
        Ok(s)
    }

    fn solve(&self, dim: Dim, m: usize, p: Direction, forcing: Forcing) -> Result<Arc<Solved>> {
        let key = (dim.n(), m, p, forcing);
        if let Some(s) = self.solves.lock().expect("solve cache").get(&key) {
            return Ok(s.clone());
        }
        let stencil = self.stencil(dim, m)?;
        let torus = TorusGrid::new(dim, m)?;
        let g = match forcing {
            Forcing::Zero => ForcingField::zero(torus),
            Forcing::Cosine => ForcingField::cosine(torus, AMPLITUDE)?,
        };
        let (u, _, report) = solve_cell_problem(p, &k1(dim)?, &stencil, &g, &SolveOptions::default())?;
        let solved = Arc::new(Solved { profile: Arc::new(u), report, stencil, g });
        self.solves.lock().expect("solve cache").insert(key, solved.clone());
        Ok(solved)
    }
}

/// Runs the selected criteria in order, printing nothing.
pub fn run(ids: &[u8], suite: Suite) -> AcceptanceReport {
    run_with(&Context::new(), ids, suite, |_| {})
}

/// Runs the selected criteria, calling `each` as every outcome completes.
pub fn run_with(ctx: &Context, ids: &[u8], suite: Suite, mut each: impl FnMut(&CriterionOutcome)) -> AcceptanceReport {
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for &id in ids {
        let o = if id == 13 {
            let others: Vec<u8> = if outcomes.is_empty() {
                CRITERIA.iter().map(|c| c.0).filter(|&i| i != 13).collect()
            } else {
                outcomes.iter().map(|o| o.id).collect()
            };
            let first = if outcomes.is_empty() { evaluate_all(&Context::new(), &others, suite) } else { outcomes.clone() };
            determinism(&first, &others, suite)
        } else {
            evaluate(ctx, id, suite)
        };
        each(&o);
        outcomes.push(o);
    }
    let passed = outcomes.iter().all(|o| o.status != Status::Fail);
    AcceptanceReport { format_version: FORMAT_VERSION, suite, outcomes, passed }
}

fn evaluate_all(ctx: &Context, ids: &[u8], suite: Suite) -> Vec<CriterionOutcome> {
    ids.iter().map(|&id| evaluate(ctx, id, suite)).collect()
}

fn evaluate(ctx: &Context, id: u8, suite: Suite) -> CriterionOutcome {
    let result = match id {
        1 => kernel_admissibility(suite),
        2 => coarea(ctx, suite),
        3 => el_certification(ctx, suite),
        4 => class_a(ctx),
        5 => positivity(ctx, suite),
        6 => stable_norm(ctx, suite),
        7 if suite == Suite::Full => planelike(ctx),
        8 if suite == Suite::Full => density(ctx),
        9 if suite == Suite::Full => isoperimetric(),
        10 => large_domain(ctx, suite),
        11 => gamma(ctx, suite),
        12 if suite == Suite::Full => convexity(ctx),
        _ => return outcome(id, Status::Skipped, Vec::new(), vec!["no one-dimensional part".into()]),
    };
    result.unwrap_or_else(|e| outcome(id, Status::Fail, Vec::new(), vec![format!("error: {e}")]))
}

fn dims(suite: Suite) -> &'static [Dim] {
    match suite {
        Suite::Full => &[Dim::One, Dim::Two],
        Suite::OneD => &[Dim::One],
    }
}

fn kernel_admissibility(suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    for &dim in dims(suite) {
        let n = dim.n();
        let a = k1(dim)?.validate_assumptions(10_000)?;
        r.holds(format!("k1_n{n}_admissible"), a.admissible);
        let k3 = KernelSpec::k3(dim, 0.25, 0.75, 0.5, ConstantOverrides::default())?;
        r.holds(format!("k3_n{n}_admissible"), k3.validate_assumptions(10_000)?.admissible);
    }
    let moment = k1(Dim::One)?.first_moment()?;
    r.at_most("first_moment_rel_error", (moment - 4.0).abs() / 4.0, 1e-6);
    Ok(r.finish(1))
}

fn random_profile(rng: &mut ChaCha8Rng, torus: TorusGrid, p: Direction) -> Result<PeriodicProfile> {
    let scale = rng.gen_range(0.1..2.0);
    let values = (0..torus.len()).map(|_| rng.gen_range(-scale..scale)).collect();
    let mut u = PeriodicProfile::new(torus, p, values)?;
    u.recenter();
    Ok(u)
}

fn coarea(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for &dim in dims(suite) {
        let (m, directions): (usize, &[Direction]) = match dim {
            Dim::One => (64, &[[0, 0], [1, 0], [2, 0], [-1, 0]]),
            Dim::Two => (16, &[[0, 0], [1, 0], [1, 1], [2, 1], [-1, 3]]),
        };
        let stencil = ctx.stencil(dim, m)?;
        let torus = TorusGrid::new(dim, m)?;
        let mut worst = 0.0f64;
        for k in 0..50 {
            let u = random_profile(&mut rng, torus, directions[k % directions.len()])?;
            worst = worst.max(coarea_check(&u, &stencil)?.defect);
        }
        r.at_most(format!("max_defect_n{}", dim.n()), worst, 1e-12);
    }
    Ok(r.finish(2))
}

fn el_certification(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let mut cases: Vec<(Dim, usize, Direction)> = vec![(Dim::One, 64, [1, 0])];
    if suite == Suite::Full {
        cases.extend([(Dim::Two, 48, [1, 0]), (Dim::Two, 48, [1, 1])]);
    }
    for (dim, m, p) in cases {
        let tag = format!("n{}_p{}{}", dim.n(), p[0], p[1]);
        let s = ctx.solve(dim, m, p, Forcing::Cosine)?;
        let scale = 1e-8 * s.report.energy_at_zero;
        r.holds(format!("{tag}_converged"), s.report.status == SolveStatus::Converged);
        r.at_most(format!("{tag}_iterations"), s.report.iterations as f64, 200_000.0);
        r.at_most(format!("{tag}_el_residual"), s.report.el_residual, scale);
        r.at_most(format!("{tag}_gap"), s.report.gap, scale);
        let z = ctx.solve(dim, m, p, Forcing::Zero)?;
        let sup = z.profile.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        r.at_most(format!("{tag}_zero_forcing_sup_u"), sup, 1e-10);
        let e0 = z.report.energy_at_zero;
        r.at_most(format!("{tag}_zero_forcing_energy_error"), (z.report.energy - e0).abs() / e0, 1e-10);
    }
    Ok(r.finish(3))
}

fn class_a(ctx: &Context) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let m = 64usize;
    let s = ctx.solve(Dim::One, m, [1, 0], Forcing::Cosine)?;
    let family = extract_level_sets(&s.profile, s.profile.torus().base_box(), &ThresholdRule::default())?;
    let mi = m as i64;
    let windows: Vec<CellBox> = (-2 * mi..=2 * mi).map(|a| CellBox::new(Dim::One, [a, 0], [a + mi, 1])).collect();
    let frame = CellBox::new(Dim::One, [-5 * mi, 0], [6 * mi, 1]);
    let torus = s.profile.torus();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for (&t, _) in family.thresholds.iter().zip(&family.in_tp).filter(|(_, k)| **k) {
        let set = LatticeSet::from_exterior(torus, frame, Exterior::new(ExteriorRule::Level { profile: s.profile.clone(), t }));
        let rep = class_a_window_check(&set, &windows, &s.stencil, &s.g)?;
        worst = worst.max(rep.worst_gap);
        checked += rep.windows.len();
    }
    r.at_most("max_window_gap", worst, 10.0 * s.report.target);
    r.note(format!("{checked} windows"));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let small = ctx.stencil(Dim::One, 8)?;
    let torus = TorusGrid::new(Dim::One, 8)?;
    let mut mismatches = 0usize;
    let mut ties = 0usize;
    for _ in 0..200 {
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mean = raw.iter().sum::<f64>() / 8.0;
        let g = ForcingField::from_values(torus, raw.iter().map(|v| v - mean).collect())?;
        let window = CellBox::new(Dim::One, [-20, 0], [32, 1]);
        let exterior = if rng.gen_bool(0.5) { Exterior::full() } else { Exterior::empty() };
        let bits = (0..window.len()).map(|_| rng.gen_bool(0.5)).collect();
        let e = LatticeSet::from_bits(torus, window, exterior, bits)?;
        let omega = CellBox::new(Dim::One, [0, 0], [12, 1]);
        let cut = solve_plateau(&e, &omega, &small, &g, PlateauObjective::J)?;
        let (brute, best) = brute_force_plateau(&e, &omega, &small, &g, PlateauObjective::J)?;
        if !cut.agrees_with(best) {
            mismatches += 1;
        } else if cut.set.materialize(&omega) != brute.materialize(&omega) {
            ties += 1;
        }
    }
    r.at_most("cut_vs_enumeration_mismatches", mismatches as f64, 0.0);
    r.note(format!("{ties} degenerate ties with distinct minimizers"));
    Ok(r.finish(4))
}

fn positivity(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &dim in dims(suite) {
        let m = match dim {
            Dim::One => 64,
            Dim::Two => 16,
        };
        let kernel = k1(dim)?;
        let kappa3 = kernel.bounds().kappa3;
        let stencil = ctx.stencil(dim, m)?;
        let torus = TorusGrid::new(dim, m)?;
        let cube = torus.base_box();
        let mut violations = 0usize;
        let mut worst = f64::INFINITY;
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..torus.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            let centred: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let peak = centred.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let g = ForcingField::from_values(torus, centred.iter().map(|v| v * 0.25 * kappa3 / peak).collect())?;
            let fill = rng.gen_range(0.0..1.0);
            let bits = (0..cube.len()).map(|_| rng.gen_bool(fill)).collect();
            let set = LatticeSet::from_bits(torus, cube, Exterior::empty(), bits)?;
            let b = check_cube_bound(&set, &cube, &stencil, &g, kappa3)?;
            worst = worst.min((b.lhs - b.rhs) / kappa3);
            if !b.passed {
                violations += 1;
            }
        }
        r.at_most(format!("violations_n{}", dim.n()), violations as f64, 0.0);
        r.at_least(format!("worst_margin_over_kappa3_n{}", dim.n()), worst, -1e-10);
    }
    Ok(r.finish(5))
}

fn stable_norm(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let mut cases: Vec<(Dim, Direction)> = vec![(Dim::One, [1, 0])];
    if suite == Suite::Full {
        cases.extend([(Dim::Two, [1, 0]), (Dim::Two, [1, 1])]);
    }
    for (dim, p) in cases {
        let kernel = k1(dim)?;
        let oracle = halfspace_phi_oracle(&kernel, [p[0] as f64, p[1] as f64])?;
        let coarse = ctx.solve(dim, 32, p, Forcing::Zero)?;
        let fine = ctx.solve(dim, 64, p, Forcing::Zero)?;
        let est = stable_norm_estimate(&[coarse.cell(), fine.cell()], &[4.0, 8.0, 16.0], kernel.bounds().s1)?;
        let tag = format!("n{}_p{}{}", dim.n(), p[0], p[1]);
        r.at_most(format!("{tag}_rel_error"), (est.value - oracle).abs() / oracle, 0.02);
        r.note(format!("{tag}: estimate {:.6} oracle {:.6} band {:.1e}", est.value, oracle, est.error_band));
    }
    Ok(r.finish(6))
}

fn planelike(ctx: &Context) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let m = 32usize;
    let mi = m as i64;
    let window = CellBox::new(Dim::Two, [-mi, -mi], [2 * mi, 2 * mi]);
    let mut widths = Vec::new();
    for p in [[1, 0], [1, 1], [2, 1]] {
        let s = ctx.solve(Dim::Two, m, p, Forcing::Cosine)?;
        let family = extract_level_sets(&s.profile, window, &ThresholdRule::default())?;
        let rep = planelike_report(&family, &s.profile)?;
        let finite = rep.rows.iter().filter(|row| row.in_tp).all(|row| row.half_width.is_finite() && row.boundary_cells > 0);
        r.holds(format!("p{}{}_finite", p[0], p[1]), finite);
        widths.push(rep.max_half_width);
    }
    let lo = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = widths.iter().copied().fold(0.0, f64::max);
    r.at_most("slab_width_ratio", hi / lo, 3.0);
    let mut osc = Vec::new();
    for p in [[1, 0], [2, 0], [4, 0]] {
        let s = ctx.solve(Dim::Two, m, p, Forcing::Cosine)?;
        let family = extract_level_sets(&s.profile, s.profile.torus().base_box(), &ThresholdRule::default())?;
        osc.push(planelike_report(&family, &s.profile)?.osc_ratio);
    }
    let lo = osc.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = osc.iter().copied().fold(0.0, f64::max);
    r.at_most("osc_ratio_variation", (hi - lo) / lo, 0.2);
    Ok(r.finish(7))
}

fn density(ctx: &Context) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let coarse_h = 1.0 / 64.0;
    let radii = [4.0 * coarse_h, 8.0 * coarse_h, 16.0 * coarse_h];
    let mut extremes = Vec::new();
    for m in [64usize, 128] {
        let s = ctx.solve(Dim::Two, m, [1, 0], Forcing::Cosine)?;
        let t = median_threshold(&s.profile)?;
        let base = s.profile.torus().base_box();
        let reach = (radii[2] * m as f64).ceil() as i64 + 1;
        let frame = base.expand([reach, reach]);
        let set = LatticeSet::from_exterior(
            s.profile.torus(),
            frame,
            Exterior::new(ExteriorRule::Level { profile: s.profile.clone(), t }),
        );
        let rep = density_estimates(&set, &base, &radii, 1, 0.1)?;
        r.at_least(format!("m{m}_min_ratio"), rep.min_ratio, 0.1);
        r.at_most(format!("m{m}_max_ratio"), rep.max_ratio, Dim::Two.ball_volume() - 0.1);
        extremes.push((rep.min_ratio, rep.max_ratio));
    }
    let (a, b) = (extremes[0], extremes[1]);
    r.at_most("min_ratio_change", (b.0 / a.0 - 1.0).abs(), 0.25);
    r.at_most("max_ratio_change", (b.1 / a.1 - 1.0).abs(), 0.25);
    Ok(r.finish(8))
}

fn isoperimetric() -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let kernel = k1(Dim::Two)?;
    let delta = kernel.bounds().delta;
    let fine = 128usize;
    let h = 1.0 / fine as f64;
    let mut samples: Vec<RadiusSample> =
        [4.0 * h, 8.0 * h, 16.0 * h, delta / 8.0].iter().map(|&r| RadiusSample { r, m: fine }).collect();
    samples.extend([6.0, 8.0, 12.0, 16.0].iter().map(|&r| RadiusSample { r, m: 8 }));
    let rep = isoperimetric_scan(&kernel, &samples, WeightRule::CellAverage)?;
    r.between("small_r_slope", rep.small_slope.unwrap_or(f64::NAN), 1.35, 1.65);
    r.between("large_r_slope", rep.large_slope.unwrap_or(f64::NAN), 0.85, 1.15);
    Ok(r.finish(9))
}

fn large_domain(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let one = k1(Dim::One)?;
    let st = ctx.stencil(Dim::One, 16)?;
    let rep = large_domain_scan(&st, &one, [1.0, 1.0], &[3.0, 4.0, 8.0, 16.0])?;
    let worst = rep.rows.iter().map(|row| (row.ratio - 4.0).abs() / 4.0).fold(0.0, f64::max);
    r.at_most("n1_max_rel_deviation_from_4", worst, 1e-6);
    if suite == Suite::Full {
        let two = k1(Dim::Two)?;
        let st = ctx.stencil(Dim::Two, 8)?;
        let rep = large_domain_scan(&st, &two, [1.0, 1.0], &[4.0, 8.0, 16.0])?;
        r.at_most("n2_last_two_change", rep.last_two_change.unwrap_or(f64::NAN), 0.25);
        r.note(format!("n2 ratios {:?}", rep.rows.iter().map(|x| x.ratio).collect::<Vec<_>>()));
    }
    Ok(r.finish(10))
}

fn gamma(ctx: &Context, suite: Suite) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let schedule = [0.25, 0.125, 0.0625];
    if suite == Suite::OneD {
        let kernel = k1(Dim::One)?;
        let oracle = halfspace_phi_oracle(&kernel, [1.0, 0.0])?;
        let stencil = ctx.stencil(Dim::One, 16)?;
        let torus = TorusGrid::new(Dim::One, 16)?;
        let family: Vec<FaceProfile> = [[1, 0], [-1, 0]]
            .iter()
            .map(|&p| FaceProfile { profile: Arc::new(PeriodicProfile::zero(torus, p)), phi: oracle })
            .collect();
        let shape = Shape::Interval { a: 0.0, b: 1.0 };
        let ex = gamma_limsup_experiment(&shape, [[-0.25, 0.0], [1.25, 1.0]], &schedule, &family, &stencil, &ForcingField::zero(torus))?;
        r.at_most("interval_rel_error", ex.rows.last().map_or(f64::NAN, |x| x.relative_error), 0.10);
        r.holds("interval_error_decreasing", ex.error_decreasing);
        return Ok(r.finish(11));
    }
    let square = Shape::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
    let omega = [[-0.25, -0.25], [1.25, 1.25]];
    let faces = [[1, 0], [-1, 0], [0, 1], [0, -1]];

    let kernel = k1(Dim::Two)?;
    let oracle = halfspace_phi_oracle(&kernel, [1.0, 0.0])?;
    let m = 16usize;
    let torus = TorusGrid::new(Dim::Two, m)?;
    let family: Vec<FaceProfile> =
        faces.iter().map(|&p| FaceProfile { profile: Arc::new(PeriodicProfile::zero(torus, p)), phi: oracle }).collect();
    let ex = gamma_limsup_experiment(&square, omega, &schedule, &family, &*ctx.stencil(Dim::Two, m)?, &ForcingField::zero(torus))?;
    r.at_most("zero_forcing_rel_error", ex.rows.last().map_or(f64::NAN, |x| x.relative_error), 0.10);
    r.holds("zero_forcing_error_decreasing", ex.error_decreasing);

    let m = 32usize;
    let mut family = Vec::new();
    for p in faces {
        let s = ctx.solve(Dim::Two, m, p, Forcing::Cosine)?;
        let est = stable_norm_estimate(&[s.cell()], &[4.0, 8.0, 16.0], kernel.bounds().s1)?;
        family.push(FaceProfile { profile: s.profile.clone(), phi: est.value });
    }
    let s = ctx.solve(Dim::Two, m, faces[0], Forcing::Cosine)?;
    let ex = gamma_limsup_experiment(&square, omega, &schedule, &family, &s.stencil, &s.g)?;
    r.at_most("cosine_rel_error", ex.rows.last().map_or(f64::NAN, |x| x.relative_error), 0.15);
    Ok(r.finish(11))
}

fn convexity(ctx: &Context) -> Result<CriterionOutcome> {
    let mut r = Record::default();
    let kernel = k1(Dim::Two)?;
    let directions: [Direction; 6] = [[1, 0], [2, 1], [1, 1], [1, 2], [0, 1], [2, 0]];
    let mut table = Vec::new();
    for p in directions {
        let s = ctx.solve(Dim::Two, 32, p, Forcing::Cosine)?;
        let est = stable_norm_estimate(&[s.cell()], &[4.0, 8.0, 16.0], kernel.bounds().s1)?;
        table.push(PhiEntry { p, phi: est.value, error: est.error_band });
    }
    let sweep = phi_direction_sweep(&table)?;
    let probe = convexity_probe(&table);
    r.at_most("convexity_violations", probe.violations as f64, 0.0);
    r.at_most("homogeneity_failures", probe.homogeneity_failures as f64, 0.0);
    r.note(format!("modulus {:.4}, spread {:.4}, worst margin {:.3e}", sweep.modulus, sweep.spread, probe.worst_margin));

    let flat: Vec<PhiEntry> = directions
        .iter()
        .map(|&p| Ok(PhiEntry { p, phi: halfspace_phi_oracle(&kernel, [p[0] as f64, p[1] as f64])?, error: 0.0 }))
        .collect::<Result<_>>()?;
    let flat_sweep = phi_direction_sweep(&flat)?;
    r.at_most("zero_forcing_sweep_spread", flat_sweep.spread / flat[0].phi, kernel.quad_tol());
    Ok(r.finish(12))
}

fn determinism(first: &[CriterionOutcome], ids: &[u8], suite: Suite) -> CriterionOutcome {
    let second = evaluate_all(&Context::new(), ids, suite);
    let encode = |o: &[CriterionOutcome]| serde_json::to_string(o).unwrap_or_default();
    let mut r = Record::default();
    let same = encode(first) == encode(&second);
    r.holds("bit_identical", same);
    r.note(format!("{} criteria rerun", ids.len()));
    r.finish(13)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_lists() {
        assert_eq!(parse_criteria(&["all".into()]).unwrap().len(), 13);
        assert_eq!(parse_criteria(&["coarea".into(), "2".into()]).unwrap(), vec![2]);
        assert!(parse_criteria(&["bogus".into()]).is_err());
    }
}
