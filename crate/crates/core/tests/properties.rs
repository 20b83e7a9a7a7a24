use std::sync::Arc;

use proptest::prelude::*;

use planelike::cellsolver::{solve_cell_problem, SolveOptions};
use planelike::energy::{check_cube_bound, functional_j, perimeter, total_perimeter};
use planelike::geometry::{coarea_check, extract_level_sets, ThresholdRule};
use planelike::kernel::{ConstantOverrides, Dim, KernelSpec};
use planelike::lattice::{build_stencil, enumerate_unit_cubes, CellBox, Cutoff, PairStencil, TorusGrid, WeightRule};
use planelike::plateau::{brute_force_plateau, solve_plateau, PlateauObjective};
use planelike::profile::{Direction, ForcingField, PeriodicProfile};
use planelike::set::{Exterior, LatticeSet};
use planelike::stablenorm::{convexity_probe, PhiEntry};

fn k1(dim: Dim) -> KernelSpec {
    KernelSpec::k1(dim, 0.25, 0.75, ConstantOverrides::default()).unwrap()
}

fn stencil(dim: Dim, m: usize) -> PairStencil {
    build_stencil(&k1(dim), m, Cutoff::Auto, WeightRule::CellAverage).unwrap()
}

fn dim_of(two: bool) -> Dim {
    if two {
        Dim::Two
    } else {
        Dim::One
    }
}

fn centred(raw: &[f64], scale: f64) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let c: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let peak = c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    c.iter().map(|v| v * scale / peak).collect()
}

fn window(dim: Dim, lo: i64, hi: i64) -> CellBox {
    match dim {
        Dim::One => CellBox::new(dim, [lo, 0], [hi, 1]),
        Dim::Two => CellBox::new(dim, [lo, lo], [hi, hi]),
    }
}

fn bits_for(seed: &[bool], n: usize) -> Vec<bool> {
    (0..n).map(|i| seed[i % seed.len()] ^ (i % 7 == 3)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stencil_is_symmetric(two in any::<bool>(), s in 0.05f64..0.45, big_s in 0.55f64..0.95, delta in 0.3f64..1.5) {
        let dim = dim_of(two);
        let k = KernelSpec::k3(dim, s, big_s, delta, ConstantOverrides::default());
        prop_assume!(k.is_ok());
        // A fixed radius: heavy tails under the automatic cutoff reach tens of
        // periods and cost minutes per case at this resolution.
        let st = build_stencil(&k.unwrap(), 8, Cutoff::Radius(2.0), WeightRule::CellAverage).unwrap();
        for (d, w) in st.offsets().iter().zip(st.weights()) {
            prop_assert_eq!(st.weight_of([-d[0], -d[1]]).to_bits(), w.to_bits());
        }
    }

    #[test]
    fn tail_mass_decreases(two in any::<bool>(), r1 in 0.05f64..3.0, dr in 0.01f64..3.0) {
        let k = KernelSpec::k3(dim_of(two), 0.25, 0.75, 0.5, ConstantOverrides::default()).unwrap();
        prop_assert!(k.tail_mass(r1).unwrap() >= k.tail_mass(r1 + dr).unwrap());
    }

    #[test]
    fn complement_has_equal_perimeter(two in any::<bool>(), seed in prop::collection::vec(any::<bool>(), 1..64)) {
        let dim = dim_of(two);
        let m = if two { 8 } else { 16 };
        let st = stencil(dim, m);
        let torus = TorusGrid::new(dim, m).unwrap();
        let w = window(dim, -(m as i64), 2 * m as i64);
        let set = LatticeSet::from_bits(torus, w, Exterior::empty(), bits_for(&seed, w.len())).unwrap();
        let omega = torus.base_box();
        let a = perimeter(&set, &omega, &st).unwrap();
        let b = perimeter(&set.complement(), &omega, &st).unwrap();
        prop_assert_eq!(a.total.to_bits(), b.total.to_bits());
    }

    #[test]
    fn perimeter_is_submodular(two in any::<bool>(), e in prop::collection::vec(any::<bool>(), 1..64), f in prop::collection::vec(any::<bool>(), 1..64)) {
        let dim = dim_of(two);
        let m = if two { 8 } else { 16 };
        let st = stencil(dim, m);
        let torus = TorusGrid::new(dim, m).unwrap();
        let w = window(dim, 0, 2 * m as i64);
        let a = LatticeSet::from_bits(torus, w, Exterior::empty(), bits_for(&e, w.len())).unwrap();
        let b = LatticeSet::from_bits(torus, w, Exterior::empty(), bits_for(&f, w.len())).unwrap();
        let union = a.combine(&b, true).unwrap();
        let meet = a.combine(&b, false).unwrap();
        let lhs = total_perimeter(&union, &st).unwrap() + total_perimeter(&meet, &st).unwrap();
        let rhs = total_perimeter(&a, &st).unwrap() + total_perimeter(&b, &st).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn cube_positivity_at_the_threshold(two in any::<bool>(), raw in prop::collection::vec(-1.0f64..1.0, 64), fill in prop::collection::vec(any::<bool>(), 1..40)) {
        let dim = dim_of(two);
        let m = if two { 8 } else { 16 };
        let kernel = k1(dim);
        let kappa3 = kernel.bounds().kappa3;
        let st = stencil(dim, m);
        let torus = TorusGrid::new(dim, m).unwrap();
        let g = ForcingField::from_values(torus, centred(&raw[..torus.len()], 0.5 * kappa3)).unwrap();
        let cube = torus.base_box();
        let set = LatticeSet::from_bits(torus, cube, Exterior::empty(), bits_for(&fill, cube.len())).unwrap();
        let b = check_cube_bound(&set, &cube, &st, &g, kappa3).unwrap();
        prop_assert!(b.lhs - b.rhs >= -1e-10 * kappa3, "{} < {}", b.lhs, b.rhs);
    }

    #[test]
    fn level_sets_are_nested_and_satisfy_coarea(two in any::<bool>(), raw in prop::collection::vec(-2.0f64..2.0, 64), a in -2i64..3, b in -2i64..3) {
        let dim = dim_of(two);
        let m = 8;
        let torus = TorusGrid::new(dim, m).unwrap();
        let p: Direction = if two { [a, b] } else { [a, 0] };
        let values = centred(&raw[..torus.len()], 1.0);
        let u = Arc::new(PeriodicProfile::new(torus, p, values).unwrap());
        let family = extract_level_sets(&u, window(dim, -4, 8), &ThresholdRule::Quantiles(9)).unwrap();
        prop_assert!(family.is_nested());
        let st = stencil(dim, m);
        prop_assert!(coarea_check(&u, &st).unwrap().defect <= 1e-12);
    }

    #[test]
    fn plateau_matches_enumeration(two in any::<bool>(), raw in prop::collection::vec(-3.0f64..3.0, 64), seed in prop::collection::vec(any::<bool>(), 1..64), full in any::<bool>()) {
        let dim = dim_of(two);
        let m = 8;
        let st = stencil(dim, m);
        let torus = TorusGrid::new(dim, m).unwrap();
        let g = ForcingField::from_values(torus, centred(&raw[..torus.len()], 2.0)).unwrap();
        let omega = match dim {
            Dim::One => CellBox::new(dim, [0, 0], [10, 1]),
            Dim::Two => CellBox::new(dim, [0, 0], [3, 3]),
        };
        let w = window(dim, -6, 16);
        let ext = if full { Exterior::full() } else { Exterior::empty() };
        let e = LatticeSet::from_bits(torus, w, ext, bits_for(&seed, w.len())).unwrap();
        let cut = solve_plateau(&e, &omega, &st, &g, PlateauObjective::J).unwrap();
        let (_, best) = brute_force_plateau(&e, &omega, &st, &g, PlateauObjective::J).unwrap();
        prop_assert!(cut.agrees_with(best), "{} vs {}", cut.optimum, best);
    }

    #[test]
    fn complement_duality(two in any::<bool>(), raw in prop::collection::vec(-3.0f64..3.0, 64), seed in prop::collection::vec(any::<bool>(), 1..64)) {
        let dim = dim_of(two);
        let m = 8;
        let st = stencil(dim, m);
        let torus = TorusGrid::new(dim, m).unwrap();
        let g = ForcingField::from_values(torus, centred(&raw[..torus.len()], 2.0)).unwrap();
        let omega = match dim {
            Dim::One => CellBox::new(dim, [0, 0], [9, 1]),
            Dim::Two => CellBox::new(dim, [1, 0], [4, 3]),
        };
        let w = window(dim, -6, 16);
        let e = LatticeSet::from_bits(torus, w, Exterior::empty(), bits_for(&seed, w.len())).unwrap();
        let ec = e.complement();
        let neg = g.negated();
        let offset = functional_j(&ec, &omega, &st, &neg).unwrap().total - functional_j(&e, &omega, &st, &g).unwrap().total;
        let a = solve_plateau(&e, &omega, &st, &g, PlateauObjective::J).unwrap();
        let b = solve_plateau(&ec, &omega, &st, &neg, PlateauObjective::J).unwrap();
        let scale = a.optimum.abs() + offset.abs() + 1.0;
        prop_assert!((b.optimum - a.optimum - offset).abs() <= 1e-12 * scale, "{} vs {} + {}", b.optimum, a.optimum, offset);
    }

    #[test]
    fn cell_solution_is_translation_equivariant(raw in prop::collection::vec(-1.0f64..1.0, 16), shift in 1i64..16) {
        let dim = Dim::One;
        let m = 16;
        let st = stencil(dim, m);
        let kernel = k1(dim);
        let torus = TorusGrid::new(dim, m).unwrap();
        let g = ForcingField::from_values(torus, centred(&raw, 0.1 * kernel.bounds().kappa3)).unwrap();
        let opts = SolveOptions::default();
        let (u, _, _) = solve_cell_problem([1, 0], &kernel, &st, &g, &opts).unwrap();
        let (v, _, rep) = solve_cell_problem([1, 0], &kernel, &st, &g.translated([shift, 0]), &opts).unwrap();
        let expected = u.translated([shift, 0]);
        prop_assert!(rep.energy <= rep.energy_at_zero * (1.0 + 1e-12));
        for (x, y) in v.values().iter().zip(expected.values()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn elliptic_norms_pass_the_convexity_probe(a in 0.5f64..3.0, b in -0.4f64..0.4, c in 0.5f64..3.0) {
        let b = b * (a * c).sqrt();
        let tilde = |p: Direction| {
            let (x, y) = (p[0] as f64, p[1] as f64);
            (a * x * x + 2.0 * b * x * y + c * y * y).sqrt()
        };
        let ps: [Direction; 8] = [[1, 0], [0, 1], [1, 1], [2, 1], [1, 2], [2, 0], [0, 2], [3, 1]];
        let table: Vec<PhiEntry> = ps
            .iter()
            .map(|&p| PhiEntry { p, phi: tilde(p) / ((p[0] * p[0] + p[1] * p[1]) as f64).sqrt(), error: 1e-12 })
            .collect();
        let rep = convexity_probe(&table);
        prop_assert_eq!(rep.violations, 0);
        prop_assert_eq!(rep.homogeneity_failures, 0);
    }
}

#[test]
fn nonconvex_table_is_flagged() {
    let table = [
        PhiEntry { p: [1, 0], phi: 1.0, error: 1e-9 },
        PhiEntry { p: [0, 1], phi: 1.0, error: 1e-9 },
        PhiEntry { p: [1, 1], phi: 3.0, error: 1e-9 },
    ];
    assert!(convexity_probe(&table).violations > 0);
}

#[test]
fn unit_cube_count_matches_side_length() {
    for (dim, side) in [(Dim::One, 5.0), (Dim::One, 3.5), (Dim::Two, 3.0), (Dim::Two, 2.75)] {
        let m = 8;
        let n = dim.n();
        let omega = CellBox::from_physical(dim, m, &[0.0, 0.0][..n], &[side, side][..n]).unwrap();
        let cover = enumerate_unit_cubes(dim, m, &omega, 1.0).unwrap();
        assert_eq!(cover.cubes.len(), (side.floor() as usize).pow(dim.n() as u32));
    }
}
