use std::collections::HashSet;
use std::sync::Arc;

use capbound_core::lattice::{entropy, window_predecessors};
use capbound_core::program::{flip_cols, flip_rows, transpose_square};
use capbound_core::scheme::derive_psi;
use capbound_core::solver::presolve;
use capbound_core::{
    assemble_program, build_linear_system, enumerate_patches, marginal_map, simple_scheme, validate_scheme,
    ConcaveProgram, Configuration, ConstraintSpec, IndexSet, Scheme, SchemeTerm, TotalOrder,
};
use proptest::prelude::*;

const BUILTINS: [&str; 8] = ["free", "nib", "rll-1-inf", "rll-2-inf", "rll-0-1", "rll-0-2", "rll-1-2", "rll-1-3"];

fn spec(name: &str) -> ConstraintSpec {
    ConstraintSpec::load(name).unwrap()
}

fn order() -> impl Strategy<Value = TotalOrder> {
    prop::sample::select(TotalOrder::ALL.to_vec())
}

fn cell(n: i32) -> impl Strategy<Value = (i32, i32)> {
    (0..n, 0..n)
}

fn cells(n: i32, max: usize) -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(cell(n), 0..max).prop_map(IndexSet::new)
}

/// Feasible point strictly inside the polytope: the presolved interior
/// point moved a random fraction of the way to the boundary along a random
/// null-space direction.
fn random_feasible(program: &ConcaveProgram, seed: &[f64], frac: f64) -> Vec<f64> {
    let pre = presolve(program.system()).unwrap();
    let z = pre.null_basis();
    let mut q = pre.interior().to_vec();
    if z.ncols() == 0 {
        return pre.expand(&q);
    }
    let dir: Vec<f64> = (0..z.nrows())
        .map(|a| (0..z.ncols()).map(|c| z[(a, c)] * seed[c % seed.len()]).sum())
        .collect();
    let mut step = f64::INFINITY;
    for (a, &o) in pre.active().iter().enumerate() {
        if dir[a] < 0.0 {
            step = step.min(q[o] / -dir[a]);
        }
    }
    if !step.is_finite() {
        step = 1.0;
    }
    for (a, &o) in pre.active().iter().enumerate() {
        q[o] += frac * step * dir[a];
    }
    pre.expand(&q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn orders_are_strict_and_total(o in order(), p in cell(16), q in cell(16), r in cell(16)) {
        prop_assert!(!o.precedes(p, p));
        if p != q {
            prop_assert!(o.precedes(p, q) ^ o.precedes(q, p));
        }
        if o.precedes(p, q) && o.precedes(q, r) {
            prop_assert!(o.precedes(p, r));
        }
    }

    #[test]
    fn shift_round_trips(u in cells(8, 20), a in -10i32..10, b in -10i32..10) {
        prop_assert_eq!(u.shift(a, b).shift(-a, -b), u);
    }

    #[test]
    fn predecessors_are_monotone_in_the_window(o in order(), w in cells(6, 30), keep in prop::collection::vec(any::<bool>(), 30), p in cell(6)) {
        let v: IndexSet = w.iter().zip(keep.iter().cycle()).filter(|(_, &k)| k).map(|(c, _)| c).collect();
        prop_assert!(v.is_subset(&w));
        prop_assert!(window_predecessors(o, &v, p).is_subset(&window_predecessors(o, &w, p)));
    }

    #[test]
    fn uniform_maximizes_entropy(weights in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 1e-6);
        let dist: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let uniform = vec![1.0 / n as f64; n];
        let top = entropy(&uniform).unwrap();
        prop_assert!((top - (n as f64).log2()).abs() < 1e-12);
        prop_assert!(entropy(&dist).unwrap() <= top + 1e-12);
    }

    #[test]
    fn validity_is_hereditary_and_shift_invariant(
        name in prop::sample::select(BUILTINS.to_vec()),
        rows in 1usize..4,
        cols in 1usize..4,
        pick in any::<prop::sample::Index>(),
        keep in prop::collection::vec(any::<bool>(), 9),
        a in -5i32..5,
        b in -5i32..5,
    ) {
        let spec = spec(name);
        let ps = enumerate_patches(&spec, rows, cols, 0).unwrap();
        let w = ps.configuration(pick.index(ps.len()));
        prop_assert!(spec.is_valid(&w).unwrap());
        prop_assert!(spec.is_valid(&w.shift(a, b)).unwrap());
        let sub: IndexSet = w.support().iter().zip(keep.iter().cycle()).filter(|(_, &k)| k).map(|(c, _)| c).collect();
        prop_assert!(spec.is_valid(&w.restrict(&sub).unwrap()).unwrap());
    }

    #[test]
    fn free_accepts_everything(values in prop::collection::vec(0u8..2, 12)) {
        let rows: Vec<&[u8]> = values.chunks(4).collect();
        let w = Configuration::from_rows(&rows).unwrap();
        prop_assert!(spec("free").is_valid(&w).unwrap());
    }

    #[test]
    fn invalid_configurations_shift_to_invalid(name in prop::sample::select(BUILTINS.to_vec()), values in prop::collection::vec(0u8..2, 9), a in -4i32..4, b in -4i32..4) {
        let spec = spec(name);
        let rows: Vec<&[u8]> = values.chunks(3).collect();
        let w = Configuration::from_rows(&rows).unwrap();
        prop_assert_eq!(spec.is_valid(&w).unwrap(), spec.is_valid(&w.shift(a, b)).unwrap());
    }

    #[test]
    fn context_excludes_anchor(
        (o, r, s, ai, aj) in (order(), 1usize..5, 1usize..6)
            .prop_flat_map(|(o, r, s)| (Just(o), Just(r), Just(s), 0..r as i32, 0..s as i32))
    ) {
        let term = SchemeTerm { order: o, rho: 1.0, period: vec![vec![1]], anchors: vec![(ai, aj)] };
        let scheme = Scheme { r, s, terms: vec![term.clone()] };
        prop_assume!(validate_scheme(&scheme).is_valid());
        let window = IndexSet::rect(r, s);
        for set in derive_psi(&term, 0, r, s).unwrap() {
            prop_assert!(set.psi.is_subset(&window));
            prop_assert!(!set.psi.contains(set.anchor));
            prop_assert!(set.upsilon.contains(set.anchor));
        }
    }

    #[test]
    fn lex_context_size(r in 1usize..6, s in 1usize..7, t in 0usize..7) {
        prop_assume!(t < s);
        let scheme = simple_scheme(r, s, t).unwrap();
        let psi = &derive_psi(&scheme.terms[0], 0, r, s).unwrap()[0].psi;
        prop_assert_eq!(psi.len(), (r - 1) * s + t);
        if t + 1 < s {
            let next = simple_scheme(r, s, t + 1).unwrap();
            let grown = &derive_psi(&next.terms[0], 0, r, s).unwrap()[0].psi;
            prop_assert!(psi.is_subset(grown));
            prop_assert_eq!(grown.len(), psi.len() + 1);
        }
    }

    #[test]
    fn symmetry_transforms_are_involutions(values in prop::collection::vec(0u8..2, 12)) {
        let (r, s) = (3, 4);
        prop_assert_eq!(flip_rows(&flip_rows(&values, r, s), r, s), values.clone());
        prop_assert_eq!(flip_cols(&flip_cols(&values, r, s), r, s), values.clone());
        let square = &values[..9];
        prop_assert_eq!(transpose_square(&transpose_square(square, 3), 3), square.to_vec());
    }
}

#[test]
fn declared_symmetries_hold() {
    for name in BUILTINS {
        spec(name).require_symmetry(3).unwrap();
    }
}

#[test]
fn padding_only_removes_patches() {
    for name in BUILTINS {
        let spec = spec(name);
        for (r, s) in [(2, 2), (2, 3), (3, 2)] {
            let mut previous: Option<HashSet<Vec<u8>>> = None;
            for delta in 0..3 {
                let ps = enumerate_patches(&spec, r, s, delta).unwrap();
                let set: HashSet<Vec<u8>> = ps.iter().map(<[u8]>::to_vec).collect();
                if let Some(prev) = &previous {
                    assert!(set.is_subset(prev), "{name} {r}x{s} delta {delta}");
                }
                previous = Some(set);
            }
        }
    }
}

#[test]
fn marginal_groups_are_valid_and_shift_consistent() {
    for name in BUILTINS {
        let spec = spec(name);
        let ps = enumerate_patches(&spec, 3, 3, 0).unwrap();
        let top = marginal_map(&ps, &IndexSet::rect(2, 3)).unwrap();
        let bottom = marginal_map(&ps, &IndexSet::rect(2, 3).shift(1, 0)).unwrap();
        assert_eq!(top.num_groups(), bottom.num_groups(), "{name}");
        let left = marginal_map(&ps, &IndexSet::rect(3, 2)).unwrap();
        let right = marginal_map(&ps, &IndexSet::rect(3, 2).shift(0, 1)).unwrap();
        assert_eq!(left.num_groups(), right.num_groups(), "{name}");
        for g in 0..top.num_groups() {
            assert!(spec.is_valid(&top.group_configuration(g)).unwrap());
        }
    }
}

#[test]
fn uniform_over_free_patches_is_feasible() {
    let spec = spec("free");
    for (r, s) in [(2, 2), (2, 3), (3, 3)] {
        let ps = enumerate_patches(&spec, r, s, 0).unwrap();
        let system = build_linear_system(&ps, spec.symmetry());
        let p = vec![1.0 / ps.len() as f64; ps.len()];
        assert!(system.residual(&p) < 1e-12);
    }
}

#[test]
fn objective_is_at_most_one_bit_on_feasible_points() {
    let mut rng_state = 7u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for name in BUILTINS {
        let spec = spec(name);
        let ps = Arc::new(enumerate_patches(&spec, 2, 3, 0).unwrap());
        for t in 0..3 {
            let program = assemble_program(ps.clone(), &spec, &simple_scheme(2, 3, t).unwrap()).unwrap();
            for _ in 0..5 {
                let seed: Vec<f64> = (0..16).map(|_| next()).collect();
                let p = random_feasible(&program, &seed, 0.5 + 0.5 * next().abs());
                let f = program.objective_value(&p).unwrap();
                assert!(f <= 1.0 + 1e-12 && f >= -1e-12, "{name} t={t}: {f}");
                assert!(program.system().residual(&p) < 1e-9);
            }
        }
    }
}
