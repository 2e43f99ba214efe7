mod common;

use common::{brute_force_distance, fill, rng, rooted_topologies, rtree};
use proptest::prelude::*;
use treespace::geodesic::{boundary_trees, cone_path, geodesic, geodesic_distance, lower_bound, point_on_path};
use treespace::newick::parse_newick;
use treespace::splits::{tree_to_splits, tree_to_splits_in};

#[test]
fn oracle_sanity() {
    let t = parse_newick("((A:1,B:1):1,C:1,D:1);").unwrap();
    let u = parse_newick("((A:1,C:1):1,B:1,D:1);").unwrap();
    assert!((brute_force_distance(&t, &u) - 2.0).abs() < 1e-12);
    assert_eq!(brute_force_distance(&t, &t), 0.0);
    let c = parse_newick("(((A:1,B:1):3,C:1):1,D:1);").unwrap();
    let d = parse_newick("(((A:1,C:1):4,B:1):1,D:1);").unwrap();
    assert!((brute_force_distance(&c, &d) - 7.0).abs() < 1e-12);
}

#[test]
fn all_four_leaf_topology_pairs() {
    let tops = rooted_topologies(&["A", "B", "C", "D"]);
    assert_eq!(tops.len(), 15);
    let weights = [[1.0, 2.0], [0.5, 3.0], [2.5, 0.25], [1.0, 1.0]];
    for (i, x) in tops.iter().enumerate() {
        for (j, y) in tops.iter().enumerate() {
            let t = parse_newick(&fill(x, &weights[i % 4])).unwrap();
            let u = parse_newick(&fill(y, &weights[(j + 1) % 4])).unwrap();
            let d = geodesic_distance(&t, &u).unwrap();
            let o = brute_force_distance(&t, &u);
            assert!((d - o).abs() < 1e-9, "{x} vs {y}: {d} vs {o}");
        }
    }
}

#[test]
fn random_six_leaf_pairs() {
    let mut r = rng(77);
    for _ in 0..60 {
        let t = rtree(6, &mut r);
        let u = rtree(6, &mut r);
        let d = geodesic_distance(&t, &u).unwrap();
        let o = brute_force_distance(&t, &u);
        assert!((d - o).abs() < 1e-9, "{d} vs {o}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_points_are_additive(n in 4usize..14, seed in 0u64..100_000, lambda in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let t = rtree(n, &mut r);
        let u = rtree(n, &mut r);
        let g = geodesic(&t, &u).unwrap();
        prop_assert!(g.is_valid());
        let p = point_on_path(&g, lambda).unwrap();
        let d1 = geodesic_distance(&t, &p).unwrap();
        let d2 = geodesic_distance(&p, &u).unwrap();
        prop_assert!((d1 - lambda * g.distance).abs() <= 1e-7 * (1.0 + g.distance));
        prop_assert!((d2 - (1.0 - lambda) * g.distance).abs() <= 1e-7 * (1.0 + g.distance));
        for (_, b) in boundary_trees(&g).unwrap() {
            let s = geodesic_distance(&t, &b).unwrap() + geodesic_distance(&b, &u).unwrap();
            prop_assert!((s - g.distance).abs() <= 1e-7 * g.distance.max(1.0));
        }
    }

    #[test]
    fn bounds_bracket_distance(n in 4usize..30, seed in 0u64..100_000) {
        let mut r = rng(seed);
        let t = rtree(n, &mut r);
        let u = rtree(n, &mut r);
        let s = tree_to_splits(&t);
        let s2 = tree_to_splits_in(&u, s.universe()).unwrap();
        let d = geodesic_distance(&t, &u).unwrap();
        let lo = lower_bound(&s, &s2).unwrap();
        let hi = cone_path(&s, &s2).unwrap().distance;
        prop_assert!(lo <= d + 1e-9 && d <= hi + 1e-9, "{} {} {}", lo, d, hi);
    }

    #[test]
    fn symmetric_and_scale_equivariant(n in 3usize..20, seed in 0u64..100_000, c in 0.1f64..10.0) {
        let mut r = rng(seed);
        let t = rtree(n, &mut r);
        let u = rtree(n, &mut r);
        let d = geodesic_distance(&t, &u).unwrap();
        prop_assert!((d - geodesic_distance(&u, &t).unwrap()).abs() < 1e-12 * d.max(1.0));
        let dc = geodesic_distance(&t.scaled(c), &u.scaled(c)).unwrap();
        prop_assert!((dc - c * d).abs() < 1e-9 * dc.max(1.0));
    }
}
