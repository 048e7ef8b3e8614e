mod common;

use common::{exhaustive_min_spanning_weight, naive_removal_order, oracle_distance};
use kb_resize::codec::{nearest, IndexGrid};
use kb_resize::geometry::{distance_evaluations, squared_distance};
use kb_resize::ranking::build_semantic_tree;
use kb_resize::{
    bits_per_index, compute_ranking, compute_removal_order, exp_map, hyperbolic_distance, log_map,
    pack, prune_to_size, quantize, resize, unpack, verify_ranking, EuclideanCodebook, FeatureGrid,
    ImportanceRanking,
};
use proptest::prelude::*;

fn vector(dim: std::ops::RangeInclusive<usize>, coord: f64) -> impl Strategy<Value = Vec<f64>> {
    dim.prop_flat_map(move |d| prop::collection::vec(-coord..coord, d))
}

fn scaled_to(v: &[f64], max_norm: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= max_norm {
        v.to_vec()
    } else {
        v.iter().map(|x| x * max_norm / n).collect()
    }
}

fn codebook(
    n: std::ops::RangeInclusive<usize>,
    dim: usize,
) -> impl Strategy<Value = EuclideanCodebook> {
    n.prop_flat_map(move |n| prop::collection::vec(-2.0f32..2.0, n * dim))
        .prop_map(move |data| {
            EuclideanCodebook::new(dim, data.into_iter().map(f64::from).collect()).unwrap()
        })
}

proptest! {
    #[test]
    fn exp_log_round_trip(v in vector(1..=512, 1.0)) {
        let v = scaled_to(&v, 5.0);
        let back = log_map(&exp_map(&v).unwrap());
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn norm_law_and_direction(v in vector(1..=64, 3.0)) {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let p = exp_map(&v).unwrap();
        prop_assume!(n < 14.0);
        prop_assert!((p.norm() - n.tanh()).abs() <= 1e-12);
        if n > 0.0 {
            let s = p.norm() / n;
            for (a, b) in v.iter().zip(p.coords()) {
                prop_assert!((b - s * a).abs() <= 1e-15 + 1e-12 * b.abs());
                prop_assert!(a * b >= 0.0);
            }
        }
    }

    #[test]
    fn distance_matches_formula(a in vector(3..=3, 1.0), b in vector(3..=3, 1.0)) {
        let p = exp_map(&a).unwrap();
        let q = exp_map(&b).unwrap();
        let d = hyperbolic_distance(&p, &q).unwrap();
        let o = oracle_distance(p.coords(), q.coords());
        prop_assert!((d - o).abs() <= 1e-9 * o.max(1.0), "{d} vs {o}");
    }

    #[test]
    fn triangle_inequality(a in vector(4..=4, 1.5), b in vector(4..=4, 1.5), c in vector(4..=4, 1.5)) {
        let [p, q, r] = [a, b, c].map(|v| exp_map(&v).unwrap());
        let d = |x, y| hyperbolic_distance(x, y).unwrap();
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
        prop_assert_eq!(d(&p, &q), d(&q, &p));
        prop_assert_eq!(d(&p, &p), 0.0);
    }

    #[test]
    fn distance_from_origin_grows_along_a_ray(dir in vector(2..=8, 1.0), t1 in 0.0f64..6.0, t2 in 0.0f64..6.0) {
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3 && (t1 - t2).abs() > 1e-9);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let at = |t: f64| exp_map(&dir.iter().map(|x| x * t / n).collect::<Vec<_>>()).unwrap();
        let origin = exp_map(&vec![0.0; dir.len()]).unwrap();
        let d_lo = hyperbolic_distance(&origin, &at(lo)).unwrap();
        let d_hi = hyperbolic_distance(&origin, &at(hi)).unwrap();
        prop_assert!(d_lo < d_hi);
    }

    #[test]
    fn mst_is_optimal(kb in codebook(1..=6, 2)) {
        let (points, tree) = build_semantic_tree(&kb).unwrap();
        let n = kb.size();
        let best = exhaustive_min_spanning_weight(n, |i, j| oracle_distance(points.point(i), points.point(j)));
        prop_assert!((tree.total_weight() - best).abs() <= 1e-9 * best.max(1.0));
    }

    #[test]
    fn pruning_is_nested_and_connected(kb in codebook(1..=40, 3)) {
        let (points, tree) = build_semantic_tree(&kb).unwrap();
        let order = compute_removal_order(&tree, &points).unwrap();
        prop_assert!(order.replay(&tree).is_ok());
        let parents: Vec<_> = (0..tree.node_count()).map(|v| tree.parent_of(v)).collect();
        prop_assert_eq!(&order.sequence, &naive_removal_order(&parents, points.norms()));
        let mut previous: Option<Vec<usize>> = None;
        for k in 1..=kb.size() {
            let kept = prune_to_size(&tree, &order, k).unwrap();
            prop_assert_eq!(kept.len(), k);
            prop_assert!(kept.contains(&tree.root()));
            prop_assert!(tree.induces_rooted_subtree(&kept));
            if let Some(smaller) = &previous {
                prop_assert!(smaller.iter().all(|v| kept.contains(v)));
            }
            previous = Some(kept);
        }
    }

    #[test]
    fn resize_prefixes_and_costs_nothing(kb in codebook(1..=40, 3)) {
        let ranking = compute_ranking(&kb).unwrap();
        prop_assert!(verify_ranking(&kb, &ranking).passed());
        let full = resize(&kb, &ranking, kb.size()).unwrap();
        let before = distance_evaluations();
        for k in 1..=kb.size() {
            let child = resize(&kb, &ranking, k).unwrap();
            prop_assert_eq!(child.as_flat(), &full.as_flat()[..k * kb.dim()]);
        }
        prop_assert_eq!(distance_evaluations(), before);
        for (i, &p) in ranking.survival_order.iter().enumerate() {
            for (a, b) in kb.vector(p).iter().zip(full.vector(i)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn re_resizing_is_idempotent(kb in codebook(2..=30, 2), frac in 0.0f64..1.0) {
        let k = 1 + (frac * (kb.size() - 1) as f64) as usize;
        let child = resize(&kb, &compute_ranking(&kb).unwrap(), k).unwrap();
        let again = resize(&child, &compute_ranking(&child).unwrap(), k).unwrap();
        for v in again.vectors() {
            prop_assert!(child.vectors().any(|c| squared_distance(c, v).sqrt() <= 1e-9 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max))));
        }
    }

    #[test]
    fn kbr_round_trip(kb in codebook(1..=20, 2)) {
        let ranking = compute_ranking(&kb).unwrap();
        let text = ranking.to_kbr_string();
        prop_assert_eq!(ImportanceRanking::from_kbr_str(&text).unwrap(), ranking);
        let bytes = kb.to_kbf_bytes();
        prop_assert_eq!(EuclideanCodebook::from_kbf_bytes(&bytes).unwrap(), kb);
    }

    #[test]
    fn pack_unpack_identity(
        k in prop_oneof![1u64..=300, Just(262_144u64), 1u64..=(1 << 32)],
        h in 1usize..6,
        w in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<u32> = (0..h * w).map(|_| rng.random_range(0..k) as u32).collect();
        let grid = IndexGrid::new(h, w, k, indices).unwrap();
        let payload = pack(&grid);
        prop_assert_eq!(payload.payload_bits(), (h * w) as u64 * u64::from(bits_per_index(k).unwrap()));
        prop_assert_eq!(payload.bytes.len() as u64, payload.payload_bits().div_ceil(8));
        prop_assert_eq!(unpack(&payload).unwrap(), grid);
    }

    #[test]
    fn quantizer_picks_a_nearest_vector(kb in codebook(1..=12, 3), cells in prop::collection::vec(-3.0f64..3.0, 3 * 10)) {
        let grid = FeatureGrid::new(2, 5, 3, cells).unwrap();
        let idx = quantize(&grid, &kb).unwrap();
        for (cell, &i) in grid.cells().zip(idx.indices()) {
            let chosen = squared_distance(cell, kb.vector(i as usize));
            for v in kb.vectors() {
                prop_assert!(squared_distance(cell, v) >= chosen);
            }
            prop_assert_eq!(nearest(&kb, cell).0, i as usize);
        }
    }
}
