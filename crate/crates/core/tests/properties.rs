//! Property tests over seeded samplers: each case draws a seed and small
//! sizes, builds an object, and checks a structural invariant.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uihpq_core::bdg::{check_phi_output, phi_finite, uihpq_ball, Center, LabelTails};
use uihpq_core::boltzmann::{sample_boltzmann, SimplePieceSampler};
use uihpq_core::branching::{psi, psi_inverse, rooted_isomorphism, tree_of_components};
use uihpq_core::lab::round_trip_ok;
use uihpq_core::planar_map::{ball_at_root, local_distance, map_from_str, map_to_string};
use uihpq_core::stats::tv_plugin;
use uihpq_core::trees::{
    loop_of, sample_gw_geometric, sample_uniform_bridge, sample_uniform_forest, tree_of, uniform_labeling, Bridge,
    Forest, LabeledTree, PlaneTree,
};
use uihpq_core::{HalfEdgeMap, QuadrangulationWithBoundary};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn boltzmann(seed: u64, sigma: usize, p: f64) -> QuadrangulationWithBoundary {
    sample_boltzmann(sigma, p, &mut rng(seed), 1_000_000).expect("p < 1/2 samples")
}

fn labeled_forest(seed: u64, n: usize, sigma: usize) -> (Forest, Bridge) {
    let mut r = rng(seed);
    let f = sample_uniform_forest(n, sigma, &mut r).unwrap();
    let f = Forest { trees: f.trees.iter().map(|t| uniform_labeling(&t.tree, &mut r)).collect() };
    (f, sample_uniform_bridge(sigma, &mut r))
}

fn small_tree(seed: u64) -> PlaneTree {
    sample_gw_geometric(0.45, 200, &mut rng(seed)).unwrap_or_else(|_| PlaneTree::singleton())
}

fn shuffled(m: &HalfEdgeMap, seed: u64) -> HalfEdgeMap {
    let mut perm: Vec<usize> = (0..m.num_half_edges()).collect();
    perm.shuffle(&mut rng(seed));
    m.relabel(&perm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_encoding_ignores_half_edge_names(seed in any::<u64>(), sigma in 1usize..6, perm in any::<u64>()) {
        let q = boltzmann(seed, sigma, 0.3);
        let m = shuffled(&q.map, perm);
        prop_assert!(m.is_valid());
        prop_assert_eq!(m.canonical_encoding(), q.map.canonical_encoding());
        prop_assert!(rooted_isomorphism(&m, &q.map).is_some());
        prop_assert_eq!(local_distance(&m, &q.map), num_rational::Ratio::from_integer(0));
    }

    #[test]
    fn pmap_text_round_trips(seed in any::<u64>(), sigma in 1usize..6) {
        let q = boltzmann(seed, sigma, 0.2);
        let back = map_from_str(&map_to_string(&q.map)).unwrap();
        prop_assert_eq!(back, q.map);
    }

    #[test]
    fn balls_grow_and_exhaust(seed in any::<u64>(), sigma in 1usize..5) {
        let q = boltzmann(seed, sigma, 0.35);
        let mut last = (0, 0);
        for r in 0..6 {
            let b = ball_at_root(&q.map, r);
            prop_assert!(b.map.is_valid());
            let size = (b.map.num_vertices(), b.map.num_edges());
            prop_assert!(size.0 >= last.0 && size.1 >= last.1);
            prop_assert!(b.vertex_distance.iter().all(|&d| d <= r));
            last = size;
        }
        let whole = ball_at_root(&q.map, q.map.num_vertices());
        prop_assert_eq!(whole.map.canonical_encoding(), q.map.canonical_encoding());
    }

    #[test]
    fn local_distance_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (boltzmann(a, 2, 0.3).map, boltzmann(b, 2, 0.3).map);
        let d = local_distance(&x, &y);
        prop_assert_eq!(d, local_distance(&y, &x));
        prop_assert!(d <= num_rational::Ratio::from_integer(1));
    }

    #[test]
    fn tree_encodings_round_trip(seed in any::<u64>()) {
        let t = small_tree(seed);
        prop_assert_eq!(&PlaneTree::from_preorder_degrees(&t.preorder_degrees()).unwrap(), &t);
        prop_assert_eq!(&PlaneTree::from_word(&t.to_word()).unwrap(), &t);
        prop_assert_eq!(&tree_of(&loop_of(&t)).unwrap(), &t);
        let l = uniform_labeling(&t, &mut rng(seed ^ 1));
        prop_assert!(l.is_well_labeled());
        prop_assert_eq!(&LabeledTree::from_increments(t.clone(), &l.increments()).unwrap(), &l);
        prop_assert_eq!(&LabeledTree::from_word(&l.to_word()).unwrap(), &l);
    }

    #[test]
    fn looptrees_are_valid_maps(seed in any::<u64>()) {
        let t = small_tree(seed);
        let l = loop_of(&t);
        prop_assert!(l.map.is_valid());
        // one vertex per even-height vertex of t
        let even = t.depths().iter().filter(|&&d| d % 2 == 0).count();
        prop_assert_eq!(l.map.num_vertices(), even);
    }

    #[test]
    fn bridges_round_trip(seed in any::<u64>(), sigma in 1usize..12) {
        let b = sample_uniform_bridge(sigma, &mut rng(seed));
        prop_assert_eq!(b.sigma(), sigma);
        prop_assert_eq!(&Bridge::from_steps(&b.steps()).unwrap(), &b);
        prop_assert_eq!(&Bridge::from_word(&b.to_word()).unwrap(), &b);
        prop_assert_eq!(b.down_steps().positive.len(), sigma);
    }

    #[test]
    fn phi_outputs_are_quadrangulations_with_distance_labels(seed in any::<u64>(), n in 0usize..8, sigma in 1usize..5) {
        let (f, b) = labeled_forest(seed, n, sigma);
        let q = phi_finite(&f, &b).unwrap();
        check_phi_output(&f, &q).unwrap();
        let m = &q.quad.map;
        prop_assert!(m.is_valid());
        prop_assert_eq!(q.quad.sigma, sigma);
        prop_assert_eq!(q.quad.inner_faces, n);
        prop_assert_eq!(m.num_vertices(), n + sigma + 1);
        prop_assert_eq!(m.boundary().len(), 2 * sigma);
        // labels shifted by the pointed vertex are graph distances
        let d = m.graph_distances(q.pointed_vertex);
        let base = q.labels[q.pointed_vertex];
        for v in 0..m.num_vertices() {
            prop_assert_eq!(d[v], Some((q.labels[v] - base) as usize));
        }
    }

    #[test]
    fn boltzmann_samples_decompose_and_rebuild(seed in any::<u64>(), sigma in 1usize..8, p in 0.0f64..0.45) {
        let q = boltzmann(seed, sigma, p);
        prop_assert!(q.map.is_valid());
        prop_assert_eq!(q.map.boundary().len(), 2 * sigma);
        prop_assert!(round_trip_ok(&q).unwrap());
        let d = psi(&q).unwrap();
        prop_assert_eq!(d.tree.num_vertices(), 2 * sigma + 1);
        prop_assert_eq!(&tree_of_components(&q).unwrap(), &d.tree);
        let back = psi_inverse(&d).unwrap();
        prop_assert_eq!(back.map.canonical_encoding(), q.map.canonical_encoding());
    }

    #[test]
    fn peeled_pieces_have_simple_boundaries(seed in any::<u64>(), k in 1usize..8, p in 0.0f64..0.45) {
        let mut s = SimplePieceSampler::new(p).unwrap();
        let q = s.sample(k, &mut rng(seed)).unwrap();
        prop_assert!(q.map.is_valid());
        prop_assert!(q.map.is_simple_boundary());
        prop_assert_eq!(q.sigma, k);
        prop_assert_eq!(q.map.boundary().len(), 2 * k);
    }

    #[test]
    fn uihpq_balls_are_reproducible(seed in any::<u64>(), r in 0usize..4, p in 0.0f64..0.45) {
        let tails = LabelTails::new(p);
        let a = uihpq_ball(&tails, r, Center::Root, &mut rng(seed)).unwrap();
        let b = uihpq_ball(&tails, r, Center::Root, &mut rng(seed)).unwrap();
        prop_assert_eq!(a.map.canonical_encoding(), b.map.canonical_encoding());
        prop_assert!(a.map.is_valid());
        prop_assert!(a.vertex_distance.iter().all(|&d| d <= r));
    }

    #[test]
    fn plugin_tv_is_a_distance_on_empirical_laws(a in prop::collection::vec(0u32..6, 1..40), b in prop::collection::vec(0u32..6, 1..40), seed in any::<u64>()) {
        let t = tv_plugin(&a, &b);
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert!((t - tv_plugin(&b, &a)).abs() < 1e-12);
        let mut c = a.clone();
        c.shuffle(&mut rng(seed));
        prop_assert!(tv_plugin(&a, &c).abs() < 1e-12);
    }
}
