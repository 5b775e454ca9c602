use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataset::NormalizedBipartiteGraph;

fn random_graph(rng: &mut ChaCha8Rng, users: usize, items: usize, p: f64) -> NormalizedBipartiteGraph {
    let mut pairs = Vec::new();
    for u in 0..users {
        for v in 0..items {
            if rng.gen_bool(p) || v == u % items {
                pairs.push((u, v));
            }
        }
    }
    NormalizedBipartiteGraph::from_pairs(users, items, &pairs).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, users: usize, items: usize, dim: usize, h: usize) -> ModelParams {
    let mut m = |r, c| Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0));
    ModelParams { e_user: m(users, dim), e_item: m(items, dim), w_user: m(dim, h), w_item: m(dim, h) }
}

#[test]
fn single_pair_hand_evaluation() {
    let g = NormalizedBipartiteGraph::from_pairs(1, 1, &[(0, 0)]).unwrap();
    let mut p = ModelParams::zeros(1, 1, 2, 1);
    p.e_user = array![[2.0, 0.0]];
    p.e_item = array![[0.0, 3.0]];
    let s = forward_gcn(&p, &g, 1).unwrap();
    assert_eq!(s.user.layers[0], array![[0.0, 3.0]]);
    assert_eq!(s.user.readouts[1], array![[2.0, 3.0]]);
    assert_eq!(s.item.layers[0], array![[2.0, 0.0]]);
}

#[test]
fn zero_embeddings_stay_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_graph(&mut rng, 5, 6, 0.4);
    let s = forward_gcn(&ModelParams::zeros(5, 6, 3, 2), &g, 3).unwrap();
    for side in [&s.user, &s.item] {
        assert!(side.layers.iter().chain(&side.readouts).all(|m| m.iter().all(|&x| x == 0.0)));
    }
}

#[test]
fn gcn_is_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let g = random_graph(&mut rng, 6, 8, 0.3);
        let p = random_params(&mut rng, 6, 8, 4, 2);
        let c: f64 = rng.gen_range(-3.0..3.0);
        let mut scaled = p.clone();
        scaled.e_user *= c;
        scaled.e_item *= c;
        let a = forward_gcn(&p, &g, 3).unwrap();
        let b = forward_gcn(&scaled, &g, 3).unwrap();
        for (x, y) in a.user.readouts.iter().chain(&a.item.layers).zip(b.user.readouts.iter().chain(&b.item.layers)) {
            for (u, v) in x.iter().zip(y.iter()) {
                assert!((u * c - v).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn readouts_follow_the_residual_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, 7, 5, 0.3);
    let p = random_params(&mut rng, 7, 5, 3, 2);
    let gcn = forward_gcn(&p, &g, 4).unwrap();
    let per = forward_perturbed(&p, &g, 4, 0.3, &mut rng).unwrap();
    let hyp = forward_hypergraph(&p, &gcn, 4, 0.5).unwrap();
    for stack in [&gcn, &per, &hyp] {
        assert_eq!(stack.num_layers(), 4);
        for side in [&stack.user, &stack.item] {
            assert_eq!(side.readouts[0], if std::ptr::eq(side, &stack.user) { p.e_user.clone() } else { p.e_item.clone() });
            for l in 1..=4 {
                let diff = &side.readouts[l] - &side.readouts[l - 1];
                for (a, b) in diff.iter().zip(side.layers[l - 1].iter()) {
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let g = NormalizedBipartiteGraph::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
    assert!(forward_gcn(&ModelParams::zeros(3, 2, 2, 1), &g, 1).is_err());
}

#[test]
fn zero_radius_matches_plain_gcn_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_graph(&mut rng, 6, 7, 0.3);
    let p = random_params(&mut rng, 6, 7, 4, 2);
    let gcn = forward_gcn(&p, &g, 3).unwrap();
    let per = forward_perturbed(&p, &g, 3, 0.0, &mut rng).unwrap();
    assert_eq!(gcn.user, per.user);
    assert_eq!(gcn.item, per.item);
    assert!(forward_perturbed(&p, &g, 3, -1.0, &mut rng).is_err());
}

#[test]
fn noise_has_radius_norm_and_matching_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(&mut rng, 40, 30, 0.1);
    let p = random_params(&mut rng, 40, 30, 8, 2);
    let gcn = forward_gcn(&p, &g, 3).unwrap();
    let (per, noise) = forward_perturbed_recorded(&p, &g, 3, 0.25, &mut rng).unwrap();
    let mut checked = 0;
    for l in 0..3 {
        for (side_noise, side_stack) in [(&noise.user[l], &per.user), (&noise.item[l], &per.item)] {
            // The noise follows the sign of the layer's aggregated embedding.
            let clean = &side_stack.layers[l] - side_noise;
            for (row, e) in side_noise.rows().into_iter().zip(clean.rows()) {
                if e.iter().all(|&x| x == 0.0) {
                    continue;
                }
                assert!((row.dot(&row).sqrt() - 0.25).abs() <= 1e-9);
                for (d, x) in row.iter().zip(e.iter()) {
                    if *x != 0.0 && *d != 0.0 {
                        assert_eq!(d.signum(), x.signum());
                    }
                }
                checked += 1;
            }
        }
    }
    assert!(checked >= 200);
    // The first perturbed layer aggregates the same inputs as the GCN layer.
    let clean = &per.user.layers[0] - &noise.user[0];
    for (a, b) in clean.iter().zip(gcn.user.layers[0].iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn noise_sign_check_over_many_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let emb = Array2::from_shape_simple_fn((1000, 6), || rng.gen_range(-1.0..1.0));
    let noise = linear::sign_aligned_noise(&emb, 0.1, &mut rng);
    for (n, e) in noise.rows().into_iter().zip(emb.rows()) {
        assert!((n.dot(&n).sqrt() - 0.1).abs() <= 1e-9);
        for (a, b) in n.iter().zip(e.iter()) {
            assert!(*a == 0.0 || a.signum() == b.signum());
        }
    }
}

#[test]
fn perturbed_branch_is_seed_reproducible_and_replayable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = random_graph(&mut rng, 5, 5, 0.4);
    let p = random_params(&mut rng, 5, 5, 3, 2);
    let a = forward_perturbed(&p, &g, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let (b, noise) = forward_perturbed_recorded(&p, &g, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    assert_eq!(a, b);
    assert_eq!(forward_perturbed_replay(&p, &g, 2, &noise).unwrap(), a);
}

#[test]
fn zero_hyperedges_give_zero_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = random_graph(&mut rng, 5, 6, 0.3);
    let mut p = random_params(&mut rng, 5, 6, 3, 4);
    p.w_user.fill(0.0);
    p.w_item.fill(0.0);
    let gcn = forward_gcn(&p, &g, 2).unwrap();
    let hyp = forward_hypergraph(&p, &gcn, 2, 0.5).unwrap();
    assert!(hyp.user.layers.iter().chain(&hyp.item.layers).all(|m| m.iter().all(|&x| x == 0.0)));
}

#[test]
fn single_hyperedge_hand_evaluation() {
    let mut side = SideStack::from_base(array![[1.0, 0.0]]);
    side.push(array![[0.0, 0.0]]);
    let w = array![[1.0], [0.0]];
    let layer = hyper_layer(&side.readouts[0], &w);
    assert_eq!(layer.incidence, array![[1.0]]);
    assert_eq!(layer.pre, array![[1.0, 0.0]]);
    assert_eq!(hypergraph_side(&w, &side, 1, 0.5).unwrap().layers[0], array![[1.0, 0.0]]);
}

#[test]
fn factored_product_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = Array2::from_shape_simple_fn((4, 3), || rng.gen_range(-1.0..1.0));
        let w = Array2::from_shape_simple_fn((3, 2), || rng.gen_range(-1.0..1.0));
        let h = x.dot(&w);
        let dense = h.dot(&h.t()).dot(&x);
        let factored = hyper_layer(&x, &w).pre;
        for (a, b) in factored.iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn leaky_relu_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = random_graph(&mut rng, 6, 6, 0.4);
    let p = random_params(&mut rng, 6, 6, 4, 3);
    let gcn = forward_gcn(&p, &g, 2).unwrap();
    let slope = 0.5;
    let hyp = forward_hypergraph(&p, &gcn, 2, slope).unwrap();
    for l in 1..=2 {
        let pre = hyper_layer(&gcn.user.readouts[l - 1], &p.w_user).pre;
        for (g, x) in hyp.user.layers[l - 1].iter().zip(pre.iter()) {
            assert!(*g >= slope * x - 1e-15);
            if *x >= 0.0 {
                assert_eq!(g, x);
            }
        }
    }
}

#[test]
fn hypergraph_requires_gcn_stack() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_graph(&mut rng, 3, 3, 0.5);
    let p = random_params(&mut rng, 3, 3, 2, 2);
    let per = forward_perturbed(&p, &g, 2, 0.1, &mut rng).unwrap();
    assert!(forward_hypergraph(&p, &per, 2, 0.5).is_err());
    let gcn = forward_gcn(&p, &g, 1).unwrap();
    assert!(forward_hypergraph(&p, &gcn, 3, 0.5).is_err());
}
