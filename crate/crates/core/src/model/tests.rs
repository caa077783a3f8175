use super::*;
use crate::graph::{constant_features, grid_graph, path_graph, Graph};
use crate::metric::{truncate, HopLimit};

fn small_cfg(layers: usize, r: usize) -> PgnnConfig {
    PgnnConfig {
        layers,
        message_dim: r,
        normalize_output: false,
        ..PgnnConfig::default()
    }
}

fn with_rows(g: Graph, d: usize, seed: u64) -> Graph {
    use rand::Rng;
    let mut rng = init_rng(seed);
    let n = g.n();
    g.with_features(Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)).unwrap())
        .unwrap()
}

#[test]
fn single_node_uses_self_distance() {
    let g = constant_features(&Graph::from_edges(1, []).unwrap());
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let fam = AnchorFamily::from_sets(1, vec![vec![0]]).unwrap();
    let cfg = small_cfg(1, 4);
    let params = PgnnParams::init(1, &cfg, &mut init_rng(1));
    let out = pgnn_embed(&g, &dm, &fam, &params, &cfg).unwrap();
    let layer = &params.layers[0];
    // s = 1, h_v = h_u = 1
    let m: Vec<f64> = (0..4)
        .map(|c| (layer.w_msg.get(0, c) + layer.w_msg.get(1, c)).max(0.0))
        .collect();
    let z: f64 = m.iter().zip(layer.w.data()).map(|(a, b)| a * b).sum();
    assert!((out.z.get(0, 0) - z).abs() < 1e-15);
    assert_eq!(out.h.row(0), m.as_slice());
}

#[test]
fn normalized_output_is_raw_output_over_its_norm() {
    let g = with_rows(grid_graph(3, 4).unwrap(), 2, 6);
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let fam = AnchorFamily::from_sets(12, vec![vec![0], vec![], vec![5, 11], vec![2]]).unwrap();
    let raw_cfg = small_cfg(2, 5);
    let unit_cfg = PgnnConfig {
        normalize_output: true,
        ..raw_cfg.clone()
    };
    let params = PgnnParams::init(2, &raw_cfg, &mut init_rng(3));
    let raw = pgnn_embed(&g, &dm, &fam, &params, &raw_cfg).unwrap();
    let unit = pgnn_embed(&g, &dm, &fam, &params, &unit_cfg).unwrap();
    assert_eq!(raw.h, unit.h);
    for v in 0..g.n() {
        let sq: f64 = raw.z.row(v).iter().map(|x| x * x).sum();
        let norm = (sq + crate::tensor::NORM_EPS).sqrt();
        for (a, b) in raw.z.row(v).iter().zip(unit.z.row(v)) {
            assert!((a / norm - b).abs() < 1e-14, "{a} {norm} {b}");
        }
        if sq > 1e-6 {
            let unit_sq: f64 = unit.z.row(v).iter().map(|x| x * x).sum();
            assert!((unit_sq - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn anchor_permutation_permutes_z_and_keeps_h() {
    let g = with_rows(grid_graph(4, 5).unwrap(), 3, 2);
    for closest in [true, false] {
        let cfg = PgnnConfig {
            closest_node_agg: closest,
            ..small_cfg(2, 6)
        };
        let dm = make_distance_input(&g, cfg.variant);
        let fam = crate::metric::sample_anchor_family(g.n(), 1.0, 4).unwrap();
        let k = fam.k();
        let order: Vec<usize> = (0..k).map(|i| (i * 7 + 3) % k).collect();
        let permuted = fam.reordered(&order).unwrap();
        let params = PgnnParams::init(3, &cfg, &mut init_rng(5));
        let a = pgnn_embed(&g, &dm, &fam, &params, &cfg).unwrap();
        let b = pgnn_embed(&g, &dm, &permuted, &params, &cfg).unwrap();
        assert_eq!(a.h, b.h);
        for v in 0..g.n() {
            for (col, &src) in order.iter().enumerate() {
                assert_eq!(b.z.get(v, col), a.z.get(v, src));
            }
        }
    }
}

#[test]
fn empty_anchor_sets_give_zero_columns() {
    let g = with_rows(path_graph(6).unwrap(), 2, 3);
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let fam = AnchorFamily::from_sets(6, vec![vec![1], vec![], vec![2, 5]]).unwrap();
    for closest in [true, false] {
        let cfg = PgnnConfig {
            closest_node_agg: closest,
            ..small_cfg(1, 5)
        };
        let params = PgnnParams::init(2, &cfg, &mut init_rng(0));
        let out = pgnn_embed(&g, &dm, &fam, &params, &cfg).unwrap();
        for v in 0..6 {
            assert_eq!(out.z.get(v, 1), 0.0);
        }
    }
}

#[test]
fn fast_variant_zeroes_far_anchors() {
    let g = constant_features(&path_graph(5).unwrap());
    let fast = make_distance_input(&g, DistanceVariant::Fast);
    assert_eq!(fast.get(0, 4), crate::Distance::Unreachable);
    let exact = make_distance_input(&g, DistanceVariant::Exact);
    assert_eq!(exact.get(0, 4), crate::Distance::Hops(4));
    assert_eq!(fast, truncate(&exact, HopLimit::Finite(2)));

    let fam = AnchorFamily::from_sets(5, vec![vec![0]]).unwrap();
    let cfg = PgnnConfig {
        variant: DistanceVariant::Fast,
        ..small_cfg(1, 4)
    };
    let params = PgnnParams::init(1, &cfg, &mut init_rng(7));
    let out = pgnn_embed(&g, &fast, &fam, &params, &cfg).unwrap();
    assert_eq!(out.z.get(3, 0), 0.0);
    assert_eq!(out.z.get(4, 0), 0.0);
}

#[test]
fn path_symmetry_is_broken_by_anchor() {
    let g = constant_features(&path_graph(5).unwrap());
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let fam = AnchorFamily::from_sets(5, vec![vec![0]]).unwrap();
    for seed in 0..5 {
        let cfg = small_cfg(2, 8);
        let params = PgnnParams::init(1, &cfg, &mut init_rng(seed));
        let out = pgnn_embed(&g, &dm, &fam, &params, &cfg).unwrap();
        let gap = (out.z.get(0, 0) - out.z.get(4, 0)).abs();
        assert!(gap > 1e-6, "seed {seed}: gap {gap}");

        let gcn = GcnParams::init(1, 8, 3, &mut init_rng(seed));
        let h = gcn_embed(&g, &gcn).unwrap();
        assert_eq!(h.row(0), h.row(4));
        assert_eq!(h.row(1), h.row(3));
    }
}

#[test]
fn gcn_isolated_node_sees_only_itself() {
    let g = Graph::from_edges(3, [(0, 1)])
        .unwrap()
        .with_features(Matrix::new(3, 2, vec![1., 2., 3., 4., -1., 0.5]).unwrap())
        .unwrap();
    let params = GcnParams::init(2, 3, 1, &mut init_rng(2));
    let h = gcn_embed(&g, &params).unwrap();
    let w = &params.weights[0];
    for c in 0..3 {
        let want = (0.5 * w.get(1, c) - w.get(0, c)).max(0.0);
        assert!((h.get(2, c) - want).abs() < 1e-15);
    }
}

#[test]
fn gcn_triangle_by_hand() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)])
        .unwrap()
        .with_features(Matrix::identity(3))
        .unwrap();
    let params = GcnParams::init(3, 2, 1, &mut init_rng(9));
    let h = gcn_embed(&g, &params).unwrap();
    let w = &params.weights[0];
    for v in 0..3 {
        // mean over {v} + N(v) of x_u / (d + 1): 1 on v, 1/2 elsewhere, / 3
        let agg: Vec<f64> = (0..3).map(|u| if u == v { 1.0 / 3.0 } else { 0.5 / 3.0 }).collect();
        for c in 0..2 {
            let pre: f64 = (0..3).map(|u| agg[u] * w.get(u, c)).sum();
            assert!((h.get(v, c) - pre.max(0.0)).abs() < 1e-15);
        }
    }
}

#[test]
fn singleton_anchors_reduce_to_neighbour_mean() {
    // With every node as its own anchor set, 1-hop distances and the h_v block
    // of W_msg zeroed, one layer's H is (1/n) sum over {v} + N(v) of
    // s(v,u) relu(W^T h_u). When relu acts linearly (non-negative weights and
    // features) this is the GCN output rescaled by (deg(v) + 1) / n.
    use rand::Rng;
    let g = grid_graph(3, 4).unwrap();
    let n = g.n();
    let mut rng = init_rng(3);
    let g = g
        .with_features(Matrix::from_fn(n, 3, |_, _| rng.random_range(0.0..1.0)).unwrap())
        .unwrap();
    let dm = truncate(&make_distance_input(&g, DistanceVariant::Exact), HopLimit::Finite(1));
    let fam = AnchorFamily::singletons(n);
    let cfg = PgnnConfig {
        closest_node_agg: false,
        ..small_cfg(1, 4)
    };
    let w = Matrix::from_fn(3, 4, |_, _| rng.random_range(0.0..1.0)).unwrap();
    let w_msg = Matrix::new(6, 4, [&[0.0; 12][..], w.data()].concat()).unwrap();
    let params = PgnnParams {
        layers: vec![LayerParams {
            w_msg,
            w: Matrix::filled(4, 1, 1.0).unwrap(),
        }],
    };
    let pg = pgnn_embed(&g, &dm, &fam, &params, &cfg).unwrap();
    let gcn = gcn_embed(
        &g,
        &GcnParams {
            weights: vec![w.clone()],
        },
    )
    .unwrap();
    let x = g.features().unwrap();
    for v in 0..n {
        for c in 0..4 {
            let mut brute = 0.0;
            for u in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
                let s = if u == v { 1.0 } else { 0.5 };
                let pre: f64 = (0..3).map(|j| x.get(u, j) * w.get(j, c)).sum();
                brute += s * pre.max(0.0);
            }
            let want = brute / n as f64;
            assert!((pg.h.get(v, c) - want).abs() < 1e-14);
            let scaled = gcn.get(v, c) * (g.degree(v) + 1) as f64 / n as f64;
            assert!((pg.h.get(v, c) - scaled).abs() < 1e-14);
        }
    }
}

#[test]
fn missing_features_rejected() {
    let g = path_graph(3).unwrap();
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let fam = AnchorFamily::singletons(3);
    let cfg = small_cfg(1, 2);
    let params = PgnnParams::init(1, &cfg, &mut init_rng(0));
    assert!(matches!(
        pgnn_embed(&g, &dm, &fam, &params, &cfg),
        Err(Error::InvalidArgument(_))
    ));
    let gcn = GcnParams::init(1, 2, 1, &mut init_rng(0));
    assert!(gcn_embed(&g, &gcn).is_err());
}

#[test]
fn wrong_feature_width_is_shape_error() {
    let g = constant_features(&path_graph(3).unwrap());
    let dm = make_distance_input(&g, DistanceVariant::Exact);
    let cfg = small_cfg(1, 2);
    let params = PgnnParams::init(4, &cfg, &mut init_rng(0));
    let err = pgnn_embed(&g, &dm, &AnchorFamily::singletons(3), &params, &cfg).unwrap_err();
    assert!(matches!(err, Error::Shape { .. }), "{err}");
}

#[test]
fn sampler_is_replayable() {
    let cfg = PgnnConfig::default();
    let s = AnchorSampler::new(50, &cfg, 11);
    assert_eq!(s.draw(3, 0).unwrap(), s.draw(3, 0).unwrap());
    assert_ne!(s.draw(3, 0).unwrap(), s.draw(4, 0).unwrap());
    let fixed = AnchorSampler::new(
        50,
        &PgnnConfig {
            resample_anchors_per_forward: false,
            ..cfg
        },
        11,
    );
    assert_eq!(fixed.draw(3, 1).unwrap(), fixed.draw(9, 0).unwrap());
}

#[test]
fn config_validation() {
    assert!(small_cfg(0, 4).validate().is_err());
    assert!(small_cfg(9, 4).validate().is_err());
    assert!(small_cfg(2, 0).validate().is_err());
    assert!(PgnnConfig {
        anchor_c: 0.0,
        ..PgnnConfig::default()
    }
    .validate()
    .is_err());
    PgnnConfig::default().validate().unwrap();
}

#[test]
fn params_round_trip_through_matrices() {
    let cfg = small_cfg(3, 5);
    let p = PgnnParams::init(7, &cfg, &mut init_rng(1));
    assert_eq!(PgnnParams::from_matrices(p.to_matrices()).unwrap(), p);
    let mut broken = p.to_matrices();
    broken.swap(0, 2);
    assert!(PgnnParams::from_matrices(broken).is_err());
}
