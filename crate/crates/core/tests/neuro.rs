use caregraph::hashing::SplitMix64;
use caregraph::neuro::{
    aggregate, dense_layer, sage_layer, Adam, Aggregator, ParamStore, SageWeights, Tape,
};
use caregraph::simgraph::SimilarityGraph;
use caregraph::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, g: &mut SplitMix64) -> Matrix {
    let data = (0..rows * cols).map(|_| 2.0 * g.next_f64() - 1.0).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_graph(n: usize, p: f64, g: &mut SplitMix64) -> SimilarityGraph {
    let mut edges = vec![];
    for i in 0..n {
        for j in i + 1..n {
            if g.next_f64() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    SimilarityGraph::from_edges(n, &edges, 0.5).unwrap()
}

/// Straight-line scalar recomputation of one SAGE layer.
fn sage_oracle(
    h: &Matrix,
    g: &SimilarityGraph,
    ws: &Matrix,
    wn: &Matrix,
    b: &Matrix,
    kind: Aggregator,
    relu: bool,
) -> Matrix {
    let (n, d, k) = (h.rows(), h.cols(), ws.cols());
    let mut out = Matrix::zeros(n, k);
    for i in 0..n {
        let nb = g.neighbors(i);
        let mut agg = vec![0.0; d];
        for c in 0..d {
            let vals: Vec<f64> = nb.iter().map(|&j| h[(j as usize, c)]).collect();
            agg[c] = match kind {
                Aggregator::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                Aggregator::Add => vals.iter().sum(),
                Aggregator::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            };
        }
        for o in 0..k {
            let mut s = b[(0, o)];
            for c in 0..d {
                s += h[(i, c)] * ws[(c, o)] + agg[c] * wn[(c, o)];
            }
            out[(i, o)] = if relu { s.max(0.0) } else { s };
        }
    }
    out
}

#[test]
fn sage_layer_matches_scalar_oracle() {
    let mut g = SplitMix64::new(4);
    let graph = random_graph(12, 0.3, &mut g);
    let h = random_matrix(12, 5, &mut g);
    for kind in Aggregator::ALL {
        let mut store = ParamStore::new();
        let w = SageWeights {
            w_self: store.add("s", random_matrix(5, 3, &mut g)),
            w_neigh: store.add("n", random_matrix(5, 3, &mut g)),
            bias: store.add("b", random_matrix(1, 3, &mut g)),
        };
        let mut tape = Tape::new();
        let x = tape.input(&h);
        let out = sage_layer(&mut tape, &store, x, &graph, w, kind, true).unwrap();
        let expected = sage_oracle(
            &h,
            &graph,
            store.value(w.w_self),
            store.value(w.w_neigh),
            store.value(w.bias),
            kind,
            true,
        );
        assert!(tape.value(out).max_abs_diff(&expected) < 1e-12, "{kind}");
    }
}

#[test]
fn identity_weights_pass_features_through() {
    let mut g = SplitMix64::new(8);
    let graph = random_graph(10, 0.4, &mut g);
    let h = random_matrix(10, 4, &mut g).map(f64::abs);
    let mut store = ParamStore::new();
    let eye = store.add("eye", Matrix::identity(4));
    let zero = store.add("zero", Matrix::zeros(4, 4));
    let bias = store.add("b", Matrix::zeros(1, 4));
    for kind in Aggregator::ALL {
        let mut tape = Tape::new();
        let x = tape.input(&h);
        let own = SageWeights { w_self: eye, w_neigh: zero, bias };
        let out = sage_layer(&mut tape, &store, x, &graph, own, kind, true).unwrap();
        assert_eq!(tape.value(out), &h);
        let neigh = SageWeights { w_self: zero, w_neigh: eye, bias };
        let out = sage_layer(&mut tape, &store, x, &graph, neigh, kind, true).unwrap();
        let agg = aggregate(&h, &graph, kind).unwrap().0.map(|v| v.max(0.0));
        assert_eq!(tape.value(out), &agg);
    }
}

fn two_layer_loss(
    store: &ParamStore,
    layers: &[SageWeights],
    x: &Matrix,
    graph: &SimilarityGraph,
    kind: Aggregator,
    y: &[f64],
    mask: &[usize],
) -> (f64, caregraph::neuro::Gradients) {
    let mut tape = Tape::new();
    let mut h = tape.input(x);
    for (k, w) in layers.iter().enumerate() {
        h = sage_layer(&mut tape, store, h, graph, *w, kind, k + 1 < layers.len()).unwrap();
    }
    let loss = tape.weighted_bce(h, y, mask, 2.5, 0.6).unwrap();
    let value = tape.value(loss)[(0, 0)];
    (value, tape.backward(loss).unwrap())
}

#[test]
fn gradients_match_central_differences() {
    let mut g = SplitMix64::new(21);
    let graph = random_graph(20, 0.15, &mut g);
    let x = random_matrix(20, 6, &mut g);
    let y: Vec<f64> = (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let mask: Vec<usize> = (0..20).filter(|i| i % 4 != 1).collect();
    for kind in Aggregator::ALL {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layers = vec![];
        for (i, o) in [(6, 5), (5, 1)] {
            layers.push(SageWeights {
                w_self: store.add_glorot("s", i, o, &mut rng),
                w_neigh: store.add_glorot("n", i, o, &mut rng),
                bias: store.add_glorot("b", 1, o, &mut rng),
            });
        }
        let (_, grads) = two_layer_loss(&store, &layers, &x, &graph, kind, &y, &mask);
        let eps = 1e-5;
        for id in store.ids().collect::<Vec<_>>() {
            let analytic = grads.get(id).unwrap().clone();
            for k in 0..analytic.as_slice().len() {
                let mut plus = store.clone();
                plus.get_mut(id).value.as_mut_slice()[k] += eps;
                let mut minus = store.clone();
                minus.get_mut(id).value.as_mut_slice()[k] -= eps;
                let fp = two_layer_loss(&plus, &layers, &x, &graph, kind, &y, &mask).0;
                let fm = two_layer_loss(&minus, &layers, &x, &graph, kind, &y, &mask).0;
                let numeric = (fp - fm) / (2.0 * eps);
                let a = analytic.as_slice()[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "{kind} param {} entry {k}: {a} vs {numeric}", id.index());
            }
        }
    }
}

#[test]
fn identical_models_step_identically() {
    let x = Matrix::from_vec(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0, 0.5]).unwrap();
    let y = [1.0, 0.0, 1.0, 0.0];
    let build = || {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = s.add_glorot("w", 2, 1, &mut rng);
        let b = s.add_zeros("b", 1, 1);
        (s, w, b)
    };
    let (mut a, w, b) = build();
    let (mut c, _, _) = build();
    let adam = Adam::new(1e-2).unwrap();
    for _ in 0..5 {
        for store in [&mut a, &mut c] {
            let grads = {
                let mut tape = Tape::new();
                let xv = tape.input(&x);
                let z = dense_layer(&mut tape, store, xv, w, b, false).unwrap();
                let l = tape.weighted_bce(z, &y, &[0, 1, 2, 3], 1.0, 1.0).unwrap();
                tape.backward(l).unwrap()
            };
            store.accumulate(&grads).unwrap();
            adam.step(store);
        }
    }
    assert_eq!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_and_add_are_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut g = SplitMix64::new(seed);
        let graph = random_graph(9, 0.3, &mut g);
        let h = random_matrix(9, 3, &mut g);
        let k = random_matrix(9, 3, &mut g);
        let mut combo = h.map(|v| a * v);
        combo.add_assign(&k.map(|v| b * v));
        for kind in [Aggregator::Mean, Aggregator::Add] {
            let lhs = aggregate(&combo, &graph, kind).unwrap().0;
            let mut rhs = aggregate(&h, &graph, kind).unwrap().0.map(|v| a * v);
            rhs.add_assign(&aggregate(&k, &graph, kind).unwrap().0.map(|v| b * v));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }
}
