use caregraph::evalstat::{auroc, Splits};
use caregraph::hashing::SplitMix64;
use caregraph::models::{
    build_dense, build_sage, grid_search, train_dense, train_logreg, train_mlp, train_sage,
    DenseConfig, Model, SageConfig,
};
use caregraph::neuro::Aggregator;
use caregraph::simgraph::{range_search, SimilarityGraph};
use caregraph::{Error, Matrix};

fn interleaved_splits(n: usize) -> Splits {
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    for i in 0..n {
        match i % 5 {
            0 => val.push(i),
            1 => test.push(i),
            _ => train.push(i),
        }
    }
    Splits { train, val, test }
}

/// Two features; the label is the sign of a fixed linear form.
fn separable(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut g = SplitMix64::new(seed);
    let mut data = vec![];
    let mut labels = vec![];
    for _ in 0..n {
        let (a, b) = (g.next_f64() * 2.0 - 1.0, g.next_f64() * 2.0 - 1.0);
        data.extend([a, b]);
        labels.push(1.5 * a - b > 0.3);
    }
    (Matrix::from_vec(n, 2, data).unwrap(), labels)
}

#[test]
fn logreg_separates_linearly_separable_data() {
    let (x, y) = separable(400, 1);
    let splits = interleaved_splits(400);
    let (_, r) = train_logreg(&x, &y, &splits, 0.05, 3).unwrap();
    assert!(r.test.auroc > 0.99, "{}", r.test.auroc);
    assert!(r.stopped_epoch <= 150);
}

#[test]
fn mlp_without_hidden_layers_is_logreg() {
    let (x, y) = separable(200, 2);
    let splits = interleaved_splits(200);
    let (_, lr) = train_logreg(&x, &y, &splits, 0.01, 9).unwrap();
    let (_, mlp) = train_mlp(&x, &y, &splits, &[], 0.01, 9).unwrap();
    assert_eq!(lr, mlp);
}

#[test]
fn one_class_training_set_rejected() {
    let (x, _) = separable(50, 3);
    let mut y = vec![false; 50];
    y[0] = true; // node 0 is in validation
    let r = train_logreg(&x, &y, &interleaved_splits(50), 0.01, 0);
    assert!(matches!(r, Err(Error::Config { .. })), "{r:?}");
}

#[test]
fn seeded_training_is_reproducible_and_restores_best_epoch() {
    let (x, y) = separable(150, 4);
    let graph = range_search(&x, 0.95).unwrap();
    let splits = interleaved_splits(150);
    let mut config = SageConfig::new(2, 32, Aggregator::Mean, 1e-3);
    config.max_epochs = 40;
    config.seed = 5;
    let (m1, r1) = train_sage(&config, &graph, &x, &y, &splits).unwrap();
    let (m2, r2) = train_sage(&config, &graph, &x, &y, &splits).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(m1.params().values(), m2.params().values());
    let best = r1.history[r1.best_epoch - 1].val_loss;
    assert!(r1.history.iter().all(|h| h.val_loss >= best));
    assert!(r1.history[..r1.best_epoch - 1].iter().all(|h| h.val_loss > best));
}

#[test]
fn flipped_labels_flip_auroc() {
    let (x, y) = separable(100, 6);
    let (model, _) = train_logreg(&x, &y, &interleaved_splits(100), 0.05, 1).unwrap();
    let p = model.predict(&x, &SimilarityGraph::self_loops(100)).unwrap();
    let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
    assert_eq!(auroc(&p, &flipped).unwrap() + auroc(&p, &y).unwrap(), 1.0);
}

#[test]
fn self_loop_sage_equals_mlp_with_tied_weights() {
    let mut g = SplitMix64::new(12);
    let data = (0..30 * 6).map(|_| g.next_f64() - 0.3).collect();
    let x = Matrix::from_vec(30, 6, data).unwrap();
    let graph = SimilarityGraph::self_loops(30);
    for agg in Aggregator::ALL {
        let mut config = SageConfig::new(3, 32, agg, 1e-4);
        config.seed = 8;
        let sage = build_sage(&config, 6).unwrap();
        let mut dense = build_dense(
            &DenseConfig {
                hidden_layers: vec![32, 32],
                ..DenseConfig::logreg(1e-4)
            },
            6,
        )
        .unwrap();
        let mut tied = vec![];
        for w in sage.layers() {
            let mut sum = sage.params().value(w.w_self).clone();
            sum.add_assign(sage.params().value(w.w_neigh));
            tied.push(sum);
            tied.push(sage.params().value(w.bias).map(|_| 0.25));
        }
        dense.params_mut().load_values(&tied).unwrap();
        let mut sage = sage;
        let biases: Vec<_> = sage.layers().iter().map(|w| w.bias).collect();
        for b in biases {
            let p = sage.params_mut().get_mut(b);
            p.value = p.value.map(|_| 0.25);
        }
        let a = sage.predict(&x, &graph).unwrap();
        let b = dense.predict(&x, &graph).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12, "{agg}: {u} vs {v}");
        }
    }
}

#[test]
fn grid_ranking_is_a_permutation_sorted_by_validation_auroc() {
    let (x, y) = separable(120, 7);
    let graph = range_search(&x, 0.9).unwrap();
    let splits = interleaved_splits(120);
    let mut grid: Vec<SageConfig> = SageConfig::grid(8, 10, 2)
        .into_iter()
        .filter(|c| c.hidden == 32 && c.n_layers == 2)
        .collect();
    grid.truncate(6);
    let rows = grid_search(&grid, &graph, &x, &y, &splits).unwrap();
    assert_eq!(rows.len(), grid.len());
    assert!(rows.windows(2).all(|w| w[0].val_auroc >= w[1].val_auroc));
    for c in &grid {
        assert_eq!(
            rows.iter().filter(|r| r.lr == c.learning_rate && r.aggregator == c.aggregator).count(),
            1
        );
    }
    let single = grid_search(&grid[..1], &graph, &x, &y, &splits).unwrap();
    assert_eq!(single.len(), 1);
    let (_, direct) = train_sage(&grid[0], &graph, &x, &y, &splits).unwrap();
    assert_eq!(single[0].val_auroc, direct.val.auroc);
}

#[test]
fn dense_training_ignores_graph() {
    let (x, y) = separable(60, 8);
    let splits = interleaved_splits(60);
    let cfg = DenseConfig { max_epochs: 5, ..DenseConfig::mlp(1e-3) };
    let (_, a) = train_dense(&cfg, &x, &y, &splits).unwrap();
    assert_eq!(a.history.len(), 5);
}
