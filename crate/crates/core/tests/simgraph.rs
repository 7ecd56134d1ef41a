use caregraph::hashing::SplitMix64;
use caregraph::simgraph::{range_search, range_search_with, SearchOptions};
use caregraph::Matrix;
use proptest::prelude::*;

fn brute_force(x: &Matrix, tau: f64) -> Vec<(u32, u32)> {
    let norms: Vec<f64> = (0..x.rows())
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut out = vec![];
    for i in 0..x.rows() {
        for j in i + 1..x.rows() {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
            if d / (norms[i] * norms[j]) >= tau {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

/// Nonnegative rows, like scaled feature matrices, so high thresholds
/// still produce edges.
fn random_rows(n: usize, d: usize, seed: u64) -> Matrix {
    let mut g = SplitMix64::new(seed);
    let data = (0..n * d).map(|_| g.next_f64().powi(3)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

#[test]
fn thousand_rows_match_brute_force_at_reference_thresholds() {
    let x = random_rows(1000, 32, 11);
    let mut total = 0;
    for tau in [0.8, 0.9, 0.95, 0.99] {
        let expected = brute_force(&x, tau);
        total += expected.len();
        let g = range_search_with(&x, tau, &SearchOptions { tile: 256 }).unwrap();
        assert_eq!(g.edge_pairs(), expected, "tau {tau}");
    }
    assert!(total > 0);
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (2usize..40, 1usize..6).prop_flat_map(|(n, d)| {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0, -1.0f64..1.0], n * d)
            .prop_map(move |v| Matrix::from_vec(n, d, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn higher_threshold_gives_subset(x in matrix_strategy(), t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = range_search(&x, lo).unwrap();
        let b = range_search(&x, hi).unwrap();
        for (i, j) in b.edge_pairs() {
            prop_assert!(a.has_edge(i as usize, j as usize));
        }
    }

    #[test]
    fn permuting_rows_permutes_adjacency(x in matrix_strategy(), seed in any::<u64>(), tau in 0.3f64..1.0) {
        let n = x.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut g = SplitMix64::new(seed);
        for i in (1..n).rev() {
            perm.swap(i, (g.next_u64() % (i as u64 + 1)) as usize);
        }
        // row i of the original lands at position perm[i]
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let permuted = x.select_rows(&inverse);
        let direct = range_search(&permuted, tau).unwrap();
        let relabelled = range_search(&x, tau).unwrap().permute(&perm).unwrap();
        prop_assert_eq!(direct, relabelled);
    }

    #[test]
    fn tiling_does_not_change_result(x in matrix_strategy(), tile in 1usize..9, tau in 0.1f64..1.0) {
        let a = range_search_with(&x, tau, &SearchOptions { tile }).unwrap();
        prop_assert_eq!(a.edge_pairs(), brute_force(&x, tau));
        a.check_invariants().unwrap();
    }
}
