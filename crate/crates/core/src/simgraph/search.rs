//! Exact cosine range search.
//!
//! Rows are L2-normalized once; the upper triangle of the Gram matrix is
//! then evaluated tile by tile with a 4x4 register-blocked dot-product
//! kernel, keeping only pairs at or above the threshold. Tiles are
//! independent and are reduced in their enumeration order, so the result
//! does not depend on the number of worker threads.

use std::ops::Range;

use super::graph::SimilarityGraph;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;

/// Rounding allowance on the threshold. Normalized dot products carry a
/// few ulps of error; without it, identical rows could miss `tau = 1`.
pub const SIMILARITY_SLACK: f64 = 1e-12;

pub const DEFAULT_TILE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Rows per tile side.
    pub tile: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { tile: DEFAULT_TILE }
    }
}

/// Rows scaled to unit norm plus a flag for all-zero rows.
fn normalize_rows(x: &Matrix) -> (Matrix, Vec<bool>) {
    let mut out = x.clone();
    let cols = out.cols();
    let mut zero = vec![false; x.rows()];
    par::for_each_row_mut(out.as_mut_slice(), cols, |_, row| {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    });
    for (i, z) in zero.iter_mut().enumerate() {
        *z = out.row(i).iter().all(|&v| v == 0.0);
    }
    (out, zero)
}

#[inline(always)]
fn dot4x4(a: [&[f64]; 4], b: [&[f64]; 4], d: usize) -> [[f64; 4]; 4] {
    let (a0, a1, a2, a3) = (&a[0][..d], &a[1][..d], &a[2][..d], &a[3][..d]);
    let (b0, b1, b2, b3) = (&b[0][..d], &b[1][..d], &b[2][..d], &b[3][..d]);
    let mut acc = [[0.0f64; 4]; 4];
    for k in 0..d {
        let x = [a0[k], a1[k], a2[k], a3[k]];
        let y = [b0[k], b1[k], b2[k], b3[k]];
        for p in 0..4 {
            for q in 0..4 {
                acc[p][q] += x[p] * y[q];
            }
        }
    }
    acc
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairs `(i, j)`, `i < j`, within one tile whose similarity passes.
fn tile_pairs(
    xn: &Matrix,
    zero: &[bool],
    rows_i: Range<usize>,
    rows_j: Range<usize>,
    threshold: f64,
) -> Vec<(u32, u32)> {
    let d = xn.cols();
    let mut out = Vec::new();
    let mut i0 = rows_i.start;
    while i0 < rows_i.end {
        let ib = (rows_i.end - i0).min(4);
        let mut j0 = rows_j.start;
        while j0 < rows_j.end {
            let jb = (rows_j.end - j0).min(4);
            if j0 + jb <= i0 + 1 {
                // every j in this block is <= every i
                j0 += 4;
                continue;
            }
            let mut sims = [[0.0f64; 4]; 4];
            if ib == 4 && jb == 4 {
                sims = dot4x4(
                    [xn.row(i0), xn.row(i0 + 1), xn.row(i0 + 2), xn.row(i0 + 3)],
                    [xn.row(j0), xn.row(j0 + 1), xn.row(j0 + 2), xn.row(j0 + 3)],
                    d,
                );
            } else {
                for p in 0..ib {
                    for q in 0..jb {
                        if j0 + q > i0 + p {
                            sims[p][q] = dot(xn.row(i0 + p), xn.row(j0 + q));
                        }
                    }
                }
            }
            for (p, row) in sims.iter().enumerate().take(ib) {
                let i = i0 + p;
                if zero[i] {
                    continue;
                }
                for (q, &s) in row.iter().enumerate().take(jb) {
                    let j = j0 + q;
                    if j > i && !zero[j] && s >= threshold {
                        out.push((i as u32, j as u32));
                    }
                }
            }
            j0 += 4;
        }
        i0 += 4;
    }
    out
}

pub fn range_search(features: &Matrix, tau: f64) -> Result<SimilarityGraph> {
    range_search_with(features, tau, &SearchOptions::default())
}

/// Exact cosine range search: edge `(i, j)` iff `cos(x_i, x_j) >= tau`.
/// Zero rows have similarity 0 with everything; self-loops are always
/// present.
pub fn range_search_with(features: &Matrix, tau: f64, opts: &SearchOptions) -> Result<SimilarityGraph> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::config("tau", format!("{tau} is outside (0, 1]")));
    }
    if opts.tile == 0 {
        return Err(Error::config("tile", "must be positive"));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::config("features", "no rows to search"));
    }
    if n > u32::MAX as usize {
        return Err(Error::config("features", "too many rows for 32-bit node ids"));
    }
    let (xn, zero) = normalize_rows(features);
    let threshold = tau - SIMILARITY_SLACK;
    let blocks = n.div_ceil(opts.tile);
    let tiles: Vec<(usize, usize)> = (0..blocks)
        .flat_map(|bi| (bi..blocks).map(move |bj| (bi, bj)))
        .collect();
    let tile = opts.tile;
    let found: Vec<Vec<(u32, u32)>> = par::map_slice(&tiles, |&(bi, bj)| {
        let ri = bi * tile..((bi + 1) * tile).min(n);
        let rj = bj * tile..((bj + 1) * tile).min(n);
        tile_pairs(&xn, &zero, ri, rj, threshold)
    });
    let edges: Vec<(u32, u32)> = found.into_iter().flatten().collect();
    SimilarityGraph::from_edges(n, &edges, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::SplitMix64;

    fn brute_force(x: &Matrix, tau: f64) -> Vec<(u32, u32)> {
        let mut out = vec![];
        for i in 0..x.rows() {
            for j in i + 1..x.rows() {
                let (a, b) = (x.row(i), x.row(j));
                let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                let cos = if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / (na * nb)
                };
                if cos >= tau {
                    out.push((i as u32, j as u32));
                }
            }
        }
        out
    }

    fn clustered(n: usize, d: usize, seed: u64) -> Matrix {
        let mut g = SplitMix64::new(seed);
        let centers: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..d).map(|_| g.next_f64() - 0.5).collect())
            .collect();
        let mut rows = vec![];
        for i in 0..n {
            let c = &centers[i % 5];
            rows.push(c.iter().map(|v| v + 0.15 * (g.next_f64() - 0.5)).collect());
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn matches_brute_force_across_tile_sizes() {
        let x = clustered(203, 12, 5);
        for tau in [0.8, 0.9, 0.95, 0.99] {
            let expected = brute_force(&x, tau);
            for tile in [1, 3, 4, 7, 64, 1024] {
                let g = range_search_with(&x, tau, &SearchOptions { tile }).unwrap();
                g.check_invariants().unwrap();
                assert_eq!(g.edge_pairs(), expected, "tau {tau} tile {tile}");
            }
        }
    }

    #[test]
    fn duplicates_connect_at_tau_one() {
        let x = Matrix::from_rows(&[
            vec![0.3, 0.1, 0.7],
            vec![0.2, 0.9, 0.1],
            vec![0.3, 0.1, 0.7],
        ])
        .unwrap();
        let g = range_search(&x, 1.0).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 2)]);
    }

    #[test]
    fn orthogonal_rows_only_self_loops() {
        let g = range_search(&Matrix::identity(6), 0.9).unwrap();
        assert_eq!(g.nnz(), 6);
    }

    #[test]
    fn zero_rows_are_isolated() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let g = range_search(&x, 0.5).unwrap();
        assert_eq!(g.nnz(), 3);
    }

    #[test]
    fn bad_tau_is_config_error() {
        let x = Matrix::identity(2);
        for tau in [0.0, -0.5, 1.01, f64::NAN] {
            assert!(matches!(range_search(&x, tau), Err(Error::Config { .. })));
        }
    }
}
