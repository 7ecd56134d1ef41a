use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::hashing::{fnv1a64, mix, SplitMix64};

pub const DEFAULT_DIM: usize = 768;
pub const DEFAULT_MAX_WINDOW: usize = 512;
pub const DEFAULT_STRIDE: usize = 256;

pub type TokenId = u64;

/// Text encoder abstraction: a tokenizer plus a fixed-width embedding of a
/// window of at most `max_window()` tokens.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn max_window(&self) -> usize {
        DEFAULT_MAX_WINDOW
    }

    fn stride(&self) -> usize {
        DEFAULT_STRIDE
    }

    fn tokenize(&self, text: &str) -> Vec<TokenId>;

    /// Embeds one window. Must return exactly `dim()` values and be
    /// deterministic.
    fn embed_tokens(&self, tokens: &[TokenId]) -> Vec<f64>;
}

/// Deterministic stand-in for a transformer encoder.
///
/// Tokens are whitespace-separated words. Each token maps to a unit vector
/// derived from a splitmix stream seeded by hash(token, seed); a window
/// embeds to the plain mean of its token vectors.
#[derive(Debug)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
    max_window: usize,
    stride: usize,
    cache: RwLock<HashMap<TokenId, Arc<[f64]>>>,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockEmbedder::with_windows(dim, seed, DEFAULT_MAX_WINDOW, DEFAULT_STRIDE)
    }

    pub fn with_windows(dim: usize, seed: u64, max_window: usize, stride: usize) -> Self {
        assert!(dim > 0 && max_window > 0 && stride > 0);
        MockEmbedder {
            dim,
            seed,
            max_window,
            stride,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn token_vector(&self, token: TokenId) -> Arc<[f64]> {
        if let Some(v) = self.cache.read().expect("cache poisoned").get(&token) {
            return Arc::clone(v);
        }
        let mut rng = SplitMix64::new(mix(token, self.seed));
        let mut v: Vec<f64> = (0..self.dim).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let v: Arc<[f64]> = v.into();
        self.cache
            .write()
            .expect("cache poisoned")
            .entry(token)
            .or_insert_with(|| Arc::clone(&v));
        v
    }
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_window(&self) -> usize {
        self.max_window
    }

    fn stride(&self) -> usize {
        self.stride
    }

    fn tokenize(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().map(|w| fnv1a64(w.as_bytes())).collect()
    }

    fn embed_tokens(&self, tokens: &[TokenId]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if tokens.is_empty() {
            return out;
        }
        let mut counts: Vec<(TokenId, usize)> = Vec::new();
        let mut sorted = tokens.to_vec();
        sorted.sort_unstable();
        for t in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => counts.push((t, 1)),
            }
        }
        for (t, c) in counts {
            let v = self.token_vector(t);
            let w = c as f64;
            out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += w * x);
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_vectors_are_unit_and_deterministic() {
        let e = MockEmbedder::new(64, 3);
        let a = e.token_vector(42);
        let b = MockEmbedder::new(64, 3).token_vector(42);
        assert_eq!(&a[..], &b[..]);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_ne!(&a[..], &MockEmbedder::new(64, 4).token_vector(42)[..]);
    }

    #[test]
    fn window_is_plain_mean() {
        let e = MockEmbedder::new(16, 1);
        let toks = e.tokenize("alpha beta alpha");
        let out = e.embed_tokens(&toks);
        assert_eq!(out.len(), 16);
        let a = e.token_vector(toks[0]);
        let b = e.token_vector(toks[1]);
        for k in 0..16 {
            let expected = (2.0 * a[k] + b[k]) / 3.0;
            assert!((out[k] - expected).abs() < 1e-15);
        }
    }
}
