//! Code-set and note embeddings built on an [`Embedder`].

use std::collections::HashMap;
use std::ops::Range;

use super::embedder::Embedder;
use crate::datagen::{CodeRow, CodeTitleRow};
use crate::error::{Error, Result};

pub const MAX_DIAGNOSES: usize = 10;
pub const MAX_PROCEDURES: usize = 5;

/// ICD `(code, version)` to its long title.
#[derive(Debug, Clone, Default)]
pub struct CodeTextMap {
    titles: HashMap<(String, u8), String>,
}

impl CodeTextMap {
    pub fn new(rows: &[CodeTitleRow]) -> Self {
        CodeTextMap {
            titles: rows
                .iter()
                .map(|r| ((r.icd_code.clone(), r.icd_version), r.long_title.clone()))
                .collect(),
        }
    }

    pub fn title(&self, code: &str, version: u8) -> Option<&str> {
        self.titles
            .get(&(code.to_string(), version))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }
}

/// Sorts by `seq_num` (ties by code) and keeps the first `limit`.
pub fn select_codes<'a>(codes: &[&'a CodeRow], limit: usize) -> Vec<&'a CodeRow> {
    let mut sorted = codes.to_vec();
    sorted.sort_by(|a, b| {
        a.seq_num
            .cmp(&b.seq_num)
            .then_with(|| a.icd_code.cmp(&b.icd_code))
    });
    sorted.truncate(limit);
    sorted
}

/// Window ranges over `n` tokens: windows of `size` start at multiples of
/// `stride` until one reaches the end of the sequence. The last window may
/// be shorter than `size`.
pub fn window_ranges(n: usize, size: usize, stride: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + size).min(n);
        out.push(start..end);
        if end == n {
            break;
        }
        start += stride;
    }
    out
}

/// Sliding-window embedding of a text; windows are averaged uniformly.
/// Empty text embeds to the zero vector.
pub fn embed_note(text: &str, embedder: &dyn Embedder) -> Vec<f64> {
    let tokens = embedder.tokenize(text);
    let windows = window_ranges(tokens.len(), embedder.max_window(), embedder.stride());
    let mut out = vec![0.0; embedder.dim()];
    if windows.is_empty() {
        return out;
    }
    for w in &windows {
        let v = embedder.embed_tokens(&tokens[w.clone()]);
        out.iter_mut().zip(&v).for_each(|(o, x)| *o += x);
    }
    let k = windows.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    out
}

/// Mean of the title embeddings of `codes`; zero vector when empty.
pub fn embed_code_set(codes: &[&CodeRow], map: &CodeTextMap, embedder: &dyn Embedder) -> Result<Vec<f64>> {
    let mut out = vec![0.0; embedder.dim()];
    if codes.is_empty() {
        return Ok(out);
    }
    let mut titles = Vec::with_capacity(codes.len());
    let mut missing = Vec::new();
    for c in codes {
        match map.title(&c.icd_code, c.icd_version) {
            Some(t) => titles.push(t),
            None => missing.push(format!("{} (ICD-{})", c.icd_code, c.icd_version)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Lookup { codes: missing });
    }
    for t in &titles {
        let v = embed_note(t, embedder);
        out.iter_mut().zip(&v).for_each(|(o, x)| *o += x);
    }
    let k = titles.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    Ok(out)
}
