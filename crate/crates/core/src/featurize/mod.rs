//! Per-modality feature blocks and their assembly into node features.

mod admissions;
mod embedder;
mod labs;
mod scale;
mod text;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use admissions::{admission_column_names, encode_admissions, ADMISSIONS_WIDTH};
pub use embedder::{Embedder, MockEmbedder, TokenId, DEFAULT_DIM, DEFAULT_MAX_WINDOW, DEFAULT_STRIDE};
pub use labs::{encode_labevents, LabReport, LabVocab};
pub use scale::{apply_scalers, fit_scalers, ScalerSet, SpanScaler};
pub use text::{
    embed_code_set, embed_note, select_codes, window_ranges, CodeTextMap, MAX_DIAGNOSES,
    MAX_PROCEDURES,
};

use crate::datagen::{CodeRow, RawTables};
use crate::error::{Error, Result};
use crate::ingest::Cohort;
use crate::matrix::Matrix;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Admissions,
    Diagnoses,
    Procedures,
    Labevents,
    Notes,
}

impl BlockKind {
    /// Concatenation order.
    pub const ALL: [BlockKind; 5] = [
        BlockKind::Admissions,
        BlockKind::Diagnoses,
        BlockKind::Procedures,
        BlockKind::Labevents,
        BlockKind::Notes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Admissions => "admissions",
            BlockKind::Diagnoses => "diagnoses",
            BlockKind::Procedures => "procedures",
            BlockKind::Labevents => "labevents",
            BlockKind::Notes => "notes",
        }
    }

    pub fn is_min_max(self) -> bool {
        matches!(self, BlockKind::Admissions | BlockKind::Labevents)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::config("selection", format!("unknown block `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub kind: BlockKind,
    pub matrix: Matrix,
    /// Rows with no source data; those rows are exactly zero.
    pub missing: Vec<bool>,
}

/// A set of blocks to concatenate; always contains the admissions block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<BlockKind>", into = "Vec<BlockKind>")]
pub struct Selection(Vec<BlockKind>);

impl Selection {
    pub fn new(kinds: impl IntoIterator<Item = BlockKind>) -> Result<Self> {
        let mut v: Vec<BlockKind> = kinds.into_iter().collect();
        v.sort();
        v.dedup();
        if !v.contains(&BlockKind::Admissions) {
            return Err(Error::config("selection", "the admissions block is always required"));
        }
        Ok(Selection(v))
    }

    pub fn all() -> Self {
        Selection(BlockKind::ALL.to_vec())
    }

    /// The five ablation combinations followed by the full set.
    pub fn ablations() -> Vec<Selection> {
        use BlockKind::*;
        [
            vec![Admissions, Diagnoses, Procedures, Labevents],
            vec![Admissions, Diagnoses, Labevents, Notes],
            vec![Admissions, Procedures, Labevents, Notes],
            vec![Admissions, Labevents, Notes],
            vec![Admissions, Labevents],
        ]
        .into_iter()
        .map(|k| Selection::new(k).expect("contains admissions"))
        .chain(std::iter::once(Selection::all()))
        .collect()
    }

    pub fn kinds(&self) -> &[BlockKind] {
        &self.0
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn label(&self) -> String {
        if self.0.len() == BlockKind::ALL.len() {
            "all".to_string()
        } else {
            self.0.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
        }
    }
}

impl TryFrom<Vec<BlockKind>> for Selection {
    type Error = Error;

    fn try_from(v: Vec<BlockKind>) -> Result<Self> {
        Selection::new(v)
    }
}

impl From<Selection> for Vec<BlockKind> {
    fn from(s: Selection) -> Self {
        s.0
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Selection::all());
        }
        let kinds = s
            .split(['+', ','])
            .map(str::parse)
            .collect::<Result<Vec<BlockKind>>>()?;
        Selection::new(kinds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub kind: BlockKind,
    pub offset: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureMatrix {
    pub matrix: Matrix,
    pub spans: Vec<BlockSpan>,
    /// Admission id of every row.
    pub ids: Vec<u64>,
}

impl NodeFeatureMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }
}

/// Concatenates the selected blocks in the fixed block order.
pub fn assemble(blocks: &[FeatureBlock], ids: &[u64], selection: &Selection) -> Result<NodeFeatureMatrix> {
    if !selection.contains(BlockKind::Admissions) {
        return Err(Error::config("selection", "the admissions block is always required"));
    }
    let mut parts = Vec::new();
    let mut spans = Vec::new();
    let mut offset = 0;
    for &kind in selection.kinds() {
        let block = blocks
            .iter()
            .find(|b| b.kind == kind)
            .ok_or_else(|| Error::Alignment(format!("block `{kind}` was not computed")))?;
        if block.matrix.rows() != ids.len() {
            return Err(Error::Alignment(format!(
                "block `{kind}` has {} rows, expected {}",
                block.matrix.rows(),
                ids.len()
            )));
        }
        spans.push(BlockSpan {
            kind,
            offset,
            width: block.matrix.cols(),
        });
        offset += block.matrix.cols();
        parts.push(&block.matrix);
    }
    Ok(NodeFeatureMatrix {
        matrix: Matrix::hconcat(&parts)?,
        spans,
        ids: ids.to_vec(),
    })
}

fn group_codes(rows: &[CodeRow]) -> HashMap<u64, Vec<&CodeRow>> {
    let mut out: HashMap<u64, Vec<&CodeRow>> = HashMap::new();
    for r in rows {
        out.entry(r.hadm_id).or_default().push(r);
    }
    out
}

fn stack(rows: Vec<Vec<f64>>, width: usize) -> Matrix {
    let n = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Matrix::from_vec(n, width, data).expect("rows have the embedder width")
}

fn code_block(
    kind: BlockKind,
    rows: &[CodeRow],
    limit: usize,
    ids: &[u64],
    map: &CodeTextMap,
    embedder: &dyn Embedder,
) -> Result<FeatureBlock> {
    let grouped = group_codes(rows);
    let embedded: Vec<Result<(Vec<f64>, bool)>> = par::map_slice(ids, |id| {
        match grouped.get(id) {
            Some(codes) if !codes.is_empty() => {
                let chosen = select_codes(codes, limit);
                embed_code_set(&chosen, map, embedder).map(|v| (v, false))
            }
            _ => Ok((vec![0.0; embedder.dim()], true)),
        }
    });
    let mut vectors = Vec::with_capacity(ids.len());
    let mut missing = Vec::with_capacity(ids.len());
    for r in embedded {
        let (v, m) = r?;
        vectors.push(v);
        missing.push(m);
    }
    Ok(FeatureBlock {
        kind,
        matrix: stack(vectors, embedder.dim()),
        missing,
    })
}

/// All five blocks for a cohort, row-aligned to `cohort.records`.
#[derive(Debug, Clone)]
pub struct CohortFeatures {
    pub ids: Vec<u64>,
    pub blocks: Vec<FeatureBlock>,
    pub lab_report: LabReport,
}

impl CohortFeatures {
    pub fn block(&self, kind: BlockKind) -> Option<&FeatureBlock> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    pub fn assemble(&self, selection: &Selection) -> Result<NodeFeatureMatrix> {
        assemble(&self.blocks, &self.ids, selection)
    }
}

pub fn featurize_cohort(
    tables: &RawTables,
    cohort: &Cohort,
    embedder: &dyn Embedder,
    lab_vocab: &LabVocab,
) -> Result<CohortFeatures> {
    let ids = cohort.admission_ids();
    let map = CodeTextMap::new(&tables.code_text_map);

    let admissions = encode_admissions(&cohort.records)?;
    let diagnoses = code_block(
        BlockKind::Diagnoses,
        &tables.diagnoses_icd,
        MAX_DIAGNOSES,
        &ids,
        &map,
        embedder,
    )?;
    let procedures = code_block(
        BlockKind::Procedures,
        &tables.procedures_icd,
        MAX_PROCEDURES,
        &ids,
        &map,
        embedder,
    )?;
    let (lab_matrix, lab_missing, lab_report) = encode_labevents(&tables.labevents, &ids, lab_vocab);

    let notes_by_id: HashMap<u64, &str> = tables
        .discharge_notes
        .iter()
        .map(|n| (n.hadm_id, n.note_text.as_str()))
        .collect();
    let note_vectors: Vec<(Vec<f64>, bool)> = par::map_slice(&ids, |id| match notes_by_id.get(id) {
        Some(text) => (embed_note(text, embedder), false),
        None => (vec![0.0; embedder.dim()], true),
    });
    let (note_rows, note_missing): (Vec<_>, Vec<_>) = note_vectors.into_iter().unzip();

    Ok(CohortFeatures {
        blocks: vec![
            FeatureBlock {
                kind: BlockKind::Admissions,
                matrix: admissions,
                missing: vec![false; ids.len()],
            },
            diagnoses,
            procedures,
            FeatureBlock {
                kind: BlockKind::Labevents,
                matrix: lab_matrix,
                missing: lab_missing,
            },
            FeatureBlock {
                kind: BlockKind::Notes,
                matrix: stack(note_rows, embedder.dim()),
                missing: note_missing,
            },
        ],
        ids,
        lab_report,
    })
}

/// Writes `<name>.emb` (CGEMB1) and `<name>.ids` (one admission id per line).
pub fn save_block(dir: &Path, name: &str, matrix: &Matrix, ids: &[u64]) -> Result<()> {
    if matrix.rows() != ids.len() {
        return Err(Error::Alignment(format!(
            "{} rows but {} ids",
            matrix.rows(),
            ids.len()
        )));
    }
    fs::create_dir_all(dir)?;
    matrix.save(&dir.join(format!("{name}.emb")))?;
    let mut text = String::with_capacity(ids.len() * 9);
    for id in ids {
        text.push_str(&id.to_string());
        text.push('\n');
    }
    fs::write(dir.join(format!("{name}.ids")), text)?;
    Ok(())
}

pub fn load_ids(path: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<u64>().map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: i as u64 + 1,
                column: 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Loads a precomputed embedding block and aligns it to `ids`. Admissions
/// absent from the file get zero rows and are marked missing.
pub fn load_block(kind: BlockKind, emb_path: &Path, ids_path: &Path, ids: &[u64]) -> Result<FeatureBlock> {
    let m = Matrix::load(emb_path)?;
    let file_ids = load_ids(ids_path)?;
    if file_ids.len() != m.rows() {
        return Err(Error::Alignment(format!(
            "{} has {} rows but {} lists {} ids",
            emb_path.display(),
            m.rows(),
            ids_path.display(),
            file_ids.len()
        )));
    }
    let pos: HashMap<u64, usize> = file_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut out = Matrix::zeros(ids.len(), m.cols());
    let mut missing = vec![true; ids.len()];
    for (r, id) in ids.iter().enumerate() {
        if let Some(&src) = pos.get(id) {
            out.row_mut(r).copy_from_slice(m.row(src));
            missing[r] = false;
        }
    }
    Ok(FeatureBlock {
        kind,
        matrix: out,
        missing,
    })
}

/// Sidecar manifest of a persisted node feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub selection: Selection,
    pub spans: Vec<BlockSpan>,
    pub rows: usize,
    pub cols: usize,
    pub scaled: bool,
    pub scalers: Option<ScalerSet>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(kind: BlockKind, rows: usize, width: usize, v: f64) -> FeatureBlock {
        FeatureBlock {
            kind,
            matrix: Matrix::filled(rows, width, v),
            missing: vec![false; rows],
        }
    }

    fn full_blocks(rows: usize) -> Vec<FeatureBlock> {
        vec![
            block(BlockKind::Notes, rows, 768, 5.0),
            block(BlockKind::Admissions, rows, 78, 1.0),
            block(BlockKind::Diagnoses, rows, 768, 2.0),
            block(BlockKind::Procedures, rows, 768, 3.0),
            block(BlockKind::Labevents, rows, 856, 4.0),
        ]
    }

    #[test]
    fn full_and_partial_widths() {
        let blocks = full_blocks(2);
        let ids = [1, 2];
        let all = assemble(&blocks, &ids, &Selection::all()).unwrap();
        assert_eq!(all.cols(), 78 + 768 + 768 + 856 + 768);
        assert_eq!(all.cols(), 3238);
        // fixed order regardless of input order
        let order: Vec<BlockKind> = all.spans.iter().map(|s| s.kind).collect();
        assert_eq!(order, BlockKind::ALL.to_vec());
        assert_eq!(all.matrix.row(0)[77], 1.0);
        assert_eq!(all.matrix.row(0)[78], 2.0);
        assert_eq!(all.matrix.row(0)[3237], 5.0);

        let sel: Selection = "admissions+labevents".parse().unwrap();
        let part = assemble(&blocks, &ids, &sel).unwrap();
        assert_eq!(part.cols(), 934);
        assert_eq!(part.spans[1].offset, 78);
    }

    #[test]
    fn selection_requires_admissions() {
        assert!(Selection::new([BlockKind::Notes, BlockKind::Labevents]).is_err());
        assert!("labevents+notes".parse::<Selection>().is_err());
        assert_eq!(Selection::ablations().len(), 6);
        assert_eq!(Selection::ablations()[5].label(), "all");
    }

    #[test]
    fn misaligned_block_rejected() {
        let mut blocks = full_blocks(2);
        blocks[2] = block(BlockKind::Diagnoses, 3, 768, 0.0);
        assert!(matches!(
            assemble(&blocks, &[1, 2], &Selection::all()),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn precomputed_block_alignment() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        save_block(dir.path(), "notes", &m, &[20, 10]).unwrap();
        let b = load_block(
            BlockKind::Notes,
            &dir.path().join("notes.emb"),
            &dir.path().join("notes.ids"),
            &[10, 30, 20],
        )
        .unwrap();
        assert_eq!(b.matrix.row(0), &[3.0, 4.0]);
        assert_eq!(b.matrix.row(1), &[0.0, 0.0]);
        assert_eq!(b.matrix.row(2), &[1.0, 2.0]);
        assert_eq!(b.missing, vec![false, true, false]);
    }
}
