//! Exact k-NN cosine search and margin scoring of candidate pairs.
//!
//! The margin score of a pair (x, y) is margin(cos(x, y), b) where b is the
//! average of the mean cosine similarity of x to its k nearest neighbors in
//! the target pool and of y to its k nearest neighbors in the source pool.
//! Hub sentences that are close to everything get a large b and are pushed
//! down relative to their raw cosine.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::{dot, EmbeddingMatrix};
use crate::error::CoreError;
use crate::score::{ScoreEntry, ScoreTable};

/// How the raw pair cosine `a` is reduced by the neighborhood mean `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginVariant {
    /// a / (b + epsilon)
    #[default]
    Ratio,
    /// a - b
    Distance,
    /// a, ignoring the neighborhood
    Absolute,
}

#[derive(Debug, Clone, Copy)]
pub struct MarginConfig {
    pub k: usize,
    pub variant: MarginVariant,
    pub epsilon: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self {
            k: 4,
            variant: MarginVariant::Ratio,
            epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sim: f64,
}

/// Per-query neighbor lists, sorted by similarity descending, ties broken by
/// lower pool index. Each list holds min(k, pool rows) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub k: usize,
    pub neighbors: Vec<Vec<Neighbor>>,
}

#[inline]
fn better(sim: f64, index: usize, than: &Neighbor) -> bool {
    sim > than.sim || (sim == than.sim && index < than.index)
}

#[inline]
fn push_topk(top: &mut Vec<Neighbor>, k: usize, index: usize, sim: f64) {
    if top.len() == k && !better(sim, index, &top[k - 1]) {
        return;
    }
    let mut pos = top.len();
    while pos > 0 && better(sim, index, &top[pos - 1]) {
        pos -= 1;
    }
    if top.len() == k {
        top.pop();
    }
    top.insert(pos, Neighbor { index, sim });
}

/// Width of the query block streamed against the pool. Keeps the working set
/// (block rows + one pool row) in L1/L2 while the pool is read once per block.
const QUERY_BLOCK: usize = 32;

/// Fills `out[i]` with the top-k pool neighbors of query row `query_rows[i]`.
/// Both matrices must already be row-normalized; cosine is then a plain dot.
/// Output is a pure per-row function, so any partitioning of `query_rows`
/// across threads reproduces the sequential result bitwise.
pub fn knn_block(
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
    query_rows: &[usize],
    out: &mut [Vec<Neighbor>],
) {
    debug_assert_eq!(query_rows.len(), out.len());
    let k = k.min(pool.rows());
    for slot in out.iter_mut() {
        slot.clear();
        slot.reserve(k);
    }
    for (block_rows, block_out) in query_rows.chunks(QUERY_BLOCK).zip(out.chunks_mut(QUERY_BLOCK)) {
        for p in 0..pool.rows() {
            let pool_row = pool.row(p);
            for (&q, top) in block_rows.iter().zip(block_out.iter_mut()) {
                let sim = dot(queries.row(q), pool_row);
                push_topk(top, k, p, sim);
            }
        }
    }
}

fn ensure_normalized(m: &EmbeddingMatrix) -> EmbeddingMatrix {
    if m.is_normalized() {
        m.clone()
    } else {
        m.normalize_rows()
    }
}

/// Exact brute-force k-NN by cosine similarity, one list per query row.
pub fn knn(
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
) -> Result<NeighborList, CoreError> {
    if queries.dim() != pool.dim() {
        return Err(CoreError::DimMismatch {
            left: queries.dim(),
            right: pool.dim(),
        });
    }
    if k == 0 {
        return Err(CoreError::InvalidConfig("k must be >= 1"));
    }
    let queries = ensure_normalized(queries);
    let pool = ensure_normalized(pool);
    let rows: Vec<usize> = (0..queries.rows()).collect();
    let mut out = vec![Vec::new(); queries.rows()];
    knn_block(&queries, &pool, k, &rows, &mut out);
    Ok(NeighborList {
        k: k.min(pool.rows()),
        neighbors: out,
    })
}

/// margin(a, b) for one pair, from the raw cosine and the two neighbor
/// similarity lists.
pub fn margin_score(
    xy_cos: f64,
    nn_x: &[f64],
    nn_y: &[f64],
    config: &MarginConfig,
) -> Result<f64, CoreError> {
    if nn_x.is_empty() || nn_y.is_empty() {
        return Err(CoreError::EmptyNeighborhood);
    }
    let mean = |sims: &[f64]| sims.iter().sum::<f64>() / sims.len() as f64;
    let b = 0.5 * (mean(nn_x) + mean(nn_y));
    Ok(apply_margin(xy_cos, b, config))
}

#[inline]
fn apply_margin(a: f64, b: f64, config: &MarginConfig) -> f64 {
    match config.variant {
        MarginVariant::Ratio => a / (b + config.epsilon),
        MarginVariant::Distance => a - b,
        MarginVariant::Absolute => a,
    }
}

fn mean_sims(neighbors: &[Neighbor]) -> f64 {
    neighbors.iter().map(|n| n.sim).sum::<f64>() / neighbors.len() as f64
}

/// Neighborhood means for the given query rows: mean cosine of each query to
/// its k nearest pool rows. Inputs must be normalized.
pub fn neighborhood_means(
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
    query_rows: &[usize],
) -> Vec<f64> {
    let mut out = vec![Vec::new(); query_rows.len()];
    knn_block(queries, pool, k, query_rows, &mut out);
    out.iter().map(|n| mean_sims(n)).collect()
}

/// Validates pair indices against both matrices.
pub fn check_pairs(
    pairs: &[(usize, usize)],
    src_rows: usize,
    tgt_rows: usize,
) -> Result<(), CoreError> {
    for &(i, j) in pairs {
        if i >= src_rows {
            return Err(CoreError::IndexOutOfRange {
                index: i,
                len: src_rows,
            });
        }
        if j >= tgt_rows {
            return Err(CoreError::IndexOutOfRange {
                index: j,
                len: tgt_rows,
            });
        }
    }
    Ok(())
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Sorted, deduplicated source and target rows referenced by the pairs.
pub fn unique_query_rows(pairs: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    (
        sorted_unique(pairs.iter().map(|p| p.0).collect()),
        sorted_unique(pairs.iter().map(|p| p.1).collect()),
    )
}

/// Assembles margin scores from precomputed neighborhood means. Building
/// block shared by the sequential path and external parallel drivers; both
/// must feed means from [`knn_block`] so results agree bitwise.
pub fn assemble_scores(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    pairs: &[(usize, usize)],
    src_rows: &[usize],
    src_means: &[f64],
    tgt_rows: &[usize],
    tgt_means: &[f64],
    config: &MarginConfig,
) -> ScoreTable {
    let entries = pairs
        .iter()
        .map(|&(i, j)| {
            let a = dot(src.row(i), tgt.row(j));
            let mx = src_means[src_rows.binary_search(&i).unwrap()];
            let my = tgt_means[tgt_rows.binary_search(&j).unwrap()];
            ScoreEntry::accepted(apply_margin(a, 0.5 * (mx + my), config))
        })
        .collect();
    ScoreTable { entries }
}

/// Margin-scores every candidate pair. Neighborhoods of source rows are
/// searched over the full target matrix and vice versa; rows not referenced
/// by any pair are never used as queries.
pub fn score_corpus(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    pairs: &[(usize, usize)],
    config: &MarginConfig,
) -> Result<ScoreTable, CoreError> {
    if src.dim() != tgt.dim() {
        return Err(CoreError::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    if config.k == 0 {
        return Err(CoreError::InvalidConfig("k must be >= 1"));
    }
    check_pairs(pairs, src.rows(), tgt.rows())?;
    if pairs.is_empty() {
        return Ok(ScoreTable::default());
    }
    let src = ensure_normalized(src);
    let tgt = ensure_normalized(tgt);

    let (src_rows, tgt_rows) = unique_query_rows(pairs);
    let src_means = neighborhood_means(&src, &tgt, config.k, &src_rows);
    let tgt_means = neighborhood_means(&tgt, &src, config.k, &tgt_rows);

    Ok(assemble_scores(
        &src, &tgt, pairs, &src_rows, &src_means, &tgt_rows, &tgt_means, config,
    ))
}
