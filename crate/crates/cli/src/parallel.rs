//! Deterministic parallel drivers over the core kernels.
//!
//! Work is partitioned by query-row blocks; every row's result is a pure
//! function of that row alone, so any thread count (including one) produces
//! output bitwise identical to the sequential path in `bitfilt-core`.

use bitfilt_core::classifier::{score_corpus_classifier, ClassifierModel};
use bitfilt_core::embedding::EmbeddingMatrix;
use bitfilt_core::margin::{
    assemble_scores, check_pairs, knn_block, unique_query_rows, MarginConfig, Neighbor,
    NeighborList,
};
use bitfilt_core::score::ScoreTable;
use bitfilt_core::CoreError;
use rayon::prelude::*;

const ROW_CHUNK: usize = 128;

fn ensure_normalized(m: &EmbeddingMatrix) -> EmbeddingMatrix {
    if m.is_normalized() {
        m.clone()
    } else {
        m.normalize_rows()
    }
}

fn par_neighbor_lists(
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
    query_rows: &[usize],
) -> Vec<Vec<Neighbor>> {
    query_rows
        .par_chunks(ROW_CHUNK)
        .map(|chunk| {
            let mut out = vec![Vec::new(); chunk.len()];
            knn_block(queries, pool, k, chunk, &mut out);
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn par_neighborhood_means(
    queries: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
    query_rows: &[usize],
) -> Vec<f64> {
    par_neighbor_lists(queries, pool, k, query_rows)
        .iter()
        .map(|list| list.iter().map(|n| n.sim).sum::<f64>() / list.len() as f64)
        .collect()
}

/// Parallel exact k-NN; bitwise equal to [`bitfilt_core::margin::knn`].
pub fn par_knn(
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
    let neighbors = par_neighbor_lists(&queries, &pool, k, &rows);
    Ok(NeighborList {
        k: k.min(pool.rows()),
        neighbors,
    })
}

/// Parallel margin scoring; bitwise equal to
/// [`bitfilt_core::margin::score_corpus`].
pub fn par_score_corpus(
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
    let src_means = par_neighborhood_means(&src, &tgt, config.k, &src_rows);
    let tgt_means = par_neighborhood_means(&tgt, &src, config.k, &tgt_rows);
    Ok(assemble_scores(
        &src, &tgt, pairs, &src_rows, &src_means, &tgt_rows, &tgt_means, config,
    ))
}

/// Parallel classifier scoring; pointwise, so ordering is preserved exactly.
pub fn par_score_corpus_classifier(
    pairs: &[(usize, usize)],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    model: &ClassifierModel,
) -> Result<ScoreTable, CoreError> {
    let chunks: Result<Vec<ScoreTable>, CoreError> = pairs
        .par_chunks(ROW_CHUNK)
        .map(|chunk| score_corpus_classifier(chunk, src, tgt, model))
        .collect();
    let entries = chunks?
        .into_iter()
        .flat_map(|t| t.entries.into_iter())
        .collect();
    Ok(ScoreTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bitfilt_core::margin::{knn, score_corpus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
        let data = (0..rows * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingMatrix::from_data(data, dim).unwrap()
    }

    #[test]
    fn parallel_knn_matches_sequential_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_matrix(&mut rng, 300, 16);
        let p = random_matrix(&mut rng, 257, 16);
        assert_eq!(par_knn(&q, &p, 5).unwrap(), knn(&q, &p, 5).unwrap());
    }

    #[test]
    fn parallel_margin_matches_sequential_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let src = random_matrix(&mut rng, 200, 12);
        let tgt = random_matrix(&mut rng, 200, 12);
        let pairs: Vec<(usize, usize)> = (0..200).map(|i| (i, i)).collect();
        let cfg = MarginConfig::default();
        assert_eq!(
            par_score_corpus(&src, &tgt, &pairs, &cfg).unwrap(),
            score_corpus(&src, &tgt, &pairs, &cfg).unwrap()
        );
    }
}
