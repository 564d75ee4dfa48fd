#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/index/dense_index.hpp"
#include "sftgen/index/sparse_index.hpp"

namespace sftgen::index {

struct RetrievalConfig {
    double alpha = 0.50;      // weight of the dense channel
    std::size_t k_cand = 50;  // candidates recalled per channel
    std::size_t top_k = 5;    // results kept after fusion

    /// alpha in [0,1], k_cand >= 1, 1 <= top_k <= 2 * k_cand.
    void validate() const;
};

struct Candidate {
    std::string chunk_id;
    double s_dense = 0.0;       // cosine, [-1, 1]
    double s_bm25 = 0.0;        // raw BM25, >= 0
    double s_dense_norm = 0.0;  // min-max within the pool, [0, 1]
    double s_bm25_norm = 0.0;
    double s_hybrid = 0.0;      // alpha * s_dense_norm + (1 - alpha) * s_bm25_norm
};

json to_json(const Candidate& c);

inline double fuse(double alpha, double dense_norm, double bm25_norm) {
    return alpha * dense_norm + (1.0 - alpha) * bm25_norm;
}

/// Min-max scales each channel to [0, 1] across the pool. A channel whose
/// values are all equal maps to 0.5 for every member.
std::vector<Candidate> normalize_pool(std::vector<Candidate> pool);

/// Maps a query string to an embedding (any norm; it is normalized here).
using QueryEmbedder = std::function<Embedding(std::string_view)>;

/// Two-stage retrieval: recall k_cand chunks from each index, then rerank
/// the union by the fused score.
///
/// Dense recall takes the k_cand highest cosines; BM25 recall takes the
/// k_cand highest positive BM25 scores (chunks sharing no term with the
/// query are not keyword hits). Both raw scores are looked up for every
/// pooled chunk, normalized within the pool, fused, and sorted by fused
/// score descending with chunk id ascending as tie-break.
class HybridRetriever {
public:
    /// Both indexes must cover the same chunk ids.
    HybridRetriever(const SparseIndex& sparse, const DenseIndex& dense, QueryEmbedder embedder);

    std::vector<Candidate> retrieve(std::string_view query, const RetrievalConfig& cfg) const;

    /// Uses the stored vector of an indexed chunk as the query embedding. It
    /// is bit-identical to normalizing the embedder's output for the chunk
    /// text, so this equals retrieve(chunk_text) without the embedding call.
    std::vector<Candidate> retrieve_for_chunk(std::string_view chunk_id, std::string_view chunk_text,
                                              const RetrievalConfig& cfg) const;

    /// Retrieval with a precomputed query embedding.
    std::vector<Candidate> retrieve_with(std::string_view query, std::span<const float> query_vec,
                                         const RetrievalConfig& cfg) const;

    const SparseIndex& sparse() const { return sparse_; }
    const DenseIndex& dense() const { return dense_; }

private:
    std::vector<Candidate> retrieve_unit(std::string_view query, std::span<const float> unit,
                                         const RetrievalConfig& cfg) const;

    const SparseIndex& sparse_;
    const DenseIndex& dense_;
    QueryEmbedder embedder_;
    std::vector<std::size_t> dense_to_sparse_;
};

std::vector<Candidate> hybrid_retrieve(std::string_view query, const SparseIndex& sparse, const DenseIndex& dense,
                                       const QueryEmbedder& embedder, const RetrievalConfig& cfg);

}  // namespace sftgen::index
