#include "sftgen/index/hybrid.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::index {

namespace {

/// Positions of the `k` best entries by (score desc, id asc).
std::vector<std::size_t> top_positions(const std::vector<double>& scores, const std::vector<std::string>& ids,
                                       std::size_t k, bool positive_only) {
    std::vector<std::size_t> order;
    order.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive_only || scores[i] > 0.0) order.push_back(i);
    }
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    };
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
    order.resize(k);
    return order;
}

void min_max(std::vector<Candidate>& pool, double Candidate::*raw, double Candidate::*norm) {
    double lo = pool.front().*raw;
    double hi = lo;
    for (const auto& c : pool) {
        lo = std::min(lo, c.*raw);
        hi = std::max(hi, c.*raw);
    }
    for (auto& c : pool) c.*norm = hi > lo ? (c.*raw - lo) / (hi - lo) : 0.5;
}

}  // namespace

void RetrievalConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError(fmt::format("retrieval: alpha {} not in [0,1]", alpha));
    if (k_cand == 0) throw ValidationError("retrieval: k_cand must be positive");
    if (top_k == 0 || top_k > 2 * k_cand) {
        throw ValidationError(fmt::format("retrieval: top_k {} must be in [1, 2*k_cand={}]", top_k, 2 * k_cand));
    }
}

json to_json(const Candidate& c) {
    return json{{"chunk_id", c.chunk_id},         {"s_dense", c.s_dense},   {"s_bm25", c.s_bm25},
                {"s_dense_norm", c.s_dense_norm}, {"s_bm25_norm", c.s_bm25_norm}, {"s_hybrid", c.s_hybrid}};
}

std::vector<Candidate> normalize_pool(std::vector<Candidate> pool) {
    if (pool.empty()) return pool;
    min_max(pool, &Candidate::s_dense, &Candidate::s_dense_norm);
    min_max(pool, &Candidate::s_bm25, &Candidate::s_bm25_norm);
    return pool;
}

HybridRetriever::HybridRetriever(const SparseIndex& sparse, const DenseIndex& dense, QueryEmbedder embedder)
    : sparse_(sparse), dense_(dense), embedder_(std::move(embedder)) {
    if (sparse_.size() == 0 || dense_.size() == 0) throw ValidationError("retrieval: empty index");
    if (sparse_.size() != dense_.size()) {
        throw ValidationError(fmt::format("retrieval: sparse index has {} chunks, dense index has {}", sparse_.size(),
                                          dense_.size()));
    }
    dense_to_sparse_.resize(dense_.size());
    for (std::size_t d = 0; d < dense_.size(); ++d) {
        const auto s = sparse_.position(dense_.chunk_ids()[d]);
        if (!s) throw ValidationError("retrieval: chunk " + dense_.chunk_ids()[d] + " missing from sparse index");
        dense_to_sparse_[d] = *s;
    }
}

std::vector<Candidate> HybridRetriever::retrieve(std::string_view query, const RetrievalConfig& cfg) const {
    if (!embedder_) throw ValidationError("retrieval: no query embedder configured");
    const auto vec = embedder_(query);
    return retrieve_with(query, vec, cfg);
}

std::vector<Candidate> HybridRetriever::retrieve_for_chunk(std::string_view chunk_id, std::string_view chunk_text,
                                                           const RetrievalConfig& cfg) const {
    const auto pos = dense_.position(chunk_id);
    if (!pos) throw ValidationError("retrieval: chunk " + std::string(chunk_id) + " is not indexed");
    return retrieve_unit(chunk_text, dense_.vector(*pos), cfg);
}

std::vector<Candidate> HybridRetriever::retrieve_with(std::string_view query, std::span<const float> query_vec,
                                                      const RetrievalConfig& cfg) const {
    const auto unit = normalized(query_vec);
    return retrieve_unit(query, unit, cfg);
}

std::vector<Candidate> HybridRetriever::retrieve_unit(std::string_view query, std::span<const float> unit,
                                                      const RetrievalConfig& cfg) const {
    cfg.validate();
    if (unit.size() != dense_.dimension()) {
        throw ValidationError(fmt::format("retrieval: query embedding has dimension {}, index has {}", unit.size(),
                                          dense_.dimension()));
    }
    // Both score vectors are indexed by dense position.
    auto dense_scores = dense_.score_all(unit);
    for (auto& s : dense_scores) s = std::clamp(s, -1.0, 1.0);
    const auto tokens = text::tokenize(query);
    const auto sparse_by_pos = sparse_.score_all(tokens);
    std::vector<double> bm25(dense_.size());
    for (std::size_t d = 0; d < dense_.size(); ++d) bm25[d] = sparse_by_pos[dense_to_sparse_[d]];

    const auto& ids = dense_.chunk_ids();
    auto pool_pos = top_positions(dense_scores, ids, cfg.k_cand, false);
    for (auto p : top_positions(bm25, ids, cfg.k_cand, true)) {
        if (std::find(pool_pos.begin(), pool_pos.end(), p) == pool_pos.end()) pool_pos.push_back(p);
    }

    std::vector<Candidate> pool;
    pool.reserve(pool_pos.size());
    for (auto p : pool_pos) {
        Candidate c;
        c.chunk_id = ids[p];
        c.s_dense = dense_scores[p];
        c.s_bm25 = bm25[p];
        pool.push_back(std::move(c));
    }
    pool = normalize_pool(std::move(pool));
    for (auto& c : pool) c.s_hybrid = fuse(cfg.alpha, c.s_dense_norm, c.s_bm25_norm);
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        if (a.s_hybrid != b.s_hybrid) return a.s_hybrid > b.s_hybrid;
        return a.chunk_id < b.chunk_id;
    });
    if (pool.size() > cfg.top_k) pool.resize(cfg.top_k);
    return pool;
}

std::vector<Candidate> hybrid_retrieve(std::string_view query, const SparseIndex& sparse, const DenseIndex& dense,
                                       const QueryEmbedder& embedder, const RetrievalConfig& cfg) {
    return HybridRetriever(sparse, dense, embedder).retrieve(query, cfg);
}

}  // namespace sftgen::index
