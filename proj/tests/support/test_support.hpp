#pragma once

// Helpers shared by the unit and acceptance suites: scratch directories,
// random corpora and brute-force reference implementations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "sftgen/common/rng.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/gateway/gateway.hpp"
#include "sftgen/gateway/mock.hpp"
#include "sftgen/index/dense_index.hpp"
#include "sftgen/index/hybrid.hpp"
#include "sftgen/index/sparse_index.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                fmt::format("sftgen-{}-{}-{}", tag, static_cast<long>(::getpid()), counter++);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> words = {
        "orbit",   "radar",      "debris",    "catalog",   "sensor",    "tracking", "drag",      "covariance",
        "maneuver", "conjunction", "telescope", "photometry", "epoch",   "residual", "filter",    "propagation",
        "breakup", "fragment",   "satellite", "altitude",  "inclination", "period", "density",   "reentry",
        "station", "beam",       "fence",     "window",    "estimate",  "model",    "element",   "velocity",
        "miss",    "distance",   "probability", "screening", "attitude", "spin",    "signal",    "noise",
        "the",     "of",         "a",         "in",        "and",       "to",       "is",        "for"};
    return words;
}

/// Random chunk list with Zipf-like word frequencies. Some chunks repeat
/// others verbatim so ties in both channels occur.
inline std::vector<sftgen::corpus::Chunk> random_chunks(std::uint64_t seed, std::size_t n) {
    sftgen::Rng rng(seed);
    const auto& vocab = vocabulary();
    std::vector<sftgen::corpus::Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
        sftgen::corpus::Chunk c;
        c.id = fmt::format("c{:04}", i);
        c.doc_id = "d0001";
        c.tree_path = "A/B/C";
        if (i > 2 && rng.below(25) == 0) {
            c.text = out[rng.below(i)].text;
        } else {
            const auto len = 3 + rng.below(40);
            for (std::size_t w = 0; w < len; ++w) {
                // Squared uniform skews toward the front of the vocabulary.
                const double u = rng.uniform();
                const auto idx = static_cast<std::size_t>(u * u * static_cast<double>(vocab.size()));
                if (!c.text.empty()) c.text += ' ';
                c.text += vocab[idx];
            }
        }
        c.token_count = sftgen::text::count_tokens(c.text);
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string random_query(sftgen::Rng& rng, std::size_t max_len = 6) {
    const auto& vocab = vocabulary();
    std::string q;
    const auto len = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < len; ++i) {
        if (!q.empty()) q += ' ';
        q += vocab[rng.below(vocab.size())];
    }
    return q;
}

struct Indexes {
    std::vector<sftgen::corpus::Chunk> chunks;
    sftgen::index::SparseIndex sparse;
    sftgen::index::DenseIndex dense;
};

inline std::unique_ptr<Indexes> build_indexes(std::vector<sftgen::corpus::Chunk> chunks) {
    auto sparse = sftgen::index::SparseIndex::build(chunks);
    sftgen::index::DenseIndex dense;
    for (const auto& c : chunks) dense.add(c.id, sftgen::gateway::mock_embedding(c.text));
    return std::unique_ptr<Indexes>(new Indexes{std::move(chunks), std::move(sparse), std::move(dense)});
}

inline sftgen::index::QueryEmbedder mock_embedder() {
    return [](std::string_view q) { return sftgen::gateway::mock_embedding(q); };
}

// ---- Brute-force retrieval reference ----------------------------------------

/// Okapi BM25 straight from the formula over raw chunk texts.
inline std::vector<double> reference_bm25(const std::vector<sftgen::corpus::Chunk>& chunks,
                                          const std::vector<std::string>& query, double k1 = 1.2, double b = 0.75) {
    const auto n = static_cast<double>(chunks.size());
    std::vector<std::map<std::string, int>> tf(chunks.size());
    std::vector<double> len(chunks.size());
    std::map<std::string, int> df;
    double total = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto toks = sftgen::text::tokenize(chunks[i].text);
        len[i] = static_cast<double>(toks.size());
        total += len[i];
        for (const auto& t : toks) tf[i][t]++;
        for (const auto& [t, _] : tf[i]) df[t]++;
    }
    const double avgdl = total / n;
    std::vector<double> out(chunks.size(), 0.0);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        double s = 0;
        for (const auto& t : query) {
            const auto it = tf[i].find(t);
            if (it == tf[i].end()) continue;
            const double nt = df[t];
            const double idf = std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
            const double f = it->second;
            s += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len[i] / avgdl));
        }
        out[i] = s;
    }
    return out;
}

inline double sequential_dot(std::span<const float> a, std::span<const float> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

struct RefCandidate {
    std::string id;
    double dense = 0, bm25 = 0, dense_norm = 0, bm25_norm = 0, fused = 0;
};

/// Scores every chunk in both channels, pools the two top-k_cand lists
/// (dense: all chunks; BM25: positive scores only; ties by id), min-max
/// normalizes within the pool, fuses and sorts. `dense_scores` is indexed
/// like `chunks`.
inline std::vector<RefCandidate> reference_hybrid(const std::vector<sftgen::corpus::Chunk>& chunks,
                                                  const std::vector<double>& dense_scores,
                                                  const std::vector<double>& bm25_scores,
                                                  const sftgen::index::RetrievalConfig& cfg) {
    std::vector<std::size_t> all(chunks.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto top = [&](const std::vector<double>& s, bool positive) {
        std::vector<std::size_t> v;
        for (auto i : all) {
            if (!positive || s[i] > 0) v.push_back(i);
        }
        std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
            return s[a] != s[b] ? s[a] > s[b] : chunks[a].id < chunks[b].id;
        });
        if (v.size() > cfg.k_cand) v.resize(cfg.k_cand);
        return v;
    };
    std::vector<std::size_t> pool = top(dense_scores, false);
    for (auto i : top(bm25_scores, true)) {
        if (std::find(pool.begin(), pool.end(), i) == pool.end()) pool.push_back(i);
    }
    std::vector<RefCandidate> out;
    for (auto i : pool) out.push_back({chunks[i].id, std::clamp(dense_scores[i], -1.0, 1.0), bm25_scores[i]});
    const auto scale = [&](double RefCandidate::*raw, double RefCandidate::*norm) {
        double lo = out.front().*raw, hi = lo;
        for (const auto& c : out) {
            lo = std::min(lo, c.*raw);
            hi = std::max(hi, c.*raw);
        }
        for (auto& c : out) c.*norm = hi == lo ? 0.5 : (c.*raw - lo) / (hi - lo);
    };
    scale(&RefCandidate::dense, &RefCandidate::dense_norm);
    scale(&RefCandidate::bm25, &RefCandidate::bm25_norm);
    for (auto& c : out) c.fused = cfg.alpha * c.dense_norm + (1.0 - cfg.alpha) * c.bm25_norm;
    std::sort(out.begin(), out.end(), [](const RefCandidate& a, const RefCandidate& b) {
        return a.fused != b.fused ? a.fused > b.fused : a.id < b.id;
    });
    if (out.size() > cfg.top_k) out.resize(cfg.top_k);
    return out;
}

/// Reference ranking for a text query against indexes built by
/// build_indexes. Stored unit vectors are read back from the dense index
/// and dotted sequentially with the normalized query.
inline std::vector<RefCandidate> reference_for_query(const Indexes& ix, std::string_view query,
                                                     const sftgen::index::RetrievalConfig& cfg) {
    const auto q = sftgen::index::normalized(sftgen::gateway::mock_embedding(query));
    std::vector<double> dense(ix.chunks.size());
    for (std::size_t i = 0; i < ix.chunks.size(); ++i) {
        dense[i] = sequential_dot(q, ix.dense.vector(*ix.dense.position(ix.chunks[i].id)));
    }
    return reference_hybrid(ix.chunks, dense, reference_bm25(ix.chunks, sftgen::text::tokenize(query)), cfg);
}

inline std::vector<std::string> ids_of(const std::vector<RefCandidate>& v) {
    std::vector<std::string> out;
    for (const auto& c : v) out.push_back(c.id);
    return out;
}

inline std::vector<std::string> ids_of(const std::vector<sftgen::index::Candidate>& v) {
    std::vector<std::string> out;
    for (const auto& c : v) out.push_back(c.chunk_id);
    return out;
}

// ---- Gateways -----------------------------------------------------------------

inline sftgen::gateway::GatewayConfig fast_config(int max_parallel = 4, int max_retries = 2) {
    sftgen::gateway::GatewayConfig c;
    c.max_parallel = max_parallel;
    c.max_retries = max_retries;
    c.backoff_base = std::chrono::milliseconds(1);
    return c;
}

inline sftgen::gateway::Sleeper no_sleep() {
    return [](std::chrono::duration<double>) {};
}

inline std::unique_ptr<sftgen::gateway::Gateway> mock_gateway(sftgen::gateway::Responder responder,
                                                              int max_parallel = 4) {
    return std::make_unique<sftgen::gateway::Gateway>(
        std::make_shared<sftgen::gateway::MockBackend>(std::move(responder)), fast_config(max_parallel), no_sleep());
}

}  // namespace testing
