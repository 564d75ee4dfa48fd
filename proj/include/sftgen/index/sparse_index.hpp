#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sftgen/corpus/segmenter.hpp"

namespace sftgen::index {

struct Posting {
    std::uint32_t doc = 0;  // position in chunk_ids()
    std::uint32_t tf = 0;
};

/// token -> postings sorted by doc position.
using PostingMap = std::map<std::string, std::vector<Posting>, std::less<>>;

/// Okapi BM25 over chunk texts.
///
/// score(q, d) = sum over query tokens t (with multiplicity) of
///     idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
/// idf(t) = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
///
/// The +1 inside the log keeps idf, and therefore every score, non-negative.
class SparseIndex {
public:
    static constexpr double kDefaultK1 = 1.2;
    static constexpr double kDefaultB = 0.75;

    /// Throws ValidationError on an empty chunk list, duplicate ids or k1 <= 0
    /// or b outside [0, 1].
    static SparseIndex build(std::span<const corpus::Chunk> chunks, double k1 = kDefaultK1, double b = kDefaultB);

    /// Rebuilds from persisted parts. Posting lists must be sorted by doc.
    static SparseIndex from_parts(std::vector<std::string> chunk_ids, std::vector<std::uint32_t> doc_lengths,
                                  PostingMap postings, double k1, double b);

    std::size_t size() const { return chunk_ids_.size(); }
    const std::vector<std::string>& chunk_ids() const { return chunk_ids_; }
    std::optional<std::size_t> position(std::string_view chunk_id) const;

    std::uint32_t doc_length(std::size_t pos) const { return doc_lengths_[pos]; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    double avg_doc_length() const { return avg_doc_length_; }
    std::size_t vocab_size() const { return postings_.size(); }
    double k1() const { return k1_; }
    double b() const { return b_; }

    const PostingMap& postings() const { return postings_; }

    /// (chunk_id, tf) pairs for a token; empty when the token is unseen.
    std::vector<std::pair<std::string, std::uint32_t>> term_frequencies(std::string_view token) const;

    double idf(std::string_view token) const;

    /// BM25 of one chunk. Throws ValidationError for an unknown chunk id.
    double score(std::span<const std::string> query_tokens, std::string_view chunk_id) const;

    /// BM25 of every chunk, indexed by position. Summation order per chunk
    /// matches score(), so both return identical doubles.
    std::vector<double> score_all(std::span<const std::string> query_tokens) const;

private:
    double term_weight(double idf, std::uint32_t tf, std::uint32_t doc_len) const;
    void finalize();

    std::vector<std::string> chunk_ids_;
    std::map<std::string, std::uint32_t, std::less<>> positions_;
    std::vector<std::uint32_t> doc_lengths_;
    PostingMap postings_;
    double avg_doc_length_ = 0.0;
    double k1_ = kDefaultK1;
    double b_ = kDefaultB;
};

double bm25_score(const SparseIndex& index, std::span<const std::string> query_tokens, std::string_view chunk_id);

}  // namespace sftgen::index
