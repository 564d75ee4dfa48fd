#include "sftgen/index/sparse_index.hpp"

#include <algorithm>
#include <cmath>

#include "sftgen/common/error.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::index {

SparseIndex SparseIndex::build(std::span<const corpus::Chunk> chunks, double k1, double b) {
    if (chunks.empty()) throw ValidationError("sparse index: no chunks");
    SparseIndex idx;
    idx.k1_ = k1;
    idx.b_ = b;
    for (std::size_t pos = 0; pos < chunks.size(); ++pos) {
        const auto tokens = text::tokenize(chunks[pos].text);
        idx.chunk_ids_.push_back(chunks[pos].id);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            auto it = idx.postings_.find(term);
            if (it == idx.postings_.end()) it = idx.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            it->second.push_back({static_cast<std::uint32_t>(pos), count});
        }
    }
    idx.finalize();
    return idx;
}

SparseIndex SparseIndex::from_parts(std::vector<std::string> chunk_ids, std::vector<std::uint32_t> doc_lengths,
                                    PostingMap postings, double k1, double b) {
    if (chunk_ids.empty()) throw ValidationError("sparse index: no chunks");
    if (chunk_ids.size() != doc_lengths.size()) throw ValidationError("sparse index: doc length count mismatch");
    SparseIndex idx;
    idx.chunk_ids_ = std::move(chunk_ids);
    idx.doc_lengths_ = std::move(doc_lengths);
    idx.postings_ = std::move(postings);
    idx.k1_ = k1;
    idx.b_ = b;
    for (const auto& [term, list] : idx.postings_) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].doc >= idx.chunk_ids_.size() || list[i].tf == 0 || (i > 0 && list[i - 1].doc >= list[i].doc)) {
                throw ValidationError("sparse index: malformed posting list for '" + term + "'");
            }
        }
    }
    idx.finalize();
    return idx;
}

void SparseIndex::finalize() {
    if (!(k1_ > 0.0) || !(b_ >= 0.0 && b_ <= 1.0)) throw ValidationError("sparse index: need k1 > 0 and b in [0,1]");
    positions_.clear();
    for (std::size_t i = 0; i < chunk_ids_.size(); ++i) {
        if (!positions_.emplace(chunk_ids_[i], static_cast<std::uint32_t>(i)).second) {
            throw ValidationError("sparse index: duplicate chunk id " + chunk_ids_[i]);
        }
    }
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    avg_doc_length_ = total / static_cast<double>(doc_lengths_.size());
}

std::optional<std::size_t> SparseIndex::position(std::string_view chunk_id) const {
    auto it = positions_.find(chunk_id);
    if (it == positions_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<std::string, std::uint32_t>> SparseIndex::term_frequencies(std::string_view token) const {
    std::vector<std::pair<std::string, std::uint32_t>> out;
    if (auto it = postings_.find(token); it != postings_.end()) {
        for (const auto& p : it->second) out.emplace_back(chunk_ids_[p.doc], p.tf);
    }
    return out;
}

double SparseIndex::idf(std::string_view token) const {
    const auto it = postings_.find(token);
    const double n = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    const auto total = static_cast<double>(chunk_ids_.size());
    return std::log((total - n + 0.5) / (n + 0.5) + 1.0);
}

double SparseIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t doc_len) const {
    const double f = tf;
    // avg_doc_length_ is 0 only when every chunk has no word tokens; then
    // there are no postings and this is never reached.
    const double norm = 1.0 - b_ + b_ * static_cast<double>(doc_len) / avg_doc_length_;
    return idf * f * (k1_ + 1.0) / (f + k1_ * norm);
}

double SparseIndex::score(std::span<const std::string> query_tokens, std::string_view chunk_id) const {
    const auto pos = position(chunk_id);
    if (!pos) throw ValidationError("bm25: unknown chunk id " + std::string(chunk_id));
    double total = 0.0;
    for (const auto& t : query_tokens) {
        const auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const auto& list = it->second;
        const auto p = std::lower_bound(list.begin(), list.end(), *pos,
                                        [](const Posting& x, std::size_t d) { return x.doc < d; });
        if (p == list.end() || p->doc != *pos) continue;
        total += term_weight(idf(t), p->tf, doc_lengths_[*pos]);
    }
    return total;
}

std::vector<double> SparseIndex::score_all(std::span<const std::string> query_tokens) const {
    std::vector<double> scores(chunk_ids_.size(), 0.0);
    for (const auto& t : query_tokens) {
        const auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const double w = idf(t);
        for (const auto& p : it->second) scores[p.doc] += term_weight(w, p.tf, doc_lengths_[p.doc]);
    }
    return scores;
}

double bm25_score(const SparseIndex& index, std::span<const std::string> query_tokens, std::string_view chunk_id) {
    return index.score(query_tokens, chunk_id);
}

}  // namespace sftgen::index
