#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/corpus/document.hpp"

namespace sftgen::corpus {

struct ChunkPolicy {
    std::size_t target_tokens = 512;
    std::size_t max_tokens = 768;
    std::size_t overlap_tokens = 64;

    /// overlap < target <= max, target > 0.
    void validate() const;
};

enum class ChunkKind { paragraph, table, code, formula, mixed };

std::string_view to_string(ChunkKind kind);
ChunkKind chunk_kind_from_string(std::string_view s);

struct Chunk {
    std::string id;
    std::string doc_id;
    std::string text;
    ChunkKind kind = ChunkKind::paragraph;
    std::string tree_path;
    std::size_t token_count = 0;
    /// A single indivisible block larger than max_tokens.
    bool oversized = false;
    /// Leading bytes of `text` repeated from the previous chunk (overlap
    /// plus its separator); 0 when there is no overlap.
    std::size_t overlap_chars = 0;

    /// Text with the overlap prefix removed.
    std::string_view own_text() const { return std::string_view(text).substr(overlap_chars); }
};

json to_json(const Chunk& c);
Chunk chunk_from_json(const json& j);

/// Splits a document into retrieval chunks.
///
/// Blocks are packed greedily in order; a chunk is closed when the next
/// block would push it past target_tokens. Paragraphs longer than
/// target_tokens are cut at sentence ends (falling back to token
/// boundaries). Table, code and formula blocks are never cut: one that does
/// not fit the current chunk starts a new one, and one larger than
/// max_tokens becomes a single chunk flagged `oversized`. A heading never
/// ends a chunk when content follows it. With overlap_tokens > 0, a chunk
/// that follows a paragraph starts with the last overlap_tokens tokens of
/// that paragraph, unless the chunk is a lone structural block.
std::vector<Chunk> segment(const Document& doc, const ChunkPolicy& policy);

}  // namespace sftgen::corpus
