#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/index/hybrid.hpp"

namespace sftgen::generation {

struct MultiSourceContext {
    std::string anchor_chunk_id;
    std::vector<std::string> support_chunk_ids;  // best first, at most top_k
    std::string rendered_text;
    double alpha = 0.5;
    std::size_t top_k = 5;

    /// Anchor followed by supports.
    std::vector<std::string> chunk_ids() const;
};

/// Returns the text of an indexed chunk; throws ValidationError for an
/// unknown id.
using ChunkLookup = std::function<const std::string&(std::string_view)>;

/// Concatenates the anchor and supports, each under a "[Source i: id]"
/// header, separated by blank lines.
std::string render_context(const std::string& anchor_id, const std::vector<std::string>& support_ids,
                           const ChunkLookup& lookup);

/// Retrieves top_k + 1 chunks for the anchor's text, drops the anchor
/// itself and keeps the best top_k of the rest.
MultiSourceContext assemble_context(const corpus::Chunk& anchor, const index::HybridRetriever& retriever,
                                    const index::RetrievalConfig& cfg, const ChunkLookup& lookup);

/// Rebuilds a context from stored ids.
MultiSourceContext rebuild_context(std::string anchor_id, std::vector<std::string> support_ids, double alpha,
                                   std::size_t top_k, const ChunkLookup& lookup);

/// Lookup over a chunk list (kept by reference; must outlive the lookup).
ChunkLookup make_lookup(const std::vector<corpus::Chunk>& chunks);

}  // namespace sftgen::generation
