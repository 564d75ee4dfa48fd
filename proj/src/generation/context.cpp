#include "sftgen/generation/context.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"

namespace sftgen::generation {

std::vector<std::string> MultiSourceContext::chunk_ids() const {
    std::vector<std::string> ids{anchor_chunk_id};
    ids.insert(ids.end(), support_chunk_ids.begin(), support_chunk_ids.end());
    return ids;
}

std::string render_context(const std::string& anchor_id, const std::vector<std::string>& support_ids,
                           const ChunkLookup& lookup) {
    std::string out = fmt::format("[Source 1: {}]\n{}", anchor_id, lookup(anchor_id));
    for (std::size_t i = 0; i < support_ids.size(); ++i) {
        out += fmt::format("\n\n[Source {}: {}]\n{}", i + 2, support_ids[i], lookup(support_ids[i]));
    }
    return out;
}

MultiSourceContext assemble_context(const corpus::Chunk& anchor, const index::HybridRetriever& retriever,
                                    const index::RetrievalConfig& cfg, const ChunkLookup& lookup) {
    cfg.validate();
    auto wide = cfg;
    wide.top_k = std::min(cfg.top_k + 1, 2 * cfg.k_cand);
    const auto hits = retriever.retrieve_for_chunk(anchor.id, anchor.text, wide);

    std::vector<std::string> supports;
    for (const auto& h : hits) {
        if (h.chunk_id == anchor.id) continue;
        if (supports.size() == cfg.top_k) break;
        supports.push_back(h.chunk_id);
    }
    return rebuild_context(anchor.id, std::move(supports), cfg.alpha, cfg.top_k, lookup);
}

MultiSourceContext rebuild_context(std::string anchor_id, std::vector<std::string> support_ids, double alpha,
                                   std::size_t top_k, const ChunkLookup& lookup) {
    if (std::find(support_ids.begin(), support_ids.end(), anchor_id) != support_ids.end()) {
        throw InvariantError("context: anchor " + anchor_id + " listed among its supports");
    }
    MultiSourceContext ctx;
    ctx.rendered_text = render_context(anchor_id, support_ids, lookup);
    ctx.anchor_chunk_id = std::move(anchor_id);
    ctx.support_chunk_ids = std::move(support_ids);
    ctx.alpha = alpha;
    ctx.top_k = top_k;
    return ctx;
}

ChunkLookup make_lookup(const std::vector<corpus::Chunk>& chunks) {
    auto by_id = std::make_shared<std::map<std::string, const std::string*, std::less<>>>();
    for (const auto& c : chunks) by_id->emplace(c.id, &c.text);
    return [by_id](std::string_view id) -> const std::string& {
        const auto it = by_id->find(id);
        if (it == by_id->end()) throw ValidationError(fmt::format("unknown chunk id '{}'", id));
        return *it->second;
    };
}

}  // namespace sftgen::generation
