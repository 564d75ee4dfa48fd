#include "sftgen/corpus/segmenter.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::corpus {

namespace {

struct Unit {
    BlockKind kind;
    std::string text;
    std::size_t tokens;
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool ends_sentence(std::string_view s) {
    return s == "." || s == "!" || s == "?" || s == ";" || s == "\xE3\x80\x82" /* 。 */ ||
           s == "\xEF\xBC\x81" /* ！ */ || s == "\xEF\xBC\x9F" /* ？ */ || s == "\xEF\xBC\x9B" /* ； */;
}

/// Cuts a long paragraph into pieces of at most `limit` tokens.
void split_paragraph(const Block& block, std::size_t limit, std::vector<Unit>& out) {
    const std::string_view text = block.text;
    const auto spans = text::scan(text);
    std::size_t first = 0;
    while (first < spans.size()) {
        std::size_t last = std::min(spans.size(), first + limit);  // exclusive
        if (last < spans.size()) {
            // Prefer the latest sentence end in the second half of the window.
            for (std::size_t k = last; k > first + limit / 2; --k) {
                const auto& sp = spans[k - 1];
                if (!sp.word && ends_sentence(text.substr(sp.begin, sp.end - sp.begin))) {
                    last = k;
                    break;
                }
            }
        }
        const std::size_t begin = first == 0 ? 0 : spans[first].begin;
        const std::size_t end = last == spans.size() ? text.size() : spans[last].begin;
        out.push_back({BlockKind::paragraph, std::string(trim(text.substr(begin, end - begin))), last - first});
        first = last;
    }
}

ChunkKind kind_of(const std::vector<Unit>& units) {
    std::size_t structural = 0;
    for (const auto& u : units) structural += is_structural(u.kind) ? 1 : 0;
    if (structural == 0) return ChunkKind::paragraph;
    if (units.size() == 1) {
        switch (units.front().kind) {
        case BlockKind::table:
            return ChunkKind::table;
        case BlockKind::code:
            return ChunkKind::code;
        default:
            return ChunkKind::formula;
        }
    }
    return ChunkKind::mixed;
}

/// Last `n` tokens of a paragraph, as a verbatim suffix.
std::string tail_tokens(std::string_view text, std::size_t n) {
    const auto spans = text::scan(text);
    if (n == 0 || spans.empty()) return {};
    if (spans.size() <= n) return std::string(trim(text));
    return std::string(trim(text.substr(spans[spans.size() - n].begin)));
}

}  // namespace

void ChunkPolicy::validate() const {
    if (target_tokens == 0 || max_tokens == 0) throw ValidationError("chunk policy: token budgets must be positive");
    if (!(overlap_tokens < target_tokens && target_tokens <= max_tokens)) {
        throw ValidationError(fmt::format("chunk policy: need overlap < target <= max, got {} / {} / {}",
                                          overlap_tokens, target_tokens, max_tokens));
    }
}

std::string_view to_string(ChunkKind kind) {
    switch (kind) {
    case ChunkKind::paragraph:
        return "paragraph";
    case ChunkKind::table:
        return "table";
    case ChunkKind::code:
        return "code";
    case ChunkKind::formula:
        return "formula";
    case ChunkKind::mixed:
        return "mixed";
    }
    return "paragraph";
}

ChunkKind chunk_kind_from_string(std::string_view s) {
    for (auto k : {ChunkKind::paragraph, ChunkKind::table, ChunkKind::code, ChunkKind::formula, ChunkKind::mixed}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("unknown chunk kind: " + std::string(s));
}

json to_json(const Chunk& c) {
    return json{{"id", c.id},
                {"doc_id", c.doc_id},
                {"text", c.text},
                {"kind", to_string(c.kind)},
                {"tree_path", c.tree_path},
                {"token_count", c.token_count},
                {"oversized", c.oversized},
                {"overlap_chars", c.overlap_chars}};
}

Chunk chunk_from_json(const json& j) {
    Chunk c;
    c.id = j.at("id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.kind = chunk_kind_from_string(j.at("kind").get<std::string>());
    c.tree_path = j.value("tree_path", std::string{});
    c.token_count = j.at("token_count").get<std::size_t>();
    c.oversized = j.value("oversized", false);
    c.overlap_chars = j.value("overlap_chars", std::size_t{0});
    return c;
}

std::vector<Chunk> segment(const Document& doc, const ChunkPolicy& policy) {
    policy.validate();

    std::vector<Unit> units;
    for (const auto& block : doc.body) {
        const auto n = text::count_tokens(block.text);
        if (block.kind == BlockKind::paragraph && n > policy.target_tokens) {
            split_paragraph(block, policy.target_tokens, units);
        } else {
            units.push_back({block.kind, block.text, n});
        }
    }

    std::vector<Chunk> chunks;
    const Unit* prev_last = nullptr;  // last unit of the previous chunk

    auto emit = [&](std::vector<Unit> group) {
        std::string body;
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (i > 0) body += "\n\n";
            body += group[i].text;
        }
        Chunk c;
        c.id = fmt::format("{}-c{:04d}", doc.id, chunks.size() + 1);
        c.doc_id = doc.id;
        c.tree_path = doc.tree_path;
        c.kind = kind_of(group);
        const std::size_t body_tokens = text::count_tokens(body);
        const bool lone_structural = group.size() == 1 && is_structural(group.front().kind);
        if (policy.overlap_tokens > 0 && prev_last && prev_last->kind == BlockKind::paragraph && !lone_structural &&
            body_tokens < policy.max_tokens) {
            const auto budget = std::min(policy.overlap_tokens, policy.max_tokens - body_tokens);
            const auto overlap = tail_tokens(prev_last->text, budget);
            if (!overlap.empty()) {
                c.text = overlap + "\n\n";
                c.overlap_chars = c.text.size();
            }
        }
        c.text += body;
        c.token_count = text::count_tokens(c.text);
        c.oversized = c.token_count > policy.max_tokens;
        chunks.push_back(std::move(c));
        return group;
    };

    std::vector<Unit> current;
    std::size_t current_tokens = 0;
    std::vector<Unit> last_group;

    auto flush = [&] {
        if (current.empty()) return;
        // Keep trailing headings with the content that follows them.
        std::vector<Unit> carry;
        while (current.size() > 1 && current.back().kind == BlockKind::heading) {
            carry.insert(carry.begin(), std::move(current.back()));
            current.pop_back();
        }
        last_group = emit(std::move(current));
        prev_last = &last_group.back();
        current = std::move(carry);
        current_tokens = 0;
        for (const auto& u : current) current_tokens += u.tokens;
    };

    auto only_headings = [&] {
        return std::all_of(current.begin(), current.end(),
                           [](const Unit& u) { return u.kind == BlockKind::heading; });
    };

    for (auto& unit : units) {
        if (is_structural(unit.kind) && unit.tokens > policy.max_tokens) {
            flush();
            // Carried headings travel with the oversized block.
            current.push_back(std::move(unit));
            last_group = emit(std::move(current));
            prev_last = &last_group.back();
            current.clear();
            current_tokens = 0;
            continue;
        }
        if (!current.empty() && current_tokens + unit.tokens > policy.target_tokens) {
            if (!only_headings() || current_tokens + unit.tokens > policy.max_tokens) flush();
        }
        current_tokens += unit.tokens;
        current.push_back(std::move(unit));
    }
    if (!current.empty()) {
        last_group = emit(std::move(current));
    }
    return chunks;
}

}  // namespace sftgen::corpus
