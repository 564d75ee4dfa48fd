#include "sftgen/corpus/terminology.hpp"

#include <algorithm>
#include <vector>

#include "sftgen/common/error.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::corpus {

namespace {

struct Pattern {
    std::string needle;  // folded key, or canonical verbatim
    const std::string* replacement;  // nullptr: keep verbatim
};

/// Byte positions strictly inside a word span. A match may not start or end
/// at such a position.
std::vector<bool> interior_positions(std::string_view s) {
    std::vector<bool> interior(s.size() + 1, false);
    for (const auto& sp : text::scan(s)) {
        if (!sp.word) continue;
        for (std::size_t p = sp.begin + 1; p < sp.end; ++p) interior[p] = true;
    }
    return interior;
}

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::string one_pass(std::string_view s, const std::vector<Pattern>& patterns) {
    const std::string folded = text::fold_case(s);  // same byte length as s
    const auto interior = interior_positions(s);
    std::string out;
    out.reserve(s.size());
    std::size_t p = 0;
    while (p < s.size()) {
        const Pattern* best = nullptr;
        if (!interior[p] && !is_continuation(s[p])) {
            for (const auto& pat : patterns) {
                const auto n = pat.needle.size();
                if (p + n > s.size() || interior[p + n]) continue;
                const std::string_view hay = pat.replacement ? std::string_view(folded) : s;
                if (hay.compare(p, n, pat.needle) != 0) continue;
                if (!best || n > best->needle.size() ||
                    (n == best->needle.size() && best->replacement && !pat.replacement)) {
                    best = &pat;
                }
            }
        }
        if (!best) {
            out += s[p++];
            continue;
        }
        if (best->replacement) {
            out += *best->replacement;
        } else {
            out.append(s.substr(p, best->needle.size()));
        }
        p += best->needle.size();
    }
    return out;
}

}  // namespace

std::string normalize_terminology(std::string_view text, const Glossary& glossary) {
    if (glossary.empty()) return std::string(text);
    std::vector<Pattern> patterns;
    for (const auto& [key, canonical] : glossary) {
        if (key.empty()) throw ValidationError("glossary: empty term");
        patterns.push_back({text::fold_case(key), &canonical});
        if (!canonical.empty()) patterns.push_back({canonical, nullptr});
    }
    std::string current(text);
    for (int pass = 0; pass < 16; ++pass) {
        auto next = one_pass(current, patterns);
        if (next == current) return current;
        current = std::move(next);
    }
    throw ValidationError("glossary: rewriting does not converge (cyclic terms?)");
}

}  // namespace sftgen::corpus
