#include "sftgen/corpus/document.hpp"

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::corpus {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
    return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

bool is_heading(std::string_view t) {
    std::size_t n = 0;
    while (n < t.size() && t[n] == '#') ++n;
    return n >= 1 && n <= 6 && (n == t.size() || t[n] == ' ' || t[n] == '\t');
}

/// Length of a code fence run (``` or ~~~, at least 3) at the start of t.
std::size_t fence_len(std::string_view t, char& fence_char) {
    if (t.empty() || (t[0] != '`' && t[0] != '~')) return 0;
    std::size_t n = 0;
    while (n < t.size() && t[n] == t[0]) ++n;
    if (n < 3) return 0;
    fence_char = t[0];
    return n;
}

bool starts_html_table(std::string_view t) {
    return starts_with(t, "<table") && (t.size() == 6 || t[6] == '>' || t[6] == ' ');
}

bool starts_block(std::string_view t) {
    char c = 0;
    return is_heading(t) || fence_len(t, c) > 0 || starts_with(t, "$$") || starts_with(t, "|") ||
           starts_html_table(t) || starts_with(t, "</table>");
}

std::vector<std::string_view> split_lines(std::string_view raw) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto nl = raw.find('\n', start);
        if (nl == std::string_view::npos) nl = raw.size();
        auto line = raw.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

std::string join(const std::vector<std::string_view>& lines, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out += '\n';
        out += lines[i];
    }
    return out;
}

}  // namespace

std::string_view to_string(BlockKind kind) {
    switch (kind) {
    case BlockKind::heading:
        return "heading";
    case BlockKind::paragraph:
        return "paragraph";
    case BlockKind::table:
        return "table";
    case BlockKind::code:
        return "code";
    case BlockKind::formula:
        return "formula";
    }
    return "paragraph";
}

std::vector<Block> parse_blocks(std::string_view raw) {
    if (text::is_space(raw)) throw ValidationError("empty document");
    const auto lines = split_lines(raw);
    std::vector<Block> blocks;
    std::size_t i = 0;
    while (i < lines.size()) {
        const auto t = trim(lines[i]);
        const std::size_t lineno = i + 1;
        if (t.empty()) {
            ++i;
            continue;
        }
        char fc = 0;
        if (const auto flen = fence_len(t, fc); flen > 0) {
            std::size_t j = i + 1;
            for (; j < lines.size(); ++j) {
                const auto u = trim(lines[j]);
                char uc = 0;
                const auto ulen = fence_len(u, uc);
                if (uc == fc && ulen >= flen && trim(u.substr(ulen)).empty()) break;
            }
            if (j == lines.size()) throw ValidationError(fmt::format("line {}: unclosed code fence", lineno));
            blocks.push_back({BlockKind::code, join(lines, i, j + 1), lineno});
            i = j + 1;
            continue;
        }
        if (starts_with(t, "$$")) {
            if (t.size() >= 4 && ends_with(t, "$$")) {
                blocks.push_back({BlockKind::formula, std::string(lines[i]), lineno});
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            while (j < lines.size() && !ends_with(trim(lines[j]), "$$")) ++j;
            if (j == lines.size()) throw ValidationError(fmt::format("line {}: unclosed formula block", lineno));
            blocks.push_back({BlockKind::formula, join(lines, i, j + 1), lineno});
            i = j + 1;
            continue;
        }
        if (starts_html_table(t)) {
            std::size_t j = i;
            while (j < lines.size() && trim(lines[j]).find("</table>") == std::string_view::npos) ++j;
            if (j == lines.size()) throw ValidationError(fmt::format("line {}: unclosed <table>", lineno));
            blocks.push_back({BlockKind::table, join(lines, i, j + 1), lineno});
            i = j + 1;
            continue;
        }
        if (starts_with(t, "</table>")) {
            throw ValidationError(fmt::format("line {}: </table> without matching <table>", lineno));
        }
        if (starts_with(t, "|")) {
            std::size_t j = i;
            while (j < lines.size() && starts_with(trim(lines[j]), "|")) ++j;
            blocks.push_back({BlockKind::table, join(lines, i, j), lineno});
            i = j;
            continue;
        }
        if (is_heading(t)) {
            blocks.push_back({BlockKind::heading, std::string(t), lineno});
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < lines.size()) {
            const auto u = trim(lines[j]);
            if (u.empty() || starts_block(u)) break;
            ++j;
        }
        blocks.push_back({BlockKind::paragraph, join(lines, i, j), lineno});
        i = j;
    }
    return blocks;
}

Document ingest_document(std::string_view raw, const DocumentMeta& meta, std::string id) {
    Document doc;
    doc.id = std::move(id);
    doc.title = meta.title;
    doc.source_path = meta.source_path;
    doc.tree_path = meta.tree_path;
    try {
        doc.body = parse_blocks(raw);
    } catch (const ValidationError& e) {
        const auto& where = meta.source_path.empty() ? doc.id : meta.source_path;
        throw ValidationError(where + ": " + e.what());
    }
    return doc;
}

Document Ingestor::ingest(std::string_view raw, const DocumentMeta& meta) {
    auto doc = ingest_document(raw, meta, fmt::format("d{:04d}", next_));
    ++next_;
    return doc;
}

std::string body_text(const Document& doc) {
    std::string out;
    for (std::size_t i = 0; i < doc.body.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += doc.body[i].text;
    }
    return out;
}

}  // namespace sftgen::corpus
