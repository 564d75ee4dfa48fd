#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace sftgen::corpus {

enum class BlockKind { heading, paragraph, table, code, formula };

std::string_view to_string(BlockKind kind);

/// Table, code and formula blocks are indivisible.
constexpr bool is_structural(BlockKind kind) {
    return kind == BlockKind::table || kind == BlockKind::code || kind == BlockKind::formula;
}

struct Block {
    BlockKind kind = BlockKind::paragraph;
    std::string text;       // source lines including fences/markers
    std::size_t line = 0;   // 1-based line of the first source line
};

struct DocumentMeta {
    std::string title;
    std::string source_path;
    std::string tree_path;
};

struct Document {
    std::string id;
    std::string title;
    std::string source_path;
    std::vector<Block> body;
    std::string tree_path;  // empty when unassigned
};

/// Parses Markdown-like block-structured text.
///
/// Recognized blocks: ATX headings (`# ...`), fenced code (``` or ~~~),
/// display formulas (`$$ ... $$`, single- or multi-line), pipe tables
/// (consecutive lines starting with `|`), HTML tables (`<table> ...
/// </table>`), and paragraphs (runs of other non-blank lines).
///
/// Throws ValidationError for an empty body ("empty document") or a
/// malformed marker (unclosed fence/formula/table, stray `</table>`); the
/// message names the offending line.
std::vector<Block> parse_blocks(std::string_view raw);

/// Parses `raw` into a Document with the given id.
Document ingest_document(std::string_view raw, const DocumentMeta& meta, std::string id);

/// Hands out sequential ids (d0001, d0002, ...) so ids are unique within a
/// corpus and stable across runs that ingest files in the same order.
class Ingestor {
public:
    Document ingest(std::string_view raw, const DocumentMeta& meta);
    std::size_t count() const { return next_ - 1; }

private:
    std::size_t next_ = 1;
};

/// Body text as blocks joined by blank lines.
std::string body_text(const Document& doc);

}  // namespace sftgen::corpus
