#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace sftgen::text {

/// Byte range of one lexical unit inside the scanned string.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool word = false;  // false: a single punctuation/symbol code point
};

/// Splits UTF-8 text into word runs and single punctuation symbols;
/// whitespace is dropped.
///
/// Word characters are letters and digits (ASCII, Latin, Greek, Cyrillic,
/// Hangul, fullwidth alphanumerics). CJK ideographs, kana and other scripts
/// written without spaces become one token per code point, which is how
/// word-boundary segmentation treats them. Invalid UTF-8 bytes count as
/// symbols.
std::vector<Span> scan(std::string_view text);

/// Lowercased word tokens; punctuation removed. Deterministic and shared by
/// the BM25 index and the text-overlap metrics.
std::vector<std::string> tokenize(std::string_view text);

/// Budget unit for chunking: words plus punctuation symbols.
std::size_t count_tokens(std::string_view text);

/// Simple case fold over the scripts listed above.
std::string fold_case(std::string_view text);

bool is_space(std::string_view text);

}  // namespace sftgen::text
