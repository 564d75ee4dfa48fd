#pragma once

#include <map>
#include <string>
#include <string_view>

namespace sftgen::corpus {

/// term -> canonical term
using Glossary = std::map<std::string, std::string>;

/// Rewrites every whole-word, case-insensitive occurrence of a glossary term
/// to its canonical form.
///
/// At each position the longest match wins; an exact (case-sensitive)
/// occurrence of a canonical form is kept verbatim and wins ties, so a
/// canonical that contains its own key ("satellite" -> "artificial
/// satellite") is not expanded twice. Passes repeat until the text stops
/// changing, which makes the function idempotent. Throws ValidationError for
/// an empty key or a glossary that keeps rewriting after 16 passes.
std::string normalize_terminology(std::string_view text, const Glossary& glossary);

}  // namespace sftgen::corpus
