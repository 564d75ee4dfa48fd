#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sftgen/gateway/types.hpp"
#include "sftgen/generation/context.hpp"
#include "sftgen/generation/question_types.hpp"

namespace sftgen::generation {

inline constexpr std::string_view kQuestionMarker = "<<<QUESTION>>>";
inline constexpr std::string_view kReasoningMarker = "<<<REASONING>>>";
inline constexpr std::string_view kAnswerMarker = "<<<ANSWER>>>";

/// Question-generation request for one type and context. Labels: task=generate,
/// qtype, anchor. Sampling fields are left at their defaults for the caller.
gateway::ChatRequest render_prompt(const QuestionType& qt, const MultiSourceContext& ctx);

/// Answer request for distillation: the question, its type's answer
/// guideline and the same context. Labels: task=distill, qtype.
gateway::ChatRequest render_distill_prompt(const QuestionType& qt, std::string_view question,
                                           const MultiSourceContext& ctx);

struct ParsedDraft {
    std::string question;
    std::optional<std::string> reasoning;
    std::string answer;
};

/// Reads the QUESTION / optional REASONING / ANSWER sections. Missing or
/// empty question or answer sections, or sections out of order, throw
/// ParseError with the raw text.
ParsedDraft parse_draft(std::string_view content);

/// The answer part of a distillation reply: everything after an optional
/// ANSWER marker, trimmed. Empty answers throw ParseError.
std::string parse_distill_answer(std::string_view content);

}  // namespace sftgen::generation
