#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace sftgen::generation {

enum class Bloom { remember, understand, apply, analyze, evaluate, create };

std::string_view to_string(Bloom level);

struct QuestionType {
    int code;                          // 1..9
    std::string_view name;
    std::vector<Bloom> levels;
    std::string_view focus;            // short assessment objective
    std::string_view objective;
    std::string_view design_hint;
    std::string_view example_prefix;
    std::string_view answer_guideline;

    std::string code_str() const { return "Q" + std::to_string(code); }
};

inline constexpr int kQuestionTypeCount = 9;

/// The nine Bloom-guided types, indexed by code - 1.
const std::vector<QuestionType>& question_types();

/// Throws ValidationError for codes outside 1..9.
const QuestionType& question_type(int code);

/// Parses "Q1".."Q9" (case-insensitive). Throws ValidationError.
int parse_qtype(std::string_view code);

/// Checks there are nine types with codes 1..9 in order and that together
/// they cover all six Bloom levels. Throws InvariantError.
void registry_self_check();

}  // namespace sftgen::generation
