#include "sftgen/generation/question_types.hpp"

#include <set>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"

namespace sftgen::generation {

std::string_view to_string(Bloom level) {
    switch (level) {
        case Bloom::remember: return "Remember";
        case Bloom::understand: return "Understand";
        case Bloom::apply: return "Apply";
        case Bloom::analyze: return "Analyze";
        case Bloom::evaluate: return "Evaluate";
        case Bloom::create: return "Create";
    }
    return "?";
}

const std::vector<QuestionType>& question_types() {
    using B = Bloom;
    static const std::vector<QuestionType> types = {
        {1, "Concept Discrimination", {B::remember, B::understand},
         "Understanding and distinguishing core concepts",
         "Accurate understanding and differentiation of core concepts.",
         "Ask for comparison, distinction, or definition of key professional concepts.",
         "Distinguish between … and …",
         "Define each concept clearly; compare across multiple dimensions; link to practical use; use a table when "
         "helpful."},
        {2, "Principle Explanation", {B::understand},
         "In-depth understanding and explanation of technical principles",
         "Explain fundamental principles and mechanisms.",
         "Ask to explain how a system/phenomenon works or why it behaves so.",
         "Explain the working principle of …",
         "Describe the core principle and mechanism; explain key physical/technical processes and causality; "
         "optionally use formulas."},
        {3, "Formula Derivation", {B::understand, B::apply},
         "Mathematical modeling and theoretical analysis",
         "Mathematical modeling and derivation.",
         "Ask for derivation of key formulas, model formulation, or proof-like reasoning.",
         "Derive the mathematical expression for …",
         "State assumptions and boundary conditions; derive step-by-step; explain variable meanings; specify validity "
         "range."},
        {4, "Parameter Calculation", {B::apply},
         "Design and calculation of key parameters",
         "Compute and analyze specific parameters.",
         "Ask for numerical computation or parameter estimation/analysis.",
         "Compute the numerical value of …",
         "List knowns/unknowns; choose formulas; show detailed calculations; interpret the physical meaning of "
         "results."},
        {5, "Algorithm Implementation", {B::apply, B::analyze},
         "Algorithm design and optimization",
         "Algorithm design, implementation, and optimization.",
         "Ask for algorithm steps, pseudocode, or implementation details.",
         "Design an algorithmic workflow for …",
         "Provide the overall idea; list detailed steps; give pseudocode; analyze complexity and performance."},
        {6, "Performance Analysis", {B::analyze},
         "System performance analysis and comparison",
         "Analyze and evaluate system performance.",
         "Ask about metrics, bottlenecks, pros/cons, and trade-offs.",
         "Analyze the performance characteristics of …",
         "Define metrics; analyze influencing factors; compare advantages/limitations and scenarios; propose "
         "optimizations."},
        {7, "Process Design", {B::analyze, B::create},
         "System process design and task planning",
         "Engineering process planning and workflow design.",
         "Ask for an end-to-end workflow, processing steps, or system procedure.",
         "Design the processing workflow for …",
         "Provide a complete framework; describe key steps; specify inputs/outputs; discuss exception handling."},
        {8, "Solution Decision-Making", {B::evaluate},
         "Engineering decision-making and solution selection",
         "Integrated solution design and decision analysis.",
         "Ask for option comparison, trade-off reasoning, and final recommendation.",
         "How to choose the optimal solution for …",
         "Analyze background and constraints; propose alternatives; build an evaluation framework; recommend with "
         "justification."},
        {9, "Comprehensive Evaluation", {B::evaluate, B::create},
         "Multidimensional comprehensive evaluation and systems thinking",
         "Cross-aspect, system-level analysis and evaluation.",
         "Ask for multi-dimensional assessment, subsystem contributions, and improvement directions.",
         "Comprehensively evaluate the overall effectiveness of …",
         "Build a multi-dimensional framework; analyze subsystem contributions; synthesize overall effectiveness; "
         "propose improvements."},
    };
    return types;
}

const QuestionType& question_type(int code) {
    if (code < 1 || code > kQuestionTypeCount) throw ValidationError(fmt::format("unknown question type Q{}", code));
    return question_types()[static_cast<std::size_t>(code - 1)];
}

int parse_qtype(std::string_view code) {
    if (code.size() == 2 && (code[0] == 'Q' || code[0] == 'q') && code[1] >= '1' && code[1] <= '9') {
        return code[1] - '0';
    }
    throw ValidationError(fmt::format("unknown question type '{}'", code));
}

void registry_self_check() {
    const auto& types = question_types();
    if (types.size() != kQuestionTypeCount) {
        throw InvariantError(fmt::format("question type registry has {} entries", types.size()));
    }
    std::set<Bloom> covered;
    for (std::size_t i = 0; i < types.size(); ++i) {
        const auto& t = types[i];
        if (t.code != static_cast<int>(i) + 1) throw InvariantError(fmt::format("registry slot {} holds Q{}", i, t.code));
        if (t.levels.empty() || t.objective.empty() || t.design_hint.empty() || t.example_prefix.empty() ||
            t.answer_guideline.empty()) {
            throw InvariantError(fmt::format("question type Q{} is incomplete", t.code));
        }
        covered.insert(t.levels.begin(), t.levels.end());
    }
    if (covered.size() != 6) throw InvariantError("question types do not cover all six Bloom levels");
}

}  // namespace sftgen::generation
