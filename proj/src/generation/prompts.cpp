#include "sftgen/generation/prompts.hpp"

#include <fmt/format.h>

#include "sftgen/common/error.hpp"

namespace sftgen::generation {

namespace {

constexpr std::string_view kSystem =
    "You are a senior domain engineer writing training material. Use only the supplied sources. Questions must be "
    "self-contained: never refer to \"the text\", \"the sources\" or \"the passage\".";

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

gateway::ChatRequest render_prompt(const QuestionType& qt, const MultiSourceContext& ctx) {
    const auto levels = [&] {
        std::string s;
        for (auto l : qt.levels) s += (s.empty() ? "" : "/") + std::string(to_string(l));
        return s;
    }();
    auto user = fmt::format(
        "Write one {code} ({name}) question at the Bloom level {levels}.\n"
        "Objective: {objective}\n"
        "Design hint: {hint}\n"
        "Example prefix: \"{prefix}\"\n"
        "Answer guideline: {guideline}\n"
        "\n"
        "The question must integrate knowledge from several of the sources below, not just the first one.\n"
        "\n"
        "{context}\n"
        "\n"
        "Reply in exactly this layout:\n"
        "{q}\n<the question>\n{r}\n<your reasoning>\n{a}\n<the answer, following the answer guideline>\n",
        fmt::arg("code", qt.code_str()), fmt::arg("name", qt.name), fmt::arg("levels", levels),
        fmt::arg("objective", qt.objective), fmt::arg("hint", qt.design_hint), fmt::arg("prefix", qt.example_prefix),
        fmt::arg("guideline", qt.answer_guideline), fmt::arg("context", ctx.rendered_text),
        fmt::arg("q", kQuestionMarker), fmt::arg("r", kReasoningMarker), fmt::arg("a", kAnswerMarker));

    gateway::ChatRequest req;
    req.messages = {{gateway::Role::system, std::string(kSystem)}, {gateway::Role::user, std::move(user)}};
    req.think_mode = true;
    req.labels = {{"task", "generate"}, {"qtype", qt.code_str()}, {"anchor", ctx.anchor_chunk_id}};
    return req;
}

gateway::ChatRequest render_distill_prompt(const QuestionType& qt, std::string_view question,
                                           const MultiSourceContext& ctx) {
    auto user = fmt::format(
        "Answer the {code} ({name}) question below using the sources.\n"
        "Answer guideline: {guideline}\n"
        "\n"
        "{context}\n"
        "\n"
        "Question:\n{question}\n"
        "\n"
        "Think it through, then give only the final answer after the line {a}\n",
        fmt::arg("code", qt.code_str()), fmt::arg("name", qt.name), fmt::arg("guideline", qt.answer_guideline),
        fmt::arg("context", ctx.rendered_text), fmt::arg("question", question), fmt::arg("a", kAnswerMarker));

    gateway::ChatRequest req;
    req.messages = {{gateway::Role::system, std::string(kSystem)}, {gateway::Role::user, std::move(user)}};
    req.think_mode = true;
    req.labels = {{"task", "distill"}, {"qtype", qt.code_str()}};
    return req;
}

ParsedDraft parse_draft(std::string_view content) {
    const auto q = content.find(kQuestionMarker);
    const auto a = content.find(kAnswerMarker);
    if (q == std::string_view::npos) throw ParseError("generation reply has no question section", std::string(content));
    if (a == std::string_view::npos) throw ParseError("generation reply has no answer section", std::string(content));
    if (a < q) throw ParseError("generation reply has the answer before the question", std::string(content));
    auto r = content.find(kReasoningMarker, q);
    if (r != std::string_view::npos && r > a) r = std::string_view::npos;

    ParsedDraft d;
    const auto q_begin = q + kQuestionMarker.size();
    d.question = std::string(trim(content.substr(q_begin, (r != std::string_view::npos ? r : a) - q_begin)));
    if (r != std::string_view::npos) {
        const auto r_begin = r + kReasoningMarker.size();
        auto reasoning = trim(content.substr(r_begin, a - r_begin));
        if (!reasoning.empty()) d.reasoning = std::string(reasoning);
    }
    d.answer = std::string(trim(content.substr(a + kAnswerMarker.size())));
    if (d.question.empty()) throw ParseError("generation reply has an empty question", std::string(content));
    if (d.answer.empty()) throw ParseError("generation reply has an empty answer", std::string(content));
    return d;
}

std::string parse_distill_answer(std::string_view content) {
    const auto a = content.rfind(kAnswerMarker);
    auto answer = trim(a == std::string_view::npos ? content : content.substr(a + kAnswerMarker.size()));
    if (answer.empty()) throw ParseError("distillation reply has an empty answer", std::string(content));
    return std::string(answer);
}

}  // namespace sftgen::generation
