#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/gateway/gateway.hpp"

namespace sftgen::evaluation {

enum class Order { AB, BA };  // AB: answer_x shown first
enum class Verdict { A, B, tie };  // A = answer_x, B = answer_y

std::string_view to_string(Order o);
std::string_view to_string(Verdict v);

struct ArenaJudgment {
    std::string question_id;
    std::size_t trial = 0;
    Order presented_order = Order::AB;
    Verdict verdict = Verdict::tie;  // in terms of the underlying answers
    std::string justification;
    std::string judge_id;
};

json to_json(const ArenaJudgment& j);

/// Presentation order drawn from the seed.
Order presentation_order(std::uint64_t seed);

gateway::ChatRequest render_arena_prompt(std::string_view question, std::string_view first,
                                         std::string_view second);

/// Reads "VERDICT: A|B|tie" and a non-empty "JUSTIFICATION:" from the
/// reply. A and B refer to the presented positions. Throws ParseError.
struct PositionalVerdict {
    Verdict verdict;  // A = first presented
    std::string justification;
};
PositionalVerdict parse_arena_reply(std::string_view content);

/// Maps a positional verdict back to the underlying answers.
Verdict derandomize(Verdict positional, Order order);

/// One comparison. Returns nullopt when the judge reply is unparseable
/// twice (second try uses seed + 1).
std::optional<ArenaJudgment> arena_judge(std::string_view question_id, std::string_view question,
                                         std::string_view answer_x, std::string_view answer_y, gateway::Gateway& gw,
                                         std::uint64_t seed, std::size_t trial = 0);

struct WinRateReport {
    std::size_t n_comparisons = 0;
    std::size_t wins = 0;  // answer_x preferred
    std::size_t losses = 0;
    std::size_t ties = 0;
    std::size_t invalid = 0;
    double win_rate = 0;
    double ci_lower = 0;
    double ci_upper = 0;
    double ci_level = 0.95;
    std::string ci_method;

    json to_json() const;
};

struct BootstrapConfig {
    std::size_t resamples = 10000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// win_rate = (wins + 0.5 * ties) / n with a percentile bootstrap CI over
/// per-comparison outcomes. A resample of n outcomes is drawn as its
/// multinomial (wins, ties, losses) counts: wins ~ Binomial(n, pw), then
/// ties ~ Binomial(n - wins, pt / (1 - pw)), each by inverting a
/// precomputed CDF. This has the same distribution as drawing n indices
/// with replacement at O(log n) cost per resample. Deterministic in
/// (counts, config).
WinRateReport win_rate_report(std::size_t wins, std::size_t losses, std::size_t ties, const BootstrapConfig& cfg);

struct ArenaItem {
    std::string question_id;
    std::string question;
    std::string answer_x;
    std::string answer_y;
};

struct ArenaConfig {
    std::size_t judgments_per_question = 1;
    BootstrapConfig bootstrap;
    std::uint64_t seed = 0;
};

struct ArenaResult {
    std::vector<ArenaJudgment> judgments;  // item order, then trial
    WinRateReport report;
};

/// Judges every item judgments_per_question times (seed stream per
/// question id and trial) and summarizes. Throws ValidationError on empty
/// input and GatewayError when every comparison is invalid.
ArenaResult arena_run(const std::vector<ArenaItem>& items, gateway::Gateway& gw, const ArenaConfig& cfg);

}  // namespace sftgen::evaluation
