#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/common/rng.hpp"
#include "sftgen/gateway/gateway.hpp"
#include "sftgen/generation/context.hpp"
#include "sftgen/generation/question_types.hpp"

namespace sftgen::generation {

struct QuestionDraft {
    std::string question_id;
    int qtype = 1;
    std::string question;
    std::optional<std::string> think;
    std::string answer;
    std::string anchor_chunk_id;
    std::vector<std::string> support_chunk_ids;
    double alpha = 0.5;
    std::size_t top_k = 5;
    std::string teacher_id;
    std::int64_t seed = 0;
};

json to_json(const QuestionDraft& d);
QuestionDraft draft_from_json(const json& j);

struct SamplingParams {
    double temperature = 0.7;
    int max_tokens = 4096;
    std::int64_t seed = 0;
};

/// Maps a 64-bit stream seed onto the non-negative request seed range.
inline std::int64_t request_seed(std::uint64_t s) { return static_cast<std::int64_t>(s >> 1); }

/// One teacher call; the reply is parsed with parse_draft. Reasoning comes
/// from the think block when present, else from the REASONING section.
/// Throws ParseError on a malformed reply.
QuestionDraft generate_question(const QuestionType& qt, const MultiSourceContext& ctx, gateway::Gateway& gw,
                                const SamplingParams& params, std::string question_id);

struct QtypeMix {
    std::array<double, kQuestionTypeCount> weights{};

    /// Q1-Q4 at 0.10 each, Q5-Q9 at 0.12 each (higher-order share 0.60).
    static QtypeMix defaults();

    /// Weights finite and non-negative with a positive sum.
    void validate() const;
    double higher_order_share() const;
};

QtypeMix qtype_mix_from_json(const json& j);
json to_json(const QtypeMix& m);

/// Draws a code in 1..9 with probability proportional to its weight.
int sample_qtype(const QtypeMix& mix, Rng& rng);
int sample_qtype(const QtypeMix& mix, std::uint64_t seed);

struct DistillConfig {
    std::size_t fan_out = 16;
    std::vector<double> temperature_schedule;  // empty: default cycle
    int max_tokens = 4096;

    /// fan_out >= 1; an explicit schedule has exactly fan_out entries >= 0.
    void validate() const;
    /// Schedule entry for a distillation index; the default cycles
    /// 0.7, 0.9, 1.1, 1.3.
    double temperature(std::size_t index) const;
};

inline constexpr std::array<double, 4> kDefaultTemperatureCycle = {0.7, 0.9, 1.1, 1.3};

struct CandidateSample {
    std::string sample_id;
    std::string question_id;
    std::string question;
    std::string think;
    std::string answer;
    int qtype = 1;
    std::vector<std::string> context_chunk_ids;
    std::string teacher_id;
    std::size_t distill_index = 0;
    double temperature = 0.0;
    std::int64_t seed = 0;
};

json to_json(const CandidateSample& s);
CandidateSample sample_from_json(const json& j);

struct DistillFailure {
    std::string question_id;
    std::size_t distill_index = 0;
    std::string reason;
    std::string raw;
};

json to_json(const DistillFailure& f);

struct DistillResult {
    std::vector<CandidateSample> samples;  // ordered by distill_index
    std::vector<DistillFailure> failures;
};

/// fan_out independent teacher answers for one question. Call i uses the
/// schedule temperature for i and seed derive_seed(seed, question_id, i).
/// Failed calls become failure records; samples + failures = fan_out.
DistillResult distill(const QuestionDraft& q, const MultiSourceContext& ctx, const DistillConfig& cfg,
                      gateway::Gateway& gw, std::uint64_t seed);

/// Chat-format training record:
///   {"messages": [{"role": "user", ...}, {"role": "assistant", "<think>T</think>A" or "A"}],
///    "meta": {...}}
json to_sft_record(const CandidateSample& s);

std::string assistant_content(std::string_view think, std::string_view answer);

}  // namespace sftgen::generation
