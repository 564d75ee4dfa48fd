#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/gateway/gateway.hpp"
#include "sftgen/generation/context.hpp"
#include "sftgen/generation/generator.hpp"

namespace sftgen::quality {

struct Range {
    double lo;
    double hi;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// One numeric line of a judge layout: "KEY: value".
struct Dimension {
    std::string_view key;
    std::string_view description;
    Range range;
};

/// Parses "KEY: number" lines for every dimension plus a non-empty
/// "RATIONALE:" section (which runs to the end of the reply). Each key
/// must appear exactly once; a value outside its range, a non-numeric value
/// or a missing key throws ParseError carrying the raw text.
struct Judgment {
    std::vector<double> values;  // in dimension order
    std::string rationale;
};
Judgment parse_judgment(std::string_view content, const std::vector<Dimension>& dims);

inline double clamp_total(double sum) { return sum < 0.0 ? 0.0 : (sum > 10.0 ? 10.0 : sum); }

// ---- SFT answer rubric ------------------------------------------------------

struct Rubric {
    Range domain_specific{0, 4};
    Range self_containment{0, 2};
    Range structured_criteria{0, 4};
    Range deduction_bonus{-2, 1};
    double threshold = 7.0;

    void validate() const;
    std::vector<Dimension> dimensions() const;
};

Rubric rubric_from_json(const json& j);
json to_json(const Rubric& r);

struct QualityReport {
    std::string sample_id;
    double domain_specific = 0;
    double self_containment = 0;
    double structured_criteria = 0;
    double deduction_bonus = 0;
    double composite = 0;
    std::string judge_id;
    std::string rationale;
};

json to_json(const QualityReport& r);
QualityReport report_from_json(const json& j);

/// clamp(sum of the four parts, 0, 10).
double composite(double domain, double self_containment, double structured, double deduction);

gateway::ChatRequest render_quality_prompt(const generation::CandidateSample& s, const Rubric& rubric);

/// Parses a judge reply into a report; composite is computed here.
QualityReport parse_quality_reply(std::string_view content, const Rubric& rubric, std::string sample_id,
                                  std::string judge_id);

struct QuarantineRecord {
    std::string id;
    std::string reason;
    std::string raw;
};
json to_json(const QuarantineRecord& q);

struct ScoreOutcome {
    std::optional<QualityReport> report;
    std::optional<QuarantineRecord> quarantine;
};

/// Judges a sample at temperature 0 with the given seed; on a malformed
/// reply retries once with seed + 1, then quarantines. Gateway failures
/// propagate.
ScoreOutcome score_sample(const generation::CandidateSample& s, const Rubric& rubric, gateway::Gateway& gw,
                          std::int64_t seed);

// ---- Filtering ------------------------------------------------------------

struct FilterDecision {
    std::string sample_id;
    bool kept = false;
    double composite = 0;
    double threshold = 0;
};
json to_json(const FilterDecision& d);

struct QtypeStats {
    std::size_t total = 0;
    std::size_t kept = 0;
    double keep_rate() const { return total ? static_cast<double>(kept) / static_cast<double>(total) : 0.0; }
};

struct FilterResult {
    std::vector<generation::CandidateSample> kept;
    std::vector<generation::CandidateSample> rejected;
    std::vector<FilterDecision> decisions;  // input order
    std::map<int, QtypeStats> per_qtype;
    std::array<std::size_t, 10> histogram{};  // composite bins [0,1), ..., [9,10]

    json summary() const;
};

/// Keeps samples with composite >= threshold. Every sample needs a report
/// (matched by sample_id); a missing one throws ValidationError naming it.
FilterResult filter_samples(const std::vector<generation::CandidateSample>& samples,
                            const std::vector<QualityReport>& reports, double threshold);

// ---- Deduplication --------------------------------------------------------

struct QuestionText {
    std::string id;
    std::string text;
};

struct DedupEvidence {
    std::string test_id;
    std::string nearest_train_id;
    double similarity = 0;
};
json to_json(const DedupEvidence& e);

struct DedupResult {
    std::vector<QuestionText> retained;
    std::vector<DedupEvidence> removed;
};

inline constexpr double kDefaultDedupThreshold = 0.90;

/// Removes test items whose maximum cosine against the train set is
/// strictly greater than tau. Vectors must be unit length. Ties on the
/// maximum pick the first train item.
DedupResult dedup_embedded(const std::vector<QuestionText>& test, const std::vector<index::Embedding>& test_vecs,
                           const std::vector<QuestionText>& train, const std::vector<index::Embedding>& train_vecs,
                           double tau);

/// Embeds both lists through the gateway, then dedup_embedded.
DedupResult dedup_test_against_train(const std::vector<QuestionText>& test, const std::vector<QuestionText>& train,
                                     double tau, gateway::Gateway& gw);

// ---- Ablation rubric ------------------------------------------------------

struct AblationScore {
    double multisource_integration = 0;  // [0, 5]
    double question_complexity = 0;      // [0, 3]
    double answer_integration = 0;       // [0, 3]
    double penalty = 0;                  // [-2, 0]
    double total = 0;                    // clamp(sum, 0, 10)
    std::string rationale;
};

const std::vector<Dimension>& ablation_dimensions();

gateway::ChatRequest render_ablation_prompt(std::string_view question, std::string_view answer,
                                            const generation::MultiSourceContext& ctx);

AblationScore parse_ablation_reply(std::string_view content);

/// Judges one QA pair; a malformed reply is retried once with seed + 1 and
/// then rethrown as ParseError.
AblationScore ablation_score(std::string_view question, std::string_view answer,
                             const generation::MultiSourceContext& ctx, gateway::Gateway& gw, std::int64_t seed);

}  // namespace sftgen::quality
