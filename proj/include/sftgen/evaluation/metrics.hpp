#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/error.hpp"
#include "sftgen/common/jsonl.hpp"

namespace sftgen::evaluation {

class ExtractionError : public Error {
public:
    explicit ExtractionError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// Drops a leading "<think>...</think>" block and trims. Any other think
/// tag left in the text (unclosed block, stray closing tag, second block)
/// throws ExtractionError.
std::string extract_answer(std::string_view raw);

using Tokens = std::vector<std::string>;

/// Sentence BLEU over tokens for orders 1..min(max_n, |candidate|) with
/// uniform weights, so identical texts score 1 at every max_n. Zero-match
/// orders are smoothed geometrically: the k-th such order gets precision
/// 1 / (2^k * total n-grams). Brevity penalty
/// exp(1 - r/c) applies when c < r. An empty candidate scores 0.
double bleu(const Tokens& candidate, const Tokens& reference, int max_n);

/// F1 of clipped n-gram overlap; 0 when either side has no n-grams.
double rouge_n(const Tokens& candidate, const Tokens& reference, int n);

/// F1 from the longest common subsequence; 0 for empty input.
double rouge_l(const Tokens& candidate, const Tokens& reference);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

// Text overloads tokenize with text::tokenize and log a warning for an
// empty side.
double bleu_n(std::string_view candidate, std::string_view reference, int max_n);
double rouge_n_f(std::string_view candidate, std::string_view reference, int n);
double rouge_l_f(std::string_view candidate, std::string_view reference);

inline constexpr std::array<const char*, 7> kMetricNames = {"bleu1",    "bleu2",    "bleu3",  "bleu4",
                                                            "rouge1_f", "rouge2_f", "rougeL_f"};

using MetricValues = std::array<double, 7>;

struct SampleMetrics {
    std::string question_id;
    MetricValues values{};
    bool extraction_error = false;
};

/// All seven metrics for one prediction. An extraction failure scores 0 on
/// every metric and is flagged.
SampleMetrics score_pair(std::string question_id, std::string_view candidate_raw, std::string_view reference);

struct MetricReport {
    std::vector<SampleMetrics> per_sample;
    MetricValues micro{};
    std::size_t extraction_errors = 0;

    json to_json() const;
    /// Two-column table of micro averages in percent with two decimals.
    std::string to_text() const;
};

/// Unweighted mean of each metric over samples. Throws ValidationError on
/// an empty input.
MetricReport micro_average(std::vector<SampleMetrics> samples);

/// Percent with two decimals, e.g. 0.52083 -> "52.08".
std::string format_percent(double v);

}  // namespace sftgen::evaluation
