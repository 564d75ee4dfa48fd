#include "sftgen/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/text/tokenizer.hpp"

namespace sftgen::evaluation {

namespace {

constexpr std::string_view kOpen = "<think>";
constexpr std::string_view kClose = "</think>";

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

using NgramCounts = std::map<std::vector<std::string_view>, int>;

NgramCounts ngrams(const Tokens& t, int n) {
    NgramCounts out;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
        ++out[std::vector<std::string_view>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                            t.begin() + static_cast<std::ptrdiff_t>(i + un))];
    }
    return out;
}

int clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    int overlap = 0;
    for (const auto& [g, c] : cand) {
        const auto it = ref.find(g);
        if (it != ref.end()) overlap += std::min(c, it->second);
    }
    return overlap;
}

double f1(double overlap, double cand_total, double ref_total) {
    if (cand_total == 0 || ref_total == 0) return 0.0;
    const double p = overlap / cand_total;
    const double r = overlap / ref_total;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

void warn_empty(const char* metric, std::string_view candidate, std::string_view reference) {
    if (trim(candidate).empty()) spdlog::warn("{}: empty candidate scores 0", metric);
    else if (trim(reference).empty()) spdlog::warn("{}: empty reference scores 0", metric);
}

}  // namespace

std::string extract_answer(std::string_view raw) {
    auto s = trim(raw);
    if (s.substr(0, kOpen.size()) == kOpen) {
        const auto end = s.find(kClose);
        if (end == std::string_view::npos) throw ExtractionError("unclosed <think> block");
        s = trim(s.substr(end + kClose.size()));
    }
    if (s.find(kOpen) != std::string_view::npos || s.find(kClose) != std::string_view::npos) {
        throw ExtractionError("unbalanced think delimiter in answer");
    }
    return std::string(s);
}

double bleu(const Tokens& candidate, const Tokens& reference, int max_n) {
    if (max_n < 1 || max_n > 4) throw ValidationError(fmt::format("bleu: max_n {} not in 1..4", max_n));
    if (candidate.empty()) return 0.0;
    // Effective order: orders the candidate has no n-grams for are left out.
    const int order = std::min<int>(max_n, static_cast<int>(candidate.size()));
    double log_sum = 0.0;
    int zero_orders = 0;
    for (int n = 1; n <= order; ++n) {
        const auto cand = ngrams(candidate, n);
        const int matches = clipped_overlap(cand, ngrams(reference, n));
        const auto total = static_cast<double>(candidate.size() - static_cast<std::size_t>(n) + 1);
        double p;
        if (matches == 0) {
            ++zero_orders;
            p = 1.0 / (std::ldexp(1.0, zero_orders) * total);
        } else {
            p = matches / total;
        }
        log_sum += std::log(p);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / order);
}

double rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
    if (n < 1) throw ValidationError("rouge_n: n must be >= 1");
    const auto cand = ngrams(candidate, n);
    const auto ref = ngrams(reference, n);
    double cand_total = 0, ref_total = 0;
    for (const auto& [_, c] : cand) cand_total += c;
    for (const auto& [_, c] : ref) ref_total += c;
    return f1(clipped_overlap(cand, ref), cand_total, ref_total);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
    return f1(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
              static_cast<double>(reference.size()));
}

double bleu_n(std::string_view candidate, std::string_view reference, int max_n) {
    warn_empty("bleu", candidate, reference);
    return bleu(text::tokenize(candidate), text::tokenize(reference), max_n);
}

double rouge_n_f(std::string_view candidate, std::string_view reference, int n) {
    warn_empty("rouge", candidate, reference);
    return rouge_n(text::tokenize(candidate), text::tokenize(reference), n);
}

double rouge_l_f(std::string_view candidate, std::string_view reference) {
    warn_empty("rouge-l", candidate, reference);
    return rouge_l(text::tokenize(candidate), text::tokenize(reference));
}

SampleMetrics score_pair(std::string question_id, std::string_view candidate_raw, std::string_view reference) {
    SampleMetrics m;
    m.question_id = std::move(question_id);
    std::string answer;
    try {
        answer = extract_answer(candidate_raw);
    } catch (const ExtractionError& e) {
        spdlog::warn("{}: {}; scored 0", m.question_id, e.what());
        m.extraction_error = true;
        return m;
    }
    warn_empty(m.question_id.c_str(), answer, reference);
    const auto cand = text::tokenize(answer);
    const auto ref = text::tokenize(reference);
    for (int n = 1; n <= 4; ++n) m.values[static_cast<std::size_t>(n - 1)] = bleu(cand, ref, n);
    m.values[4] = rouge_n(cand, ref, 1);
    m.values[5] = rouge_n(cand, ref, 2);
    m.values[6] = rouge_l(cand, ref);
    return m;
}

MetricReport micro_average(std::vector<SampleMetrics> samples) {
    if (samples.empty()) throw ValidationError("micro_average: no samples");
    MetricReport r;
    MetricValues sum{};
    for (const auto& s : samples) {
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += s.values[k];
        if (s.extraction_error) ++r.extraction_errors;
    }
    for (std::size_t k = 0; k < sum.size(); ++k) r.micro[k] = sum[k] / static_cast<double>(samples.size());
    r.per_sample = std::move(samples);
    return r;
}

std::string format_percent(double v) { return fmt::format("{:.2f}", v * 100.0); }

json MetricReport::to_json() const {
    json micro_j = json::object(), pct = json::object();
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        micro_j[kMetricNames[k]] = micro[k];
        pct[kMetricNames[k]] = format_percent(micro[k]);
    }
    json rows = json::array();
    for (const auto& s : per_sample) {
        json row{{"question_id", s.question_id}, {"extraction_error", s.extraction_error}};
        for (std::size_t k = 0; k < kMetricNames.size(); ++k) row[kMetricNames[k]] = s.values[k];
        rows.push_back(std::move(row));
    }
    return json{{"n", per_sample.size()},
                {"extraction_errors", extraction_errors},
                {"micro_averages", std::move(micro_j)},
                {"micro_averages_percent", std::move(pct)},
                {"per_sample", std::move(rows)}};
}

std::string MetricReport::to_text() const {
    std::string out = fmt::format("{:<10} {:>7}\n", "metric", "%");
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        out += fmt::format("{:<10} {:>7}\n", kMetricNames[k], format_percent(micro[k]));
    }
    out += fmt::format("samples {}, extraction errors {}\n", per_sample.size(), extraction_errors);
    return out;
}

}  // namespace sftgen::evaluation
