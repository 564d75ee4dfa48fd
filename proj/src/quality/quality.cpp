#include "sftgen/quality/quality.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/error.hpp"
#include "sftgen/kernels/dot.hpp"

namespace sftgen::quality {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

constexpr std::string_view kRationale = "RATIONALE:";

std::string dimension_lines(const std::vector<Dimension>& dims) {
    std::string out;
    for (const auto& d : dims) out += fmt::format("- {} ({} to {}): {}\n", d.key, d.range.lo, d.range.hi, d.description);
    return out;
}

std::string layout_lines(const std::vector<Dimension>& dims) {
    std::string out;
    for (const auto& d : dims) out += fmt::format("{}: <number>\n", d.key);
    out += "RATIONALE: <why>\n";
    return out;
}

template <typename Parse>
auto judge_with_retry(gateway::ChatRequest req, gateway::Gateway& gw, std::int64_t seed, Parse&& parse)
    -> decltype(parse(std::string_view{}, std::string{})) {
    req.temperature = 0.0;
    req.seed = seed;
    for (int attempt = 0;; ++attempt) {
        const auto reply = gw.chat(req);
        try {
            return parse(reply.content, reply.backend_id);
        } catch (const ParseError& e) {
            if (attempt == 1) throw;
            spdlog::warn("judge reply unparseable ({}); retrying once", e.what());
            req.seed = seed + 1;
        }
    }
}

}  // namespace

Judgment parse_judgment(std::string_view content, const std::vector<Dimension>& dims) {
    const auto raw = [&] { return std::string(content); };
    const auto rat = content.find(kRationale);
    if (rat == std::string_view::npos) throw ParseError("judge reply has no RATIONALE section", raw());
    Judgment j;
    j.rationale = std::string(trim(content.substr(rat + kRationale.size())));
    if (j.rationale.empty()) throw ParseError("judge reply has an empty rationale", raw());

    std::vector<std::optional<double>> found(dims.size());
    const auto head = content.substr(0, rat);
    std::size_t pos = 0;
    while (pos <= head.size()) {
        auto end = head.find('\n', pos);
        if (end == std::string_view::npos) end = head.size();
        const auto line = trim(head.substr(pos, end - pos));
        pos = end + 1;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const auto key = trim(line.substr(0, colon));
        for (std::size_t d = 0; d < dims.size(); ++d) {
            if (key != dims[d].key) continue;
            if (found[d]) throw ParseError(fmt::format("judge reply repeats {}", key), raw());
            const auto v = parse_number(line.substr(colon + 1));
            if (!v) throw ParseError(fmt::format("judge reply has a non-numeric {}", key), raw());
            if (!dims[d].range.contains(*v)) {
                throw ParseError(fmt::format("judge reply {} = {} outside [{}, {}]", key, *v, dims[d].range.lo,
                                             dims[d].range.hi),
                                 raw());
            }
            found[d] = v;
        }
    }
    for (std::size_t d = 0; d < dims.size(); ++d) {
        if (!found[d]) throw ParseError(fmt::format("judge reply is missing {}", dims[d].key), raw());
        j.values.push_back(*found[d]);
    }
    return j;
}

// ---- SFT answer rubric ------------------------------------------------------

void Rubric::validate() const {
    for (const auto& d : dimensions()) {
        if (!(d.range.lo <= d.range.hi)) throw ValidationError(fmt::format("rubric: empty range for {}", d.key));
    }
    if (!std::isfinite(threshold)) throw ValidationError("rubric: threshold must be finite");
}

std::vector<Dimension> Rubric::dimensions() const {
    return {
        {"DOMAIN_SPECIFIC", "technical accuracy and domain depth of the answer", domain_specific},
        {"SELF_CONTAINMENT", "question and answer are understandable without the source documents", self_containment},
        {"STRUCTURED_CRITERIA", "the answer follows the type's answer guideline and is well organized",
         structured_criteria},
        {"DEDUCTION_BONUS", "deduct for factual errors or unsupported claims, add for exceptional insight",
         deduction_bonus},
    };
}

Rubric rubric_from_json(const json& j) {
    Rubric r;
    if (j.is_null()) return r;
    const auto range = [&](const char* key, Range& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 2) throw ValidationError(fmt::format("rubric: {} must be [lo, hi]", key));
        out = {v[0].get<double>(), v[1].get<double>()};
    };
    for (const auto& [key, _] : j.items()) {
        if (key != "domain_specific" && key != "self_containment" && key != "structured_criteria" &&
            key != "deduction_bonus" && key != "threshold") {
            throw ValidationError("quality: unknown key '" + key + "'");
        }
    }
    range("domain_specific", r.domain_specific);
    range("self_containment", r.self_containment);
    range("structured_criteria", r.structured_criteria);
    range("deduction_bonus", r.deduction_bonus);
    if (j.contains("threshold")) r.threshold = j.at("threshold").get<double>();
    r.validate();
    return r;
}

json to_json(const Rubric& r) {
    const auto pair = [](Range x) { return json::array({x.lo, x.hi}); };
    return json{{"domain_specific", pair(r.domain_specific)},
                {"self_containment", pair(r.self_containment)},
                {"structured_criteria", pair(r.structured_criteria)},
                {"deduction_bonus", pair(r.deduction_bonus)},
                {"threshold", r.threshold}};
}

json to_json(const QualityReport& r) {
    return json{{"sample_id", r.sample_id},
                {"domain_specific", r.domain_specific},
                {"self_containment", r.self_containment},
                {"structured_criteria", r.structured_criteria},
                {"deduction_bonus", r.deduction_bonus},
                {"composite", r.composite},
                {"judge_id", r.judge_id},
                {"rationale", r.rationale}};
}

QualityReport report_from_json(const json& j) {
    QualityReport r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.domain_specific = j.at("domain_specific").get<double>();
    r.self_containment = j.at("self_containment").get<double>();
    r.structured_criteria = j.at("structured_criteria").get<double>();
    r.deduction_bonus = j.at("deduction_bonus").get<double>();
    r.composite = composite(r.domain_specific, r.self_containment, r.structured_criteria, r.deduction_bonus);
    r.judge_id = j.value("judge_id", "");
    r.rationale = j.value("rationale", "");
    return r;
}

double composite(double domain, double self_containment, double structured, double deduction) {
    return clamp_total(domain + self_containment + structured + deduction);
}

gateway::ChatRequest render_quality_prompt(const generation::CandidateSample& s, const Rubric& rubric) {
    const auto& qt = generation::question_type(s.qtype);
    const auto dims = rubric.dimensions();
    auto user = fmt::format(
        "Score the training sample below.\n"
        "\n"
        "Question type: {code} ({name})\n"
        "Answer guideline: {guideline}\n"
        "\n"
        "Question:\n{question}\n"
        "\n"
        "Answer:\n{answer}\n"
        "\n"
        "Rubric:\n{rubric}"
        "\n"
        "Reply in exactly this layout:\n{layout}",
        fmt::arg("code", qt.code_str()), fmt::arg("name", qt.name), fmt::arg("guideline", qt.answer_guideline),
        fmt::arg("question", s.question), fmt::arg("answer", s.answer), fmt::arg("rubric", dimension_lines(dims)),
        fmt::arg("layout", layout_lines(dims)));
    gateway::ChatRequest req;
    req.messages = {{gateway::Role::system, "You are a strict domain reviewer."}, {gateway::Role::user, std::move(user)}};
    req.max_tokens = 1024;
    req.labels = {{"task", "quality"}, {"qtype", qt.code_str()}, {"sample_id", s.sample_id}};
    return req;
}

QualityReport parse_quality_reply(std::string_view content, const Rubric& rubric, std::string sample_id,
                                  std::string judge_id) {
    const auto j = parse_judgment(content, rubric.dimensions());
    QualityReport r;
    r.sample_id = std::move(sample_id);
    r.domain_specific = j.values[0];
    r.self_containment = j.values[1];
    r.structured_criteria = j.values[2];
    r.deduction_bonus = j.values[3];
    r.composite = composite(r.domain_specific, r.self_containment, r.structured_criteria, r.deduction_bonus);
    r.judge_id = std::move(judge_id);
    r.rationale = j.rationale;
    return r;
}

json to_json(const QuarantineRecord& q) { return json{{"id", q.id}, {"reason", q.reason}, {"raw", q.raw}}; }

ScoreOutcome score_sample(const generation::CandidateSample& s, const Rubric& rubric, gateway::Gateway& gw,
                          std::int64_t seed) {
    ScoreOutcome out;
    try {
        out.report = judge_with_retry(render_quality_prompt(s, rubric), gw, seed,
                                      [&](std::string_view content, std::string judge) {
                                          return parse_quality_reply(content, rubric, s.sample_id, std::move(judge));
                                      });
    } catch (const ParseError& e) {
        out.quarantine = QuarantineRecord{s.sample_id, e.what(), e.raw()};
    }
    return out;
}

// ---- Filtering ------------------------------------------------------------

json to_json(const FilterDecision& d) {
    return json{{"sample_id", d.sample_id}, {"kept", d.kept}, {"composite", d.composite}, {"threshold", d.threshold}};
}

json FilterResult::summary() const {
    json per = json::object();
    for (const auto& [code, st] : per_qtype) {
        per[generation::question_type(code).code_str()] = {{"total", st.total}, {"kept", st.kept},
                                                            {"keep_rate", st.keep_rate()}};
    }
    return json{{"total", decisions.size()},
                {"kept", kept.size()},
                {"rejected", rejected.size()},
                {"per_qtype", std::move(per)},
                {"composite_histogram", histogram}};
}

FilterResult filter_samples(const std::vector<generation::CandidateSample>& samples,
                            const std::vector<QualityReport>& reports, double threshold) {
    std::map<std::string_view, const QualityReport*> by_id;
    for (const auto& r : reports) by_id.emplace(r.sample_id, &r);
    FilterResult out;
    for (const auto& s : samples) {
        const auto it = by_id.find(s.sample_id);
        if (it == by_id.end()) throw ValidationError("filter: no quality report for sample " + s.sample_id);
        const double c = it->second->composite;
        const bool keep = c >= threshold;
        out.decisions.push_back({s.sample_id, keep, c, threshold});
        auto& st = out.per_qtype[s.qtype];
        ++st.total;
        if (keep) {
            ++st.kept;
            out.kept.push_back(s);
        } else {
            out.rejected.push_back(s);
        }
        ++out.histogram[std::min<std::size_t>(static_cast<std::size_t>(std::floor(c)), 9)];
    }
    return out;
}

// ---- Deduplication --------------------------------------------------------

json to_json(const DedupEvidence& e) {
    return json{{"test_id", e.test_id}, {"nearest_train_id", e.nearest_train_id}, {"similarity", e.similarity}};
}

DedupResult dedup_embedded(const std::vector<QuestionText>& test, const std::vector<index::Embedding>& test_vecs,
                           const std::vector<QuestionText>& train, const std::vector<index::Embedding>& train_vecs,
                           double tau) {
    if (test.empty() || train.empty()) throw ValidationError("dedup: test and train sets must be non-empty");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError(fmt::format("dedup: threshold {} not in (0, 1]", tau));
    if (test.size() != test_vecs.size() || train.size() != train_vecs.size()) {
        throw InvariantError("dedup: embedding count mismatch");
    }
    const auto dim = train_vecs.front().size();
    std::vector<float> matrix;
    matrix.reserve(train.size() * dim);
    for (const auto& v : train_vecs) {
        if (v.size() != dim) throw ValidationError("dedup: train embeddings differ in dimension");
        matrix.insert(matrix.end(), v.begin(), v.end());
    }
    DedupResult out;
    std::vector<double> sims(train.size());
    for (std::size_t t = 0; t < test.size(); ++t) {
        if (test_vecs[t].size() != dim) throw ValidationError("dedup: test embedding dimension mismatch");
        kernels::dot_rows(test_vecs[t], matrix, dim, sims);
        std::size_t best = 0;
        for (std::size_t i = 1; i < sims.size(); ++i) {
            if (sims[i] > sims[best]) best = i;
        }
        const double sim = std::clamp(sims[best], -1.0, 1.0);
        if (sim > tau) {
            out.removed.push_back({test[t].id, train[best].id, sim});
        } else {
            out.retained.push_back(test[t]);
        }
    }
    return out;
}

DedupResult dedup_test_against_train(const std::vector<QuestionText>& test, const std::vector<QuestionText>& train,
                                     double tau, gateway::Gateway& gw) {
    if (test.empty() || train.empty()) throw ValidationError("dedup: test and train sets must be non-empty");
    const auto texts = [](const std::vector<QuestionText>& v) {
        std::vector<std::string> out;
        for (const auto& q : v) out.push_back(q.text);
        return out;
    };
    return dedup_embedded(test, gw.embed(texts(test)), train, gw.embed(texts(train)), tau);
}

// ---- Ablation rubric ------------------------------------------------------

const std::vector<Dimension>& ablation_dimensions() {
    static const std::vector<Dimension> dims = {
        {"MULTISOURCE_INTEGRATION", "how well the QA pair combines knowledge from several sources", {0, 5}},
        {"QUESTION_COMPLEXITY", "depth and integrative difficulty of the question", {0, 3}},
        {"ANSWER_INTEGRATION", "accuracy and coherence of the answer across sources", {0, 3}},
        {"PENALTY", "deduct for redundancy, irrelevant content or errors", {-2, 0}},
    };
    return dims;
}

gateway::ChatRequest render_ablation_prompt(std::string_view question, std::string_view answer,
                                            const generation::MultiSourceContext& ctx) {
    const auto& dims = ablation_dimensions();
    auto user = fmt::format(
        "Rate how well the QA pair below integrates the supplied sources.\n"
        "\n"
        "{context}\n"
        "\n"
        "Question:\n{question}\n"
        "\n"
        "Answer:\n{answer}\n"
        "\n"
        "Rubric:\n{rubric}"
        "\n"
        "Reply in exactly this layout:\n{layout}",
        fmt::arg("context", ctx.rendered_text), fmt::arg("question", question), fmt::arg("answer", answer),
        fmt::arg("rubric", dimension_lines(dims)), fmt::arg("layout", layout_lines(dims)));
    gateway::ChatRequest req;
    req.messages = {{gateway::Role::system, "You are a strict domain reviewer."}, {gateway::Role::user, std::move(user)}};
    req.max_tokens = 1024;
    req.labels = {{"task", "ablation"},
                  {"alpha", fmt::format("{:.2f}", ctx.alpha)},
                  {"k", std::to_string(ctx.top_k)},
                  {"anchor", ctx.anchor_chunk_id}};
    return req;
}

AblationScore parse_ablation_reply(std::string_view content) {
    const auto j = parse_judgment(content, ablation_dimensions());
    AblationScore s;
    s.multisource_integration = j.values[0];
    s.question_complexity = j.values[1];
    s.answer_integration = j.values[2];
    s.penalty = j.values[3];
    s.total = clamp_total(s.multisource_integration + s.question_complexity + s.answer_integration + s.penalty);
    s.rationale = j.rationale;
    return s;
}

AblationScore ablation_score(std::string_view question, std::string_view answer,
                             const generation::MultiSourceContext& ctx, gateway::Gateway& gw, std::int64_t seed) {
    if (question.empty() || answer.empty()) throw ValidationError("ablation_score: empty question or answer");
    return judge_with_retry(render_ablation_prompt(question, answer, ctx), gw, seed,
                            [](std::string_view content, const std::string&) { return parse_ablation_reply(content); });
}

}  // namespace sftgen::quality
