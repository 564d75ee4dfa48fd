#include "sftgen/generation/generator.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/parallel.hpp"
#include "sftgen/generation/prompts.hpp"

namespace sftgen::generation {

json to_json(const QuestionDraft& d) {
    json j{{"question_id", d.question_id},
           {"qtype", question_type(d.qtype).code_str()},
           {"question", d.question},
           {"answer", d.answer},
           {"anchor_chunk_id", d.anchor_chunk_id},
           {"support_chunk_ids", d.support_chunk_ids},
           {"alpha", d.alpha},
           {"top_k", d.top_k},
           {"teacher_id", d.teacher_id},
           {"seed", d.seed}};
    j["think"] = d.think ? json(*d.think) : json(nullptr);
    return j;
}

QuestionDraft draft_from_json(const json& j) {
    QuestionDraft d;
    d.question_id = j.at("question_id").get<std::string>();
    d.qtype = parse_qtype(j.at("qtype").get<std::string>());
    d.question = j.at("question").get<std::string>();
    if (j.contains("think") && j["think"].is_string()) d.think = j["think"].get<std::string>();
    d.answer = j.at("answer").get<std::string>();
    d.anchor_chunk_id = j.at("anchor_chunk_id").get<std::string>();
    d.support_chunk_ids = j.at("support_chunk_ids").get<std::vector<std::string>>();
    d.alpha = j.at("alpha").get<double>();
    d.top_k = j.at("top_k").get<std::size_t>();
    d.teacher_id = j.value("teacher_id", "");
    d.seed = j.value("seed", std::int64_t{0});
    return d;
}

QuestionDraft generate_question(const QuestionType& qt, const MultiSourceContext& ctx, gateway::Gateway& gw,
                                const SamplingParams& params, std::string question_id) {
    auto req = render_prompt(qt, ctx);
    req.temperature = params.temperature;
    req.max_tokens = params.max_tokens;
    req.seed = params.seed;
    const auto reply = gw.chat(req);
    auto parsed = parse_draft(reply.content);

    QuestionDraft d;
    d.question_id = std::move(question_id);
    d.qtype = qt.code;
    d.question = std::move(parsed.question);
    d.think = reply.think && !reply.think->empty() ? reply.think : parsed.reasoning;
    d.answer = std::move(parsed.answer);
    d.anchor_chunk_id = ctx.anchor_chunk_id;
    d.support_chunk_ids = ctx.support_chunk_ids;
    d.alpha = ctx.alpha;
    d.top_k = ctx.top_k;
    d.teacher_id = reply.backend_id;
    d.seed = params.seed;
    return d;
}

QtypeMix QtypeMix::defaults() {
    QtypeMix m;
    for (int i = 0; i < kQuestionTypeCount; ++i) m.weights[static_cast<std::size_t>(i)] = i < 4 ? 0.10 : 0.12;
    return m;
}

void QtypeMix::validate() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
            throw ValidationError(fmt::format("qtype_mix: weight for Q{} must be finite and >= 0", i + 1));
        }
        sum += weights[i];
    }
    if (!(sum > 0.0)) throw ValidationError("qtype_mix: all weights are zero");
}

double QtypeMix::higher_order_share() const {
    double total = 0.0, high = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        total += weights[i];
        if (i >= 4) high += weights[i];
    }
    return high / total;
}

QtypeMix qtype_mix_from_json(const json& j) {
    QtypeMix m;
    if (!j.is_object()) throw ValidationError("qtype_mix must be an object of Q1..Q9 weights");
    for (const auto& [key, v] : j.items()) {
        if (!v.is_number()) throw ValidationError("qtype_mix: weight for " + key + " is not a number");
        m.weights[static_cast<std::size_t>(parse_qtype(key) - 1)] = v.get<double>();
    }
    m.validate();
    return m;
}

json to_json(const QtypeMix& m) {
    json j = json::object();
    for (std::size_t i = 0; i < m.weights.size(); ++i) j[fmt::format("Q{}", i + 1)] = m.weights[i];
    return j;
}

int sample_qtype(const QtypeMix& mix, Rng& rng) {
    mix.validate();
    double total = 0.0;
    for (double w : mix.weights) total += w;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int last_positive = 1;
    for (std::size_t i = 0; i < mix.weights.size(); ++i) {
        if (mix.weights[i] <= 0.0) continue;
        last_positive = static_cast<int>(i) + 1;
        acc += mix.weights[i];
        if (u < acc) return last_positive;
    }
    return last_positive;  // u landed on the rounding gap at the top
}

int sample_qtype(const QtypeMix& mix, std::uint64_t seed) {
    Rng rng(seed);
    return sample_qtype(mix, rng);
}

void DistillConfig::validate() const {
    if (fan_out == 0) throw ValidationError("distill: fan_out must be >= 1");
    if (!temperature_schedule.empty() && temperature_schedule.size() != fan_out) {
        throw ValidationError(fmt::format("distill: temperature_schedule has {} entries, fan_out is {}",
                                          temperature_schedule.size(), fan_out));
    }
    for (double t : temperature_schedule) {
        if (!(t >= 0.0)) throw ValidationError("distill: temperatures must be >= 0");
    }
    if (max_tokens <= 0) throw ValidationError("distill: max_tokens must be positive");
}

double DistillConfig::temperature(std::size_t index) const {
    if (!temperature_schedule.empty()) return temperature_schedule.at(index);
    return kDefaultTemperatureCycle[index % kDefaultTemperatureCycle.size()];
}

json to_json(const CandidateSample& s) {
    return json{{"sample_id", s.sample_id},
                {"question_id", s.question_id},
                {"question", s.question},
                {"think", s.think},
                {"answer", s.answer},
                {"qtype", question_type(s.qtype).code_str()},
                {"context_chunk_ids", s.context_chunk_ids},
                {"teacher_id", s.teacher_id},
                {"distill_index", s.distill_index},
                {"temperature", s.temperature},
                {"seed", s.seed}};
}

CandidateSample sample_from_json(const json& j) {
    CandidateSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.question_id = j.at("question_id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.think = j.value("think", "");
    s.answer = j.at("answer").get<std::string>();
    s.qtype = parse_qtype(j.at("qtype").get<std::string>());
    s.context_chunk_ids = j.at("context_chunk_ids").get<std::vector<std::string>>();
    s.teacher_id = j.value("teacher_id", "");
    s.distill_index = j.at("distill_index").get<std::size_t>();
    s.temperature = j.value("temperature", 0.0);
    s.seed = j.value("seed", std::int64_t{0});
    return s;
}

json to_json(const DistillFailure& f) {
    return json{{"question_id", f.question_id}, {"distill_index", f.distill_index}, {"reason", f.reason},
                {"raw", f.raw}};
}

DistillResult distill(const QuestionDraft& q, const MultiSourceContext& ctx, const DistillConfig& cfg,
                      gateway::Gateway& gw, std::uint64_t seed) {
    cfg.validate();
    const auto& qt = question_type(q.qtype);
    const auto base = render_distill_prompt(qt, q.question, ctx);

    std::vector<std::optional<CandidateSample>> slots(cfg.fan_out);
    std::vector<std::optional<DistillFailure>> errors(cfg.fan_out);
    const auto workers = static_cast<std::size_t>(gw.config().max_parallel);
    parallel_for(cfg.fan_out, workers, [&](std::size_t i) {
        auto req = base;
        req.temperature = cfg.temperature(i);
        req.max_tokens = cfg.max_tokens;
        req.seed = request_seed(derive_seed(seed, q.question_id, i));
        req.labels["distill_index"] = std::to_string(i);
        try {
            const auto reply = gw.chat(req);
            CandidateSample s;
            s.answer = parse_distill_answer(reply.content);
            s.think = reply.think.value_or("");
            s.sample_id = fmt::format("{}-s{:02}", q.question_id, i);
            s.question_id = q.question_id;
            s.question = q.question;
            s.qtype = q.qtype;
            s.context_chunk_ids = ctx.chunk_ids();
            s.teacher_id = reply.backend_id;
            s.distill_index = i;
            s.temperature = req.temperature;
            s.seed = *req.seed;
            slots[i] = std::move(s);
        } catch (const ParseError& e) {
            errors[i] = DistillFailure{q.question_id, i, e.what(), e.raw()};
        } catch (const gateway::ProtocolError& e) {
            errors[i] = DistillFailure{q.question_id, i, e.what(), e.raw()};
        } catch (const gateway::GatewayError& e) {
            errors[i] = DistillFailure{q.question_id, i, e.what(), ""};
        }
    });

    DistillResult out;
    for (std::size_t i = 0; i < cfg.fan_out; ++i) {
        if (slots[i]) out.samples.push_back(std::move(*slots[i]));
        if (errors[i]) out.failures.push_back(std::move(*errors[i]));
    }
    if (out.samples.size() + out.failures.size() != cfg.fan_out) {
        throw InvariantError(fmt::format("distill {}: {} samples + {} failures != fan_out {}", q.question_id,
                                         out.samples.size(), out.failures.size(), cfg.fan_out));
    }
    if (out.samples.empty()) {
        spdlog::warn("distill {}: all {} calls failed; first: {}", q.question_id, cfg.fan_out,
                     out.failures.front().reason);
    }
    return out;
}

std::string assistant_content(std::string_view think, std::string_view answer) {
    if (think.empty()) return std::string(answer);
    return fmt::format("<think>{}</think>{}", think, answer);
}

json to_sft_record(const CandidateSample& s) {
    json messages = json::array({json{{"role", "user"}, {"content", s.question}},
                                 json{{"role", "assistant"}, {"content", assistant_content(s.think, s.answer)}}});
    json meta{{"sample_id", s.sample_id},
              {"question_id", s.question_id},
              {"qtype", question_type(s.qtype).code_str()},
              {"context_chunk_ids", s.context_chunk_ids},
              {"teacher_id", s.teacher_id},
              {"distill_index", s.distill_index}};
    return json{{"messages", std::move(messages)}, {"meta", std::move(meta)}};
}

}  // namespace sftgen::generation
