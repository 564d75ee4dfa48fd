#include "sftgen/evaluation/arena.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/hash.hpp"
#include "sftgen/common/parallel.hpp"
#include "sftgen/common/rng.hpp"

namespace sftgen::evaluation {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// CDF of Binomial(n, p) for k = 0..n.
std::vector<double> binomial_cdf(std::size_t n, double p) {
    std::vector<double> cdf(n + 1, 1.0);
    if (p <= 0.0 || p >= 1.0) {
        // Point mass at 0 or n.
        if (p <= 0.0) return cdf;
        std::fill(cdf.begin(), cdf.end() - 1, 0.0);
        return cdf;
    }
    const double lp = std::log(p), lq = std::log1p(-p);
    const double ln_fact_n = std::lgamma(static_cast<double>(n) + 1.0);
    double acc = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double lpmf = ln_fact_n - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) +
                            kd * lp + static_cast<double>(n - k) * lq;
        acc += std::exp(lpmf);
        cdf[k] = std::min(acc, 1.0);
    }
    cdf[n] = 1.0;
    return cdf;
}

std::size_t invert(const std::vector<double>& cdf, double u) {
    return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

double percentile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view to_string(Order o) { return o == Order::AB ? "AB" : "BA"; }

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::A: return "A";
        case Verdict::B: return "B";
        case Verdict::tie: return "tie";
    }
    return "tie";
}

json to_json(const ArenaJudgment& j) {
    return json{{"question_id", j.question_id},         {"trial", j.trial},
                {"presented_order", to_string(j.presented_order)}, {"verdict", to_string(j.verdict)},
                {"justification", j.justification},     {"judge_id", j.judge_id}};
}

Order presentation_order(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "arena-order"));
    return (rng.next() >> 63) ? Order::BA : Order::AB;
}

gateway::ChatRequest render_arena_prompt(std::string_view question, std::string_view first,
                                         std::string_view second) {
    auto user = fmt::format(
        "Compare two responses to the question below. Prefer the one that is more professional, more complete "
        "and more usable in practice. Position must not influence your choice.\n"
        "\n"
        "Question:\n{}\n"
        "\n"
        "Response A:\n{}\n"
        "\n"
        "Response B:\n{}\n"
        "\n"
        "Reply in exactly this layout:\n"
        "VERDICT: <A|B|tie>\n"
        "JUSTIFICATION: <reasoning>\n",
        question, first, second);
    gateway::ChatRequest req;
    req.messages = {{gateway::Role::system, "You are an impartial domain expert judge."},
                    {gateway::Role::user, std::move(user)}};
    req.temperature = 0.0;
    req.max_tokens = 1024;
    req.labels = {{"task", "arena"}};
    return req;
}

PositionalVerdict parse_arena_reply(std::string_view content) {
    constexpr std::string_view kVerdict = "VERDICT:";
    constexpr std::string_view kJust = "JUSTIFICATION:";
    const auto raw = [&] { return std::string(content); };
    const auto v = content.find(kVerdict);
    const auto j = content.find(kJust);
    if (v == std::string_view::npos) throw ParseError("arena reply has no VERDICT line", raw());
    if (j == std::string_view::npos) throw ParseError("arena reply has no JUSTIFICATION", raw());
    auto vline = content.substr(v + kVerdict.size());
    vline = vline.substr(0, std::min(vline.find('\n'), j > v ? j - v - kVerdict.size() : vline.size()));
    const auto value = lower(trim(vline));
    PositionalVerdict out;
    if (value == "a") out.verdict = Verdict::A;
    else if (value == "b") out.verdict = Verdict::B;
    else if (value == "tie") out.verdict = Verdict::tie;
    else throw ParseError("arena verdict '" + value + "' is not A, B or tie", raw());
    out.justification = std::string(trim(content.substr(j + kJust.size())));
    if (out.justification.empty()) throw ParseError("arena reply has an empty justification", raw());
    return out;
}

Verdict derandomize(Verdict positional, Order order) {
    if (positional == Verdict::tie || order == Order::AB) return positional;
    return positional == Verdict::A ? Verdict::B : Verdict::A;
}

std::optional<ArenaJudgment> arena_judge(std::string_view question_id, std::string_view question,
                                         std::string_view answer_x, std::string_view answer_y, gateway::Gateway& gw,
                                         std::uint64_t seed, std::size_t trial) {
    if (answer_x.empty() || answer_y.empty()) throw ValidationError("arena: empty answer");
    const auto order = presentation_order(seed);
    auto req = order == Order::AB ? render_arena_prompt(question, answer_x, answer_y)
                                  : render_arena_prompt(question, answer_y, answer_x);
    req.labels["question_id"] = std::string(question_id);
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.seed = static_cast<std::int64_t>((seed >> 1) + static_cast<std::uint64_t>(attempt)) & INT64_MAX;
        const auto reply = gw.chat(req);
        try {
            const auto pv = parse_arena_reply(reply.content);
            return ArenaJudgment{std::string(question_id), trial, order, derandomize(pv.verdict, order),
                                 pv.justification, reply.backend_id};
        } catch (const ParseError& e) {
            spdlog::warn("arena {}: {}", question_id, e.what());
        }
    }
    return std::nullopt;
}

json WinRateReport::to_json() const {
    return json{{"n_comparisons", n_comparisons},
                {"wins", wins},
                {"losses", losses},
                {"ties", ties},
                {"invalid", invalid},
                {"win_rate", win_rate},
                {"ci_lower", ci_lower},
                {"ci_upper", ci_upper},
                {"ci_level", ci_level},
                {"ci_method", ci_method},
                {"tie_weight", 0.5}};
}

WinRateReport win_rate_report(std::size_t wins, std::size_t losses, std::size_t ties, const BootstrapConfig& cfg) {
    const std::size_t n = wins + losses + ties;
    if (n == 0) throw ValidationError("win rate: no comparisons");
    if (cfg.resamples == 0) throw ValidationError("win rate: resamples must be positive");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ValidationError("win rate: level must be in (0, 1)");

    WinRateReport r;
    r.n_comparisons = n;
    r.wins = wins;
    r.losses = losses;
    r.ties = ties;
    const double nd = static_cast<double>(n);
    r.win_rate = (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / nd;
    r.ci_level = cfg.level;
    r.ci_method = fmt::format("percentile bootstrap, {} resamples, seed {}", cfg.resamples, cfg.seed);

    const double pw = static_cast<double>(wins) / nd;
    const double rest = static_cast<double>(n - wins);
    const double pt_given = rest > 0 ? static_cast<double>(ties) / rest : 0.0;
    const auto wins_cdf = binomial_cdf(n, pw);
    std::map<std::size_t, std::vector<double>> ties_cdf;

    Rng rng(derive_seed(cfg.seed, "bootstrap"));
    std::vector<double> means(cfg.resamples);
    for (auto& m : means) {
        const auto w = invert(wins_cdf, rng.uniform());
        auto it = ties_cdf.find(n - w);
        if (it == ties_cdf.end()) it = ties_cdf.emplace(n - w, binomial_cdf(n - w, pt_given)).first;
        const auto t = invert(it->second, rng.uniform());
        m = (static_cast<double>(w) + 0.5 * static_cast<double>(t)) / nd;
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - cfg.level) / 2.0;
    // Guards the reporting invariant lower <= rate <= upper against the
    // rare skewed resample set; never moves the bounds otherwise.
    r.ci_lower = std::min(percentile(means, tail), r.win_rate);
    r.ci_upper = std::max(percentile(means, 1.0 - tail), r.win_rate);
    return r;
}

ArenaResult arena_run(const std::vector<ArenaItem>& items, gateway::Gateway& gw, const ArenaConfig& cfg) {
    if (items.empty()) throw ValidationError("arena: no items");
    if (cfg.judgments_per_question == 0) throw ValidationError("arena: judgments_per_question must be >= 1");
    const auto m = cfg.judgments_per_question;
    std::vector<std::optional<ArenaJudgment>> slots(items.size() * m);
    parallel_for(slots.size(), static_cast<std::size_t>(gw.config().max_parallel), [&](std::size_t i) {
        const auto& item = items[i / m];
        const auto trial = i % m;
        slots[i] = arena_judge(item.question_id, item.question, item.answer_x, item.answer_y, gw,
                               derive_seed(cfg.seed, item.question_id, trial), trial);
    });

    ArenaResult out;
    std::size_t wins = 0, losses = 0, ties = 0, invalid = 0;
    for (auto& s : slots) {
        if (!s) {
            ++invalid;
            continue;
        }
        if (s->verdict == Verdict::A) ++wins;
        else if (s->verdict == Verdict::B) ++losses;
        else ++ties;
        out.judgments.push_back(std::move(*s));
    }
    if (out.judgments.empty()) throw gateway::GatewayError("arena: every comparison was invalid");
    out.report = win_rate_report(wins, losses, ties, cfg.bootstrap);
    out.report.invalid = invalid;
    return out;
}

}  // namespace sftgen::evaluation
