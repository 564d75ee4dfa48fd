#include "sftgen/pipeline/mock_teacher.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "sftgen/common/hash.hpp"
#include "sftgen/common/rng.hpp"
#include "sftgen/gateway/mock.hpp"
#include "sftgen/generation/prompts.hpp"
#include "sftgen/generation/question_types.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::pipeline {

namespace {

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string_view user_text(const gateway::ChatRequest& req) {
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
        if (it->role == gateway::Role::user) return it->content;
    }
    return {};
}

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
    const auto b = s.find(open);
    if (b == std::string_view::npos) return {};
    const auto from = b + open.size();
    const auto e = s.find(close, from);
    return trim(s.substr(from, e == std::string_view::npos ? std::string_view::npos : e - from));
}

/// Bodies of the "[Source i: id]" sections of a rendered context.
std::vector<std::string_view> sources(std::string_view prompt) {
    static constexpr std::string_view kEnds[] = {"\n\nReply in exactly", "\n\nQuestion:\n"};
    std::vector<std::string_view> out;
    std::size_t pos = prompt.find("[Source ");
    while (pos != std::string_view::npos) {
        const auto body = prompt.find('\n', pos);
        if (body == std::string_view::npos) break;
        auto next = prompt.find("\n\n[Source ", body);
        auto end = next;
        for (auto marker : kEnds) end = std::min(end, prompt.find(marker, body));
        out.push_back(trim(prompt.substr(body + 1, end == std::string_view::npos ? std::string_view::npos : end - body - 1)));
        pos = next == std::string_view::npos ? next : next + 2;
    }
    return out;
}

std::vector<std::string> sentences(std::string_view body) {
    std::vector<std::string> out;
    std::string cur;
    const auto flush = [&] {
        const auto t = trim(cur);
        if (t.size() >= 20 && t.front() != '#' && t.front() != '|') out.emplace_back(t);
        cur.clear();
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur += c;
        if ((c == '.' || c == '?' || c == '!') && (i + 1 == body.size() || body[i + 1] == ' ' || body[i + 1] == '\n')) {
            flush();
        }
    }
    flush();
    return out;
}

/// Frequent longer words across the sources, most frequent first.
std::vector<std::string> salient_terms(const std::vector<std::string_view>& srcs) {
    static const std::set<std::string, std::less<>> stop = {"about", "after", "also",  "among", "based", "being",
                                                            "between", "could", "each", "every", "first", "from",
                                                            "their", "there", "these", "those", "through", "under",
                                                            "using", "which", "while", "where", "within", "would"};
    std::map<std::string, int> freq;
    for (auto s : srcs) {
        for (auto& t : text::tokenize(s)) {
            if (t.size() < 5 || stop.count(t) || std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                continue;
            }
            ++freq[t];
        }
    }
    std::vector<std::pair<std::string, int>> v(freq.begin(), freq.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (auto& [t, _] : v) out.push_back(t);
    if (out.empty()) out = {"the system", "the subsystem", "the mission"};
    return out;
}

std::string pick_term(const std::vector<std::string>& terms, Rng& rng, std::set<std::string>& used) {
    const auto pool = std::min<std::size_t>(terms.size(), 8);
    for (int tries = 0; tries < 16; ++tries) {
        const auto& t = terms[rng.below(pool)];
        if (used.insert(t).second) return t;
    }
    return terms.front();
}

std::string reply_generate(const gateway::ChatRequest& req) {
    const auto prompt = user_text(req);
    const std::string* code = req.label("qtype");
    const auto& qt = generation::question_type(code ? generation::parse_qtype(*code) : 1);
    const auto srcs = sources(prompt);
    const auto terms = salient_terms(srcs);
    Rng rng(fnv1a64(req.fingerprint()));

    std::set<std::string> used;
    std::string question(qt.example_prefix);
    for (auto at = question.find(kEllipsis); at != std::string::npos; at = question.find(kEllipsis)) {
        question.replace(at, kEllipsis.size(), pick_term(terms, rng, used));
    }
    question += fmt::format(" when considering {} together with {}?", pick_term(terms, rng, used), pick_term(terms, rng, used));

    std::string answer;
    std::vector<std::string> cited;
    for (std::size_t i = 0; i < srcs.size() && cited.size() < 4; ++i) {
        const auto ss = sentences(srcs[i]);
        if (!ss.empty()) cited.push_back(ss[rng.below(ss.size())]);
    }
    for (const auto& s : cited) answer += (answer.empty() ? "" : " ") + s;
    if (answer.empty()) answer = fmt::format("The sources describe {} in detail.", terms.front());
    answer = fmt::format("{}: {}", qt.name, answer);

    const auto reasoning = fmt::format("The question targets {} across {} sources, centred on {}.", qt.code_str(),
                                       srcs.size(), terms.front());
    return fmt::format("<think>{r}</think>\n{q}\n{question}\n{rm}\n{r}\n{a}\n{answer}\n",
                       fmt::arg("r", reasoning), fmt::arg("q", generation::kQuestionMarker),
                       fmt::arg("question", question), fmt::arg("rm", generation::kReasoningMarker),
                       fmt::arg("a", generation::kAnswerMarker), fmt::arg("answer", answer));
}

std::string reply_distill(const gateway::ChatRequest& req) {
    const auto prompt = user_text(req);
    const auto seed = static_cast<std::uint64_t>(req.seed.value_or(0));
    Rng rng(mix64(seed) ^ fnv1a64(prompt));
    std::vector<std::string> pool;
    for (auto s : sources(prompt)) {
        for (auto& x : sentences(s)) pool.push_back(std::move(x));
    }
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    const auto take = std::min<std::size_t>(pool.size(), 2 + rng.below(3));
    std::string body;
    for (std::size_t i = 0; i < take; ++i) body += (body.empty() ? "" : " ") + pool[i];
    if (body.empty()) body = "The sources do not state this directly.";
    const auto tag = to_hex(mix64(seed)).substr(0, 6);
    const auto question = between(prompt, "Question:\n", "\n\n");
    return fmt::format(
        "<think>Approach {tag}: restate the question, collect the relevant statements from the sources and "
        "order them at temperature {t:.1f}.</think>\n{a}\nApproach {tag}. {body} This addresses: {q}\n",
        fmt::arg("tag", tag), fmt::arg("t", req.temperature), fmt::arg("a", generation::kAnswerMarker),
        fmt::arg("body", body), fmt::arg("q", question));
}

std::string reply_quality(const gateway::ChatRequest& req) {
    const auto h = mix64(fnv1a64(user_text(req)));
    const double domain = 2.5 + 0.5 * static_cast<double>(h % 4);
    const double self = 1.0 + 0.5 * static_cast<double>((h >> 8) % 3);
    const double structured = 2.0 + 0.5 * static_cast<double>((h >> 16) % 5);
    const double deduction = -1.0 + 0.5 * static_cast<double>((h >> 24) % 5);
    return fmt::format(
        "DOMAIN_SPECIFIC: {}\nSELF_CONTAINMENT: {}\nSTRUCTURED_CRITERIA: {}\nDEDUCTION_BONUS: {}\n"
        "RATIONALE: Mock review of {} tokens.\n",
        domain, self, structured, deduction, text::count_tokens(user_text(req)));
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string reply_ablation(const gateway::ChatRequest& req) {
    const std::string* a = req.label("alpha");
    const std::string* k = req.label("k");
    const double alpha = a ? std::stod(*a) : 0.5;
    const double kk = k ? std::stod(*k) : 5.0;
    const auto h = mix64(fnv1a64(user_text(req)));
    const double noise = (static_cast<double>(h % 61) - 30.0) / 100.0;
    const double total = std::clamp(7.55 - 2.4 * (alpha - 0.5) * (alpha - 0.5) - 0.035 * (kk - 5) * (kk - 5) + noise,
                                    0.0, 10.0);
    const double ms = round2(std::min(5.0, total * 0.5));
    const double qc = round2(std::min(3.0, total * 0.25));
    const double ai = round2(std::clamp(total - ms - qc, 0.0, 3.0));
    const double pen = round2(std::clamp(total - ms - qc - ai, -2.0, 0.0));
    return fmt::format(
        "MULTISOURCE_INTEGRATION: {:.2f}\nQUESTION_COMPLEXITY: {:.2f}\nANSWER_INTEGRATION: {:.2f}\nPENALTY: {:.2f}\n"
        "RATIONALE: Mock assessment at alpha {} and K {}.\n",
        ms, qc, ai, pen, alpha, kk);
}

std::string reply_arena(const gateway::ChatRequest& req) {
    const auto prompt = user_text(req);
    const auto question = between(prompt, "Question:\n", "\n\nResponse A:");
    const auto first = between(prompt, "Response A:\n", "\n\nResponse B:");
    const auto second = between(prompt, "Response B:\n", "\n\nReply in exactly");
    if (first == second) return "VERDICT: tie\nJUSTIFICATION: The responses are identical.\n";
    const auto qset = [&] {
        const auto t = text::tokenize(question);
        return std::set<std::string>(t.begin(), t.end());
    }();
    const auto score = [&](std::string_view r) {
        std::set<std::string> hit;
        for (auto& t : text::tokenize(r)) {
            if (qset.count(t)) hit.insert(t);
        }
        return hit.size() * 4 + std::min<std::size_t>(text::count_tokens(r) / 40, 8);
    };
    const auto sa = score(first), sb = score(second);
    if (sa == sb) return "VERDICT: tie\nJUSTIFICATION: Both responses cover the question equally well.\n";
    return fmt::format("VERDICT: {}\nJUSTIFICATION: It covers more of the question's key terms in usable detail.\n",
                       sa > sb ? "A" : "B");
}

}  // namespace

std::string mock_teacher_reply(const gateway::ChatRequest& req) {
    const std::string* task = req.label("task");
    if (!task) return gateway::echo_responder(req);
    if (*task == "generate") return reply_generate(req);
    if (*task == "distill") return reply_distill(req);
    if (*task == "quality") return reply_quality(req);
    if (*task == "ablation") return reply_ablation(req);
    if (*task == "arena") return reply_arena(req);
    return gateway::echo_responder(req);
}

}  // namespace sftgen::pipeline
