#include "sftgen/gateway/mock.hpp"

#include <fmt/format.h>

#include "sftgen/common/hash.hpp"
#include "sftgen/common/rng.hpp"
#include "sftgen/text/tokenizer.hpp"

namespace sftgen::gateway {

namespace {

constexpr double kNoise = 0.05;

void add_feature(std::vector<double>& acc, std::string_view feature, double weight) {
    const auto h = mix64(fnv1a64(feature));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    acc[h % acc.size()] += sign * weight;
}

}  // namespace

Embedding mock_embedding(std::string_view text) {
    std::vector<double> acc(index::kEmbeddingDim, 0.0);
    const auto tokens = text::tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add_feature(acc, tokens[i], 1.0);
        if (i + 1 < tokens.size()) add_feature(acc, tokens[i] + '\x1f' + tokens[i + 1], 0.5);
    }
    Rng rng(fnv1a64(text));
    for (auto& x : acc) x += kNoise * (2.0 * rng.uniform() - 1.0);
    Embedding out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
    return index::normalized(out);
}

std::string echo_responder(const ChatRequest& req) {
    const std::string* task = req.label("task");
    return fmt::format("mock reply task={} prompt={} variant={}", task ? *task : "none",
                       req.fingerprint().substr(0, 12),
                       to_hex(mix64(static_cast<std::uint64_t>(req.seed.value_or(0)))).substr(0, 8));
}

MockBackend::MockBackend(Responder responder, std::map<std::string, std::string> script)
    : responder_(std::move(responder)), script_(std::move(script)) {
    if (!responder_) responder_ = echo_responder;
}

RawReply MockBackend::complete(const ChatRequest& req) {
    RawReply out;
    const auto it = script_.find(req.fingerprint());
    out.text = it != script_.end() ? it->second : responder_(req);
    for (const auto& m : req.messages) out.usage.prompt_tokens += static_cast<std::int64_t>(text::count_tokens(m.content));
    out.usage.completion_tokens = static_cast<std::int64_t>(text::count_tokens(out.text));
    return out;
}

std::vector<Embedding> MockBackend::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embedding(t));
    return out;
}

}  // namespace sftgen::gateway
