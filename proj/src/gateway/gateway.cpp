#include "sftgen/gateway/gateway.hpp"

#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/hash.hpp"
#include "sftgen/common/rng.hpp"

namespace sftgen::gateway {

std::chrono::duration<double> backoff_delay(std::chrono::milliseconds base, int retry, std::uint64_t key) {
    Rng rng(derive_seed(key, "backoff", static_cast<std::uint64_t>(retry)));
    const double jitter = 0.25 * rng.uniform();
    const double ms = static_cast<double>(base.count()) * std::ldexp(1.0, retry - 1) * (1.0 + jitter);
    return std::chrono::duration<double>(ms / 1000.0);
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg, Sleeper sleeper)
    : backend_(std::move(backend)),
      cfg_(std::move(cfg)),
      sleeper_(std::move(sleeper)),
      admission_((cfg_.validate(), cfg_.max_parallel)) {
    if (!backend_) throw ValidationError("gateway: no backend");
    if (!sleeper_) sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
    if (!cfg_.transcript_path.empty()) {
        transcript_.open(cfg_.transcript_path, std::ios::app);
        if (!transcript_) throw ValidationError("gateway: cannot open transcript " + cfg_.transcript_path);
    }
}

template <typename F>
auto Gateway::with_retries(std::uint64_t key, const std::string& what, F&& call) -> decltype(call()) {
    const int attempts = cfg_.max_retries + 1;
    std::string last;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) sleeper_(backoff_delay(cfg_.backoff_base, attempt - 1, key));
        try {
            admission_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{admission_};
            return call();
        } catch (const TransientError& e) {
            last = e.what();
            spdlog::warn("{}: attempt {}/{} failed: {}", what, attempt, attempts, last);
        }
    }
    throw RetriesExhaustedError(fmt::format("{}: gave up after {} attempts: {}", what, attempts, last), attempts);
}

Completion Gateway::chat(const ChatRequest& req) {
    req.validate();
    const auto fp = req.fingerprint();
    const auto raw = with_retries(fnv1a64(fp), "chat " + fp.substr(0, 8), [&] { return backend_->complete(req); });
    auto c = split_think(raw.text, req.think_mode);
    c.backend_id = backend_->id();
    c.usage = raw.usage;
    if (transcript_.is_open()) {
        log_transcript(json{{"kind", "chat"}, {"fingerprint", fp}, {"request", to_json(req)}, {"response", to_json(c)}});
    }
    return c;
}

std::vector<Embedding> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("embed: no texts");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw ValidationError(fmt::format("embed: text {} is empty", i));
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += cfg_.embed_batch) {
        const auto end = std::min(texts.size(), begin + cfg_.embed_batch);
        std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        std::uint64_t key = fnv1a64("embed");
        for (const auto& t : batch) key = fnv1a64(t, key);
        auto vecs = with_retries(key, "embed", [&] { return backend_->embed_batch(batch); });
        if (vecs.size() != batch.size()) {
            throw ProtocolError(fmt::format("embed: sent {} texts, got {} vectors", batch.size(), vecs.size()), "");
        }
        for (auto& v : vecs) {
            if (v.size() != index::kEmbeddingDim) {
                throw ProtocolError(fmt::format("embed: vector dimension {} != {}", v.size(), index::kEmbeddingDim),
                                    "");
            }
            try {
                out.push_back(index::normalized(v));
            } catch (const ValidationError&) {
                throw ProtocolError("embed: backend returned a zero or non-finite vector", "");
            }
        }
        if (transcript_.is_open()) {
            log_transcript(json{{"kind", "embed"}, {"texts", batch}, {"count", vecs.size()}});
        }
    }
    return out;
}

void Gateway::log_transcript(const json& record) {
    std::lock_guard lock(transcript_mu_);
    transcript_ << record.dump() << '\n';
    transcript_.flush();
}

}  // namespace sftgen::gateway
