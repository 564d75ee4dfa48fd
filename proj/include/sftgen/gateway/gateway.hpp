#pragma once

#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "sftgen/gateway/types.hpp"
#include "sftgen/index/dense_index.hpp"

namespace sftgen::gateway {

using index::Embedding;

struct RawReply {
    std::string text;  // may carry a leading <think> block
    Usage usage;
};

/// A model endpoint. Implementations throw TransientError for retriable
/// failures, NonRetriableError for client errors and ProtocolError for
/// malformed bodies. They must tolerate concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual RawReply complete(const ChatRequest& req) = 0;
    virtual std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) = 0;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

/// Delay before retry number `retry` (1-based):
///   backoff_base * 2^(retry-1) * (1 + jitter), jitter in [0, 0.25)
/// with jitter drawn deterministically from (key, retry).
std::chrono::duration<double> backoff_delay(std::chrono::milliseconds base, int retry, std::uint64_t key);

/// Retrying, admission-bounded front end over one backend. Safe for
/// concurrent use; at most max_parallel backend calls are in flight.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg, Sleeper sleeper = {});

    Completion chat(const ChatRequest& req);

    /// One unit vector of kEmbeddingDim per text, in input order. Batches of
    /// cfg.embed_batch are sent separately.
    std::vector<Embedding> embed(const std::vector<std::string>& texts);

    const GatewayConfig& config() const { return cfg_; }
    Backend& backend() { return *backend_; }

private:
    template <typename F>
    auto with_retries(std::uint64_t key, const std::string& what, F&& call) -> decltype(call());
    void log_transcript(const json& record);

    std::shared_ptr<Backend> backend_;
    GatewayConfig cfg_;
    Sleeper sleeper_;
    std::counting_semaphore<> admission_;
    std::mutex transcript_mu_;
    std::ofstream transcript_;
};

}  // namespace sftgen::gateway
