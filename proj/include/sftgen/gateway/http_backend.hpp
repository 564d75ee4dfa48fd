#pragma once

#include "sftgen/gateway/gateway.hpp"

namespace sftgen::gateway {

/// Chat-completions style HTTP backend.
///
///   POST {endpoint}/chat/completions  {"model", "messages", "temperature",
///                                      "max_tokens", "seed"?, "enable_thinking"}
///   POST {endpoint}/embeddings        {"model", "input": [...], "dimensions": 1024}
///
/// A separate `reasoning_content` field in the reply is folded back into a
/// leading think block so every backend yields the same raw layout. The API
/// key is read from the environment variable named in the config; when unset
/// no Authorization header is sent.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(GatewayConfig cfg);

    std::string id() const override;
    RawReply complete(const ChatRequest& req) override;
    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override;

private:
    json post(const std::string& path, const json& body);

    GatewayConfig cfg_;
    std::string origin_;  // scheme://host[:port]
    std::string base_path_;
    std::string api_key_;
};

}  // namespace sftgen::gateway
