#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sftgen/gateway/http_backend.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

namespace sftgen::gateway {

HttpBackend::HttpBackend(GatewayConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("gateway: endpoint needs a scheme: " + cfg_.endpoint);
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    origin_ = cfg_.endpoint.substr(0, path_start);
    base_path_ = path_start == std::string::npos ? "" : cfg_.endpoint.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }
}

std::string HttpBackend::id() const { return "http:" + cfg_.model_name; }

json HttpBackend::post(const std::string& path, const json& body) {
    httplib::Client client(origin_);
    const auto secs = cfg_.timeout.count() / 1000;
    const auto usecs = (cfg_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const auto url = base_path_ + path;
    auto res = client.Post(url, headers, body.dump(), "application/json");
    if (!res) throw TransientError(fmt::format("POST {}: {}", url, httplib::to_string(res.error())));
    if (res->status == 429 || res->status >= 500) {
        throw TransientError(fmt::format("POST {}: HTTP {}", url, res->status));
    }
    if (res->status >= 400) {
        throw NonRetriableError(fmt::format("POST {}: HTTP {}: {}", url, res->status, res->body.substr(0, 200)),
                                res->status);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProtocolError(fmt::format("POST {}: response is not JSON: {}", url, e.what()), res->body);
    }
}

RawReply HttpBackend::complete(const ChatRequest& req) {
    json msgs = json::array();
    for (const auto& m : req.messages) msgs.push_back(json{{"role", role_name(m.role)}, {"content", m.content}});
    json body{{"model", cfg_.model_name},
              {"messages", std::move(msgs)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens},
              {"enable_thinking", req.think_mode}};
    if (req.seed) body["seed"] = *req.seed;

    const auto reply = post("/chat/completions", body);
    try {
        const auto& msg = reply.at("choices").at(0).at("message");
        RawReply out;
        out.text = msg.at("content").is_null() ? "" : msg.at("content").get<std::string>();
        if (msg.contains("reasoning_content") && msg["reasoning_content"].is_string()) {
            out.text = "<think>" + msg["reasoning_content"].get<std::string>() + "</think>" + out.text;
        }
        if (reply.contains("usage")) {
            out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", std::int64_t{0});
            out.usage.completion_tokens = reply["usage"].value("completion_tokens", std::int64_t{0});
        }
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(fmt::format("chat reply has unexpected shape: {}", e.what()), reply.dump());
    }
}

std::vector<Embedding> HttpBackend::embed_batch(const std::vector<std::string>& texts) {
    const json body{{"model", cfg_.embed_model}, {"input", texts}, {"dimensions", index::kEmbeddingDim}};
    const auto reply = post("/embeddings", body);
    try {
        const auto& data = reply.at("data");
        std::vector<Embedding> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto idx = data[i].value("index", i);
            if (idx >= texts.size() || seen[idx]) throw ProtocolError("embedding reply has a bad index", reply.dump());
            seen[idx] = true;
            out[idx] = data[i].at("embedding").get<Embedding>();
        }
        if (data.size() != texts.size()) {
            throw ProtocolError(fmt::format("sent {} texts, got {} embeddings", texts.size(), data.size()),
                                reply.dump());
        }
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(fmt::format("embedding reply has unexpected shape: {}", e.what()), reply.dump());
    }
}

}  // namespace sftgen::gateway
