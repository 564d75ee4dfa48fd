#include "sftgen/gateway/types.hpp"

#include <fmt/format.h>

#include "sftgen/common/hash.hpp"

namespace sftgen::gateway {

const char* role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ValidationError(fmt::format("unknown message role '{}'", s));
}

void ChatRequest::validate() const {
    if (messages.empty()) throw ValidationError("chat request: no messages");
    if (messages.front().role == Role::assistant) {
        throw ValidationError("chat request: first message must be system or user");
    }
    if (!(temperature >= 0.0)) throw ValidationError(fmt::format("chat request: temperature {} < 0", temperature));
    if (max_tokens <= 0) throw ValidationError("chat request: max_tokens must be positive");
}

std::string ChatRequest::fingerprint() const {
    return sha256_hex(to_json(*this).dump()).substr(0, 32);
}

const std::string* ChatRequest::label(const std::string& key) const {
    auto it = labels.find(key);
    return it == labels.end() ? nullptr : &it->second;
}

json to_json(const ChatRequest& r) {
    json msgs = json::array();
    for (const auto& m : r.messages) msgs.push_back(json{{"role", role_name(m.role)}, {"content", m.content}});
    json j{{"messages", std::move(msgs)},
           {"temperature", r.temperature},
           {"max_tokens", r.max_tokens},
           {"think_mode", r.think_mode},
           {"labels", r.labels}};
    j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
    return j;
}

json to_json(const Completion& c) {
    json j{{"content", c.content},
           {"backend_id", c.backend_id},
           {"usage", {{"prompt_tokens", c.usage.prompt_tokens}, {"completion_tokens", c.usage.completion_tokens}}}};
    j["think"] = c.think ? json(*c.think) : json(nullptr);
    return j;
}

void GatewayConfig::validate() const {
    if (max_parallel < 1) throw ValidationError("gateway: max_parallel must be >= 1");
    if (max_retries < 0) throw ValidationError("gateway: max_retries must be >= 0");
    if (backoff_base.count() < 0) throw ValidationError("gateway: backoff_base_ms must be >= 0");
    if (timeout.count() <= 0) throw ValidationError("gateway: timeout_ms must be positive");
    if (embed_batch == 0) throw ValidationError("gateway: embed_batch must be positive");
}

GatewayConfig gateway_config_from_json(const json& j) {
    GatewayConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ValidationError("gateway: config section must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "endpoint") c.endpoint = v.get<std::string>();
            else if (key == "model_name") c.model_name = v.get<std::string>();
            else if (key == "embed_model") c.embed_model = v.get<std::string>();
            else if (key == "api_key_env") c.api_key_env = v.get<std::string>();
            else if (key == "max_parallel") c.max_parallel = v.get<int>();
            else if (key == "max_retries") c.max_retries = v.get<int>();
            else if (key == "backoff_base_ms") c.backoff_base = std::chrono::milliseconds(v.get<std::int64_t>());
            else if (key == "timeout_ms") c.timeout = std::chrono::milliseconds(v.get<std::int64_t>());
            else if (key == "embed_batch") c.embed_batch = v.get<std::size_t>();
            else if (key == "transcript_path") c.transcript_path = v.get<std::string>();
            else throw ValidationError("gateway: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw ValidationError(fmt::format("gateway: bad value for '{}': {}", key, e.what()));
        }
    }
    c.validate();
    return c;
}

json to_json(const GatewayConfig& c) {
    return json{{"endpoint", c.endpoint},
                {"model_name", c.model_name},
                {"embed_model", c.embed_model},
                {"api_key_env", c.api_key_env},
                {"max_parallel", c.max_parallel},
                {"max_retries", c.max_retries},
                {"backoff_base_ms", c.backoff_base.count()},
                {"timeout_ms", c.timeout.count()},
                {"embed_batch", c.embed_batch},
                {"transcript_path", c.transcript_path}};
}

namespace {

std::string_view trim_left(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\r' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    return s;
}

std::string_view trim(std::string_view s) {
    s = trim_left(s);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\r' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

Completion split_think(const std::string& raw, bool think_mode) {
    constexpr std::string_view open = "<think>";
    constexpr std::string_view close = "</think>";
    Completion c;
    const auto body = trim_left(raw);
    if (body.substr(0, open.size()) != open) {
        c.content = std::string(trim(body));
        return c;
    }
    const auto end = body.find(close);
    if (end == std::string_view::npos) throw ProtocolError("reply opens a think block but never closes it", raw);
    if (think_mode) c.think = std::string(trim(body.substr(open.size(), end - open.size())));
    c.content = std::string(trim(body.substr(end + close.size())));
    return c;
}

}  // namespace sftgen::gateway
