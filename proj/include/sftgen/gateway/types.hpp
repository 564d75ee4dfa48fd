#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sftgen/common/error.hpp"
#include "sftgen/common/jsonl.hpp"

namespace sftgen::gateway {

enum class Role { system, user, assistant };

const char* role_name(Role r);
Role parse_role(std::string_view s);

struct Message {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::vector<Message> messages;
    double temperature = 0.7;
    std::optional<std::int64_t> seed;
    int max_tokens = 4096;
    bool think_mode = false;
    // Caller annotations (task name, question type, ...). Not sent over the
    // wire; they go into the fingerprint and transcripts, and let the mock
    // responder pick a reply template.
    std::map<std::string, std::string> labels;

    /// Non-empty messages, first role system or user, temperature >= 0,
    /// max_tokens > 0.
    void validate() const;

    /// Hex digest of the canonical JSON of every field above.
    std::string fingerprint() const;

    const std::string* label(const std::string& key) const;
};

json to_json(const ChatRequest& r);

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct Completion {
    std::optional<std::string> think;
    std::string content;
    std::string backend_id;
    Usage usage;

    bool operator==(const Completion& o) const {
        return think == o.think && content == o.content && backend_id == o.backend_id &&
               usage.prompt_tokens == o.usage.prompt_tokens && usage.completion_tokens == o.usage.completion_tokens;
    }
};

json to_json(const Completion& c);

struct GatewayConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1";
    std::string model_name = "teacher";
    std::string embed_model = "embedder";
    std::string api_key_env = "SFTGEN_API_KEY";
    int max_parallel = 4;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds timeout{120000};
    std::size_t embed_batch = 32;
    std::string transcript_path;  // empty: no transcript

    void validate() const;
};

/// Reads the "gateway" config section; unknown keys are rejected.
GatewayConfig gateway_config_from_json(const json& j);
json to_json(const GatewayConfig& c);

/// Splits a leading "<think>...</think>" block off a raw reply. Leading
/// whitespace before the block and around the answer is dropped. Without
/// think_mode the think part is discarded. An opening tag without a closing
/// one throws ProtocolError.
Completion split_think(const std::string& raw, bool think_mode);

// Errors. All are external failures (exit code 2).

class GatewayError : public Error {
public:
    explicit GatewayError(const std::string& what) : Error(ErrorKind::external, what) {}
};

/// Retriable condition: transport failure, timeout, HTTP 429 or 5xx.
class TransientError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class RetriesExhaustedError : public GatewayError {
public:
    RetriesExhaustedError(const std::string& what, int attempts) : GatewayError(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Malformed response body.
class ProtocolError : public GatewayError {
public:
    ProtocolError(const std::string& what, std::string raw) : GatewayError(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// HTTP 4xx other than 429.
class NonRetriableError : public GatewayError {
public:
    NonRetriableError(const std::string& what, int status) : GatewayError(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

}  // namespace sftgen::gateway
