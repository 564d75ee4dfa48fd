#pragma once

#include <functional>
#include <map>
#include <string>

#include "sftgen/gateway/gateway.hpp"

namespace sftgen::gateway {

/// Deterministic 1024-d stand-in for a text embedding model.
///
/// Each lowercased word token adds a signed unit to one hashed coordinate,
/// each adjacent token pair adds half a unit, and every coordinate gets a
/// small text-keyed perturbation; the result is unit-normalized. Texts
/// sharing vocabulary land close together, so retrieval over mock vectors
/// behaves like retrieval, and distinct texts never coincide exactly.
Embedding mock_embedding(std::string_view text);

/// Produces the raw reply for an unscripted request. Must be a pure function
/// of the request.
using Responder = std::function<std::string(const ChatRequest&)>;

/// Default responder: echoes the task label and a digest of the prompt and
/// sampling parameters.
std::string echo_responder(const ChatRequest& req);

/// Offline backend whose replies depend only on the request. Scripted
/// fingerprints (ChatRequest::fingerprint) are answered verbatim; everything
/// else goes to the responder.
class MockBackend : public Backend {
public:
    explicit MockBackend(Responder responder = echo_responder, std::map<std::string, std::string> script = {});

    std::string id() const override { return "mock"; }
    RawReply complete(const ChatRequest& req) override;
    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override;

private:
    Responder responder_;
    std::map<std::string, std::string> script_;
};

}  // namespace sftgen::gateway
