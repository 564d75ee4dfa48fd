#pragma once

#include <string>

#include "sftgen/gateway/types.hpp"

namespace sftgen::pipeline {

/// Offline stand-in for the teacher and judge models. Picks a reply
/// template from the request's "task" label and fills it from the prompt
/// text and a hash of the request, so every reply is a pure function of the
/// request:
///
///   generate  question built from the type's example prefix and salient
///             source terms, plus reasoning and an answer in the delimited
///             layout
///   distill   think block and answer assembled from source sentences; the
///             sentence choice and wording depend on the seed
///   quality   rubric layout with sub-scores drawn from the sample hash
///   ablation  rubric layout peaking near alpha = 0.5, K = 5 with hashed
///             per-sample noise
///   arena     verdict from content alone (never position), tie when the
///             two responses match
///
/// Other tasks fall back to gateway::echo_responder.
std::string mock_teacher_reply(const gateway::ChatRequest& req);

}  // namespace sftgen::pipeline
