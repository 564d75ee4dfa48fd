#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sftgen/ablation/ablation.hpp"
#include "sftgen/common/jsonl.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/gateway/types.hpp"
#include "sftgen/generation/generator.hpp"
#include "sftgen/index/hybrid.hpp"
#include "sftgen/quality/quality.hpp"

namespace sftgen::pipeline {

struct GenerationSettings {
    std::size_t questions_per_anchor = 1;
    generation::QtypeMix qtype_mix = generation::QtypeMix::defaults();
    double temperature = 0.7;
    int max_tokens = 4096;
    std::string anchor_filter;      // tree_path prefix; empty: every chunk
    std::size_t max_anchors = 0;    // 0: no limit
    bool question_prefilter = false;
};

struct ArenaSettings {
    std::filesystem::path predictions_x;
    std::filesystem::path predictions_y;
    std::filesystem::path references;
    std::size_t judgments_per_question = 1;
    std::size_t resamples = 10000;
    double ci_level = 0.95;
};

/// The whole run configuration. See README for the file layout; every
/// section is optional and unknown keys are rejected.
struct PipelineConfig {
    json raw;                          // normalized document the hashes are taken over
    std::filesystem::path base_dir;    // relative paths resolve against this

    std::uint64_t seed = 0;
    std::string backend = "mock";      // mock | http
    std::string fixed_timestamp;

    std::filesystem::path corpus_manifest;
    corpus::ChunkPolicy chunk;
    index::RetrievalConfig retrieval;
    gateway::GatewayConfig teacher, judge, embedder;
    GenerationSettings generation;
    generation::DistillConfig distill;
    quality::Rubric rubric;
    double dedup_threshold = quality::kDefaultDedupThreshold;
    std::filesystem::path dedup_test, dedup_train;
    std::filesystem::path eval_predictions, eval_references;
    ArenaSettings arena;
    ablation::AblationGrid grid;
};

/// Parses a config document. `seed_override` replaces run.seed before the
/// document is normalized, so it is part of every hash.
PipelineConfig parse_config(json doc, const std::filesystem::path& base_dir,
                            std::optional<std::uint64_t> seed_override = std::nullopt);
PipelineConfig load_config(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"ingest", "index", "generate", "distill", "score", "filter",
                                                   "dedup",  "eval",  "arena",    "ablate"};
    return names;
}

/// SHA-256 over the config sections a stage depends on, including those of
/// its upstream stages.
std::string stage_config_hash(const PipelineConfig& cfg, std::string_view stage);

/// Upstream stages whose manifests must be current before `stage` runs.
std::vector<std::string> upstream_stages(const PipelineConfig& cfg, std::string_view stage);

/// Question-type stream of the generate stage: draw i of the run.
int pipeline_qtype(const generation::QtypeMix& mix, std::uint64_t seed, std::size_t i);

}  // namespace sftgen::pipeline
