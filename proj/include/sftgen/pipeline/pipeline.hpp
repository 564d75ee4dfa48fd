#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sftgen/gateway/gateway.hpp"
#include "sftgen/index/persistence.hpp"
#include "sftgen/pipeline/config.hpp"

namespace sftgen::pipeline {

struct RunManifest {
    std::string run_id;
    std::string stage;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;   // name -> sha256
    std::map<std::string, std::string> outputs;  // path relative to the run dir -> sha256
    std::map<std::string, std::int64_t> counts;
    std::map<std::string, std::string> upstream;  // stage -> config hash
    std::string created_at;

    json to_json() const;
    static RunManifest from_json(const json& j);
};

/// Deterministic id of a run: digest of the normalized config.
std::string run_id(const PipelineConfig& cfg);

/// SOURCE_DATE_EPOCH if set, else run.fixed_timestamp, else the current
/// UTC time; ISO-8601 with a Z suffix.
std::string manifest_timestamp(const PipelineConfig& cfg);

/// Which model a gateway serves; passed to backend factories.
enum class GatewayRole { teacher, judge, embedder };

using BackendFactory =
    std::function<std::shared_ptr<gateway::Backend>(const gateway::GatewayConfig&, GatewayRole, const PipelineConfig&)>;

/// Mock backends (mock_teacher_reply + mock embeddings) when run.backend is
/// "mock", HTTP backends otherwise.
std::shared_ptr<gateway::Backend> default_backend(const gateway::GatewayConfig& gc, GatewayRole role,
                                                  const PipelineConfig& cfg);

struct StageOutcome {
    std::string stage;
    bool skipped = false;  // resumed: outputs already current
    RunManifest manifest;
};

/// Runs pipeline stages against one run directory.
///
/// Every stage checks that each upstream manifest exists, was produced with
/// the current config slice for that stage, and that its output files are
/// unchanged on disk; otherwise it refuses with ValidationError. After
/// writing its outputs a stage writes manifests/<stage>.json. With resume
/// set, a stage whose manifest matches the current config, inputs and
/// outputs is skipped.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, std::filesystem::path run_dir, bool resume = false,
             BackendFactory factory = default_backend);
    ~Pipeline();

    StageOutcome run(std::string_view stage);

    /// ingest through filter, in order.
    std::vector<StageOutcome> run_generation_chain();

    /// Referential integrity over whatever artifacts exist. Writes
    /// verify.json; throws InvariantError listing every violation.
    json verify();

    const PipelineConfig& config() const { return cfg_; }
    const std::filesystem::path& run_dir() const { return dir_; }

private:
    struct StageIO;
    StageOutcome execute(std::string_view stage, const std::function<void(StageIO&)>& body);

    void stage_ingest(StageIO& io);
    void stage_index(StageIO& io);
    void stage_generate(StageIO& io);
    void stage_distill(StageIO& io);
    void stage_score(StageIO& io);
    void stage_filter(StageIO& io);
    void stage_dedup(StageIO& io);
    void stage_eval(StageIO& io);
    void stage_arena(StageIO& io);
    void stage_ablate(StageIO& io);

    gateway::Gateway& gateway_for(GatewayRole role);
    const std::vector<corpus::Chunk>& chunks();
    const index::HybridRetriever& retriever();

    PipelineConfig cfg_;
    std::filesystem::path dir_;
    bool resume_;
    bool body_inputs_ = false;  // stage bodies only declare inputs
    BackendFactory factory_;
    std::map<GatewayRole, std::unique_ptr<gateway::Gateway>> gateways_;
    std::optional<std::vector<corpus::Chunk>> chunks_;
    std::unique_ptr<index::LoadedIndexes> indexes_;
    std::unique_ptr<index::HybridRetriever> retriever_;
};

}  // namespace sftgen::pipeline
