#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/gateway/gateway.hpp"
#include "sftgen/generation/generator.hpp"
#include "sftgen/index/hybrid.hpp"

namespace sftgen::ablation {

struct AblationGrid {
    std::vector<double> alphas{0.00, 0.25, 0.50, 0.75, 1.00};
    std::vector<std::size_t> ks{1, 3, 5, 7, 9};
    std::size_t samples_per_cell = 40;

    /// Non-empty, strictly increasing lists; alphas in [0, 1]; ks >= 1;
    /// samples_per_cell >= 1.
    void validate() const;
};

struct Cell {
    double sum = 0;
    std::size_t count = 0;
    std::optional<double> mean;  // empty: missing cell
};

struct Marginal {
    double value;                // alpha or k
    std::optional<double> mean;  // mean of present cell means
    bool incomplete = false;     // some cells along this line are missing
};

struct ArgMax {
    std::size_t alpha_index;
    std::size_t k_index;
    double mean;
};

struct AblationResult {
    std::vector<double> alphas;
    std::vector<std::size_t> ks;
    std::vector<std::vector<Cell>> cells;  // [alpha][k]
    std::vector<Marginal> marginal_alpha;
    std::vector<Marginal> marginal_k;
    std::optional<ArgMax> argmax;
    std::optional<double> grand_mean;  // over every scored sample

    const Cell& cell(std::size_t ai, std::size_t ki) const { return cells.at(ai).at(ki); }
    std::vector<std::pair<double, std::size_t>> missing() const;
    json summary() const;
};

/// Builds the result from raw per-cell scores ([alpha][k] -> totals).
AblationResult aggregate(const AblationGrid& grid, const std::vector<std::vector<std::vector<double>>>& scores);

/// Builds the result from known cell means (e.g. published values); cells
/// absent from `means` are missing. Each present cell counts as one sample.
AblationResult from_cell_means(const AblationGrid& grid,
                               const std::vector<std::tuple<double, std::size_t, double>>& means);

/// Fills marginals, argmax and grand mean from `cells`. Argmax ties go to
/// the smaller k, then the smaller alpha.
void finalize(AblationResult& r);

struct AblationInputs {
    const std::vector<corpus::Chunk>* chunks = nullptr;
    const index::HybridRetriever* retriever = nullptr;
    std::size_t k_cand = 50;
    generation::QtypeMix qtype_mix = generation::QtypeMix::defaults();
    generation::SamplingParams sampling;
    std::uint64_t seed = 0;
};

/// Scored sample of one cell, kept for the run record.
struct AblationSample {
    std::size_t alpha_index = 0;
    std::size_t k_index = 0;
    std::size_t sample = 0;
    std::string anchor_chunk_id;
    int qtype = 1;
    std::optional<double> total;  // empty: generation or judging failed
    std::string error;
};

json to_json(const AblationSample& s, const AblationResult& r);

/// For every cell, samples_per_cell QA pairs are generated and judged.
/// Sample s uses the same anchor chunk and question type in every cell, so
/// cells differ only in (alpha, K). A failed sample is recorded and left
/// out of its cell; a cell with no scored sample is missing.
AblationResult run_ablation(const AblationGrid& grid, const AblationInputs& in, gateway::Gateway& teacher,
                            gateway::Gateway& judge, std::vector<AblationSample>* samples = nullptr);

/// ablation.csv (alpha,k,mean,count), ablation.svg and
/// ablation_summary.json. Byte-deterministic for a given result.
void emit_heatmap(const AblationResult& r, const std::filesystem::path& out_dir);

std::string render_csv(const AblationResult& r);
std::string render_svg(const AblationResult& r);

}  // namespace sftgen::ablation
