// sftgen: command-line front end for the dataset pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/jsonl.hpp"
#include "sftgen/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using sftgen::json;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

/// Flags that rewrite config keys before the config is parsed, so the
/// change shows up in the stage hashes like any edit to the file would.
struct Overrides {
    std::optional<std::size_t> fan_out;
    std::vector<double> temperatures;
    std::string qtype_mix;
    std::optional<std::string> anchor_filter;
    std::optional<std::size_t> max_anchors;
    std::optional<std::size_t> questions_per_anchor;
    std::optional<double> tau;
    std::vector<double> alphas;
    std::vector<std::size_t> ks;
    std::optional<std::size_t> samples_per_cell;

    void apply(json& doc) const {
        if (fan_out) doc["distill"]["fan_out"] = *fan_out;
        if (!temperatures.empty()) doc["distill"]["temperature_schedule"] = temperatures;
        if (!qtype_mix.empty()) doc["generation"]["qtype_mix"] = parse_mix(qtype_mix);
        if (anchor_filter) doc["generation"]["anchor_filter"] = *anchor_filter;
        if (max_anchors) doc["generation"]["max_anchors"] = *max_anchors;
        if (questions_per_anchor) doc["generation"]["questions_per_anchor"] = *questions_per_anchor;
        if (tau) doc["dedup"]["threshold"] = *tau;
        if (!alphas.empty()) doc["ablation"]["alphas"] = alphas;
        if (!ks.empty()) doc["ablation"]["ks"] = ks;
        if (samples_per_cell) doc["ablation"]["samples_per_cell"] = *samples_per_cell;
    }

    // "Q1=0.1,Q2=0.1,..."; omitted types get weight 0.
    static json parse_mix(const std::string& text) {
        json mix = json::object();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw sftgen::ValidationError("--qtype-mix: expected Qn=weight, got " + item);
            try {
                mix[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            } catch (const std::exception&) {
                throw sftgen::ValidationError("--qtype-mix: bad weight in " + item);
            }
        }
        return mix;
    }
};

sftgen::pipeline::Pipeline make_pipeline(const Common& c, const Overrides& o) {
    const fs::path path(c.config);
    if (!fs::exists(path)) throw sftgen::ValidationError("config file not found: " + c.config);
    auto doc = sftgen::read_json(path);
    o.apply(doc);
    auto cfg = sftgen::pipeline::parse_config(std::move(doc), fs::absolute(path).parent_path(), c.seed);
    return sftgen::pipeline::Pipeline(std::move(cfg), c.out, c.resume);
}

void report(const sftgen::pipeline::StageOutcome& o) {
    std::string counts;
    for (const auto& [k, v] : o.manifest.counts) counts += fmt::format(" {}={}", k, v);
    fmt::print("{}: {}{}\n", o.stage, o.skipped ? "up to date" : "done", counts);
}

int exit_code(sftgen::ErrorKind k) {
    switch (k) {
        case sftgen::ErrorKind::validation: return 1;
        case sftgen::ErrorKind::external: return 2;
        case sftgen::ErrorKind::invariant: return 3;
    }
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build and evaluate domain SFT datasets from a document corpus"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->capture_default_str();

    Common common;
    Overrides over;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "pipeline config (JSON)")->required();
        sub->add_option("--out", common.out, "run directory")->required();
        sub->add_option("--seed", common.seed, "override run.seed");
        sub->add_flag("--resume", common.resume, "skip stages whose outputs are current");
    };

    const std::vector<std::string> stages = {"ingest", "index", "generate", "distill", "score",
                                             "filter", "dedup", "eval",     "arena",   "ablate"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& s : stages) {
        subs[s] = app.add_subcommand(s, "run the " + s + " stage");
        add_common(subs[s]);
    }
    auto* run = app.add_subcommand("run", "ingest through filter");
    add_common(run);
    auto* verify = app.add_subcommand("verify", "check referential integrity of a run directory");
    add_common(verify);

    for (auto* sub : {subs["generate"], run}) {
        sub->add_option("--qtype-mix", over.qtype_mix, "Q1=w,...,Q9=w");
        sub->add_option("--anchor-filter", over.anchor_filter, "tree_path prefix for anchors");
        sub->add_option("--max-anchors", over.max_anchors);
        sub->add_option("--questions-per-anchor", over.questions_per_anchor);
    }
    for (auto* sub : {subs["distill"], run}) {
        sub->add_option("--fan-out", over.fan_out, "samples per question");
        sub->add_option("--temperatures", over.temperatures, "per-sample temperature cycle")->delimiter(',');
    }
    subs["dedup"]->add_option("--tau", over.tau, "cosine threshold");
    subs["ablate"]->add_option("--alphas", over.alphas)->delimiter(',');
    subs["ablate"]->add_option("--ks", over.ks)->delimiter(',');
    subs["ablate"]->add_option("--samples-per-cell", over.samples_per_cell);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    auto logger = spdlog::stderr_color_mt("sftgen");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        auto p = make_pipeline(common, over);
        if (run->parsed()) {
            for (const auto& o : p.run_generation_chain()) report(o);
        } else if (verify->parsed()) {
            const auto r = p.verify();
            fmt::print("verify: ok ({} checks)\n", r.at("checks").size());
        } else {
            for (const auto& s : stages) {
                if (subs[s]->parsed()) report(p.run(s));
            }
        }
    } catch (const sftgen::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return 3;
    }
    return 0;
}
