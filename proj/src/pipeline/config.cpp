#include "sftgen/pipeline/config.hpp"

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/hash.hpp"

namespace sftgen::pipeline {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& section, const char* name, std::initializer_list<std::string_view> allowed) {
    if (section.is_null()) return;
    if (!section.is_object()) throw ValidationError(fmt::format("config: section '{}' must be an object", name));
    for (const auto& [key, _] : section.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(fmt::format("config: unknown key '{}.{}'", name, key));
        }
    }
}

template <typename T>
T get_or(const json& section, const char* key, T fallback) {
    if (section.is_null() || !section.contains(key)) return fallback;
    try {
        return section.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("config: bad value for '{}': {}", key, e.what()));
    }
}

json section(const json& doc, const char* name) { return doc.contains(name) ? doc.at(name) : json(nullptr); }

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

json normalized(const PipelineConfig& c, const json& doc) {
    const auto rel = [&](const char* sec, const char* key) { return get_or<std::string>(section(doc, sec), key, ""); };
    json g = section(doc, "gateway");
    const auto gw_json = [](const gateway::GatewayConfig& x) {
        auto j = gateway::to_json(x);
        // Plumbing that does not change outputs.
        j.erase("transcript_path");
        j.erase("max_parallel");
        return j;
    };
    json schedule = json::array();
    for (double t : c.distill.temperature_schedule) schedule.push_back(t);
    return json{
        {"run", {{"seed", c.seed}, {"backend", c.backend}}},
        {"corpus",
         {{"manifest", rel("corpus", "manifest")},
          {"target_tokens", c.chunk.target_tokens},
          {"max_tokens", c.chunk.max_tokens},
          {"overlap_tokens", c.chunk.overlap_tokens}}},
        {"retrieval", {{"alpha", c.retrieval.alpha}, {"k_cand", c.retrieval.k_cand}, {"top_k", c.retrieval.top_k}}},
        {"gateway", {{"teacher", gw_json(c.teacher)}, {"judge", gw_json(c.judge)}, {"embedder", gw_json(c.embedder)}}},
        {"generation",
         {{"questions_per_anchor", c.generation.questions_per_anchor},
          {"qtype_mix", generation::to_json(c.generation.qtype_mix)},
          {"temperature", c.generation.temperature},
          {"max_tokens", c.generation.max_tokens},
          {"anchor_filter", c.generation.anchor_filter},
          {"max_anchors", c.generation.max_anchors},
          {"question_prefilter", c.generation.question_prefilter}}},
        {"distill",
         {{"fan_out", c.distill.fan_out}, {"temperature_schedule", schedule}, {"max_tokens", c.distill.max_tokens}}},
        {"quality", quality::to_json(c.rubric)},
        {"dedup", {{"threshold", c.dedup_threshold}, {"test", rel("dedup", "test")}, {"train", rel("dedup", "train")}}},
        {"eval", {{"predictions", rel("eval", "predictions")}, {"references", rel("eval", "references")}}},
        {"arena",
         {{"predictions_x", rel("arena", "predictions_x")},
          {"predictions_y", rel("arena", "predictions_y")},
          {"references", rel("arena", "references")},
          {"judgments_per_question", c.arena.judgments_per_question},
          {"resamples", c.arena.resamples},
          {"ci_level", c.arena.ci_level}}},
        {"ablation",
         {{"alphas", c.grid.alphas}, {"ks", c.grid.ks}, {"samples_per_cell", c.grid.samples_per_cell}}},
    };
}

}  // namespace

PipelineConfig parse_config(json doc, const fs::path& base_dir, std::optional<std::uint64_t> seed_override) {
    if (!doc.is_object()) throw ValidationError("config: top level must be an object");
    check_keys(doc, "<root>",
               {"run", "corpus", "retrieval", "gateway", "generation", "distill", "quality", "dedup", "eval", "arena",
                "ablation"});
    PipelineConfig c;
    c.base_dir = base_dir;

    const auto run = section(doc, "run");
    check_keys(run, "run", {"seed", "backend", "fixed_timestamp"});
    c.seed = seed_override ? *seed_override : get_or<std::uint64_t>(run, "seed", 0);
    c.backend = get_or<std::string>(run, "backend", "mock");
    if (c.backend != "mock" && c.backend != "http") throw ValidationError("config: run.backend must be mock or http");
    c.fixed_timestamp = get_or<std::string>(run, "fixed_timestamp", "");

    const auto corpus = section(doc, "corpus");
    check_keys(corpus, "corpus", {"manifest", "target_tokens", "max_tokens", "overlap_tokens"});
    c.corpus_manifest = resolve(base_dir, get_or<std::string>(corpus, "manifest", ""));
    c.chunk.target_tokens = get_or<std::size_t>(corpus, "target_tokens", c.chunk.target_tokens);
    c.chunk.max_tokens = get_or<std::size_t>(corpus, "max_tokens", c.chunk.max_tokens);
    c.chunk.overlap_tokens = get_or<std::size_t>(corpus, "overlap_tokens", c.chunk.overlap_tokens);
    c.chunk.validate();

    const auto retrieval = section(doc, "retrieval");
    check_keys(retrieval, "retrieval", {"alpha", "k_cand", "top_k"});
    c.retrieval.alpha = get_or<double>(retrieval, "alpha", c.retrieval.alpha);
    c.retrieval.k_cand = get_or<std::size_t>(retrieval, "k_cand", c.retrieval.k_cand);
    c.retrieval.top_k = get_or<std::size_t>(retrieval, "top_k", c.retrieval.top_k);
    c.retrieval.validate();

    const auto gw = section(doc, "gateway");
    check_keys(gw, "gateway", {"teacher", "judge", "embedder"});
    c.teacher = gateway::gateway_config_from_json(section(gw, "teacher"));
    c.judge = gw.contains("judge") ? gateway::gateway_config_from_json(gw["judge"]) : c.teacher;
    c.embedder = gw.contains("embedder") ? gateway::gateway_config_from_json(gw["embedder"]) : c.teacher;

    const auto gen = section(doc, "generation");
    check_keys(gen, "generation",
               {"questions_per_anchor", "qtype_mix", "temperature", "max_tokens", "anchor_filter", "max_anchors",
                "question_prefilter"});
    c.generation.questions_per_anchor = get_or<std::size_t>(gen, "questions_per_anchor", 1);
    if (c.generation.questions_per_anchor == 0) throw ValidationError("config: generation.questions_per_anchor must be >= 1");
    if (!gen.is_null() && gen.contains("qtype_mix")) c.generation.qtype_mix = generation::qtype_mix_from_json(gen["qtype_mix"]);
    c.generation.temperature = get_or<double>(gen, "temperature", c.generation.temperature);
    c.generation.max_tokens = get_or<int>(gen, "max_tokens", c.generation.max_tokens);
    c.generation.anchor_filter = get_or<std::string>(gen, "anchor_filter", "");
    c.generation.max_anchors = get_or<std::size_t>(gen, "max_anchors", 0);
    c.generation.question_prefilter = get_or<bool>(gen, "question_prefilter", false);

    const auto dist = section(doc, "distill");
    check_keys(dist, "distill", {"fan_out", "temperature_schedule", "max_tokens"});
    c.distill.fan_out = get_or<std::size_t>(dist, "fan_out", c.distill.fan_out);
    c.distill.temperature_schedule = get_or<std::vector<double>>(dist, "temperature_schedule", {});
    c.distill.max_tokens = get_or<int>(dist, "max_tokens", c.distill.max_tokens);
    c.distill.validate();

    c.rubric = quality::rubric_from_json(section(doc, "quality"));

    const auto dedup = section(doc, "dedup");
    check_keys(dedup, "dedup", {"threshold", "test", "train"});
    c.dedup_threshold = get_or<double>(dedup, "threshold", c.dedup_threshold);
    if (!(c.dedup_threshold > 0.0 && c.dedup_threshold <= 1.0)) throw ValidationError("config: dedup.threshold must be in (0, 1]");
    c.dedup_test = resolve(base_dir, get_or<std::string>(dedup, "test", ""));
    c.dedup_train = resolve(base_dir, get_or<std::string>(dedup, "train", ""));

    const auto eval = section(doc, "eval");
    check_keys(eval, "eval", {"predictions", "references"});
    c.eval_predictions = resolve(base_dir, get_or<std::string>(eval, "predictions", ""));
    c.eval_references = resolve(base_dir, get_or<std::string>(eval, "references", ""));

    const auto arena = section(doc, "arena");
    check_keys(arena, "arena",
               {"predictions_x", "predictions_y", "references", "judgments_per_question", "resamples", "ci_level"});
    c.arena.predictions_x = resolve(base_dir, get_or<std::string>(arena, "predictions_x", ""));
    c.arena.predictions_y = resolve(base_dir, get_or<std::string>(arena, "predictions_y", ""));
    c.arena.references = resolve(base_dir, get_or<std::string>(arena, "references", ""));
    c.arena.judgments_per_question = get_or<std::size_t>(arena, "judgments_per_question", 1);
    c.arena.resamples = get_or<std::size_t>(arena, "resamples", 10000);
    c.arena.ci_level = get_or<double>(arena, "ci_level", 0.95);

    const auto abl = section(doc, "ablation");
    check_keys(abl, "ablation", {"alphas", "ks", "samples_per_cell"});
    c.grid.alphas = get_or<std::vector<double>>(abl, "alphas", c.grid.alphas);
    c.grid.ks = get_or<std::vector<std::size_t>>(abl, "ks", c.grid.ks);
    c.grid.samples_per_cell = get_or<std::size_t>(abl, "samples_per_cell", c.grid.samples_per_cell);
    c.grid.validate();

    c.raw = normalized(c, doc);
    return c;
}

PipelineConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
    return parse_config(read_json(path), fs::absolute(path).parent_path(), seed_override);
}

std::vector<std::string> upstream_stages(const PipelineConfig& cfg, std::string_view stage) {
    if (stage == "index") return {"ingest"};
    if (stage == "generate") return {"ingest", "index"};
    if (stage == "distill") return {"ingest", "index", "generate"};
    if (stage == "score") return {"ingest", "index", "generate", "distill"};
    if (stage == "filter") return {"ingest", "index", "generate", "distill", "score"};
    if (stage == "ablate") return {"ingest", "index"};
    if (stage == "dedup" && cfg.dedup_train.empty()) return {"ingest", "index", "generate"};
    return {};
}

std::string stage_config_hash(const PipelineConfig& cfg, std::string_view stage) {
    const auto& r = cfg.raw;
    const auto& g = r.at("gateway");
    json slice = json::object();
    const auto add = [&](const char* key, const json& v) { slice[key] = v; };
    const auto ingest = [&] { add("corpus", r.at("corpus")); };
    const auto index = [&] {
        ingest();
        add("backend", r.at("run").at("backend"));
        add("embedder", g.at("embedder"));
    };
    const auto generate = [&] {
        index();
        add("seed", r.at("run").at("seed"));
        add("retrieval", r.at("retrieval"));
        add("generation", r.at("generation"));
        add("teacher", g.at("teacher"));
        if (cfg.generation.question_prefilter) {
            add("quality", r.at("quality"));
            add("judge", g.at("judge"));
        }
    };
    const auto distill = [&] {
        generate();
        add("distill", r.at("distill"));
    };
    const auto score = [&] {
        distill();
        add("quality", r.at("quality"));
        add("judge", g.at("judge"));
    };

    if (stage == "ingest") ingest();
    else if (stage == "index") index();
    else if (stage == "generate") generate();
    else if (stage == "distill") distill();
    else if (stage == "score" || stage == "filter") score();
    else if (stage == "dedup") {
        if (cfg.dedup_train.empty()) generate();
        add("backend", r.at("run").at("backend"));
        add("embedder", g.at("embedder"));
        add("dedup", r.at("dedup"));
    } else if (stage == "eval") {
        add("eval", r.at("eval"));
    } else if (stage == "arena") {
        add("seed", r.at("run").at("seed"));
        add("backend", r.at("run").at("backend"));
        add("judge", g.at("judge"));
        add("arena", r.at("arena"));
    } else if (stage == "ablate") {
        index();
        add("seed", r.at("run").at("seed"));
        add("k_cand", r.at("retrieval").at("k_cand"));
        add("generation", r.at("generation"));
        add("teacher", g.at("teacher"));
        add("judge", g.at("judge"));
        add("ablation", r.at("ablation"));
    } else {
        throw ValidationError(fmt::format("unknown stage '{}'", stage));
    }
    slice["stage"] = std::string(stage);
    return sha256_hex(slice.dump());
}

int pipeline_qtype(const generation::QtypeMix& mix, std::uint64_t seed, std::size_t i) {
    return generation::sample_qtype(mix, derive_seed(seed, "qtype", i));
}

}  // namespace sftgen::pipeline
