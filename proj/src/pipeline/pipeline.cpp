#include "sftgen/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/hash.hpp"
#include "sftgen/common/parallel.hpp"
#include "sftgen/corpus/manifest.hpp"
#include "sftgen/evaluation/arena.hpp"
#include "sftgen/evaluation/metrics.hpp"
#include "sftgen/gateway/http_backend.hpp"
#include "sftgen/gateway/mock.hpp"
#include "sftgen/generation/prompts.hpp"
#include "sftgen/pipeline/mock_teacher.hpp"

namespace sftgen::pipeline {

namespace fs = std::filesystem;

// ---- Manifests ------------------------------------------------------------

json RunManifest::to_json() const {
    return json{{"run_id", run_id},   {"stage", stage},       {"config_hash", config_hash}, {"seed", seed},
                {"inputs", inputs},   {"outputs", outputs},   {"counts", counts},           {"upstream", upstream},
                {"created_at", created_at}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.counts = j.at("counts").get<std::map<std::string, std::int64_t>>();
    m.upstream = j.at("upstream").get<std::map<std::string, std::string>>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
}

std::string run_id(const PipelineConfig& cfg) { return sha256_hex(cfg.raw.dump()).substr(0, 16); }

std::string manifest_timestamp(const PipelineConfig& cfg) {
    std::time_t t;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
        char* end = nullptr;
        const auto v = std::strtoll(sde, &end, 10);
        if (*end != '\0') throw ValidationError("SOURCE_DATE_EPOCH is not an integer");
        t = static_cast<std::time_t>(v);
    } else if (!cfg.fixed_timestamp.empty()) {
        return cfg.fixed_timestamp;
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::shared_ptr<gateway::Backend> default_backend(const gateway::GatewayConfig& gc, GatewayRole,
                                                  const PipelineConfig& cfg) {
    if (cfg.backend == "mock") return std::make_shared<gateway::MockBackend>(mock_teacher_reply);
    return std::make_shared<gateway::HttpBackend>(gc);
}

// ---- Helpers --------------------------------------------------------------

namespace {

std::string rel_name(const fs::path& p, const fs::path& base) {
    const auto r = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    return r.empty() || *r.begin() == ".." ? p.filename().generic_string() : r.generic_string();
}

fs::path manifest_path(const fs::path& dir, std::string_view stage) {
    return dir / "manifests" / (std::string(stage) + ".json");
}

void require_file(const fs::path& p, std::string_view what) {
    if (p.empty()) throw ValidationError(fmt::format("config: {} is not set", what));
    if (!fs::exists(p)) throw ValidationError(fmt::format("{} not found: {}", what, p.string()));
}

template <typename T, typename F>
std::vector<json> to_rows(const std::vector<T>& items, F&& f) {
    std::vector<json> rows;
    rows.reserve(items.size());
    for (const auto& x : items) rows.push_back(f(x));
    return rows;
}

/// question_id -> row for a JSONL file keyed by question_id.
std::map<std::string, json> by_question_id(const fs::path& p) {
    std::map<std::string, json> out;
    for (auto& row : read_jsonl(p)) {
        if (!row.contains("question_id")) throw ValidationError(p.string() + ": row without question_id");
        const auto id = row["question_id"].get<std::string>();
        if (!out.emplace(id, std::move(row)).second) throw ValidationError(p.string() + ": duplicate question_id " + id);
    }
    return out;
}

std::string reference_text(const json& row) {
    for (const char* key : {"reference", "answer"}) {
        if (row.contains(key)) return row[key].get<std::string>();
    }
    throw ValidationError("reference row for " + row.value("question_id", "?") + " has no reference/answer");
}

}  // namespace

struct Pipeline::StageIO {
    std::map<std::string, fs::path> inputs;
    std::vector<std::string> outputs;  // relative to the run dir
    std::map<std::string, std::int64_t> counts;

    void output(const std::string& rel) { outputs.push_back(rel); }
};

// ---- Pipeline -------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig cfg, fs::path run_dir, bool resume, BackendFactory factory)
    : cfg_(std::move(cfg)), dir_(std::move(run_dir)), resume_(resume), factory_(std::move(factory)) {
    if (!factory_) factory_ = default_backend;
    fs::create_directories(dir_ / "manifests");
}

Pipeline::~Pipeline() = default;

gateway::Gateway& Pipeline::gateway_for(GatewayRole role) {
    auto& slot = gateways_[role];
    if (!slot) {
        const auto& gc = role == GatewayRole::teacher ? cfg_.teacher
                         : role == GatewayRole::judge ? cfg_.judge
                                                      : cfg_.embedder;
        auto gcfg = gc;
        if (!gcfg.transcript_path.empty() && fs::path(gcfg.transcript_path).is_relative()) {
            gcfg.transcript_path = (dir_ / gcfg.transcript_path).string();
        }
        slot = std::make_unique<gateway::Gateway>(factory_(gcfg, role, cfg_), gcfg);
    }
    return *slot;
}

const std::vector<corpus::Chunk>& Pipeline::chunks() {
    if (!chunks_) {
        std::vector<corpus::Chunk> out;
        for (const auto& row : read_jsonl(dir_ / "chunks.jsonl")) out.push_back(corpus::chunk_from_json(row));
        chunks_ = std::move(out);
    }
    return *chunks_;
}

const index::HybridRetriever& Pipeline::retriever() {
    if (!retriever_) {
        indexes_ = std::make_unique<index::LoadedIndexes>(index::load_indexes(dir_ / "index"));
        auto& gw = gateway_for(GatewayRole::embedder);
        retriever_ = std::make_unique<index::HybridRetriever>(
            indexes_->sparse, indexes_->dense,
            [&gw](std::string_view q) { return gw.embed({std::string(q)}).front(); });
    }
    return *retriever_;
}

StageOutcome Pipeline::run(std::string_view stage) {
    using Body = void (Pipeline::*)(StageIO&);
    static const std::map<std::string, Body, std::less<>> bodies = {
        {"ingest", &Pipeline::stage_ingest}, {"index", &Pipeline::stage_index},
        {"generate", &Pipeline::stage_generate}, {"distill", &Pipeline::stage_distill},
        {"score", &Pipeline::stage_score}, {"filter", &Pipeline::stage_filter},
        {"dedup", &Pipeline::stage_dedup}, {"eval", &Pipeline::stage_eval},
        {"arena", &Pipeline::stage_arena}, {"ablate", &Pipeline::stage_ablate},
    };
    const auto it = bodies.find(stage);
    if (it == bodies.end()) throw ValidationError(fmt::format("unknown stage '{}'", stage));
    return execute(stage, [this, body = it->second](StageIO& io) { (this->*body)(io); });
}

std::vector<StageOutcome> Pipeline::run_generation_chain() {
    std::vector<StageOutcome> out;
    for (const char* s : {"ingest", "index", "generate", "distill", "score", "filter"}) out.push_back(run(s));
    return out;
}

StageOutcome Pipeline::execute(std::string_view stage, const std::function<void(StageIO&)>& body) {
    RunManifest m;
    m.run_id = run_id(cfg_);
    m.stage = std::string(stage);
    m.config_hash = stage_config_hash(cfg_, stage);
    m.seed = cfg_.seed;

    for (const auto& up : upstream_stages(cfg_, stage)) {
        const auto mp = manifest_path(dir_, up);
        if (!fs::exists(mp)) {
            throw ValidationError(fmt::format("stage '{}' needs '{}' output; run `sftgen {}` first", stage, up, up));
        }
        const auto um = RunManifest::from_json(read_json(mp));
        const auto expected = stage_config_hash(cfg_, up);
        if (um.config_hash != expected) {
            throw ValidationError(fmt::format(
                "stage '{}' refuses stale upstream '{}': its manifest has config hash {} but the current config "
                "gives {}; rerun '{}'",
                stage, up, um.config_hash.substr(0, 12), expected.substr(0, 12), up));
        }
        for (const auto& [rel, digest] : um.outputs) {
            if (!fs::exists(dir_ / rel) || sha256_file(dir_ / rel) != digest) {
                throw ValidationError(
                    fmt::format("stage '{}': upstream '{}' output {} changed since it was written; rerun '{}'", stage,
                                up, rel, up));
            }
        }
        m.upstream[up] = um.config_hash;
    }

    StageIO io;
    // Inputs are declared by the body in a dry pass so the resume check can
    // compare them before any work happens.
    const auto own = manifest_path(dir_, stage);
    body_inputs_ = true;
    body(io);
    body_inputs_ = false;
    for (const auto& [name, path] : io.inputs) m.inputs[name] = sha256_file(path);

    if (resume_ && fs::exists(own)) {
        const auto prev = RunManifest::from_json(read_json(own));
        bool current = prev.config_hash == m.config_hash && prev.inputs == m.inputs && prev.upstream == m.upstream;
        for (const auto& [rel, digest] : prev.outputs) {
            current = current && fs::exists(dir_ / rel) && sha256_file(dir_ / rel) == digest;
        }
        if (current) {
            spdlog::info("{}: outputs are current, skipping", stage);
            return {std::string(stage), true, prev};
        }
    }

    fs::remove(own);
    spdlog::info("{}: running", stage);
    io.outputs.clear();
    io.counts.clear();
    body(io);
    for (const auto& rel : io.outputs) m.outputs[rel] = sha256_file(dir_ / rel);
    m.counts = io.counts;
    m.created_at = manifest_timestamp(cfg_);
    write_json(own, m.to_json());
    return {std::string(stage), false, m};
}

// ---- Stages ---------------------------------------------------------------

void Pipeline::stage_ingest(StageIO& io) {
    require_file(cfg_.corpus_manifest, "corpus.manifest");
    const auto manifest = corpus::load_manifest(cfg_.corpus_manifest);
    const auto mdir = cfg_.corpus_manifest.parent_path();
    if (body_inputs_) {
        io.inputs["corpus/" + cfg_.corpus_manifest.filename().generic_string()] = cfg_.corpus_manifest;
        for (const auto& d : manifest.documents) io.inputs["corpus/" + rel_name(d.path, mdir)] = d.path;
        return;
    }
    const auto result = corpus::ingest_corpus(manifest, cfg_.chunk);
    write_jsonl(dir_ / "chunks.jsonl", to_rows(result.chunks, [](const corpus::Chunk& c) { return corpus::to_json(c); }));
    write_json(dir_ / "coverage.json", result.coverage.to_json());
    write_jsonl(dir_ / "documents.jsonl", to_rows(result.documents, [&](const corpus::Document& d) {
                    return json{{"id", d.id}, {"title", d.title}, {"source", rel_name(d.source_path, mdir)},
                                {"tree_path", d.tree_path}, {"blocks", d.body.size()}};
                }));
    io.output("chunks.jsonl");
    io.output("coverage.json");
    io.output("documents.jsonl");
    std::int64_t oversized = 0;
    for (const auto& c : result.chunks) oversized += c.oversized;
    io.counts = {{"documents", static_cast<std::int64_t>(result.documents.size())},
                 {"chunks", static_cast<std::int64_t>(result.chunks.size())},
                 {"oversized_chunks", oversized},
                 {"coverage_gaps", static_cast<std::int64_t>(result.coverage.gaps.size())}};
    chunks_ = result.chunks;
}

void Pipeline::stage_index(StageIO& io) {
    if (body_inputs_) {
        io.inputs["chunks.jsonl"] = dir_ / "chunks.jsonl";
        return;
    }
    const auto& cs = chunks();
    if (cs.empty()) throw ValidationError("index: no chunks");
    auto sparse = index::SparseIndex::build(cs);
    std::vector<std::string> texts;
    for (const auto& c : cs) texts.push_back(c.text);
    auto& gw = gateway_for(GatewayRole::embedder);
    const auto vecs = gw.embed(texts);
    index::DenseIndex dense(index::kEmbeddingDim);
    for (std::size_t i = 0; i < cs.size(); ++i) dense.add(cs[i].id, vecs[i]);
    index::save_indexes(dir_ / "index", sparse, dense,
                        json{{"embedder", gw.backend().id()}, {"embed_model", cfg_.embedder.embed_model}});
    for (const char* f : {"index/postings.jsonl", "index/vectors.bin", "index/meta.json"}) io.output(f);
    io.counts = {{"chunks", static_cast<std::int64_t>(cs.size())},
                 {"vocabulary", static_cast<std::int64_t>(sparse.vocab_size())}};
    retriever_.reset();
    indexes_.reset();
}

void Pipeline::stage_generate(StageIO& io) {
    if (body_inputs_) {
        io.inputs["chunks.jsonl"] = dir_ / "chunks.jsonl";
        for (const char* f : {"index/postings.jsonl", "index/vectors.bin", "index/meta.json"}) io.inputs[f] = dir_ / f;
        return;
    }
    const auto& cs = chunks();
    const auto& gs = cfg_.generation;
    std::vector<const corpus::Chunk*> anchors;
    for (const auto& c : cs) {
        if (!gs.anchor_filter.empty() && c.tree_path.rfind(gs.anchor_filter, 0) != 0) continue;
        anchors.push_back(&c);
        if (gs.max_anchors && anchors.size() == gs.max_anchors) break;
    }
    if (anchors.empty()) throw ValidationError("generate: no anchor chunks match the filter");
    const auto& ret = retriever();
    const auto lookup = generation::make_lookup(cs);
    auto& teacher = gateway_for(GatewayRole::teacher);

    const auto n = anchors.size() * gs.questions_per_anchor;
    std::vector<std::optional<generation::QuestionDraft>> drafts(n);
    std::vector<std::optional<json>> failures(n);
    parallel_for(n, static_cast<std::size_t>(teacher.config().max_parallel), [&](std::size_t i) {
        const auto& anchor = *anchors[i / gs.questions_per_anchor];
        const auto qid = fmt::format("{}-q{}", anchor.id, i % gs.questions_per_anchor + 1);
        const int qtype = pipeline_qtype(gs.qtype_mix, cfg_.seed, i);
        try {
            const auto ctx = generation::assemble_context(anchor, ret, cfg_.retrieval, lookup);
            generation::SamplingParams p{gs.temperature, gs.max_tokens,
                                         generation::request_seed(derive_seed(cfg_.seed, "generate", i))};
            drafts[i] = generation::generate_question(generation::question_type(qtype), ctx, teacher, p, qid);
        } catch (const ParseError& e) {
            failures[i] = json{{"question_id", qid}, {"qtype", fmt::format("Q{}", qtype)}, {"reason", e.what()},
                               {"raw", e.raw()}};
        } catch (const gateway::ProtocolError& e) {
            failures[i] = json{{"question_id", qid}, {"qtype", fmt::format("Q{}", qtype)}, {"reason", e.what()},
                               {"raw", e.raw()}};
        }
    });

    std::vector<json> rows, failure_rows, prefilter_rows;
    std::map<std::string, std::int64_t> per_type;
    std::vector<generation::QuestionDraft> kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (drafts[i]) kept.push_back(std::move(*drafts[i]));
        if (failures[i]) failure_rows.push_back(std::move(*failures[i]));
    }

    if (gs.question_prefilter) {
        auto& judge = gateway_for(GatewayRole::judge);
        std::vector<quality::ScoreOutcome> outcomes(kept.size());
        parallel_for(kept.size(), static_cast<std::size_t>(judge.config().max_parallel), [&](std::size_t i) {
            generation::CandidateSample s;
            s.sample_id = kept[i].question_id;
            s.question_id = kept[i].question_id;
            s.question = kept[i].question;
            s.answer = kept[i].answer;
            s.qtype = kept[i].qtype;
            outcomes[i] = quality::score_sample(
                s, cfg_.rubric, judge, generation::request_seed(derive_seed(cfg_.seed, "prefilter/" + s.sample_id)));
        });
        std::vector<generation::QuestionDraft> passed;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const auto& o = outcomes[i];
            const bool keep = o.report && o.report->composite >= cfg_.rubric.threshold;
            json row{{"question_id", kept[i].question_id}, {"kept", keep}};
            row["composite"] = o.report ? json(o.report->composite) : json(nullptr);
            if (o.quarantine) row["reason"] = o.quarantine->reason;
            prefilter_rows.push_back(std::move(row));
            if (keep) passed.push_back(std::move(kept[i]));
        }
        kept = std::move(passed);
        write_jsonl(dir_ / "prefilter_decisions.jsonl", prefilter_rows);
        io.output("prefilter_decisions.jsonl");
    }

    for (const auto& d : kept) {
        rows.push_back(generation::to_json(d));
        ++per_type[generation::question_type(d.qtype).code_str()];
    }
    write_jsonl(dir_ / "questions.jsonl", rows);
    write_jsonl(dir_ / "generation_failures.jsonl", failure_rows);
    io.output("questions.jsonl");
    io.output("generation_failures.jsonl");
    io.counts = {{"anchors", static_cast<std::int64_t>(anchors.size())},
                 {"questions", static_cast<std::int64_t>(rows.size())},
                 {"generation_failures", static_cast<std::int64_t>(failure_rows.size())}};
    if (gs.question_prefilter) {
        io.counts["prefilter_rejected"] = static_cast<std::int64_t>(prefilter_rows.size() - rows.size());
    }
    for (const auto& [code, count] : per_type) io.counts["questions_" + code] = count;
}

void Pipeline::stage_distill(StageIO& io) {
    if (body_inputs_) {
        io.inputs["questions.jsonl"] = dir_ / "questions.jsonl";
        io.inputs["chunks.jsonl"] = dir_ / "chunks.jsonl";
        return;
    }
    const auto lookup = generation::make_lookup(chunks());
    auto& teacher = gateway_for(GatewayRole::teacher);
    std::vector<json> samples, failures;
    std::int64_t questions = 0, empty = 0;
    for (const auto& row : read_jsonl(dir_ / "questions.jsonl")) {
        const auto q = generation::draft_from_json(row);
        const auto ctx = generation::rebuild_context(q.anchor_chunk_id, q.support_chunk_ids, q.alpha, q.top_k, lookup);
        auto r = generation::distill(q, ctx, cfg_.distill, teacher, derive_seed(cfg_.seed, "distill"));
        ++questions;
        if (r.samples.empty()) ++empty;
        for (const auto& s : r.samples) samples.push_back(generation::to_json(s));
        for (const auto& f : r.failures) failures.push_back(generation::to_json(f));
    }
    write_jsonl(dir_ / "candidates.jsonl", samples);
    write_jsonl(dir_ / "distill_failures.jsonl", failures);
    io.output("candidates.jsonl");
    io.output("distill_failures.jsonl");
    io.counts = {{"questions", questions},
                 {"samples", static_cast<std::int64_t>(samples.size())},
                 {"distill_failures", static_cast<std::int64_t>(failures.size())},
                 {"questions_without_samples", empty},
                 {"fan_out", static_cast<std::int64_t>(cfg_.distill.fan_out)}};
}

void Pipeline::stage_score(StageIO& io) {
    if (body_inputs_) {
        io.inputs["candidates.jsonl"] = dir_ / "candidates.jsonl";
        return;
    }
    std::vector<generation::CandidateSample> samples;
    for (const auto& row : read_jsonl(dir_ / "candidates.jsonl")) samples.push_back(generation::sample_from_json(row));
    auto& judge = gateway_for(GatewayRole::judge);
    std::vector<quality::ScoreOutcome> outcomes(samples.size());
    parallel_for(samples.size(), static_cast<std::size_t>(judge.config().max_parallel), [&](std::size_t i) {
        outcomes[i] = quality::score_sample(samples[i], cfg_.rubric, judge,
                                            generation::request_seed(derive_seed(cfg_.seed, "score/" + samples[i].sample_id)));
    });
    std::vector<json> reports, quarantine;
    for (const auto& o : outcomes) {
        if (o.report) reports.push_back(quality::to_json(*o.report));
        if (o.quarantine) quarantine.push_back(quality::to_json(*o.quarantine));
    }
    write_jsonl(dir_ / "quality_reports.jsonl", reports);
    write_jsonl(dir_ / "quarantine.jsonl", quarantine);
    io.output("quality_reports.jsonl");
    io.output("quarantine.jsonl");
    io.counts = {{"samples", static_cast<std::int64_t>(samples.size())},
                 {"scored", static_cast<std::int64_t>(reports.size())},
                 {"quarantined", static_cast<std::int64_t>(quarantine.size())}};
}

void Pipeline::stage_filter(StageIO& io) {
    if (body_inputs_) {
        for (const char* f : {"candidates.jsonl", "quality_reports.jsonl", "quarantine.jsonl"}) io.inputs[f] = dir_ / f;
        return;
    }
    std::set<std::string> quarantined;
    for (const auto& row : read_jsonl(dir_ / "quarantine.jsonl")) quarantined.insert(row.at("id").get<std::string>());
    std::vector<generation::CandidateSample> samples;
    for (const auto& row : read_jsonl(dir_ / "candidates.jsonl")) {
        auto s = generation::sample_from_json(row);
        if (!quarantined.count(s.sample_id)) samples.push_back(std::move(s));
    }
    std::vector<quality::QualityReport> reports;
    for (const auto& row : read_jsonl(dir_ / "quality_reports.jsonl")) reports.push_back(quality::report_from_json(row));

    const auto result = quality::filter_samples(samples, reports, cfg_.rubric.threshold);
    write_jsonl(dir_ / "filter_decisions.jsonl",
                to_rows(result.decisions, [](const quality::FilterDecision& d) { return quality::to_json(d); }));
    write_jsonl(dir_ / "sft.jsonl",
                to_rows(result.kept, [](const generation::CandidateSample& s) { return generation::to_sft_record(s); }));
    auto summary = result.summary();
    summary["threshold"] = cfg_.rubric.threshold;
    summary["quarantined"] = quarantined.size();
    write_json(dir_ / "filter_summary.json", summary);
    io.output("filter_decisions.jsonl");
    io.output("sft.jsonl");
    io.output("filter_summary.json");
    io.counts = {{"samples", static_cast<std::int64_t>(samples.size())},
                 {"kept", static_cast<std::int64_t>(result.kept.size())},
                 {"rejected", static_cast<std::int64_t>(result.rejected.size())},
                 {"quarantined", static_cast<std::int64_t>(quarantined.size())}};
}

void Pipeline::stage_dedup(StageIO& io) {
    const auto train_path = cfg_.dedup_train.empty() ? dir_ / "questions.jsonl" : cfg_.dedup_train;
    if (body_inputs_) {
        require_file(cfg_.dedup_test, "dedup.test");
        require_file(train_path, "dedup.train");
        io.inputs["test:" + cfg_.dedup_test.filename().generic_string()] = cfg_.dedup_test;
        io.inputs["train:" + train_path.filename().generic_string()] = train_path;
        return;
    }
    const auto load = [](const fs::path& p) {
        std::vector<quality::QuestionText> out;
        for (const auto& row : read_jsonl(p)) {
            out.push_back({row.at("question_id").get<std::string>(), row.at("question").get<std::string>()});
        }
        return out;
    };
    const auto test_rows = by_question_id(cfg_.dedup_test);
    const auto result = quality::dedup_test_against_train(load(cfg_.dedup_test), load(train_path), cfg_.dedup_threshold,
                                                          gateway_for(GatewayRole::embedder));
    write_jsonl(dir_ / "dedup_retained.jsonl",
                to_rows(result.retained, [&](const quality::QuestionText& q) { return test_rows.at(q.id); }));
    write_jsonl(dir_ / "dedup_evidence.jsonl",
                to_rows(result.removed, [](const quality::DedupEvidence& e) { return quality::to_json(e); }));
    io.output("dedup_retained.jsonl");
    io.output("dedup_evidence.jsonl");
    io.counts = {{"test", static_cast<std::int64_t>(result.retained.size() + result.removed.size())},
                 {"retained", static_cast<std::int64_t>(result.retained.size())},
                 {"removed", static_cast<std::int64_t>(result.removed.size())}};
}

void Pipeline::stage_eval(StageIO& io) {
    if (body_inputs_) {
        require_file(cfg_.eval_predictions, "eval.predictions");
        require_file(cfg_.eval_references, "eval.references");
        io.inputs["predictions"] = cfg_.eval_predictions;
        io.inputs["references"] = cfg_.eval_references;
        return;
    }
    const auto preds = by_question_id(cfg_.eval_predictions);
    const auto refs = by_question_id(cfg_.eval_references);
    std::vector<std::string> missing;
    for (const auto& [id, _] : refs) {
        if (!preds.count(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
        throw ValidationError(fmt::format("eval: {} references have no prediction (first: {})", missing.size(), missing.front()));
    }
    std::vector<evaluation::SampleMetrics> per(refs.size());
    std::vector<const std::pair<const std::string, json>*> items;
    for (const auto& kv : refs) items.push_back(&kv);
    parallel_for(items.size(), 1, [&](std::size_t i) {
        const auto& [id, ref] = *items[i];
        per[i] = evaluation::score_pair(id, preds.at(id).at("output").get<std::string>(), reference_text(ref));
    });
    const auto report = evaluation::micro_average(std::move(per));
    write_json(dir_ / "metrics.json", report.to_json());
    write_text(dir_ / "metrics.txt", report.to_text());
    io.output("metrics.json");
    io.output("metrics.txt");
    io.counts = {{"samples", static_cast<std::int64_t>(report.per_sample.size())},
                 {"extraction_errors", static_cast<std::int64_t>(report.extraction_errors)}};
}

void Pipeline::stage_arena(StageIO& io) {
    const auto& a = cfg_.arena;
    if (body_inputs_) {
        require_file(a.predictions_x, "arena.predictions_x");
        require_file(a.predictions_y, "arena.predictions_y");
        require_file(a.references, "arena.references");
        io.inputs["predictions_x"] = a.predictions_x;
        io.inputs["predictions_y"] = a.predictions_y;
        io.inputs["references"] = a.references;
        return;
    }
    const auto px = by_question_id(a.predictions_x);
    const auto py = by_question_id(a.predictions_y);
    const auto refs = by_question_id(a.references);
    const auto answer = [](const json& row) {
        const auto raw = row.at("output").get<std::string>();
        std::string out;
        try {
            out = evaluation::extract_answer(raw);
        } catch (const evaluation::ExtractionError&) {
            out = raw;
        }
        return out.empty() ? std::string("(empty response)") : out;
    };
    std::vector<evaluation::ArenaItem> items;
    for (const auto& [id, ref] : refs) {
        if (!px.count(id) || !py.count(id)) throw ValidationError("arena: missing prediction for " + id);
        items.push_back({id, ref.at("question").get<std::string>(), answer(px.at(id)), answer(py.at(id))});
    }
    evaluation::ArenaConfig ac;
    ac.judgments_per_question = a.judgments_per_question;
    ac.bootstrap = {a.resamples, a.ci_level, derive_seed(cfg_.seed, "arena-bootstrap")};
    ac.seed = derive_seed(cfg_.seed, "arena");
    const auto result = evaluation::arena_run(items, gateway_for(GatewayRole::judge), ac);
    write_json(dir_ / "arena.json", json{{"report", result.report.to_json()},
                                         {"judgments_per_question", a.judgments_per_question},
                                         {"model_x", rel_name(a.predictions_x, cfg_.base_dir)},
                                         {"model_y", rel_name(a.predictions_y, cfg_.base_dir)}});
    write_jsonl(dir_ / "arena_judgments.jsonl",
                to_rows(result.judgments, [](const evaluation::ArenaJudgment& j) { return evaluation::to_json(j); }));
    io.output("arena.json");
    io.output("arena_judgments.jsonl");
    io.counts = {{"items", static_cast<std::int64_t>(items.size())},
                 {"comparisons", static_cast<std::int64_t>(result.report.n_comparisons)},
                 {"invalid", static_cast<std::int64_t>(result.report.invalid)}};
}

void Pipeline::stage_ablate(StageIO& io) {
    if (body_inputs_) {
        io.inputs["chunks.jsonl"] = dir_ / "chunks.jsonl";
        for (const char* f : {"index/postings.jsonl", "index/vectors.bin", "index/meta.json"}) io.inputs[f] = dir_ / f;
        return;
    }
    ablation::AblationInputs in;
    in.chunks = &chunks();
    in.retriever = &retriever();
    in.k_cand = cfg_.retrieval.k_cand;
    in.qtype_mix = cfg_.generation.qtype_mix;
    in.sampling = {cfg_.generation.temperature, cfg_.generation.max_tokens, 0};
    in.seed = derive_seed(cfg_.seed, "ablation");
    std::vector<ablation::AblationSample> samples;
    const auto result = ablation::run_ablation(cfg_.grid, in, gateway_for(GatewayRole::teacher),
                                               gateway_for(GatewayRole::judge), &samples);
    ablation::emit_heatmap(result, dir_ / "ablation");
    write_jsonl(dir_ / "ablation" / "ablation_samples.jsonl",
                to_rows(samples, [&](const ablation::AblationSample& s) { return ablation::to_json(s, result); }));
    for (const char* f : {"ablation/ablation.csv", "ablation/ablation.svg", "ablation/ablation_summary.json",
                          "ablation/ablation_samples.jsonl"}) {
        io.output(f);
    }
    std::int64_t failed = 0;
    for (const auto& s : samples) failed += !s.total;
    io.counts = {{"cells", static_cast<std::int64_t>(cfg_.grid.alphas.size() * cfg_.grid.ks.size())},
                 {"missing_cells", static_cast<std::int64_t>(result.missing().size())},
                 {"samples", static_cast<std::int64_t>(samples.size())},
                 {"failed_samples", failed}};
}

// ---- Verify ---------------------------------------------------------------

json Pipeline::verify() {
    std::vector<std::string> problems;
    json checks = json::array();
    const auto check = [&](const std::string& name, std::size_t checked, std::vector<std::string> errs) {
        checks.push_back({{"check", name}, {"checked", checked}, {"violations", errs.size()}});
        for (auto& e : errs) problems.push_back(name + ": " + e);
    };
    const auto exists = [&](const char* f) { return fs::exists(dir_ / f); };

    std::set<std::string> chunk_ids, question_ids, sample_ids;
    if (exists("chunks.jsonl")) {
        std::vector<std::string> errs;
        for (const auto& c : chunks()) {
            if (!chunk_ids.insert(c.id).second) errs.push_back("duplicate chunk id " + c.id);
        }
        check("chunk ids unique", chunk_ids.size(), std::move(errs));
    }
    if (exists("index/meta.json")) {
        std::vector<std::string> errs;
        const auto meta = read_json(dir_ / "index/meta.json");
        std::set<std::string> indexed;
        for (const auto& e : meta.at("doc_lengths")) indexed.insert(e.at(0).get<std::string>());
        if (indexed != chunk_ids) errs.push_back("indexed chunk ids differ from chunks.jsonl");
        check("index covers chunks", indexed.size(), std::move(errs));
    }
    if (exists("questions.jsonl")) {
        std::vector<std::string> errs;
        std::size_t n = 0;
        for (const auto& row : read_jsonl(dir_ / "questions.jsonl")) {
            const auto q = generation::draft_from_json(row);
            ++n;
            if (!question_ids.insert(q.question_id).second) errs.push_back("duplicate question " + q.question_id);
            if (!chunk_ids.count(q.anchor_chunk_id)) errs.push_back(q.question_id + " anchor " + q.anchor_chunk_id);
            for (const auto& s : q.support_chunk_ids) {
                if (!chunk_ids.count(s)) errs.push_back(q.question_id + " support " + s);
                if (s == q.anchor_chunk_id) errs.push_back(q.question_id + " lists its anchor as support");
            }
        }
        check("questions resolve to chunks", n, std::move(errs));
    }
    if (exists("candidates.jsonl")) {
        std::vector<std::string> errs;
        std::set<std::pair<std::string, std::size_t>> keys;
        std::map<std::string, std::size_t> per_question;
        std::size_t n = 0;
        // The run's own record wins over the current config.
        std::size_t fan_out = cfg_.distill.fan_out;
        if (exists("manifests/distill.json")) {
            const auto m = RunManifest::from_json(read_json(dir_ / "manifests/distill.json"));
            if (auto it = m.counts.find("fan_out"); it != m.counts.end()) fan_out = static_cast<std::size_t>(it->second);
        }
        for (const auto& row : read_jsonl(dir_ / "candidates.jsonl")) {
            const auto s = generation::sample_from_json(row);
            ++n;
            if (!sample_ids.insert(s.sample_id).second) errs.push_back("duplicate sample " + s.sample_id);
            if (!keys.emplace(s.question_id, s.distill_index).second) {
                errs.push_back(fmt::format("duplicate ({}, {})", s.question_id, s.distill_index));
            }
            if (!question_ids.count(s.question_id)) errs.push_back(s.sample_id + " question " + s.question_id);
            for (const auto& c : s.context_chunk_ids) {
                if (!chunk_ids.count(c)) errs.push_back(s.sample_id + " context " + c);
            }
            if (s.distill_index >= fan_out) errs.push_back(s.sample_id + " distill_index out of range");
            ++per_question[s.question_id];
        }
        if (exists("distill_failures.jsonl")) {
            for (const auto& row : read_jsonl(dir_ / "distill_failures.jsonl")) {
                ++per_question[row.at("question_id").get<std::string>()];
            }
            for (const auto& [q, count] : per_question) {
                if (count != fan_out) {
                    errs.push_back(fmt::format("{}: samples + failures = {} != fan_out {}", q, count, fan_out));
                }
            }
        }
        check("candidates resolve", n, std::move(errs));
    }
    if (exists("quality_reports.jsonl")) {
        std::vector<std::string> errs;
        std::size_t n = 0;
        for (const auto& row : read_jsonl(dir_ / "quality_reports.jsonl")) {
            const auto r = quality::report_from_json(row);
            ++n;
            if (!sample_ids.count(r.sample_id)) errs.push_back("report for unknown sample " + r.sample_id);
            if (row.at("composite").get<double>() != r.composite) errs.push_back(r.sample_id + " composite mismatch");
        }
        check("quality reports resolve", n, std::move(errs));
    }
    if (exists("sft.jsonl")) {
        std::vector<std::string> errs;
        std::size_t n = 0;
        for (const auto& row : read_jsonl(dir_ / "sft.jsonl")) {
            ++n;
            const auto id = row.at("meta").at("sample_id").get<std::string>();
            if (!sample_ids.count(id)) errs.push_back("record for unknown sample " + id);
            for (const auto& c : row.at("meta").at("context_chunk_ids")) {
                if (!chunk_ids.count(c.get<std::string>())) errs.push_back(id + " context " + c.get<std::string>());
            }
        }
        check("sft records resolve", n, std::move(errs));
    }
    {
        std::vector<std::string> errs;
        std::size_t n = 0;
        for (const auto& stage : stage_names()) {
            const auto mp = manifest_path(dir_, stage);
            if (!fs::exists(mp)) continue;
            const auto m = RunManifest::from_json(read_json(mp));
            for (const auto& [rel, digest] : m.outputs) {
                ++n;
                if (!fs::exists(dir_ / rel)) errs.push_back(stage + ": missing " + rel);
                else if (sha256_file(dir_ / rel) != digest) errs.push_back(stage + ": " + rel + " digest mismatch");
            }
        }
        check("manifest digests", n, std::move(errs));
    }

    json report{{"checks", checks}, {"violations", problems}, {"ok", problems.empty()}};
    write_json(dir_ / "verify.json", report);
    if (!problems.empty()) {
        throw InvariantError(fmt::format("verify found {} violation(s); first: {}", problems.size(), problems.front()));
    }
    return report;
}

}  // namespace sftgen::pipeline
