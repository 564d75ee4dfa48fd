#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/jsonl.hpp"
#include "sftgen/generation/question_types.hpp"
#include "sftgen/pipeline/pipeline.hpp"
#include "test_support.hpp"

using namespace sftgen;
using namespace sftgen::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = SFTGEN_TOY;

json toy_doc() { return read_json(kToy / "config.json"); }

PipelineConfig toy_config(json doc = toy_doc()) { return parse_config(std::move(doc), kToy); }

void run_all(Pipeline& p) {
    for (const auto& s : stage_names()) p.run(s);
}

/// Relative path -> bytes for every file under dir.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testing::read_file(e.path());
    }
    return out;
}

int run_cli(const std::string& args) {
    const auto cmd = fmt::format("'{}' {} >/dev/null 2>&1", SFTGEN_CLI, args);
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t lines(const fs::path& p) { return read_jsonl(p).size(); }

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = toy_config();
    CHECK(cfg.seed == 20240611);
    CHECK(cfg.distill.fan_out == 16);
    CHECK(cfg.retrieval.top_k == 5);
    CHECK(cfg.corpus_manifest == kToy / "corpus/manifest.json");
    CHECK(cfg.judge.model_name == "judge");

    auto doc = toy_doc();
    doc["bogus"] = 1;
    CHECK_THROWS_AS(toy_config(doc), ValidationError);
    doc = toy_doc();
    doc["distill"]["fanout"] = 3;
    CHECK_THROWS_AS(toy_config(doc), ValidationError);
    doc = toy_doc();
    doc["retrieval"]["alpha"] = 2.0;
    CHECK_THROWS_AS(toy_config(doc), ValidationError);
    CHECK_THROWS_AS(load_config(kToy / "missing.json"), ValidationError);

    const auto empty = parse_config(json::object(), kToy);
    CHECK(empty.distill.fan_out == 16);
    CHECK(empty.dedup_threshold == 0.90);
    CHECK(empty.grid.alphas.size() == 5);
}

TEST_CASE("stage hashes follow the config slices") {
    const auto base = toy_config();
    auto doc = toy_doc();
    doc["distill"]["fan_out"] = 4;
    const auto changed = toy_config(doc);
    for (const auto* s : {"ingest", "index", "generate", "eval", "arena"}) {
        CHECK(stage_config_hash(base, s) == stage_config_hash(changed, s));
    }
    for (const auto* s : {"distill", "score", "filter"}) CHECK(stage_config_hash(base, s) != stage_config_hash(changed, s));

    // Concurrency does not change outputs, so it does not enter the hash.
    doc = toy_doc();
    doc["gateway"]["teacher"]["max_parallel"] = 1;
    CHECK(stage_config_hash(base, "distill") == stage_config_hash(toy_config(doc), "distill"));

    const auto reseeded = parse_config(toy_doc(), kToy, 7);
    CHECK(reseeded.seed == 7);
    CHECK(stage_config_hash(base, "generate") != stage_config_hash(reseeded, "generate"));
    CHECK(run_id(base) != run_id(reseeded));
    CHECK(upstream_stages(base, "score") == std::vector<std::string>{"ingest", "index", "generate", "distill"});
    CHECK(upstream_stages(base, "eval").empty());
}

TEST_CASE("qtype stream of the generate stage") {
    const auto mix = generation::QtypeMix::defaults();
    std::size_t higher = 0;
    for (std::size_t i = 0; i < 2000; ++i) {
        const int q = pipeline_qtype(mix, 99, i);
        CHECK(q == pipeline_qtype(mix, 99, i));
        if (q >= 5) ++higher;
    }
    CHECK(std::abs(static_cast<double>(higher) / 2000.0 - 0.60) <= 0.03);
}

TEST_CASE("end to end on the toy corpus") {
    testing::TempDir dir;
    Pipeline p(toy_config(), dir.path());
    run_all(p);
    const auto& d = dir.path();

    const auto questions = read_jsonl(d / "questions.jsonl");
    const auto candidates = read_jsonl(d / "candidates.jsonl");
    const auto failures = read_jsonl(d / "distill_failures.jsonl");
    const auto sft = read_jsonl(d / "sft.jsonl");
    CHECK(questions.size() == lines(d / "chunks.jsonl"));
    CHECK(candidates.size() + failures.size() == 16 * questions.size());
    std::set<std::string> qtypes;
    for (const auto& r : sft) qtypes.insert(r["meta"]["qtype"].get<std::string>());
    CHECK(qtypes.size() == 9);

    const auto summary = read_json(d / "filter_summary.json");
    CHECK(summary["kept"] == sft.size());
    CHECK(summary["kept"].get<std::size_t>() + summary["rejected"].get<std::size_t>() == candidates.size());
    for (const auto& r : sft) {
        const auto content = r["messages"][1]["content"].get<std::string>();
        CHECK(content.rfind("<think>", 0) == 0);
    }

    const auto coverage = read_json(d / "coverage.json");
    CHECK(coverage["gap_count"] == 1);

    const auto metrics = read_json(d / "metrics.json");
    for (const auto& [k, v] : metrics["micro_averages_percent"].items()) CHECK(v == "100.00");

    const auto arena = read_json(d / "arena.json");
    CHECK(arena["report"]["win_rate"].get<double>() > 0.5);
    CHECK(fs::exists(d / "ablation" / "ablation.svg"));
    CHECK(lines(d / "dedup_retained.jsonl") + lines(d / "dedup_evidence.jsonl") == 12);

    const auto v = p.verify();
    CHECK(v["ok"] == true);
    for (const auto& s : stage_names()) {
        const auto m = RunManifest::from_json(read_json(d / "manifests" / (s + ".json")));
        CHECK(m.stage == s);
        CHECK(m.config_hash == stage_config_hash(p.config(), s));
        CHECK(m.created_at == "2025-01-01T00:00:00Z");
    }
}

TEST_CASE("two runs are byte-identical and resume skips current stages") {
    testing::TempDir a, b;
    {
        Pipeline p(toy_config(), a.path());
        run_all(p);
    }
    {
        Pipeline p(toy_config(), b.path());
        run_all(p);
    }
    const auto sa = snapshot(a.path()), sb = snapshot(b.path());
    REQUIRE(sa.size() == sb.size());
    for (const auto& [path, bytes] : sa) {
        INFO(path);
        REQUIRE(sb.count(path));
        CHECK(sb.at(path) == bytes);
    }

    Pipeline again(toy_config(), a.path(), true);
    for (const auto& s : stage_names()) CHECK(again.run(s).skipped);
    CHECK(snapshot(a.path()) == sa);

    // Without resume every stage reruns and rewrites the same bytes.
    Pipeline rerun(toy_config(), a.path(), false);
    CHECK_FALSE(rerun.run("filter").skipped);
    CHECK(snapshot(a.path()) == sa);
}

TEST_CASE("stage isolation: a deleted output is rebuilt identically") {
    testing::TempDir dir;
    Pipeline p(toy_config(), dir.path());
    p.run_generation_chain();
    const auto before = testing::read_file(dir / "sft.jsonl");
    fs::remove(dir / "sft.jsonl");

    Pipeline resumed(toy_config(), dir.path(), true);
    CHECK_FALSE(resumed.run("filter").skipped);
    CHECK(testing::read_file(dir / "sft.jsonl") == before);
}

TEST_CASE("stale or altered upstream artifacts are refused") {
    testing::TempDir dir;
    Pipeline p(toy_config(), dir.path());
    p.run_generation_chain();

    auto doc = toy_doc();
    doc["distill"]["fan_out"] = 4;
    Pipeline changed(toy_config(doc), dir.path());
    try {
        changed.run("score");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("stale upstream 'distill'") != std::string::npos);
    }
    // Rerunning the changed stage first makes the chain consistent again.
    changed.run("distill");
    CHECK_NOTHROW(changed.run("score"));
    CHECK(lines(dir / "candidates.jsonl") + lines(dir / "distill_failures.jsonl") == 4 * lines(dir / "questions.jsonl"));

    // Edited upstream output.
    {
        std::ofstream out(dir / "chunks.jsonl", std::ios::app);
        out << "\n";
    }
    Pipeline again(toy_config(doc), dir.path());
    CHECK_THROWS_AS(again.run("index"), ValidationError);

    testing::TempDir fresh;
    Pipeline missing(toy_config(), fresh.path());
    CHECK_THROWS_AS(missing.run("generate"), ValidationError);
}

TEST_CASE("verify reports broken references") {
    testing::TempDir dir;
    Pipeline p(toy_config(), dir.path());
    p.run_generation_chain();
    CHECK(p.verify()["ok"] == true);

    auto rows = read_jsonl(dir / "candidates.jsonl");
    rows[0]["question_id"] = "no-such-question";
    write_jsonl(dir / "candidates.jsonl", rows);
    try {
        p.verify();
        FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
        CHECK(std::string(e.what()).find("no-such-question") != std::string::npos);
    }
    CHECK(read_json(dir / "verify.json")["ok"] == false);
}

TEST_CASE("eval and arena edge cases") {
    testing::TempDir dir;
    auto doc = toy_doc();
    doc["arena"]["predictions_y"] = "eval/predictions.jsonl";
    doc["arena"]["resamples"] = 500;
    Pipeline p(toy_config(doc), dir.path());
    p.run("arena");
    const auto report = read_json(dir / "arena.json")["report"];
    CHECK(report["win_rate"] == 0.5);
    CHECK(report["ties"] == report["n_comparisons"]);

    // A reference with no prediction is an input error.
    testing::TempDir tmp;
    write_jsonl(tmp / "pred.jsonl", {json{{"question_id", "t01"}, {"output", "x"}}});
    doc = toy_doc();
    doc["eval"]["predictions"] = (tmp / "pred.jsonl").string();
    Pipeline partial(toy_config(doc), dir.path());
    CHECK_THROWS_AS(partial.run("eval"), ValidationError);
}

TEST_CASE("command-line exit codes") {
    testing::TempDir dir;
    const auto cfg = (kToy / "config.json").string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("ingest --config") == 1);
    CHECK(run_cli(fmt::format("ingest --config '{}' --out '{}'", (dir / "nope.json").string(), (dir / "r").string())) ==
          1);

    // A manifest naming a missing document fails before any output is written.
    fs::create_directories(dir / "corpus");
    auto manifest = read_json(kToy / "corpus/manifest.json");
    manifest["documents"][0]["path"] = "does/not/exist.md";
    std::ofstream(dir / "corpus/manifest.json") << manifest.dump();
    auto doc = toy_doc();
    doc["corpus"]["manifest"] = (dir / "corpus/manifest.json").string();
    std::ofstream(dir / "config.json") << doc.dump();
    CHECK(run_cli(fmt::format("ingest --config '{}' --out '{}'", (dir / "config.json").string(), (dir / "bad").string())) ==
          1);
    CHECK_FALSE(fs::exists(dir / "bad" / "chunks.jsonl"));

    CHECK(run_cli(fmt::format("run --config '{}' --out '{}' --fan-out 2", cfg, (dir / "ok").string())) == 0);
    CHECK(run_cli(fmt::format("verify --config '{}' --out '{}'", cfg, (dir / "ok").string())) == 0);
    CHECK(lines(dir / "ok" / "candidates.jsonl") + lines(dir / "ok" / "distill_failures.jsonl") ==
          2 * lines(dir / "ok" / "questions.jsonl"));
    // Stale upstream: the default fan-out no longer matches the distill manifest.
    CHECK(run_cli(fmt::format("score --config '{}' --out '{}'", cfg, (dir / "ok").string())) == 1);
}
