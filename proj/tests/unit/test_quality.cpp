#include <doctest.h>

#include <atomic>
#include <set>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/rng.hpp"
#include "sftgen/quality/quality.hpp"
#include "test_support.hpp"

using namespace sftgen;
using namespace sftgen::quality;

namespace {

std::string quality_reply(double d, double s, double c, double b, std::string rationale = "fine") {
    return fmt::format("DOMAIN_SPECIFIC: {}\nSELF_CONTAINMENT: {}\nSTRUCTURED_CRITERIA: {}\nDEDUCTION_BONUS: {}\n"
                       "RATIONALE: {}",
                       d, s, c, b, rationale);
}

std::string ablation_reply(double m, double q, double a, double p) {
    return fmt::format("MULTISOURCE_INTEGRATION: {}\nQUESTION_COMPLEXITY: {}\nANSWER_INTEGRATION: {}\nPENALTY: {}\n"
                       "RATIONALE: ok",
                       m, q, a, p);
}

generation::CandidateSample sample(std::string id, int qtype = 1) {
    generation::CandidateSample s;
    s.sample_id = std::move(id);
    s.question_id = "q";
    s.question = "Q?";
    s.answer = "A";
    s.qtype = qtype;
    return s;
}

QualityReport report(std::string id, double composite) {
    QualityReport r;
    r.sample_id = std::move(id);
    r.composite = composite;
    return r;
}

index::Embedding random_unit(Rng& rng, std::size_t dim) {
    index::Embedding v(dim);
    for (auto& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
    return index::normalized(v);
}

}  // namespace

TEST_CASE("rubric dimension names match the judge layout") {
    const auto dims = Rubric{}.dimensions();
    REQUIRE(dims.size() == 4);
    CHECK(dims[0].key == "DOMAIN_SPECIFIC");
    CHECK(dims[3].key == "DEDUCTION_BONUS");
    CHECK(ablation_dimensions()[0].key == "MULTISOURCE_INTEGRATION");
}

TEST_CASE("composite scoring examples") {
    const Rubric rubric;
    const auto a = parse_quality_reply(quality_reply(4, 2, 3, 0), rubric, "s", "judge");
    CHECK(a.composite == 9.0);
    CHECK(a.rationale == "fine");
    CHECK(a.judge_id == "judge");
    const auto b = parse_quality_reply(quality_reply(4, 2, 3, -2), rubric, "s", "judge");
    CHECK(b.composite == 7.0);

    auto f = filter_samples({sample("a"), sample("b"), sample("c")},
                            {report("a", 9.0), report("b", 7.0), report("c", 6.99)}, 7.0);
    CHECK(f.kept.size() == 2);
    CHECK(f.decisions[1].kept);
    CHECK_FALSE(f.decisions[2].kept);

    CHECK(composite(4, 2, 4, 1) == 10.0);  // clamped from 11
    CHECK(composite(0, 0, 0, -2) == 0.0);  // clamped from -2
}

TEST_CASE("out-of-range or malformed judge replies are rejected") {
    const Rubric rubric;
    for (const auto& bad : {quality_reply(11, 2, 3, 0), quality_reply(4, 3, 3, 0), quality_reply(4, 2, 3, 1.5),
                            quality_reply(4, 2, 3, -3), quality_reply(4, 2, 3, 0, ""),
                            std::string("DOMAIN_SPECIFIC: 4\nRATIONALE: x"),
                            std::string("DOMAIN_SPECIFIC: four\nSELF_CONTAINMENT: 2\nSTRUCTURED_CRITERIA: 3\n"
                                        "DEDUCTION_BONUS: 0\nRATIONALE: x")}) {
        CHECK_THROWS_AS(parse_quality_reply(bad, rubric, "s", "j"), ParseError);
    }
    // Repeated key before the rationale.
    CHECK_THROWS_AS(parse_quality_reply("DOMAIN_SPECIFIC: 1\n" + quality_reply(4, 2, 3, 0), rubric, "s", "j"),
                    ParseError);
}

TEST_CASE("score_sample quarantines after one retry") {
    std::atomic<int> calls{0};
    auto gw = testing::mock_gateway([&](const gateway::ChatRequest& req) {
        ++calls;
        CHECK(req.temperature == 0.0);
        return quality_reply(11, 2, 3, 0);
    });
    const auto out = score_sample(sample("x"), Rubric{}, *gw, 10);
    CHECK_FALSE(out.report);
    REQUIRE(out.quarantine);
    CHECK(out.quarantine->id == "x");
    CHECK(out.quarantine->raw == quality_reply(11, 2, 3, 0));
    CHECK(calls == 2);

    // A bad first reply followed by a good one is accepted, using seed + 1.
    auto flaky = testing::mock_gateway([](const gateway::ChatRequest& req) {
        return *req.seed == 10 ? std::string("garbage") : quality_reply(3, 1, 2, 0);
    });
    const auto ok = score_sample(sample("y"), Rubric{}, *flaky, 10);
    REQUIRE(ok.report);
    CHECK(ok.report->composite == 6.0);
}

TEST_CASE("composite always lies in [0, 10] (fuzz)") {
    const Rubric rubric;
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        const double d = rng.uniform() * 4, s = rng.uniform() * 2, c = rng.uniform() * 4, b = rng.uniform() * 3 - 2;
        const auto r = parse_quality_reply(quality_reply(d, s, c, b), rubric, "s", "j");
        CHECK(r.composite >= 0.0);
        CHECK(r.composite <= 10.0);
        CHECK(r.composite == clamp_total(d + s + c + b));
    }
}

TEST_CASE("filter thresholds and partition") {
    Rng rng(3);
    std::vector<generation::CandidateSample> samples;
    std::vector<QualityReport> reports;
    for (int i = 0; i < 300; ++i) {
        const auto id = fmt::format("s{:03}", i);
        samples.push_back(sample(id, 1 + static_cast<int>(rng.below(9))));
        reports.push_back(report(id, std::round(rng.uniform() * 100.0) / 10.0));
    }
    CHECK(filter_samples(samples, reports, 0.0).kept.size() == samples.size());
    CHECK(filter_samples(samples, reports, 10.5).kept.empty());

    std::size_t prev = samples.size() + 1;
    for (double t : {6.0, 7.0, 8.0}) {
        const auto f = filter_samples(samples, reports, t);
        CHECK(f.kept.size() + f.rejected.size() == samples.size());
        CHECK(f.kept.size() < prev);
        prev = f.kept.size();
        std::size_t per_total = 0, per_kept = 0;
        for (const auto& [q, st] : f.per_qtype) {
            per_total += st.total;
            per_kept += st.kept;
        }
        CHECK(per_total == samples.size());
        CHECK(per_kept == f.kept.size());
        std::size_t hist = 0;
        for (auto h : f.histogram) hist += h;
        CHECK(hist == samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            CHECK(f.decisions[i].sample_id == samples[i].sample_id);
            CHECK(f.decisions[i].kept == (reports[i].composite >= t));
        }
        for (const auto& s : f.kept) {
            const auto& r = *std::find_if(reports.begin(), reports.end(),
                                          [&](const QualityReport& x) { return x.sample_id == s.sample_id; });
            CHECK(r.composite >= t);
        }
        CHECK(f.summary()["kept"] == f.kept.size());
    }
    try {
        filter_samples({sample("a"), sample("zz")}, {report("a", 8)}, 7.0);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
}

TEST_CASE("rubric config") {
    CHECK(rubric_from_json(json{{"threshold", 6.5}}).threshold == 6.5);
    CHECK(to_json(rubric_from_json(to_json(Rubric{}))) == to_json(Rubric{}));
    CHECK_THROWS_AS(rubric_from_json(json{{"bogus", 1}}), ValidationError);
    CHECK_THROWS_AS(rubric_from_json(json{{"domain_specific", {4, 0}}}), ValidationError);
}

TEST_CASE("dedup examples") {
    auto gw = testing::mock_gateway(gateway::echo_responder);
    const std::vector<QuestionText> train = {{"tr1", "How is orbit decay predicted?"},
                                             {"tr2", "What limits radar range?"}};
    const std::vector<QuestionText> test = {{"te1", "How is orbit decay predicted?"},
                                            {"te2", "Compare optical and radar survey cost."}};
    const auto r = dedup_test_against_train(test, train, 0.9, *gw);
    REQUIRE(r.removed.size() == 1);
    CHECK(r.removed[0].test_id == "te1");
    CHECK(r.removed[0].nearest_train_id == "tr1");
    CHECK(r.removed[0].similarity == doctest::Approx(1.0));
    REQUIRE(r.retained.size() == 1);
    CHECK(r.retained[0].id == "te2");

    // tau = 1 removes nothing: similarity never strictly exceeds 1.
    CHECK(dedup_test_against_train(test, train, 1.0, *gw).removed.empty());
    CHECK_THROWS_AS(dedup_test_against_train(test, train, 0.0, *gw), ValidationError);
    CHECK_THROWS_AS(dedup_test_against_train({}, train, 0.9, *gw), ValidationError);
}

TEST_CASE("dedup matches a brute-force oracle and is monotone in tau") {
    Rng rng(11);
    const std::size_t dim = 16;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<QuestionText> train, test;
        std::vector<index::Embedding> train_v, test_v;
        for (int i = 0; i < 40; ++i) {
            train.push_back({fmt::format("tr{}", i), "x"});
            train_v.push_back(random_unit(rng, dim));
        }
        for (int i = 0; i < 30; ++i) {
            test.push_back({fmt::format("te{}", i), "x"});
            // A third are perturbed copies of train items.
            if (i % 3 == 0) {
                auto v = train_v[rng.below(train_v.size())];
                for (auto& x : v) x += static_cast<float>((rng.uniform() - 0.5) * 0.3);
                test_v.push_back(index::normalized(v));
            } else {
                test_v.push_back(random_unit(rng, dim));
            }
        }
        std::size_t prev_removed = test.size() + 1;
        for (double tau : {0.5, 0.85, 0.9, 0.95, 1.0}) {
            const auto r = dedup_embedded(test, test_v, train, train_v, tau);
            CHECK(r.retained.size() + r.removed.size() == test.size());
            CHECK(r.removed.size() <= prev_removed);
            prev_removed = r.removed.size();
            std::set<std::string> removed;
            for (const auto& e : r.removed) removed.insert(e.test_id);
            for (std::size_t t = 0; t < test.size(); ++t) {
                double best = -2;
                for (const auto& v : train_v) best = std::max(best, testing::sequential_dot(test_v[t], v));
                if (std::abs(best - tau) < 1e-5) continue;  // too close to call in float
                CHECK(removed.count(test[t].id) == (best > tau ? 1u : 0u));
            }
            for (const auto& e : r.removed) CHECK(e.similarity > tau);
        }
    }
}

TEST_CASE("ablation rubric examples") {
    CHECK(parse_ablation_reply(ablation_reply(5, 3, 3, 0)).total == 10.0);
    CHECK(parse_ablation_reply(ablation_reply(3.5, 2, 2, -0.5)).total == 7.0);
    CHECK_THROWS_AS(parse_ablation_reply(ablation_reply(3, 2, 2, -3)), ParseError);
    CHECK_THROWS_AS(parse_ablation_reply(ablation_reply(6, 2, 2, 0)), ParseError);
    CHECK(parse_ablation_reply(ablation_reply(0, 0, 0, -2)).total == 0.0);

    const std::vector<corpus::Chunk> chunks = {corpus::Chunk{"c0", "d", "text zero"}, corpus::Chunk{"c1", "d", "one"}};
    const auto ctx = generation::rebuild_context("c0", {"c1"}, 0.25, 3, generation::make_lookup(chunks));
    const auto req = render_ablation_prompt("Q?", "A", ctx);
    CHECK(req.labels.at("alpha") == "0.25");
    CHECK(req.labels.at("k") == "3");

    auto gw = testing::mock_gateway([](const gateway::ChatRequest&) { return std::string("nonsense"); });
    CHECK_THROWS_AS(ablation_score("Q?", "A", ctx, *gw, 1), ParseError);
    CHECK_THROWS_AS(ablation_score("", "A", ctx, *gw, 1), ValidationError);
}
