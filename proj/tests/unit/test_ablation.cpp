#include <doctest.h>

#include <fmt/format.h>

#include "sftgen/ablation/ablation.hpp"
#include "sftgen/common/error.hpp"
#include "sftgen/pipeline/mock_teacher.hpp"
#include "test_support.hpp"

using namespace sftgen;
using namespace sftgen::ablation;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

double closed_form(double alpha, std::size_t k) { return alpha + static_cast<double>(k) / 10.0; }

/// Judge whose multisource score is alpha + K/10 for every sample.
std::string closed_form_judge(const gateway::ChatRequest& req) {
    const double v = closed_form(std::stod(req.labels.at("alpha")), std::stoul(req.labels.at("k")));
    return fmt::format("MULTISOURCE_INTEGRATION: {}\nQUESTION_COMPLEXITY: 0\nANSWER_INTEGRATION: 0\nPENALTY: 0\n"
                       "RATIONALE: scripted",
                       v);
}

}  // namespace

TEST_CASE("grid validation") {
    AblationGrid g;
    CHECK_NOTHROW(g.validate());
    g.alphas = {0.5, 0.25};
    CHECK_THROWS_AS(g.validate(), ValidationError);
    g = {};
    g.alphas = {1.5};
    CHECK_THROWS_AS(g.validate(), ValidationError);
    g = {};
    g.ks = {0, 3};
    CHECK_THROWS_AS(g.validate(), ValidationError);
    g = {};
    g.samples_per_cell = 0;
    CHECK_THROWS_AS(g.validate(), ValidationError);
}

TEST_CASE("published cells give the published maximum") {
    const AblationGrid grid;
    const auto r = from_cell_means(grid, {{0.50, 5, 7.55}, {1.00, 5, 6.84}});
    REQUIRE(r.argmax);
    CHECK(r.alphas[r.argmax->alpha_index] == 0.50);
    CHECK(r.ks[r.argmax->k_index] == 5);
    CHECK(r.argmax->mean == 7.55);
    CHECK(r.missing().size() == 23);
    CHECK(r.marginal_k[2].mean == doctest::Approx((7.55 + 6.84) / 2));
    CHECK(r.marginal_k[2].incomplete);
    CHECK_FALSE(r.marginal_k[0].mean);

    const auto csv = render_csv(r);
    CHECK(count_lines(csv) == 26);
    CHECK(csv.find("alpha,k,mean,count\n") == 0);
    CHECK(csv.find("\n0.50,5,7.55,1\n") != std::string::npos);
    CHECK(csv.find("\n1.00,5,6.84,1\n") != std::string::npos);
    CHECK(csv.find("\n0.00,1,,0\n") != std::string::npos);

    const auto svg = render_svg(r);
    CHECK(svg.find("<g class=\"cell max\" data-alpha=\"0.50\" data-k=\"5\">") != std::string::npos);
    CHECK(svg.find("<title>maximum 7.55</title>") != std::string::npos);
    const auto max_marks = [&] {
        std::size_t n = 0;
        for (auto p = svg.find("cell max"); p != std::string::npos; p = svg.find("cell max", p + 1)) ++n;
        return n;
    }();
    CHECK(max_marks == 1);

    const auto summary = r.summary();
    CHECK(summary["argmax"]["alpha"] == 0.5);
    CHECK(summary["argmax"]["k"] == 5);
    CHECK(summary["argmax"]["mean"] == 7.55);
    CHECK(summary["missing_cells"].size() == 23);
}

TEST_CASE("argmax ties prefer smaller k, then smaller alpha") {
    const AblationGrid grid;
    auto r = from_cell_means(grid, {{0.75, 3, 7.0}, {0.25, 7, 7.0}, {0.00, 3, 7.0}});
    CHECK(r.alphas[r.argmax->alpha_index] == 0.0);
    CHECK(r.ks[r.argmax->k_index] == 3);
}

TEST_CASE("aggregate means, marginals and grand mean") {
    AblationGrid grid;
    grid.alphas = {0.0, 1.0};
    grid.ks = {1, 2};
    const auto r = aggregate(grid, {{{1, 2, 3}, {4}}, {{}, {6, 8}}});
    CHECK(r.cell(0, 0).mean == 2.0);
    CHECK(r.cell(0, 0).count == 3);
    CHECK_FALSE(r.cell(1, 0).mean);
    CHECK(r.marginal_alpha[0].mean == 3.0);
    CHECK(r.marginal_alpha[1].mean == 7.0);
    CHECK(r.marginal_alpha[1].incomplete);
    CHECK(r.grand_mean == doctest::Approx(24.0 / 6));
    CHECK(r.ks[r.argmax->k_index] == 2);
    CHECK(r.alphas[r.argmax->alpha_index] == 1.0);
    CHECK_THROWS_AS(aggregate(grid, {{{1}, {2}}}), ValidationError);
}

TEST_CASE("sweep under a closed-form judge") {
    const auto ix = testing::build_indexes(testing::random_chunks(21, 80));
    index::HybridRetriever retriever(ix->sparse, ix->dense, testing::mock_embedder());
    auto teacher = testing::mock_gateway(pipeline::mock_teacher_reply);
    auto judge = testing::mock_gateway(closed_form_judge);
    AblationGrid grid;
    grid.samples_per_cell = 5;
    AblationInputs in;
    in.chunks = &ix->chunks;
    in.retriever = &retriever;
    in.k_cand = 20;
    in.seed = 8;

    std::vector<AblationSample> samples;
    const auto r = run_ablation(grid, in, *teacher, *judge, &samples);
    CHECK(samples.size() == 125);
    for (const auto& s : samples) CHECK(s.error.empty());
    REQUIRE(r.argmax);
    CHECK(r.alphas[r.argmax->alpha_index] == 1.0);
    CHECK(r.ks[r.argmax->k_index] == 9);
    for (std::size_t a = 0; a < grid.alphas.size(); ++a) {
        for (std::size_t k = 0; k < grid.ks.size(); ++k) {
            const double v = closed_form(grid.alphas[a], grid.ks[k]);
            double sum = 0;
            for (int i = 0; i < 5; ++i) sum += v;
            CHECK(r.cell(a, k).count == 5);
            CHECK(*r.cell(a, k).mean == sum / 5);
        }
    }
    for (std::size_t k = 0; k < grid.ks.size(); ++k) {
        double sum = 0;
        for (std::size_t a = 0; a < grid.alphas.size(); ++a) sum += *r.cell(a, k).mean;
        CHECK(*r.marginal_k[k].mean == sum / 5);
    }

    // Anchors and types are shared across cells.
    for (const auto& s : samples) {
        CHECK(s.anchor_chunk_id == samples[s.sample].anchor_chunk_id);
        CHECK(s.qtype == samples[s.sample].qtype);
    }

    // Same inputs, same bytes.
    testing::TempDir d1, d2;
    emit_heatmap(r, d1.path());
    emit_heatmap(run_ablation(grid, in, *teacher, *judge), d2.path());
    for (const auto* f : {"ablation.csv", "ablation.svg", "ablation_summary.json"}) {
        CHECK(testing::read_file(d1 / f) == testing::read_file(d2 / f));
    }
    CHECK(count_lines(testing::read_file(d1 / "ablation.csv")) == 26);
}

TEST_CASE("failed samples leave cells missing") {
    const auto ix = testing::build_indexes(testing::random_chunks(22, 30));
    index::HybridRetriever retriever(ix->sparse, ix->dense, testing::mock_embedder());
    auto teacher = testing::mock_gateway(pipeline::mock_teacher_reply);
    auto judge = testing::mock_gateway([](const gateway::ChatRequest& req) {
        if (req.labels.at("k") == "9") return std::string("unparseable");
        return closed_form_judge(req);
    });
    AblationGrid grid;
    grid.samples_per_cell = 2;
    AblationInputs in;
    in.chunks = &ix->chunks;
    in.retriever = &retriever;
    in.k_cand = 10;
    std::vector<AblationSample> samples;
    const auto r = run_ablation(grid, in, *teacher, *judge, &samples);
    CHECK(r.missing().size() == 5);
    CHECK(r.ks[r.argmax->k_index] == 7);
    CHECK(render_svg(r).find("n/a") != std::string::npos);
    std::size_t failed = 0;
    for (const auto& s : samples) failed += s.total ? 0 : 1;
    CHECK(failed == 10);
}
