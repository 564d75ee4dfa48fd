#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sftgen/common/error.hpp"
#include "sftgen/index/hybrid.hpp"
#include "sftgen/index/persistence.hpp"
#include "test_support.hpp"

using namespace sftgen;
using namespace sftgen::index;

namespace {

std::vector<corpus::Chunk> chunks_of(const std::vector<std::string>& texts) {
    std::vector<corpus::Chunk> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        corpus::Chunk c;
        c.id = "c" + std::to_string(i + 1);
        c.text = texts[i];
        c.token_count = text::count_tokens(c.text);
        out.push_back(c);
    }
    return out;
}

using Tokens = std::vector<std::string>;

}  // namespace

TEST_CASE("sparse index counting") {
    SUBCASE("single chunk") {
        const auto cs = chunks_of({"a b a"});
        const auto ix = SparseIndex::build(cs);
        using P = std::vector<std::pair<std::string, std::uint32_t>>;
        CHECK(ix.term_frequencies("a") == P{{"c1", 2}});
        CHECK(ix.term_frequencies("b") == P{{"c1", 1}});
        CHECK(ix.term_frequencies("z").empty());
        CHECK(ix.avg_doc_length() == 3.0);
        CHECK(ix.vocab_size() == 2);
    }
    SUBCASE("mean length") {
        CHECK(SparseIndex::build(chunks_of({"x y", "x y z w"})).avg_doc_length() == 3.0);
    }
    SUBCASE("postings equal a brute-force tf table") {
        const auto cs = chunks_of({"Orbit debris orbit.", "radar, debris; RADAR radar", "orbit radar fence"});
        const auto ix = SparseIndex::build(cs);
        std::map<std::string, std::map<std::string, std::uint32_t>> table;
        for (const auto& c : cs) {
            for (const auto& t : text::tokenize(c.text)) table[t][c.id]++;
        }
        REQUIRE(ix.vocab_size() == table.size());
        for (const auto& [tok, per] : table) {
            std::vector<std::pair<std::string, std::uint32_t>> expect(per.begin(), per.end());
            CHECK(ix.term_frequencies(tok) == expect);
        }
        CHECK(ix.doc_lengths() == std::vector<std::uint32_t>{3, 4, 3});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(SparseIndex::build(std::vector<corpus::Chunk>{}), ValidationError);
        CHECK_THROWS_AS(SparseIndex::build(chunks_of({"a"}), 0.0), ValidationError);
        CHECK_THROWS_AS(SparseIndex::build(chunks_of({"a"}), 1.2, 1.5), ValidationError);
        auto dup = chunks_of({"a", "b"});
        dup[1].id = dup[0].id;
        CHECK_THROWS_AS(SparseIndex::build(dup), ValidationError);
    }
}

TEST_CASE("bm25 scoring") {
    SUBCASE("absent terms contribute nothing") {
        const auto ix = SparseIndex::build(chunks_of({"orbit radar", "debris"}));
        CHECK(bm25_score(ix, Tokens{"zzz"}, "c1") == 0.0);
        CHECK(bm25_score(ix, Tokens{"zzz", "yyy"}, "c2") == 0.0);
        CHECK(bm25_score(ix, Tokens{}, "c1") == 0.0);
    }
    SUBCASE("single-chunk corpus") {
        // N = n = 1: idf = ln((1 - 1 + 0.5) / (1 + 0.5) + 1) = ln(4/3).
        const auto ix = SparseIndex::build(chunks_of({"orbit orbit radar"}));
        const double idf = std::log(4.0 / 3.0);
        CHECK(ix.idf("orbit") == doctest::Approx(idf).epsilon(1e-15));
        // |d| = avgdl, so the length factor is 1: tf*(k1+1)/(tf+k1).
        const double sat = 2.0 * 2.2 / (2.0 + 1.2);
        CHECK(bm25_score(ix, Tokens{"orbit"}, "c1") == doctest::Approx(idf * sat).epsilon(1e-15));
    }
    SUBCASE("additive over the query multiset") {
        const auto ix = SparseIndex::build(chunks_of({"orbit radar debris", "radar fence", "orbit orbit"}));
        for (const char* id : {"c1", "c2", "c3"}) {
            const double one = bm25_score(ix, Tokens{"orbit"}, id);
            const double two = bm25_score(ix, Tokens{"orbit", "orbit"}, id);
            CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-15));
            const double mixed = bm25_score(ix, Tokens{"orbit", "radar"}, id);
            CHECK(mixed == doctest::Approx(one + bm25_score(ix, Tokens{"radar"}, id)).epsilon(1e-15));
        }
    }
    SUBCASE("matches the formula oracle and is never negative") {
        Rng rng(3);
        for (int rep = 0; rep < 20; ++rep) {
            const auto cs = testing::random_chunks(rng.next(), 1 + rng.below(60));
            const auto ix = SparseIndex::build(cs);
            const auto q = text::tokenize(testing::random_query(rng));
            const auto ref = testing::reference_bm25(cs, q);
            const auto all = ix.score_all(q);
            for (std::size_t i = 0; i < cs.size(); ++i) {
                CHECK(all[i] >= 0.0);
                CHECK(all[i] == doctest::Approx(ref[i]).epsilon(1e-12));
                CHECK(all[i] == ix.score(q, cs[i].id));
            }
        }
    }
    SUBCASE("unknown chunk") {
        const auto ix = SparseIndex::build(chunks_of({"a"}));
        CHECK_THROWS_AS(bm25_score(ix, Tokens{"a"}, "nope"), ValidationError);
    }
}

TEST_CASE("cosine") {
    std::vector<float> a(kEmbeddingDim, 0.0f), b(kEmbeddingDim, 0.0f), c(kEmbeddingDim, 0.0f);
    a[0] = 1;
    a[1] = 1;
    b[0] = 1;
    c[1] = 3;
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(b, c) == 0.0);
    CHECK(cosine(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    const std::vector<float> zero(kEmbeddingDim, 0.0f);
    CHECK_THROWS_WITH_AS(cosine(a, zero), doctest::Contains("degenerate embedding"), ValidationError);
    CHECK_THROWS_AS(cosine(a, std::vector<float>(3, 1.0f)), ValidationError);
}

TEST_CASE("dense index stores unit vectors") {
    DenseIndex d(4);
    d.add("x", std::vector<float>{3, 0, 4, 0});
    const auto v = d.vector(0);
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[2] == doctest::Approx(0.8));
    CHECK_THROWS_AS(d.add("x", std::vector<float>{1, 0, 0, 0}), ValidationError);
    CHECK_THROWS_AS(d.add("y", std::vector<float>{1, 0, 0}), ValidationError);
    CHECK_THROWS_AS(d.add("z", std::vector<float>{0, 0, 0, 0}), ValidationError);

    Rng rng(1);
    DenseIndex big;
    for (int i = 0; i < 50; ++i) big.add("c" + std::to_string(i), gateway::mock_embedding(testing::random_query(rng, 20)));
    for (std::size_t i = 0; i < big.size(); ++i) {
        CHECK(std::sqrt(testing::sequential_dot(big.vector(i), big.vector(i))) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("normalize_pool") {
    const auto one = normalize_pool({{"a", 0.3, 2.0}});
    CHECK(one[0].s_dense_norm == 0.5);
    CHECK(one[0].s_bm25_norm == 0.5);

    const auto two = normalize_pool({{"a", 0.2, 1.0}, {"b", 0.8, 1.0}});
    CHECK(two[0].s_dense_norm == 0.0);
    CHECK(two[1].s_dense_norm == 1.0);
    CHECK(two[0].s_bm25_norm == 0.5);

    const std::vector<Candidate> four = {{"a", -0.5, 0.0}, {"b", 0.1, 3.0}, {"c", 0.5, 1.5}, {"d", 0.25, 6.0}};
    const auto n = normalize_pool(four);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(n[i].s_dense_norm == doctest::Approx((four[i].s_dense + 0.5) / 1.0));
        CHECK(n[i].s_bm25_norm == doctest::Approx(four[i].s_bm25 / 6.0));
    }
}

TEST_CASE("hybrid retrieval on a 10-chunk corpus matches brute force") {
    const auto ix = testing::build_indexes(chunks_of({
        "orbit determination with radar observations", "radar cross section of debris fragments",
        "optical telescope survey of the geosynchronous belt", "batch least squares orbit fit",
        "atmospheric drag and orbit decay", "conjunction screening of debris pairs",
        "collision probability from covariance", "maneuver detection in residuals",
        "photometry light curve of a tumbling satellite", "reentry prediction under drag"}));
    const HybridRetriever r(ix->sparse, ix->dense, testing::mock_embedder());
    const RetrievalConfig cfg{0.5, 5, 3};
    for (const char* q : {"orbit drag", "debris radar", "telescope", "covariance of debris orbit", "unrelated words"}) {
        const auto got = r.retrieve(q, cfg);
        const auto ref = testing::reference_for_query(*ix, q, cfg);
        CHECK(testing::ids_of(got) == testing::ids_of(ref));
        REQUIRE(got.size() == ref.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].s_hybrid == doctest::Approx(ref[i].fused).epsilon(1e-12));
            CHECK(got[i].s_hybrid == fuse(cfg.alpha, got[i].s_dense_norm, got[i].s_bm25_norm));
        }
    }
}

TEST_CASE("hybrid retrieval equals the brute-force reference on random corpora") {
    Rng rng(77);
    for (int corpus = 0; corpus < 6; ++corpus) {
        const auto ix = testing::build_indexes(testing::random_chunks(rng.next(), 5 + rng.below(120)));
        const HybridRetriever r(ix->sparse, ix->dense, testing::mock_embedder());
        for (int q = 0; q < 5; ++q) {
            const auto query = testing::random_query(rng);
            for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                for (std::size_t k : {1u, 3u, 5u, 9u}) {
                    const RetrievalConfig cfg{alpha, 1 + rng.below(20), k};
                    if (cfg.top_k > 2 * cfg.k_cand) continue;
                    CHECK(testing::ids_of(r.retrieve(query, cfg)) ==
                          testing::ids_of(testing::reference_for_query(*ix, query, cfg)));
                }
            }
        }
    }
}

TEST_CASE("fusion degenerates to a single channel at the ends") {
    Rng rng(5);
    const auto ix = testing::build_indexes(testing::random_chunks(11, 80));
    const HybridRetriever r(ix->sparse, ix->dense, testing::mock_embedder());
    for (int q = 0; q < 20; ++q) {
        const auto query = testing::random_query(rng);
        const RetrievalConfig wide{1.0, 10, 20};
        const auto dense_only = r.retrieve(query, wide);
        for (std::size_t i = 1; i < dense_only.size(); ++i) CHECK(dense_only[i - 1].s_dense >= dense_only[i].s_dense);
        const auto sparse_only = r.retrieve(query, {0.0, 10, 20});
        for (std::size_t i = 1; i < sparse_only.size(); ++i) CHECK(sparse_only[i - 1].s_bm25 >= sparse_only[i].s_bm25);
    }
}

TEST_CASE("retrieve_for_chunk equals retrieving with the chunk text") {
    const auto ix = testing::build_indexes(testing::random_chunks(21, 60));
    const HybridRetriever r(ix->sparse, ix->dense, testing::mock_embedder());
    for (const auto& c : ix->chunks) {
        const RetrievalConfig cfg{0.5, 8, 5};
        const auto a = r.retrieve_for_chunk(c.id, c.text, cfg);
        const auto b = r.retrieve(c.text, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].chunk_id == b[i].chunk_id);
            CHECK(a[i].s_hybrid == b[i].s_hybrid);
        }
    }
}

TEST_CASE("retrieval config validation") {
    CHECK_THROWS_AS((RetrievalConfig{1.5, 5, 3}).validate(), ValidationError);
    CHECK_THROWS_AS((RetrievalConfig{0.5, 0, 3}).validate(), ValidationError);
    CHECK_THROWS_AS((RetrievalConfig{0.5, 2, 5}).validate(), ValidationError);
    CHECK_NOTHROW((RetrievalConfig{0.5, 3, 6}).validate());
}

TEST_CASE("index persistence round trip") {
    testing::TempDir dir;
    const auto ix = testing::build_indexes(testing::random_chunks(8, 40));
    save_indexes(dir.path(), ix->sparse, ix->dense, json{{"note", "x"}});
    const auto loaded = load_indexes(dir.path());
    CHECK(loaded.meta["k1"] == 1.2);
    CHECK(loaded.meta["chunk_count"] == 40);
    CHECK(loaded.meta["note"] == "x");
    CHECK(loaded.sparse.chunk_ids() == ix->sparse.chunk_ids());
    CHECK(loaded.sparse.avg_doc_length() == ix->sparse.avg_doc_length());
    CHECK(loaded.sparse.postings().size() == ix->sparse.postings().size());

    const HybridRetriever a(ix->sparse, ix->dense, testing::mock_embedder());
    const HybridRetriever b(loaded.sparse, loaded.dense, testing::mock_embedder());
    Rng rng(2);
    for (int q = 0; q < 10; ++q) {
        const auto query = testing::random_query(rng);
        const auto x = a.retrieve(query, {});
        const auto y = b.retrieve(query, {});
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(x[i].chunk_id == y[i].chunk_id);
            CHECK(x[i].s_hybrid == y[i].s_hybrid);
        }
    }

    // Saving twice gives the same bytes.
    testing::TempDir again;
    save_indexes(again.path(), loaded.sparse, loaded.dense, json{{"note", "x"}});
    for (const char* f : {"postings.jsonl", "vectors.bin", "meta.json"}) {
        CHECK(sha256_file(dir / f) == sha256_file(again / f));
    }

    // Truncated vector file.
    const auto bytes = read_text(dir / "vectors.bin");
    write_text(dir / "vectors.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_indexes(dir.path()), ValidationError);
    write_text(dir / "vectors.bin", "NOTMAGIC" + bytes.substr(8));
    CHECK_THROWS_AS(load_indexes(dir.path()), ValidationError);
}

TEST_CASE("retriever rejects mismatched indexes") {
    const auto ix = testing::build_indexes(chunks_of({"a", "b"}));
    DenseIndex other;
    other.add("c1", gateway::mock_embedding("a"));
    CHECK_THROWS_AS(HybridRetriever(ix->sparse, other, testing::mock_embedder()), ValidationError);
}
