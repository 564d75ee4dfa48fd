#include <doctest.h>

#include <algorithm>
#include <set>

#include "sftgen/common/error.hpp"
#include "sftgen/common/rng.hpp"
#include "sftgen/corpus/document.hpp"
#include "sftgen/corpus/knowledge_tree.hpp"
#include "sftgen/corpus/manifest.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/corpus/terminology.hpp"
#include "sftgen/text/tokenizer.hpp"
#include "test_support.hpp"

using namespace sftgen;
using namespace sftgen::corpus;

namespace {

std::string strip_ws(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c != ' ' && c != '\n' && c != '\t' && c != '\r') out += c;
    }
    return out;
}

std::string words(Rng& rng, std::size_t n, bool sentences = true) {
    const auto& vocab = testing::vocabulary();
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s.empty()) s += ' ';
        s += vocab[rng.below(vocab.size())];
        if (sentences && rng.below(9) == 0) s += '.';
    }
    return s + ".";
}

/// Random Markdown document mixing every block kind.
std::string random_markdown(Rng& rng) {
    std::string doc;
    const auto blocks = 1 + rng.below(12);
    for (std::size_t b = 0; b < blocks; ++b) {
        if (!doc.empty()) doc += "\n";
        switch (rng.below(6)) {
        case 0:
            doc += "## " + words(rng, 1 + rng.below(4), false) + "\n";
            break;
        case 1: {
            doc += "```\n";
            const auto lines = 1 + rng.below(rng.below(4) == 0 ? 60 : 6);
            for (std::size_t l = 0; l < lines; ++l) doc += "x = f(" + words(rng, 2, false) + ")\n";
            doc += "```\n";
            break;
        }
        case 2: {
            doc += "| a | b |\n|---|---|\n";
            const auto rows = 1 + rng.below(5);
            for (std::size_t r = 0; r < rows; ++r) doc += "| " + words(rng, 2, false) + " | 1 |\n";
            break;
        }
        case 3:
            doc += "$$ E = m c^2 + " + words(rng, 1, false) + " $$\n";
            break;
        default:
            doc += words(rng, 5 + rng.below(rng.below(3) == 0 ? 200 : 40)) + "\n";
        }
    }
    return doc;
}

Document doc_of(std::string_view raw, std::string tree_path = "A/B/C") {
    return ingest_document(raw, {"t", "t.md", std::move(tree_path)}, "d0001");
}

json small_tree() {
    return json::parse(R"([{"name":"A","children":[{"name":"B","children":[{"name":"C"},{"name":"D"}]}]}])");
}

}  // namespace

TEST_CASE("tokenizer boundary rules") {
    using V = std::vector<std::string>;
    CHECK(text::tokenize("Orbit determination, orbit!") == V{"orbit", "determination", "orbit"});
    CHECK(text::tokenize("").empty());
    CHECK(text::tokenize("BM25-based re-rank") == V{"bm25", "based", "re", "rank"});
    CHECK(text::count_tokens("a, b.") == 4);
    CHECK(text::tokenize("Ωmega ÉTÉ") == V{"ωmega", "été"});
    CHECK(text::tokenize("空间目标") == V{"空", "间", "目", "标"});
}

TEST_CASE("ingest_document block parsing") {
    SUBCASE("one paragraph") {
        const auto d = doc_of("Just one paragraph\nspanning two lines.");
        REQUIRE(d.body.size() == 1);
        CHECK(d.body[0].kind == BlockKind::paragraph);
    }
    SUBCASE("code between paragraphs") {
        const auto d = doc_of("First.\n\n```cpp\nint x;\n\nint y;\n```\n\nLast.\n");
        REQUIRE(d.body.size() == 3);
        CHECK(d.body[0].kind == BlockKind::paragraph);
        CHECK(d.body[1].kind == BlockKind::code);
        CHECK(d.body[1].text == "```cpp\nint x;\n\nint y;\n```");
        CHECK(d.body[2].kind == BlockKind::paragraph);
    }
    SUBCASE("every kind") {
        const auto d = doc_of("# Title\n\ntext\n| a |\n| b |\n$$\nx\n$$\n<table>\n<tr></tr>\n</table>\n");
        std::vector<BlockKind> kinds;
        for (const auto& b : d.body) kinds.push_back(b.kind);
        CHECK(kinds == std::vector<BlockKind>{BlockKind::heading, BlockKind::paragraph, BlockKind::table,
                                              BlockKind::formula, BlockKind::table});
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(doc_of(""), doctest::Contains("empty document"), ValidationError);
        CHECK_THROWS_WITH_AS(doc_of("  \n\n"), doctest::Contains("empty document"), ValidationError);
        CHECK_THROWS_WITH_AS(doc_of("a\n\n```\ncode"), doctest::Contains("line 3"), ValidationError);
        CHECK_THROWS_WITH_AS(doc_of("$$\nx"), doctest::Contains("line 1"), ValidationError);
        CHECK_THROWS_WITH_AS(doc_of("a\n</table>"), doctest::Contains("line 2"), ValidationError);
    }
    SUBCASE("ingestor ids are sequential") {
        Ingestor ing;
        CHECK(ing.ingest("a", {}).id == "d0001");
        CHECK(ing.ingest("b", {}).id == "d0002");
    }
}

TEST_CASE("segment examples") {
    SUBCASE("small doc is one chunk equal to the doc") {
        const auto d = doc_of("# H\n\nShort paragraph here.");
        const auto cs = segment(d, {});
        REQUIRE(cs.size() == 1);
        CHECK(cs[0].text == body_text(d));
        CHECK(cs[0].kind == ChunkKind::paragraph);
        CHECK(cs[0].id == "d0001-c0001");
    }
    SUBCASE("three paragraphs totaling 2.5x target, overlap 0") {
        // 8 + 9 + 8 = 25 tokens at target 10: no two paragraphs fit together.
        const std::string p1 = "one two three four five six seven eight";
        const std::string p2 = "a b c d e f g h i";
        const std::string p3 = "alpha beta gamma delta epsilon zeta eta theta";
        REQUIRE(text::count_tokens(p1) + text::count_tokens(p2) + text::count_tokens(p3) == 25);
        const auto cs = segment(doc_of(p1 + "\n\n" + p2 + "\n\n" + p3), {10, 15, 0});
        REQUIRE(cs.size() == 3);
        CHECK(cs[0].text == p1);
        CHECK(cs[1].text == p2);
        CHECK(cs[2].text == p3);
    }
    SUBCASE("lone table twice max_tokens becomes one oversized chunk") {
        std::string table = "| h |\n";
        for (int i = 0; i < 10; ++i) table += "| w |\n";  // 3 tokens per row
        const ChunkPolicy p{8, 16, 2};
        REQUIRE(text::count_tokens(table) >= 2 * p.max_tokens);
        const auto cs = segment(doc_of(table), p);
        REQUIRE(cs.size() == 1);
        CHECK(cs[0].kind == ChunkKind::table);
        CHECK(cs[0].oversized);
    }
    SUBCASE("overlap carries the tail of the previous paragraph") {
        const auto cs = segment(doc_of("a b c d e f g h.\n\ni j k l m n o p."), {10, 20, 3});
        REQUIRE(cs.size() == 2);
        CHECK(cs[1].text.substr(0, cs[1].overlap_chars) == "g h.\n\n");
        CHECK(cs[1].own_text() == "i j k l m n o p.");
    }
    SUBCASE("invalid policies") {
        CHECK_THROWS_AS(segment(doc_of("x"), {10, 5, 0}), ValidationError);
        CHECK_THROWS_AS(segment(doc_of("x"), {10, 20, 10}), ValidationError);
        CHECK_THROWS_AS(segment(doc_of("x"), {0, 20, 0}), ValidationError);
    }
}

TEST_CASE("segment properties over random documents") {
    Rng rng(2024);
    int docs = 0;
    for (int iter = 0; iter < 400; ++iter) {
        const auto raw = random_markdown(rng);
        const auto d = doc_of(raw);
        const std::size_t target = 8 + rng.below(60);
        const ChunkPolicy policy{target, target + rng.below(40), rng.below(target)};
        const auto cs = segment(d, policy);
        ++docs;
        REQUIRE(!cs.empty());

        // Lossless modulo whitespace once overlaps are removed.
        std::string joined;
        for (const auto& c : cs) joined += c.own_text();
        CHECK(strip_ws(joined) == strip_ws(body_text(d)));

        for (const auto& c : cs) {
            CHECK(c.token_count > 0);
            CHECK(c.token_count == text::count_tokens(c.text));
            if (!c.oversized) CHECK(c.token_count <= policy.max_tokens);
            // Structural markers are balanced inside every chunk.
            std::size_t fences = 0, start = 0;
            while ((start = c.text.find("```", start)) != std::string::npos) {
                ++fences;
                start += 3;
            }
            CHECK(fences % 2 == 0);
        }
        // Every structural block sits whole inside exactly one chunk's own text.
        for (const auto& b : d.body) {
            if (!is_structural(b.kind)) continue;
            int holders = 0;
            for (const auto& c : cs) holders += c.own_text().find(b.text) != std::string_view::npos;
            CHECK(holders >= 1);
        }
    }
    CHECK(docs == 400);
}

TEST_CASE("normalize_terminology") {
    const Glossary g = {{"LEO satellite", "low-Earth-orbit satellite"}};
    CHECK(normalize_terminology("the LEO satellite", g) == "the low-Earth-orbit satellite");
    CHECK(normalize_terminology("the leo SATELLITE", g) == "the low-Earth-orbit satellite");
    CHECK(normalize_terminology("the LEO satellites", g) == "the LEO satellites");
    CHECK(normalize_terminology("anything at all", {}) == "anything at all");
    CHECK(normalize_terminology("the low-Earth-orbit satellite", g) == "the low-Earth-orbit satellite");

    const Glossary self = {{"satellite", "artificial satellite"}};
    CHECK(normalize_terminology("a satellite", self) == "a artificial satellite");
    CHECK(normalize_terminology("a artificial satellite", self) == "a artificial satellite");

    CHECK_THROWS_AS(normalize_terminology("x", {{"", "y"}}), ValidationError);
    // Mutually canonical terms settle: an exact canonical form is never rewritten.
    const Glossary swap = {{"a", "b"}, {"b", "a"}};
    const auto settled = normalize_terminology("a b", swap);
    CHECK(normalize_terminology(settled, swap) == settled);
}

TEST_CASE("normalize_terminology is idempotent on random text") {
    const Glossary g = {{"LEO", "low Earth orbit"},       {"GEO", "geosynchronous orbit"},
                        {"orbit", "orbit"},               {"radar fence", "radar surveillance fence"},
                        {"debris", "space debris"},       {"TLE", "two line element set"},
                        {"element set", "element set"},   {"space debris", "space debris"}};
    Rng rng(7);
    const std::vector<std::string> pieces = {"LEO", "GEO", "orbit", "radar", "fence", "debris", "space",
                                             "TLE", "element", "set", "leo", ",", ".", "Orbit", "two"};
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const auto n = rng.below(20);
        for (std::size_t w = 0; w < n; ++w) s += pieces[rng.below(pieces.size())] + (rng.below(3) ? " " : "");
        const auto once = normalize_terminology(s, g);
        CHECK(normalize_terminology(once, g) == once);
    }
}

TEST_CASE("knowledge tree assignment and coverage") {
    auto tree = KnowledgeTree::from_json(small_tree());
    CHECK(tree.node_paths() == std::vector<std::string>{"A", "A/B", "A/B/C", "A/B/D"});
    CHECK(tree.tier_of("A/B") == Tier::subsystem);

    std::vector<Chunk> cs(3);
    cs[0].id = "x1";
    cs[0].tree_path = "A/B/C";
    cs[1].id = "x2";
    cs[1].tree_path = "A/B/C";
    cs[2].id = "x3";
    cs[2].tree_path = "A/B";
    const auto t = assign_to_tree(tree, cs);
    CHECK(t.assignments().at("A/B/C") == std::vector<std::string>{"x1", "x2"});
    std::size_t assigned = 0;
    for (const auto& [_, ids] : t.assignments()) assigned += ids.size();
    CHECK(assigned == 3);

    const auto rep = coverage_report(t);
    CHECK(rep.total_chunks == 3);
    REQUIRE(rep.gaps.size() == 1);
    CHECK(rep.gaps[0].path == "A/B/D");

    cs[2].tree_path = "A/Z";
    CHECK_THROWS_WITH_AS(assign_to_tree(tree, cs), doctest::Contains("A/Z"), ValidationError);
}

TEST_CASE("coverage of a three-node chain with counts 2/1/0") {
    const auto tree = KnowledgeTree::from_json(json::parse(R"([{"name":"S","children":[{"name":"U","children":[{"name":"T"}]}]}])"));
    std::vector<Chunk> cs(3);
    cs[0] = {"a", "d", "", ChunkKind::paragraph, "S"};
    cs[1] = {"b", "d", "", ChunkKind::paragraph, "S"};
    cs[2] = {"c", "d", "", ChunkKind::paragraph, "S/U"};
    const auto rep = coverage_report(assign_to_tree(tree, cs));
    CHECK(rep.total_chunks == 3);
    REQUIRE(rep.gaps.size() == 1);
    CHECK(rep.gaps[0].path == "S/U/T");
    CHECK(rep.covered.size() == 2);
    CHECK(rep.to_json()["gap_count"] == 1);

    const auto full = coverage_report(assign_to_tree(tree, std::vector<Chunk>{{"z", "d", "", ChunkKind::paragraph, "S/U/T"}}));
    CHECK(full.gaps.empty());
}

TEST_CASE("tree shape is enforced") {
    CHECK_THROWS_AS(KnowledgeTree::from_json(json::parse(R"([{"name":"A"}])")), ValidationError);
    CHECK_THROWS_AS(KnowledgeTree::from_json(json::parse(R"([{"name":"A","children":[{"name":"B","children":[{"name":"C","children":[{"name":"D"}]}]}]}])")),
                    ValidationError);
    CHECK_THROWS_AS(KnowledgeTree::from_json(json::parse(R"([{"name":"A/x","children":[{"name":"B","children":[{"name":"C"}]}]}])")),
                    ValidationError);
}

TEST_CASE("manifest validation fails before any document is read") {
    testing::TempDir dir;
    write_text(dir / "a.md", "# A\n\nalpha LEO text.\n");
    json m{{"tree", small_tree()},
           {"glossary", {{"LEO", "low Earth orbit"}}},
           {"documents", json::array({{{"path", "a.md"}, {"tree_path", "A/B/C"}}, {{"path", "missing.md"}, {"tree_path", "A/B/C"}}})}};
    write_json(dir / "m.json", m);
    CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("missing.md"), ValidationError);

    m["documents"].erase(1);
    write_json(dir / "m.json", m);
    const auto r = ingest_corpus(load_manifest(dir / "m.json"), {});
    REQUIRE(r.chunks.size() == 1);
    CHECK(r.chunks[0].text.find("low Earth orbit") != std::string::npos);
    CHECK(r.coverage.gaps.size() == 1);
}

TEST_CASE("chunk json round trip") {
    Chunk c{"id", "doc", "text", ChunkKind::code, "A/B/C", 3, true, 0};
    const auto back = chunk_from_json(to_json(c));
    CHECK(back.id == c.id);
    CHECK(back.kind == ChunkKind::code);
    CHECK(back.oversized);
    CHECK(to_json(back) == to_json(c));
}
