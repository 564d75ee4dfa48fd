#include "sftgen/corpus/manifest.hpp"

#include "sftgen/common/error.hpp"

namespace sftgen::corpus {

namespace fs = std::filesystem;

CorpusManifest parse_manifest(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("corpus manifest: expected an object");
    CorpusManifest m;
    m.tree = KnowledgeTree::from_json(doc.at("tree"));
    if (doc.contains("glossary")) {
        for (const auto& [k, v] : doc.at("glossary").items()) {
            if (k.empty()) throw ValidationError("corpus manifest: empty glossary term");
            m.glossary.emplace(k, v.get<std::string>());
        }
    }
    const auto& docs = doc.at("documents");
    if (!docs.is_array() || docs.empty()) throw ValidationError("corpus manifest: no documents");
    std::vector<std::string> problems;
    for (const auto& d : docs) {
        ManifestEntry e;
        e.path = base_dir / d.at("path").get<std::string>();
        e.title = d.value("title", e.path.stem().string());
        e.tree_path = d.value("tree_path", std::string{});
        if (!fs::is_regular_file(e.path)) problems.push_back("missing file " + e.path.string());
        if (!m.tree.contains(e.tree_path)) {
            problems.push_back("unknown tree_path '" + e.tree_path + "' for " + e.path.string());
        }
        m.documents.push_back(std::move(e));
    }
    if (!problems.empty()) {
        std::string msg = "corpus manifest invalid:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }
    return m;
}

CorpusManifest load_manifest(const fs::path& path) {
    return parse_manifest(read_json(path), fs::absolute(path).parent_path());
}

IngestResult ingest_corpus(const CorpusManifest& manifest, const ChunkPolicy& policy) {
    policy.validate();
    IngestResult result;
    Ingestor ingestor;
    for (const auto& entry : manifest.documents) {
        const auto raw = read_text(entry.path);
        auto doc = ingestor.ingest(raw, {entry.title, entry.path.string(), entry.tree_path});
        for (auto& block : doc.body) {
            if (block.kind == BlockKind::code || block.kind == BlockKind::formula) continue;
            block.text = normalize_terminology(block.text, manifest.glossary);
        }
        auto chunks = segment(doc, policy);
        result.chunks.insert(result.chunks.end(), std::make_move_iterator(chunks.begin()),
                             std::make_move_iterator(chunks.end()));
        result.documents.push_back(std::move(doc));
    }
    result.tree = assign_to_tree(manifest.tree, result.chunks);
    result.coverage = coverage_report(result.tree);
    return result;
}

}  // namespace sftgen::corpus
