#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sftgen/corpus/document.hpp"
#include "sftgen/corpus/knowledge_tree.hpp"
#include "sftgen/corpus/segmenter.hpp"
#include "sftgen/corpus/terminology.hpp"

namespace sftgen::corpus {

struct ManifestEntry {
    std::filesystem::path path;  // absolute
    std::string title;
    std::string tree_path;
};

/// Corpus manifest file:
///
///     {
///       "tree": [{"name": "...", "children": [...]}],
///       "glossary": {"LEO satellite": "low-Earth-orbit satellite"},
///       "documents": [{"path": "docs/a.md", "title": "...", "tree_path": "A/B/C"}]
///     }
///
/// Document paths are relative to the manifest's directory.
struct CorpusManifest {
    KnowledgeTree tree;
    Glossary glossary;
    std::vector<ManifestEntry> documents;
};

/// Loads and validates a manifest: every document file must exist and every
/// tree_path must name a tree node. Fails before any document is read.
CorpusManifest load_manifest(const std::filesystem::path& path);
CorpusManifest parse_manifest(const json& doc, const std::filesystem::path& base_dir);

struct IngestResult {
    std::vector<Document> documents;
    std::vector<Chunk> chunks;
    KnowledgeTree tree;
    CoverageReport coverage;
};

/// Ingests every manifest document in order: parse, normalize terminology
/// (prose blocks only; code and formulas are left untouched), segment, and
/// attach chunks to the tree. Errors name the offending document.
IngestResult ingest_corpus(const CorpusManifest& manifest, const ChunkPolicy& policy);

}  // namespace sftgen::corpus
