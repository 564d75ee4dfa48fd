#pragma once

#include <filesystem>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/index/dense_index.hpp"
#include "sftgen/index/sparse_index.hpp"

namespace sftgen::index {

// On-disk layout of an index directory:
//
//   postings.jsonl  one line per token, sorted by token:
//                   {"token": "orbit", "postings": [["d0001-c0001", 2], ...]}
//   vectors.bin     "SFTVEC01", u32 dimension, u64 count, then per vector:
//                   u32 id length, id bytes, dimension x f32 (all little-endian)
//   meta.json       {"k1", "b", "dimension", "chunk_count", "avg_doc_length",
//                    "vocab_size", "doc_lengths": [[chunk_id, length], ...], ...extra}

void save_indexes(const std::filesystem::path& dir, const SparseIndex& sparse, const DenseIndex& dense,
                  const json& extra_meta = json::object());

struct LoadedIndexes {
    SparseIndex sparse;
    DenseIndex dense;
    json meta;
};

/// Throws ValidationError on missing files, a bad header, or inconsistent
/// counts.
LoadedIndexes load_indexes(const std::filesystem::path& dir);

}  // namespace sftgen::index
