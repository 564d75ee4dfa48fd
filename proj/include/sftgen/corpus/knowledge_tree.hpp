#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sftgen/common/jsonl.hpp"
#include "sftgen/corpus/segmenter.hpp"

namespace sftgen::corpus {

/// Mission-chain tiers, top to bottom.
enum class Tier { system_task = 0, subsystem = 1, technical_unit = 2 };

std::string_view to_string(Tier tier);

struct TreeNode {
    std::string name;
    Tier tier = Tier::system_task;
    std::vector<TreeNode> children;
};

/// Three-tier knowledge tree. Node paths are names joined by '/', e.g.
/// "Space debris tracking/Orbit determination/Initial orbit determination".
class KnowledgeTree {
public:
    KnowledgeTree() = default;

    /// Builds a tree from nested {"name", "children"} objects. Every leaf must
    /// sit on the third tier and names must be non-empty, unique among
    /// siblings and free of '/'.
    static KnowledgeTree from_json(const json& roots);
    json to_json() const;

    const std::vector<TreeNode>& roots() const { return roots_; }

    /// All node paths in pre-order.
    std::vector<std::string> node_paths() const;
    bool contains(std::string_view path) const;
    Tier tier_of(std::string_view path) const;

    /// node path -> chunk ids in assignment order.
    const std::map<std::string, std::vector<std::string>>& assignments() const { return assignments_; }

    void assign(const std::string& path, const std::string& chunk_id);

private:
    std::vector<TreeNode> roots_;
    std::map<std::string, Tier> index_;
    std::map<std::string, std::vector<std::string>> assignments_;
    std::map<std::string, std::string> owner_;  // chunk id -> path
};

/// Attaches each chunk to the node named by its tree_path. Throws
/// ValidationError listing every chunk whose path is not in the tree, or a
/// chunk id that is already assigned.
KnowledgeTree assign_to_tree(KnowledgeTree tree, std::span<const Chunk> chunks);

struct CoverageEntry {
    std::string path;
    Tier tier = Tier::system_task;
    std::size_t direct = 0;   // chunks assigned to this node
    std::size_t subtree = 0;  // chunks assigned to this node or below
};

/// Gaps are nodes with no chunk anywhere in their subtree, listed first.
struct CoverageReport {
    std::vector<CoverageEntry> gaps;
    std::vector<CoverageEntry> covered;
    std::size_t total_chunks = 0;

    json to_json() const;
};

CoverageReport coverage_report(const KnowledgeTree& tree);

}  // namespace sftgen::corpus
