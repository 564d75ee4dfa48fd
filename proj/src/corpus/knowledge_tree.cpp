#include "sftgen/corpus/knowledge_tree.hpp"

#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sftgen/common/error.hpp"

namespace sftgen::corpus {

namespace {

TreeNode parse_node(const json& j, int depth, const std::string& parent_path) {
    if (!j.is_object() || !j.contains("name")) {
        throw ValidationError("knowledge tree: node under '" + parent_path + "' lacks a name");
    }
    TreeNode node;
    node.name = j.at("name").get<std::string>();
    if (node.name.empty() || node.name.find('/') != std::string::npos) {
        throw ValidationError("knowledge tree: invalid node name '" + node.name + "'");
    }
    if (depth > 2) throw ValidationError("knowledge tree: more than three tiers below '" + parent_path + "'");
    node.tier = static_cast<Tier>(depth);
    const auto path = parent_path.empty() ? node.name : parent_path + "/" + node.name;
    std::set<std::string> seen;
    if (j.contains("children")) {
        for (const auto& child : j.at("children")) {
            node.children.push_back(parse_node(child, depth + 1, path));
            if (!seen.insert(node.children.back().name).second) {
                throw ValidationError("knowledge tree: duplicate child '" + node.children.back().name + "' under '" +
                                      path + "'");
            }
        }
    }
    if (node.children.empty() && node.tier != Tier::technical_unit) {
        throw ValidationError(fmt::format("knowledge tree: leaf '{}' is on tier '{}', expected technical_unit", path,
                                          to_string(node.tier)));
    }
    return node;
}

json node_json(const TreeNode& n) {
    json j{{"name", n.name}};
    if (!n.children.empty()) {
        j["children"] = json::array();
        for (const auto& c : n.children) j["children"].push_back(node_json(c));
    }
    return j;
}

void walk(const TreeNode& n, const std::string& parent, std::vector<std::pair<std::string, Tier>>& out) {
    const auto path = parent.empty() ? n.name : parent + "/" + n.name;
    out.emplace_back(path, n.tier);
    for (const auto& c : n.children) walk(c, path, out);
}

json entry_json(const CoverageEntry& e) {
    return json{{"path", e.path}, {"tier", to_string(e.tier)}, {"direct", e.direct}, {"subtree", e.subtree}};
}

}  // namespace

std::string_view to_string(Tier tier) {
    switch (tier) {
    case Tier::system_task:
        return "system_task";
    case Tier::subsystem:
        return "subsystem";
    case Tier::technical_unit:
        return "technical_unit";
    }
    return "system_task";
}

KnowledgeTree KnowledgeTree::from_json(const json& roots) {
    if (!roots.is_array() || roots.empty()) throw ValidationError("knowledge tree: expected a non-empty array");
    KnowledgeTree tree;
    std::set<std::string> seen;
    for (const auto& r : roots) {
        tree.roots_.push_back(parse_node(r, 0, ""));
        if (!seen.insert(tree.roots_.back().name).second) {
            throw ValidationError("knowledge tree: duplicate root '" + tree.roots_.back().name + "'");
        }
    }
    std::vector<std::pair<std::string, Tier>> paths;
    for (const auto& r : tree.roots_) walk(r, "", paths);
    for (auto& [p, t] : paths) tree.index_.emplace(p, t);
    return tree;
}

json KnowledgeTree::to_json() const {
    json j = json::array();
    for (const auto& r : roots_) j.push_back(node_json(r));
    return j;
}

std::vector<std::string> KnowledgeTree::node_paths() const {
    std::vector<std::pair<std::string, Tier>> paths;
    for (const auto& r : roots_) walk(r, "", paths);
    std::vector<std::string> out;
    out.reserve(paths.size());
    for (auto& [p, t] : paths) out.push_back(std::move(p));
    return out;
}

bool KnowledgeTree::contains(std::string_view path) const { return index_.count(std::string(path)) > 0; }

Tier KnowledgeTree::tier_of(std::string_view path) const {
    auto it = index_.find(std::string(path));
    if (it == index_.end()) throw ValidationError("knowledge tree: unknown path '" + std::string(path) + "'");
    return it->second;
}

void KnowledgeTree::assign(const std::string& path, const std::string& chunk_id) {
    if (!contains(path)) throw ValidationError("knowledge tree: unknown path '" + path + "'");
    if (auto [it, inserted] = owner_.emplace(chunk_id, path); !inserted) {
        throw ValidationError("knowledge tree: chunk " + chunk_id + " already assigned to '" + it->second + "'");
    }
    assignments_[path].push_back(chunk_id);
}

KnowledgeTree assign_to_tree(KnowledgeTree tree, std::span<const Chunk> chunks) {
    std::vector<std::string> unmatched;
    for (const auto& c : chunks) {
        if (!tree.contains(c.tree_path)) unmatched.push_back(fmt::format("{} ('{}')", c.id, c.tree_path));
    }
    if (!unmatched.empty()) {
        throw ValidationError(fmt::format("chunks with unknown tree_path: {}", fmt::join(unmatched, ", ")));
    }
    for (const auto& c : chunks) tree.assign(c.tree_path, c.id);
    return tree;
}

CoverageReport coverage_report(const KnowledgeTree& tree) {
    CoverageReport report;
    std::vector<CoverageEntry> entries;
    for (const auto& path : tree.node_paths()) {
        CoverageEntry e;
        e.path = path;
        e.tier = tree.tier_of(path);
        if (auto it = tree.assignments().find(path); it != tree.assignments().end()) e.direct = it->second.size();
        entries.push_back(std::move(e));
    }
    for (auto& e : entries) {
        for (const auto& other : entries) {
            if (other.path == e.path || other.path.compare(0, e.path.size() + 1, e.path + "/") == 0) {
                e.subtree += other.direct;
            }
        }
        report.total_chunks += e.direct;
    }
    for (auto& e : entries) (e.subtree == 0 ? report.gaps : report.covered).push_back(std::move(e));
    return report;
}

json CoverageReport::to_json() const {
    json j{{"total_chunks", total_chunks}, {"gap_count", gaps.size()}};
    j["gaps"] = json::array();
    for (const auto& e : gaps) j["gaps"].push_back(entry_json(e));
    j["covered"] = json::array();
    for (const auto& e : covered) j["covered"].push_back(entry_json(e));
    return j;
}

}  // namespace sftgen::corpus
