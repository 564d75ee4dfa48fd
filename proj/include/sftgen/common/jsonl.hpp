#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sftgen {

using json = nlohmann::json;

/// Reads a JSON-lines file. Blank lines are skipped; a malformed line raises
/// ValidationError naming file and line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact JSON object per line, '\n'-terminated, keys in sorted
/// order (nlohmann's default), so output is byte-stable.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sftgen
