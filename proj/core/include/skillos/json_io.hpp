#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace skillos {

using Json = nlohmann::json;

Json read_json_file(const std::filesystem::path& path);

/// Writes `doc` via a sibling temp file and rename, so readers never see a
/// half-written document.
void write_json_file(const std::filesystem::path& path, const Json& doc, int indent = 2);

std::vector<Json> read_jsonl_file(const std::filesystem::path& path);
void append_jsonl(const std::filesystem::path& path, const Json& doc);
void write_jsonl_file(const std::filesystem::path& path, const std::vector<Json>& docs);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace skillos
