#include "skillos/json_io.hpp"

#include <fstream>
#include <sstream>

#include "skillos/error.hpp"

namespace skillos {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(Errc::io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json read_json_file(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::io, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& doc, int indent) {
  write_text_file(path, doc.dump(indent) + "\n");
}

std::vector<Json> read_jsonl_file(const fs::path& path) {
  std::vector<Json> docs;
  if (!fs::exists(path)) return docs;
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw Error(Errc::io, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void append_jsonl(const fs::path& path, const Json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(Errc::io, "cannot append to " + path.string());
  out << doc.dump() << '\n';
}

void write_jsonl_file(const fs::path& path, const std::vector<Json>& docs) {
  std::string text;
  for (const auto& d : docs) {
    text += d.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

}  // namespace skillos
