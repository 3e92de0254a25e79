#include "skillos/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <yaml-cpp/yaml.h>

#include "skillos/error.hpp"

namespace skillos::registry {

namespace fs = std::filesystem;

std::string_view to_string(SkillSource source) noexcept {
  return source == SkillSource::user ? "user" : "marketplace";
}

Json to_json(const Skill& skill) {
  return {
      {"id", skill.id},
      {"name", skill.name},
      {"description", skill.description},
      {"root_path", skill.root_path.string()},
      {"install_count", skill.install_count},
      {"source", std::string(to_string(skill.source))},
  };
}

Skill skill_from_json(const Json& doc) {
  Skill s;
  try {
    s.id = doc.at("id").get<std::string>();
    s.name = doc.at("name").get<std::string>();
    s.description = doc.at("description").get<std::string>();
    s.root_path = doc.value("root_path", std::string());
    s.install_count = doc.value("install_count", std::uint64_t{0});
    s.source = doc.value("source", std::string("marketplace")) == "user" ? SkillSource::user
                                                                         : SkillSource::marketplace;
  } catch (const Json::exception& e) {
    throw Error(Errc::io, std::string("malformed skill record: ") + e.what());
  }
  return s;
}

std::string slugify(std::string_view name) {
  std::string out;
  bool pending_dash = false;
  for (const char raw : name) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_dash = true;
    }
  }
  return out;
}

Json skill_card(const Skill& skill) {
  return {{"id", skill.id}, {"name", skill.name}, {"description", skill.description}};
}

std::string embedding_text(const Skill& skill) { return skill.name + ": " + skill.description; }

namespace {

std::string extract_frontmatter(const std::string& text, const fs::path& file) {
  std::size_t pos = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;  // UTF-8 BOM
  auto next_line = [&](std::size_t from, std::string& line) -> std::size_t {
    if (from >= text.size()) return std::string::npos;
    auto end = text.find('\n', from);
    if (end == std::string::npos) end = text.size();
    line = text.substr(from, end - from);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return end + 1;
  };
  std::string line;
  auto cursor = next_line(pos, line);
  if (cursor == std::string::npos || line != "---") {
    throw Error(Errc::malformed_frontmatter, file.string() + ": missing frontmatter block");
  }
  const auto body_start = cursor;
  while (true) {
    const auto line_start = cursor;
    cursor = next_line(cursor, line);
    if (cursor == std::string::npos) break;
    if (line == "---" || line == "...") return text.substr(body_start, line_start - body_start);
  }
  throw Error(Errc::malformed_frontmatter, file.string() + ": unterminated frontmatter block");
}

std::string required_scalar(const YAML::Node& node, const char* key, const fs::path& file) {
  const auto value = node[key];
  if (!value || !value.IsScalar() || value.Scalar().empty()) {
    throw Error(Errc::malformed_frontmatter,
                file.string() + ": frontmatter must declare a non-empty '" + key + "'");
  }
  return value.Scalar();
}

void check_skill(const Skill& s) {
  if (s.id.empty()) throw Error(Errc::malformed_frontmatter, "skill id is empty");
  if (s.name.empty() || s.description.empty()) {
    throw Error(Errc::malformed_frontmatter, "skill '" + s.id + "' needs a name and description");
  }
  if (s.embedding) {
    const double n = l2_norm(*s.embedding);
    if (std::abs(n - 1.0) > 1e-6) {
      throw Error(Errc::embedder_failure, "skill '" + s.id + "' embedding is not unit norm");
    }
  }
}

}  // namespace

Skill load_skill(const fs::path& dir) {
  const auto manifest = dir / "SKILL.md";
  if (!fs::is_regular_file(manifest)) {
    throw Error(Errc::missing_manifest, "no SKILL.md in " + dir.string());
  }
  const auto text = read_text_file(manifest);
  const auto block = extract_frontmatter(text, manifest);
  YAML::Node front;
  try {
    front = YAML::Load(block);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::malformed_frontmatter, manifest.string() + ": " + e.what());
  }
  if (!front.IsMap()) {
    throw Error(Errc::malformed_frontmatter, manifest.string() + ": frontmatter is not a mapping");
  }

  Skill skill;
  auto dirname = dir.filename();
  if (dirname.empty()) dirname = dir.parent_path().filename();
  skill.id = slugify(dirname.string());
  if (skill.id.empty()) {
    throw Error(Errc::malformed_frontmatter, "cannot derive an id from " + dir.string());
  }
  skill.name = required_scalar(front, "name", manifest);
  skill.description = required_scalar(front, "description", manifest);
  skill.root_path = fs::absolute(dir).lexically_normal();

  const auto meta_path = dir / "meta.json";
  if (fs::is_regular_file(meta_path)) {
    const auto meta = read_json_file(meta_path);
    if (meta.contains("install_count")) {
      const auto& count = meta["install_count"];
      if (!count.is_number_integer() || count.get<long long>() < 0) {
        throw Error(Errc::malformed_frontmatter,
                    meta_path.string() + ": install_count must be a non-negative integer");
      }
      skill.install_count = count.get<std::uint64_t>();
    }
  }
  return skill;
}

std::vector<Skill> load_skill_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(Errc::io, "not a directory: " + root.string());
  std::vector<Skill> skills;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    if (!fs::is_regular_file(entry.path() / "SKILL.md")) continue;
    skills.push_back(load_skill(entry.path()));
  }
  std::sort(skills.begin(), skills.end(),
            [](const Skill& a, const Skill& b) { return a.id < b.id; });
  return skills;
}

void Ecosystem::add(Skill skill) {
  check_skill(skill);
  if (skills_.contains(skill.id)) {
    throw Error(Errc::duplicate_id, "duplicate skill id '" + skill.id + "'");
  }
  const auto id = skill.id;
  const bool user = skill.source == SkillSource::user;
  skills_.emplace(id, std::move(skill));
  if (user) user_ids_.insert(id);
}

void Ecosystem::add_user_id(const std::string& id) {
  auto it = skills_.find(id);
  if (it == skills_.end()) throw Error(Errc::unknown_skill, "unknown skill '" + id + "'");
  user_ids_.insert(id);
}

bool Ecosystem::contains(std::string_view id) const { return skills_.find(id) != skills_.end(); }

const Skill* Ecosystem::find(std::string_view id) const {
  const auto it = skills_.find(id);
  return it == skills_.end() ? nullptr : &it->second;
}

const Skill& Ecosystem::at(std::string_view id) const {
  if (const auto* s = find(id)) return *s;
  throw Error(Errc::unknown_skill, "unknown skill '" + std::string(id) + "'");
}

Json Ecosystem::to_json() const {
  Json skills = Json::array();
  for (const auto& [id, s] : skills_) skills.push_back(registry::to_json(s));
  Json users = Json::array();
  for (const auto& id : user_ids_) users.push_back(id);
  return {{"skills", std::move(skills)}, {"user_ids", std::move(users)}};
}

Ecosystem Ecosystem::from_json(const Json& doc) {
  Ecosystem eco;
  for (const auto& s : doc.at("skills")) eco.add(skill_from_json(s));
  for (const auto& id : doc.value("user_ids", Json::array())) eco.add_user_id(id.get<std::string>());
  return eco;
}

void Ecosystem::save(const fs::path& path) const { write_json_file(path, to_json()); }

Ecosystem Ecosystem::load(const fs::path& path) { return from_json(read_json_file(path)); }

Ecosystem ecosystem_from_corpus(const fs::path& root, std::span<const std::string> user_ids) {
  Ecosystem eco;
  for (auto& s : load_skill_corpus(root)) eco.add(std::move(s));
  for (const auto& id : user_ids) eco.add_user_id(id);
  return eco;
}

std::vector<std::string> frequency_queue(const Ecosystem& eco) {
  std::vector<const Skill*> order;
  order.reserve(eco.size());
  for (const auto& [id, s] : eco.skills()) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const Skill* a, const Skill* b) {
    if (a->install_count != b->install_count) return a->install_count > b->install_count;
    return a->id < b->id;
  });
  std::vector<std::string> ids;
  ids.reserve(order.size());
  for (const auto* s : order) ids.push_back(s->id);
  return ids;
}

std::vector<std::string> select_active_set(const Ecosystem& eco, std::size_t k) {
  if (k == 0) throw Error(Errc::invalid_config, "K must be at least 1");
  auto queue = frequency_queue(eco);
  if (queue.size() > k) queue.resize(k);
  std::unordered_set<std::string> seen(queue.begin(), queue.end());
  for (const auto& id : eco.user_ids()) {
    if (seen.insert(id).second) queue.push_back(id);
  }
  return queue;
}

PromoteResult promote_skill(Ecosystem eco, std::string_view id) {
  const auto& skill = eco.at(id);
  if (eco.user_ids().contains(id)) return {std::move(eco), std::nullopt};
  TreeUpdateRequested event{skill};
  eco.add_user_id(std::string(id));
  return {std::move(eco), std::move(event)};
}

DormantIndex::DormantIndex(std::vector<DormantEntry> entries, std::size_t dimension)
    : entries_(std::move(entries)), dimension_(dimension) {
  for (const auto& e : entries_) {
    if (e.embedding.size() != dimension_) {
      throw Error(Errc::embedder_failure, "dormant entry '" + e.skill_id + "' has wrong dimension");
    }
  }
}

Json DormantIndex::to_json() const {
  Json entries = Json::array();
  for (const auto& e : entries_) entries.push_back({{"id", e.skill_id}, {"embedding", e.embedding}});
  return {{"dimension", dimension_}, {"entries", std::move(entries)}};
}

DormantIndex build_dormant_index(const Ecosystem& eco, std::span<const std::string> active,
                                 llm::Embedder& embedder) {
  std::unordered_set<std::string> active_set;
  for (const auto& id : active) {
    eco.at(id);
    active_set.insert(id);
  }
  std::vector<DormantEntry> entries;
  for (const auto& [id, skill] : eco.skills()) {
    if (active_set.contains(id)) continue;
    try {
      entries.push_back({id, embedder.embed(embedding_text(skill))});
    } catch (const std::exception& e) {
      throw Error(Errc::embedder_failure, "embedding skill '" + id + "': " + e.what());
    }
  }
  return DormantIndex(std::move(entries), embedder.dimension());
}

std::vector<Suggestion> suggest_dormant(const DormantIndex& index, std::string_view query,
                                        std::size_t n, llm::Embedder& embedder) {
  if (n == 0) throw Error(Errc::invalid_config, "suggestion count must be at least 1");
  if (index.empty()) return {};
  const auto q = embedder.embed(query);
  std::vector<Suggestion> scored;
  scored.reserve(index.size());
  for (const auto& e : index.entries()) scored.push_back({e.skill_id, dot(q, e.embedding)});
  const auto take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const Suggestion& a, const Suggestion& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.skill_id < b.skill_id;
                    });
  scored.resize(take);
  return scored;
}

}  // namespace skillos::registry
