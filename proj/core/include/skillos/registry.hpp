#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/json_io.hpp"
#include "skillos/vector_math.hpp"

namespace skillos::registry {

enum class SkillSource { marketplace, user };

std::string_view to_string(SkillSource source) noexcept;

struct Skill {
  std::string id;
  std::string name;
  std::string description;
  std::filesystem::path root_path;
  std::uint64_t install_count = 0;  // frequency score f(s)
  SkillSource source = SkillSource::marketplace;
  std::optional<Embedding> embedding;
};

Json to_json(const Skill& skill);
Skill skill_from_json(const Json& doc);

/// Lowercases and collapses runs of non-alphanumerics into '-'.
std::string slugify(std::string_view name);

/// {id, name, description}: the view of a skill shown to models.
Json skill_card(const Skill& skill);

/// Text used for every skill embedding: "name: description".
std::string embedding_text(const Skill& skill);

/// Reads `<dir>/SKILL.md` frontmatter and the optional `<dir>/meta.json`.
Skill load_skill(const std::filesystem::path& dir);

/// Loads every immediate subdirectory of `root` that holds a SKILL.md,
/// ordered by id.
std::vector<Skill> load_skill_corpus(const std::filesystem::path& root);

/// The ecosystem S together with the user-selected subset S^user.
class Ecosystem {
 public:
  /// Throws DuplicateId, or MalformedFrontmatter when name/description are empty.
  void add(Skill skill);
  void add_user_id(const std::string& id);

  bool contains(std::string_view id) const;
  const Skill& at(std::string_view id) const;  // UnknownSkill
  const Skill* find(std::string_view id) const;

  const std::map<std::string, Skill, std::less<>>& skills() const noexcept { return skills_; }
  const std::set<std::string, std::less<>>& user_ids() const noexcept { return user_ids_; }
  std::size_t size() const noexcept { return skills_.size(); }

  Json to_json() const;
  static Ecosystem from_json(const Json& doc);
  void save(const std::filesystem::path& path) const;
  static Ecosystem load(const std::filesystem::path& path);

 private:
  std::map<std::string, Skill, std::less<>> skills_;
  std::set<std::string, std::less<>> user_ids_;
};

Ecosystem ecosystem_from_corpus(const std::filesystem::path& root,
                                std::span<const std::string> user_ids = {});

/// Usage-frequency queue: install_count descending, id ascending.
std::vector<std::string> frequency_queue(const Ecosystem& eco);

/// S_T = TopK(Q, K) ∪ S^user: the queue prefix of length K followed by user
/// skills not already in it (id ascending).
std::vector<std::string> select_active_set(const Ecosystem& eco, std::size_t k);

struct TreeUpdateRequested {
  Skill skill;
};

struct PromoteResult {
  Ecosystem ecosystem;
  std::optional<TreeUpdateRequested> event;  // absent when already promoted
};

PromoteResult promote_skill(Ecosystem eco, std::string_view id);

struct DormantEntry {
  std::string skill_id;
  Embedding embedding;
};

/// Immutable embedding index over S \ S_T.
class DormantIndex {
 public:
  DormantIndex() = default;
  DormantIndex(std::vector<DormantEntry> entries, std::size_t dimension);

  const std::vector<DormantEntry>& entries() const noexcept { return entries_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  Json to_json() const;

 private:
  std::vector<DormantEntry> entries_;
  std::size_t dimension_ = 0;
};

DormantIndex build_dormant_index(const Ecosystem& eco, std::span<const std::string> active,
                                 llm::Embedder& embedder);

struct Suggestion {
  std::string skill_id;
  double similarity = 0.0;
};

/// Top-n by cosine, descending, ties by id ascending.
std::vector<Suggestion> suggest_dormant(const DormantIndex& index, std::string_view query,
                                        std::size_t n, llm::Embedder& embedder);

}  // namespace skillos::registry
