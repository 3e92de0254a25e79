#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "corpus.hpp"
#include "skillos/error.hpp"
#include "skillos/registry.hpp"

using namespace skillos;
using namespace skillos::registry;
using skillos::testing::TempDir;

namespace {

void write_skill(const std::filesystem::path& dir, const std::string& front, const std::string& meta = {}) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "SKILL.md") << front;
  if (!meta.empty()) std::ofstream(dir / "meta.json") << meta;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io;
}

Skill make(std::string id, std::uint64_t installs) {
  Skill s;
  s.id = id;
  s.name = id;
  s.description = "does " + id;
  s.install_count = installs;
  return s;
}

}  // namespace

TEST(Slugify, CollapsesNonAlphanumerics) {
  EXPECT_EQ(slugify("PDF  Merge_Tool!"), "pdf-merge-tool");
  EXPECT_EQ(slugify("--Already-slug--"), "already-slug");
  EXPECT_EQ(slugify("A1 b2"), "a1-b2");
}

TEST(LoadSkill, ReadsFrontmatterAndMeta) {
  TempDir tmp;
  write_skill(tmp.path() / "Pdf Tools", "---\nname: PDF Tools\ndescription: \"Merge: split and stamp PDFs\"\n---\nbody\n",
              R"({"install_count": 42})");
  const auto s = load_skill(tmp.path() / "Pdf Tools");
  EXPECT_EQ(s.id, "pdf-tools");
  EXPECT_EQ(s.name, "PDF Tools");
  EXPECT_EQ(s.description, "Merge: split and stamp PDFs");
  EXPECT_EQ(s.install_count, 42u);
  EXPECT_TRUE(s.root_path.is_absolute());
}

TEST(LoadSkill, ToleratesBomAndCrlf) {
  TempDir tmp;
  write_skill(tmp.path() / "x", "\xEF\xBB\xBF---\r\nname: X\r\ndescription: does x\r\n---\r\n");
  EXPECT_EQ(load_skill(tmp.path() / "x").name, "X");
}

TEST(LoadSkill, ReportsMalformedManifests) {
  TempDir tmp;
  EXPECT_EQ(code_of([&] { load_skill(tmp.path() / "missing"); }), Errc::missing_manifest);
  write_skill(tmp.path() / "nofront", "# just a heading\n");
  EXPECT_EQ(code_of([&] { load_skill(tmp.path() / "nofront"); }), Errc::malformed_frontmatter);
  write_skill(tmp.path() / "open", "---\nname: a\n");
  EXPECT_EQ(code_of([&] { load_skill(tmp.path() / "open"); }), Errc::malformed_frontmatter);
  write_skill(tmp.path() / "noname", "---\ndescription: d\n---\n");
  EXPECT_EQ(code_of([&] { load_skill(tmp.path() / "noname"); }), Errc::malformed_frontmatter);
  write_skill(tmp.path() / "badmeta", "---\nname: a\ndescription: d\n---\n", R"({"install_count": -3})");
  EXPECT_EQ(code_of([&] { load_skill(tmp.path() / "badmeta"); }), Errc::malformed_frontmatter);
}

TEST(Corpus, LoadsEverySkillDirectoryInIdOrder) {
  TempDir tmp;
  skillos::testing::write_corpus(tmp.path(), 12);
  std::filesystem::create_directories(tmp.path() / "not-a-skill");
  const auto skills = load_skill_corpus(tmp.path());
  ASSERT_EQ(skills.size(), 12u);
  EXPECT_TRUE(std::is_sorted(skills.begin(), skills.end(), [](auto& a, auto& b) { return a.id < b.id; }));
}

TEST(Ecosystem, RejectsDuplicatesAndUnknownIds) {
  Ecosystem eco;
  eco.add(make("a", 1));
  EXPECT_EQ(code_of([&] { eco.add(make("a", 2)); }), Errc::duplicate_id);
  EXPECT_EQ(code_of([&] { eco.at("zzz"); }), Errc::unknown_skill);
  EXPECT_EQ(eco.find("zzz"), nullptr);
  Skill blank = make("b", 0);
  blank.description.clear();
  EXPECT_EQ(code_of([&] { eco.add(blank); }), Errc::malformed_frontmatter);
}

TEST(Ecosystem, JsonRoundTrip) {
  auto eco = skillos::testing::synthetic_ecosystem(10);
  eco.add_user_id(eco.skills().begin()->first);
  const auto back = Ecosystem::from_json(eco.to_json());
  EXPECT_EQ(back.to_json(), eco.to_json());
}

TEST(ActiveSet, TopKByInstallsThenUserSkills) {
  Ecosystem eco;
  eco.add(make("a", 5));
  eco.add(make("b", 9));
  eco.add(make("c", 5));
  eco.add(make("d", 1));
  eco.add(make("e", 0));
  EXPECT_EQ(frequency_queue(eco), (std::vector<std::string>{"b", "a", "c", "d", "e"}));
  eco.add_user_id("e");
  eco.add_user_id("a");
  EXPECT_EQ(select_active_set(eco, 2), (std::vector<std::string>{"b", "a", "e"}));
  EXPECT_EQ(select_active_set(eco, 100).size(), 5u);
  EXPECT_EQ(code_of([&] { select_active_set(eco, 0); }), Errc::invalid_config);
}

TEST(Promote, EmitsTreeUpdateOnce) {
  Ecosystem eco;
  eco.add(make("a", 5));
  auto r = promote_skill(std::move(eco), "a");
  ASSERT_TRUE(r.event.has_value());
  EXPECT_EQ(r.event->skill.id, "a");
  EXPECT_TRUE(r.ecosystem.user_ids().contains("a"));
  auto again = promote_skill(std::move(r.ecosystem), "a");
  EXPECT_FALSE(again.event.has_value());
}

TEST(Dormant, IndexExcludesActiveSkills) {
  auto eco = skillos::testing::synthetic_ecosystem(20);
  const auto active = select_active_set(eco, 15);
  llm::HashingEmbedder emb;
  const auto idx = build_dormant_index(eco, active, emb);
  EXPECT_EQ(idx.size(), 5u);
  for (const auto& e : idx.entries()) {
    EXPECT_EQ(std::find(active.begin(), active.end(), e.skill_id), active.end());
    EXPECT_NEAR(l2_norm(e.embedding), 1.0, 1e-12);
  }
  EXPECT_TRUE(suggest_dormant(DormantIndex(), "anything", 3, emb).empty());
  EXPECT_THROW(suggest_dormant(idx, "anything", 0, emb), Error);
}

// Golden suggestions computed by an independent implementation of the
// token-hashing embedder (fixtures/golden/generate.py).
TEST(Dormant, MatchesGoldenSuggestions) {
  const auto golden = read_json_file(std::filesystem::path(SKILLOS_FIXTURE_DIR) / "golden" / "dormant.json");
  Ecosystem eco;
  for (const auto& s : golden["skills"]) {
    Skill k;
    k.id = s["id"];
    k.name = s["name"];
    k.description = s["description"];
    eco.add(k);
  }
  const auto active = golden["active"].get<std::vector<std::string>>();
  llm::HashingEmbedder emb(golden["dimension"].get<std::size_t>());
  const auto idx = build_dormant_index(eco, active, emb);
  for (const auto& c : golden["cases"]) {
    const auto got = suggest_dormant(idx, c["query"].get<std::string>(), c["n"].get<std::size_t>(), emb);
    const auto& want = c["expected"];
    ASSERT_EQ(got.size(), want.size()) << c["query"];
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].similarity, want[i]["similarity"].get<double>(), 1e-12) << c["query"] << " #" << i;
      // Equal similarities may legitimately differ in the last ulp; only
      // require the id when its score is strictly separated.
      const double s = want[i]["similarity"].get<double>();
      const bool tied = (i > 0 && std::abs(want[i - 1]["similarity"].get<double>() - s) < 1e-12) ||
                        (i + 1 < want.size() && std::abs(want[i + 1]["similarity"].get<double>() - s) < 1e-12);
      if (!tied) EXPECT_EQ(got[i].skill_id, want[i]["skill_id"]) << c["query"] << " #" << i;
    }
  }
}
