#include <gtest/gtest.h>

#include <cmath>

#include "corpus.hpp"
#include "skillos/error.hpp"
#include "skillos/gateway.hpp"
#include "skillos/offline_policy.hpp"

using namespace skillos;
using namespace skillos::llm;

TEST(Roles, RoundTripNames) {
  for (const auto r : kAllRoles) {
    EXPECT_EQ(parse_role(to_string(r)), r);
    EXPECT_FALSE(schema_id(r).empty());
    EXPECT_FALSE(role_instructions(r).empty());
  }
  EXPECT_FALSE(parse_role("nope").has_value());
}

TEST(PayloadHash, IndependentOfKeyInsertionOrder) {
  Json a = Json::object();
  a["x"] = 1;
  a["y"] = {{"b", 2}, {"a", 1}};
  Json b = Json::object();
  b["y"] = {{"a", 1}, {"b", 2}};
  b["x"] = 1;
  EXPECT_EQ(payload_hash(a), payload_hash(b));
  EXPECT_NE(payload_hash(a), payload_hash(Json{{"x", 2}}));
  EXPECT_EQ(fixture_key({RoleTag::judge, a}).rfind("judge:", 0), 0u);
}

TEST(HashingEmbedder, UnitNormAndTokenBased) {
  HashingEmbedder e(64);
  const auto v = e.embed("Merge PDF files, merge!");
  ASSERT_EQ(v.size(), 64u);
  EXPECT_NEAR(l2_norm(v), 1.0, 1e-12);
  EXPECT_NEAR(cosine(e.embed("merge pdf"), e.embed("PDF MERGE")), 1.0, 1e-12);
  EXPECT_THROW(e.embed(""), Error);
  EXPECT_NEAR(l2_norm(e.embed("!!!")), 1.0, 1e-12);  // no tokens: whole text is one
}

TEST(Tokenize, LowercasesAlphanumericRuns) {
  EXPECT_EQ(tokenize("Hello, World-42!"), (std::vector<std::string>{"hello", "world", "42"}));
  EXPECT_TRUE(tokenize("  ...").empty());
}

TEST(ScriptedBackend, ReplaysFixturesAndChecksSchema) {
  const Json payload = {{"task", "t"}};
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_fixture(RoleTag::judge, payload, {{"preference", "second"}, {"rationale", "r"}});
  Gateway gw(backend, std::make_shared<HashingEmbedder>());
  EXPECT_EQ(gw.require(RoleTag::judge, payload)["preference"], "second");

  backend->add_fixture(RoleTag::judge, Json{{"task", "bad"}}, {{"preference", "maybe"}});
  const auto bad = gw.complete({RoleTag::judge, {{"task", "bad"}}});
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.error_kind, ErrorKind::schema_violation);

  const auto miss = gw.complete({RoleTag::judge, {{"task", "other"}}});
  EXPECT_EQ(miss.error_kind, ErrorKind::fixture_miss);
  try {
    gw.require(RoleTag::judge, {{"task", "other"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::fixture_miss);
  }
}

TEST(ScriptedBackend, ScriptedErrorsMapToKinds) {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_fixture(RoleTag::judge, Json{{"n", 1}}, {{"$error", "refusal"}});
  backend->add_fixture(RoleTag::judge, Json{{"n", 2}}, {{"$error", "transport"}});
  Gateway gw(backend, std::make_shared<HashingEmbedder>());
  EXPECT_EQ(gw.complete({RoleTag::judge, {{"n", 1}}}).error_kind, ErrorKind::refusal);
  EXPECT_EQ(gw.complete({RoleTag::judge, {{"n", 2}}}).error_kind, ErrorKind::transport);
  EXPECT_EQ(gw.complete({RoleTag::judge, Json::object()}).error_kind, ErrorKind::schema_violation);
}

TEST(ScriptedBackend, StrictModeIgnoresFallbacks) {
  auto emb = std::make_shared<HashingEmbedder>();
  auto lenient = std::make_shared<ScriptedBackend>();
  auto strict = std::make_shared<ScriptedBackend>(Json::object(), true);
  OfflinePolicy(emb).install(*lenient);
  OfflinePolicy(emb).install(*strict);
  const Json payload = {{"task", "t"},
                        {"first", {{"artifacts", Json::array()}}},
                        {"second", {{"artifacts", Json::array()}}}};
  EXPECT_TRUE(Gateway(lenient, emb).complete({RoleTag::judge, payload}).ok);
  EXPECT_EQ(Gateway(strict, emb).complete({RoleTag::judge, payload}).error_kind, ErrorKind::fixture_miss);
}

TEST(ScriptedBackend, FixtureFileKeys) {
  skillos::testing::TempDir tmp;
  const Json payload = {{"choice_for", "x"}};
  write_json_file(tmp.path() / "f.json", {{fixture_key({RoleTag::category_descent, payload}), {{"choice", 2}}}});
  auto backend = ScriptedBackend::from_file(tmp.path() / "f.json", true);
  Gateway gw(backend, std::make_shared<HashingEmbedder>());
  EXPECT_EQ(gw.require(RoleTag::category_descent, payload)["choice"], 2);
}

TEST(Schemas, AcceptAndRejectShapes) {
  EXPECT_FALSE(validate_response(RoleTag::tree_traversal, {{"selected", {0, 2}}}));
  EXPECT_TRUE(validate_response(RoleTag::tree_traversal, {{"selected", {"a"}}}));
  EXPECT_FALSE(validate_response(RoleTag::group_discovery, {{"groups", {{{"name", "a"}, {"description", "b"}}}}}));
  EXPECT_TRUE(validate_response(RoleTag::group_discovery, {{"groups", 3}}));
  EXPECT_FALSE(validate_response(RoleTag::prune_rank,
                                 {{"items", {{{"id", "a"}, {"keep", true}, {"rank", 1}, {"rationale", "r"}}}}}));
  EXPECT_TRUE(validate_response(RoleTag::prune_rank, {{"items", {{{"id", 3}}}}}));
  EXPECT_FALSE(validate_response(RoleTag::category_descent, {{"choice", 0}}));
  EXPECT_TRUE(validate_response(RoleTag::judge, {{"preference", "both"}}));
}

TEST(OfflinePolicy, EveryRoleAnswersWithinSchema) {
  auto emb = std::make_shared<HashingEmbedder>();
  OfflinePolicy policy(emb);
  const Json skill = {{"id", "pdf"}, {"name", "PDF"}, {"description", "merge pdf files"}};
  const Json skill2 = {{"id", "img"}, {"name", "Images"}, {"description", "resize pictures"}};
  const Json traversal = policy.respond(
      RoleTag::tree_traversal,
      {{"task", "merge two pdf files"},
       {"options", {{{"index", 0}, {"name", "Documents"}, {"description", "pdf and word files"}},
                    {{"index", 1}, {"name", "Media"}, {"description", "video and audio"}}}}});
  EXPECT_FALSE(validate_response(RoleTag::tree_traversal, traversal)) << traversal.dump();
  const Json ranking = policy.respond(RoleTag::prune_rank, {{"task", "merge pdf"}, {"candidates", {skill, skill2}}, {"m", 1}});
  EXPECT_FALSE(validate_response(RoleTag::prune_rank, ranking)) << ranking.dump();
  const Json plan = policy.respond(RoleTag::decompose, {{"task", "t"}, {"strategy", "QualityFirst"}, {"skills", {skill, skill2}}});
  EXPECT_FALSE(validate_response(RoleTag::decompose, plan)) << plan.dump();
  EXPECT_EQ(plan["sub_tasks"].size(), 4u);
}
