#include <string>

#include "skillos/gateway.hpp"

namespace skillos::llm {

namespace {

using Check = std::optional<std::string>;

Check need_object(const Json& doc, std::string_view where) {
  if (!doc.is_object()) return std::string(where) + ": expected object";
  return std::nullopt;
}

Check need_string(const Json& obj, const char* key, bool non_empty, std::string_view where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    return std::string(where) + "." + key + ": expected string";
  }
  if (non_empty && obj[key].get_ref<const std::string&>().empty()) {
    return std::string(where) + "." + key + ": must be non-empty";
  }
  return std::nullopt;
}

Check optional_string(const Json& obj, const char* key, std::string_view where) {
  if (obj.contains(key) && !obj[key].is_string()) {
    return std::string(where) + "." + key + ": expected string";
  }
  return std::nullopt;
}

Check need_integer(const Json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    return std::string(where) + "." + key + ": expected integer";
  }
  return std::nullopt;
}

Check need_array(const Json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj[key].is_array()) {
    return std::string(where) + "." + key + ": expected array";
  }
  return std::nullopt;
}

Check need_enum(const Json& obj, const char* key, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (auto c = need_string(obj, key, true, where)) return c;
  const auto& v = obj[key].get_ref<const std::string&>();
  for (const auto a : allowed) {
    if (v == a) return std::nullopt;
  }
  return std::string(where) + "." + key + ": unexpected value '" + v + "'";
}

#define SKILLOS_CHECK(expr) \
  do {                      \
    if (auto c_ = (expr)) return c_; \
  } while (false)

Check check_groups(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_array(doc, "groups", "$"));
  if (doc["groups"].empty()) return std::string("$.groups: must be non-empty");
  for (const auto& g : doc["groups"]) {
    SKILLOS_CHECK(need_object(g, "$.groups[]"));
    SKILLOS_CHECK(need_string(g, "name", true, "$.groups[]"));
    SKILLOS_CHECK(need_string(g, "description", false, "$.groups[]"));
  }
  return std::nullopt;
}

Check check_assignment(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_array(doc, "assignments", "$"));
  for (const auto& a : doc["assignments"]) {
    SKILLOS_CHECK(need_object(a, "$.assignments[]"));
    SKILLOS_CHECK(need_string(a, "skill_id", true, "$.assignments[]"));
    SKILLOS_CHECK(need_integer(a, "group", "$.assignments[]"));
  }
  return std::nullopt;
}

Check check_descent(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_integer(doc, "choice", "$"));
  return std::nullopt;
}

Check check_refresh(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_string(doc, "name", true, "$"));
  SKILLOS_CHECK(need_string(doc, "description", false, "$"));
  return std::nullopt;
}

Check check_traversal(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_array(doc, "selected", "$"));
  for (const auto& s : doc["selected"]) {
    if (!s.is_number_integer()) return std::string("$.selected[]: expected integer");
  }
  return std::nullopt;
}

Check check_prune(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_array(doc, "items", "$"));
  for (const auto& it : doc["items"]) {
    SKILLOS_CHECK(need_object(it, "$.items[]"));
    SKILLOS_CHECK(need_string(it, "id", true, "$.items[]"));
    if (!it.contains("keep") || !it["keep"].is_boolean()) {
      return std::string("$.items[].keep: expected boolean");
    }
    SKILLOS_CHECK(need_integer(it, "rank", "$.items[]"));
    SKILLOS_CHECK(optional_string(it, "rationale", "$.items[]"));
  }
  return std::nullopt;
}

Check check_decompose(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_array(doc, "sub_tasks", "$"));
  for (const auto& st : doc["sub_tasks"]) {
    constexpr std::string_view w = "$.sub_tasks[]";
    SKILLOS_CHECK(need_object(st, w));
    SKILLOS_CHECK(need_string(st, "sub_id", true, w));
    SKILLOS_CHECK(need_string(st, "objective", true, w));
    SKILLOS_CHECK(need_string(st, "skill_id", true, w));
    SKILLOS_CHECK(need_array(st, "depends_on", w));
    for (const auto& d : st["depends_on"]) {
      if (!d.is_string()) return std::string("$.sub_tasks[].depends_on[]: expected string");
    }
    SKILLOS_CHECK(need_array(st, "expected_outputs", w));
    for (const auto& eo : st["expected_outputs"]) {
      SKILLOS_CHECK(need_object(eo, "$.sub_tasks[].expected_outputs[]"));
      SKILLOS_CHECK(need_string(eo, "pattern", true, "$.sub_tasks[].expected_outputs[]"));
      SKILLOS_CHECK(optional_string(eo, "purpose", "$.sub_tasks[].expected_outputs[]"));
    }
  }
  return std::nullopt;
}

Check check_node_execute(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_enum(doc, "status", {"succeeded", "failed"}, "$"));
  SKILLOS_CHECK(need_string(doc, "summary", false, "$"));
  if (doc.contains("files")) {
    if (!doc["files"].is_array()) return std::string("$.files: expected array");
    for (const auto& f : doc["files"]) {
      SKILLOS_CHECK(need_object(f, "$.files[]"));
      SKILLOS_CHECK(need_string(f, "path", true, "$.files[]"));
      SKILLOS_CHECK(need_string(f, "content", false, "$.files[]"));
      SKILLOS_CHECK(optional_string(f, "usage_hint", "$.files[]"));
    }
  }
  return std::nullopt;
}

Check check_judge(const Json& doc) {
  SKILLOS_CHECK(need_object(doc, "$"));
  SKILLOS_CHECK(need_enum(doc, "preference", {"first", "second"}, "$"));
  SKILLOS_CHECK(optional_string(doc, "rationale", "$"));
  return std::nullopt;
}

#undef SKILLOS_CHECK

}  // namespace

std::string_view schema_id(RoleTag role) noexcept {
  switch (role) {
    case RoleTag::group_discovery: return "skillos.groups.v1";
    case RoleTag::skill_assignment: return "skillos.assignment.v1";
    case RoleTag::category_descent: return "skillos.choice.v1";
    case RoleTag::category_refresh: return "skillos.category.v1";
    case RoleTag::tree_traversal: return "skillos.selection.v1";
    case RoleTag::prune_rank: return "skillos.ranking.v1";
    case RoleTag::decompose: return "skillos.decomposition.v1";
    case RoleTag::node_execute: return "skillos.node_report.v1";
    case RoleTag::judge: return "skillos.verdict.v1";
  }
  return "";
}

std::optional<std::string> validate_response(RoleTag role, const Json& document) {
  switch (role) {
    case RoleTag::group_discovery: return check_groups(document);
    case RoleTag::skill_assignment: return check_assignment(document);
    case RoleTag::category_descent: return check_descent(document);
    case RoleTag::category_refresh: return check_refresh(document);
    case RoleTag::tree_traversal: return check_traversal(document);
    case RoleTag::prune_rank: return check_prune(document);
    case RoleTag::decompose: return check_decompose(document);
    case RoleTag::node_execute: return check_node_execute(document);
    case RoleTag::judge: return check_judge(document);
  }
  return std::string("unknown role");
}

std::string_view role_instructions(RoleTag role) noexcept {
  switch (role) {
    case RoleTag::group_discovery:
      return "You organize a collection of agent skills into categories. The request lists the "
             "skills of one category node and a target range [target_min, target_max]. Propose "
             "that many child categories that together cover every skill with little overlap. "
             "Reply with JSON {\"groups\":[{\"name\":str,\"description\":str}]}.";
    case RoleTag::skill_assignment:
      return "You place agent skills into categories. For every skill in the request choose the "
             "single best group by its zero-based index. Reply with JSON "
             "{\"assignments\":[{\"skill_id\":str,\"group\":int}]} covering all skills.";
    case RoleTag::category_descent:
      return "Choose the option (zero-based index) that best fits the given skill. Reply with "
             "JSON {\"choice\":int}.";
    case RoleTag::category_refresh:
      return "A category's membership changed. Write an updated concise name and a one-sentence "
             "description that covers all listed member skills. Reply with JSON "
             "{\"name\":str,\"description\":str}.";
    case RoleTag::tree_traversal:
      return "You help find skills for a user task by walking a category tree. Select every "
             "option that could plausibly contain a skill helping with the task; err on the side "
             "of inclusion. Reply with JSON {\"selected\":[int]} using zero-based option indices "
             "(an empty list means none apply).";
    case RoleTag::prune_rank:
      return "Rank candidate skills by relevance to the user task. Drop candidates that are "
             "clearly irrelevant or redundant with a better candidate. Reply with JSON "
             "{\"items\":[{\"id\":str,\"keep\":bool,\"rank\":int,\"rationale\":str}]}; rank 1 is "
             "the most relevant. Use only ids from the request.";
    case RoleTag::decompose:
      return "Break the user task into sub-tasks, each handled by exactly one of the provided "
             "skills, following the orchestration charter in the request. For each sub-task give "
             "its objective, the skill id, the sub_ids it depends on (inputs it consumes), and the "
             "files it is expected to produce. Reply with JSON {\"sub_tasks\":[{\"sub_id\":str,"
             "\"objective\":str,\"skill_id\":str,\"depends_on\":[str],\"expected_outputs\":"
             "[{\"pattern\":str,\"purpose\":str}]}]}.";
    case RoleTag::node_execute:
      return "Carry out the sub-task described in the prompt using the named skill. Reply with "
             "JSON {\"status\":\"succeeded\"|\"failed\",\"summary\":str,\"files\":[{\"path\":str,"
             "\"content\":str,\"usage_hint\":str}]} listing every file you produce.";
    case RoleTag::judge:
      return "Two systems attempted the same task. Examine all artifacts from both sides and "
             "decide which result is better considering correctness, completeness, quality and "
             "aesthetics. Reply with JSON {\"preference\":\"first\"|\"second\",\"rationale\":str}.";
  }
  return "";
}

}  // namespace skillos::llm
