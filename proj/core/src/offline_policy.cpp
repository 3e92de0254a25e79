#include "skillos/offline_policy.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "skillos/error.hpp"

namespace skillos::llm {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",     "an",   "the",  "and",  "or",   "of",    "for",  "to",   "in",   "on",
      "with",  "from", "by",   "as",   "is",   "are",   "be",   "that", "this", "it",
      "its",   "at",   "into", "using", "use", "via",   "skill", "skills", "also", "covers",
      "about", "such", "your", "you",  "can",  "will",  "than", "their", "them", "all",
  };
  return words;
}

std::string card_text(const Json& card) {
  return card.value("name", std::string()) + ": " + card.value("description", std::string());
}

std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) {
    if (t.size() < 3 || stopwords().contains(t)) continue;
    if (std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> top_tokens(const std::map<std::string, double>& scores, std::size_t n) {
  std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size() && out.size() < n; ++i) out.push_back(v[i].first);
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::size_t argmax_cosine(const Embedding& q, const std::vector<Embedding>& options, double* best_out) {
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const double s = dot(q, options[i]);
    if (s > best_sim + 1e-12) {
      best_sim = s;
      best = i;
    }
  }
  if (best_out) *best_out = best_sim;
  return best;
}

std::string concrete_name(const std::string& pattern) {
  std::string out;
  for (const char c : pattern) {
    if (c == '*') {
      out += "output";
    } else if (c == '?') {
      out += 'x';
    } else if (c == '[' || c == ']') {
      continue;
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

OfflinePolicy::OfflinePolicy(std::shared_ptr<Embedder> embedder) : embedder_(std::move(embedder)) {
  if (!embedder_) throw Error(Errc::invalid_config, "offline policy needs an embedder");
}

void OfflinePolicy::install(ScriptedBackend& backend) const {
  auto self = std::make_shared<OfflinePolicy>(*this);
  for (const auto role : kAllRoles) {
    backend.set_fallback(role, [self, role](const Json& payload) { return self->respond(role, payload); });
  }
}

Json OfflinePolicy::respond(RoleTag role, const Json& payload) const {
  switch (role) {
    case RoleTag::group_discovery: return discover(payload);
    case RoleTag::skill_assignment: return assign(payload);
    case RoleTag::category_descent: return descend(payload);
    case RoleTag::category_refresh: return refresh(payload);
    case RoleTag::tree_traversal: return traverse(payload);
    case RoleTag::prune_rank: return prune(payload);
    case RoleTag::decompose: return decompose(payload);
    case RoleTag::node_execute: return execute(payload);
    case RoleTag::judge: return judge(payload);
  }
  throw Error(Errc::transport, "offline policy: unknown role");
}

Json OfflinePolicy::discover(const Json& payload) const {
  const auto& skills = payload.at("skills");
  const auto n = skills.size();
  const int lo = payload.value("target_min", 2);
  const int hi = payload.value("target_max", 2);
  const int b = payload.value("branching_factor", hi);
  std::size_t k = static_cast<std::size_t>(std::clamp(b, lo, hi));
  k = std::min(k, std::max<std::size_t>(1, n / 2));
  if (k == 0 || n == 0) return {{"groups", Json::array({{{"name", "general"}, {"description", "general"}}})}};

  std::vector<Embedding> vecs;
  std::vector<std::string> ids;
  for (const auto& s : skills) {
    vecs.push_back(embedder_->embed(card_text(s)));
    ids.push_back(s.value("id", std::string()));
  }
  // Farthest-point seeding from the smallest id, then Lloyd iterations.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b2) { return ids[a] < ids[b2]; });
  std::vector<Embedding> centroids{vecs[order.front()]};
  while (centroids.size() < k) {
    std::size_t pick = order.front();
    double pick_sim = 2.0;
    for (const auto i : order) {
      double closest = -2.0;
      for (const auto& c : centroids) closest = std::max(closest, dot(vecs[i], c));
      if (closest < pick_sim - 1e-12) {
        pick_sim = closest;
        pick = i;
      }
    }
    centroids.push_back(vecs[pick]);
  }
  std::vector<std::size_t> label(n, 0);
  for (int iter = 0; iter < 12; ++iter) {
    for (std::size_t i = 0; i < n; ++i) label[i] = argmax_cosine(vecs[i], centroids, nullptr);
    for (std::size_t c = 0; c < k; ++c) {
      Embedding sum(vecs.front().size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != c) continue;
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += vecs[i][d];
        ++count;
      }
      if (count == 0) continue;
      normalize(sum);
      centroids[c] = std::move(sum);
    }
  }

  std::map<std::string, double> node_freq;
  std::vector<std::map<std::string, double>> cluster_freq(k);
  std::vector<std::size_t> cluster_size(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::string> uniq;
    for (auto& t : content_tokens(card_text(skills[i]))) uniq.insert(std::move(t));
    for (const auto& t : uniq) {
      node_freq[t] += 1.0;
      cluster_freq[label[i]][t] += 1.0;
    }
    ++cluster_size[label[i]];
  }
  Json groups = Json::array();
  std::set<std::string> used_names;
  for (std::size_t c = 0; c < k; ++c) {
    if (cluster_size[c] == 0) continue;
    // Tokens shared by the whole node score zero; only what sets the cluster apart is kept.
    std::map<std::string, double> score;
    for (const auto& [t, f] : cluster_freq[c]) {
      const double s = f / static_cast<double>(cluster_size[c]) - node_freq[t] / static_cast<double>(n);
      if (s > 1e-9) score[t] = s;
    }
    if (score.empty()) {
      for (const auto& [t, f] : cluster_freq[c]) score[t] = f;
    }
    const auto top = top_tokens(score, 10);
    std::vector<std::string> head(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(2, top.size())));
    std::string name = head.empty() ? "group" : join(head, " ");
    if (!used_names.insert(name).second) {
      name += " " + std::to_string(c + 1);
      used_names.insert(name);
    }
    groups.push_back({{"name", name}, {"description", "Skills for " + join(top, ", ")}});
  }
  return {{"groups", std::move(groups)}};
}

Json OfflinePolicy::assign(const Json& payload) const {
  std::vector<Embedding> group_vecs;
  for (const auto& g : payload.at("groups")) group_vecs.push_back(embedder_->embed(card_text(g)));
  Json assignments = Json::array();
  for (const auto& s : payload.at("skills")) {
    double best = 0.0;
    const auto g = argmax_cosine(embedder_->embed(card_text(s)), group_vecs, &best);
    if (best <= 0.0) continue;
    assignments.push_back({{"skill_id", s.at("id")}, {"group", g}});
  }
  return {{"assignments", std::move(assignments)}};
}

Json OfflinePolicy::descend(const Json& payload) const {
  std::vector<Embedding> vecs;
  for (const auto& o : payload.at("options")) vecs.push_back(embedder_->embed(card_text(o)));
  const auto q = embedder_->embed(card_text(payload.at("skill")));
  return {{"choice", argmax_cosine(q, vecs, nullptr)}};
}

Json OfflinePolicy::refresh(const Json& payload) const {
  const auto& category = payload.at("category");
  auto base = category.value("description", std::string());
  if (const auto pos = base.find(" [covers: "); pos != std::string::npos) base.erase(pos);
  std::map<std::string, double> freq;
  for (const auto& m : payload.value("members", Json::array())) {
    for (const auto& t : content_tokens(card_text(m))) freq[t] += 1.0;
  }
  if (payload.contains("new_skill")) {
    for (const auto& t : content_tokens(card_text(payload["new_skill"]))) freq[t] += 0.5;
  }
  const auto top = top_tokens(freq, 4);
  std::string description = base;
  if (!top.empty()) description += " [covers: " + join(top, ", ") + "]";
  if (description.empty()) description = "Category";
  return {{"name", category.value("name", std::string("category"))}, {"description", description}};
}

Json OfflinePolicy::traverse(const Json& payload) const {
  const auto q = embedder_->embed(payload.value("task", std::string("task")));
  std::vector<double> sims;
  for (const auto& o : payload.at("options")) sims.push_back(dot(q, embedder_->embed(card_text(o))));
  const double best = sims.empty() ? 0.0 : *std::max_element(sims.begin(), sims.end());
  Json selected = Json::array();
  if (best > 0.0) {
    for (std::size_t i = 0; i < sims.size(); ++i) {
      if (sims[i] > 0.0 && sims[i] >= 0.5 * best) selected.push_back(i);
    }
  }
  return {{"selected", std::move(selected)}};
}

Json OfflinePolicy::prune(const Json& payload) const {
  const auto q = embedder_->embed(payload.value("task", std::string("task")));
  struct Scored {
    std::string id;
    double sim;
  };
  std::vector<Scored> scored;
  for (const auto& c : payload.at("candidates")) {
    scored.push_back({c.at("id").get<std::string>(), dot(q, embedder_->embed(card_text(c)))});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
  Json items = Json::array();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cosine %.3f to the task", scored[i].sim);
    items.push_back({{"id", scored[i].id}, {"keep", scored[i].sim > 0.0}, {"rank", i + 1}, {"rationale", buf}});
  }
  return {{"items", std::move(items)}};
}

Json OfflinePolicy::decompose(const Json& payload) const {
  const auto strategy = payload.value("strategy", std::string("SimplicityFirst"));
  const auto task = payload.value("task", std::string());
  std::vector<Json> skills(payload.at("skills").begin(), payload.at("skills").end());
  if (skills.empty()) return {{"sub_tasks", Json::array()}};
  auto make = [](const std::string& sub_id, const Json& skill, const std::string& objective,
                 std::vector<std::string> deps) {
    return Json{
        {"sub_id", sub_id},
        {"skill_id", skill.at("id")},
        {"objective", objective},
        {"depends_on", std::move(deps)},
        {"expected_outputs", Json::array({{{"pattern", sub_id + "_*.md"}, {"purpose", "notes from " + sub_id}}})},
    };
  };
  auto name_of = [](const Json& s) { return s.value("name", s.value("id", std::string())); };
  Json out = Json::array();
  const auto n = skills.size();
  if (strategy == "QualityFirst") {
    out.push_back(make("prepare", skills.front(),
                       "Gather requirements and reference material for: " + task, {}));
    std::vector<std::string> mids;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "step" + std::to_string(i + 1);
      out.push_back(make(id, skills[i], "Apply " + name_of(skills[i]) + " to produce its part of: " + task,
                         {"prepare"}));
      mids.push_back(id);
    }
    out.push_back(make("refine", skills.back(), "Review and polish the combined deliverables for: " + task, mids));
  } else if (strategy == "EfficiencyFirst") {
    std::vector<std::string> parallel;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto id = "part" + std::to_string(i + 1);
      out.push_back(make(id, skills[i], "Independently apply " + name_of(skills[i]) + " for: " + task, {}));
      parallel.push_back(id);
    }
    out.push_back(make("assemble", skills.back(),
                       "Apply " + name_of(skills.back()) + " and assemble the final deliverable for: " + task,
                       parallel));
  } else {
    std::vector<std::string> prev;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "stage" + std::to_string(i + 1);
      out.push_back(make(id, skills[i], "Apply " + name_of(skills[i]) + " for: " + task, prev));
      prev = {id};
    }
  }
  return {{"sub_tasks", std::move(out)}};
}

Json OfflinePolicy::execute(const Json& payload) const {
  std::string sub_id = payload.value("sub_id", std::string("node"));
  std::string objective;
  std::string task;
  Json expected = Json::array();
  std::vector<std::string> inputs;
  for (const auto& section : payload.value("sections", Json::array())) {
    const auto kind = section.value("kind", std::string());
    if (kind == "task") task = section.value("text", std::string());
    if (kind == "objective") objective = section.value("text", std::string());
    if (kind == "expected_outputs") expected = section.value("items", Json::array());
    if (kind == "upstream_artifacts") {
      for (const auto& a : section.value("items", Json::array())) inputs.push_back(a.value("path", std::string()));
    }
  }
  Json files = Json::array();
  for (const auto& e : expected) {
    const auto pattern = e.value("pattern", std::string("*.md"));
    std::string content = "# " + objective + "\n\nTask: " + task + "\n";
    if (!inputs.empty()) {
      content += "\nInputs:\n";
      for (const auto& p : inputs) content += "- " + p + "\n";
    }
    files.push_back({{"path", concrete_name(pattern)},
                     {"content", content},
                     {"usage_hint", e.value("purpose", std::string("output of ") + sub_id)}});
  }
  return {{"status", "succeeded"}, {"summary", "completed " + sub_id}, {"files", std::move(files)}};
}

Json OfflinePolicy::judge(const Json& payload) const {
  auto weight = [](const Json& side) {
    double w = 0.0;
    std::string digest;
    for (const auto& a : side.value("artifacts", Json::array())) {
      const auto kind = a.value("kind", std::string());
      if (kind == "text") {
        w += static_cast<double>(a.value("text", std::string()).size());
      } else if (kind == "image_set") {
        w += 500.0 * static_cast<double>(a.value("images", Json::array()).size());
      } else {
        w += 10.0;
      }
      digest += a.dump();
    }
    return std::pair{w, fnv1a64(digest)};
  };
  const auto first = weight(payload.at("first"));
  const auto second = weight(payload.at("second"));
  const bool prefer_second = second > first;
  return {{"preference", prefer_second ? "second" : "first"},
          {"rationale", prefer_second ? "second side delivers more complete artifacts"
                                      : "first side delivers at least as complete artifacts"}};
}

}  // namespace skillos::llm
