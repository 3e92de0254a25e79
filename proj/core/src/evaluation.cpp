#include "skillos/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <set>
#include <sstream>

#include "skillos/error.hpp"
#include "skillos/executor.hpp"

namespace skillos::eval {

std::string_view to_string(RenderKind kind) noexcept {
  switch (kind) {
    case RenderKind::text: return "text";
    case RenderKind::image_set: return "image_set";
    case RenderKind::unrenderable: return "unrenderable";
  }
  return "unrenderable";
}

Json RenderedArtifact::to_json() const {
  Json j = {{"source", source}, {"kind", std::string(eval::to_string(kind))}, {"metadata", metadata}};
  if (kind == RenderKind::text) j["text"] = text;
  if (kind == RenderKind::image_set) j["images"] = images;
  return j;
}

ConverterRegistry ConverterRegistry::from_json(const Json& doc) {
  ConverterRegistry reg;
  if (doc.is_null()) return reg;
  if (!doc.is_object()) throw Error(Errc::invalid_config, "converters must be an object of kind -> command");
  for (const auto& [kind, cmd] : doc.items()) {
    const auto k = parse_media_kind(kind);
    if (!k) throw Error(Errc::invalid_config, "unknown media kind in converters: " + kind);
    if (!cmd.is_string() || cmd.get<std::string>().empty()) {
      throw Error(Errc::invalid_config, "converter for " + kind + " must be a command string");
    }
    reg.commands[*k] = cmd.get<std::string>();
  }
  return reg;
}

Json ConverterRegistry::to_json() const {
  Json j = Json::object();
  for (const auto& [k, cmd] : commands) j[std::string(skillos::to_string(k))] = cmd;
  return j;
}

std::string truncate_text(std::string text, std::size_t l_max) {
  if (text.size() <= l_max) return text;
  const std::size_t marker = kTruncationMarker.size();
  std::size_t keep = l_max > marker ? l_max - marker : l_max;
  while (keep > 0 && (static_cast<unsigned char>(text[keep]) & 0xC0) == 0x80) --keep;
  text.resize(keep);
  if (l_max > marker) text += kTruncationMarker;
  return text;
}

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".webp";
}

RenderedArtifact unrenderable(std::string source, std::uintmax_t size, std::string why) {
  RenderedArtifact r;
  r.source = std::move(source);
  r.kind = RenderKind::unrenderable;
  r.metadata = {{"filename", fs::path(r.source).filename().string()}, {"size", size}};
  if (!why.empty()) r.metadata["reason"] = std::move(why);
  return r;
}

RenderedArtifact run_converter(const std::string& templ, const fs::path& input, const std::string& rel,
                               const fs::path& out_dir, const RenderOptions& options) {
  fs::create_directories(out_dir);
  const auto cmd = executor::expand_command(templ, {{"input", input.string()},
                                                    {"output_dir", out_dir.string()},
                                                    {"frames", std::to_string(options.video_frames)},
                                                    {"long_edge", std::to_string(options.image_long_edge)}});
  const int status = std::system(("(" + cmd + ") >/dev/null 2>&1").c_str());
  if (status != 0) throw Error(Errc::converter_failure, "converter exited with status " + std::to_string(status));
  RenderedArtifact r;
  r.source = rel;
  r.kind = RenderKind::image_set;
  for (const auto& e : fs::directory_iterator(out_dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) r.images.push_back(e.path().string());
  }
  std::sort(r.images.begin(), r.images.end());
  if (r.images.empty()) throw Error(Errc::converter_failure, "converter produced no images");
  const auto meta = out_dir / "metadata.json";
  if (fs::exists(meta)) {
    try {
      r.metadata = read_json_file(meta);
    } catch (const Error&) {
      throw Error(Errc::converter_failure, "converter wrote malformed metadata.json");
    }
    if (!r.metadata.is_object()) throw Error(Errc::converter_failure, "converter metadata must be an object");
  }
  return r;
}

std::string safe_component(const std::string& rel) {
  std::string out;
  for (const char c : rel) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_';
  return out;
}

}  // namespace

std::vector<RenderedArtifact> convert_artifacts(const fs::path& dir, const ConverterRegistry& converters,
                                                const RenderOptions& options) {
  if (!fs::is_directory(dir)) throw Error(Errc::io, "artifact directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  fs::path scratch = options.scratch_dir;
  if (scratch.empty()) {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    scratch = fs::temp_directory_path() /
              ("skillos-render-" + std::to_string(fnv1a64(fs::absolute(dir).string() + std::to_string(stamp))));
  }

  std::vector<RenderedArtifact> out;
  std::size_t index = 0;
  for (const auto& path : files) {
    const auto rel = fs::relative(path, dir).generic_string();
    const auto kind = classify_media(path);
    const auto size = fs::file_size(path);
    if (kind == MediaKind::text || kind == MediaKind::data) {
      RenderedArtifact r;
      r.source = rel;
      r.kind = RenderKind::text;
      const auto full = read_text_file(path);
      r.text = truncate_text(full, options.l_max);
      r.metadata = {{"size", size}};
      if (r.text.size() < full.size()) r.metadata["truncated"] = true;
      out.push_back(std::move(r));
    } else if (const auto it = converters.commands.find(kind); it != converters.commands.end()) {
      const auto out_dir = scratch / (std::to_string(index) + "-" + safe_component(rel));
      try {
        out.push_back(run_converter(it->second, path, rel, out_dir, options));
      } catch (const Error& e) {
        out.push_back(unrenderable(rel, size, std::string("ConverterFailure: ") + e.what()));
      }
    } else {
      out.push_back(unrenderable(rel, size, {}));
    }
    ++index;
  }
  return out;
}

std::string_view to_string(Preference p) noexcept {
  switch (p) {
    case Preference::prefer_first: return "PreferFirst";
    case Preference::prefer_second: return "PreferSecond";
    case Preference::error: return "Error";
  }
  return "Error";
}

Verdict judge_pair(const std::vector<RenderedArtifact>& a, const std::vector<RenderedArtifact>& b,
                   std::string_view task, const llm::Gateway& gateway) {
  if (a.empty() && b.empty()) return Verdict::failed("no_artifacts");
  auto side = [](const std::vector<RenderedArtifact>& arts) {
    Json list = Json::array();
    for (const auto& r : arts) list.push_back(r.to_json());
    return Json{{"artifacts", std::move(list)}};
  };
  Json payload = {{"task", std::string(task)}, {"first", side(a)}, {"second", side(b)}};
  try {
    const auto res = gateway.complete({llm::RoleTag::judge, std::move(payload)});
    if (!res.ok) return Verdict::failed(std::string(llm::to_string(res.error_kind)));
    const auto pref = res.document.at("preference").get<std::string>();
    const auto why = res.document.value("rationale", std::string());
    return pref == "first" ? Verdict::first(why) : Verdict::second(why);
  } catch (const std::exception&) {
    return Verdict::failed("transport");
  }
}

std::string_view to_string(Result r) noexcept {
  switch (r) {
    case Result::i_wins: return "i_wins";
    case Result::j_wins: return "j_wins";
    case Result::tie: return "tie";
  }
  return "tie";
}

Json Outcome::to_json() const {
  return {{"task_id", task_id}, {"system_i", system_i}, {"system_j", system_j},
          {"result", std::string(eval::to_string(result))}};
}

Outcome Outcome::from_json(const Json& doc) {
  Outcome o;
  try {
    o.task_id = doc.at("task_id").get<std::string>();
    o.system_i = doc.at("system_i").get<std::string>();
    o.system_j = doc.at("system_j").get<std::string>();
    const auto r = doc.at("result").get<std::string>();
    if (r == "i_wins") o.result = Result::i_wins;
    else if (r == "j_wins") o.result = Result::j_wins;
    else if (r == "tie") o.result = Result::tie;
    else throw Error(Errc::io, "unknown outcome result '" + r + "'");
  } catch (const Json::exception& e) {
    throw Error(Errc::io, std::string("malformed outcome: ") + e.what());
  }
  if (o.system_i == o.system_j) throw Error(Errc::io, "outcome compares " + o.system_i + " with itself");
  return o;
}

Result consolidate(const Verdict& forward, const Verdict& reversed) {
  // Map each verdict to the system it favours: +1 for i, -1 for j, 0 for error.
  auto side = [](const Verdict& v, bool reversed_order) {
    if (v.value == Preference::error) return 0;
    const bool first = v.value == Preference::prefer_first;
    return (first != reversed_order) ? 1 : -1;
  };
  const int a = side(forward, false);
  const int b = side(reversed, true);
  if (a == 0 && b == 0) return Result::tie;
  if (a == 0 || b == 0 || a == b) return (a + b) > 0 ? Result::i_wins : Result::j_wins;
  return Result::tie;
}

Outcome debiased_compare(const std::vector<RenderedArtifact>& outputs_i,
                         const std::vector<RenderedArtifact>& outputs_j, std::string_view task,
                         const llm::Gateway& gateway, std::string task_id, std::string system_i,
                         std::string system_j) {
  const auto forward = judge_pair(outputs_i, outputs_j, task, gateway);
  const auto reversed = judge_pair(outputs_j, outputs_i, task, gateway);
  return {std::move(task_id), std::move(system_i), std::move(system_j), consolidate(forward, reversed)};
}

std::optional<std::size_t> WinMatrix::index_of(std::string_view system) const {
  const auto it = std::find(systems.begin(), systems.end(), system);
  if (it == systems.end()) return std::nullopt;
  return static_cast<std::size_t>(it - systems.begin());
}

namespace {

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string WinMatrix::to_csv() const {
  std::string out = "system";
  for (const auto& s : systems) out += "," + s;
  out += "\n";
  for (std::size_t i = 0; i < systems.size(); ++i) {
    out += systems[i];
    for (std::size_t j = 0; j < systems.size(); ++j) out += "," + format_number(w[i][j]);
    out += "\n";
  }
  return out;
}

WinMatrix WinMatrix::from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw Error(Errc::io, "empty win-matrix CSV");
  WinMatrix m;
  m.systems.assign(rows[0].begin() + 1, rows[0].end());
  const auto n = m.systems.size();
  if (rows.size() != n + 1) throw Error(Errc::io, "win-matrix CSV must have one row per system");
  m.w.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != n + 1 || row[0] != m.systems[i]) {
      throw Error(Errc::io, "win-matrix CSV row " + std::to_string(i + 1) + " does not match the header");
    }
    for (std::size_t j = 0; j < n; ++j) {
      double x = 0.0;
      const auto& cell = row[j + 1];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || x < 0.0) {
        throw Error(Errc::io, "bad win-matrix cell '" + cell + "'");
      }
      m.w[i][j] = x;
    }
    if (m.w[i][i] != 0.0) throw Error(Errc::io, "win-matrix diagonal must be zero");
  }
  return m;
}

Json WinMatrix::to_json() const { return {{"systems", systems}, {"w", w}}; }

WinMatrix aggregate(const std::vector<Outcome>& outcomes, const std::vector<std::string>& systems) {
  WinMatrix m;
  m.systems = systems;
  m.w.assign(systems.size(), std::vector<double>(systems.size(), 0.0));
  for (const auto& o : outcomes) {
    const auto i = m.index_of(o.system_i);
    const auto j = m.index_of(o.system_j);
    if (!i) throw Error(Errc::unknown_system, "unknown system '" + o.system_i + "'");
    if (!j) throw Error(Errc::unknown_system, "unknown system '" + o.system_j + "'");
    switch (o.result) {
      case Result::i_wins: m.w[*i][*j] += 1.0; break;
      case Result::j_wins: m.w[*j][*i] += 1.0; break;
      case Result::tie:
        m.w[*i][*j] += 0.5;
        m.w[*j][*i] += 0.5;
        break;
    }
  }
  return m;
}

Json BTScores::to_json() const {
  return {{"systems", systems}, {"beta", beta}, {"score", score}, {"iterations", iterations},
          {"final_delta", final_delta}};
}

BTScores rank(const WinMatrix& matrix, const bt::FitOptions& options) {
  const auto fit = bt::fit_bradley_terry(matrix.w, options);
  return {matrix.systems, fit.beta, bt::rescale(fit.beta), fit.iterations, fit.final_delta};
}

std::map<std::string, BTScores> per_category_scores(const std::vector<Outcome>& outcomes,
                                                    const std::map<std::string, std::string>& category_of_task,
                                                    const std::vector<std::string>& systems,
                                                    const bt::FitOptions& options) {
  std::map<std::string, std::vector<Outcome>> parts;
  for (const auto& [task, cat] : category_of_task) parts[cat];
  for (const auto& o : outcomes) {
    const auto it = category_of_task.find(o.task_id);
    if (it == category_of_task.end()) {
      throw Error(Errc::not_found, "task '" + o.task_id + "' has no category label");
    }
    parts[it->second].push_back(o);
  }
  std::map<std::string, BTScores> out;
  for (const auto& [cat, list] : parts) {
    if (list.empty()) throw Error(Errc::category_too_sparse, "category '" + cat + "' has no outcomes");
    out.emplace(cat, rank(aggregate(list, systems), options));
  }
  return out;
}

EvalTask EvalTask::from_json(const Json& doc) {
  EvalTask t;
  try {
    t.task_id = doc.at("task_id").get<std::string>();
    t.text = doc.value("task", doc.value("text", std::string()));
    t.category = doc.value("category", std::string());
  } catch (const Json::exception& e) {
    throw Error(Errc::io, std::string("malformed evaluation task: ") + e.what());
  }
  return t;
}

std::vector<Outcome> compare_systems(const std::vector<std::pair<std::string, fs::path>>& systems,
                                     const std::vector<EvalTask>& tasks, const llm::Gateway& gateway,
                                     const ConverterRegistry& converters, const RenderOptions& options) {
  std::set<std::string> names;
  for (const auto& [name, root] : systems) {
    if (!names.insert(name).second) throw Error(Errc::invalid_config, "duplicate system '" + name + "'");
  }
  std::vector<Outcome> out;
  for (const auto& task : tasks) {
    std::vector<std::optional<std::vector<RenderedArtifact>>> rendered(systems.size());
    for (std::size_t s = 0; s < systems.size(); ++s) {
      const auto dir = systems[s].second / task.task_id;
      if (fs::is_directory(dir)) rendered[s] = convert_artifacts(dir, converters, options);
    }
    for (std::size_t i = 0; i < systems.size(); ++i) {
      for (std::size_t j = i + 1; j < systems.size(); ++j) {
        if (!rendered[i] || !rendered[j]) continue;
        out.push_back(debiased_compare(*rendered[i], *rendered[j], task.text, gateway, task.task_id,
                                       systems[i].first, systems[j].first));
      }
    }
  }
  return out;
}

std::vector<Outcome> read_outcomes(const fs::path& path) {
  std::vector<Outcome> out;
  for (const auto& doc : read_jsonl_file(path)) out.push_back(Outcome::from_json(doc));
  return out;
}

void write_outcomes(const fs::path& path, const std::vector<Outcome>& outcomes) {
  std::vector<Json> docs;
  for (const auto& o : outcomes) docs.push_back(o.to_json());
  write_jsonl_file(path, docs);
}

}  // namespace skillos::eval
