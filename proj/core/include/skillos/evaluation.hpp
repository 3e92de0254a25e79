#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skillos/bradley_terry.hpp"
#include "skillos/gateway.hpp"
#include "skillos/media.hpp"

namespace skillos::eval {

namespace fs = std::filesystem;

enum class RenderKind { text, image_set, unrenderable };
std::string_view to_string(RenderKind kind) noexcept;

struct RenderedArtifact {
  std::string source;  // path relative to the converted directory
  RenderKind kind = RenderKind::unrenderable;
  std::string text;
  std::vector<std::string> images;
  Json metadata = Json::object();

  Json to_json() const;
};

struct RenderOptions {
  std::size_t l_max = 20000;
  int video_frames = 8;
  int image_long_edge = 1024;
  fs::path scratch_dir;  // converter output; a temp directory when empty
};

/// Media kind -> shell command template. Placeholders: {input}, {output_dir},
/// {frames}, {long_edge}. A converter writes .png/.jpg/.jpeg/.webp files
/// into {output_dir} (taken in name order) and may add a metadata.json
/// object; a non-zero exit or no images marks the file unrenderable.
struct ConverterRegistry {
  std::map<MediaKind, std::string> commands;

  static ConverterRegistry from_json(const Json& doc);
  Json to_json() const;
};

inline constexpr std::string_view kTruncationMarker = "\n[... truncated]";

/// Cuts to at most l_max bytes including the marker, on a UTF-8 boundary.
std::string truncate_text(std::string text, std::size_t l_max);

/// Renders every regular file under dir (recursively, name order). Converter
/// failures are not fatal: the file is reported unrenderable.
std::vector<RenderedArtifact> convert_artifacts(const fs::path& dir, const ConverterRegistry& converters,
                                                const RenderOptions& options = {});

enum class Preference { prefer_first, prefer_second, error };
std::string_view to_string(Preference p) noexcept;

struct Verdict {
  Preference value = Preference::error;
  std::string rationale;
  std::string error_kind;  // set for errors: transport, refusal, ..., no_artifacts

  static Verdict first(std::string why = {}) { return {Preference::prefer_first, std::move(why), {}}; }
  static Verdict second(std::string why = {}) { return {Preference::prefer_second, std::move(why), {}}; }
  static Verdict failed(std::string kind) { return {Preference::error, {}, std::move(kind)}; }
};

/// One judge call showing the task, then side a, then side b. Never throws.
Verdict judge_pair(const std::vector<RenderedArtifact>& a, const std::vector<RenderedArtifact>& b,
                   std::string_view task, const llm::Gateway& gateway);

enum class Result { i_wins, j_wins, tie };
std::string_view to_string(Result r) noexcept;

struct Outcome {
  std::string task_id;
  std::string system_i;
  std::string system_j;
  Result result = Result::tie;

  Json to_json() const;
  static Outcome from_json(const Json& doc);
};

/// forward judged (i, j); reversed judged (j, i).
Result consolidate(const Verdict& forward, const Verdict& reversed);

Outcome debiased_compare(const std::vector<RenderedArtifact>& outputs_i,
                         const std::vector<RenderedArtifact>& outputs_j, std::string_view task,
                         const llm::Gateway& gateway, std::string task_id, std::string system_i,
                         std::string system_j);

struct WinMatrix {
  std::vector<std::string> systems;
  bt::Matrix w;

  std::optional<std::size_t> index_of(std::string_view system) const;
  std::string to_csv() const;
  static WinMatrix from_csv(std::string_view csv);
  Json to_json() const;
};

/// i_wins adds 1 to W_ij; a tie adds 0.5 to W_ij and W_ji. Throws UnknownSystem.
WinMatrix aggregate(const std::vector<Outcome>& outcomes, const std::vector<std::string>& systems);

struct BTScores {
  std::vector<std::string> systems;
  std::vector<double> beta;
  std::vector<double> score;
  std::size_t iterations = 0;
  double final_delta = 0.0;

  /// {systems, beta, score, iterations, final_delta}
  Json to_json() const;
};

BTScores rank(const WinMatrix& matrix, const bt::FitOptions& options = {});

/// Independent aggregate + fit + rescale per category. Throws
/// CategoryTooSparse for a labelled category without outcomes.
std::map<std::string, BTScores> per_category_scores(const std::vector<Outcome>& outcomes,
                                                    const std::map<std::string, std::string>& category_of_task,
                                                    const std::vector<std::string>& systems,
                                                    const bt::FitOptions& options = {});

struct EvalTask {
  std::string task_id;
  std::string text;
  std::string category;

  static EvalTask from_json(const Json& doc);
};

/// System outputs live in <root>/<task_id>/. All C(N,2) pairs are compared on
/// every task both systems answered; missing cells are skipped.
std::vector<Outcome> compare_systems(const std::vector<std::pair<std::string, fs::path>>& systems,
                                     const std::vector<EvalTask>& tasks, const llm::Gateway& gateway,
                                     const ConverterRegistry& converters, const RenderOptions& options = {});

std::vector<Outcome> read_outcomes(const fs::path& path);
void write_outcomes(const fs::path& path, const std::vector<Outcome>& outcomes);

}  // namespace skillos::eval
