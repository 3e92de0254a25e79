#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skillos {

enum class Errc {
  // skill registry
  missing_manifest,
  malformed_frontmatter,
  duplicate_id,
  unknown_skill,
  embedder_failure,
  // gateway
  transport,
  schema_violation,
  refusal,
  fixture_miss,
  // capability tree
  categorizer_failure,
  duplicate_skill,
  invalid_tree,
  // orchestration / execution
  cyclic_dependency,
  dangling_dependency,
  duplicate_subtask,
  empty_decomposition,
  invalid_plan,
  no_valid_plan,
  predecessor_not_succeeded,
  backend_failure,
  // evaluation
  non_convergence,
  unknown_system,
  category_too_sparse,
  converter_failure,
  // application
  invalid_config,
  io,
  stage_violation,
  not_found,
  conflict,
};

std::string_view to_string(Errc code) noexcept;

/// Domain error carrying a machine-readable code. Every failure the library
/// reports to callers is one of these.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace skillos
