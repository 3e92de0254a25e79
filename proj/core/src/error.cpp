#include "skillos/error.hpp"

namespace skillos {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::missing_manifest: return "MissingManifest";
    case Errc::malformed_frontmatter: return "MalformedFrontmatter";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::unknown_skill: return "UnknownSkill";
    case Errc::embedder_failure: return "EmbedderFailure";
    case Errc::transport: return "transport";
    case Errc::schema_violation: return "schema_violation";
    case Errc::refusal: return "refusal";
    case Errc::fixture_miss: return "FixtureMiss";
    case Errc::categorizer_failure: return "CategorizerFailure";
    case Errc::duplicate_skill: return "DuplicateSkill";
    case Errc::invalid_tree: return "InvalidTree";
    case Errc::cyclic_dependency: return "CyclicDependency";
    case Errc::dangling_dependency: return "DanglingDependency";
    case Errc::duplicate_subtask: return "DuplicateSubTask";
    case Errc::empty_decomposition: return "EmptyDecomposition";
    case Errc::invalid_plan: return "InvalidPlan";
    case Errc::no_valid_plan: return "NoValidPlan";
    case Errc::predecessor_not_succeeded: return "PredecessorNotSucceeded";
    case Errc::backend_failure: return "BackendFailure";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::unknown_system: return "UnknownSystem";
    case Errc::category_too_sparse: return "CategoryTooSparse";
    case Errc::converter_failure: return "ConverterFailure";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::io: return "IoError";
    case Errc::stage_violation: return "StageViolation";
    case Errc::not_found: return "NotFound";
    case Errc::conflict: return "Conflict";
  }
  return "Unknown";
}

}  // namespace skillos
