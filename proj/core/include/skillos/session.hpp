#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace skillos {

enum class Stage { retrieved, shortlist_confirmed, plans_ready, plan_selected, running, done };

std::string_view to_string(Stage s) noexcept;

/// Per-task stage machine around the human decision points. Stages only move
/// forward. A transition attempted too early is StageViolation; repeating a
/// decision that was already made is Conflict.
class SessionFlow {
 public:
  SessionFlow(std::string task_id, bool recipe_offered);

  const std::string& task_id() const noexcept { return task_id_; }
  Stage stage() const noexcept { return stage_; }
  bool consent_pending() const noexcept { return consent_pending_; }
  /// nullopt until the user answers a recipe offer.
  std::optional<bool> consent() const noexcept { return consent_; }

  /// accept jumps retrieved -> plan_selected; decline keeps retrieved.
  void record_consent(bool accept);
  void confirm_shortlist();
  void plans_generated();
  void select_plan();
  void start_run();
  void finish_run();

 private:
  void require(Stage expected, std::string_view action) const;

  std::string task_id_;
  Stage stage_ = Stage::retrieved;
  bool consent_pending_;
  std::optional<bool> consent_;
};

}  // namespace skillos
