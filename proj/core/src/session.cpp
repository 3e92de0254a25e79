#include "skillos/session.hpp"

#include "skillos/error.hpp"

namespace skillos {

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::retrieved: return "retrieved";
    case Stage::shortlist_confirmed: return "shortlist_confirmed";
    case Stage::plans_ready: return "plans_ready";
    case Stage::plan_selected: return "plan_selected";
    case Stage::running: return "running";
    case Stage::done: return "done";
  }
  return "retrieved";
}

SessionFlow::SessionFlow(std::string task_id, bool recipe_offered)
    : task_id_(std::move(task_id)), consent_pending_(recipe_offered) {}

void SessionFlow::require(Stage expected, std::string_view action) const {
  if (stage_ == expected) return;
  const auto msg = std::string(action) + " requires stage " + std::string(to_string(expected)) + ", task " +
                   task_id_ + " is at " + std::string(to_string(stage_));
  throw Error(stage_ > expected ? Errc::conflict : Errc::stage_violation, msg);
}

void SessionFlow::record_consent(bool accept) {
  if (!consent_pending_) {
    throw Error(consent_ ? Errc::conflict : Errc::stage_violation,
                consent_ ? "consent already recorded for task " + task_id_
                         : "no recipe offer is pending for task " + task_id_);
  }
  require(Stage::retrieved, "consent");
  consent_pending_ = false;
  consent_ = accept;
  if (accept) stage_ = Stage::plan_selected;
}

void SessionFlow::confirm_shortlist() {
  if (consent_pending_) throw Error(Errc::stage_violation, "answer the recipe offer for task " + task_id_ + " first");
  require(Stage::retrieved, "shortlist confirmation");
  stage_ = Stage::shortlist_confirmed;
}

void SessionFlow::plans_generated() {
  require(Stage::shortlist_confirmed, "plan generation");
  stage_ = Stage::plans_ready;
}

void SessionFlow::select_plan() {
  require(Stage::plans_ready, "plan selection");
  stage_ = Stage::plan_selected;
}

void SessionFlow::start_run() {
  require(Stage::plan_selected, "run start");
  stage_ = Stage::running;
}

void SessionFlow::finish_run() {
  require(Stage::running, "run completion");
  stage_ = Stage::done;
}

}  // namespace skillos
