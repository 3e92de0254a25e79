// One line per criterion: PASS/FAIL, id, name, measured detail, wall time.
// --only N runs a single criterion (used by ctest).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <exception>
#include <iostream>
#include <string>

#include "criteria.hpp"

using namespace skillos::acceptance;

namespace {

struct Entry {
  int id;
  const char* name;
  double budget_s;  // 0 = no wall-clock bound
  void (*fn)(Check&);
};

constexpr Entry kCriteria[] = {
    {1, "bt-oracle-equivalence", 30.0, criterion_bt_oracle},
    {2, "bt-closed-form", 0.0, criterion_closed_form},
    {3, "consolidation-table", 0.0, criterion_consolidation},
    {4, "tree-invariants", 10.0, criterion_tree_invariants},
    {5, "incremental-insert", 0.0, criterion_incremental_insert},
    {6, "planted-oracle-retrieval", 0.0, criterion_planted_retrieval},
    {7, "dag-law", 0.0, criterion_dag_law},
    {8, "execution-ordering", 0.0, criterion_execution_order},
    {9, "recipe-reuse", 0.0, criterion_recipe_reuse},
    {10, "end-to-end-http", 60.0, criterion_end_to_end},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: skillos_acceptance [--only N]\n";
      return 2;
    }
  }
  int failed = 0;
  int ran = 0;
  for (const auto& e : kCriteria) {
    if (only != 0 && e.id != only) continue;
    ++ran;
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(c);
    } catch (const std::exception& ex) {
      c.require(false, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (e.budget_s > 0.0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "runtime %.2f s exceeds %.0f s", secs, e.budget_s);
      c.require(secs < e.budget_s, buf);
    }
    char line[64];
    std::snprintf(line, sizeof line, "%s %2d %-26s", c.pass ? "PASS" : "FAIL", e.id, e.name);
    std::cout << line << " " << c.detail.str();
    char t[32];
    std::snprintf(t, sizeof t, " [%.2f s]", secs);
    std::cout << t << std::endl;
    if (!c.pass) ++failed;
  }
  if (ran == 0) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
