#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "skillos/bradley_terry.hpp"
#include "skillos/evaluation.hpp"
#include "skillos/gateway.hpp"

namespace skillos::acceptance {

namespace {

using bt::Matrix;

// Log-likelihood of counts w at strengths b, written out directly.
double oracle_loglik(const Matrix& w, const std::vector<double>& b) {
  double ll = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (i == j) continue;
      ll += w[i][j] * (b[i] - std::log(std::exp(b[i]) + std::exp(b[j])));
    }
  }
  return ll;
}

// Solves A x = y by Gaussian elimination with partial pivoting.
std::vector<double> solve(Matrix a, std::vector<double> y) {
  const auto n = y.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(y[col], y[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      y[r] -= f * y[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Damped Newton ascent on the smoothed likelihood with the last strength
// pinned at 0, then centred. Independent of the MM code path.
std::vector<double> oracle_mle(const Matrix& raw, double alpha) {
  const auto n = raw.size();
  Matrix w = raw;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) w[i][j] += alpha;
    }
  }
  std::vector<double> b(n, 0.0);
  const auto m = n - 1;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> g(m, 0.0);
    Matrix h(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double nij = w[i][j] + w[j][i];
        const double p = 1.0 / (1.0 + std::exp(b[j] - b[i]));
        const double gi = w[i][j] - nij * p;
        const double hv = nij * p * (1.0 - p);
        if (i < m) {
          g[i] += gi;
          h[i][i] += hv;
        }
        if (j < m) {
          g[j] -= gi;
          h[j][j] += hv;
        }
        if (i < m && j < m) {
          h[i][j] -= hv;
          h[j][i] -= hv;
        }
      }
    }
    double gnorm = 0.0;
    for (const double v : g) gnorm = std::max(gnorm, std::abs(v));
    if (gnorm < 1e-13) break;
    const auto step = solve(h, g);  // h is the negated Hessian
    double t = 1.0;
    const double base = oracle_loglik(w, b);
    while (t > 1e-8) {
      auto trial = b;
      for (std::size_t i = 0; i < m; ++i) trial[i] += t * step[i];
      if (oracle_loglik(w, trial) >= base - 1e-15) {
        b = std::move(trial);
        break;
      }
      t *= 0.5;
    }
  }
  double mean = 0.0;
  for (const double v : b) mean += v;
  mean /= static_cast<double>(n);
  for (auto& v : b) v -= mean;
  return b;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t n, int hi) {
  std::uniform_int_distribution<int> cell(0, hi);
  Matrix w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) w[i][j] = cell(rng);
    }
  }
  return w;
}

}  // namespace

void criterion_bt_oracle(Check& c) {
  std::mt19937_64 rng(0xB7B7);
  std::uniform_int_distribution<std::size_t> size(2, 5);
  double worst = 0.0;
  double worst_drop = 0.0;
  std::size_t max_sweeps = 0;
  for (int k = 0; k < 100; ++k) {
    const auto w = random_matrix(rng, size(rng), 10);
    const auto ws = bt::smooth(w, 1.0);
    double prev = oracle_loglik(ws, std::vector<double>(w.size(), 0.0));
    bool monotone = true;
    bt::FitOptions opt;
    opt.on_sweep = [&](std::size_t, const std::vector<double>& beta) {
      const double ll = oracle_loglik(ws, beta);
      const double drop = prev - ll;
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-9 * std::max(1.0, std::abs(prev))) monotone = false;
      prev = ll;
    };
    const auto fit = bt::fit_bradley_terry(w, opt);
    max_sweeps = std::max(max_sweeps, fit.iterations);
    const auto ref = oracle_mle(w, 1.0);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - fit.beta[i]));
    c.require(monotone, "log-likelihood decreased during a sweep on matrix " + std::to_string(k));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "100 matrices, max|beta_mm - beta_newton| = %.2e (tol 1e-4), "
                "largest per-sweep loglik drop %.1e, max sweeps %zu", worst, worst_drop, max_sweeps);
  c.require(worst < 1e-4, buf);
  if (c.pass) c.detail << buf;
}

void criterion_closed_form(Check& c) {
  const double expect = 0.5 * std::log(2.0);
  const auto fit = bt::fit_bradley_terry({{0, 3}, {1, 0}});
  const auto s = bt::rescale(fit.beta);
  c.require(std::abs(fit.beta[0] - expect) < 1e-6 && std::abs(fit.beta[1] + expect) < 1e-6,
            "beta = (" + std::to_string(fit.beta[0]) + ", " + std::to_string(fit.beta[1]) + ")");
  c.require(std::abs(s[0] - 100.0) < 1e-6 && std::abs(s[1]) < 1e-6, "scores not (100, 0)");

  // Same through the win-matrix path used by ranking.
  eval::WinMatrix m{{"a", "b"}, {{0, 3}, {1, 0}}};
  const auto r = eval::rank(m);
  c.require(std::abs(r.score[0] - 100.0) < 1e-6 && std::abs(r.score[1]) < 1e-6, "rank() scores not (100, 0)");

  std::mt19937_64 rng(7);
  int symmetric = 0;
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int rep = 0; rep < 4; ++rep) {
      auto w = random_matrix(rng, n, rep == 0 ? 0 : 10);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) w[i][j] = w[j][i];
      }
      const auto sc = bt::rescale(bt::fit_bradley_terry(w).beta);
      for (const double v : sc) c.require(std::abs(v - 50.0) < 1e-6, "symmetric matrix scored " + std::to_string(v));
      ++symmetric;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "beta = (%+.6f, %+.6f), scores (%.6f, %.6f); %d symmetric matrices all 50",
                fit.beta[0], fit.beta[1], s[0], s[1], symmetric);
  if (c.pass) c.detail << buf;
}

namespace {

enum class V { i_side, j_side, err };

// Judge stub: answers by which system's artifact is shown first.
class TableJudge final : public llm::ChatBackend {
 public:
  TableJudge(V forward, V reversed) : forward_(forward), reversed_(reversed) {}

  llm::ChatResult complete(const llm::ChatCall& call) override {
    const auto first = call.payload.at("first").at("artifacts").at(0).value("text", std::string());
    const bool is_forward = first == "output of i";
    const V v = is_forward ? forward_ : reversed_;
    if (v == V::err) return llm::ChatResult::failure(llm::ErrorKind::refusal, "declined");
    // The side holding i's output is "first" in the forward call only.
    const bool pick_first = (v == V::i_side) == is_forward;
    return llm::ChatResult::success({{"preference", pick_first ? "first" : "second"}, {"rationale", "table"}});
  }

 private:
  V forward_;
  V reversed_;
};

eval::RenderedArtifact text_artifact(std::string text) {
  eval::RenderedArtifact a;
  a.source = "out.txt";
  a.kind = eval::RenderKind::text;
  a.text = std::move(text);
  return a;
}

}  // namespace

void criterion_consolidation(Check& c) {
  using eval::Result;
  struct Row {
    V forward;
    V reversed;
    Result expect;
  };
  // Rows are (forward judgment, reversed judgment) in terms of the system preferred.
  const Row table[] = {
      {V::i_side, V::i_side, Result::i_wins}, {V::i_side, V::j_side, Result::tie},
      {V::i_side, V::err, Result::i_wins},    {V::j_side, V::i_side, Result::tie},
      {V::j_side, V::j_side, Result::j_wins}, {V::j_side, V::err, Result::j_wins},
      {V::err, V::i_side, Result::i_wins},    {V::err, V::j_side, Result::j_wins},
      {V::err, V::err, Result::tie},
  };
  const std::vector<eval::RenderedArtifact> out_i{text_artifact("output of i")};
  const std::vector<eval::RenderedArtifact> out_j{text_artifact("output of j")};
  auto embedder = std::make_shared<llm::HashingEmbedder>();
  int rows = 0;
  for (const auto& row : table) {
    llm::Gateway gw(std::make_shared<TableJudge>(row.forward, row.reversed), embedder);
    const auto o = eval::debiased_compare(out_i, out_j, "task", gw, "t", "i", "j");
    c.require(o.result == row.expect, "row " + std::to_string(rows) + " consolidated to " +
                                          std::string(eval::to_string(o.result)));
    // Same table through consolidate() directly with verdicts in presentation terms.
    auto verdict = [](V v, bool forward) {
      if (v == V::err) return eval::Verdict::failed("refusal");
      return ((v == V::i_side) == forward) ? eval::Verdict::first() : eval::Verdict::second();
    };
    c.require(eval::consolidate(verdict(row.forward, true), verdict(row.reversed, false)) == row.expect,
              "consolidate() disagrees on row " + std::to_string(rows));
    ++rows;
  }

  // Tie aggregation and per-pair conservation on random outcomes.
  const std::vector<std::string> systems{"s0", "s1", "s2", "s3"};
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_int_distribution<int> res(0, 2);
  std::vector<eval::Outcome> outcomes;
  std::map<std::pair<int, int>, int> played;
  std::map<std::pair<int, int>, double> tally;
  for (int k = 0; k < 300; ++k) {
    int a = pick(rng);
    int b = pick(rng);
    if (a == b) continue;
    const auto r = static_cast<Result>(res(rng));
    outcomes.push_back({"t" + std::to_string(k), systems[a], systems[b], r});
    ++played[{std::min(a, b), std::max(a, b)}];
    if (r == Result::i_wins) tally[{a, b}] += 1.0;
    if (r == Result::j_wins) tally[{b, a}] += 1.0;
    if (r == Result::tie) {
      tally[{a, b}] += 0.5;
      tally[{b, a}] += 0.5;
    }
  }
  const auto m = eval::aggregate(outcomes, systems);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      c.require(m.w[i][j] == tally[{i, j}], "W[" + std::to_string(i) + "][" + std::to_string(j) + "] mismatch");
      if (i < j) c.require(m.w[i][j] + m.w[j][i] == played[{i, j}], "pair total not conserved");
    }
  }
  const auto one_tie = eval::aggregate({{"t", "s0", "s1", Result::tie}}, {"s0", "s1"});
  c.require(one_tie.w[0][1] == 0.5 && one_tie.w[1][0] == 0.5, "a tie must add 0.5 to both cells");
  if (c.pass) c.detail << rows << "/9 verdict rows match; " << outcomes.size()
                       << " random outcomes aggregate with conserved pair totals";
}

}  // namespace skillos::acceptance
