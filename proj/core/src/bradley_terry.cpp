#include "skillos/bradley_terry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "skillos/error.hpp"

namespace skillos::bt {

namespace {

void check_square(const Matrix& w) {
  for (const auto& row : w) {
    if (row.size() != w.size()) throw Error(Errc::invalid_config, "win matrix is not square");
    for (const double x : row) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw Error(Errc::invalid_config, "win matrix has a negative entry");
    }
  }
}

void center(std::vector<double>& beta) {
  const double mean = std::accumulate(beta.begin(), beta.end(), 0.0) / static_cast<double>(beta.size());
  for (auto& b : beta) b -= mean;
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

Matrix smooth(const Matrix& w, double alpha) {
  Matrix out = w;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (i != j) out[i][j] += alpha;
      else out[i][j] = 0.0;
    }
  }
  return out;
}

double log_likelihood(const Matrix& w, const std::vector<double>& beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (i == j || w[i][j] == 0.0) continue;
      ll += w[i][j] * (beta[i] - log_sum_exp(beta[i], beta[j]));
    }
  }
  return ll;
}

FitResult fit_bradley_terry(const Matrix& w, const FitOptions& options) {
  const auto n = w.size();
  if (n < 2) throw Error(Errc::invalid_config, "Bradley-Terry needs at least two systems");
  check_square(w);
  if (options.alpha < 0.0) throw Error(Errc::invalid_config, "smoothing alpha must be non-negative");
  const auto ws = smooth(w, options.alpha);

  std::vector<double> wins(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) wins[i] = std::accumulate(ws[i].begin(), ws[i].end(), 0.0);

  std::vector<double> pi(n, 1.0);
  std::vector<double> beta(n, 0.0);
  FitResult result;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double nij = ws[i][j] + ws[j][i];
        if (nij > 0.0) denom += nij / (pi[i] + pi[j]);
      }
      next[i] = denom > 0.0 ? wins[i] / denom : pi[i];
    }
    // Geometric-mean normalisation keeps log-strengths centred.
    double log_mean = 0.0;
    for (const double p : next) log_mean += std::log(p);
    log_mean /= static_cast<double>(n);
    std::vector<double> next_beta(n);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next_beta[i] = std::log(next[i]) - log_mean;
      pi[i] = std::exp(next_beta[i]);
      delta = std::max(delta, std::abs(next_beta[i] - beta[i]));
    }
    beta = std::move(next_beta);
    result.iterations = it;
    result.final_delta = delta;
    if (options.on_sweep) options.on_sweep(it, beta);
    if (delta < options.tol) {
      center(beta);
      result.beta = std::move(beta);
      return result;
    }
  }
  throw Error(Errc::non_convergence, "Bradley-Terry MM did not converge in " + std::to_string(options.max_iter) +
                                         " sweeps (last max |dbeta| = " + std::to_string(result.final_delta) + ")");
}

std::vector<double> rescale(const std::vector<double>& beta) {
  if (beta.empty()) throw Error(Errc::invalid_config, "cannot rescale an empty beta vector");
  const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
  const double span = *hi - *lo;
  std::vector<double> out(beta.size(), 50.0);
  if (span < 1e-12) return out;
  for (std::size_t i = 0; i < beta.size(); ++i) out[i] = (beta[i] - *lo) / span * 100.0;
  out[hi - beta.begin()] = 100.0;
  out[lo - beta.begin()] = 0.0;
  return out;
}

double win_probability(double beta_i, double beta_j) { return 1.0 / (1.0 + std::exp(beta_j - beta_i)); }

}  // namespace skillos::bt
