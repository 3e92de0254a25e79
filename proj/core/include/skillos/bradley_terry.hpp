#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace skillos::bt {

using Matrix = std::vector<std::vector<double>>;

struct FitOptions {
  double alpha = 1.0;  // added to every off-diagonal cell
  double tol = 1e-8;   // on max |Δβ| between sweeps
  std::size_t max_iter = 10000;
  /// Called after every sweep with the sweep index (1-based) and centered β.
  std::function<void(std::size_t, const std::vector<double>&)> on_sweep;
};

struct FitResult {
  std::vector<double> beta;  // zero mean
  std::size_t iterations = 0;
  double final_delta = 0.0;
};

/// W + alpha off the diagonal.
Matrix smooth(const Matrix& w, double alpha);

/// Σ_{i≠j} W_ij [β_i − log(e^β_i + e^β_j)].
double log_likelihood(const Matrix& w, const std::vector<double>& beta);

/// MM iteration on strengths π = exp(β) over the smoothed matrix. Throws
/// NonConvergence when max_iter is reached.
FitResult fit_bradley_terry(const Matrix& w, const FitOptions& options = {});

/// Linear map onto [0, 100]; constant β gives 50 everywhere.
std::vector<double> rescale(const std::vector<double>& beta);

/// P(i beats j) under the fitted model.
double win_probability(double beta_i, double beta_j);

}  // namespace skillos::bt
