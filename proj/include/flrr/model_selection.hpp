#pragma once

#include "flrr/loss.hpp"
#include "flrr/penalized_solver.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace flrr {

struct LooResult {
  Eigen::VectorXd residuals;      // r_i(lambda)
  Eigen::VectorXd loo_residuals;  // r_i / (1 - h_ii)
  Eigen::VectorXd hat;            // clipped hat diagonal used above
  IrlsResult fit;
};

/// Fits once at lambda and divides the residuals by 1 - diag of the hat
/// matrix. The hat matrix carries the final IRLS weights, which makes the
/// result exact for the square loss and an approximation otherwise.
LooResult loo_residuals(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                        double lambda, double sigma,
                        const std::optional<Eigen::VectorXd>& init = std::nullopt);

struct RcvReport {
  std::vector<double> lambdas;      // ascending
  std::vector<double> rcv_values;   // tau(r_-(lambda))^2, NaN when the fit failed
  std::vector<bool> converged;
  Eigen::MatrixXd loo_residuals;    // one row per lambda
  double chosen_lambda = 0.0;
  std::size_t chosen_index = 0;
};

struct RcvOptions {
  /// Serial sweep in increasing lambda, each fit started at the previous
  /// solution. When false every fit starts from its own LS solution, which
  /// makes the grid points independent and the result thread-count invariant.
  bool warm_start = true;
  /// Workers for the independent mode (0 = hardware concurrency).
  int threads = 1;
};

/// 40 log-spaced values in [1e-8, 1e2].
std::vector<double> default_lambda_grid();
std::vector<double> logspace_grid(double lo, double hi, int count);

/// Robust cross-validation: minimizes tau(r_-(lambda))^2 over the grid. Ties go
/// to the largest lambda; NaN entries are skipped. Throws NumericalError when
/// every grid point fails.
RcvReport rcv_select(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                     std::vector<double> lambda_grid, double sigma, const RcvOptions& options = {});

}  // namespace flrr
