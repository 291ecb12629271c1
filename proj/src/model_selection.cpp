#include "flrr/model_selection.hpp"

#include "flrr/error.hpp"
#include "flrr/parallel.hpp"
#include "flrr/robust_scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flrr {

LooResult loo_residuals(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                        double lambda, double sigma, const std::optional<Eigen::VectorXd>& init) {
  LooResult out;
  out.fit = irls_fit(sys, spec, y, lambda, sigma, init);
  out.residuals = y - sys.z() * out.fit.theta;
  out.hat = hat_diagonal(sys, out.fit.weights, lambda);
  out.loo_residuals = out.residuals.array() / (1.0 - out.hat.array());
  return out;
}

std::vector<double> logspace_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw ValidationError("lambda grid needs 0 < lo <= hi and count >= 1");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) grid[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
  return grid;
}

std::vector<double> default_lambda_grid() { return logspace_grid(1e-8, 1e2, 40); }

RcvReport rcv_select(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                     std::vector<double> lambda_grid, double sigma, const RcvOptions& options) {
  if (lambda_grid.empty()) throw ValidationError("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("lambda grid values must be positive");
  }
  std::sort(lambda_grid.begin(), lambda_grid.end());

  const std::size_t k = lambda_grid.size();
  RcvReport rep;
  rep.lambdas = lambda_grid;
  rep.rcv_values.assign(k, std::numeric_limits<double>::quiet_NaN());
  rep.converged.assign(k, false);
  rep.loo_residuals = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), sys.n(),
                                                std::numeric_limits<double>::quiet_NaN());

  // Failed fits stay NaN and are skipped by the argmin below.
  auto evaluate = [&](std::size_t i, const std::optional<Eigen::VectorXd>& init)
      -> std::optional<Eigen::VectorXd> {
    try {
      LooResult loo = loo_residuals(sys, spec, y, lambda_grid[i], sigma, init);
      rep.converged[i] = loo.fit.report.converged;
      rep.loo_residuals.row(static_cast<Eigen::Index>(i)) = loo.loo_residuals.transpose();
      const double t = tau_scale(loo.loo_residuals);
      rep.rcv_values[i] = t * t;
      return loo.fit.theta;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  if (options.warm_start) {
    std::optional<Eigen::VectorXd> init;
    for (std::size_t i = 0; i < k; ++i) {
      auto theta = evaluate(i, init);
      if (theta) init = std::move(theta);
    }
  } else {
    // vector<bool> is not safe for concurrent writes to distinct elements.
    std::vector<char> conv(k, 0);
    std::vector<double> values(k, std::numeric_limits<double>::quiet_NaN());
    parallel_for(k, resolve_threads(options.threads), [&](std::size_t i) {
      try {
        LooResult loo = loo_residuals(sys, spec, y, lambda_grid[i], sigma);
        conv[i] = loo.fit.report.converged ? 1 : 0;
        rep.loo_residuals.row(static_cast<Eigen::Index>(i)) = loo.loo_residuals.transpose();
        const double t = tau_scale(loo.loo_residuals);
        values[i] = t * t;
      } catch (const NumericalError&) {
      }
    });
    for (std::size_t i = 0; i < k; ++i) {
      rep.converged[i] = conv[i] != 0;
      rep.rcv_values[i] = values[i];
    }
  }

  bool found = false;
  for (std::size_t i = 0; i < k; ++i) {
    const double v = rep.rcv_values[i];
    if (std::isnan(v)) continue;
    if (!found || v <= rep.rcv_values[rep.chosen_index]) {
      rep.chosen_index = i;
      found = true;
    }
  }
  if (!found) throw NumericalError("robust cross-validation failed at every lambda on the grid");
  rep.chosen_lambda = lambda_grid[rep.chosen_index];
  return rep;
}

}  // namespace flrr
