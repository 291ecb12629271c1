#pragma once

#include "flrr/grid.hpp"
#include "flrr/loss.hpp"
#include "flrr/model_selection.hpp"
#include "flrr/penalized_solver.hpp"
#include "flrr/robust_scale.hpp"
#include "flrr/tps_basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace flrr {

/// How the penalty parameter is chosen.
struct LambdaPolicy {
  enum class Kind { fixed, rcv };
  Kind kind = Kind::rcv;
  double value = 0.0;        // fixed
  std::vector<double> grid;  // rcv; empty selects default_lambda_grid()
  RcvOptions rcv;

  static LambdaPolicy fixed(double lambda) { return {Kind::fixed, lambda, {}, {}}; }
  static LambdaPolicy cross_validated(std::vector<double> grid = {}, RcvOptions opts = {}) {
    return {Kind::rcv, 0.0, std::move(grid), opts};
  }
};

struct FitOptions {
  /// Penalty of the undersmoothed L1 pilot fit that feeds the M-scale.
  double pilot_lambda = 1e-6;
  ScaleSpec pilot_scale = ScaleSpec::bisquare(1.547, 0.5);
  /// Bypasses the scale pipeline when set.
  std::optional<double> sigma;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double stationarity = 0.0;
};

/// A fitted scalar-on-function model.
struct FitModel {
  TpsBasis basis;
  SplineCoefficients coeffs;
  double lambda = 0.0;
  double sigma = 1.0;
  LossSpec loss;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;               // Y - fitted
  Eigen::VectorXd standardized_residuals;  // residuals / sigma
  std::optional<RcvReport> rcv;
  FitDiagnostics diagnostics;

  Eigen::VectorXd theta() const { return coeffs.theta(); }
  /// beta-hat at the knots, (Omega gamma + Phi delta).
  Eigen::VectorXd beta_at_knots() const;
};

/// Estimation pipeline:
///  1. assemble the design for the grid and order m;
///  2. scale: sigma = 1 for square and quantile losses; for Huber and logistic
///     an L1 pilot fit (smoothed quantile, tau = 1/2) at pilot_lambda and the
///     bisquare M-scale of its residuals;
///  3. lambda from the policy (fixed, or robust CV with sigma held fixed);
///  4. final IRLS fit.
FitModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Grid& grid, int m,
             const LossSpec& loss, const LambdaPolicy& policy, const FitOptions& options = {});

/// Same as fit() with an already assembled design.
FitModel fit(const DesignSystem& sys, const TpsBasis& basis, const Eigen::VectorXd& y,
             const LossSpec& loss, const LambdaPolicy& policy, const FitOptions& options = {});

/// Rebuilds a model from persisted pieces; fitted values and residuals are
/// left empty.
FitModel make_model(TpsBasis basis, SplineCoefficients coeffs, double lambda, double sigma,
                    LossSpec loss);

/// alpha + sum_j X_new(., j) beta(t_j) mu(A_j), computed as Z_new theta.
Eigen::VectorXd predict(const FitModel& model, const Eigen::MatrixXd& x_new);

Eigen::VectorXd coefficient_function(const FitModel& model, const Eigen::MatrixXd& query);

struct OutlierReport {
  std::vector<Eigen::Index> indices;
  double threshold = 2.6;
  double sigma = 1.0;
  Eigen::VectorXd standardized_residuals;
};

/// Flags observations with |r_i / sigma| > threshold. Models fitted without a
/// scale estimate (sigma = 1 by construction) are standardized by the bisquare
/// M-scale of their residuals instead.
OutlierReport detect_outliers(const FitModel& model, double threshold = 2.6);
OutlierReport detect_outliers(const Eigen::VectorXd& residuals, double sigma, bool estimate_scale,
                              double threshold = 2.6);

}  // namespace flrr
