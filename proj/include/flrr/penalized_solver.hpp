#pragma once

#include "flrr/loss.hpp"
#include "flrr/tps_basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace flrr {

/// Finite-dimensional form of the penalized estimator.
///
/// With B = [Omega Q, Phi] mapping (xi, delta) to spline values at the knots,
/// the design is Z = [1, X W B] and the penalty is
/// H = blockdiag(0, B^T W B + blockdiag(Q^T Omega Q, 0)), so that
/// theta^T H theta = sum_j beta(t_j)^2 mu(A_j) + gamma^T Omega gamma.
class DesignSystem {
 public:
  DesignSystem(Eigen::MatrixXd x, const TpsBasis& basis);

  Eigen::Index n() const { return z_.rows(); }
  Eigen::Index dim() const { return z_.cols(); }
  const Eigen::MatrixXd& z() const { return z_; }
  const Eigen::MatrixXd& h() const { return h_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& volumes() const { return volumes_; }
  /// B = [Omega Q, Phi]; B * theta.tail(p) gives beta at the knots.
  const Eigen::MatrixXd& knot_map() const { return knot_map_; }
  /// R with R^T R = H: rows [0, sqrt(W) B] over rows [0, L^T, 0], L L^T = Q^T Omega Q.
  const Eigen::MatrixXd& penalty_root() const { return penalty_root_; }

  /// beta(t_j) for every knot, from a full theta.
  Eigen::VectorXd beta_at_knots(const Eigen::VectorXd& theta) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd volumes_;
  Eigen::MatrixXd knot_map_;
  Eigen::MatrixXd z_;
  Eigen::MatrixXd h_;
  Eigen::MatrixXd penalty_root_;
};

DesignSystem assemble(const Eigen::MatrixXd& x, const TpsBasis& basis);

/// Design rows [1, X W B] for new curves sampled on the basis grid.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& x, const TpsBasis& basis);

/// L(theta) = (1/n) sum rho((Y_i - Z_i theta)/sigma) + lambda theta^T H theta.
double objective(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& y, double lambda, double sigma);

/// Gradient of objective(): -(1/(n sigma)) Z^T psi(r/sigma) + 2 lambda H theta.
Eigen::VectorXd objective_gradient(const DesignSystem& sys, const LossSpec& spec,
                                   const Eigen::VectorXd& theta, const Eigen::VectorXd& y,
                                   double lambda, double sigma);

/// Solves (Z^T W_r Z + n lambda H) theta = Z^T W_r Y with W_r = diag(weights),
/// as a Householder QR least-squares problem on [sqrt(W_r) Z; sqrt(n lambda) R].
/// If R is numerically rank deficient, ridge rows worth 1e-10 trace/dim of the
/// normal matrix are appended for the penalized block (never the intercept)
/// and the factorization retried once.
Eigen::VectorXd solve_pwls(const DesignSystem& sys, const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& y, double lambda);

/// Diagonal of Z (Z^T W_r Z + n lambda H)^{-1} Z^T W_r, clipped to [0, 1 - 1e-8].
/// Without weights W_r is the identity.
Eigen::VectorXd hat_diagonal(const DesignSystem& sys, const std::optional<Eigen::VectorXd>& weights,
                             double lambda);

struct IrlsOptions {
  double tolerance = 1e-8;  // relative change in theta
  int max_iterations = 500;
};

struct IrlsReport {
  int iterations = 0;
  std::vector<double> objective_trace;
  bool converged = false;
  double final_step_norm = 0.0;
  double stationarity_norm = 0.0;
};

struct IrlsResult {
  Eigen::VectorXd theta;
  /// IRLS weights evaluated at the final residuals.
  Eigen::VectorXd weights;
  IrlsReport report;
};

/// Penalized IRLS. Each step solves a penalized weighted LS problem with
/// weights irls_weight(r_i, sigma) from the current residuals. A step that
/// would raise the objective is halved until it does not; when no halving
/// helps the iterate is numerically stationary and the fit stops. A full step
/// that descends is doubled (at most 10 times) while the objective keeps
/// falling. The square
/// loss is solved in a single step. The default start is the penalized LS fit.
IrlsResult irls_fit(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                    double lambda, double sigma,
                    const std::optional<Eigen::VectorXd>& init = std::nullopt,
                    const IrlsOptions& options = {});

}  // namespace flrr
