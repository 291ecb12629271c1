#pragma once

#include "flrr/grid.hpp"

#include <Eigen/Dense>

#include <vector>

namespace flrr {

/// Polyharmonic radial kernel of the order-m thin-plate spline in R^d.
/// Requires 2m > d; returns exactly 0 at x = 0.
double eta(int m, int d, double x);

/// Dimension of the space of polynomials of total degree < m in d variables.
Eigen::Index polynomial_dimension(int m, int d);

using MultiIndex = std::vector<int>;

/// Exponents of the monomial basis, ordered by total degree and then
/// lexicographically. The order is part of the model file format.
std::vector<MultiIndex> monomial_basis(int m, int d);

/// True when 2m > d + 1, the smoothness condition under which the
/// estimator's convergence rates hold. Existence only needs 2m > d.
inline bool meets_rate_condition(int m, int d) { return 2 * m > d + 1; }

/// Thin-plate spline machinery on a fixed knot grid.
///
/// Omega(i, j) = eta(|t_i - t_j|), Phi(i, k) = phi_k(t_i), and the columns of
/// Q are an orthonormal basis of the null space of Phi^T, so every
/// gamma = Q xi satisfies the natural-spline side condition Phi^T gamma = 0.
class TpsBasis {
 public:
  TpsBasis(const Grid& grid, int m);

  int order() const { return m_; }
  int dim() const { return grid_.dim(); }
  Eigen::Index poly_dim() const { return static_cast<Eigen::Index>(exponents_.size()); }
  Eigen::Index knots() const { return grid_.size(); }

  const Grid& grid() const { return grid_; }
  const std::vector<MultiIndex>& exponents() const { return exponents_; }
  const Eigen::MatrixXd& omega() const { return omega_; }
  const Eigen::MatrixXd& phi() const { return phi_; }
  const Eigen::MatrixXd& q() const { return q_; }

  /// Kernel values eta(|x_i - t_j|) for query rows x_i (q x p).
  Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& query) const;
  /// Monomials evaluated at the query rows (q x M).
  Eigen::MatrixXd polynomial_matrix(const Eigen::MatrixXd& query) const;

 private:
  Grid grid_;
  int m_;
  std::vector<MultiIndex> exponents_;
  Eigen::MatrixXd omega_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd q_;
};

/// Builds the basis; throws ValidationError when 2m <= d, p <= M, or the
/// grid is not unisolvent for order m (rank(Phi) < M).
TpsBasis build_basis(const Grid& grid, int m);

/// theta = (alpha, xi, delta); gamma = Q xi is cached.
struct SplineCoefficients {
  double alpha = 0.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd delta;
  Eigen::VectorXd gamma;

  static SplineCoefficients from_theta(const TpsBasis& basis, const Eigen::VectorXd& theta);
  static SplineCoefficients make(const TpsBasis& basis, double alpha, Eigen::VectorXd xi,
                                 Eigen::VectorXd delta);
  Eigen::VectorXd theta() const;
};

/// beta(x) = sum_j gamma_j eta(|x - t_j|) + sum_k delta_k phi_k(x) at each query
/// row. The intercept is not part of beta.
Eigen::VectorXd evaluate_spline(const TpsBasis& basis, const SplineCoefficients& coeffs,
                                const Eigen::MatrixXd& query);

}  // namespace flrr
