#include "flrr/tps_basis.hpp"

#include "flrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace flrr {

namespace {

void check_order(int m, int d) {
  if (m < 1 || d < 1) throw ValidationError("spline order and dimension must be positive");
  if (2 * m <= d) {
    throw ValidationError("thin-plate spline of order " + std::to_string(m) +
                          " does not exist in dimension " + std::to_string(d) + " (need 2m > d)");
  }
}

// Leading constant of eta for the given (m, d).
double eta_constant(int m, int d) {
  const double pi_pow = std::pow(std::numbers::pi, 0.5 * d);
  if (d % 2 == 0) {
    const int sign_exp = m + 1 + d / 2;
    const double sign = sign_exp % 2 == 0 ? 1.0 : -1.0;
    return sign / (std::ldexp(1.0, 2 * m - 1) * pi_pow * std::tgamma(m) * std::tgamma(m - d / 2 + 1));
  }
  return std::tgamma(0.5 * d - m) / (std::ldexp(1.0, 2 * m) * pi_pow * std::tgamma(m));
}

double eta_shape(int m, int d, double x) {
  if (x == 0.0) return 0.0;
  const double power = std::pow(x, 2 * m - d);
  return d % 2 == 0 ? power * std::log(x) : power;
}

}  // namespace

double eta(int m, int d, double x) {
  check_order(m, d);
  if (!(x >= 0.0)) throw ValidationError("eta is defined for nonnegative distances");
  return eta_constant(m, d) * eta_shape(m, d, x);
}

Eigen::Index polynomial_dimension(int m, int d) {
  // C(m + d - 1, d)
  Eigen::Index result = 1;
  for (int i = 1; i <= d; ++i) result = result * (m - 1 + i) / i;
  return result;
}

std::vector<MultiIndex> monomial_basis(int m, int d) {
  if (m < 1 || d < 1) throw ValidationError("spline order and dimension must be positive");
  std::vector<MultiIndex> out;
  MultiIndex current(d, 0);
  auto recurse = [&](auto&& self, int axis, int budget) -> void {
    if (axis == d) {
      out.push_back(current);
      return;
    }
    for (int e = 0; e <= budget; ++e) {
      current[axis] = e;
      self(self, axis + 1, budget - e);
    }
    current[axis] = 0;
  };
  recurse(recurse, 0, m - 1);
  std::sort(out.begin(), out.end(), [](const MultiIndex& a, const MultiIndex& b) {
    int da = 0, db = 0;
    for (int e : a) da += e;
    for (int e : b) db += e;
    return da != db ? da < db : a < b;
  });
  return out;
}

TpsBasis::TpsBasis(const Grid& grid, int m) : grid_(grid), m_(m) {
  const int d = grid.dim();
  check_order(m, d);
  exponents_ = monomial_basis(m, d);
  const Eigen::Index p = grid.size();
  const Eigen::Index M = poly_dim();
  if (p <= M) {
    throw ValidationError("too few points: p = " + std::to_string(p) +
                          " but the polynomial space has dimension " + std::to_string(M));
  }

  omega_ = kernel_matrix(grid.points());
  omega_.diagonal().setZero();
  phi_ = polynomial_matrix(grid.points());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi_);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * s[0];
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (!(s[k] > tol)) {
      throw ValidationError("grid not unisolvent for order " + std::to_string(m) +
                            " (polynomial matrix has rank " + std::to_string(k) + " < " +
                            std::to_string(M) + ")");
    }
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi_);
  Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  q_ = full.rightCols(p - M);
}

Eigen::MatrixXd TpsBasis::kernel_matrix(const Eigen::MatrixXd& query) const {
  if (query.cols() != dim()) throw ValidationError("query points have the wrong dimension");
  const auto& knots = grid_.points();
  const int d = dim();
  const double c = eta_constant(m_, d);
  Eigen::MatrixXd k(query.rows(), knots.rows());
  for (Eigen::Index j = 0; j < knots.rows(); ++j) {
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
      k(i, j) = c * eta_shape(m_, d, (query.row(i) - knots.row(j)).norm());
    }
  }
  return k;
}

Eigen::MatrixXd TpsBasis::polynomial_matrix(const Eigen::MatrixXd& query) const {
  if (query.cols() != dim()) throw ValidationError("query points have the wrong dimension");
  Eigen::MatrixXd out(query.rows(), poly_dim());
  for (Eigen::Index k = 0; k < poly_dim(); ++k) {
    const auto& e = exponents_[k];
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
      double v = 1.0;
      for (int a = 0; a < dim(); ++a) {
        for (int r = 0; r < e[a]; ++r) v *= query(i, a);
      }
      out(i, k) = v;
    }
  }
  return out;
}

TpsBasis build_basis(const Grid& grid, int m) { return TpsBasis(grid, m); }

SplineCoefficients SplineCoefficients::make(const TpsBasis& basis, double alpha, Eigen::VectorXd xi,
                                            Eigen::VectorXd delta) {
  if (xi.size() != basis.q().cols() || delta.size() != basis.poly_dim()) {
    throw ValidationError("coefficient sizes do not match the basis");
  }
  SplineCoefficients c;
  c.alpha = alpha;
  c.gamma = basis.q() * xi;
  c.xi = std::move(xi);
  c.delta = std::move(delta);
  return c;
}

SplineCoefficients SplineCoefficients::from_theta(const TpsBasis& basis, const Eigen::VectorXd& theta) {
  const Eigen::Index nx = basis.q().cols();
  const Eigen::Index M = basis.poly_dim();
  if (theta.size() != 1 + nx + M) throw ValidationError("theta has the wrong length");
  return make(basis, theta[0], theta.segment(1, nx), theta.tail(M));
}

Eigen::VectorXd SplineCoefficients::theta() const {
  Eigen::VectorXd t(1 + xi.size() + delta.size());
  t << alpha, xi, delta;
  return t;
}

Eigen::VectorXd evaluate_spline(const TpsBasis& basis, const SplineCoefficients& coeffs,
                                const Eigen::MatrixXd& query) {
  if (query.cols() != basis.dim()) {
    throw ValidationError("query points have dimension " + std::to_string(query.cols()) +
                          ", expected " + std::to_string(basis.dim()));
  }
  return basis.kernel_matrix(query) * coeffs.gamma + basis.polynomial_matrix(query) * coeffs.delta;
}

}  // namespace flrr
