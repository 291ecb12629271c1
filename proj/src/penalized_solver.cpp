#include "flrr/penalized_solver.hpp"

#include "flrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace flrr {

namespace {

// Householder QR of the stacked system [sqrt(W) Z; sqrt(n lambda) R_H]. The
// triangular factor T satisfies T^T T = Z^T W Z + n lambda H.
class StackedQr {
 public:
  StackedQr(const DesignSystem& sys, const Eigen::VectorXd& weights, double lambda)
      : sys_(sys), weights_(weights), n_lambda_(static_cast<double>(sys.n()) * lambda) {
    const Eigen::Index n = sys.n(), q = sys.dim();
    const Eigen::MatrixXd& root = sys.penalty_root();
    a_.resize(n + root.rows(), q);
    a_.topRows(n) = sys.z().array().colwise() * weights.array().sqrt();
    a_.bottomRows(root.rows()) = std::sqrt(static_cast<double>(n) * lambda) * root;
    factor();
    if (deficient()) {
      const double jitter = 1e-10 * a_.squaredNorm() / static_cast<double>(q);
      jitter_ = jitter;
      Eigen::MatrixXd ridge = Eigen::MatrixXd::Zero(q - 1, q);
      ridge.rightCols(q - 1).diagonal().setConstant(std::sqrt(jitter));
      Eigen::MatrixXd grown(a_.rows() + q - 1, q);
      grown << a_, ridge;
      a_ = std::move(grown);
      factor();
      if (deficient()) {
        throw NumericalError(
            "penalized normal equations are singular even after ridge jitter; "
            "the weighted design does not identify the coefficients (raise lambda)");
      }
    }
  }

  /// Minimizer of ||sqrt(W) (y - Z theta)||^2 + n lambda theta^T H theta.
  /// The QR solution is refined with corrected seminormal equations whose
  /// gradient Z^T W (y - Z x) - n lambda H x is accumulated in long double
  /// from Z, W and the stored H. R^T R matches H only to rounding, and theta
  /// is sensitive to that at cond(B)^2 eps, so the residual must use H itself.
  Eigen::VectorXd solve(const Eigen::VectorXd& y) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(a_.rows());
    b.head(y.size()) = weights_.cwiseSqrt().cwiseProduct(y);
    Eigen::VectorXd qtb = b;
    qtb.applyOnTheLeft(qr_.householderQ().transpose());
    const auto t = r_.triangularView<Eigen::Upper>();
    Eigen::VectorXd x = t.solve(qtb.head(a_.cols()));
    for (int it = 0; it < 5; ++it) {
      const Eigen::VectorXd g = gradient(y, x);
      const Eigen::VectorXd dx = t.solve(t.transpose().solve(g));
      x += dx;
      if (!(dx.norm() > 1e-16 * x.norm())) break;
    }
    return x;
  }

  /// T^{-T} applied to the columns of m.
  Eigen::MatrixXd solve_transposed(const Eigen::MatrixXd& m) const {
    return r_.triangularView<Eigen::Upper>().transpose().solve(m);
  }

 private:
  Eigen::VectorXd gradient(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd& z = sys_.z();
    const Eigen::MatrixXd& h = sys_.h();
    const Eigen::Index n = z.rows(), q = z.cols();
    std::vector<long double> res(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      long double acc = y[i];
      for (Eigen::Index j = 0; j < q; ++j) acc -= static_cast<long double>(z(i, j)) * x[j];
      res[i] = acc * static_cast<long double>(weights_[i]);
    }
    Eigen::VectorXd g(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      long double acc = 0.0L, pen = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<long double>(z(i, j)) * res[i];
      for (Eigen::Index k = 0; k < q; ++k) pen += static_cast<long double>(h(j, k)) * x[k];
      acc -= static_cast<long double>(n_lambda_) * pen;
      if (j > 0) acc -= static_cast<long double>(jitter_) * x[j];
      g[j] = static_cast<double>(acc);
    }
    return g;
  }

  void factor() {
    qr_.compute(a_);
    r_ = qr_.matrixQR().topRows(a_.cols());
  }

  bool deficient() const {
    const Eigen::VectorXd d = qr_.matrixQR().diagonal().cwiseAbs();
    return !d.allFinite() || !(d.minCoeff() > 1e-12 * d.maxCoeff());
  }

  const DesignSystem& sys_;
  Eigen::VectorXd weights_;
  double n_lambda_;
  double jitter_ = 0.0;
  Eigen::MatrixXd a_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd r_;
};

void check_weights(const DesignSystem& sys, const Eigen::VectorXd& weights) {
  if (weights.size() != sys.n()) throw ValidationError("need one weight per observation");
  if (!((weights.array() >= 0.0).all()) || !weights.allFinite()) {
    throw ValidationError("weights must be finite and nonnegative");
  }
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
}

Eigen::VectorXd irls_weights(const LossSpec& spec, const Eigen::VectorXd& r, double sigma) {
  Eigen::VectorXd w(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) w[i] = irls_weight(spec, r[i], sigma);
  return w;
}

}  // namespace

DesignSystem::DesignSystem(Eigen::MatrixXd x, const TpsBasis& basis)
    : x_(std::move(x)), volumes_(basis.grid().volumes()) {
  const Eigen::Index p = basis.knots();
  if (x_.cols() != p) {
    throw ValidationError("X has " + std::to_string(x_.cols()) + " columns but the grid has " +
                          std::to_string(p) + " points");
  }
  if (x_.rows() < 1) throw ValidationError("need at least one observation");
  if (!x_.allFinite()) throw ValidationError("X contains non-finite values");

  const Eigen::Index nx = basis.q().cols();
  const Eigen::Index m = basis.poly_dim();
  knot_map_.resize(p, nx + m);
  knot_map_.leftCols(nx) = basis.omega() * basis.q();
  knot_map_.rightCols(m) = basis.phi();

  z_ = design_matrix(x_, basis);

  const Eigen::Index q = 1 + p;
  h_ = Eigen::MatrixXd::Zero(q, q);
  auto block = h_.bottomRightCorner(p, p);
  block.noalias() = knot_map_.transpose() * volumes_.asDiagonal() * knot_map_;
  block.topLeftCorner(nx, nx).noalias() += basis.q().transpose() * basis.omega() * basis.q();
  h_ = (0.5 * (h_ + h_.transpose())).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(basis.q().transpose() * basis.omega() * basis.q());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Q^T Omega Q is not positive definite; the knots are too close together");
  }
  penalty_root_ = Eigen::MatrixXd::Zero(p + nx, q);
  penalty_root_.topRightCorner(p, p) = volumes_.cwiseSqrt().asDiagonal() * knot_map_;
  penalty_root_.bottomRows(nx).middleCols(1, nx) = llt.matrixU();
}

Eigen::VectorXd DesignSystem::beta_at_knots(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) throw ValidationError("theta has the wrong length");
  return knot_map_ * theta.tail(dim() - 1);
}

DesignSystem assemble(const Eigen::MatrixXd& x, const TpsBasis& basis) { return DesignSystem(x, basis); }

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& x, const TpsBasis& basis) {
  const Eigen::Index p = basis.knots();
  if (x.cols() != p) {
    throw ValidationError("X has " + std::to_string(x.cols()) + " columns but the grid has " +
                          std::to_string(p) + " points");
  }
  Eigen::MatrixXd b(p, p);
  const Eigen::Index nx = basis.q().cols();
  b.leftCols(nx) = basis.omega() * basis.q();
  b.rightCols(basis.poly_dim()) = basis.phi();

  Eigen::MatrixXd z(x.rows(), 1 + p);
  z.col(0).setOnes();
  z.rightCols(p).noalias() = (x * basis.grid().volumes().asDiagonal()) * b;
  return z;
}

double objective(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& y, double lambda, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("scale must be positive");
  const Eigen::VectorXd r = y - sys.z() * theta;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) loss += rho(spec, r[i] / sigma);
  return loss / static_cast<double>(sys.n()) + lambda * theta.dot(sys.h() * theta);
}

Eigen::VectorXd objective_gradient(const DesignSystem& sys, const LossSpec& spec,
                                   const Eigen::VectorXd& theta, const Eigen::VectorXd& y,
                                   double lambda, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("scale must be positive");
  const Eigen::VectorXd r = y - sys.z() * theta;
  Eigen::VectorXd s(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) s[i] = psi(spec, r[i] / sigma);
  return -(sys.z().transpose() * s) / (static_cast<double>(sys.n()) * sigma) +
         2.0 * lambda * (sys.h() * theta);
}

Eigen::VectorXd solve_pwls(const DesignSystem& sys, const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& y, double lambda) {
  check_weights(sys, weights);
  check_lambda(lambda);
  if (y.size() != sys.n()) throw ValidationError("Y length does not match the design");
  const StackedQr qr(sys, weights, lambda);
  Eigen::VectorXd theta = qr.solve(y);
  if (!theta.allFinite()) throw NumericalError("penalized least-squares solve produced non-finite values");
  return theta;
}

Eigen::VectorXd hat_diagonal(const DesignSystem& sys, const std::optional<Eigen::VectorXd>& weights,
                             double lambda) {
  check_lambda(lambda);
  const Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(sys.n());
  check_weights(sys, w);
  const StackedQr qr(sys, w, lambda);
  const Eigen::MatrixXd zw = (sys.z().array().colwise() * w.array().sqrt()).matrix().transpose();
  const Eigen::MatrixXd u = qr.solve_transposed(zw);  // q x n
  Eigen::VectorXd h(sys.n());
  for (Eigen::Index i = 0; i < sys.n(); ++i) h[i] = std::clamp(u.col(i).squaredNorm(), 0.0, 1.0 - 1e-8);
  return h;
}

IrlsResult irls_fit(const DesignSystem& sys, const LossSpec& spec, const Eigen::VectorXd& y,
                    double lambda, double sigma, const std::optional<Eigen::VectorXd>& init,
                    const IrlsOptions& options) {
  spec.validate();
  check_lambda(lambda);
  if (!(sigma > 0.0)) throw ValidationError("scale must be positive");
  if (y.size() != sys.n()) throw ValidationError("Y length does not match the design");
  if (!y.allFinite()) throw ValidationError("Y contains non-finite values");

  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(sys.n(), 1.0 / (sigma * sigma));
  IrlsResult out;
  IrlsReport& rep = out.report;

  if (spec.kind == LossKind::square) {
    out.theta = solve_pwls(sys, uniform, y, lambda);
    rep.iterations = 1;
    rep.converged = true;
    rep.objective_trace.push_back(objective(sys, spec, out.theta, y, lambda, sigma));
  } else {
    if (init) {
      if (init->size() != sys.dim()) throw ValidationError("initial theta has the wrong length");
      out.theta = *init;
    } else {
      out.theta = solve_pwls(sys, uniform, y, lambda);
    }
    double f = objective(sys, spec, out.theta, y, lambda, sigma);
    if (!std::isfinite(f)) throw NumericalError("IRLS: non-finite objective at the starting point");
    rep.objective_trace.push_back(f);

    for (int it = 1; it <= options.max_iterations; ++it) {
      const Eigen::VectorXd r = y - sys.z() * out.theta;
      const Eigen::VectorXd cand_full = solve_pwls(sys, irls_weights(spec, r, sigma), y, lambda);
      const Eigen::VectorXd step = cand_full - out.theta;

      Eigen::VectorXd cand = cand_full;
      double fc = objective(sys, spec, cand, y, lambda, sigma);
      if (!std::isfinite(fc)) throw NumericalError("IRLS: non-finite objective");
      double t = 1.0;
      for (int h = 0; h < 50 && fc > f; ++h) {
        t *= 0.5;
        cand = out.theta + t * step;
        fc = objective(sys, spec, cand, y, lambda, sigma);
      }
      // A full step that descends is stretched while the objective keeps
      // falling; plain IRLS crawls along narrow valleys of the smoothed
      // quantile loss.
      for (int g = 0; g < 10 && t == 1.0 && fc < f; ++g) {
        const Eigen::VectorXd longer = out.theta + std::ldexp(2.0, g) * step;
        const double fl = objective(sys, spec, longer, y, lambda, sigma);
        if (!(fl < fc)) break;
        cand = longer;
        fc = fl;
      }
      if (fc > f) {
        // No descent along the IRLS direction: stationary to working precision.
        rep.converged = true;
        rep.final_step_norm = 0.0;
        break;
      }

      const double change = (cand - out.theta).norm();
      const double rel = change / std::max(out.theta.norm(), std::numeric_limits<double>::min());
      out.theta = std::move(cand);
      if (fc > rep.objective_trace.back() + 1e-10) {
        throw std::logic_error("IRLS accepted an objective increase");
      }
      f = fc;
      rep.objective_trace.push_back(f);
      rep.iterations = it;
      rep.final_step_norm = change;
      if (rel < options.tolerance) {
        rep.converged = true;
        break;
      }
    }
  }

  const Eigen::VectorXd r = y - sys.z() * out.theta;
  out.weights = irls_weights(spec, r, sigma);
  rep.stationarity_norm =
      objective_gradient(sys, spec, out.theta, y, lambda, sigma).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace flrr
