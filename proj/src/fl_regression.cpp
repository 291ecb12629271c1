#include "flrr/fl_regression.hpp"

#include "flrr/error.hpp"

#include <cmath>
#include <limits>

namespace flrr {

namespace {

double pilot_scale(const DesignSystem& sys, const Eigen::VectorXd& y, const FitOptions& options) {
  const LossSpec l1 = LossSpec::quantile(0.5);
  const IrlsResult pilot = irls_fit(sys, l1, y, options.pilot_lambda, 1.0);
  const Eigen::VectorXd r = y - sys.z() * pilot.theta;
  const double reference = 1.0 + y.cwiseAbs().maxCoeff();
  double sigma = 0.0;
  try {
    sigma = m_scale(r, options.pilot_scale);
  } catch (const NumericalError&) {
    sigma = 0.0;
  }
  // The smoothed L1 loss leaves would-be zero residuals inside its band; the
  // M-scale is undefined once at most a fraction b of them lies outside.
  const auto outside = (r.array().abs() > 2.0 * l1.epsilon).count();
  const bool interpolates = static_cast<double>(outside) <= options.pilot_scale.b * static_cast<double>(r.size());
  if (interpolates || !(sigma > 1e-10 * reference)) {
    throw NumericalError(
        "scale degenerate: the L1 pilot fit interpolates the data; raise the pilot lambda");
  }
  return sigma;
}

}  // namespace

Eigen::VectorXd FitModel::beta_at_knots() const {
  return basis.omega() * coeffs.gamma + basis.phi() * coeffs.delta;
}

FitModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Grid& grid, int m,
             const LossSpec& loss, const LambdaPolicy& policy, const FitOptions& options) {
  TpsBasis basis = build_basis(grid, m);
  DesignSystem sys = assemble(x, basis);
  return fit(sys, basis, y, loss, policy, options);
}

FitModel fit(const DesignSystem& sys, const TpsBasis& basis, const Eigen::VectorXd& y,
             const LossSpec& loss, const LambdaPolicy& policy, const FitOptions& options) {
  loss.validate();
  if (loss.kind == LossKind::l1_exact) {
    throw ValidationError("l1_exact is a reference loss; fit the smoothed quantile loss instead");
  }
  if (y.size() != sys.n()) throw ValidationError("Y length does not match the number of curves");
  if (!y.allFinite()) throw ValidationError("Y contains non-finite values");
  if (sys.dim() != 1 + basis.knots()) throw ValidationError("design does not match the basis");

  double sigma = 1.0;
  if (options.sigma) {
    sigma = *options.sigma;
    if (!(sigma > 0.0)) throw ValidationError("scale must be positive");
  } else if (loss.needs_scale()) {
    sigma = pilot_scale(sys, y, options);
  }

  std::optional<RcvReport> rcv;
  double lambda = policy.value;
  if (policy.kind == LambdaPolicy::Kind::rcv) {
    auto grid = policy.grid.empty() ? default_lambda_grid() : policy.grid;
    rcv = rcv_select(sys, loss, y, std::move(grid), sigma, policy.rcv);
    lambda = rcv->chosen_lambda;
  } else if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be finite and >= 0");
  }

  const IrlsResult res = irls_fit(sys, loss, y, lambda, sigma);

  FitModel model = make_model(basis, SplineCoefficients::from_theta(basis, res.theta), lambda, sigma, loss);
  model.fitted = sys.z() * res.theta;
  model.residuals = y - model.fitted;
  model.standardized_residuals = model.residuals / sigma;
  model.rcv = std::move(rcv);
  model.diagnostics = {res.report.converged, res.report.iterations, res.report.stationarity_norm};
  return model;
}

FitModel make_model(TpsBasis basis, SplineCoefficients coeffs, double lambda, double sigma,
                    LossSpec loss) {
  return FitModel{std::move(basis), std::move(coeffs), lambda, sigma, loss, {}, {}, {}, {}, {}};
}

Eigen::VectorXd predict(const FitModel& model, const Eigen::MatrixXd& x_new) {
  return design_matrix(x_new, model.basis) * model.theta();
}

Eigen::VectorXd coefficient_function(const FitModel& model, const Eigen::MatrixXd& query) {
  return evaluate_spline(model.basis, model.coeffs, query);
}

OutlierReport detect_outliers(const Eigen::VectorXd& residuals, double sigma, bool estimate_scale,
                              double threshold) {
  if (std::isnan(threshold) || threshold < 0.0) throw ValidationError("threshold must be >= 0");
  OutlierReport rep;
  rep.threshold = threshold;
  rep.sigma = estimate_scale ? m_scale(residuals, ScaleSpec::bisquare()) : sigma;
  if (!(rep.sigma > 0.0)) throw NumericalError("degenerate residuals: scale is not positive");
  rep.standardized_residuals = residuals / rep.sigma;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    if (std::abs(rep.standardized_residuals[i]) > threshold) rep.indices.push_back(i);
  }
  return rep;
}

OutlierReport detect_outliers(const FitModel& model, double threshold) {
  if (model.residuals.size() == 0) throw ValidationError("model carries no residuals");
  return detect_outliers(model.residuals, model.sigma, !model.loss.needs_scale(), threshold);
}

}  // namespace flrr
