#pragma once

#include <string>
#include <string_view>

namespace flrr {

enum class LossKind { square, l1_exact, quantile, huber, logistic };

/// Loss choice with its tuning parameters. `tau` and `epsilon` apply to the
/// quantile loss only, `k` to Huber only.
struct LossSpec {
  LossKind kind = LossKind::square;
  double tau = 0.5;
  double epsilon = 1e-4;
  double k = 1.345;

  static LossSpec square() { return {LossKind::square}; }
  /// Unsmoothed |x|; a reference for checking the smoothed L1 fit.
  static LossSpec l1_exact() { return {LossKind::l1_exact}; }
  static LossSpec quantile(double tau = 0.5, double epsilon = 1e-4) {
    return {LossKind::quantile, tau, epsilon};
  }
  static LossSpec huber(double k = 1.345) { return {LossKind::huber, 0.5, 1e-4, k}; }
  static LossSpec logistic() { return {LossKind::logistic}; }

  /// Throws ValidationError when a parameter is out of range.
  void validate() const;
  /// Whether the fit standardizes residuals by an estimated scale.
  bool needs_scale() const { return kind == LossKind::huber || kind == LossKind::logistic; }
};

std::string to_string(LossKind kind);
/// Accepts square, l1, l1_exact, quantile, huber, logistic.
LossKind parse_loss_kind(std::string_view name);

/// Loss value. For `quantile` this is always the smoothed check loss:
/// 2x(tau - 1{x<0}) outside (-eps, eps) and 2 tau x^2/eps, 2(1-tau) x^2/eps
/// on the positive and negative halves of the core.
double rho(const LossSpec& spec, double x);

/// Derivative of rho (one-sided at the non-differentiable points).
double psi(const LossSpec& spec, double x);

/// IRLS weight psi(r/sigma) / (2 sigma r). Near r = 0 the analytic limit
/// psi'(0)/(2 sigma^2) is returned; for the smoothed quantile loss that limit
/// is the mean of the two one-sided values, 1/(sigma^2 eps).
double irls_weight(const LossSpec& spec, double r, double sigma);

}  // namespace flrr
