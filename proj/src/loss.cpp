#include "flrr/loss.hpp"

#include "flrr/error.hpp"

#include <cmath>

namespace flrr {

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::quantile:
      if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level tau must lie in (0, 1)");
      if (!(epsilon > 0.0)) throw ValidationError("quantile smoothing epsilon must be positive");
      break;
    case LossKind::huber:
      if (!(k > 0.0)) throw ValidationError("Huber constant k must be positive");
      break;
    default:
      break;
  }
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::square: return "square";
    case LossKind::l1_exact: return "l1_exact";
    case LossKind::quantile: return "quantile";
    case LossKind::huber: return "huber";
    case LossKind::logistic: return "logistic";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "square") return LossKind::square;
  if (name == "l1" || name == "quantile") return LossKind::quantile;
  if (name == "l1_exact") return LossKind::l1_exact;
  if (name == "huber") return LossKind::huber;
  if (name == "logistic") return LossKind::logistic;
  throw ValidationError("unknown loss '" + std::string(name) + "'");
}

double rho(const LossSpec& spec, double x) {
  switch (spec.kind) {
    case LossKind::square:
      return x * x;
    case LossKind::l1_exact:
      return std::abs(x);
    case LossKind::quantile: {
      const double tau = spec.tau, eps = spec.epsilon;
      if (x >= eps) return 2.0 * tau * x;
      if (x <= -eps) return 2.0 * (tau - 1.0) * x;
      return x >= 0.0 ? 2.0 * tau * x * x / eps : 2.0 * (1.0 - tau) * x * x / eps;
    }
    case LossKind::huber: {
      const double a = std::abs(x), k = spec.k;
      return a < k ? x * x : 2.0 * k * a - k * k;
    }
    case LossKind::logistic: {
      // 2x + 4 log(1 + e^{-x}) is even; evaluate at |x| to avoid overflow.
      const double a = std::abs(x);
      return 2.0 * a + 4.0 * std::log1p(std::exp(-a));
    }
  }
  return 0.0;
}

double psi(const LossSpec& spec, double x) {
  switch (spec.kind) {
    case LossKind::square:
      return 2.0 * x;
    case LossKind::l1_exact:
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case LossKind::quantile: {
      const double tau = spec.tau, eps = spec.epsilon;
      if (x >= eps) return 2.0 * tau;
      if (x <= -eps) return 2.0 * (tau - 1.0);
      return x >= 0.0 ? 4.0 * tau * x / eps : 4.0 * (1.0 - tau) * x / eps;
    }
    case LossKind::huber: {
      const double k = spec.k;
      if (std::abs(x) < k) return 2.0 * x;
      return x > 0.0 ? 2.0 * k : -2.0 * k;
    }
    case LossKind::logistic:
      return 2.0 * std::tanh(0.5 * x);
  }
  return 0.0;
}

double irls_weight(const LossSpec& spec, double r, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("scale must be positive");
  const double s2 = sigma * sigma;
  if (std::abs(r) < 1e-10 * sigma) {
    switch (spec.kind) {
      case LossKind::square:
      case LossKind::huber:
        return 1.0 / s2;
      case LossKind::logistic:
        return 0.5 / s2;
      case LossKind::quantile:
        return 1.0 / (s2 * spec.epsilon);
      case LossKind::l1_exact:
        // psi/(2 sigma r) blows up at 0; cap at the threshold.
        return 0.5 / (s2 * 1e-10);
    }
  }
  if (spec.kind == LossKind::square) return 1.0 / s2;
  const double x = r / sigma;
  return psi(spec, x) / (2.0 * sigma * r);
}

}  // namespace flrr
