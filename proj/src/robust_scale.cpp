#include "flrr/robust_scale.hpp"

#include "flrr/error.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace flrr {

namespace {

double mean_chi(const Eigen::VectorXd& r, const ScaleSpec& spec, double sigma) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) sum += chi(spec, r[i] / sigma);
  return sum / static_cast<double>(r.size());
}

}  // namespace

double chi(const ScaleSpec& spec, double x) {
  if (spec.kind == ChiKind::square) return x * x;
  const double u = x / spec.c;
  if (std::abs(u) >= 1.0) return 1.0;
  const double v = 1.0 - u * u;
  return 1.0 - v * v * v;
}

double m_scale(const Eigen::VectorXd& residuals, const ScaleSpec& spec) {
  const Eigen::Index n = residuals.size();
  if (n < 1) throw ValidationError("m_scale needs at least one residual");
  if (!residuals.allFinite()) throw NumericalError("m_scale: non-finite residuals");
  if (!(spec.b > 0.0 && spec.b < 1.0) || !(spec.c > 0.0)) {
    throw ValidationError("scale tuning out of range (need c > 0, b in (0, 1))");
  }

  const Eigen::VectorXd a = residuals.cwiseAbs();
  const double amax = a.maxCoeff();
  if (amax == 0.0) throw NumericalError("degenerate residuals: all residuals are zero");

  if (spec.kind == ChiKind::square) {
    return std::sqrt(residuals.squaredNorm() / static_cast<double>(n) / spec.b);
  }

  const auto nonzero = (a.array() > 0.0).count();
  if (static_cast<double>(nonzero) <= spec.b * static_cast<double>(n)) {
    throw NumericalError("degenerate residuals: too many exact zeros for the M-scale equation");
  }

  std::vector<double> sorted(a.data(), a.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  double med = sorted[n / 2];
  if (med == 0.0) {
    med = amax;
    for (double v : sorted) {
      if (v > 0.0) med = std::min(med, v);
    }
  }

  double lo = med / 100.0, hi = 100.0 * amax;
  while (mean_chi(residuals, spec, lo) < spec.b) lo *= 0.5;
  while (mean_chi(residuals, spec, hi) > spec.b) hi *= 2.0;

  for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = mean_chi(residuals, spec, mid);
    if (f > spec.b) {
      lo = mid;
    } else {
      hi = mid;
    }
    assert(mean_chi(residuals, spec, lo) >= spec.b && mean_chi(residuals, spec, hi) <= spec.b);
  }
  const double f_lo = std::abs(mean_chi(residuals, spec, lo) - spec.b);
  const double f_hi = std::abs(mean_chi(residuals, spec, hi) - spec.b);
  const double sigma = f_lo < f_hi ? lo : hi;
  if (std::min(f_lo, f_hi) >= 1e-10) {
    throw NumericalError("m_scale: bisection did not meet the 1e-10 equation tolerance");
  }
  return sigma;
}

double tau_scale(const Eigen::VectorXd& residuals) {
  if (residuals.size() < 2) throw ValidationError("tau_scale needs at least two residuals");
  const double s = m_scale(residuals, ScaleSpec::bisquare(kTauScaleC1, 0.5));
  const ScaleSpec second = ScaleSpec::bisquare(kTauScaleC2, 0.5);
  const double tau2 = s * s * mean_chi(residuals, second, s) / kTauScaleB2;
  return std::sqrt(tau2);
}

}  // namespace flrr
