#pragma once

#include <Eigen/Dense>

namespace flrr {

enum class ChiKind { bisquare, square };

/// chi-function of an M-scale. For the bisquare, chi(x) = min(1 - (1 - (x/c)^2)^3, 1);
/// for `square`, chi(x) = x^2 and `c` is unused.
struct ScaleSpec {
  ChiKind kind = ChiKind::bisquare;
  double c = 1.547;
  double b = 0.5;

  static ScaleSpec bisquare(double c = 1.547, double b = 0.5) { return {ChiKind::bisquare, c, b}; }
  static ScaleSpec square(double b = 0.5) { return {ChiKind::square, 1.0, b}; }
};

/// Tuning of the tau-scale: an M-scale with bisquare constant c1 (b = 1/2)
/// followed by a bisquare second stage with constant c2.
inline constexpr double kTauScaleC1 = 1.548;
inline constexpr double kTauScaleC2 = 6.08;
/// E[chi_{c2}(Z)] for Z standard normal. Obtained by adaptive quadrature of
/// chi_{6.08}(x) phi(x) over [0, 6.08] plus the Gaussian tail mass beyond it
/// (absolute tolerance 1e-14); reproduced independently in the unit tests.
inline constexpr double kTauScaleB2 = 0.074865621074111;

double chi(const ScaleSpec& spec, double x);

/// sigma solving mean chi(r_i / sigma) = b, to |lhs - b| < 1e-10.
/// Bisection on the nonincreasing map sigma -> mean chi(r / sigma); the
/// square chi uses the closed form sqrt(mean(r^2) / b).
/// Throws NumericalError("degenerate residuals") when no positive root
/// exists (all residuals zero, or at least a fraction 1 - b of them zero).
double m_scale(const Eigen::VectorXd& residuals, const ScaleSpec& spec = {});

/// Yohai-Zamar tau-scale: tau^2 = s^2 mean(chi_{c2}(r/s)) / b2 with
/// s = m_scale(r, bisquare(c1, 1/2)). Calibrated to 1 at the standard normal.
double tau_scale(const Eigen::VectorXd& residuals);

}  // namespace flrr
