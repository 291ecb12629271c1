#pragma once

#include "flrr/fl_regression.hpp"
#include "flrr/simulation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <vector>

namespace flrr::testing {

/// Small regression problem on (0,1) with smooth random curves.
struct Instance {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::unique_ptr<Grid> grid;
  std::unique_ptr<TpsBasis> basis;
  std::unique_ptr<DesignSystem> sys;
};

inline std::vector<double> random_knots(std::mt19937_64& rng, int p) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::set<double> pts;
  while (static_cast<int>(pts.size()) < p) pts.insert(u(rng));
  return {pts.begin(), pts.end()};
}

inline std::vector<double> equispaced(int p) {
  std::vector<double> t(p);
  for (int j = 0; j < p; ++j) t[j] = (j + 0.5) / p;
  return t;
}

/// Curves from a 20-term sine expansion; responses follow the discretized
/// model with beta(t) = sin(2 pi t) + t, intercept 0.5 and errors from `noise`
/// (0 Gaussian, 1 t with 2 degrees of freedom) at scale `sd`.
inline Instance make_instance(std::uint64_t seed, int n, int p, int m = 2, double sd = 0.1, int noise = 0,
                              bool random_grid = true) {
  std::mt19937_64 rng(seed);
  const std::vector<double> t = random_grid ? random_knots(rng, p) : equispaced(p);
  Instance inst;
  inst.grid = std::make_unique<Grid>(build_grid_1d(t, 0.0, 1.0));
  inst.basis = std::make_unique<TpsBasis>(*inst.grid, m);

  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd scores(n, 20);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 20; ++j) scores(i, j) = z(rng);
  const Eigen::VectorXd tv = Eigen::Map<const Eigen::VectorXd>(t.data(), p);
  inst.x = sim::kl_curves(scores, tv);

  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = std::sin(2.0 * std::numbers::pi * t[j]) + t[j];
  inst.y = (0.5 + (inst.x * beta.cwiseProduct(inst.grid->volumes())).array()).matrix();
  std::student_t_distribution<double> t2(2.0);
  for (Eigen::Index i = 0; i < n; ++i) inst.y[i] += sd * (noise == 0 ? z(rng) : t2(rng));
  inst.sys = std::make_unique<DesignSystem>(inst.x, *inst.basis);
  return inst;
}

/// Log-uniform draw on [lo, hi].
inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace flrr::testing
