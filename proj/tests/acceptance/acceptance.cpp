// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are pinned next to each check.

#include "flrr/cli.hpp"
#include "flrr/fl_regression.hpp"
#include "flrr/simulation.hpp"

#include "instances.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace flrr;
using flrr::testing::make_instance;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mad(const std::vector<double>& v) {
  const double m = median(v);
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::abs(x - m));
  return median(dev);
}

// 1. IRLS with square loss against the stacked-QR closed form.
Outcome c1_ls_oracle() {
  constexpr double kTol = 1e-8;
  constexpr double kBudgetSeconds = 10.0;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = make_instance(1000 + rep, 40, 10);
    const double lam = testing::log_uniform(rng, 1e-8, 1.0);
    const auto fit = irls_fit(*inst.sys, LossSpec::square(), inst.y, lam, 1.0);
    const Eigen::VectorXd ref = testing::penalized_ls_qr(inst.sys->z(), inst.sys->h(), inst.y, lam);
    worst = std::max(worst, (fit.theta - ref).norm() / ref.norm());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < kTol && secs < kBudgetSeconds,
          fmt("max relative error %.2e (tol %.0e), %.2f s (budget %.0f s)", worst, kTol, secs, kBudgetSeconds)};
}

// 2. Objective traces never increase, every loss.
Outcome c2_descent() {
  constexpr double kSlack = 1e-12;
  constexpr double kBudgetSeconds = 30.0;
  const std::vector<LossSpec> losses{LossSpec::square(),  LossSpec::l1_exact(),         LossSpec::quantile(0.5),
                                     LossSpec::quantile(0.25, 1e-3), LossSpec::huber(), LossSpec::logistic()};
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  int violations = 0, traces = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto inst = make_instance(2000 + rep, 40, 10, 2, 0.3, rep % 2);
    const double lam = testing::log_uniform(rng, 1e-8, 1e-1);
    const double sigma = testing::log_uniform(rng, 0.05, 2.0);
    for (const auto& s : losses) {
      const auto& tr = irls_fit(*inst.sys, s, inst.y, lam, sigma).report.objective_trace;
      ++traces;
      for (std::size_t k = 1; k < tr.size(); ++k) {
        worst = std::max(worst, tr[k] - tr[k - 1]);
        if (tr[k] > tr[k - 1] + kSlack) ++violations;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {violations == 0 && secs < kBudgetSeconds,
          fmt("%d traces, %d increases beyond %.0e (largest step change %.2e), %.2f s (budget %.0f s)", traces,
              violations, kSlack, worst, secs, kBudgetSeconds)};
}

// 3. First-order condition at convergence and gradient vs central differences.
Outcome c3_stationarity() {
  constexpr double kStationarityTol = 1e-6;
  constexpr double kGradientRelTol = 1e-5;
  std::mt19937_64 rng(303);
  double worst_stat = 0.0, worst_fd = 0.0;
  bool all_converged = true;
  for (int rep = 0; rep < 20; ++rep) {
    auto inst = make_instance(3000 + rep, 40, 10, 2, 0.3, rep % 2);
    const double lam = testing::log_uniform(rng, 1e-6, 1e-2);
    for (const auto& s : {LossSpec::huber(), LossSpec::logistic(), LossSpec::quantile(0.5)}) {
      const double sigma = 0.3;
      const auto res = irls_fit(*inst.sys, s, inst.y, lam, sigma);
      all_converged &= res.report.converged;
      worst_stat = std::max(worst_stat, res.report.stationarity_norm);

      Eigen::VectorXd th = res.theta;
      for (auto& v : th) v += 0.05 * std::normal_distribution<double>(0.0, 1.0)(rng);
      const Eigen::VectorXd g = objective_gradient(*inst.sys, s, th, inst.y, lam, sigma);
      Eigen::VectorXd fd(th.size());
      for (Eigen::Index j = 0; j < th.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(th[j]));
        Eigen::VectorXd a = th, b = th;
        a[j] += h;
        b[j] -= h;
        fd[j] = (objective(*inst.sys, s, a, inst.y, lam, sigma) - objective(*inst.sys, s, b, inst.y, lam, sigma)) /
                (2.0 * h);
      }
      worst_fd = std::max(worst_fd, (fd - g).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()));
    }
  }
  return {all_converged && worst_stat < kStationarityTol && worst_fd < kGradientRelTol,
          fmt("max stationarity %.2e (tol %.0e), max gradient/FD gap %.2e (tol %.0e), all converged: %s", worst_stat,
              kStationarityTol, worst_fd, kGradientRelTol, all_converged ? "yes" : "no")};
}

// 4. Natural-spline constraint on fitted models and the penalty identity.
Outcome c4_natural_spline() {
  constexpr double kConstraintTol = 1e-8;
  constexpr double kIdentityRelTol = 1e-8;
  double worst_c = 0.0;
  int models = 0;
  for (int rep = 0; rep < 5; ++rep) {
    auto inst = make_instance(4000 + rep, 50, 15, 2 + rep % 2, 0.2, 1);
    for (const auto& s : {LossSpec::square(), LossSpec::quantile(0.5), LossSpec::huber(), LossSpec::logistic()}) {
      const FitModel m = fit(*inst.sys, *inst.basis, inst.y, s, LambdaPolicy::cross_validated(logspace_grid(1e-8, 1, 9)));
      worst_c = std::max(worst_c, (m.basis.phi().transpose() * m.coeffs.gamma).cwiseAbs().maxCoeff());
      ++models;
    }
  }
  // A two-dimensional fit as well.
  {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd pts(20, 2);
    for (int j = 0; j < 20; ++j) pts.row(j) = Eigen::RowVector2d(u(rng), u(rng));
    const Grid g = build_grid_nd(pts, DomainBox{Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()});
    sim::Rng rx(9);
    const Eigen::MatrixXd x = sim::generate_field_predictors(rx, 80, pts);
    Eigen::VectorXd y = x.rowwise().sum() / 20.0;
    for (auto& v : y) v += 0.1 * std::normal_distribution<double>(0.0, 1.0)(rng);
    const FitModel m = fit(x, y, g, 2, LossSpec::huber(), LambdaPolicy::fixed(1e-4));
    worst_c = std::max(worst_c, (m.basis.phi().transpose() * m.coeffs.gamma).cwiseAbs().maxCoeff());
    ++models;
  }

  double worst_id = 0.0;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    auto inst = make_instance(4100 + k, 5, 8 + k % 10, 2 + k % 2);
    Eigen::VectorXd theta(inst.sys->dim());
    for (auto& v : theta) v = z(rng);
    const auto c = SplineCoefficients::from_theta(*inst.basis, theta);
    const Eigen::VectorXd b = evaluate_spline(*inst.basis, c, inst.grid->points());
    const double direct = b.cwiseAbs2().dot(inst.grid->volumes()) + c.gamma.dot(inst.basis->omega() * c.gamma);
    const double quad = theta.dot(inst.sys->h() * theta);
    worst_id = std::max(worst_id, std::abs(quad - direct) / std::abs(direct));
  }
  return {worst_c < kConstraintTol && worst_id < kIdentityRelTol,
          fmt("%d fitted models: max |Phi^T gamma| %.2e (tol %.0e); 50 random thetas: max relative penalty gap "
              "%.2e (tol %.0e)",
              models, worst_c, kConstraintTol, worst_id, kIdentityRelTol)};
}

// 5. J-tilde <= J for random natural splines on (0,1).
Outcome c5_penalty_equivalence() {
  constexpr double kSlack = 1e-10;
  constexpr double kQuadratureRelTol = 1e-9;  // I_m by quadrature vs gamma^T Omega gamma
  std::mt19937_64 rng(505);
  std::normal_distribution<double> z(0.0, 1.0);
  int violations = 0;
  double worst_quad = 0.0, min_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 200; ++k) {
    const int m = 2 + k % 2;
    const int p = 6 + k % 25;
    const std::vector<double> t = testing::equispaced(p);
    const Grid grid = build_grid_1d(t, 0.0, 1.0);
    const TpsBasis basis(grid, m);
    Eigen::VectorXd xi(basis.q().cols()), delta(basis.poly_dim());
    for (auto& v : xi) v = z(rng);
    for (auto& v : delta) v = z(rng);
    const auto c = SplineCoefficients::make(basis, 0.0, xi, delta);
    const Eigen::VectorXd beta = evaluate_spline(basis, c, grid.points());
    const Eigen::VectorXd mu = grid.volumes();

    // m-th derivative of sum_j gamma_j * c0 |s - t_j|^{2m-1}; the polynomial part
    // has degree < m and drops out.
    const double c0 = eta(m, 1, 1.0);
    double falling = 1.0;
    for (int q = 0; q < m; ++q) falling *= (2 * m - 1 - q);
    auto dm = [&](double s) {
      double acc = 0.0;
      for (int j = 0; j < p; ++j) {
        const double u = s - t[j];
        const double sgn = (u < 0.0 && m % 2 == 1) ? -1.0 : 1.0;
        acc += c.gamma[j] * c0 * falling * sgn * std::pow(std::abs(u), m - 1);
      }
      return acc;
    };
    const double i_m = testing::piecewise_gauss([&](double s) { return dm(s) * dm(s); }, 0.0, 1.0, t, 12);
    const double i_omega = c.gamma.dot(basis.omega() * c.gamma);
    worst_quad = std::max(worst_quad, std::abs(i_m - i_omega) / std::max(1e-300, std::abs(i_omega)));

    // Discrete projection onto polynomials of degree < m under <f, g>_p.
    Eigen::MatrixXd v(p, m);
    for (int j = 0; j < p; ++j)
      for (int q = 0; q < m; ++q) v(j, q) = std::pow(t[j], q);
    const Eigen::MatrixXd gram = v.transpose() * mu.asDiagonal() * v;
    const Eigen::VectorXd coef = gram.ldlt().solve(v.transpose() * mu.asDiagonal() * beta);
    const Eigen::VectorXd proj = v * coef;

    const double j_tilde2 = proj.cwiseAbs2().dot(mu) + i_m;
    const double j2 = beta.cwiseAbs2().dot(mu) + i_m;
    const double jt = std::sqrt(j_tilde2), jj = std::sqrt(j2);
    min_gap = std::min(min_gap, jj - jt);
    if (!(jt <= jj + kSlack)) ++violations;
  }
  return {violations == 0 && worst_quad < kQuadratureRelTol,
          fmt("200 splines (m = 2, 3; p = 6..30): %d violations of J~ <= J + %.0e, min J - J~ = %.2e; quadrature vs "
              "gamma^T Omega gamma max rel gap %.2e (tol %.0e)",
              violations, kSlack, min_gap, worst_quad, kQuadratureRelTol)};
}

// 6. Hat-formula LOO residuals vs brute-force refits, least squares.
Outcome c6_loo() {
  constexpr double kTol = 1e-8;
  std::mt19937_64 rng(606);
  double worst = 0.0;
  int cases = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = make_instance(6000 + rep, 25, 6 + rep % 5);
    for (int k = 0; k < 3; ++k) {
      const double lam = testing::log_uniform(rng, 1e-8, 1.0);
      const auto loo = loo_residuals(*inst.sys, LossSpec::square(), inst.y, lam, 1.0);
      const Eigen::VectorXd ref = testing::brute_force_loo(inst.sys->z(), inst.sys->h(), inst.y, lam);
      worst = std::max(worst, (loo.loo_residuals - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
      ++cases;
    }
  }
  return {worst < kTol, fmt("%d (instance, lambda) pairs at n = 25: max gap %.2e (tol %.0e)", cases, worst, kTol)};
}

// 7. M-scale equation, closed form for chi = x^2, equivariance.
Outcome c7_mscale() {
  constexpr double kEquationTol = 1e-10;
  constexpr double kClosedFormTol = 1e-10;
  constexpr double kEquivarianceTol = 1e-10;
  std::mt19937_64 rng(707);
  std::normal_distribution<double> z(0.0, 1.0);
  std::student_t_distribution<double> t1(1.0);
  double worst_eq = 0.0, worst_cf = 0.0, worst_eqv = 0.0;
  int inputs = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + rep % 97;
    Eigen::VectorXd r(n);
    for (auto& v : r) v = rep % 3 == 0 ? t1(rng) : z(rng) * (1 + rep % 7);
    if (rep % 5 == 0 && n > 4) r.head(n / 3).setZero();  // exact ties at zero, fewer than half
    if (rep % 4 == 0) r[0] = 1e8;                        // gross outlier
    if (r.cwiseAbs().maxCoeff() == 0.0) continue;
    ++inputs;
    const ScaleSpec s = ScaleSpec::bisquare();
    const double sigma = m_scale(r, s);
    double lhs = 0.0;
    for (double v : r) lhs += chi(s, v / sigma);
    worst_eq = std::max(worst_eq, std::abs(lhs / n - s.b));

    const Eigen::VectorXd rc = (r.array() - r.mean()).matrix();
    if (rc.cwiseAbs().maxCoeff() > 0.0) {
      const double sd = std::sqrt(rc.squaredNorm() / n);
      worst_cf = std::max(worst_cf, std::abs(m_scale(rc, ScaleSpec::square()) - std::sqrt(2.0) * sd) / sd);
    }
    for (double c : {1e-4, 0.3, 7.0, 1e5}) {
      worst_eqv = std::max(worst_eqv, std::abs(m_scale(c * r, s) - c * sigma) / (c * sigma));
    }
  }
  return {worst_eq < kEquationTol && worst_cf < kClosedFormTol && worst_eqv < kEquivarianceTol,
          fmt("%d inputs: equation residual %.2e (tol %.0e), sqrt(2)*sd relative gap %.2e (tol %.0e), equivariance "
              "%.2e (tol %.0e)",
              inputs, worst_eq, kEquationTol, worst_cf, kClosedFormTol, worst_eqv, kEquivarianceTol)};
}

// 8. Smoothed median fit vs exact L1 by active-set enumeration.
Outcome c8_quantile_l1() {
  constexpr double kTol = 1e-3;
  constexpr double kLambda = 1e-8;
  double worst_obj = 0.0, worst_fit = 0.0;
  int compared_fits = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 5 + rep % 2;
    auto inst = make_instance(8000 + rep, n, 3, 2, 0.5, 1);
    const auto res = irls_fit(*inst.sys, LossSpec::quantile(0.5, 1e-4), inst.y, kLambda, 1.0);
    const auto ref = testing::exact_l1(inst.sys->z(), inst.sys->h(), inst.y, kLambda);
    const double obj = testing::l1_objective(inst.sys->z(), inst.sys->h(), inst.y, res.theta, kLambda);
    worst_obj = std::max(worst_obj, std::abs(obj - ref.objective));
    // Fitted values are only pinned down when the L1 minimizer is unique.
    if (ref.runner_up - ref.objective > 1e-6) {
      worst_fit = std::max(worst_fit, (inst.sys->z() * (res.theta - ref.theta)).cwiseAbs().maxCoeff());
      ++compared_fits;
    }
  }
  return {worst_obj < kTol && worst_fit < kTol,
          fmt("10 instances (n = 5, 6; p = 3): max objective gap %.2e, max fitted-value gap %.2e over %d isolated "
              "minimizers (tol %.0e)",
              worst_obj, worst_fit, compared_fits, kTol)};
}

sim::SimConfig table_config(int model_id) {
  sim::SimConfig cfg;
  cfg.model_id = model_id;
  cfg.n = 300;
  cfg.p_observed = 100;
  cfg.nsr = 0.1;
  cfg.reps = 100;
  cfg.seed = 42;
  cfg.losses = {LossSpec::square(), LossSpec::huber()};
  cfg.threads = worker_threads();
  return cfg;
}

// 9. Heavy-tailed errors: Huber beats least squares.
Outcome c9_robust_ordering() {
  constexpr double kSeeRatio = 0.6;
  constexpr double kSpeRatio = 0.5;
  constexpr double kBudgetSeconds = 1800.0;
  const auto start = std::chrono::steady_clock::now();
  const auto r = sim::run_benchmark(table_config(2));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& sq = r.per_loss[0];
  const auto& hu = r.per_loss[1];
  const bool see_ok = hu.see.mean < kSeeRatio * sq.see.mean;
  const bool spe_ok = hu.spe.mean < kSpeRatio * sq.spe.mean;
  return {see_ok && spe_ok && secs <= kBudgetSeconds,
          fmt("Model 2: SEE huber %.4g vs square %.4g (ratio %.3f, need < %.1f: %s); SPE huber %.4g vs square %.4g "
              "(ratio %.3f, need < %.1f: %s); %d failed reps; %.0f s on %d thread(s)",
              hu.see.mean, sq.see.mean, hu.see.mean / sq.see.mean, kSeeRatio, see_ok ? "ok" : "FAIL", hu.spe.mean,
              sq.spe.mean, hu.spe.mean / sq.spe.mean, kSpeRatio, spe_ok ? "ok" : "FAIL", r.failed_replicates, secs,
              worker_threads())};
}

// 10. Clean Gaussian errors: Huber loses little.
Outcome c10_efficiency() {
  constexpr double kMaxRatio = 1.25;
  const auto r = sim::run_benchmark(table_config(1));
  const double sq = r.per_loss[0].spe.mean, hu = r.per_loss[1].spe.mean;
  return {sq <= hu && hu <= kMaxRatio * sq,
          fmt("Model 1: SPE square %.4g, huber %.4g (ratio %.3f, need 1 <= ratio <= %.2f)", sq, hu, hu / sq, kMaxRatio)};
}

// 11. Median SEE nonincreasing in p and in n, within one MAD.
Outcome c11_rate_sweep() {
  auto sweep = [](const std::vector<std::pair<int, int>>& configs, std::string& log) {
    bool ok = true;
    double prev_med = 0.0, prev_mad = 0.0;
    for (std::size_t k = 0; k < configs.size(); ++k) {
      sim::SimConfig cfg;
      cfg.model_id = 1;
      cfg.n = configs[k].first;
      cfg.p_observed = configs[k].second;
      cfg.reps = 30;
      cfg.seed = 1100;
      cfg.losses = {LossSpec::square()};
      cfg.threads = worker_threads();
      const auto r = sim::run_benchmark(cfg);
      const auto& v = r.per_loss[0].see.values;
      const double med = median(v), d = mad(v);
      log += fmt(" (n=%d,p=%d) %.4g+-%.2g", cfg.n, cfg.p_observed, med, d);
      if (k > 0 && med > prev_med + std::max(d, prev_mad)) ok = false;
      prev_med = med;
      prev_mad = d;
    }
    return ok;
  };
  std::string log_p, log_n;
  const bool in_p = sweep({{200, 10}, {200, 25}, {200, 50}, {200, 100}}, log_p);
  const bool in_n = sweep({{50, 100}, {100, 100}, {200, 100}, {400, 100}}, log_n);
  return {in_p && in_n, "median+-MAD over p:" + log_p + (in_p ? " ok" : " FAIL") + "; over n:" + log_n +
                            (in_n ? " ok" : " FAIL")};
}

// 12. Planted vertical outliers are flagged by the Huber fit.
Outcome c12_outliers() {
  constexpr double kMinPlanted = 9.0;
  constexpr double kMaxClean = 5.0;
  constexpr int kSeeds = 30, kN = 150, kP = 25, kPlanted = 10;
  double planted_total = 0.0, clean_total = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    sim::Rng rx(sim::stream_seed(1200, seed, 0)), ry(sim::stream_seed(1200, seed, 1)), rs(sim::stream_seed(1200, seed, 2));
    const Eigen::MatrixXd x_full = sim::generate_predictors(rx, kN, 1);
    const auto resp = sim::generate_responses(ry, x_full, 0.1, 1);
    const auto subset = sim::subsample_grid(rs, kP);
    const Eigen::VectorXd t_full = sim::full_grid();
    std::vector<double> t;
    Eigen::MatrixXd x(kN, kP);
    for (int j = 0; j < kP; ++j) {
      t.push_back(t_full[subset[j]]);
      x.col(j) = x_full.col(subset[j]);
    }
    Eigen::VectorXd y = resp.y;
    // Outliers at every 15th observation.
    std::vector<bool> planted(kN, false);
    for (int k = 0; k < kPlanted; ++k) {
      planted[k * 15] = true;
      y[k * 15] += 8.0 * resp.sigma_noise;
    }
    const FitModel m = fit(x, y, build_grid_1d(t, 0.0, 1.0), 2, LossSpec::huber(), LambdaPolicy::cross_validated());
    const auto rep = detect_outliers(m, 2.6);
    for (auto i : rep.indices) (planted[i] ? planted_total : clean_total) += 1.0;
  }
  const double planted_avg = planted_total / kSeeds, clean_avg = clean_total / kSeeds;
  return {planted_avg >= kMinPlanted && clean_avg <= kMaxClean,
          fmt("%d seeds, n = %d, p = %d: on average %.2f of %d planted flagged (need >= %.0f), %.2f clean flagged "
              "(need <= %.0f)",
              kSeeds, kN, kP, planted_avg, kPlanted, kMinPlanted, clean_avg, kMaxClean)};
}

double beta_2d(double t, double s) {
  return 0.5 + t - s + 2.0 * (t - 0.5) * (s - 0.5) + std::exp(-((t - 0.3) * (t - 0.3) + (s - 0.7) * (s - 0.7)) / 0.05);
}

// 13. Two-dimensional recovery on a 12 x 12 grid.
Outcome c13_two_dimensional() {
  // Nine of the ten replicates land between 0.017 and 0.056. In replicate 8 the
  // RCV curve is flat below lambda = 1e-3 and its minimum sits at 1.8e-8, where
  // the coefficient estimate is rough (SEE 0.23), which lifts the mean to 0.0555.
  constexpr double kMaxMeanSee = 0.05;
  constexpr int kFine = 36, kCoarse = 12, kN = 400, kReps = 10;
  constexpr double kNsr = 0.05;
  Eigen::MatrixXd fine(kFine * kFine, 2);
  for (int i = 0; i < kFine; ++i)
    for (int j = 0; j < kFine; ++j) fine.row(i * kFine + j) = Eigen::RowVector2d((i + 0.5) / kFine, (j + 0.5) / kFine);
  Eigen::MatrixXd pts(kCoarse * kCoarse, 2);
  std::vector<int> cols;
  for (int i = 0; i < kCoarse; ++i)
    for (int j = 0; j < kCoarse; ++j) {
      pts.row(i * kCoarse + j) = Eigen::RowVector2d((i + 0.5) / kCoarse, (j + 0.5) / kCoarse);
      cols.push_back((3 * i + 1) * kFine + 3 * j + 1);  // coarse points are fine-lattice points
    }
  const Grid grid = build_grid_nd(pts, DomainBox{Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()}, {144});
  const TpsBasis basis(grid, 2);
  Eigen::VectorXd b_fine(fine.rows()), b_coarse(pts.rows());
  for (Eigen::Index k = 0; k < fine.rows(); ++k) b_fine[k] = beta_2d(fine(k, 0), fine(k, 1));
  for (Eigen::Index k = 0; k < pts.rows(); ++k) b_coarse[k] = beta_2d(pts(k, 0), pts(k, 1));

  std::vector<double> see;
  for (int rep = 0; rep < kReps; ++rep) {
    sim::Rng rx(sim::stream_seed(1300, rep, 0)), ry(sim::stream_seed(1300, rep, 1));
    const Eigen::MatrixXd xf = sim::generate_field_predictors(rx, kN, fine);
    const Eigen::VectorXd signal = xf * b_fine / static_cast<double>(fine.rows());
    const double var = (signal.array() - signal.mean()).square().mean();
    std::normal_distribution<double> z(0.0, std::sqrt(kNsr * var));
    Eigen::VectorXd y = signal;
    for (auto& v : y) v += z(ry);
    Eigen::MatrixXd xc(kN, pts.rows());
    for (Eigen::Index k = 0; k < pts.rows(); ++k) xc.col(k) = xf.col(cols[k]);
    const DesignSystem sys(xc, basis);
    const FitModel m = fit(sys, basis, y, LossSpec::square(), LambdaPolicy::cross_validated());
    see.push_back((m.beta_at_knots() - b_coarse).cwiseAbs2().dot(grid.volumes()));
  }
  const double mean = std::accumulate(see.begin(), see.end(), 0.0) / kReps;
  return {mean < kMaxMeanSee,
          fmt("d = 2, m = 2, 144 knots, n = %d, NSR %.2f, %d reps: mean SEE %.4f (max %.4f; need mean < %.2f)", kN,
              kNsr, kReps, mean, *std::max_element(see.begin(), see.end()), kMaxMeanSee)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 14. simulate output is byte-identical on 1 and 8 threads.
Outcome c14_determinism() {
  const std::string dir = FLRR_TEST_TMPDIR;
  auto run = [&](const char* threads, const std::string& out) {
    return cli::run({"flrr", "simulate", "--model-id", "2", "--n", "80", "--p", "25,100", "--nsr", "0.1", "--reps",
                     "16", "--seed", "1400", "--losses", "square,l1,huber,logistic", "--lambda-grid",
                     "logspace:1e-7:10:10", "--no-timing", "--threads", threads, "--out", out});
  };
  const std::string a = dir + "/determinism_t1.csv", b = dir + "/determinism_t8.csv";
  const int ra = run("1", a), rb = run("8", b);
  const std::string ta = slurp(a), tb = slurp(b);
  const bool same = ra == 0 && rb == 0 && !ta.empty() && ta == tb;
  return {same, fmt("exit codes %d/%d, %zu vs %zu bytes, identical: %s", ra, rb, ta.size(), tb.size(),
                    ta == tb ? "yes" : "no")};
}

}  // namespace

// Optional arguments pick criteria by number; no arguments runs all of them.
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 LS oracle equivalence", c1_ls_oracle},
      {"2 monotone descent", c2_descent},
      {"3 stationarity and gradient", c3_stationarity},
      {"4 natural spline characterization", c4_natural_spline},
      {"5 penalty equivalence lower bound", c5_penalty_equivalence},
      {"6 LOO exactness for LS", c6_loo},
      {"7 M-scale correctness", c7_mscale},
      {"8 quantile vs exact L1", c8_quantile_l1},
      {"9 robustness ordering (Model 2)", c9_robust_ordering},
      {"10 clean-data efficiency (Model 1)", c10_efficiency},
      {"11 rate sweep", c11_rate_sweep},
      {"12 outlier detection", c12_outliers},
      {"13 two-dimensional recovery", c13_two_dimensional},
      {"14 thread-count determinism", c14_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(std::atoi(name))) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
