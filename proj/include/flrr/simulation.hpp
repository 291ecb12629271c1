#pragma once

#include "flrr/fl_regression.hpp"
#include "flrr/grid.hpp"
#include "flrr/loss.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace flrr::sim {

using Rng = std::mt19937_64;

enum class KlVariant { standard, literal };

/// Seed of an independent stream keyed by (seed, replicate, stage).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stage);

inline constexpr int kFullGridSize = 100;
inline constexpr int kKlTerms = 50;

/// t_k = (k - 1/2)/100, k = 1..100.
Eigen::VectorXd full_grid();

/// beta_0(t) = -sin(5t/1.2)/0.5 - 1.
double beta0(double t);

/// X_i(t_k) = sqrt(2) sum_{j<=50} W_ij sin((j-1/2) pi t_k) / ((j-1/2) pi [t_k]), with
/// the bracketed t_k present only in the literal variant. Scores are standard
/// Gaussian (models 1, 2) or t with 2 degrees of freedom (model 3).
Eigen::MatrixXd generate_predictors(Rng& rng, int n, int model_id,
                                    KlVariant variant = KlVariant::standard);

/// Same expansion for given scores (n x 50).
Eigen::MatrixXd kl_curves(const Eigen::MatrixXd& scores, const Eigen::VectorXd& t,
                          KlVariant variant = KlVariant::standard);

/// Random fields on (0,1)^2 from the tensor product of the standard
/// expansion: X(t, s) = sum_{j,k <= terms} W_jk phi_j(t) phi_k(s) with
/// phi_j(t) = sqrt(2) sin((j-1/2) pi t) / ((j-1/2) pi) and Gaussian scores.
/// `points` is q x 2.
Eigen::MatrixXd generate_field_predictors(Rng& rng, int n, const Eigen::MatrixXd& points, int terms = 10);

struct Responses {
  Eigen::VectorXd y;
  Eigen::VectorXd signal;
  double sigma_noise = 0.0;
};

/// signal_i = (1/100) sum_k X_i(t_k) beta(t_k); sigma^2 = nsr * var(signal)
/// (population variance); errors are standard Gaussian (models 1, 3) or t_2
/// with unit scale (model 2).
Responses generate_responses(Rng& rng, const Eigen::MatrixXd& x_full, double nsr, int model_id,
                             const std::function<double(double)>& beta = beta0);

/// Sorted 0-based indices of p_observed distinct points of the full grid,
/// drawn uniformly without replacement.
std::vector<int> subsample_grid(Rng& rng, int p_observed);

struct ErrorMetrics {
  double spe = 0.0;
  double see = 0.0;
};

/// SPE and SEE with consecutive-spacing weights over the retained points
/// (j >= 2). beta_hat holds the fitted coefficient at the retained points.
ErrorMetrics spe_see(double alpha_hat, const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x_full,
                     const Eigen::VectorXd& beta0_full, const std::vector<int>& subset);
ErrorMetrics spe_see(const FitModel& model, const Eigen::MatrixXd& x_full,
                     const Eigen::VectorXd& beta0_full, const std::vector<int>& subset);

/// d_i = fine Riemann sum of X_i beta minus the coarse-grid Riemann sum; the
/// coarse grid points must be columns `coarse_cols` of the fine grid.
Eigen::VectorXd discretization_error(const Grid& fine, const Eigen::MatrixXd& x_fine, const Grid& coarse,
                                     const std::vector<int>& coarse_cols,
                                     const std::function<double(const Eigen::VectorXd&)>& beta);

struct SimConfig {
  int model_id = 1;
  int n = 300;
  int p_observed = 100;
  double nsr = 0.1;
  int reps = 100;
  std::uint64_t seed = 1;
  std::vector<LossSpec> losses = {LossSpec::square(), LossSpec::quantile(0.5), LossSpec::huber(),
                                  LossSpec::logistic()};
  int m = 2;
  KlVariant kl_variant = KlVariant::standard;
  std::vector<double> lambda_grid;  // empty = default grid
  int threads = 1;

  void validate() const;
};

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;  // NaN when fewer than two replicates succeeded
  std::vector<double> values;
};

struct LossSummary {
  LossSpec loss;
  MetricSummary spe;
  MetricSummary see;
  std::vector<double> seconds;
  double seconds_mean = 0.0;
};

struct BenchResult {
  SimConfig config;
  std::vector<LossSummary> per_loss;
  int failed_replicates = 0;
};

/// One replicate per stream: generate curves and responses, subsample the
/// grid, fit every loss with lambda chosen by robust CV, record SPE, SEE and
/// wall time. Replicates run in parallel on config.threads workers and are
/// reduced in replicate order. Failed replicates are excluded and counted;
/// more than 5% failures is an error.
BenchResult run_benchmark(const SimConfig& config);

/// Name of a loss in result tables: square, l1, quantile:<tau>, huber, logistic.
std::string loss_label(const LossSpec& loss);

/// Writes table.csv: model,nsr,p,loss,metric,mean,se,reps,seconds_mean.
/// With include_timing = false the seconds column is written as NA.
void write_table(const std::vector<BenchResult>& results, const std::string& path,
                 bool include_timing = true);

}  // namespace flrr::sim
