#include "flrr/simulation.hpp"

#include "flrr/error.hpp"
#include "flrr/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

namespace flrr::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_model_id(int model_id) {
  if (model_id < 1 || model_id > 3) throw ValidationError("model id must be 1, 2 or 3");
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  const double n = static_cast<double>(values.size());
  if (values.empty()) {
    s.mean = s.se = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) {
      s.se = std::numeric_limits<double>::quiet_NaN();
    } else {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  s.values = std::move(values);
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct ReplicateOutcome {
  bool ok = false;
  std::vector<ErrorMetrics> metrics;
  std::vector<double> seconds;
};

ReplicateOutcome run_replicate(const SimConfig& cfg, int rep, const Eigen::VectorXd& t_full,
                               const Eigen::VectorXd& beta0_full) {
  ReplicateOutcome out;
  Rng rng_x(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep), 0));
  Rng rng_y(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep), 1));
  Rng rng_s(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep), 2));

  const Eigen::MatrixXd x_full = generate_predictors(rng_x, cfg.n, cfg.model_id, cfg.kl_variant);
  const Responses resp = generate_responses(rng_y, x_full, cfg.nsr, cfg.model_id);
  const std::vector<int> subset = subsample_grid(rng_s, cfg.p_observed);

  std::vector<double> t_obs(subset.size());
  Eigen::MatrixXd x_obs(cfg.n, static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    t_obs[j] = t_full[subset[j]];
    x_obs.col(static_cast<Eigen::Index>(j)) = x_full.col(subset[j]);
  }

  try {
    const Grid grid = build_grid_1d(t_obs, 0.0, 1.0);
    const TpsBasis basis = build_basis(grid, cfg.m);
    const DesignSystem sys = assemble(x_obs, basis);
    const auto policy = LambdaPolicy::cross_validated(cfg.lambda_grid, RcvOptions{true, 1});
    for (const LossSpec& loss : cfg.losses) {
      const auto start = std::chrono::steady_clock::now();
      const FitModel model = fit(sys, basis, resp.y, loss, policy);
      const auto stop = std::chrono::steady_clock::now();
      out.seconds.push_back(std::chrono::duration<double>(stop - start).count());
      out.metrics.push_back(spe_see(model, x_full, beta0_full, subset));
    }
    out.ok = true;
  } catch (const NumericalError&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stage) {
  return splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ (stage * 0xd1b54a32d192ed03ULL));
}

Eigen::VectorXd full_grid() {
  Eigen::VectorXd t(kFullGridSize);
  for (int k = 0; k < kFullGridSize; ++k) t[k] = (k + 0.5) / kFullGridSize;
  return t;
}

double beta0(double t) { return -std::sin(5.0 * t / 1.2) / 0.5 - 1.0; }

Eigen::MatrixXd kl_curves(const Eigen::MatrixXd& scores, const Eigen::VectorXd& t, KlVariant variant) {
  const Eigen::Index terms = scores.cols();
  Eigen::MatrixXd basis(terms, t.size());
  for (Eigen::Index j = 0; j < terms; ++j) {
    const double freq = (static_cast<double>(j) + 0.5) * std::numbers::pi;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double denom = variant == KlVariant::literal ? freq * t[k] : freq;
      basis(j, k) = std::numbers::sqrt2 * std::sin(freq * t[k]) / denom;
    }
  }
  return scores * basis;
}

Eigen::MatrixXd generate_predictors(Rng& rng, int n, int model_id, KlVariant variant) {
  check_model_id(model_id);
  if (n < 1) throw ValidationError("n must be positive");
  Eigen::MatrixXd w(n, kKlTerms);
  if (model_id == 3) {
    std::student_t_distribution<double> dist(2.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < kKlTerms; ++j) w(i, j) = dist(rng);
  } else {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < kKlTerms; ++j) w(i, j) = dist(rng);
  }
  return kl_curves(w, full_grid(), variant);
}

Eigen::MatrixXd generate_field_predictors(Rng& rng, int n, const Eigen::MatrixXd& points, int terms) {
  if (n < 1 || terms < 1) throw ValidationError("n and terms must be positive");
  if (points.cols() != 2) throw ValidationError("field points must be two-dimensional");
  const auto q = points.rows();
  Eigen::MatrixXd phi_t(terms, q), phi_s(terms, q);
  for (int j = 0; j < terms; ++j) {
    const double freq = (j + 0.5) * std::numbers::pi;
    for (Eigen::Index k = 0; k < q; ++k) {
      phi_t(j, k) = std::numbers::sqrt2 * std::sin(freq * points(k, 0)) / freq;
      phi_s(j, k) = std::numbers::sqrt2 * std::sin(freq * points(k, 1)) / freq;
    }
  }
  Eigen::MatrixXd basis(terms * terms, q);
  for (int j = 0; j < terms; ++j)
    for (int l = 0; l < terms; ++l) basis.row(j * terms + l) = phi_t.row(j).cwiseProduct(phi_s.row(l));
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd w(n, terms * terms);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  return w * basis;
}

Responses generate_responses(Rng& rng, const Eigen::MatrixXd& x_full, double nsr, int model_id,
                             const std::function<double(double)>& beta) {
  check_model_id(model_id);
  if (!(nsr >= 0.0)) throw ValidationError("noise-to-signal ratio must be nonnegative");
  if (x_full.cols() != kFullGridSize) throw ValidationError("curves must be sampled on the full grid");
  const Eigen::VectorXd t = full_grid();
  Eigen::VectorXd b(t.size());
  for (Eigen::Index k = 0; k < t.size(); ++k) b[k] = beta(t[k]);

  Responses out;
  out.signal = x_full * b / static_cast<double>(kFullGridSize);
  const double mean = out.signal.mean();
  const double var = (out.signal.array() - mean).square().mean();
  if (!(var > 0.0)) throw NumericalError("signal has zero variance; the noise level is undefined");
  out.sigma_noise = std::sqrt(nsr * var);

  Eigen::VectorXd eps(x_full.rows());
  if (model_id == 2) {
    std::student_t_distribution<double> dist(2.0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = dist(rng);
  } else {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = dist(rng);
  }
  out.y = out.signal + out.sigma_noise * eps;
  return out;
}

std::vector<int> subsample_grid(Rng& rng, int p_observed) {
  if (p_observed < 1 || p_observed > kFullGridSize) {
    throw ValidationError("p_observed must lie in [1, 100]");
  }
  std::vector<int> all(kFullGridSize);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> out;
  out.reserve(p_observed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), p_observed, rng);
  std::sort(out.begin(), out.end());
  return out;
}

ErrorMetrics spe_see(double alpha_hat, const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x_full,
                     const Eigen::VectorXd& beta0_full, const std::vector<int>& subset) {
  const auto p = static_cast<Eigen::Index>(subset.size());
  if (p < 2) throw ValidationError("SEE needs at least two observed points");
  if (beta_hat.size() != p) throw ValidationError("beta_hat must hold one value per retained point");
  const Eigen::VectorXd t = full_grid();

  ErrorMetrics m;
  const Eigen::VectorXd truth = x_full * beta0_full / static_cast<double>(kFullGridSize);
  Eigen::VectorXd approx = Eigen::VectorXd::Constant(x_full.rows(), alpha_hat);
  for (Eigen::Index j = 1; j < p; ++j) {
    const double spacing = t[subset[j]] - t[subset[j - 1]];
    approx += x_full.col(subset[j]) * (beta_hat[j] * spacing);
    const double diff = beta0_full[subset[j]] - beta_hat[j];
    m.see += diff * diff * spacing;
  }
  m.spe = (truth - approx).squaredNorm() / static_cast<double>(x_full.rows());
  return m;
}

ErrorMetrics spe_see(const FitModel& model, const Eigen::MatrixXd& x_full,
                     const Eigen::VectorXd& beta0_full, const std::vector<int>& subset) {
  return spe_see(model.coeffs.alpha, model.beta_at_knots(), x_full, beta0_full, subset);
}

Eigen::VectorXd discretization_error(const Grid& fine, const Eigen::MatrixXd& x_fine, const Grid& coarse,
                                     const std::vector<int>& coarse_cols,
                                     const std::function<double(const Eigen::VectorXd&)>& beta) {
  if (x_fine.cols() != fine.size()) throw ValidationError("X_fine must have one column per fine point");
  if (static_cast<Eigen::Index>(coarse_cols.size()) != coarse.size()) {
    throw ValidationError("need one fine column index per coarse point");
  }
  Eigen::VectorXd bf(fine.size());
  for (Eigen::Index k = 0; k < fine.size(); ++k) bf[k] = beta(fine.points().row(k).transpose());
  Eigen::VectorXd bc(coarse.size());
  Eigen::MatrixXd xc(x_fine.rows(), coarse.size());
  for (Eigen::Index j = 0; j < coarse.size(); ++j) {
    const int col = coarse_cols[j];
    if (col < 0 || col >= fine.size()) throw ValidationError("coarse column index out of range");
    bc[j] = beta(coarse.points().row(j).transpose());
    xc.col(j) = x_fine.col(col);
  }
  return x_fine * bf.cwiseProduct(fine.volumes()) - xc * bc.cwiseProduct(coarse.volumes());
}

void SimConfig::validate() const {
  check_model_id(model_id);
  if (n < 2) throw ValidationError("n must be at least 2");
  if (p_observed < 2 || p_observed > kFullGridSize) throw ValidationError("p must lie in [2, 100]");
  if (!(nsr > 0.0)) throw ValidationError("NSR must be positive");
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (losses.empty()) throw ValidationError("need at least one loss");
  for (const auto& l : losses) {
    l.validate();
    if (l.kind == LossKind::l1_exact) throw ValidationError("l1_exact cannot be benchmarked");
  }
}

BenchResult run_benchmark(const SimConfig& config) {
  config.validate();
  const Eigen::VectorXd t_full = full_grid();
  Eigen::VectorXd b0(t_full.size());
  for (Eigen::Index k = 0; k < t_full.size(); ++k) b0[k] = beta0(t_full[k]);

  std::vector<ReplicateOutcome> outcomes(config.reps);
  parallel_for(static_cast<std::size_t>(config.reps), resolve_threads(config.threads), [&](std::size_t r) {
    outcomes[r] = run_replicate(config, static_cast<int>(r), t_full, b0);
  });

  BenchResult result;
  result.config = config;
  const std::size_t nl = config.losses.size();
  std::vector<std::vector<double>> spe(nl), see(nl), secs(nl);
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++result.failed_replicates;
      continue;
    }
    for (std::size_t l = 0; l < nl; ++l) {
      spe[l].push_back(o.metrics[l].spe);
      see[l].push_back(o.metrics[l].see);
      secs[l].push_back(o.seconds[l]);
    }
  }
  if (result.failed_replicates > 0.05 * config.reps) {
    throw NumericalError(std::to_string(result.failed_replicates) + " of " +
                         std::to_string(config.reps) + " replicates failed (more than 5%)");
  }
  for (std::size_t l = 0; l < nl; ++l) {
    LossSummary s;
    s.loss = config.losses[l];
    s.spe = summarize(std::move(spe[l]));
    s.see = summarize(std::move(see[l]));
    s.seconds_mean = secs[l].empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : std::accumulate(secs[l].begin(), secs[l].end(), 0.0) /
                                           static_cast<double>(secs[l].size());
    s.seconds = std::move(secs[l]);
    result.per_loss.push_back(std::move(s));
  }
  return result;
}

std::string loss_label(const LossSpec& loss) {
  switch (loss.kind) {
    case LossKind::quantile:
      if (loss.tau == 0.5) return "l1";
      return "quantile:" + format_number(loss.tau);
    default:
      return to_string(loss.kind);
  }
}

void write_table(const std::vector<BenchResult>& results, const std::string& path, bool include_timing) {
  std::ostringstream out;
  out << "model,nsr,p,loss,metric,mean,se,reps,seconds_mean\n";
  for (const auto& res : results) {
    for (const auto& s : res.per_loss) {
      const auto reps = s.spe.values.size();
      for (int metric = 0; metric < 2; ++metric) {
        const MetricSummary& ms = metric == 0 ? s.spe : s.see;
        out << res.config.model_id << ',' << format_number(res.config.nsr) << ','
            << res.config.p_observed << ',' << loss_label(s.loss) << ','
            << (metric == 0 ? "SPE" : "SEE") << ',' << format_number(ms.mean) << ','
            << format_number(ms.se) << ',' << reps << ','
            << (include_timing ? format_number(s.seconds_mean) : std::string("NA")) << '\n';
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot open " + path + " for writing");
  file << out.str();
}

}  // namespace flrr::sim
