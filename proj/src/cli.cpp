#include "flrr/cli.hpp"

#include "flrr/error.hpp"
#include "flrr/fl_regression.hpp"
#include "flrr/io.hpp"
#include "flrr/simulation.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace flrr::cli {

namespace {

struct DataArgs {
  std::string x_path;
  std::string y_path;
  std::string grid_path;
  std::string volumes_path;
  std::vector<double> lower;
  std::vector<double> upper;
  int resolution = 0;
};

struct LossArgs {
  std::string name = "square";
  std::optional<double> tau;
  double huber_k = 1.345;
  double quantile_eps = 1e-4;
};

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Grid grid;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--x", a.x_path, "n x p CSV of curve values at the grid points")->required();
  cmd->add_option("--y", a.y_path, "CSV with the n responses")->required();
  cmd->add_option("--grid", a.grid_path, "p x d CSV of grid point coordinates")->required();
  cmd->add_option("--volumes", a.volumes_path, "CSV with the p cell volumes (default: computed)");
  cmd->add_option("--lower", a.lower, "domain box lower corner (comma separated)")->delimiter(',');
  cmd->add_option("--upper", a.upper, "domain box upper corner (comma separated)")->delimiter(',');
  cmd->add_option("--resolution", a.resolution, "lattice cells per axis for d >= 2 volumes (default: by d)");
}

void add_loss_options(CLI::App* cmd, LossArgs& a) {
  cmd->add_option("--loss", a.name, "square | l1 | quantile | huber | logistic")
      ->check(CLI::IsMember({"square", "l1", "quantile", "huber", "logistic"}));
  cmd->add_option("--tau", a.tau, "quantile level in (0,1) for --loss quantile");
  cmd->add_option("--huber-k", a.huber_k, "Huber tuning constant");
  cmd->add_option("--quantile-eps", a.quantile_eps, "smoothing half-width of the quantile loss");
}

LossSpec make_loss(const LossArgs& a) {
  LossSpec spec;
  spec.kind = parse_loss_kind(a.name);
  if (a.name == "l1") {
    if (a.tau && *a.tau != 0.5) throw ValidationError("--loss l1 fixes tau = 0.5; use --loss quantile");
    spec.tau = 0.5;
  } else if (a.tau) {
    if (spec.kind != LossKind::quantile) throw ValidationError("--tau applies to --loss quantile only");
    spec.tau = *a.tau;
  }
  spec.k = a.huber_k;
  spec.epsilon = a.quantile_eps;
  spec.validate();
  return spec;
}

DomainBox make_box(const Eigen::MatrixXd& points, const std::vector<double>& lower,
                   const std::vector<double>& upper) {
  const auto d = points.cols();
  if (!lower.empty() || !upper.empty()) {
    if (static_cast<Eigen::Index>(lower.size()) != d || static_cast<Eigen::Index>(upper.size()) != d) {
      throw ValidationError("--lower and --upper need " + std::to_string(d) + " values each");
    }
    return DomainBox{Eigen::Map<const Eigen::VectorXd>(lower.data(), d),
                     Eigen::Map<const Eigen::VectorXd>(upper.data(), d)};
  }
  return DomainBox::bounding(points, 0.01);
}

Grid make_grid(const DataArgs& a) {
  const Eigen::MatrixXd points = io::read_csv_matrix(a.grid_path);
  DomainBox box = make_box(points, a.lower, a.upper);
  if (!a.volumes_path.empty()) {
    return Grid(points, std::move(box), io::read_csv_vector(a.volumes_path));
  }
  if (points.cols() == 1) {
    std::vector<double> t(points.data(), points.data() + points.rows());
    return build_grid_1d(t, box.lower[0], box.upper[0]);
  }
  std::vector<int> res;
  if (a.resolution > 0) res.push_back(a.resolution);
  return build_grid_nd(points, box, res);
}

Problem load_problem(const DataArgs& a) {
  Eigen::MatrixXd x = io::read_csv_matrix(a.x_path);
  Eigen::VectorXd y = io::read_csv_vector(a.y_path);
  Grid grid = make_grid(a);
  if (x.cols() != grid.size()) {
    throw ValidationError("X has " + std::to_string(x.cols()) + " columns but the grid has " +
                          std::to_string(grid.size()) + " points");
  }
  if (x.rows() != y.size()) {
    throw ValidationError("X has " + std::to_string(x.rows()) + " rows but Y has " +
                          std::to_string(y.size()) + " values");
  }
  return {std::move(x), std::move(y), std::move(grid)};
}

std::vector<double> parse_lambda_grid(const std::string& text) {
  if (text.empty()) return default_lambda_grid();
  if (text.rfind("logspace:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(9));
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw ValidationError("--lambda-grid expects logspace:lo:hi:count");
    try {
      return logspace_grid(std::stod(parts[0]), std::stod(parts[1]), std::stoi(parts[2]));
    } catch (const std::logic_error&) {
      throw ValidationError("--lambda-grid: cannot parse '" + text + "'");
    }
  }
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      grid.push_back(std::stod(part));
    } catch (const std::logic_error&) {
      throw ValidationError("--lambda-grid: cannot parse '" + part + "'");
    }
  }
  return grid;
}

void write_rcv(const std::string& path, const RcvReport& rep) {
  Eigen::MatrixXd table(static_cast<Eigen::Index>(rep.lambdas.size()), 3);
  for (std::size_t i = 0; i < rep.lambdas.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    table(r, 0) = rep.lambdas[i];
    table(r, 1) = rep.rcv_values[i];
    table(r, 2) = rep.converged[i] ? 1.0 : 0.0;
  }
  io::write_csv_matrix(path, table, {"lambda", "rcv", "converged"});
}

std::vector<LossSpec> parse_loss_list(const std::vector<std::string>& names) {
  std::vector<LossSpec> out;
  for (const auto& name : names) {
    if (name.rfind("quantile:", 0) == 0) {
      double tau = 0.0;
      try {
        tau = std::stod(name.substr(9));
      } catch (const std::logic_error&) {
        throw ValidationError("bad quantile level in '" + name + "'");
      }
      out.push_back(LossSpec::quantile(tau));
    } else {
      const LossKind kind = parse_loss_kind(name);
      if (kind == LossKind::l1_exact) throw ValidationError("l1_exact cannot be benchmarked");
      LossSpec spec;
      spec.kind = kind;
      out.push_back(spec);
    }
    out.back().validate();
  }
  return out;
}

Eigen::MatrixXd lattice(const DomainBox& box, int count) {
  if (count < 1) throw ValidationError("--lattice must be at least 1");
  const int d = box.dim();
  Eigen::Index total = 1;
  for (int k = 0; k < d; ++k) total *= count;
  Eigen::MatrixXd q(total, d);
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rest = r;
    // First coordinate varies slowest.
    for (int k = d - 1; k >= 0; --k) {
      const Eigen::Index idx = rest % count;
      rest /= count;
      const double frac = count == 1 ? 0.5 : static_cast<double>(idx) / (count - 1);
      q(r, k) = box.lower[k] + frac * (box.upper[k] - box.lower[k]);
    }
  }
  return q;
}

std::size_t count_flagged(const Eigen::VectorXd& residuals, double sigma, bool estimate) {
  try {
    return detect_outliers(residuals, sigma, estimate).indices.size();
  } catch (const NumericalError&) {
    return 0;
  }
}

int execute(int argc, const char* const* argv) {
  CLI::App app{"Robust scalar-on-function regression with thin-plate splines", "flrr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  int threads = 0;
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "worker threads (0 = all cores)")
        ->envname("FLRR_THREADS")
        ->check(CLI::NonNegativeNumber);
  };

  // fit
  DataArgs fit_data;
  LossArgs fit_loss;
  int fit_m = 2;
  std::string fit_lambda = "auto";
  std::string fit_grid_spec;
  double pilot_lambda = 1e-6;
  std::string fit_out, fit_rcv_out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write it as JSON");
  add_data_options(fit_cmd, fit_data);
  add_loss_options(fit_cmd, fit_loss);
  fit_cmd->add_option("--m", fit_m, "spline order (2m > d)");
  fit_cmd->add_option("--lambda", fit_lambda, "'auto' for robust CV or a nonnegative value");
  fit_cmd->add_option("--lambda-grid", fit_grid_spec, "logspace:lo:hi:count or a comma list");
  fit_cmd->add_option("--pilot-lambda", pilot_lambda, "penalty of the L1 pilot fit behind the scale");
  fit_cmd->add_option("--out", fit_out, "model JSON path")->required();
  fit_cmd->add_option("--rcv-out", fit_rcv_out, "CSV of the robust CV curve (with --lambda auto)");

  // predict
  std::string pred_model, pred_x, pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "Predict responses for new curves");
  pred_cmd->add_option("--model", pred_model, "model JSON")->required();
  pred_cmd->add_option("--x", pred_x, "q x p CSV of new curves")->required();
  pred_cmd->add_option("--out", pred_out, "output CSV")->required();

  // cv
  DataArgs cv_data;
  LossArgs cv_loss;
  int cv_m = 2;
  std::string cv_grid_spec, cv_out;
  auto* cv_cmd = app.add_subcommand("cv", "Robust cross-validation curve over a lambda grid");
  add_data_options(cv_cmd, cv_data);
  add_loss_options(cv_cmd, cv_loss);
  cv_cmd->add_option("--m", cv_m, "spline order (2m > d)");
  cv_cmd->add_option("--lambda-grid", cv_grid_spec, "logspace:lo:hi:count or a comma list");
  cv_cmd->add_option("--out", cv_out, "output CSV (lambda, rcv, converged)")->required();
  add_threads(cv_cmd);

  // simulate
  std::vector<int> sim_models{1};
  std::vector<double> sim_nsr{0.1};
  std::vector<int> sim_p{100};
  std::vector<std::string> sim_losses{"square", "l1", "huber", "logistic"};
  sim::SimConfig sim_cfg;
  std::string sim_kl = "standard", sim_grid_spec, sim_out;
  bool no_timing = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the Monte Carlo benchmark and write table.csv");
  sim_cmd->add_option("--model-id", sim_models, "data model(s) 1, 2, 3")->delimiter(',');
  sim_cmd->add_option("--n", sim_cfg.n, "sample size");
  sim_cmd->add_option("--p", sim_p, "observed grid size(s), at most 100")->delimiter(',');
  sim_cmd->add_option("--nsr", sim_nsr, "noise-to-signal ratio(s)")->delimiter(',');
  sim_cmd->add_option("--reps", sim_cfg.reps, "replicates");
  sim_cmd->add_option("--seed", sim_cfg.seed, "base seed");
  sim_cmd->add_option("--losses", sim_losses, "square,l1,quantile:<tau>,huber,logistic")->delimiter(',');
  sim_cmd->add_option("--m", sim_cfg.m, "spline order");
  sim_cmd->add_option("--kl-variant", sim_kl, "standard | literal")
      ->check(CLI::IsMember({"standard", "literal"}));
  sim_cmd->add_option("--lambda-grid", sim_grid_spec, "logspace:lo:hi:count or a comma list");
  sim_cmd->add_flag("--no-timing", no_timing, "write NA for seconds_mean (byte-stable output)");
  sim_cmd->add_option("--out", sim_out, "output CSV")->required();
  add_threads(sim_cmd);

  // eval-beta
  std::string eb_model, eb_points, eb_out;
  int eb_lattice = 0;
  auto* eb_cmd = app.add_subcommand("eval-beta", "Evaluate the coefficient function");
  eb_cmd->add_option("--model", eb_model, "model JSON")->required();
  auto* eb_pts_opt = eb_cmd->add_option("--points", eb_points, "CSV of query points");
  auto* eb_lat_opt = eb_cmd->add_option("--lattice", eb_lattice, "regular lattice with this many points per axis");
  eb_pts_opt->excludes(eb_lat_opt);
  eb_cmd->add_option("--out", eb_out, "output CSV")->required();

  // outliers
  std::string ol_model, ol_x, ol_y, ol_out;
  double ol_threshold = 2.6;
  auto* ol_cmd = app.add_subcommand("outliers", "Flag observations with large standardized residuals");
  ol_cmd->add_option("--model", ol_model, "model JSON")->required();
  ol_cmd->add_option("--x", ol_x, "curves to score (default: the training residuals)");
  ol_cmd->add_option("--y", ol_y, "responses matching --x");
  ol_cmd->add_option("--threshold", ol_threshold, "cutoff on |r / sigma|");
  ol_cmd->add_option("--out", ol_out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, std::cerr, std::cerr);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    if (!dynamic_cast<const CLI::CallForHelp*>(&e)) std::cerr << app.help();
    return kExitValidation;
  }

  if (*fit_cmd) {
    const Problem pb = load_problem(fit_data);
    const LossSpec loss = make_loss(fit_loss);
    if (2 * fit_m > pb.grid.dim() && !meets_rate_condition(fit_m, pb.grid.dim())) {
      std::fprintf(stderr, "warning: 2m <= d + 1; the fit exists but convergence rates need a larger m\n");
    }
    LambdaPolicy policy;
    if (fit_lambda == "auto") {
      policy = LambdaPolicy::cross_validated(parse_lambda_grid(fit_grid_spec));
    } else {
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(fit_lambda, &used);
        if (used != fit_lambda.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw ValidationError("--lambda must be 'auto' or a number");
      }
      policy = LambdaPolicy::fixed(value);
    }
    FitOptions opts;
    opts.pilot_lambda = pilot_lambda;
    const FitModel model = fit(pb.x, pb.y, pb.grid, fit_m, loss, policy, opts);
    io::save_model(fit_out, model);
    if (!fit_rcv_out.empty()) {
      if (!model.rcv) throw ValidationError("--rcv-out needs --lambda auto");
      write_rcv(fit_rcv_out, *model.rcv);
    }
    const std::size_t flagged = count_flagged(model.residuals, model.sigma, !loss.needs_scale());
    std::fprintf(stderr, "lambda=%.6g sigma=%.6g iterations=%d converged=%s outliers=%zu\n", model.lambda,
                 model.sigma, model.diagnostics.iterations, model.diagnostics.converged ? "yes" : "no",
                 flagged);
    return kExitOk;
  }

  if (*pred_cmd) {
    const FitModel model = io::load_model(pred_model);
    const Eigen::MatrixXd x = io::read_csv_matrix(pred_x);
    if (x.cols() != model.basis.knots()) {
      throw ValidationError("X has " + std::to_string(x.cols()) + " columns but the model grid has " +
                            std::to_string(model.basis.knots()) + " points");
    }
    io::write_csv_matrix(pred_out, predict(model, x), {"prediction"});
    std::fprintf(stderr, "wrote %lld predictions\n", static_cast<long long>(x.rows()));
    return kExitOk;
  }

  if (*cv_cmd) {
    const Problem pb = load_problem(cv_data);
    const LossSpec loss = make_loss(cv_loss);
    TpsBasis basis = build_basis(pb.grid, cv_m);
    DesignSystem sys = assemble(pb.x, basis);
    // Same scale pipeline as fit; only the lambda search is reported.
    FitOptions opts;
    double sigma = 1.0;
    if (loss.needs_scale()) {
      sigma = fit(sys, basis, pb.y, loss, LambdaPolicy::fixed(opts.pilot_lambda), opts).sigma;
    }
    const RcvReport rep = rcv_select(sys, loss, pb.y, parse_lambda_grid(cv_grid_spec), sigma,
                                     RcvOptions{false, threads});
    write_rcv(cv_out, rep);
    std::fprintf(stderr, "chosen lambda=%.6g rcv=%.6g sigma=%.6g\n", rep.chosen_lambda,
                 rep.rcv_values[rep.chosen_index], sigma);
    return kExitOk;
  }

  if (*sim_cmd) {
    sim_cfg.losses = parse_loss_list(sim_losses);
    sim_cfg.kl_variant = sim_kl == "literal" ? sim::KlVariant::literal : sim::KlVariant::standard;
    if (!sim_grid_spec.empty()) sim_cfg.lambda_grid = parse_lambda_grid(sim_grid_spec);
    sim_cfg.threads = threads;
    std::vector<sim::BenchResult> results;
    for (int model_id : sim_models) {
      for (double nsr : sim_nsr) {
        for (int p : sim_p) {
          sim::SimConfig cfg = sim_cfg;
          cfg.model_id = model_id;
          cfg.nsr = nsr;
          cfg.p_observed = p;
          results.push_back(sim::run_benchmark(cfg));
          if (results.back().failed_replicates > 0) {
            std::fprintf(stderr, "model %d nsr %g p %d: %d replicate(s) failed and were excluded\n", model_id,
                         nsr, p, results.back().failed_replicates);
          }
        }
      }
    }
    sim::write_table(results, sim_out, !no_timing);
    std::fprintf(stderr, "wrote %s (%zu configuration(s))\n", sim_out.c_str(), results.size());
    return kExitOk;
  }

  if (*eb_cmd) {
    const FitModel model = io::load_model(eb_model);
    Eigen::MatrixXd q;
    if (!eb_points.empty()) {
      q = io::read_csv_matrix(eb_points);
    } else if (eb_lattice > 0) {
      q = lattice(model.basis.grid().domain_box(), eb_lattice);
    } else {
      q = model.basis.grid().points();
    }
    const Eigen::VectorXd b = coefficient_function(model, q);
    Eigen::MatrixXd out(q.rows(), q.cols() + 1);
    out << q, b;
    std::vector<std::string> header;
    for (Eigen::Index k = 0; k < q.cols(); ++k) header.push_back("t" + std::to_string(k + 1));
    header.push_back("beta");
    io::write_csv_matrix(eb_out, out, header);
    return kExitOk;
  }

  if (*ol_cmd) {
    const FitModel model = io::load_model(ol_model);
    Eigen::VectorXd residuals = model.residuals;
    if (!ol_x.empty() || !ol_y.empty()) {
      if (ol_x.empty() || ol_y.empty()) throw ValidationError("--x and --y must be given together");
      const Eigen::MatrixXd x = io::read_csv_matrix(ol_x);
      const Eigen::VectorXd y = io::read_csv_vector(ol_y);
      if (x.cols() != model.basis.knots() || x.rows() != y.size()) {
        throw ValidationError("--x/--y dimensions do not match the model");
      }
      residuals = y - predict(model, x);
    }
    if (residuals.size() == 0) throw ValidationError("model has no stored residuals; pass --x and --y");
    const OutlierReport rep = detect_outliers(residuals, model.sigma, !model.loss.needs_scale(), ol_threshold);
    if (!ol_out.empty()) {
      Eigen::MatrixXd out(residuals.size(), 3);
      for (Eigen::Index i = 0; i < residuals.size(); ++i) {
        out(i, 0) = static_cast<double>(i);
        out(i, 1) = rep.standardized_residuals[i];
        out(i, 2) = std::abs(rep.standardized_residuals[i]) > ol_threshold ? 1.0 : 0.0;
      }
      io::write_csv_matrix(ol_out, out, {"index", "standardized_residual", "flagged"});
    }
    std::fprintf(stderr, "sigma=%.6g flagged=%zu of %lld:", rep.sigma, rep.indices.size(),
                 static_cast<long long>(residuals.size()));
    for (auto i : rep.indices) std::fprintf(stderr, " %lld", static_cast<long long>(i));
    std::fprintf(stderr, "\n");
    return kExitOk;
  }
  return kExitValidation;
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return execute(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace flrr::cli
