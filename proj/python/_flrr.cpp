#include "flrr/error.hpp"
#include "flrr/fl_regression.hpp"
#include "flrr/io.hpp"
#include "flrr/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace flrr;

namespace {

LossSpec make_loss(const std::string& name, std::optional<double> tau, double huber_k, double quantile_eps) {
  LossSpec spec;
  spec.kind = parse_loss_kind(name);
  if (name == "l1") {
    if (tau && *tau != 0.5) throw ValidationError("loss 'l1' fixes tau = 0.5; use loss='quantile'");
  } else if (tau) {
    if (spec.kind != LossKind::quantile) throw ValidationError("tau applies to the quantile loss only");
    spec.tau = *tau;
  }
  spec.k = huber_k;
  spec.epsilon = quantile_eps;
  spec.validate();
  return spec;
}

Eigen::MatrixXd as_points(const Eigen::MatrixXd& grid) {
  // A 1-D array arrives as a column; a single row of several values is also
  // read as points on a line.
  if (grid.rows() == 1 && grid.cols() > 1) return grid.transpose();
  return grid;
}

Grid make_grid(const Eigen::MatrixXd& grid_points, const std::optional<std::vector<double>>& lower,
               const std::optional<std::vector<double>>& upper, const std::optional<Eigen::VectorXd>& volumes,
               int resolution) {
  const Eigen::MatrixXd points = as_points(grid_points);
  const auto d = points.cols();
  DomainBox box = DomainBox::bounding(points, 0.01);
  if (lower || upper) {
    if (!lower || !upper || static_cast<Eigen::Index>(lower->size()) != d ||
        static_cast<Eigen::Index>(upper->size()) != d) {
      throw ValidationError("lower and upper need " + std::to_string(d) + " values each");
    }
    box = DomainBox{Eigen::Map<const Eigen::VectorXd>(lower->data(), d),
                    Eigen::Map<const Eigen::VectorXd>(upper->data(), d)};
  }
  if (volumes) return Grid(points, std::move(box), *volumes);
  if (d == 1) {
    std::vector<double> t(points.data(), points.data() + points.rows());
    return build_grid_1d(t, box.lower[0], box.upper[0]);
  }
  std::vector<int> res;
  if (resolution > 0) res.push_back(resolution);
  return build_grid_nd(points, box, res);
}

py::dict rcv_dict(const RcvReport& r) {
  py::dict d;
  d["lambdas"] = r.lambdas;
  d["rcv"] = r.rcv_values;
  d["converged"] = r.converged;
  d["chosen_lambda"] = r.chosen_lambda;
  d["chosen_index"] = r.chosen_index;
  return d;
}

py::dict outlier_dict(const OutlierReport& r) {
  py::dict d;
  std::vector<long long> idx(r.indices.begin(), r.indices.end());
  d["indices"] = idx;
  d["threshold"] = r.threshold;
  d["sigma"] = r.sigma;
  d["standardized_residuals"] = r.standardized_residuals;
  return d;
}

std::vector<py::dict> table_rows(const std::vector<sim::BenchResult>& results) {
  std::vector<py::dict> rows;
  for (const auto& res : results) {
    for (const auto& ls : res.per_loss) {
      py::dict row;
      row["model"] = res.config.model_id;
      row["nsr"] = res.config.nsr;
      row["p"] = res.config.p_observed;
      row["n"] = res.config.n;
      row["loss"] = sim::loss_label(ls.loss);
      row["spe_mean"] = ls.spe.mean;
      row["spe_se"] = ls.spe.se;
      row["see_mean"] = ls.see.mean;
      row["see_se"] = ls.see.se;
      row["reps"] = static_cast<int>(ls.spe.values.size());
      row["seconds_mean"] = ls.seconds_mean;
      row["failed_replicates"] = res.failed_replicates;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_flrr, m) {
  m.doc() = "Robust scalar-on-function regression with thin-plate splines";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<FitModel>(m, "Model")
      .def_readonly("lam", &FitModel::lambda)
      .def_readonly("sigma", &FitModel::sigma)
      .def_property_readonly("loss", [](const FitModel& f) { return to_string(f.loss.kind); })
      .def_property_readonly("tau", [](const FitModel& f) { return f.loss.tau; })
      .def_property_readonly("order", [](const FitModel& f) { return f.basis.order(); })
      .def_property_readonly("alpha", [](const FitModel& f) { return f.coeffs.alpha; })
      .def_property_readonly("theta", &FitModel::theta)
      .def_property_readonly("gamma", [](const FitModel& f) { return f.coeffs.gamma; })
      .def_property_readonly("delta", [](const FitModel& f) { return f.coeffs.delta; })
      .def_property_readonly("beta_at_knots", &FitModel::beta_at_knots)
      .def_property_readonly("knots", [](const FitModel& f) { return f.basis.grid().points(); })
      .def_property_readonly("volumes", [](const FitModel& f) { return f.basis.grid().volumes(); })
      .def_readonly("fitted", &FitModel::fitted)
      .def_readonly("residuals", &FitModel::residuals)
      .def_readonly("standardized_residuals", &FitModel::standardized_residuals)
      .def_property_readonly("converged", [](const FitModel& f) { return f.diagnostics.converged; })
      .def_property_readonly("iterations", [](const FitModel& f) { return f.diagnostics.iterations; })
      .def_property_readonly("rcv",
                             [](const FitModel& f) -> py::object {
                               if (!f.rcv) return py::none();
                               return rcv_dict(*f.rcv);
                             })
      .def("predict", [](const FitModel& f, const Eigen::MatrixXd& x) { return predict(f, x); }, py::arg("x"))
      .def(
          "coefficient_function",
          [](const FitModel& f, const Eigen::MatrixXd& points) {
            const Eigen::MatrixXd q = f.basis.dim() == 1 && points.rows() == 1 ? points.transpose() : points;
            return coefficient_function(f, q);
          },
          py::arg("points"))
      .def(
          "outliers", [](const FitModel& f, double threshold) { return outlier_dict(detect_outliers(f, threshold)); },
          py::arg("threshold") = 2.6)
      .def("to_json", [](const FitModel& f) { return io::model_to_json(f); })
      .def("save", [](const FitModel& f, const std::string& path) { io::save_model(path, f); }, py::arg("path"));

  m.def(
      "fit",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& grid, int order,
         const std::string& loss, std::optional<double> lam, std::optional<std::vector<double>> lambda_grid,
         std::optional<double> tau, double huber_k, double quantile_eps,
         std::optional<std::vector<double>> lower, std::optional<std::vector<double>> upper,
         std::optional<Eigen::VectorXd> volumes, int resolution, double pilot_lambda, int threads) {
        const LossSpec spec = make_loss(loss, tau, huber_k, quantile_eps);
        const Grid g = make_grid(grid, lower, upper, volumes, resolution);
        LambdaPolicy policy = lam ? LambdaPolicy::fixed(*lam)
                                  : LambdaPolicy::cross_validated(lambda_grid.value_or(std::vector<double>{}));
        policy.rcv.threads = threads;
        FitOptions opts;
        opts.pilot_lambda = pilot_lambda;
        py::gil_scoped_release release;
        return fit(x, y, g, order, spec, policy, opts);
      },
      py::arg("x"), py::arg("y"), py::arg("grid"), py::arg("m") = 2, py::arg("loss") = "huber",
      py::arg("lam") = py::none(), py::arg("lambda_grid") = py::none(), py::arg("tau") = py::none(),
      py::arg("huber_k") = 1.345, py::arg("quantile_eps") = 1e-4, py::arg("lower") = py::none(),
      py::arg("upper") = py::none(), py::arg("volumes") = py::none(), py::arg("resolution") = 0,
      py::arg("pilot_lambda") = 1e-6, py::arg("threads") = 1,
      "Fit a model; lam=None chooses the penalty by robust cross-validation.");

  m.def(
      "grid_volumes",
      [](const Eigen::MatrixXd& grid, std::optional<std::vector<double>> lower,
         std::optional<std::vector<double>> upper, int resolution) {
        return make_grid(grid, lower, upper, std::nullopt, resolution).volumes();
      },
      py::arg("grid"), py::arg("lower") = py::none(), py::arg("upper") = py::none(), py::arg("resolution") = 0);

  m.def("load_model", &io::load_model, py::arg("path"));
  m.def("model_from_json", &io::model_from_json, py::arg("text"));

  m.def(
      "m_scale",
      [](const Eigen::VectorXd& r, double c, double b) { return m_scale(r, ScaleSpec::bisquare(c, b)); },
      py::arg("residuals"), py::arg("c") = 1.547, py::arg("b") = 0.5, "Bisquare M-scale of the residuals.");
  m.def("tau_scale", &tau_scale, py::arg("residuals"));
  m.def("default_lambda_grid", &default_lambda_grid);
  m.def("logspace_grid", &logspace_grid, py::arg("lo"), py::arg("hi"), py::arg("count"));

  m.def(
      "simulate",
      [](std::vector<int> model_ids, int n, std::vector<int> p, std::vector<double> nsr, int reps,
         std::uint64_t seed, std::vector<std::string> losses, int threads,
         std::optional<std::vector<double>> lambda_grid, bool literal_kl, std::optional<std::string> out,
         bool timing) {
        std::vector<LossSpec> specs;
        for (const auto& l : losses) specs.push_back(make_loss(l, std::nullopt, 1.345, 1e-4));
        std::vector<sim::SimConfig> configs;
        for (int id : model_ids)
          for (double r : nsr)
            for (int pp : p) {
              sim::SimConfig c;
              c.model_id = id;
              c.n = n;
              c.p_observed = pp;
              c.nsr = r;
              c.reps = reps;
              c.seed = seed;
              c.losses = specs;
              c.threads = threads;
              c.kl_variant = literal_kl ? sim::KlVariant::literal : sim::KlVariant::standard;
              if (lambda_grid) c.lambda_grid = *lambda_grid;
              c.validate();
              configs.push_back(std::move(c));
            }
        std::vector<sim::BenchResult> results;
        {
          py::gil_scoped_release release;
          for (const auto& c : configs) results.push_back(sim::run_benchmark(c));
          if (out) sim::write_table(results, *out, timing);
        }
        return table_rows(results);
      },
      py::arg("model_ids") = std::vector<int>{1}, py::arg("n") = 300, py::arg("p") = std::vector<int>{100},
      py::arg("nsr") = std::vector<double>{0.1}, py::arg("reps") = 100, py::arg("seed") = 1,
      py::arg("losses") = std::vector<std::string>{"square", "l1", "huber", "logistic"}, py::arg("threads") = 1,
      py::arg("lambda_grid") = py::none(), py::arg("literal_kl") = false, py::arg("out") = py::none(),
      py::arg("timing") = true, "Monte Carlo benchmark; returns one summary row per configuration and loss.");
}
