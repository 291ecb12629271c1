#include "flrr/io.hpp"

#include "flrr/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flrr::io {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos
                                                                                       : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

// nlohmann prints the shortest round-trip form; models are written with a
// fixed 17 significant digits instead, so the writer is done by hand.
void dump(const json& j, std::string& out, int indent, int level) {
  const std::string pad(static_cast<std::size_t>(indent * (level + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * level), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump(it.value(), out, indent, level + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      // Numeric arrays stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      out += "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) out += "\n" + pad;
        dump(v, out, indent, level + 1);
      }
      if (!flat && !j.empty()) out += "\n" + close;
      out += "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        out += format_double(v);
      }
      return;
    }
    default:
      out += j.dump();
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vec(const json& a, const char* what) {
  if (!a.is_array()) throw ValidationError(std::string("model field '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError(std::string("model field '") + what + "' is not numeric");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) throw ValidationError(std::string("model file lacks field '") + name + "'");
  return j.at(name);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // Keep the JSON type a float when %.17g prints an integer.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

Eigen::MatrixXd parse_csv_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!header_checked) {
      header_checked = true;
      double tmp;
      if (!parse_number(cells[0], tmp)) continue;
    }
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw ValidationError("ragged CSV: row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " fields, expected " + std::to_string(width));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_number(cells[c], row[c])) {
        throw ValidationError("non-numeric CSV cell at row " + std::to_string(line_no) + ", column " +
                              std::to_string(c + 1) + ": '" + cells[c] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("CSV has no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  try {
    return parse_csv_matrix(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

Eigen::VectorXd read_csv_vector(const std::string& path) {
  const Eigen::MatrixXd m = read_csv_matrix(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ValidationError(path + ": expected a single column");
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) out += ',';
      out += header[c];
    }
    out += '\n';
  }
  char buf[40];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out += buf;
    }
    out += '\n';
  }
  write_file(path, out);
}

std::string model_to_json(const FitModel& model) {
  const Grid& g = model.basis.grid();
  json j;
  j["format_version"] = kFormatVersion;
  j["m"] = model.basis.order();
  j["d"] = g.dim();
  json points = json::array();
  for (Eigen::Index r = 0; r < g.size(); ++r) points.push_back(vec_to_json(g.points().row(r).transpose()));
  j["grid"] = {{"points", points},
               {"volumes", vec_to_json(g.volumes())},
               {"domain_box",
                {{"lower", vec_to_json(g.domain_box().lower)}, {"upper", vec_to_json(g.domain_box().upper)}}}};
  j["loss"] = {{"kind", to_string(model.loss.kind)},
               {"params", {{"tau", model.loss.tau}, {"epsilon", model.loss.epsilon}, {"k", model.loss.k}}}};
  j["lambda"] = model.lambda;
  j["sigma"] = model.sigma;
  j["alpha"] = model.coeffs.alpha;
  j["xi"] = vec_to_json(model.coeffs.xi);
  j["delta"] = vec_to_json(model.coeffs.delta);
  json diag = {{"converged", model.diagnostics.converged},
               {"iterations", model.diagnostics.iterations},
               {"stationarity", model.diagnostics.stationarity}};
  if (model.residuals.size() > 0) diag["residuals"] = vec_to_json(model.residuals);
  j["diagnostics"] = diag;

  std::string out;
  dump(j, out, 2, 0);
  out += '\n';
  return out;
}

FitModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = field(j, "format_version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError("unsupported model format_version " + std::to_string(version));
    }
    const int m = field(j, "m").get<int>();
    const int d = field(j, "d").get<int>();
    const json& gj = field(j, "grid");
    const json& pts = field(gj, "points");
    if (!pts.is_array() || pts.empty()) throw ValidationError("model grid has no points");
    Eigen::MatrixXd points(static_cast<Eigen::Index>(pts.size()), d);
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const Eigen::VectorXd row = json_to_vec(pts[r], "grid.points");
      if (row.size() != d) throw ValidationError("model grid point has the wrong dimension");
      points.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    const json& bj = field(gj, "domain_box");
    DomainBox box{json_to_vec(field(bj, "lower"), "domain_box.lower"),
                  json_to_vec(field(bj, "upper"), "domain_box.upper")};
    Grid grid(points, box, json_to_vec(field(gj, "volumes"), "grid.volumes"));
    TpsBasis basis = build_basis(grid, m);

    const json& lj = field(j, "loss");
    LossSpec loss;
    loss.kind = parse_loss_kind(field(lj, "kind").get<std::string>());
    const json& params = field(lj, "params");
    loss.tau = field(params, "tau").get<double>();
    loss.epsilon = field(params, "epsilon").get<double>();
    loss.k = field(params, "k").get<double>();
    loss.validate();

    auto coeffs = SplineCoefficients::make(basis, field(j, "alpha").get<double>(), json_to_vec(field(j, "xi"), "xi"),
                                           json_to_vec(field(j, "delta"), "delta"));
    FitModel model = make_model(std::move(basis), std::move(coeffs), field(j, "lambda").get<double>(),
                                field(j, "sigma").get<double>(), loss);
    if (j.contains("diagnostics")) {
      const json& dj = j["diagnostics"];
      model.diagnostics.converged = dj.value("converged", false);
      model.diagnostics.iterations = dj.value("iterations", 0);
      if (dj.contains("stationarity") && dj["stationarity"].is_number()) {
        model.diagnostics.stationarity = dj["stationarity"].get<double>();
      }
      if (dj.contains("residuals")) {
        model.residuals = json_to_vec(dj["residuals"], "diagnostics.residuals");
        model.standardized_residuals = model.residuals / model.sigma;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const FitModel& model) { write_file(path, model_to_json(model)); }

FitModel load_model(const std::string& path) {
  try {
    return model_from_json(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace flrr::io
