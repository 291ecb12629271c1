#pragma once

#include "flrr/fl_regression.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace flrr::io {

/// Reads a rectangular numeric CSV. A first row whose first token is not a
/// number is taken as a header and skipped. Ragged rows and non-numeric cells
/// raise ValidationError naming the 1-based row (and column).
Eigen::MatrixXd read_csv_matrix(const std::string& path);
Eigen::MatrixXd parse_csv_matrix(const std::string& text);

/// Single-column CSV, or a single row, as a vector.
Eigen::VectorXd read_csv_vector(const std::string& path);

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});

/// %.17g, enough to round-trip any double.
std::string format_double(double v);

/// Model persistence. The basis is rebuilt from the stored grid on load; its
/// construction is deterministic, so predictions are bit-identical.
std::string model_to_json(const FitModel& model);
FitModel model_from_json(const std::string& text);
void save_model(const std::string& path, const FitModel& model);
FitModel load_model(const std::string& path);

}  // namespace flrr::io
