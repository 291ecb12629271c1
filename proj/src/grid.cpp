#include "flrr/grid.hpp"

#include "flrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace flrr {

namespace {

// Visits the centre of every cell of a regular lattice over `box`.
template <typename Visit>
void for_each_lattice_center(const DomainBox& box, const std::vector<int>& res, Visit&& visit) {
  const int d = box.dim();
  Eigen::VectorXd step = (box.upper - box.lower).cwiseQuotient(
      Eigen::Map<const Eigen::VectorXi>(res.data(), d).cast<double>());
  std::vector<int> idx(d, 0);
  Eigen::VectorXd center(d);
  for (;;) {
    for (int a = 0; a < d; ++a) center[a] = box.lower[a] + (idx[a] + 0.5) * step[a];
    visit(center);
    int a = 0;
    while (a < d && ++idx[a] == res[a]) idx[a++] = 0;
    if (a == d) break;
  }
}

std::vector<int> normalize_resolution(std::vector<int> res, int d) {
  if (res.empty()) res.assign(d, default_resolution(d));
  if (res.size() == 1 && d > 1) res.assign(d, res.front());
  if (static_cast<int>(res.size()) != d) {
    throw ValidationError("resolution must have one entry per axis");
  }
  return res;
}

// Index of the nearest point, ties to the lowest index.
Eigen::Index nearest(const Eigen::MatrixXd& points, const Eigen::VectorXd& x, double& dist2) {
  Eigen::Index best = 0;
  dist2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    double d2 = (points.row(j).transpose() - x).squaredNorm();
    if (d2 < dist2) {
      dist2 = d2;
      best = j;
    }
  }
  return best;
}

}  // namespace

double DomainBox::volume() const { return (upper - lower).prod(); }

bool DomainBox::contains(const Eigen::Ref<const Eigen::VectorXd>& point) const {
  return point.size() == lower.size() && (point.array() >= lower.array()).all() &&
         (point.array() <= upper.array()).all();
}

DomainBox DomainBox::bounding(const Eigen::MatrixXd& points, double margin) {
  if (points.rows() == 0) throw ValidationError("cannot bound an empty point set");
  DomainBox box{points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
  for (int a = 0; a < box.dim(); ++a) {
    double extent = box.upper[a] - box.lower[a];
    double pad = extent > 0 ? margin * extent : 0.5;
    box.lower[a] -= pad;
    box.upper[a] += pad;
  }
  return box;
}

Grid::Grid(Eigen::MatrixXd points, DomainBox box, Eigen::VectorXd volumes)
    : points_(std::move(points)), box_(std::move(box)), volumes_(std::move(volumes)) {
  const Eigen::Index p = points_.rows();
  if (p < 1 || points_.cols() < 1) throw ValidationError("grid needs p >= 1 and d >= 1");
  if (box_.lower.size() != points_.cols() || box_.upper.size() != points_.cols()) {
    throw ValidationError("domain box dimension does not match the points");
  }
  if (!((box_.upper.array() > box_.lower.array()).all())) {
    throw ValidationError("domain box must have positive extent on every axis");
  }
  if (volumes_.size() != p) throw ValidationError("need one volume per point");
  if (!points_.allFinite()) throw ValidationError("grid points must be finite");

  const double diameter = (box_.upper - box_.lower).norm();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!box_.contains(points_.row(j).transpose())) {
      throw ValidationError("grid point " + std::to_string(j) + " lies outside the domain box");
    }
    if (!(volumes_[j] > 0.0)) {
      throw ValidationError("volume of cell " + std::to_string(j) + " is not positive");
    }
    for (Eigen::Index k = 0; k < j; ++k) {
      if ((points_.row(j) - points_.row(k)).norm() <= 1e-12 * diameter) {
        throw ValidationError("grid points " + std::to_string(k) + " and " + std::to_string(j) +
                              " coincide");
      }
    }
  }
  const double total = box_.volume();
  if (std::abs(volumes_.sum() - total) > 1e-6 * total) {
    throw ValidationError("cell volumes do not sum to the domain volume");
  }
}

Grid build_grid_1d(std::span<const double> points, double lower, double upper) {
  const auto p = static_cast<Eigen::Index>(points.size());
  if (p < 1) throw ValidationError("grid needs at least one point");
  if (!(upper > lower)) throw ValidationError("empty interval");
  for (Eigen::Index j = 0; j < p; ++j) {
    double t = points[j];
    if (!(t > lower && t < upper)) {
      throw ValidationError("point " + std::to_string(j) + " lies outside the open interval");
    }
    if (j > 0 && !(t > points[j - 1])) {
      throw ValidationError("point " + std::to_string(j) +
                            " is not strictly greater than its predecessor");
    }
  }
  Eigen::VectorXd volumes(p);
  double left = lower;
  for (Eigen::Index j = 0; j < p; ++j) {
    double right = j + 1 < p ? 0.5 * (points[j] + points[j + 1]) : upper;
    volumes[j] = right - left;
    left = right;
  }
  Eigen::MatrixXd pts = Eigen::Map<const Eigen::VectorXd>(points.data(), p);
  DomainBox box{Eigen::VectorXd::Constant(1, lower), Eigen::VectorXd::Constant(1, upper)};
  return Grid(std::move(pts), std::move(box), std::move(volumes));
}

int default_resolution(int dim) {
  if (dim <= 2) return 128;
  if (dim == 3) return 48;
  return 32;
}

Grid build_grid_nd(const Eigen::MatrixXd& points, const DomainBox& box, std::vector<int> resolution) {
  const int d = static_cast<int>(points.cols());
  if (d < 2) throw ValidationError("build_grid_nd needs d >= 2; use build_grid_1d");
  if (box.dim() != d) throw ValidationError("domain box dimension does not match the points");
  resolution = normalize_resolution(std::move(resolution), d);
  for (int r : resolution) {
    if (r < 32) throw ValidationError("fine-grid resolution must be at least 32 per axis");
  }
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    if (!box.contains(points.row(j).transpose())) {
      throw ValidationError("grid point " + std::to_string(j) + " lies outside the domain box");
    }
  }

  std::vector<long long> counts(points.rows(), 0);
  long long total = 0;
  for_each_lattice_center(box, resolution, [&](const Eigen::VectorXd& c) {
    double d2;
    ++counts[nearest(points, c, d2)];
    ++total;
  });
  const double cell_volume = box.volume() / static_cast<double>(total);
  Eigen::VectorXd volumes(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    if (counts[j] == 0) {
      throw ValidationError("point " + std::to_string(j) +
                            " captured no fine cells; increase the fine-grid resolution");
    }
    volumes[j] = static_cast<double>(counts[j]) * cell_volume;
  }
  return Grid(points, box, std::move(volumes));
}

MeshReport mesh_report(const Grid& grid, std::vector<int> resolution) {
  const Eigen::Index p = grid.size();
  if (p < 2) throw ValidationError("mesh report needs at least two points");
  const auto& pts = grid.points();

  MeshReport rep;
  rep.h_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      rep.h_min = std::min(rep.h_min, (pts.row(j) - pts.row(k)).norm());
    }
  }

  if (grid.dim() == 1) {
    std::vector<double> t(pts.data(), pts.data() + p);
    std::sort(t.begin(), t.end());
    const auto& box = grid.domain_box();
    rep.h_max = std::max(t.front() - box.lower[0], box.upper[0] - t.back());
    for (Eigen::Index j = 1; j < p; ++j) rep.h_max = std::max(rep.h_max, 0.5 * (t[j] - t[j - 1]));
  } else {
    resolution = normalize_resolution(std::move(resolution), grid.dim());
    double worst = 0.0;
    for_each_lattice_center(grid.domain_box(), resolution, [&](const Eigen::VectorXd& c) {
      double d2;
      nearest(pts, c, d2);
      worst = std::max(worst, d2);
    });
    rep.h_max = std::sqrt(worst);
  }
  rep.ratio = rep.h_max / rep.h_min;
  return rep;
}

}  // namespace flrr
