#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace flrr {

/// Axis-aligned box in R^d.
struct DomainBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& point) const;

  /// Bounding box of the rows of `points`, widened by `margin` times the
  /// extent on each side (half a unit when an axis has zero extent).
  static DomainBox bounding(const Eigen::MatrixXd& points, double margin = 0.01);
};

/// Discretization points t_1..t_p of a domain together with the volumes of a
/// partition {A_j} with t_j in A_j. Immutable once constructed.
class Grid {
 public:
  /// Validates the invariants: p >= 1, distinct points inside the box,
  /// positive volumes summing to the box volume (1e-6 relative).
  Grid(Eigen::MatrixXd points, DomainBox box, Eigen::VectorXd volumes);

  Eigen::Index size() const { return points_.rows(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Eigen::MatrixXd& points() const { return points_; }
  const DomainBox& domain_box() const { return box_; }
  const Eigen::VectorXd& volumes() const { return volumes_; }

 private:
  Eigen::MatrixXd points_;  // p x d
  DomainBox box_;
  Eigen::VectorXd volumes_;
};

struct MeshReport {
  double h_max = 0.0;  // fill distance
  double h_min = 0.0;  // separation distance
  double ratio = 0.0;
};

/// Midpoint cells on the open interval (lower, upper): each cell runs between
/// the midpoints with its neighbours, the boundary cells reach the endpoints.
Grid build_grid_1d(std::span<const double> points, double lower, double upper);

/// Fine-cell resolution per axis used when none is given (128 for d = 2,
/// 48 for d = 3, 32 beyond).
int default_resolution(int dim);

/// Discretized Voronoi partition: every cell of a regular fine lattice over
/// the box is assigned to its nearest point (ties to the lowest index), and
/// μ(A_j) is the assigned cell count times the fine-cell volume. An empty
/// `resolution` selects default_resolution(d) on every axis; a single entry is
/// broadcast.
Grid build_grid_nd(const Eigen::MatrixXd& points, const DomainBox& box,
                   std::vector<int> resolution = {});

/// Separation distance is exact. The fill distance is exact in 1D and is a
/// fine-lattice approximation (maximum over cell centres) for d >= 2.
MeshReport mesh_report(const Grid& grid, std::vector<int> resolution = {});

}  // namespace flrr
