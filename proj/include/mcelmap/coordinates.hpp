#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <string_view>
#include <vector>

#include "mcelmap/errors.hpp"
#include "mcelmap/trajectory.hpp"

namespace mcelmap {

enum class MatrixKind { Tangent, Laplacian, Edge, Rib };

inline std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::Tangent: return "tangent";
    case MatrixKind::Laplacian: return "laplacian";
    case MatrixKind::Edge: return "edge";
    case MatrixKind::Rib: return "rib";
  }
  return "unknown";
}

/// Banded difference operator acting on the row (time) index of an n-point sequence.
///
/// Tangent and Laplacian are n x n, Edge is (n-1) x n and Rib is (n-2) x n.
/// The Tangent operator keeps its all-zero first row so that tangent data has
/// the same number of rows as the points it came from.
class DifferentialMatrix {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  DifferentialMatrix(MatrixKind kind, Eigen::Index n, Sparse entries)
      : kind_(kind), n_(n), entries_(std::move(entries)) {}

  MatrixKind kind() const { return kind_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  const Sparse& sparse() const { return entries_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(entries_); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const {
    if (points.rows() != n_) {
      throw DimensionError("differential matrix of size " + std::to_string(n_) +
                           " applied to " + std::to_string(points.rows()) + " points");
    }
    return entries_ * points;
  }

 private:
  MatrixKind kind_;
  Eigen::Index n_;
  Sparse entries_;
};

inline DifferentialMatrix build_matrix(MatrixKind kind, Eigen::Index n) {
  if (n < 3) {
    throw SizeError(std::string(to_string(kind)) + " matrix needs n >= 3, got " +
                    std::to_string(n));
  }
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> entries;
  Eigen::Index rows = n;

  switch (kind) {
    case MatrixKind::Tangent:
      for (Eigen::Index i = 1; i < n; ++i) {
        entries.emplace_back(i, i - 1, -1.0);
        entries.emplace_back(i, i, 1.0);
      }
      break;
    case MatrixKind::Laplacian:
      // One half of the (1, -2, 1) stencil, with one-sided (-2, 2) boundary rows.
      entries.emplace_back(0, 0, -1.0);
      entries.emplace_back(0, 1, 1.0);
      for (Eigen::Index i = 1; i + 1 < n; ++i) {
        entries.emplace_back(i, i - 1, 0.5);
        entries.emplace_back(i, i, -1.0);
        entries.emplace_back(i, i + 1, 0.5);
      }
      entries.emplace_back(n - 1, n - 2, 1.0);
      entries.emplace_back(n - 1, n - 1, -1.0);
      break;
    case MatrixKind::Edge:
      rows = n - 1;
      for (Eigen::Index i = 0; i < rows; ++i) {
        entries.emplace_back(i, i, -1.0);
        entries.emplace_back(i, i + 1, 1.0);
      }
      break;
    case MatrixKind::Rib:
      rows = n - 2;
      for (Eigen::Index i = 0; i < rows; ++i) {
        entries.emplace_back(i, i, 1.0);
        entries.emplace_back(i, i + 1, -2.0);
        entries.emplace_back(i, i + 2, 1.0);
      }
      break;
  }

  DifferentialMatrix::Sparse m(rows, n);
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return DifferentialMatrix(kind, n, std::move(m));
}

/// Maps a trajectory into Tangent or Laplacian differential coordinates.
/// The result has the same shape as the input.
inline Eigen::MatrixXd transform_points(const Eigen::MatrixXd& points, MatrixKind kind) {
  if (kind != MatrixKind::Tangent && kind != MatrixKind::Laplacian) {
    throw ConfigError("transform is defined for tangent and laplacian coordinates only");
  }
  return build_matrix(kind, points.rows()).apply(points);
}

inline Trajectory transform(const Trajectory& traj, MatrixKind kind) {
  return Trajectory(transform_points(traj.points(), kind));
}

}  // namespace mcelmap
