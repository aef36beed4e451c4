#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <string>
#include <vector>

#include "mcelmap/dataset.hpp"
#include "mcelmap/errors.hpp"

namespace mcelmap {

/// Hard assignment of data points to map nodes.
///
/// assignment[j] is the node owning data row j. The clustering matrix K
/// (nodes x points) has a single 1 per column, and W = diag(row sums of K).
/// Empty clusters (W_ii = 0) are legal.
struct Clustering {
  std::vector<Eigen::Index> assignment;
  Eigen::VectorXd counts;  // diagonal of W

  Eigen::Index nodes() const { return counts.size(); }
  Eigen::Index points() const { return static_cast<Eigen::Index>(assignment.size()); }

  Eigen::SparseMatrix<double> K() const {
    Eigen::SparseMatrix<double> k(nodes(), points());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(assignment.size());
    for (std::size_t j = 0; j < assignment.size(); ++j) {
      entries.emplace_back(assignment[j], static_cast<Eigen::Index>(j), 1.0);
    }
    k.setFromTriplets(entries.begin(), entries.end());
    return k;
  }

  Eigen::MatrixXd W() const { return counts.asDiagonal(); }

  /// K * data, accumulated directly: row i is the sum of the data rows owned by node i.
  Eigen::MatrixXd cluster_sums(const Eigen::MatrixXd& data) const {
    if (data.rows() != points()) {
      throw DimensionError("cluster_sums: data has " + std::to_string(data.rows()) +
                           " rows, clustering covers " + std::to_string(points()));
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(nodes(), data.cols());
    for (std::size_t j = 0; j < assignment.size(); ++j) {
      sums.row(assignment[j]) += data.row(static_cast<Eigen::Index>(j));
    }
    return sums;
  }

  bool operator==(const Clustering& other) const {
    return assignment == other.assignment && counts == other.counts;
  }
};

/// Nearest-node assignment by exact linear scan. Ties go to the lowest node index.
inline Clustering assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& nodes) {
  if (data.cols() != nodes.cols()) {
    throw DimensionError("assign: data is " + std::to_string(data.cols()) +
                         "-dimensional, nodes are " + std::to_string(nodes.cols()) +
                         "-dimensional");
  }
  if (nodes.rows() < 2) throw SizeError("assign needs at least 2 nodes");

  Clustering cl;
  cl.assignment.resize(static_cast<std::size_t>(data.rows()));
  cl.counts = Eigen::VectorXd::Zero(nodes.rows());
  for (Eigen::Index j = 0; j < data.rows(); ++j) {
    Eigen::Index best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
      const double d2 = (nodes.row(i) - data.row(j)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    cl.assignment[static_cast<std::size_t>(j)] = best;
    cl.counts(best) += 1.0;
  }
  return cl;
}

/// One clustering per demonstration, each against that demo's own points only.
inline std::vector<Clustering> per_demo_clusterings(const DemonstrationSet& set,
                                                    const Eigen::MatrixXd& nodes) {
  std::vector<Clustering> out;
  out.reserve(static_cast<std::size_t>(set.count()));
  for (Eigen::Index i = 0; i < set.count(); ++i) {
    out.push_back(assign(set.demos()[static_cast<std::size_t>(i)].points(), nodes));
  }
  return out;
}

}  // namespace mcelmap
