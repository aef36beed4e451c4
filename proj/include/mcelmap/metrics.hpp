#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mcelmap/errors.hpp"
#include "mcelmap/trajectory.hpp"

namespace mcelmap {

struct MetricsReport {
  double frechet = 0.0;
  double sse = 0.0;
  double angular = 0.0;
  double jerk = 0.0;
};

namespace detail {

inline void require_same_dim(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const char* what) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": curves have dimensions " +
                         std::to_string(a.cols()) + " and " + std::to_string(b.cols()));
  }
}

}  // namespace detail

/// Discrete Frechet distance over monotone couplings of the two polylines.
inline double frechet(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  detail::require_same_dim(a, b, "frechet");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  if (n == 0 || m == 0) throw SizeError("frechet: empty curve");
  Eigen::MatrixXd ca(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (a.row(i) - b.row(j)).norm();
      if (i == 0 && j == 0) {
        ca(i, j) = d;
      } else if (i == 0) {
        ca(i, j) = std::max(ca(i, j - 1), d);
      } else if (j == 0) {
        ca(i, j) = std::max(ca(i - 1, j), d);
      } else {
        ca(i, j) = std::max(std::min({ca(i - 1, j), ca(i - 1, j - 1), ca(i, j - 1)}), d);
      }
    }
  }
  return ca(n - 1, m - 1);
}

/// Sum of squared pointwise errors after resampling both curves to the longer length.
inline double sse(const Eigen::MatrixXd& repro, const Eigen::MatrixXd& demo) {
  detail::require_same_dim(repro, demo, "sse");
  const Eigen::Index len = std::max(repro.rows(), demo.rows());
  return (resample_points(repro, len) - resample_points(demo, len)).squaredNorm();
}

/// Mean over segments of (1 - cos theta) / 2, theta the angle between matching
/// segment directions; 0 for identical shape, 1 for reversed direction. A
/// zero-length segment scores 0.5 against a non-degenerate one and 0 against
/// another zero-length segment.
inline double angular_similarity(const Eigen::MatrixXd& repro, const Eigen::MatrixXd& demo) {
  detail::require_same_dim(repro, demo, "angular_similarity");
  const Eigen::Index len = std::max(repro.rows(), demo.rows());
  if (len < 2) throw SizeError("angular_similarity needs at least 2 points");
  const Eigen::MatrixXd a = resample_points(repro, len);
  const Eigen::MatrixXd b = resample_points(demo, len);
  double total = 0.0;
  for (Eigen::Index t = 0; t + 1 < len; ++t) {
    const Eigen::RowVectorXd u = a.row(t + 1) - a.row(t);
    const Eigen::RowVectorXd v = b.row(t + 1) - b.row(t);
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 && nv == 0.0) continue;
    if (nu == 0.0 || nv == 0.0) {
      total += 0.5;
      continue;
    }
    const double cosine = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
    total += 0.5 * (1.0 - cosine);
  }
  return total / static_cast<double>(len - 1);
}

/// Sum of squared third differences at unit time step.
inline double jerk(const Eigen::MatrixXd& traj) {
  if (traj.rows() < 4) throw SizeError("jerk needs at least 4 points");
  double total = 0.0;
  for (Eigen::Index t = 0; t + 3 < traj.rows(); ++t) {
    total += (traj.row(t + 3) - 3.0 * traj.row(t + 2) + 3.0 * traj.row(t + 1) - traj.row(t))
                 .squaredNorm();
  }
  return total;
}

/// Metrics of one reproduction against a set of demonstrations; every entry
/// is the mean over per-demo values, except jerk, which belongs to the
/// reproduction alone.
inline MetricsReport evaluate(const Eigen::MatrixXd& repro, const std::vector<Trajectory>& demos) {
  if (demos.empty()) throw SizeError("evaluate needs at least one demonstration");
  MetricsReport r;
  for (const auto& d : demos) {
    r.frechet += frechet(repro, d.points());
    r.sse += sse(repro, d.points());
    r.angular += angular_similarity(repro, d.points());
  }
  const auto n = static_cast<double>(demos.size());
  r.frechet /= n;
  r.sse /= n;
  r.angular /= n;
  r.jerk = jerk(repro);
  return r;
}

/// Mean jerk of the demonstrations themselves.
inline double mean_jerk(const std::vector<Trajectory>& demos) {
  double total = 0.0;
  for (const auto& d : demos) total += jerk(d.points());
  return total / static_cast<double>(demos.size());
}

}  // namespace mcelmap
