#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>

#include "mcelmap/errors.hpp"

namespace mcelmap {

/// Ordered sequence of d-dimensional points sampled on a uniform time index.
/// Row t of points() is the sample at index t.
class Trajectory {
 public:
  static constexpr Eigen::Index kMinLength = 3;

  Trajectory() = default;

  explicit Trajectory(Eigen::MatrixXd points) : points_(std::move(points)) {
    if (points_.rows() < kMinLength) {
      throw SizeError("trajectory needs at least 3 points, got " +
                      std::to_string(points_.rows()));
    }
    if (points_.cols() < 1) {
      throw DimensionError("trajectory needs at least one dimension");
    }
    if (!points_.allFinite()) {
      throw FormatError("trajectory contains non-finite values");
    }
  }

  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::Index length() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  Eigen::RowVectorXd front() const { return points_.row(0); }
  Eigen::RowVectorXd back() const { return points_.row(points_.rows() - 1); }

  bool operator==(const Trajectory& other) const {
    return points_.rows() == other.points_.rows() &&
           points_.cols() == other.points_.cols() && points_ == other.points_;
  }

 private:
  Eigen::MatrixXd points_;
};

/// Index-linear resampling of a point sequence to `length` samples.
/// Sample k maps to source position k * (n - 1) / (length - 1); the first
/// and last rows are reproduced exactly.
inline Eigen::MatrixXd resample_points(const Eigen::MatrixXd& points, Eigen::Index length) {
  const Eigen::Index n = points.rows();
  if (n < 2 || length < 2) {
    throw SizeError("resampling needs at least 2 source and 2 target samples");
  }
  if (n == length) {
    return points;
  }
  Eigen::MatrixXd out(length, points.cols());
  const double step = static_cast<double>(n - 1) / static_cast<double>(length - 1);
  for (Eigen::Index k = 0; k < length; ++k) {
    if (k == length - 1) {
      out.row(k) = points.row(n - 1);
      continue;
    }
    const double s = static_cast<double>(k) * step;
    auto lo = static_cast<Eigen::Index>(s);
    if (lo >= n - 1) lo = n - 2;
    const double frac = s - static_cast<double>(lo);
    if (frac == 0.0) {
      out.row(k) = points.row(lo);
    } else {
      out.row(k) = (1.0 - frac) * points.row(lo) + frac * points.row(lo + 1);
    }
  }
  return out;
}

}  // namespace mcelmap
