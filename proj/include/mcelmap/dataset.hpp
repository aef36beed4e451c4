#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mcelmap/coordinates.hpp"
#include "mcelmap/errors.hpp"
#include "mcelmap/trajectory.hpp"

namespace mcelmap {

/// N time-aligned demonstrations of common length plus their stacked data.
///
/// Rows [i * length, (i + 1) * length) of cartesian(), tangent() and
/// laplacian() belong to demonstration i. The differential transforms are
/// applied per demonstration before stacking, so nothing leaks across the
/// seam between two demonstrations.
class DemonstrationSet {
 public:
  const std::vector<Trajectory>& demos() const { return demos_; }
  const Eigen::MatrixXd& cartesian() const { return g_; }
  const Eigen::MatrixXd& tangent() const { return g_tangent_; }
  const Eigen::MatrixXd& laplacian() const { return g_laplacian_; }

  Eigen::Index count() const { return static_cast<Eigen::Index>(demos_.size()); }
  Eigen::Index length() const { return length_; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index rows() const { return g_.rows(); }

  /// Block of the stacked data owned by demonstration `i`.
  auto demo_block(const Eigen::MatrixXd& stacked, Eigen::Index i) const {
    return stacked.middleRows(i * length_, length_);
  }

  /// Pointwise mean over the aligned demonstrations.
  Eigen::MatrixXd mean_demo() const {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(length_, dim_);
    for (const auto& d : demos_) mean += d.points();
    return mean / static_cast<double>(demos_.size());
  }

  friend DemonstrationSet build_set(const std::vector<Trajectory>& demos, Eigen::Index length);

 private:
  std::vector<Trajectory> demos_;
  Eigen::MatrixXd g_;
  Eigen::MatrixXd g_tangent_;
  Eigen::MatrixXd g_laplacian_;
  Eigen::Index length_ = 0;
  Eigen::Index dim_ = 0;
};

/// Resamples every demonstration to `length` samples and stacks the Cartesian,
/// Tangent and Laplacian data.
inline DemonstrationSet build_set(const std::vector<Trajectory>& demos, Eigen::Index length) {
  if (demos.empty()) {
    throw SizeError("demonstration set needs at least one demonstration");
  }
  if (length < Trajectory::kMinLength) {
    throw SizeError("aligned length must be >= 3, got " + std::to_string(length));
  }
  const Eigen::Index dim = demos.front().dim();
  for (const auto& d : demos) {
    if (d.length() < Trajectory::kMinLength) {
      throw SizeError("demonstration has fewer than 3 points");
    }
    if (d.dim() != dim) {
      throw DimensionError("demonstrations mix dimensionality " + std::to_string(dim) +
                           " and " + std::to_string(d.dim()));
    }
  }

  DemonstrationSet set;
  set.length_ = length;
  set.dim_ = dim;
  const auto n = static_cast<Eigen::Index>(demos.size());
  set.g_.resize(n * length, dim);
  set.g_tangent_.resize(n * length, dim);
  set.g_laplacian_.resize(n * length, dim);

  const auto tangent = build_matrix(MatrixKind::Tangent, length);
  const auto laplacian = build_matrix(MatrixKind::Laplacian, length);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd aligned = resample_points(demos[i].points(), length);
    set.g_.middleRows(i * length, length) = aligned;
    set.g_tangent_.middleRows(i * length, length) = tangent.apply(aligned);
    set.g_laplacian_.middleRows(i * length, length) = laplacian.apply(aligned);
    set.demos_.emplace_back(std::move(aligned));
  }
  return set;
}

/// Aligns to the longest demonstration.
inline DemonstrationSet build_set(const std::vector<Trajectory>& demos) {
  Eigen::Index longest = 0;
  for (const auto& d : demos) longest = std::max(longest, d.length());
  return build_set(demos, longest);
}

// Synthetic demonstrations ---------------------------------------------------

enum class SynthShape { Line, Arc, SCurve, NShape };

/// How a per-demo offset is applied: to every sample, or fading quadratically
/// from the full offset at the start to zero at the end, so that all demos
/// share a common goal.
enum class OffsetProfile { Rigid, FadeToGoal };

struct SynthOptions {
  SynthShape shape = SynthShape::SCurve;
  int count = 1;
  double noise_sd = 0.0;
  /// Standard deviation of a per-demonstration offset.
  double offset_sd = 0.0;
  OffsetProfile offset_profile = OffsetProfile::Rigid;
  Eigen::Index length = 100;
  std::uint64_t seed = 0;
};

/// Noise-free 2-D base curve for `shape`, sampled at `length` uniform indices.
inline Eigen::MatrixXd base_curve(SynthShape shape, Eigen::Index length) {
  Eigen::MatrixXd pts(length, 2);
  const double pi = std::numbers::pi;
  for (Eigen::Index k = 0; k < length; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(length - 1);
    switch (shape) {
      case SynthShape::Line:
        pts.row(k) << t, 0.5 * t;
        break;
      case SynthShape::Arc:
        pts.row(k) << std::cos(pi * (1.0 - t)), std::sin(pi * t);
        break;
      case SynthShape::SCurve:
        pts.row(k) << 0.5 * std::sin(2.0 * pi * t), 1.0 - 2.0 * t;
        break;
      case SynthShape::NShape: {
        // Up stroke, diagonal down stroke, up stroke; uniform in arc length.
        const double diag = std::sqrt(2.0);
        const double total = 2.0 + diag;
        double s = t * total;
        if (s <= 1.0) {
          pts.row(k) << 0.0, s;
        } else if (s <= 1.0 + diag) {
          const double u = (s - 1.0) / diag;
          pts.row(k) << u, 1.0 - u;
        } else {
          pts.row(k) << 1.0, s - 1.0 - diag;
        }
        break;
      }
    }
  }
  return pts;
}

/// Noisy copies of a base curve. Noise is i.i.d. Gaussian per coordinate,
/// truncated at three standard deviations, so two demos never differ by more
/// than 6 * noise_sd per coordinate apart from the per-demo offset.
/// Output is a pure function of the options.
inline std::vector<Trajectory> synth_demos(const SynthOptions& opt) {
  if (opt.count < 1) throw ConfigError("synth_demos needs count >= 1");
  if (!(opt.noise_sd >= 0.0) || !(opt.offset_sd >= 0.0)) {
    throw ConfigError("synth_demos needs non-negative noise and offset");
  }
  const Eigen::MatrixXd base = base_curve(opt.shape, opt.length);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto truncated = [&] { return std::clamp(normal(rng), -3.0, 3.0); };

  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(opt.count));
  for (int i = 0; i < opt.count; ++i) {
    Eigen::MatrixXd pts = base;
    if (opt.offset_sd > 0.0) {
      Eigen::RowVectorXd offset(pts.cols());
      for (Eigen::Index c = 0; c < pts.cols(); ++c) offset(c) = opt.offset_sd * normal(rng);
      for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        double f = 1.0;
        if (opt.offset_profile == OffsetProfile::FadeToGoal) {
          const double rest = 1.0 - static_cast<double>(r) / static_cast<double>(pts.rows() - 1);
          f = rest * rest;
        }
        pts.row(r) += f * offset;
      }
    }
    if (opt.noise_sd > 0.0) {
      for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        for (Eigen::Index c = 0; c < pts.cols(); ++c) pts(r, c) += opt.noise_sd * truncated();
      }
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

inline std::vector<Trajectory> synth_demos(SynthShape shape, int count, double noise_sd,
                                           std::uint64_t seed) {
  SynthOptions opt;
  opt.shape = shape;
  opt.count = count;
  opt.noise_sd = noise_sd;
  opt.seed = seed;
  return synth_demos(opt);
}

}  // namespace mcelmap
