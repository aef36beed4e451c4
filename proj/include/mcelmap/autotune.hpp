#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "mcelmap/clustering.hpp"
#include "mcelmap/coordinates.hpp"
#include "mcelmap/dataset.hpp"
#include "mcelmap/errors.hpp"
#include "mcelmap/solver.hpp"

namespace mcelmap {

/// One weight per coordinate space (Cartesian, Tangent, Laplacian).
struct CoordinateWeights {
  double x = 0.0;
  double t = 0.0;
  double l = 0.0;

  double sum() const { return x + t + l; }
  static CoordinateWeights uniform() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }
  bool operator==(const CoordinateWeights&) const = default;
};

struct Smoothing {
  double lambda = 0.0;
  double mu = 0.0;
};

/// Hyperparameters in effect for one EM iteration.
struct WeightState {
  CoordinateWeights alpha = CoordinateWeights::uniform();
  CoordinateWeights beta = CoordinateWeights::uniform();
  CoordinateWeights w = CoordinateWeights::uniform();
  double lambda = 0.0;
  double mu = 0.0;
  double lambda0 = 1.5;
  double mu0 = 1.5;

  EnergyParams params() const { return {w.x, w.t, w.l, lambda, mu}; }
};

inline constexpr double kBetaFloor = 1e-6;
inline constexpr double kZeroCost = 1e-15;

/// w_c = alpha_c / beta_c, with beta_c floored at kBetaFloor.
inline CoordinateWeights approximation_weights(const CoordinateWeights& alpha,
                                               const CoordinateWeights& beta) {
  return {alpha.x / std::max(beta.x, kBetaFloor), alpha.t / std::max(beta.t, kBetaFloor),
          alpha.l / std::max(beta.l, kBetaFloor)};
}

/// Clustered per-demo data, reused for every cost evaluation against one set of
/// per-demo clusterings.
class PerDemoData {
 public:
  PerDemoData(const DemonstrationSet& set, const std::vector<Clustering>& per_demo) {
    if (static_cast<Eigen::Index>(per_demo.size()) != set.count()) {
      throw DimensionError("expected one clustering per demonstration");
    }
    for (Eigen::Index i = 0; i < set.count(); ++i) {
      const auto& cl = per_demo[static_cast<std::size_t>(i)];
      if (cl.points() != set.length()) {
        throw DimensionError("per-demo clustering does not match the demo length");
      }
      counts_.push_back(cl.counts);
      sum_x_.push_back(cl.cluster_sums(set.demo_block(set.cartesian(), i)));
      sum_t_.push_back(cl.cluster_sums(set.demo_block(set.tangent(), i)));
      sum_l_.push_back(cl.cluster_sums(set.demo_block(set.laplacian(), i)));
    }
    nodes_ = per_demo.empty() ? 0 : per_demo.front().nodes();
  }

  /// Per-coordinate totals {J_X, J_T, J_L} summed over demos.
  CoordinateWeights costs(const Eigen::MatrixXd& y) const {
    if (y.rows() != nodes_) throw DimensionError("node count does not match the clusterings");
    const Eigen::MatrixXd yt = build_matrix(MatrixKind::Tangent, nodes_).apply(y);
    const Eigen::MatrixXd yl = build_matrix(MatrixKind::Laplacian, nodes_).apply(y);
    CoordinateWeights j;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      j.x += approximation_cost(counts_[i], y, sum_x_[i]);
      j.t += approximation_cost(counts_[i], yt, sum_t_[i]);
      j.l += approximation_cost(counts_[i], yl, sum_l_[i]);
    }
    return j;
  }

 private:
  Eigen::Index nodes_ = 0;
  std::vector<Eigen::VectorXd> counts_;
  std::vector<Eigen::MatrixXd> sum_x_, sum_t_, sum_l_;
};

/// Scaling factors: each coordinate's share of the total unweighted cost.
/// Falls back to uniform when any per-coordinate total is below kZeroCost.
inline CoordinateWeights compute_betas(const Eigen::MatrixXd& y, const DemonstrationSet& set,
                                       const std::vector<Clustering>& per_demo) {
  const CoordinateWeights j = PerDemoData(set, per_demo).costs(y);
  if (j.x < kZeroCost || j.t < kZeroCost || j.l < kZeroCost) return CoordinateWeights::uniform();
  const double total = j.sum();
  return {j.x / total, j.t / total, j.l / total};
}

// Alpha search ---------------------------------------------------------------

struct AlphaCandidate {
  CoordinateWeights alpha;
  double objective = 0.0;
};

inline constexpr double kAlphaCoarseStep = 0.05;
inline constexpr double kAlphaFineStep = 0.01;
inline constexpr int kAlphaFineRadius = 2;

/// Objectives within 1e-12 * max(1, |f|) are tied; ties prefer larger alpha_x,
/// then larger alpha_t.
inline bool better_alpha(const AlphaCandidate& a, const AlphaCandidate& b) {
  const double tol = 1e-12 * std::max(1.0, std::abs(b.objective));
  if (a.objective < b.objective - tol) return true;
  if (a.objective > b.objective + tol) return false;
  constexpr double eps = 1e-12;
  if (a.alpha.x > b.alpha.x + eps) return true;
  if (a.alpha.x < b.alpha.x - eps) return false;
  return a.alpha.t > b.alpha.t + eps;
}

/// The 231 points of the 0.05 simplex grid, ordered by descending alpha_x then
/// descending alpha_t, followed by the barycenter.
inline std::vector<CoordinateWeights> coarse_alpha_grid() {
  std::vector<CoordinateWeights> grid;
  const int steps = static_cast<int>(std::lround(1.0 / kAlphaCoarseStep));
  for (int i = steps; i >= 0; --i) {
    for (int j = steps - i; j >= 0; --j) {
      const int k = steps - i - j;
      grid.push_back({i / static_cast<double>(steps), j / static_cast<double>(steps),
                      k / static_cast<double>(steps)});
    }
  }
  grid.push_back(CoordinateWeights::uniform());
  return grid;
}

/// Simplex points within kAlphaFineRadius fine steps of `center` (center excluded),
/// in the same preference order as the coarse grid.
inline std::vector<CoordinateWeights> fine_alpha_neighborhood(const CoordinateWeights& center) {
  std::vector<CoordinateWeights> out;
  for (int dx = kAlphaFineRadius; dx >= -kAlphaFineRadius; --dx) {
    for (int dt = kAlphaFineRadius; dt >= -kAlphaFineRadius; --dt) {
      if (dx == 0 && dt == 0) continue;
      // Snap to the fine lattice so exact zeros stay exact.
      auto snap = [](double v) {
        const double q = std::round(v / kAlphaFineStep) * kAlphaFineStep;
        return std::abs(v - q) < 1e-9 ? q : v;
      };
      CoordinateWeights a{snap(center.x + dx * kAlphaFineStep),
                          snap(center.t + dt * kAlphaFineStep), 0.0};
      a.l = snap(1.0 - a.x - a.t);
      constexpr double eps = 1e-12;
      if (a.x < -eps || a.t < -eps || a.l < -eps || a.x > 1.0 + eps || a.t > 1.0 + eps) continue;
      a.x = std::clamp(a.x, 0.0, 1.0);
      a.t = std::clamp(a.t, 0.0, 1.0);
      a.l = std::clamp(a.l, 0.0, 1.0);
      out.push_back(a);
    }
  }
  return out;
}

struct AlphaSearchResult {
  CoordinateWeights alpha;
  double objective = 0.0;
  CoordinateWeights coarse_alpha;  // grid winner before refinement
  int evaluated = 0;
  int skipped = 0;
};

/// Pins used to reproduce each demonstration during the alpha search: the
/// first and last node go to that demo's own endpoints, every other declared
/// constraint is kept as given.
struct DemoReproductionPins {
  std::vector<Eigen::Index> nodes;
  std::vector<Eigen::MatrixXd> targets;  // one pin-target matrix per demo

  DemoReproductionPins(const DemonstrationSet& set, Eigen::Index node_count,
                       const std::vector<PointConstraint>& cons) {
    nodes = {0, node_count - 1};
    std::vector<const PointConstraint*> vias;
    for (const auto& c : cons) {
      if (c.node != 0 && c.node != node_count - 1) {
        nodes.push_back(c.node);
        vias.push_back(&c);
      }
    }
    for (const auto& d : set.demos()) {
      Eigen::MatrixXd t(static_cast<Eigen::Index>(nodes.size()), set.dim());
      t.row(0) = d.front();
      t.row(1) = d.back();
      for (std::size_t k = 0; k < vias.size(); ++k) {
        if (vias[k]->target.size() != set.dim()) {
          throw DimensionError("constraint target dimension does not match the data");
        }
        t.row(static_cast<Eigen::Index>(k + 2)) = vias[k]->target;
      }
      targets.push_back(std::move(t));
    }
  }
};

/// Cartesian cost of demo points clustered against their own reproduction.
inline double reproduction_cost(const Eigen::MatrixXd& demo, const Eigen::MatrixXd& y) {
  const Clustering c = assign(demo, y);
  return approximation_cost(c.counts, y, c.cluster_sums(demo));
}

/// Sum over demos of ||W_j y_j - K_j D_j||^2, where y_j is the map solved with
/// w = alpha / beta and pinned at demo j's own start and end (plus any via
/// constraints), and K_j, W_j cluster D_j against y_j. Throws DegeneracyError
/// if the solve is degenerate.
inline double alpha_objective(const ElasticEnergy& energy, const DemonstrationSet& set,
                              const DemoReproductionPins& pins, const CoordinateWeights& alpha,
                              const CoordinateWeights& beta, const Smoothing& smoothing) {
  const CoordinateWeights w = approximation_weights(alpha, beta);
  const auto sys = energy.pin(EnergyParams{w.x, w.t, w.l, smoothing.lambda, smoothing.mu},
                              pins.nodes);
  double total = 0.0;
  for (std::size_t j = 0; j < pins.targets.size(); ++j) {
    total += reproduction_cost(set.demos()[j].points(), sys.solve(pins.targets[j]));
  }
  return total;
}

/// Picks alpha on the simplex minimizing the total Cartesian reproduction error
/// of every demonstration reproduced from its own endpoints. Coarse 0.05 grid
/// (plus the barycenter), then one 0.01 refinement pass around the winner.
/// Candidates are skipped when either the per-demo solve or the fit's own
/// system under `cons` would be degenerate (e.g. no Cartesian weight and
/// nothing pinning the translation).
inline AlphaSearchResult optimize_alphas(const DemonstrationSet& set, const Clustering& cl,
                                         const CoordinateWeights& beta,
                                         const std::vector<PointConstraint>& cons,
                                         const Smoothing& smoothing) {
  const ElasticEnergy energy(set, cl);
  const DemoReproductionPins pins(set, cl.nodes(), cons);
  AlphaSearchResult result;
  // The fit itself may pin fewer nodes than the per-demo reproductions; a
  // candidate must also leave that system well posed.
  std::vector<Eigen::Index> fit_pins;
  for (const auto& c : cons) fit_pins.push_back(c.node);
  const bool check_fit_system = fit_pins.size() < pins.nodes.size();

  auto evaluate = [&](const CoordinateWeights& alpha) -> std::optional<AlphaCandidate> {
    try {
      if (check_fit_system) {
        const CoordinateWeights w = approximation_weights(alpha, beta);
        energy.pin(EnergyParams{w.x, w.t, w.l, smoothing.lambda, smoothing.mu}, fit_pins);
      }
      const double f = alpha_objective(energy, set, pins, alpha, beta, smoothing);
      ++result.evaluated;
      return AlphaCandidate{alpha, f};
    } catch (const DegeneracyError&) {
      ++result.skipped;
      return std::nullopt;
    } catch (const ConfigError&) {
      ++result.skipped;
      return std::nullopt;
    }
  };

  std::optional<AlphaCandidate> best;
  for (const auto& alpha : coarse_alpha_grid()) {
    auto c = evaluate(alpha);
    if (c && (!best || better_alpha(*c, *best))) best = c;
  }
  if (!best) {
    throw DegeneracyError("every alpha candidate produced a degenerate solve");
  }
  result.coarse_alpha = best->alpha;
  for (const auto& alpha : fine_alpha_neighborhood(best->alpha)) {
    auto c = evaluate(alpha);
    if (c && better_alpha(*c, *best)) best = c;
  }
  result.alpha = best->alpha;
  result.objective = best->objective;
  return result;
}

// Smoothing ------------------------------------------------------------------

/// lambda = lambda0 * (u_X + u_T + u_L) / ||E y||^2 and mu likewise with R.
/// A vanishing denominator keeps `previous` (or lambda0 / mu0 when absent).
inline Smoothing compute_smoothing(const Eigen::MatrixXd& y, const DemonstrationSet& set,
                                   const Clustering& cl, const CoordinateWeights& w,
                                   double lambda0, double mu0,
                                   const std::optional<Smoothing>& previous = std::nullopt) {
  if (!(lambda0 > 0.0) || !(mu0 > 0.0) || !std::isfinite(lambda0) || !std::isfinite(mu0)) {
    throw ConfigError("lambda0 and mu0 must be positive and finite");
  }
  const ElasticEnergy energy(set, cl);
  const double approx = energy.energies(y, EnergyParams{w.x, w.t, w.l, 0.0, 0.0}).approximation();
  const double stretch = (energy.edge() * y).squaredNorm();
  const double bend = (energy.rib() * y).squaredNorm();
  const Eigen::RowVectorXd centroid = y.colwise().mean();
  const double guard = kZeroCost * (y.rowwise() - centroid).squaredNorm();

  Smoothing s;
  s.lambda = stretch > guard && stretch > 0.0 ? lambda0 * approx / stretch
                                              : (previous ? previous->lambda : lambda0);
  s.mu = bend > guard && bend > 0.0 ? mu0 * approx / bend : (previous ? previous->mu : mu0);
  return s;
}

}  // namespace mcelmap
