#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "mcelmap/autotune.hpp"
#include "mcelmap/clustering.hpp"
#include "mcelmap/dataset.hpp"
#include "mcelmap/errors.hpp"
#include "mcelmap/solver.hpp"

namespace mcelmap {

/// When lambda/mu are derived from the energy balance: once, on the initial
/// guess, or again on every EM iteration.
enum class SmoothingSchedule { InitialGuess, EveryIteration };

struct FitConfig {
  Eigen::Index nodes = 100;
  double lambda0 = 1.5;
  double mu0 = 1.5;
  int max_iters = 100;
  /// Re-run the hyperparameter tuning every iteration; when false the weights
  /// chosen on the first iteration are kept.
  bool retune_every_iteration = true;
  /// Replaces alpha/beta tuning with these approximation weights.
  std::optional<CoordinateWeights> fixed_weights;
  SmoothingSchedule smoothing_schedule = SmoothingSchedule::InitialGuess;
  /// Replaces the lambda/mu tuning with these values.
  std::optional<Smoothing> fixed_smoothing;

  void validate() const {
    if (nodes < 3) throw ConfigError("node count must be >= 3");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(lambda0 > 0.0) || !(mu0 > 0.0)) throw ConfigError("lambda0 and mu0 must be positive");
    if (fixed_weights) {
      const auto& w = *fixed_weights;
      if (w.x < 0.0 || w.t < 0.0 || w.l < 0.0 || !(w.sum() > 0.0) || !std::isfinite(w.sum())) {
        throw ConfigError("fixed weights must be non-negative with a positive sum");
      }
    }
    if (fixed_smoothing) {
      const auto& s = *fixed_smoothing;
      if (!(s.lambda >= 0.0) || !(s.mu >= 0.0) || !std::isfinite(s.lambda) ||
          !std::isfinite(s.mu)) {
        throw ConfigError("fixed lambda/mu must be finite and non-negative");
      }
    }
  }
};

/// State after one M-step.
struct IterationRecord {
  WeightState weights;
  EnergyReport energies;
  std::vector<Eigen::Index> assignment;  // clustering the M-step was solved against
  Eigen::MatrixXd nodes;                 // M-step solution
};

struct FitResult {
  Eigen::MatrixXd nodes;
  WeightState weights;
  EnergyReport energies;
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
};

/// Pointwise mean of the aligned demonstrations, resampled to `nodes` points.
inline Eigen::MatrixXd initial_nodes(const DemonstrationSet& set, Eigen::Index nodes) {
  return resample_points(set.mean_demo(), nodes);
}

namespace detail {

inline void check_constraints(const std::vector<PointConstraint>& cons, Eigen::Index nodes,
                              Eigen::Index dim) {
  std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
  for (const auto& c : cons) {
    if (c.node < 0 || c.node >= nodes) {
      throw ConfigError("constraint node " + std::to_string(c.node) + " outside 0.." +
                        std::to_string(nodes - 1));
    }
    if (seen[static_cast<std::size_t>(c.node)]) {
      throw ConfigError("node " + std::to_string(c.node) + " constrained twice");
    }
    seen[static_cast<std::size_t>(c.node)] = true;
    if (c.target.size() != dim) {
      throw DimensionError("constraint target has dimension " + std::to_string(c.target.size()) +
                           ", expected " + std::to_string(dim));
    }
    if (!c.target.allFinite()) throw ConfigError("constraint target is not finite");
  }
}

inline WeightState tune(const Eigen::MatrixXd& y, const DemonstrationSet& set,
                        const Clustering& cl, const std::vector<PointConstraint>& cons,
                        const FitConfig& cfg, const std::optional<WeightState>& previous) {
  WeightState ws;
  ws.lambda0 = cfg.lambda0;
  ws.mu0 = cfg.mu0;
  std::optional<Smoothing> prev_smoothing;
  if (previous) prev_smoothing = Smoothing{previous->lambda, previous->mu};

  if (cfg.fixed_weights) {
    const double total = cfg.fixed_weights->sum();
    ws.alpha = {cfg.fixed_weights->x / total, cfg.fixed_weights->t / total,
                cfg.fixed_weights->l / total};
    ws.beta = CoordinateWeights::uniform();
    ws.w = *cfg.fixed_weights;
  } else {
    const auto per_demo = per_demo_clusterings(set, y);
    ws.beta = compute_betas(y, set, per_demo);
    // The alpha search needs stretching/bending weights before the new ones
    // exist: use last iteration's, or provisional values from uniform alpha.
    Smoothing search_smoothing;
    if (cfg.fixed_smoothing) {
      search_smoothing = *cfg.fixed_smoothing;
    } else if (prev_smoothing) {
      search_smoothing = *prev_smoothing;
    } else {
      search_smoothing =
          compute_smoothing(y, set, cl, approximation_weights(CoordinateWeights::uniform(), ws.beta),
                            cfg.lambda0, cfg.mu0);
    }
    ws.alpha = optimize_alphas(set, cl, ws.beta, cons, search_smoothing).alpha;
    ws.w = approximation_weights(ws.alpha, ws.beta);
  }

  if (cfg.fixed_smoothing) {
    ws.lambda = cfg.fixed_smoothing->lambda;
    ws.mu = cfg.fixed_smoothing->mu;
  } else if (previous && cfg.smoothing_schedule == SmoothingSchedule::InitialGuess) {
    ws.lambda = previous->lambda;
    ws.mu = previous->mu;
  } else {
    const Smoothing s = compute_smoothing(y, set, cl, ws.w, cfg.lambda0, cfg.mu0, prev_smoothing);
    ws.lambda = s.lambda;
    ws.mu = s.mu;
  }
  return ws;
}

}  // namespace detail

/// Expectation-maximization fit of the elastic map.
///
/// Each iteration clusters the stacked data to the nearest nodes, retunes the
/// weights (unless fixed), and solves the constrained quadratic. The loop stops
/// when the clustering repeats exactly or after cfg.max_iters M-steps.
inline FitResult fit(const DemonstrationSet& set, const std::vector<PointConstraint>& cons,
                     const FitConfig& cfg) {
  cfg.validate();
  detail::check_constraints(cons, cfg.nodes, set.dim());
  FitResult result;
  Eigen::MatrixXd y = initial_nodes(set, cfg.nodes);
  std::optional<WeightState> weights;
  std::optional<Clustering> previous;

  for (int it = 0; it < cfg.max_iters; ++it) {
    Clustering cl = assign(set.cartesian(), y);
    if (previous && cl.assignment == previous->assignment) {
      result.converged = true;
      break;
    }
    if (!weights || cfg.retune_every_iteration) {
      weights = detail::tune(y, set, cl, cons, cfg, weights);
    }
    const ElasticEnergy energy(set, cl);
    y = energy.solve(weights->params(), cons);
    result.history.push_back({*weights, energy.energies(y, weights->params()), cl.assignment, y});
    ++result.iterations;
    previous = std::move(cl);
  }
  if (!result.converged && previous) {
    result.converged = assign(set.cartesian(), y).assignment == previous->assignment;
  }

  result.nodes = std::move(y);
  result.weights = *weights;
  result.energies = result.history.back().energies;
  return result;
}

/// Fit pinned at an optional start and end point plus via points.
inline FitResult reproduce(const DemonstrationSet& set,
                           const std::optional<Eigen::RowVectorXd>& start,
                           const std::optional<Eigen::RowVectorXd>& end,
                           const std::vector<PointConstraint>& vias, const FitConfig& cfg) {
  std::vector<PointConstraint> cons;
  if (start) cons.push_back({0, *start});
  if (end) cons.push_back({cfg.nodes - 1, *end});
  cons.insert(cons.end(), vias.begin(), vias.end());
  return fit(set, cons, cfg);
}

}  // namespace mcelmap
