#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mcelmap/clustering.hpp"
#include "mcelmap/coordinates.hpp"
#include "mcelmap/dataset.hpp"
#include "mcelmap/errors.hpp"

namespace mcelmap {

/// Weights of the five energy terms.
struct EnergyParams {
  double w_x = 1.0;
  double w_t = 0.0;
  double w_l = 0.0;
  double lambda = 0.0;  // stretching
  double mu = 0.0;      // bending

  void validate() const {
    const double v[] = {w_x, w_t, w_l, lambda, mu};
    bool any_positive = false;
    for (double x : v) {
      if (!std::isfinite(x) || x < 0.0) {
        throw ConfigError("energy weights must be finite and non-negative");
      }
      any_positive = any_positive || x > 0.0;
    }
    if (!any_positive) throw ConfigError("at least one energy weight must be positive");
  }

  std::string describe() const {
    std::ostringstream s;
    s << "w_x=" << w_x << " w_t=" << w_t << " w_l=" << w_l << " lambda=" << lambda
      << " mu=" << mu;
    return s.str();
  }
};

/// Pins node `node` (0-based) to `target`.
struct PointConstraint {
  Eigen::Index node = 0;
  Eigen::RowVectorXd target;
};

struct EnergyReport {
  double u_x = 0.0;
  double u_t = 0.0;
  double u_l = 0.0;
  double u_e = 0.0;
  double u_r = 0.0;

  double approximation() const { return u_x + u_t + u_l; }
  double total() const { return u_x + u_t + u_l + u_e + u_r; }
};

/// ||diag(counts) * nodes - sums||_F^2, the unweighted approximation cost for one
/// coordinate space given the clustered data sums K * data.
inline double approximation_cost(const Eigen::VectorXd& counts, const Eigen::MatrixXd& nodes,
                                 const Eigen::MatrixXd& sums) {
  return (counts.asDiagonal() * nodes - sums).squaredNorm();
}

/// The quadratic energy of an elastic map for one fixed clustering.
///
/// Holds the node-space operators (T, L, E, R of size M) together with the
/// clustered data sums K g, K g_T and K g_L, so the system for any choice of
/// EnergyParams can be assembled in O(M).
class ElasticEnergy {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  ElasticEnergy(const DemonstrationSet& set, const Clustering& cl)
      : nodes_(cl.nodes()),
        dim_(set.dim()),
        counts_(cl.counts),
        tangent_(build_matrix(MatrixKind::Tangent, cl.nodes()).sparse()),
        laplacian_(build_matrix(MatrixKind::Laplacian, cl.nodes()).sparse()),
        edge_(build_matrix(MatrixKind::Edge, cl.nodes()).sparse()),
        rib_(build_matrix(MatrixKind::Rib, cl.nodes()).sparse()) {
    if (cl.points() != set.rows()) {
      throw DimensionError("clustering covers " + std::to_string(cl.points()) +
                           " points, data set has " + std::to_string(set.rows()));
    }
    sum_x_ = cl.cluster_sums(set.cartesian());
    sum_t_ = cl.cluster_sums(set.tangent());
    sum_l_ = cl.cluster_sums(set.laplacian());

    const Sparse w2 = Sparse(counts_.cwiseAbs2().asDiagonal());
    gram_x_ = w2;
    gram_t_ = Sparse(tangent_.transpose()) * w2 * tangent_;
    gram_l_ = Sparse(laplacian_.transpose()) * w2 * laplacian_;
    gram_e_ = Sparse(edge_.transpose()) * edge_;
    gram_r_ = Sparse(rib_.transpose()) * rib_;

    rhs_x_ = counts_.asDiagonal() * sum_x_;
    rhs_t_ = tangent_.transpose() * (counts_.asDiagonal() * sum_t_);
    rhs_l_ = laplacian_.transpose() * (counts_.asDiagonal() * sum_l_);
  }

  Eigen::Index nodes() const { return nodes_; }
  Eigen::Index dim() const { return dim_; }

  EnergyReport energies(const Eigen::MatrixXd& y, const EnergyParams& p) const {
    check_shape(y);
    EnergyReport r;
    r.u_x = p.w_x * approximation_cost(counts_, y, sum_x_);
    r.u_t = p.w_t * approximation_cost(counts_, tangent_ * y, sum_t_);
    r.u_l = p.w_l * approximation_cost(counts_, laplacian_ * y, sum_l_);
    r.u_e = p.lambda * (edge_ * y).squaredNorm();
    r.u_r = p.mu * (rib_ * y).squaredNorm();
    return r;
  }

  /// Unweighted approximation costs (w = 1 in each space).
  EnergyReport raw_costs(const Eigen::MatrixXd& y) const {
    return energies(y, EnergyParams{1.0, 1.0, 1.0, 1.0, 1.0});
  }

  /// Half the Hessian of the objective; the gradient is 2 (A y - b).
  Sparse hessian(const EnergyParams& p) const {
    Sparse a = p.w_x * gram_x_ + p.w_t * gram_t_ + p.w_l * gram_l_ + p.lambda * gram_e_ +
               p.mu * gram_r_;
    a.makeCompressed();
    return a;
  }

  Eigen::MatrixXd rhs(const EnergyParams& p) const {
    return p.w_x * rhs_x_ + p.w_t * rhs_t_ + p.w_l * rhs_l_;
  }

  /// Factored reduced system for one EnergyParams and one set of pinned nodes.
  /// Solving for different pin targets reuses the factorization.
  class PinnedSystem {
   public:
    /// Minimizer with node pins[k] fixed at targets.row(k).
    Eigen::MatrixXd solve(const Eigen::MatrixXd& targets) const {
      if (targets.rows() != static_cast<Eigen::Index>(pins_.size()) ||
          (targets.rows() > 0 && targets.cols() != owner_->dim_)) {
        throw DimensionError("pin targets do not match the pinned nodes");
      }
      Eigen::MatrixXd y = Eigen::MatrixXd::Zero(owner_->nodes_, owner_->dim_);
      for (std::size_t k = 0; k < pins_.size(); ++k) {
        y.row(pins_[k]) = targets.row(static_cast<Eigen::Index>(k));
      }
      if (free_index_.empty()) return y;
      // b_F - A_FC z
      const Eigen::MatrixXd b = rhs_ - hessian_ * y;
      const auto nf = static_cast<Eigen::Index>(free_index_.size());
      Eigen::MatrixXd b_free(nf, owner_->dim_);
      for (Eigen::Index k = 0; k < nf; ++k) b_free.row(k) = b.row(free_index_[k]);
      const Eigen::MatrixXd y_free = ldlt_->solve(b_free);
      if (ldlt_->info() != Eigen::Success || !y_free.allFinite()) {
        degenerate(params_, pins_.size(), "solution is not finite");
      }
      for (Eigen::Index k = 0; k < nf; ++k) y.row(free_index_[k]) = y_free.row(k);
      return y;
    }

   private:
    friend class ElasticEnergy;
    const ElasticEnergy* owner_ = nullptr;
    EnergyParams params_;
    std::vector<Eigen::Index> pins_;
    std::vector<Eigen::Index> free_index_;
    Sparse hessian_;
    Eigen::MatrixXd rhs_;
    std::unique_ptr<Eigen::SimplicialLDLT<Sparse>> ldlt_;
  };

  /// Factors the system with `pins` eliminated. Throws DegeneracyError when the
  /// energy is not strictly convex on the remaining nodes.
  PinnedSystem pin(const EnergyParams& p, const std::vector<Eigen::Index>& pins) const {
    p.validate();
    PinnedSystem sys;
    sys.owner_ = this;
    sys.params_ = p;
    sys.pins_ = pins;
    std::vector<Eigen::Index> reduced(static_cast<std::size_t>(nodes_), 0);
    for (const auto i : pins) {
      if (i < 0 || i >= nodes_) {
        throw ConfigError("constraint node " + std::to_string(i) + " outside 0.." +
                          std::to_string(nodes_ - 1));
      }
      if (reduced[static_cast<std::size_t>(i)] < 0) {
        throw ConfigError("node " + std::to_string(i) + " constrained twice");
      }
      reduced[static_cast<std::size_t>(i)] = -1;
    }
    for (Eigen::Index i = 0; i < nodes_; ++i) {
      if (reduced[static_cast<std::size_t>(i)] == 0) {
        reduced[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(sys.free_index_.size());
        sys.free_index_.push_back(i);
      } else {
        reduced[static_cast<std::size_t>(i)] = -1;
      }
    }
    sys.hessian_ = hessian(p);
    sys.rhs_ = rhs(p);
    if (sys.free_index_.empty()) return sys;

    const auto nf = static_cast<Eigen::Index>(sys.free_index_.size());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(sys.hessian_.nonZeros()));
    for (Eigen::Index col = 0; col < sys.hessian_.outerSize(); ++col) {
      const Eigen::Index rc = reduced[static_cast<std::size_t>(col)];
      if (rc < 0) continue;
      for (Sparse::InnerIterator it(sys.hessian_, col); it; ++it) {
        const Eigen::Index rr = reduced[static_cast<std::size_t>(it.row())];
        if (rr >= 0) entries.emplace_back(rr, rc, it.value());
      }
    }
    Sparse a_free(nf, nf);
    a_free.setFromTriplets(entries.begin(), entries.end());

    sys.ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Sparse>>();
    sys.ldlt_->compute(a_free);
    if (sys.ldlt_->info() != Eigen::Success) degenerate(p, pins.size(), "factorization failed");
    const Eigen::VectorXd pivots = sys.ldlt_->vectorD();
    const double scale = pivots.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || pivots.minCoeff() <= kPivotTolerance * scale) {
      degenerate(p, pins.size(), "energy is not strictly convex on the free nodes");
    }
    return sys;
  }

  /// Exact minimizer subject to y[c.node] == c.target for every constraint.
  ///
  /// Constrained nodes are eliminated and the reduced symmetric positive
  /// definite system on the free nodes is factored once and solved for all d
  /// columns.
  Eigen::MatrixXd solve(const EnergyParams& p, const std::vector<PointConstraint>& cons) const {
    validate_targets(cons);
    std::vector<Eigen::Index> pins;
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(cons.size()), dim_);
    for (std::size_t k = 0; k < cons.size(); ++k) {
      pins.push_back(cons[k].node);
      targets.row(static_cast<Eigen::Index>(k)) = cons[k].target;
    }
    return pin(p, pins).solve(targets);
  }

  /// Norm of the objective gradient (A y - b) restricted to unconstrained nodes.
  double kkt_residual(const Eigen::MatrixXd& y, const EnergyParams& p,
                      const std::vector<PointConstraint>& cons) const {
    Eigen::MatrixXd g = hessian(p) * y - rhs(p);
    for (const auto& c : cons) g.row(c.node).setZero();
    return g.norm();
  }

  const Eigen::VectorXd& counts() const { return counts_; }
  const Sparse& tangent() const { return tangent_; }
  const Sparse& laplacian() const { return laplacian_; }
  const Sparse& edge() const { return edge_; }
  const Sparse& rib() const { return rib_; }

 private:
  static constexpr double kPivotTolerance = 1e-13;

  void check_shape(const Eigen::MatrixXd& y) const {
    if (y.rows() != nodes_ || y.cols() != dim_) {
      throw DimensionError("node matrix is " + std::to_string(y.rows()) + "x" +
                           std::to_string(y.cols()) + ", expected " + std::to_string(nodes_) +
                           "x" + std::to_string(dim_));
    }
  }

  void validate_targets(const std::vector<PointConstraint>& cons) const {
    for (const auto& c : cons) {
      if (c.target.size() != dim_) {
        throw DimensionError("constraint target has dimension " +
                             std::to_string(c.target.size()) + ", expected " +
                             std::to_string(dim_));
      }
      if (!c.target.allFinite()) throw ConfigError("constraint target is not finite");
    }
  }

  [[noreturn]] static void degenerate(const EnergyParams& p, std::size_t constraints,
                                      const std::string& why) {
    throw DegeneracyError(why + " (" + p.describe() + ", " + std::to_string(constraints) +
                          " constraints)");
  }

  Eigen::Index nodes_;
  Eigen::Index dim_;
  Eigen::VectorXd counts_;
  Sparse tangent_, laplacian_, edge_, rib_;
  Sparse gram_x_, gram_t_, gram_l_, gram_e_, gram_r_;
  Eigen::MatrixXd sum_x_, sum_t_, sum_l_;
  Eigen::MatrixXd rhs_x_, rhs_t_, rhs_l_;
};

inline EnergyReport energies(const Eigen::MatrixXd& y, const DemonstrationSet& set,
                             const Clustering& cl, const EnergyParams& p) {
  if (y.rows() != cl.nodes()) {
    throw DimensionError("node matrix has " + std::to_string(y.rows()) +
                         " rows, clustering has " + std::to_string(cl.nodes()) + " nodes");
  }
  return ElasticEnergy(set, cl).energies(y, p);
}

inline Eigen::MatrixXd solve(const DemonstrationSet& set, const Clustering& cl,
                             const EnergyParams& p, const std::vector<PointConstraint>& cons) {
  return ElasticEnergy(set, cl).solve(p, cons);
}

}  // namespace mcelmap
