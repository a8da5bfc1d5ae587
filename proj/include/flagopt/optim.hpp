#pragma once

#include "flagopt/objectives.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>

namespace flagopt {

struct StopRule {
  double grad_tol = 1e-5;
  int max_iters = 10000;
  std::optional<double> max_seconds;
};

struct LineSearch {
  double c = 1e-4;          // Armijo slope fraction
  double shrink = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 50;
};

enum class RunStatus { converged, max_iters, time_budget };

struct TraceRecord {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double elapsed_s = 0.0;
};

/// Per-iteration history of a run. For gradient descent an iteration is one
/// line-search step; for the coordinate methods it is one outer sweep.
/// elapsed_s is wall time on a monotonic clock since the run started.
struct RunTrace {
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::max_iters;

  int iterations() const { return records.empty() ? 0 : records.back().iter; }
  double final_grad_norm() const { return records.empty() ? 0.0 : records.back().grad_norm; }
  double final_objective() const { return records.empty() ? 0.0 : records.back().objective; }
  double elapsed_s() const { return records.empty() ? 0.0 : records.back().elapsed_s; }
};

inline double grad_norm(const Objective& o, const FlagPoint& p, const CoordinateMetric& m) {
  if (o.kind != m.label) throw ArityMismatchError("grad_norm: objective kind does not match metric");
  return metric_norm(riemannian_gradient(p, o.euclidean_gradient(p), m), m);
}

namespace detail {

using SteadyClock = std::chrono::steady_clock;

inline double seconds_since(SteadyClock::time_point t0) {
  return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

// exp(step0 * shrink^j * M) for j = 0,1,...; when shrink = 1/2 the whole
// ladder is one small-argument exponential plus repeated squaring.
class ExpLadder {
 public:
  ExpLadder(Matrix m, double step0, double shrink)
      : m_(std::move(m)), step0_(step0), shrink_(shrink), dyadic_(shrink == 0.5) {
    if (!dyadic_) return;
    double norm = std::abs(step0_) * m_.cwiseAbs().colwise().sum().maxCoeff();
    depth_ = 0;
    while (norm > 0.5 && depth_ < 64) {
      norm *= 0.5;
      ++depth_;
    }
    cache_.resize(static_cast<std::size_t>(depth_) + 1);
    cache_[static_cast<std::size_t>(depth_)] =
        Matrix((step0_ * std::pow(0.5, depth_)) * m_).exp();
    for (int j = depth_ - 1; j >= 0; --j)
      cache_[static_cast<std::size_t>(j)] = cache_[static_cast<std::size_t>(j) + 1] *
                                            cache_[static_cast<std::size_t>(j) + 1];
  }

  Matrix at(int backtrack) const {
    if (dyadic_ && backtrack <= depth_) return cache_[static_cast<std::size_t>(backtrack)];
    return Matrix((step0_ * std::pow(shrink_, backtrack)) * m_).exp();
  }

 private:
  Matrix m_;
  double step0_;
  double shrink_;
  bool dyadic_;
  int depth_ = 0;
  std::vector<Matrix> cache_;
};

// Geodesic evaluator along a fixed direction, indexed by backtrack count.
class GeodesicRay {
 public:
  static GeodesicRay modified(const FlagPoint& p, const Matrix& lambda, const LineSearch& ls) {
    GeodesicRay r(p);
    r.main_ = std::make_unique<ExpLadder>(lambda, ls.initial_step, ls.shrink);
    return r;
  }

  static GeodesicRay classical(const FlagPoint& p, const Matrix& lambda, const LineSearch& ls) {
    const Index r0 = p.sig.dims.back();
    Matrix m = lambda;
    m.topLeftCorner(r0, r0) *= 2.0;
    GeodesicRay r(p);
    r.main_ = std::make_unique<ExpLadder>(std::move(m), ls.initial_step, ls.shrink);
    r.corr_ = std::make_unique<ExpLadder>(Matrix(-lambda.topLeftCorner(r0, r0)),
                                          ls.initial_step, ls.shrink);
    r.split_ = r0;
    return r;
  }

  // Direction supported on a single block pair: the exponential acts as the
  // identity outside the pair's column span.
  static GeodesicRay modified_pair(const FlagPoint& p, Index s, Index t,
                                   const Matrix& small_skew, const LineSearch& ls) {
    GeodesicRay r(p);
    r.main_ = std::make_unique<ExpLadder>(small_skew, ls.initial_step, ls.shrink);
    r.pair_ = std::make_pair(s, t);
    return r;
  }

  FlagPoint at(int backtrack) const {
    const Matrix e = main_->at(backtrack);
    if (pair_) {
      const auto& b = base_->sig.blocks;
      const auto [s, t] = *pair_;
      Matrix v = base_->v;
      Matrix vp(base_->n(), b.size(s) + b.size(t));
      vp.leftCols(b.size(s)) = v.middleCols(b.offset(s), b.size(s));
      vp.rightCols(b.size(t)) = v.middleCols(b.offset(t), b.size(t));
      vp = vp * e;
      v.middleCols(b.offset(s), b.size(s)) = vp.leftCols(b.size(s));
      v.middleCols(b.offset(t), b.size(t)) = vp.rightCols(b.size(t));
      return FlagPoint{std::move(v), base_->sig};
    }
    Matrix v = base_->v * e;
    if (corr_) v.leftCols(split_) = v.leftCols(split_) * corr_->at(backtrack);
    return FlagPoint{std::move(v), base_->sig};
  }

 private:
  explicit GeodesicRay(const FlagPoint& p) : base_(&p) {}

  const FlagPoint* base_;
  std::unique_ptr<ExpLadder> main_;
  std::unique_ptr<ExpLadder> corr_;
  Index split_ = 0;
  std::optional<std::pair<Index, Index>> pair_;
};

struct ArmijoResult {
  FlagPoint point;
  double objective;
  double step;
};

inline ArmijoResult armijo_backtrack(const Objective& o, double f0, double gnorm2,
                                     const GeodesicRay& ray, const LineSearch& ls) {
  double step = ls.initial_step;
  for (int bt = 0; bt <= ls.max_backtracks; ++bt) {
    FlagPoint trial = ray.at(bt);
    const double f = o.value(trial);
    if (f <= f0 - ls.c * step * gnorm2) return {std::move(trial), f, step};
    step *= ls.shrink;
  }
  throw LineSearchFailedError("armijo: no decrease within max_backtracks");
}

}  // namespace detail

/// Riemannian gradient descent with Armijo backtracking, stepping along the
/// geodesics of the chosen embedding metric.
inline std::pair<FlagPoint, RunTrace> gradient_descent(const Objective& o, const FlagPoint& p0,
                                                       const CoordinateMetric& m,
                                                       const LineSearch& ls,
                                                       const StopRule& stop) {
  if (o.kind != m.label)
    throw ArityMismatchError("gradient_descent: objective kind does not match metric");
  FlagPoint p = p0;
  RunTrace trace;
  const auto t0 = detail::SteadyClock::now();
  for (int iter = 0;; ++iter) {
    const TangentCoords g = riemannian_gradient(p, o.euclidean_gradient(p), m);
    const double gn2 = metric(g, g, m);
    const double gn = std::sqrt(gn2);
    const double f = o.value(p);
    const double el = detail::seconds_since(t0);
    trace.records.push_back({iter, f, gn, el});
    if (gn <= stop.grad_tol) {
      trace.status = RunStatus::converged;
      break;
    }
    if (iter >= stop.max_iters) {
      trace.status = RunStatus::max_iters;
      break;
    }
    if (stop.max_seconds && el > *stop.max_seconds) {
      trace.status = RunStatus::time_budget;
      break;
    }
    const Matrix lam = -tangent_to_skew(g);
    const detail::GeodesicRay ray = (m.label == EmbeddingKind::classical)
                                        ? detail::GeodesicRay::classical(p, lam, ls)
                                        : detail::GeodesicRay::modified(p, lam, ls);
    detail::ArmijoResult res = detail::armijo_backtrack(o, f, gn2, ray, ls);
    p = std::move(res.point);
  }
  return {std::move(p), std::move(trace)};
}

/// Cyclic coordinate gradient descent under the modified metric: each
/// sub-step follows the geodesic of one pair block of the gradient, which
/// stays inside the totally geodesic pair Grassmannian.
inline std::pair<FlagPoint, RunTrace> coordinate_gradient_descent(const Objective& o,
                                                                  const FlagPoint& p0,
                                                                  const LineSearch& ls,
                                                                  const StopRule& stop) {
  if (o.kind != EmbeddingKind::modified)
    throw ArityMismatchError("coordinate_gradient_descent: objective must use the modified embedding");
  const CoordinateMetric m = coordinate_metric(p0.sig, EmbeddingKind::modified);
  const Index nb = p0.sig.num_blocks();
  const double pairs = static_cast<double>(pair_count(nb));
  // A pair whose gradient block is this small cannot move the full gradient
  // norm across the stopping threshold; skipping avoids noise-level searches.
  const double skip_norm = stop.grad_tol / (10.0 * std::sqrt(std::max(1.0, pairs)));

  FlagPoint p = p0;
  RunTrace trace;
  const auto t0 = detail::SteadyClock::now();
  for (int sweep = 0;; ++sweep) {
    const double gn = grad_norm(o, p, m);
    const double f = o.value(p);
    const double el = detail::seconds_since(t0);
    trace.records.push_back({sweep, f, gn, el});
    if (gn <= stop.grad_tol) {
      trace.status = RunStatus::converged;
      break;
    }
    if (sweep >= stop.max_iters) {
      trace.status = RunStatus::max_iters;
      break;
    }
    if (stop.max_seconds && el > *stop.max_seconds) {
      trace.status = RunStatus::time_budget;
      break;
    }
    for (Index idx = 0; idx < pair_count(nb); ++idx) {
      const auto [s, t] = pair_at(nb, idx);
      const AmbientTuple eg = o.euclidean_gradient(p);
      const TangentCoords g = riemannian_gradient(p, eg, m);
      TangentCoords gblock = zero_tangent(p);
      gblock.blocks[static_cast<std::size_t>(idx)] = g.blocks[static_cast<std::size_t>(idx)];
      const double gn2 = metric(gblock, gblock, m);
      if (std::sqrt(gn2) <= skip_norm) continue;
      const auto& bl = p.sig.blocks;
      Matrix small = Matrix::Zero(bl.size(s) + bl.size(t), bl.size(s) + bl.size(t));
      small.topRightCorner(bl.size(s), bl.size(t)) =
          -gblock.blocks[static_cast<std::size_t>(idx)];
      small.bottomLeftCorner(bl.size(t), bl.size(s)) =
          gblock.blocks[static_cast<std::size_t>(idx)].transpose();
      const detail::GeodesicRay ray = detail::GeodesicRay::modified_pair(p, s, t, small, ls);
      detail::ArmijoResult res = detail::armijo_backtrack(o, o.value(p), gn2, ray, ls);
      p = std::move(res.point);
    }
  }
  return {std::move(p), std::move(trace)};
}

/// Maximizer of <A, W I_{m_s,m_t} W^T> over W in O(m_s + m_t): the
/// eigenvector matrix of A with eigenvalues in descending order.
inline Matrix subproblem_linear_solve(const Matrix& a, Index ms, Index mt) {
  if (a.rows() != ms + mt || a.cols() != ms + mt)
    throw DimensionError("subproblem_linear_solve: matrix does not match block sizes");
  return sym_eig(a).u;
}

enum class CoordOrder { cyclic, randomized };

struct CoordinateOrder {
  CoordOrder kind = CoordOrder::cyclic;
  std::uint64_t seed = 0;
};

struct SubstepInfo {
  Index s = 0;
  Index t = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  const Matrix& restricted;    // the maximized restriction matrix
  const FlagPoint& point_before;
};

struct CoordMinOptions {
  std::function<void(const SubstepInfo&)> observer;
};

namespace detail {

// Cyclic sweep order: start at (0,1); advance s while s+1 < t, otherwise
// advance t. Visits 2d-1 pairs per sweep.
inline std::vector<std::pair<Index, Index>> cyclic_sweep_pairs(Index nb) {
  std::vector<std::pair<Index, Index>> out;
  Index s = 0, t = 1;
  while (t < nb) {
    out.emplace_back(s, t);
    if (s + 1 < t)
      ++s;
    else
      ++t;
  }
  return out;
}

inline FlagPoint apply_pair_rotation(const FlagPoint& p, Index s, Index t, const Matrix& w) {
  const auto& b = p.sig.blocks;
  Matrix vp = pair_columns(p, s, t) * w;
  Matrix v = p.v;
  v.middleCols(b.offset(s), b.size(s)) = vp.leftCols(b.size(s));
  v.middleCols(b.offset(t), b.size(t)) = vp.rightCols(b.size(t));
  return FlagPoint{std::move(v), p.sig};
}

}  // namespace detail

/// Coordinate minimization: solves the pair sub-problem exactly for each
/// visited pair (s,t) and replaces (W_s, W_t) by the optimal split of their
/// joint span. The objective never increases across a sub-step.
inline std::pair<FlagPoint, RunTrace> coordinate_minimization(const Objective& o,
                                                              const FlagPoint& p0,
                                                              const StopRule& stop,
                                                              const CoordinateOrder& order = {},
                                                              const CoordMinOptions& opts = {}) {
  if (o.kind != EmbeddingKind::modified)
    throw ArityMismatchError("coordinate_minimization: objective must use the modified embedding");
  if (!o.restrict_pair)
    throw SubproblemUnavailableError(
        "coordinate_minimization: objective has no exact pair restriction");
  const CoordinateMetric m = coordinate_metric(p0.sig, EmbeddingKind::modified);
  const Index nb = p0.sig.num_blocks();
  const std::vector<std::pair<Index, Index>> cyclic = detail::cyclic_sweep_pairs(nb);
  std::mt19937_64 rng(order.seed);
  std::uniform_int_distribution<Index> draw(0, pair_count(nb) - 1);

  FlagPoint p = p0;
  RunTrace trace;
  const auto t0 = detail::SteadyClock::now();
  for (int sweep = 0;; ++sweep) {
    const double gn = grad_norm(o, p, m);
    const double f = o.value(p);
    const double el = detail::seconds_since(t0);
    trace.records.push_back({sweep, f, gn, el});
    if (gn <= stop.grad_tol) {
      trace.status = RunStatus::converged;
      break;
    }
    if (sweep >= stop.max_iters) {
      trace.status = RunStatus::max_iters;
      break;
    }
    if (stop.max_seconds && el > *stop.max_seconds) {
      trace.status = RunStatus::time_budget;
      break;
    }
    std::vector<std::pair<Index, Index>> visits;
    if (order.kind == CoordOrder::cyclic) {
      visits = cyclic;
    } else {
      visits.reserve(static_cast<std::size_t>(pair_count(nb)));
      for (Index i = 0; i < pair_count(nb); ++i)
        visits.push_back(pair_at(nb, draw(rng)));
    }
    for (const auto& [s, t] : visits) {
      const Matrix a = o.restrict_pair(p, s, t);
      const Matrix w = subproblem_linear_solve(a, p.sig.blocks.size(s), p.sig.blocks.size(t));
      const double before = o.value(p);
      FlagPoint cand = detail::apply_pair_rotation(p, s, t, w);
      const double after = o.value(cand);
      // The solved rotation is optimal for the pair; keep the current blocks
      // when it yields no measured decrease, so the objective never increases.
      const bool accept = after <= before;
      if (opts.observer) {
        FlagPoint prev = p;
        if (accept) p = std::move(cand);
        opts.observer(SubstepInfo{s, t, before, accept ? after : before, a, prev});
      } else if (accept) {
        p = std::move(cand);
      }
    }
  }
  return {std::move(p), std::move(trace)};
}

}  // namespace flagopt
