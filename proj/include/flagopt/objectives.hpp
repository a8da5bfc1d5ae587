#pragma once

#include "flagopt/flag.hpp"

#include <memory>
#include <random>

namespace flagopt {

/// A differentiable function on the flag manifold together with its Euclidean
/// gradients with respect to the embedded matrices Q_k. Objectives whose
/// restriction to a block pair is linear in the restricted involution expose
/// restrict_pair: it returns A with
///     f restricted to the pair = const - 2 <A, Q'>,
/// so the exact sub-solver maximizes <A, Q'> over the pair Grassmannian and
/// the objective decrease of a sub-step is 2(<A, Q*> - <A, Q_old>).
struct Objective {
  EmbeddingKind kind = EmbeddingKind::modified;
  std::function<double(const FlagPoint&)> value;
  std::function<AmbientTuple(const FlagPoint&)> euclidean_gradient;
  std::function<Matrix(const FlagPoint&, Index, Index)> restrict_pair;  // may be empty
};

namespace detail {

inline Matrix pair_columns(const FlagPoint& p, Index s, Index t) {
  const auto& b = p.sig.blocks;
  Matrix v(p.n(), b.size(s) + b.size(t));
  v.leftCols(b.size(s)) = p.v.middleCols(b.offset(s), b.size(s));
  v.rightCols(b.size(t)) = p.v.middleCols(b.offset(t), b.size(t));
  return v;
}

}  // namespace detail

/// f(V) = sum_k tr(V_k^T A_k V_k), V_k the k-th column block of V.
/// Equivalently sum_k <A_k, (I + Q_k)/2>, so dF/dQ_k = A_k / 2.
inline Objective trace_objective(std::vector<Matrix> a, EmbeddingKind kind) {
  auto sym = std::make_shared<std::vector<Matrix>>();
  sym->reserve(a.size());
  for (const Matrix& m : a) {
    if (m.rows() != m.cols()) throw DimensionError("trace_objective: entries must be square");
    sym->push_back(sym_part(m));
  }
  const Index d = static_cast<Index>(sym->size());

  auto check = [sym, d](const FlagPoint& p) {
    if (p.sig.d() != d) throw DimensionError("trace_objective: signature has wrong depth");
    if ((*sym)[0].rows() != p.n()) throw DimensionError("trace_objective: dimension mismatch");
  };

  Objective o;
  o.kind = kind;
  o.value = [sym, check](const FlagPoint& p) {
    check(p);
    double f = 0.0;
    Index off = 0;
    for (std::size_t k = 0; k < sym->size(); ++k) {
      const Index mk = p.sig.blocks.size(static_cast<Index>(k));
      const auto vk = p.v.middleCols(off, mk);
      f += (vk.transpose() * (*sym)[k] * vk).trace();
      off += mk;
    }
    return f;
  };
  o.euclidean_gradient = [sym, check, kind](const FlagPoint& p) {
    check(p);
    AmbientTuple eg;
    eg.mats.reserve(static_cast<std::size_t>(p.sig.arity(kind)));
    for (const Matrix& m : *sym) eg.mats.push_back(0.5 * m);
    if (kind == EmbeddingKind::modified) eg.mats.push_back(Matrix::Zero(p.n(), p.n()));
    return eg;
  };
  o.restrict_pair = [sym, check, d](const FlagPoint& p, Index s, Index t) {
    check(p);
    const Matrix vst = detail::pair_columns(p, s, t);
    // C_k = A_k/2 for k < d, zero for the complement block.
    Matrix c = Matrix::Zero(p.n(), p.n());
    if (t < d) c += 0.5 * (*sym)[static_cast<std::size_t>(t)];
    if (s < d) c -= 0.5 * (*sym)[static_cast<std::size_t>(s)];
    return Matrix(sym_part(0.5 * (vst.transpose() * c * vst)));
  };
  return o;
}

/// Subspaces to separate: orthonormal bases U_j with sum of dimensions n,
/// plus their embedded involutions tau_j(U_j) = 2 U_j U_j^T - I.
struct SeparationInstance {
  std::vector<Matrix> bases;
  std::vector<Matrix> targets;
  Index n = 0;

  Index num_blocks() const { return static_cast<Index>(bases.size()); }

  FlagSignature signature() const {
    std::vector<Index> dims;
    Index acc = 0;
    for (std::size_t j = 0; j + 1 < bases.size(); ++j) {
      acc += bases[j].cols();
      dims.push_back(acc);
    }
    return flag_signature(n, std::move(dims));
  }
};

inline SeparationInstance separation_instance(std::vector<Matrix> bases) {
  if (bases.size() < 2) throw BadInstanceError("separation_instance: need at least two subspaces");
  const Index n = bases[0].rows();
  Index total = 0;
  for (const Matrix& u : bases) {
    if (u.rows() != n) throw BadInstanceError("separation_instance: ambient dimensions differ");
    if (u.cols() < 1) throw BadInstanceError("separation_instance: empty basis");
    if ((u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).norm() > kTolOrtho)
      throw BadInstanceError("separation_instance: basis columns are not orthonormal");
    total += u.cols();
  }
  if (total != n)
    throw BadInstanceError("separation_instance: block dimensions do not sum to n");
  SeparationInstance inst;
  inst.n = n;
  inst.targets.reserve(bases.size());
  for (const Matrix& u : bases)
    inst.targets.push_back(2.0 * (u * u.transpose()) - Matrix::Identity(n, n));
  inst.bases = std::move(bases);
  return inst;
}

/// F(W) = sum_j || tau_j(U_j) - Q_j(W) ||_F^2 under the modified embedding.
/// dF/dQ_j = 2 (Q_j - tau_j(U_j)); on the manifold F is affine in the Q_j.
inline Objective separation_objective(const SeparationInstance& inst) {
  auto targets = std::make_shared<std::vector<Matrix>>(inst.targets);
  const Index n = inst.n;
  std::vector<Index> sizes;
  sizes.reserve(inst.bases.size());
  for (const Matrix& u : inst.bases) sizes.push_back(u.cols());

  auto check = [n, sizes](const FlagPoint& p) {
    if (p.n() != n || p.sig.num_blocks() != static_cast<Index>(sizes.size()))
      throw DimensionError("separation_objective: signature mismatch");
    for (Index j = 0; j < p.sig.num_blocks(); ++j)
      if (p.sig.blocks.size(j) != sizes[static_cast<std::size_t>(j)])
        throw DimensionError("separation_objective: block sizes do not match the instance");
  };

  Objective o;
  o.kind = EmbeddingKind::modified;
  o.value = [targets, check](const FlagPoint& p) {
    check(p);
    double f = 0.0;
    for (Index j = 0; j < p.sig.num_blocks(); ++j) {
      const Vector jd = flag_j_diag(p.sig, j);
      const Matrix q = p.v * jd.asDiagonal() * p.v.transpose();
      f += ((*targets)[static_cast<std::size_t>(j)] - q).squaredNorm();
    }
    return f;
  };
  o.euclidean_gradient = [targets, check](const FlagPoint& p) {
    check(p);
    AmbientTuple eg;
    eg.mats.reserve(static_cast<std::size_t>(p.sig.num_blocks()));
    for (Index j = 0; j < p.sig.num_blocks(); ++j) {
      const Vector jd = flag_j_diag(p.sig, j);
      const Matrix q = p.v * jd.asDiagonal() * p.v.transpose();
      eg.mats.push_back(2.0 * (q - (*targets)[static_cast<std::size_t>(j)]));
    }
    return eg;
  };
  o.restrict_pair = [targets, check](const FlagPoint& p, Index s, Index t) {
    check(p);
    const Matrix vst = detail::pair_columns(p, s, t);
    const Matrix diff =
        (*targets)[static_cast<std::size_t>(s)] - (*targets)[static_cast<std::size_t>(t)];
    return Matrix(sym_part(vst.transpose() * diff * vst));
  };
  return o;
}

/// Maximum relative error between metric pairings of the Riemannian gradient
/// and centered finite differences of the objective along random geodesics.
inline double finite_diff_gradient_check(const Objective& o, const FlagPoint& p, int trials,
                                         std::uint64_t seed = 12345) {
  if (trials < 1) throw std::invalid_argument("finite_diff_gradient_check: trials >= 1");
  const CoordinateMetric m = coordinate_metric(p.sig, o.kind);
  const TangentCoords grad = riemannian_gradient(p, o.euclidean_gradient(p), m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    TangentCoords xi = zero_tangent(p);
    for (auto& b : xi.blocks)
      for (Index i = 0; i < b.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j) b(i, j) = gauss(rng);
    const double nrm = metric_norm(xi, m);
    if (nrm == 0.0) continue;
    for (auto& b : xi.blocks) b /= nrm;
    const double pairing = metric(grad, xi, m);
    const double fd =
        (o.value(geodesic(p, xi, h, o.kind)) - o.value(geodesic(p, xi, -h, o.kind))) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(fd), std::abs(pairing)});
    worst = std::max(worst, std::abs(pairing - fd) / denom);
  }
  return worst;
}

}  // namespace flagopt
