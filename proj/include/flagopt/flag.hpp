#pragma once

#include "flagopt/matcore.hpp"

#include <optional>

namespace flagopt {

enum class EmbeddingKind { classical, modified };

/// Nested-subspace dimensions (n_1 < ... < n_d < n) and the derived block
/// sizes m_1 = n_1, m_k = n_k - n_{k-1}, m_{d+1} = n - n_d.
struct FlagSignature {
  Index n = 0;
  std::vector<Index> dims;
  BlockPartition blocks;

  Index d() const { return static_cast<Index>(dims.size()); }
  Index num_blocks() const { return d() + 1; }
  Index arity(EmbeddingKind kind) const {
    return kind == EmbeddingKind::classical ? d() : d() + 1;
  }

  bool operator==(const FlagSignature& o) const { return n == o.n && dims == o.dims; }
};

inline FlagSignature flag_signature(Index n, std::vector<Index> dims) {
  if (dims.empty()) throw BadSignatureError("flag_signature: dims must be non-empty");
  Index prev = 0;
  for (Index nk : dims) {
    if (nk <= prev) throw BadSignatureError("flag_signature: dims must be strictly increasing");
    prev = nk;
  }
  if (dims.back() >= n) throw BadSignatureError("flag_signature: dims must stay below n");
  std::vector<Index> sizes;
  sizes.reserve(dims.size() + 1);
  prev = 0;
  for (Index nk : dims) {
    sizes.push_back(nk - prev);
    prev = nk;
  }
  sizes.push_back(n - dims.back());
  FlagSignature sig;
  sig.n = n;
  sig.dims = std::move(dims);
  sig.blocks = BlockPartition(std::move(sizes));
  return sig;
}

/// A flag represented by an orthogonal matrix V whose column blocks span the
/// successive orthogonal complements W_1,...,W_{d+1}.
struct FlagPoint {
  Matrix v;
  FlagSignature sig;

  Index n() const { return sig.n; }
};

inline FlagPoint flag_from_basis(Matrix v, FlagSignature sig) {
  if (v.rows() != sig.n || v.cols() != sig.n)
    throw DimensionError("flag_from_basis: V must be n-by-n");
  if ((v.transpose() * v - Matrix::Identity(sig.n, sig.n)).norm() > kTolOrtho)
    throw NotOrthogonalError("flag_from_basis: V is not orthogonal");
  return FlagPoint{std::move(v), std::move(sig)};
}

/// Diagonal of J_k: +1 on block k, -1 elsewhere (k is 0-based).
inline Vector flag_j_diag(const FlagSignature& sig, Index k) {
  Vector j = Vector::Constant(sig.n, -1.0);
  j.segment(sig.blocks.offset(k), sig.blocks.size(k)).setOnes();
  return j;
}

inline Matrix flag_j_matrix(const FlagSignature& sig, Index k) {
  return Matrix(flag_j_diag(sig, k).asDiagonal());
}

/// Two points represent the same flag when their block projectors agree;
/// the representative V is only defined up to block-diagonal gauge.
inline bool same_flag(const FlagPoint& a, const FlagPoint& b, double tol = kTolOrtho) {
  if (!(a.sig == b.sig)) return false;
  if (a.v.data() == b.v.data() || a.v == b.v) return true;
  for (Index j = 0; j < a.sig.num_blocks(); ++j) {
    const auto va = a.v.middleCols(a.sig.blocks.offset(j), a.sig.blocks.size(j));
    const auto vb = b.v.middleCols(a.sig.blocks.offset(j), a.sig.blocks.size(j));
    if ((va * va.transpose() - vb * vb.transpose()).norm() > tol) return false;
  }
  return true;
}

struct AmbientTuple {
  std::vector<Matrix> mats;

  Index arity() const { return static_cast<Index>(mats.size()); }
};

inline AmbientTuple embed(const FlagPoint& p, EmbeddingKind kind) {
  AmbientTuple t;
  const Index a = p.sig.arity(kind);
  t.mats.reserve(a);
  for (Index k = 0; k < a; ++k) {
    const Vector j = flag_j_diag(p.sig, k);
    t.mats.push_back(p.v * j.asDiagonal() * p.v.transpose());
  }
  return t;
}

inline AmbientTuple embed_classical(const FlagPoint& p) {
  return embed(p, EmbeddingKind::classical);
}
inline AmbientTuple embed_modified(const FlagPoint& p) {
  return embed(p, EmbeddingKind::modified);
}

struct ValidationReport {
  bool ok = true;
  std::string violation;
  double residual = 0.0;
};

/// Checks symmetry, involution, trace and pairwise orthogonality of an
/// embedded tuple. Reports the first violated constraint.
inline ValidationReport flag_validate(const AmbientTuple& t, const FlagSignature& sig,
                                      double tol = 1e-10) {
  const Index a = t.arity();
  if (a != sig.d() && a != sig.d() + 1)
    return {false, "arity does not match the signature", static_cast<double>(a)};
  const Index n = sig.n;
  const Matrix id = Matrix::Identity(n, n);
  auto fail = [](std::string what, double r) { return ValidationReport{false, std::move(what), r}; };
  for (Index k = 0; k < a; ++k) {
    const Matrix& q = t.mats[static_cast<std::size_t>(k)];
    if (q.rows() != n || q.cols() != n)
      return fail("entry " + std::to_string(k) + ": wrong dimensions", 0.0);
    if (double r = asymmetry(q); r > tol)
      return fail("entry " + std::to_string(k) + ": not symmetric", r);
    if (double r = (q * q - id).norm(); r > tol)
      return fail("entry " + std::to_string(k) + ": not an involution", r);
    const double want = 2.0 * sig.blocks.size(k) - n;
    if (double r = std::abs(q.trace() - want); r > tol)
      return fail("entry " + std::to_string(k) + ": trace mismatch", r);
  }
  for (Index j = 0; j < a; ++j)
    for (Index l = j + 1; l < a; ++l) {
      const Matrix& qj = t.mats[static_cast<std::size_t>(j)];
      const Matrix& ql = t.mats[static_cast<std::size_t>(l)];
      if (double r = ((id + qj) * (id + ql)).norm(); r > tol)
        return fail("entries " + std::to_string(j) + "," + std::to_string(l) +
                        ": ranges are not orthogonal",
                    r);
    }
  return {};
}

// ---- tangent coordinates ----------------------------------------------------

inline Index pair_count(Index num_blocks) { return num_blocks * (num_blocks - 1) / 2; }

inline Index pair_index(Index num_blocks, Index j, Index l) {
  if (!(0 <= j && j < l && l < num_blocks))
    throw IndexOutOfRangeError("pair_index: need 0 <= j < l < num_blocks");
  return j * num_blocks - j * (j + 1) / 2 + (l - j - 1);
}

inline std::pair<Index, Index> pair_at(Index num_blocks, Index idx) {
  for (Index j = 0; j < num_blocks; ++j) {
    const Index row = num_blocks - j - 1;
    if (idx < row) return {j, j + 1 + idx};
    idx -= row;
  }
  throw IndexOutOfRangeError("pair_at: index out of range");
}

/// Tangent vector in coordinates: the family T(j,l) = Lambda(j,l), j < l, of
/// off-diagonal blocks of a skew matrix Lambda with zero diagonal blocks.
/// The ambient tangent entries are X_k = V (Lambda J_k - J_k Lambda) V^T,
/// whose (j,l) block equals -2 T(j,l) when j or l is k.
struct TangentCoords {
  FlagPoint base;
  std::vector<Matrix> blocks;  // lexicographic pairs (0,1), (0,2), ...

  const Matrix& block(Index j, Index l) const {
    return blocks[static_cast<std::size_t>(pair_index(base.sig.num_blocks(), j, l))];
  }
  Matrix& block(Index j, Index l) {
    return blocks[static_cast<std::size_t>(pair_index(base.sig.num_blocks(), j, l))];
  }
};

namespace detail {

inline void check_same_base(const FlagPoint& a, const FlagPoint& b) {
  if (!same_flag(a, b)) throw BaseMismatchError("flag: base points differ");
}

inline void check_coords_shape(const TangentCoords& t) {
  const auto& sig = t.base.sig;
  const Index nb = sig.num_blocks();
  if (static_cast<Index>(t.blocks.size()) != pair_count(nb))
    throw DimensionError("tangent coords: wrong number of blocks");
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    const Matrix& b = t.blocks[static_cast<std::size_t>(idx)];
    if (b.rows() != sig.blocks.size(j) || b.cols() != sig.blocks.size(l))
      throw DimensionError("tangent coords: block shape mismatch");
  }
}

}  // namespace detail

inline TangentCoords zero_tangent(const FlagPoint& p) {
  TangentCoords t{p, {}};
  const Index nb = p.sig.num_blocks();
  t.blocks.reserve(pair_count(nb));
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    t.blocks.emplace_back(Matrix::Zero(p.sig.blocks.size(j), p.sig.blocks.size(l)));
  }
  return t;
}

inline Matrix tangent_to_skew(const TangentCoords& t) {
  detail::check_coords_shape(t);
  const auto& sig = t.base.sig;
  Matrix lam = Matrix::Zero(sig.n, sig.n);
  for (Index idx = 0; idx < pair_count(sig.num_blocks()); ++idx) {
    const auto [j, l] = pair_at(sig.num_blocks(), idx);
    const Matrix& b = t.blocks[static_cast<std::size_t>(idx)];
    lam.block(sig.blocks.offset(j), sig.blocks.offset(l), b.rows(), b.cols()) = b;
    lam.block(sig.blocks.offset(l), sig.blocks.offset(j), b.cols(), b.rows()) = -b.transpose();
  }
  return lam;
}

/// Extracts the upper off-diagonal blocks of a skew matrix as coordinates.
/// The diagonal blocks must vanish for the result to represent a tangent.
inline TangentCoords tangent_from_skew(const FlagPoint& p, const Matrix& lam) {
  if (lam.rows() != p.n() || lam.cols() != p.n())
    throw DimensionError("tangent_from_skew: dimension mismatch");
  if (skew_defect(lam) > kTolSkew) throw NotSkewError("tangent_from_skew: not skew");
  TangentCoords t{p, {}};
  const Index nb = p.sig.num_blocks();
  t.blocks.reserve(pair_count(nb));
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    t.blocks.emplace_back(block_get(lam, p.sig.blocks, j, l));
  }
  return t;
}

/// Zeroes the diagonal blocks of a skew matrix; identity on the rest.
inline Matrix pi_offdiag(const Matrix& a, const BlockPartition& p) {
  if (a.rows() != p.total() || a.cols() != p.total())
    throw DimensionError("pi_offdiag: matrix does not match partition");
  if (skew_defect(a) > kTolSkew) throw NotSkewError("pi_offdiag: input is not skew");
  Matrix out = a;
  for (Index j = 0; j < p.count(); ++j)
    out.block(p.offset(j), p.offset(j), p.size(j), p.size(j)).setZero();
  return out;
}

inline AmbientTuple tangent_to_ambient(const TangentCoords& t, EmbeddingKind kind) {
  detail::check_coords_shape(t);
  const auto& sig = t.base.sig;
  const Index a = sig.arity(kind);
  const Matrix lam = tangent_to_skew(t);
  AmbientTuple out;
  out.mats.reserve(a);
  for (Index k = 0; k < a; ++k) {
    // Lambda J_k - J_k Lambda: row/column block k survives with factor -2/+2.
    Matrix m = Matrix::Zero(sig.n, sig.n);
    const Index ok = sig.blocks.offset(k), mk = sig.blocks.size(k);
    m.middleRows(ok, mk) = -2.0 * lam.middleRows(ok, mk);
    m.middleCols(ok, mk) = 2.0 * lam.middleCols(ok, mk);
    m.block(ok, ok, mk, mk).setZero();
    out.mats.push_back(t.base.v * m * t.base.v.transpose());
  }
  return out;
}

/// Inverse of tangent_to_ambient on its image; rejects tuples whose block
/// pattern does not match a tangent vector.
inline TangentCoords ambient_to_tangent(const AmbientTuple& t, const FlagPoint& p) {
  const auto& sig = p.sig;
  const Index a = t.arity();
  if (a != sig.d() && a != sig.d() + 1)
    throw ArityMismatchError("ambient_to_tangent: arity does not match the signature");
  double scale = 0.0;
  std::vector<Matrix> s;
  s.reserve(a);
  for (const Matrix& x : t.mats) {
    if (x.rows() != sig.n || x.cols() != sig.n)
      throw DimensionError("ambient_to_tangent: entry dimension mismatch");
    s.push_back(p.v.transpose() * x * p.v);
    scale = std::max(scale, s.back().norm());
  }
  const double tol = 1e-8 * std::max(1.0, scale);
  const Index nb = sig.num_blocks();
  TangentCoords out = zero_tangent(p);
  for (Index k = 0; k < a; ++k) {
    const Matrix& sk = s[static_cast<std::size_t>(k)];
    for (Index i = 0; i < nb; ++i)
      for (Index j = 0; j < nb; ++j) {
        if (i == k || j == k) continue;
        if (block_get(sk, sig.blocks, i, j).norm() > tol)
          throw NotTangentError("ambient_to_tangent: forbidden block is nonzero");
      }
    if (block_get(sk, sig.blocks, k, k).norm() > tol)
      throw NotTangentError("ambient_to_tangent: diagonal block is nonzero");
  }
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    const Matrix from_j = block_get(s[static_cast<std::size_t>(j)], sig.blocks, j, l);
    if (l < a) {
      const Matrix from_l = block_get(s[static_cast<std::size_t>(l)], sig.blocks, j, l);
      if ((from_l + from_j).norm() > tol)
        throw NotTangentError("ambient_to_tangent: entries disagree on a shared block");
    }
    out.blocks[static_cast<std::size_t>(idx)] = -0.5 * from_j;
  }
  return out;
}

// ---- metric -------------------------------------------------------------------

/// Per-pair weights of the embedding metric, stated for the blocks of the
/// embedded derivative (which are -2 times the coordinate blocks).
struct CoordinateMetric {
  EmbeddingKind label = EmbeddingKind::modified;
  FlagSignature sig;
  std::vector<double> weights;  // per pair, lexicographic

  double weight(Index j, Index l) const {
    return weights[static_cast<std::size_t>(pair_index(sig.num_blocks(), j, l))];
  }
};

inline CoordinateMetric coordinate_metric(const FlagSignature& sig, EmbeddingKind kind) {
  CoordinateMetric m;
  m.label = kind;
  m.sig = sig;
  const Index nb = sig.num_blocks();
  m.weights.resize(static_cast<std::size_t>(pair_count(nb)));
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    (void)j;
    const bool touches_last = (l == nb - 1);
    m.weights[static_cast<std::size_t>(idx)] =
        (kind == EmbeddingKind::classical && touches_last) ? 2.0 : 4.0;
  }
  return m;
}

/// Riemannian inner product. Equals sum_k tr(X_k Y_k) over the ambient tuples
/// of the metric's embedding; the factor 4 converts coordinate blocks to
/// embedded-derivative blocks.
inline double metric(const TangentCoords& x, const TangentCoords& y, const CoordinateMetric& m) {
  if (!(x.base.sig == m.sig) || !(y.base.sig == m.sig))
    throw BaseMismatchError("metric: signature mismatch");
  detail::check_same_base(x.base, y.base);
  double sum = 0.0;
  for (std::size_t i = 0; i < m.weights.size(); ++i)
    sum += m.weights[i] * 4.0 * x.blocks[i].cwiseProduct(y.blocks[i]).sum();
  return sum;
}

inline double metric_norm(const TangentCoords& x, const CoordinateMetric& m) {
  return std::sqrt(metric(x, x, m));
}

// ---- projections ----------------------------------------------------------------

namespace detail {

// Skew generators of the product-of-O(n) tangent components: entry k of the
// input is written as V J_k L_k V^T with L_k skew; a general perturbation is
// first projected onto that form.
inline std::vector<Matrix> orthogonal_factors(const FlagPoint& p, const AmbientTuple& t,
                                              EmbeddingKind kind) {
  const auto& sig = p.sig;
  const Index a = sig.arity(kind);
  if (t.arity() != a) throw ArityMismatchError("projection: arity does not match embedding");
  std::vector<Matrix> ls;
  ls.reserve(a);
  for (Index k = 0; k < a; ++k) {
    const Matrix& g = t.mats[static_cast<std::size_t>(k)];
    if (g.rows() != sig.n || g.cols() != sig.n)
      throw DimensionError("projection: entry dimension mismatch");
    const Matrix s = p.v.transpose() * g * p.v;
    const Matrix js = flag_j_diag(sig, k).asDiagonal() * s;
    ls.push_back(skew_part(js));
  }
  return ls;
}

}  // namespace detail

/// Orthogonal projection onto the tangent space, in coordinates.
inline TangentCoords project_tangent(const FlagPoint& p, const AmbientTuple& t,
                                     EmbeddingKind kind) {
  const auto& sig = p.sig;
  const std::vector<Matrix> ls = detail::orthogonal_factors(p, t, kind);
  const Index nb = sig.num_blocks();
  TangentCoords out = zero_tangent(p);
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    const Matrix lj = block_get(ls[static_cast<std::size_t>(j)], sig.blocks, j, l);
    if (kind == EmbeddingKind::classical && l == nb - 1) {
      out.blocks[static_cast<std::size_t>(idx)] = -0.5 * lj;
    } else {
      const Matrix ll = block_get(ls[static_cast<std::size_t>(l)], sig.blocks, j, l);
      out.blocks[static_cast<std::size_t>(idx)] = -0.25 * (lj + ll);
    }
  }
  return out;
}

/// Orthogonal projection onto the normal space: the tangent remainder of the
/// product-of-O(n) tangent part of the input.
inline AmbientTuple project_normal(const FlagPoint& p, const AmbientTuple& t,
                                   EmbeddingKind kind) {
  const auto& sig = p.sig;
  const std::vector<Matrix> ls = detail::orthogonal_factors(p, t, kind);
  const TangentCoords tan = project_tangent(p, t, kind);
  const Matrix lam = tangent_to_skew(tan);
  AmbientTuple out;
  out.mats.reserve(ls.size());
  for (Index k = 0; k < static_cast<Index>(ls.size()); ++k) {
    // J_k L_k minus the ambient tangent generator (Lambda J_k - J_k Lambda).
    Matrix m = Matrix(flag_j_diag(sig, k).asDiagonal()) * ls[static_cast<std::size_t>(k)];
    const Index ok = sig.blocks.offset(k), mk = sig.blocks.size(k);
    m.middleRows(ok, mk) += 2.0 * lam.middleRows(ok, mk);
    m.middleCols(ok, mk) -= 2.0 * lam.middleCols(ok, mk);
    out.mats.push_back(p.v * m * p.v.transpose());
  }
  return out;
}

// ---- geodesics ------------------------------------------------------------------

/// Geodesic of the modified embedding metric: V(t) = V exp(t Lambda).
inline FlagPoint geodesic_modified(const FlagPoint& p, const TangentCoords& t, double s) {
  detail::check_same_base(p, t.base);
  const Matrix lam = tangent_to_skew(t);
  return FlagPoint{p.v * skew_exp(s * lam), p.sig};
}

/// Geodesic of the classical embedding metric:
/// V(t) = V exp(t [[2L0, L1], [-L1^T, 0]]) diag(exp(-t L0), I).
inline FlagPoint geodesic_classical(const FlagPoint& p, const TangentCoords& t, double s) {
  detail::check_same_base(p, t.base);
  const auto& sig = p.sig;
  const Index r = sig.dims.back();
  const Matrix lam = tangent_to_skew(t);
  Matrix m = lam;
  m.topLeftCorner(r, r) *= 2.0;
  Matrix w = p.v * skew_exp(s * m);
  w.leftCols(r) = w.leftCols(r) * skew_exp(-s * Matrix(lam.topLeftCorner(r, r)));
  return FlagPoint{std::move(w), sig};
}

inline FlagPoint geodesic(const FlagPoint& p, const TangentCoords& t, double s,
                          EmbeddingKind kind) {
  return kind == EmbeddingKind::classical ? geodesic_classical(p, t, s)
                                          : geodesic_modified(p, t, s);
}

// ---- parallel transport -----------------------------------------------------------

namespace detail {

// Stack the upper off-diagonal blocks of a skew matrix into one vector.
inline Vector stack_pairs(const FlagSignature& sig, const Matrix& skew) {
  const Index nb = sig.num_blocks();
  Index total = 0;
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    total += sig.blocks.size(j) * sig.blocks.size(l);
  }
  Vector out(total);
  Index at = 0;
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    const Matrix b = block_get(skew, sig.blocks, j, l);
    out.segment(at, b.size()) = vec(b);
    at += b.size();
  }
  return out;
}

inline Matrix unstack_pairs(const FlagSignature& sig, const Vector& v) {
  const Index nb = sig.num_blocks();
  Matrix skew = Matrix::Zero(sig.n, sig.n);
  Index at = 0;
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    const Index rows = sig.blocks.size(j), cols = sig.blocks.size(l);
    const Matrix b = unvec(v.segment(at, rows * cols), rows, cols);
    skew.block(sig.blocks.offset(j), sig.blocks.offset(l), rows, cols) = b;
    skew.block(sig.blocks.offset(l), sig.blocks.offset(j), cols, rows) = -b.transpose();
    at += rows * cols;
  }
  return skew;
}

// Dense matrix of a linear operator on stacked pair coordinates.
template <typename Op>
inline Matrix pair_operator_matrix(const FlagSignature& sig, Op&& op) {
  const Index dim = stack_pairs(sig, Matrix::Zero(sig.n, sig.n)).size();
  Matrix phi(dim, dim);
  Vector e = Vector::Zero(dim);
  for (Index i = 0; i < dim; ++i) {
    e(i) = 1.0;
    phi.col(i) = stack_pairs(sig, op(unstack_pairs(sig, e)));
    e(i) = 0.0;
  }
  return phi;
}

// Right-hand side of the classical transport equation:
//   2 X' = pi([X, Lambda]) + [[0, X0 L1 + L0 X1], [-(X0 L1 + L0 X1)^T, 0]].
inline Matrix classical_transport_rhs(const FlagSignature& sig, const Matrix& x,
                                      const Matrix& lam) {
  const Index r = sig.dims.back();
  const Index m = sig.n - r;
  Matrix rhs = pi_offdiag(x * lam - lam * x, sig.blocks);
  const Matrix strip = x.topLeftCorner(r, r) * lam.topRightCorner(r, m) +
                       lam.topLeftCorner(r, r) * x.topRightCorner(r, m);
  rhs.topRightCorner(r, m) += strip;
  rhs.bottomLeftCorner(m, r) -= strip.transpose();
  return 0.5 * rhs;
}

}  // namespace detail

/// Velocity field Lambda(t) of the classical geodesic with initial
/// coordinates dir: Lambda_0 constant, Lambda_1(t) = exp(t Lambda_0) Lambda_1.
inline TimeVaryingMatrix classical_geodesic_field(const TangentCoords& dir, double t0,
                                                  double t1) {
  const auto& sig = dir.base.sig;
  const Index r = sig.dims.back();
  const Matrix lam = tangent_to_skew(dir);
  const Matrix l0 = lam.topLeftCorner(r, r);
  const Matrix l1 = lam.topRightCorner(r, sig.n - r);
  auto eval = [sig, l0, l1, r](double s) {
    Matrix lt = Matrix::Zero(sig.n, sig.n);
    lt.topLeftCorner(r, r) = l0;
    lt.topRightCorner(r, sig.n - r) = skew_exp(s * l0) * l1;
    lt.bottomLeftCorner(sig.n - r, r) = -lt.topRightCorner(r, sig.n - r).transpose();
    return lt;
  };
  return TimeVaryingMatrix{std::move(eval), t0, t1};
}

/// Transports the coordinate field y0 along the coordinate path Lambda(t)
/// under the classical metric, from the path start to time t.
inline Matrix transport_classical(const FlagPoint& p, const TimeVaryingMatrix& lambda_path,
                                  const Matrix& y0_skew, double t,
                                  const PeanoBakerOptions& opts = {}) {
  const auto& sig = p.sig;
  if (y0_skew.rows() != sig.n || y0_skew.cols() != sig.n)
    throw DimensionError("transport_classical: dimension mismatch");
  TimeVaryingMatrix phi{
      [&sig, &lambda_path](double s) {
        const Matrix lam = lambda_path.at(s);
        return detail::pair_operator_matrix(sig, [&](const Matrix& x) {
          return detail::classical_transport_rhs(sig, x, lam);
        });
      },
      lambda_path.t0, lambda_path.t1};
  const Vector xt = peano_baker_solve(phi, detail::stack_pairs(sig, y0_skew), t, opts);
  return detail::unstack_pairs(sig, xt);
}

/// Parallel transport along a classical geodesic, returned at the endpoint.
inline TangentCoords transport_classical_geodesic(const FlagPoint& p, const TangentCoords& dir,
                                                  const TangentCoords& y0, double t,
                                                  const PeanoBakerOptions& opts = {}) {
  detail::check_same_base(p, dir.base);
  detail::check_same_base(p, y0.base);
  const double sgn = t < 0 ? -1.0 : 1.0;
  // For t < 0 run the reversed geodesic: s -> gamma(-s) has direction -dir.
  TangentCoords d = dir;
  for (auto& b : d.blocks) b *= sgn;
  const TimeVaryingMatrix field = classical_geodesic_field(d, 0.0, std::abs(t));
  const Matrix xt = transport_classical(p, field, tangent_to_skew(y0), std::abs(t), opts);
  FlagPoint end = geodesic_classical(p, dir, t);
  return tangent_from_skew(std::move(end), xt);
}

/// Parallel transport along a modified-metric geodesic: integrates
/// X' = pi([X, A]) / 2 with the geodesic direction A held fixed.
inline TangentCoords transport_modified(const FlagPoint& p, const TangentCoords& dir,
                                        const TangentCoords& y0, double t,
                                        const PeanoBakerOptions& opts = {}) {
  detail::check_same_base(p, dir.base);
  detail::check_same_base(p, y0.base);
  const auto& sig = p.sig;
  const double sgn = t < 0 ? -1.0 : 1.0;
  const Matrix lam = sgn * tangent_to_skew(dir);
  const Matrix phi = detail::pair_operator_matrix(sig, [&](const Matrix& x) {
    return Matrix(0.5 * pi_offdiag(x * lam - lam * x, sig.blocks));
  });
  TimeVaryingMatrix tv{[&phi](double) { return phi; }, 0.0, std::abs(t)};
  const Vector xt =
      peano_baker_solve(tv, detail::stack_pairs(sig, tangent_to_skew(y0)), std::abs(t), opts);
  FlagPoint end = geodesic_modified(p, dir, t);
  return tangent_from_skew(std::move(end), detail::unstack_pairs(sig, xt));
}

// ---- gradient -------------------------------------------------------------------

/// Riemannian gradient from Euclidean gradients dF/dQ_k: the unique tangent
/// with metric(grad, xi) = sum_k <eg_k, d/dt X_k(gamma_xi)> for all xi.
/// Only the block rows the coordinates touch are formed.
inline TangentCoords riemannian_gradient(const FlagPoint& p, const AmbientTuple& eg,
                                         const CoordinateMetric& m) {
  const auto& sig = p.sig;
  if (!(sig == m.sig)) throw BaseMismatchError("riemannian_gradient: signature mismatch");
  const Index a = sig.arity(m.label);
  if (eg.arity() != a)
    throw ArityMismatchError("riemannian_gradient: gradient arity does not match metric");
  const Index r = sig.dims.back();
  const auto vleft = p.v.leftCols(r);

  std::vector<Matrix> top(static_cast<std::size_t>(a));  // rows 0..r-1 of V^T eg_k V
  for (Index k = 0; k < a; ++k) {
    const Matrix& g = eg.mats[static_cast<std::size_t>(k)];
    if (g.rows() != sig.n || g.cols() != sig.n)
      throw DimensionError("riemannian_gradient: entry dimension mismatch");
    if (g.isZero(0.0)) continue;
    if (asymmetry(g) > 1e-8 * std::max(1.0, g.norm()))
      throw NotSymmetricError("riemannian_gradient: Euclidean gradient entry not symmetric");
    top[static_cast<std::size_t>(k)] = vleft.transpose() * g * p.v;
  }
  auto s_block = [&](Index k, Index j, Index l) -> Matrix {
    const Matrix& sk = top[static_cast<std::size_t>(k)];
    if (sk.size() == 0) return Matrix::Zero(sig.blocks.size(j), sig.blocks.size(l));
    return sk.block(sig.blocks.offset(j), sig.blocks.offset(l), sig.blocks.size(j),
                    sig.blocks.size(l));
  };

  const Index nb = sig.num_blocks();
  TangentCoords out = zero_tangent(p);
  for (Index idx = 0; idx < pair_count(nb); ++idx) {
    const auto [j, l] = pair_at(nb, idx);
    if (m.label == EmbeddingKind::classical && l == nb - 1) {
      out.blocks[static_cast<std::size_t>(idx)] = -0.5 * s_block(j, j, l);
    } else {
      out.blocks[static_cast<std::size_t>(idx)] = -0.25 * (s_block(j, j, l) - s_block(l, j, l));
    }
  }
  return out;
}

}  // namespace flagopt
