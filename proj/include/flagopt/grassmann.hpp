#pragma once

#include "flagopt/matcore.hpp"

namespace flagopt {

/// A k-plane in R^n represented by the symmetric orthogonal matrix
/// Q = 2P - I, where P projects onto the subspace. tr Q = 2k - n.
struct GrassmannPoint {
  Matrix q;
  Index k = 0;

  Index n() const { return q.rows(); }
};

struct GrTangent {
  Matrix x;
  GrassmannPoint base;
};

namespace detail {

inline void gr_check_base(const GrassmannPoint& a, const GrassmannPoint& b) {
  if (a.n() != b.n() || a.k != b.k || (a.q - b.q).norm() > kTolOrtho)
    throw BaseMismatchError("grassmann: tangent vectors have different base points");
}

// Eigenbasis V with Q = V I_{k,n-k} V^T (the +1 eigenvectors come first).
inline Matrix gr_eigenbasis(const GrassmannPoint& p) {
  return sym_eig(sym_part(p.q)).u;
}

inline Matrix paired_block(const Matrix& b) {
  // [[0, B], [B^T, 0]]
  const Index k = b.rows(), m = b.cols();
  Matrix s = Matrix::Zero(k + m, k + m);
  s.topRightCorner(k, m) = b;
  s.bottomLeftCorner(m, k) = b.transpose();
  return s;
}

inline Matrix paired_skew(const Matrix& b) {
  // [[0, B], [-B^T, 0]]
  const Index k = b.rows(), m = b.cols();
  Matrix s = Matrix::Zero(k + m, k + m);
  s.topRightCorner(k, m) = b;
  s.bottomLeftCorner(m, k) = -b.transpose();
  return s;
}

}  // namespace detail

/// Point from an orthonormal basis of the subspace: Q = 2VV^T - I.
inline GrassmannPoint gr_from_basis(const Matrix& v) {
  const Index n = v.rows(), k = v.cols();
  if (k < 1 || k > n) throw DimensionError("gr_from_basis: need 1 <= k <= n columns");
  if ((v.transpose() * v - Matrix::Identity(k, k)).norm() > kTolOrtho)
    throw NotOrthonormalError("gr_from_basis: columns are not orthonormal");
  Matrix q = 2.0 * (v * v.transpose()) - Matrix::Identity(n, n);
  return GrassmannPoint{std::move(q), k};
}

/// Validates an involution matrix and recovers k from its trace.
inline GrassmannPoint gr_from_involution(const Matrix& q) {
  const Index n = q.rows();
  if (q.rows() != q.cols()) throw DimensionError("gr_from_involution: matrix must be square");
  if (asymmetry(q) > kTolOrtho) throw NotSymmetricError("gr_from_involution: not symmetric");
  if ((q * q - Matrix::Identity(n, n)).norm() > kTolOrtho)
    throw NotOrthonormalError("gr_from_involution: not an involution");
  const double tr = q.trace();
  const double rounded = std::round(tr);
  if (std::abs(tr - rounded) > 1e-8)
    throw NotOrthonormalError("gr_from_involution: trace is not near an integer");
  const Index k = static_cast<Index>(std::llround((rounded + n) / 2.0));
  if (k < 0 || k > n) throw DimensionError("gr_from_involution: invalid trace");
  return GrassmannPoint{q, k};
}

/// Orthogonal projection of a symmetric matrix onto the tangent space at Q.
inline GrTangent gr_tangent_project(const GrassmannPoint& p, const Matrix& s) {
  if (s.rows() != p.n() || s.cols() != p.n())
    throw DimensionError("gr_tangent_project: dimension mismatch");
  if (asymmetry(s) > kTolSym) throw NotSymmetricError("gr_tangent_project: input not symmetric");
  Matrix x = 0.5 * (s - p.q * s * p.q);
  return GrTangent{std::move(x), p};
}

inline double gr_metric(const GrTangent& x, const GrTangent& y) {
  detail::gr_check_base(x.base, y.base);
  return (x.x.transpose() * y.x).trace();
}

inline double gr_norm(const GrTangent& x) { return std::sqrt(gr_metric(x, x)); }

/// Geodesic through Q with initial velocity X, evaluated at time t.
inline GrassmannPoint gr_geodesic(const GrassmannPoint& p, const GrTangent& x, double t) {
  detail::gr_check_base(p, x.base);
  const Index n = p.n(), k = p.k;
  const Matrix v = detail::gr_eigenbasis(p);
  const Matrix m = v.transpose() * x.x * v;
  const Matrix b = m.topRightCorner(k, n - k);
  // gamma(t) = V exp(-t/2 S_B) I_{k,n-k} exp(t/2 S_B) V^T with S_B = [[0,B],[-B^T,0]]
  const Matrix e = skew_exp(0.5 * t * detail::paired_skew(b));
  Vector j(n);
  j.head(k).setOnes();
  j.tail(n - k).setConstant(-1.0);
  Matrix q = v * (e.transpose() * j.asDiagonal() * e) * v.transpose();
  return GrassmannPoint{std::move(q), k};
}

/// Parallel transport of Y along the geodesic with direction X.
inline GrTangent gr_transport(const GrassmannPoint& p, const GrTangent& x, const GrTangent& y,
                              double t) {
  detail::gr_check_base(p, x.base);
  detail::gr_check_base(p, y.base);
  const Index n = p.n(), k = p.k;
  const Matrix v = detail::gr_eigenbasis(p);
  const Matrix b = (v.transpose() * x.x * v).topRightCorner(k, n - k);
  const Matrix c = (v.transpose() * y.x * v).topRightCorner(k, n - k);
  const Matrix e = skew_exp(0.5 * t * detail::paired_skew(b));
  Vector j(n);
  j.head(k).setOnes();
  j.tail(n - k).setConstant(-1.0);
  GrassmannPoint end{v * (e.transpose() * j.asDiagonal() * e) * v.transpose(), k};
  Matrix xt = v * (e.transpose() * detail::paired_block(c) * e) * v.transpose();
  return GrTangent{std::move(xt), std::move(end)};
}

/// Riemannian gradient of f(Q) = <A, Q> at Q.
inline GrTangent gr_linear_grad(const Matrix& a, const GrassmannPoint& p) {
  if (a.rows() != p.n() || a.cols() != p.n())
    throw DimensionError("gr_linear_grad: dimension mismatch");
  const Matrix& q = p.q;
  Matrix g = 0.25 * (a + a.transpose() - q * a * q - q * a.transpose() * q);
  return GrTangent{std::move(g), p};
}

/// Maximizer of f(Q) = <A, Q> over Gr(k, n): the involution built from the
/// top-k eigenvectors of (A + A^T)/2.
inline GrassmannPoint gr_linear_max(const Matrix& a, Index k) {
  const Index n = a.rows();
  if (a.rows() != a.cols()) throw DimensionError("gr_linear_max: matrix must be square");
  if (k < 1 || k > n - 1) throw DimensionError("gr_linear_max: need 1 <= k <= n-1");
  const SymEig es = sym_eig(sym_part(a));
  Vector j(n);
  j.head(k).setOnes();
  j.tail(n - k).setConstant(-1.0);
  Matrix q = es.u * j.asDiagonal() * es.u.transpose();
  return GrassmannPoint{std::move(q), k};
}

}  // namespace flagopt
