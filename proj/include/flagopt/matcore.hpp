#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flagopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Frobenius-asymmetry tolerances accepted by the dense kernels.
inline constexpr double kTolSkew = 1e-10;
inline constexpr double kTolSym = 1e-10;
// Orthonormality tolerance for basis/representative inputs.
inline constexpr double kTolOrtho = 1e-8;

struct NotSkewError : std::runtime_error {
  explicit NotSkewError(const std::string& m) : std::runtime_error(m) {}
};
struct NotSymmetricError : std::runtime_error {
  explicit NotSymmetricError(const std::string& m) : std::runtime_error(m) {}
};
struct NotOrthonormalError : std::runtime_error {
  explicit NotOrthonormalError(const std::string& m) : std::runtime_error(m) {}
};
struct NotOrthogonalError : std::runtime_error {
  explicit NotOrthogonalError(const std::string& m) : std::runtime_error(m) {}
};
struct NotTangentError : std::runtime_error {
  explicit NotTangentError(const std::string& m) : std::runtime_error(m) {}
};
struct BaseMismatchError : std::runtime_error {
  explicit BaseMismatchError(const std::string& m) : std::runtime_error(m) {}
};
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};
struct ArityMismatchError : std::runtime_error {
  explicit ArityMismatchError(const std::string& m) : std::runtime_error(m) {}
};
struct BadSignatureError : std::runtime_error {
  explicit BadSignatureError(const std::string& m) : std::runtime_error(m) {}
};
struct BadInstanceError : std::runtime_error {
  explicit BadInstanceError(const std::string& m) : std::runtime_error(m) {}
};
struct IndexOutOfRangeError : std::out_of_range {
  explicit IndexOutOfRangeError(const std::string& m) : std::out_of_range(m) {}
};
struct NoConvergenceError : std::runtime_error {
  explicit NoConvergenceError(const std::string& m) : std::runtime_error(m) {}
};
struct LineSearchFailedError : std::runtime_error {
  explicit LineSearchFailedError(const std::string& m) : std::runtime_error(m) {}
};
struct SubproblemUnavailableError : std::runtime_error {
  explicit SubproblemUnavailableError(const std::string& m) : std::runtime_error(m) {}
};
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};

inline Matrix sym_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }
inline Matrix skew_part(const Matrix& a) { return 0.5 * (a - a.transpose()); }

inline double asymmetry(const Matrix& a) { return (a - a.transpose()).norm(); }
inline double skew_defect(const Matrix& a) { return (a + a.transpose()).norm(); }

/// Partition of {0,...,n-1} into consecutive blocks of the given sizes.
class BlockPartition {
 public:
  BlockPartition() = default;

  explicit BlockPartition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    offsets_.resize(sizes_.size() + 1, 0);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (sizes_[i] < 1) throw BadSignatureError("block sizes must be positive");
      offsets_[i + 1] = offsets_[i] + sizes_[i];
    }
  }

  Index count() const { return static_cast<Index>(sizes_.size()); }
  Index total() const { return offsets_.empty() ? 0 : offsets_.back(); }

  Index size(Index i) const {
    check(i);
    return sizes_[static_cast<std::size_t>(i)];
  }
  Index offset(Index i) const {
    check(i);
    return offsets_[static_cast<std::size_t>(i)];
  }

  bool operator==(const BlockPartition& o) const { return sizes_ == o.sizes_; }

 private:
  void check(Index i) const {
    if (i < 0 || i >= count()) throw IndexOutOfRangeError("block index out of range");
  }

  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
};

inline Matrix block_get(const Matrix& a, const BlockPartition& p, Index i, Index j) {
  if (a.rows() != p.total() || a.cols() != p.total())
    throw DimensionError("block_get: matrix does not match partition");
  return a.block(p.offset(i), p.offset(j), p.size(i), p.size(j));
}

inline void block_set(Matrix& a, const BlockPartition& p, Index i, Index j, const Matrix& b) {
  if (a.rows() != p.total() || a.cols() != p.total())
    throw DimensionError("block_set: matrix does not match partition");
  if (b.rows() != p.size(i) || b.cols() != p.size(j))
    throw DimensionError("block_set: block has wrong shape");
  a.block(p.offset(i), p.offset(j), p.size(i), p.size(j)) = b;
}

/// Column-stacking vectorization.
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw DimensionError("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Permutation K with K*vec(A) = vec(A^T) for all m-by-n A.
inline Matrix commutation_matrix(Index m, Index n) {
  if (m < 1 || n < 1) throw DimensionError("commutation_matrix: m,n must be >= 1");
  Matrix k = Matrix::Zero(m * n, m * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) k(i * n + j, j * m + i) = 1.0;
  return k;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// exp(A) for skew-symmetric A; the result is special orthogonal.
inline Matrix skew_exp(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("skew_exp: matrix must be square");
  if (skew_defect(a) > kTolSkew)
    throw NotSkewError("skew_exp: input is not skew-symmetric");
  return a.exp();
}

struct SymEig {
  Matrix u;       // orthogonal, columns are eigenvectors
  Vector values;  // descending
};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
inline SymEig sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) throw DimensionError("sym_eig: matrix must be square");
  if (asymmetry(s) > kTolSym) throw NotSymmetricError("sym_eig: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw NoConvergenceError("sym_eig: solver failed");
  SymEig out;
  out.u = es.eigenvectors().rowwise().reverse();
  out.values = es.eigenvalues().reverse();
  return out;
}

struct Svd {
  Matrix u;      // m-by-m orthogonal
  Vector sigma;  // min(m,n), descending, nonnegative
  Matrix w;      // n-by-n orthogonal
};

inline Svd svd(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> s(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return Svd{s.matrixU(), s.singularValues(), s.matrixV()};
}

/// A matrix-valued function of time on a fixed interval.
struct TimeVaryingMatrix {
  std::function<Matrix(double)> at;
  double t0 = 0.0;
  double t1 = 1.0;
};

struct PeanoBakerOptions {
  int segments = 256;         // trapezoid grid per Richardson level
  double tol = 1e-12;         // Picard stall tolerance
  int max_iterations = 100;
  int richardson_levels = 3;  // grids N, 2N, 4N combined
};

namespace detail {

// Picard iteration for x(t) = u + \int_a^t Phi(s) x(s) ds on a fixed trapezoid
// grid. Converges to the solution of the discrete Volterra equation.
inline Vector peano_baker_grid(const TimeVaryingMatrix& phi, const Vector& u, double a,
                               double t, int segments, double tol, int max_iterations) {
  const int n = segments;
  const double h = (t - a) / n;
  std::vector<Matrix> ph(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) ph[static_cast<std::size_t>(i)] = phi.at(a + h * i);
  const Index dim = u.size();
  for (const auto& m : ph)
    if (m.rows() != dim || m.cols() != dim)
      throw DimensionError("peano_baker_solve: Phi dimension mismatch");

  std::vector<Vector> x(static_cast<std::size_t>(n) + 1, u);
  std::vector<Vector> g(static_cast<std::size_t>(n) + 1);
  const double scale = std::max(1.0, u.norm());
  for (int it = 0; it < max_iterations; ++it) {
    for (int i = 0; i <= n; ++i) g[i] = ph[i] * x[i];
    double delta = 0.0;
    Vector cum = Vector::Zero(dim);
    for (int i = 1; i <= n; ++i) {
      cum += (0.5 * h) * (g[i - 1] + g[i]);
      Vector xi = u + cum;
      delta = std::max(delta, (xi - x[i]).norm());
      x[i] = std::move(xi);
    }
    if (delta <= tol * scale) return x[n];
  }
  throw NoConvergenceError("peano_baker_solve: no convergence within max iterations");
}

}  // namespace detail

/// Solves x' = Phi(t) x, x(a) = u by Picard iteration of the iterated-integral
/// series on a trapezoid grid, with Richardson extrapolation across grids.
inline Vector peano_baker_solve(const TimeVaryingMatrix& phi, const Vector& u, double t,
                                const PeanoBakerOptions& opts = {}) {
  const double a = phi.t0;
  const double span = phi.t1 - phi.t0;
  if (t < a - 1e-12 * std::abs(span) || t > phi.t1 + 1e-12 * std::abs(span))
    throw std::invalid_argument("peano_baker_solve: t outside [t0, t1]");
  if (t == a || u.size() == 0) return u;

  const int levels = std::max(1, opts.richardson_levels);
  std::vector<Vector> row(static_cast<std::size_t>(levels));
  for (int j = 0; j < levels; ++j)
    row[static_cast<std::size_t>(j)] = detail::peano_baker_grid(
        phi, u, a, t, opts.segments << j, opts.tol, opts.max_iterations);
  // Error expansion of the trapezoid fixed point is even in h.
  for (int k = 1; k < levels; ++k) {
    const double f = std::pow(4.0, k);
    for (int j = 0; j + k < levels; ++j)
      row[static_cast<std::size_t>(j)] =
          (f * row[static_cast<std::size_t>(j) + 1] - row[static_cast<std::size_t>(j)]) /
          (f - 1.0);
  }
  return row[0];
}

}  // namespace flagopt
