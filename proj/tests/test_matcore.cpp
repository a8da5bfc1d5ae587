#include "test_helpers.hpp"

#include <cmath>

using namespace flagopt;
using testutil::expect_near;

TEST(Vec, ColumnStackingExamples) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Vector v = vec(a);
  Vector want(4);
  want << 1, 3, 2, 4;
  EXPECT_EQ(v, want);

  EXPECT_EQ(vec(Matrix::Identity(2, 2)), (Vector(4) << 1, 0, 0, 1).finished());
  EXPECT_EQ(vec(Matrix::Zero(2, 3)), Vector::Zero(6));
}

TEST(Vec, ProductIdentities) {
  std::mt19937_64 rng(7);
  const Matrix a = testutil::gaussian(3, 2, rng);
  const Matrix b = testutil::gaussian(2, 4, rng);
  const Vector lhs = vec(a * b);
  expect_near(lhs, kron(Matrix::Identity(4, 4), a) * vec(b), 1e-13);
  expect_near(lhs, kron(b.transpose(), Matrix::Identity(3, 3)) * vec(a), 1e-13);
}

TEST(Vec, UnvecRoundTrip) {
  std::mt19937_64 rng(8);
  const Matrix a = testutil::gaussian(4, 3, rng);
  EXPECT_EQ(unvec(vec(a), 4, 3), a);
}

TEST(Commutation, ScalarCase) {
  EXPECT_EQ(commutation_matrix(1, 1), Matrix::Identity(1, 1));
}

TEST(Commutation, TransposesVec) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Vector got = commutation_matrix(2, 2) * vec(a);
  Vector want(4);
  want << 1, 2, 3, 4;  // vec of the transpose
  EXPECT_EQ(got, want);

  std::mt19937_64 rng(3);
  for (auto [m, n] : {std::pair<Index, Index>{2, 3}, {3, 3}, {1, 5}}) {
    const Matrix b = testutil::gaussian(m, n, rng);
    expect_near(commutation_matrix(m, n) * vec(b), vec(b.transpose()), 0.0);
  }
}

TEST(Commutation, PermutationStructure) {
  const Matrix k = commutation_matrix(2, 3);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(k.row(i).sum(), 1.0);
    EXPECT_DOUBLE_EQ(k.col(i).sum(), 1.0);
    EXPECT_DOUBLE_EQ(k.row(i).cwiseAbs().maxCoeff(), 1.0);
  }
  // K^(m,n) K^(n,m) = I
  for (auto [m, n] : {std::pair<Index, Index>{2, 3}, {3, 3}, {1, 5}})
    expect_near(commutation_matrix(m, n) * commutation_matrix(n, m),
                Matrix::Identity(m * n, m * n), 0.0);
}

TEST(SkewExp, ZeroGivesIdentity) {
  expect_near(skew_exp(Matrix::Zero(3, 3)), Matrix::Identity(3, 3), 0.0);
}

TEST(SkewExp, QuarterTurn) {
  Matrix a(2, 2);
  const double th = M_PI / 2.0;
  a << 0, -th, th, 0;
  Matrix want(2, 2);
  want << 0, -1, 1, 0;
  expect_near(skew_exp(a), want, 1e-14);
}

TEST(SkewExp, InverseIdentity) {
  std::mt19937_64 rng(11);
  const Matrix a = testutil::random_skew(5, rng);
  expect_near(skew_exp(a) * skew_exp(-a), Matrix::Identity(5, 5), 1e-12);
}

TEST(SkewExp, OrthogonalityProperty) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Index> size(2, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = size(rng);
    const Matrix r = skew_exp(testutil::random_skew(n, rng));
    EXPECT_LE((r.transpose() * r - Matrix::Identity(n, n)).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

TEST(SkewExp, RejectsNonSkew) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  EXPECT_THROW(skew_exp(a), NotSkewError);
}

TEST(SymEig, DiagonalInput) {
  Matrix s = Vector::LinSpaced(2, 1, 3).asDiagonal();  // diag(1,3)
  const SymEig e = sym_eig(s);
  EXPECT_DOUBLE_EQ(e.values(0), 3.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
  expect_near(e.u * e.values.asDiagonal() * e.u.transpose(), s, 1e-14);
}

TEST(SymEig, OffDiagonalPair) {
  Matrix s(2, 2);
  s << 0, 1, 1, 0;
  const SymEig e = sym_eig(s);
  EXPECT_NEAR(e.values(0), 1.0, 1e-14);
  EXPECT_NEAR(e.values(1), -1.0, 1e-14);
}

TEST(SymEig, IdentityAndReconstruction) {
  const SymEig e = sym_eig(Matrix::Identity(4, 4));
  expect_near(e.values, Vector::Ones(4), 0.0);

  std::mt19937_64 rng(13);
  const Matrix s = testutil::random_symmetric(9, rng);
  const SymEig es = sym_eig(s);
  expect_near(es.u * es.values.asDiagonal() * es.u.transpose(), s, 1e-12);
  for (Index i = 0; i + 1 < 9; ++i) EXPECT_GE(es.values(i), es.values(i + 1));
}

TEST(SymEig, RejectsNonSymmetric) {
  Matrix s(2, 2);
  s << 0, 1, -1, 0;
  EXPECT_THROW(sym_eig(s), NotSymmetricError);
}

TEST(Svd, Examples) {
  EXPECT_EQ(svd(Matrix::Zero(2, 2)).sigma, Vector::Zero(2));

  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = -3.0;
  const Svd s = svd(a);
  EXPECT_NEAR(s.sigma(0), 3.0, 1e-14);
  EXPECT_NEAR(s.sigma(1), 2.0, 1e-14);

  std::mt19937_64 rng(14);
  const Matrix b = testutil::gaussian(4, 3, rng);
  const Svd sb = svd(b);
  Matrix sig = Matrix::Zero(4, 3);
  sig.topLeftCorner(3, 3) = Matrix(sb.sigma.asDiagonal());
  expect_near(sb.u * sig * sb.w.transpose(), b, 1e-12);
  expect_near(sb.u.transpose() * sb.u, Matrix::Identity(4, 4), 1e-13);
  expect_near(sb.w.transpose() * sb.w, Matrix::Identity(3, 3), 1e-13);
}

TEST(Blocks, GetSetRoundTrip) {
  BlockPartition p({1, 1, 1});
  Matrix a = Matrix::Identity(3, 3);
  expect_near(block_get(a, p, 1, 1), Matrix::Identity(1, 1), 0.0);

  BlockPartition q({1, 2});
  Matrix b(3, 3);
  b << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Matrix want(1, 2);
  want << 2, 3;
  expect_near(block_get(b, q, 0, 1), want, 0.0);

  std::mt19937_64 rng(15);
  const Matrix blk = testutil::gaussian(2, 1, rng);
  Matrix c = Matrix::Zero(3, 3);
  block_set(c, q, 1, 0, blk);
  EXPECT_EQ(block_get(c, q, 1, 0), blk);
}

TEST(Blocks, RangeErrors) {
  BlockPartition p({2, 2});
  Matrix a = Matrix::Zero(4, 4);
  EXPECT_THROW(block_get(a, p, 0, 2), IndexOutOfRangeError);
  EXPECT_THROW(block_get(a, p, -1, 0), IndexOutOfRangeError);
  EXPECT_THROW(block_set(a, p, 0, 0, Matrix::Zero(1, 1)), DimensionError);
}

TEST(PeanoBaker, ZeroField) {
  TimeVaryingMatrix phi{[](double) { return Matrix::Zero(3, 3); }, 0.0, 1.0};
  Vector u(3);
  u << 1, -2, 0.5;
  expect_near(peano_baker_solve(phi, u, 1.0), u, 0.0);
  expect_near(peano_baker_solve(phi, u, 0.37), u, 0.0);
}

TEST(PeanoBaker, ConstantCoefficientMatchesExp) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<Index> size(2, 10);
  std::uniform_real_distribution<double> time(0.1, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = size(rng);
    const Matrix a = testutil::random_skew(n, rng);
    const Vector u = testutil::gaussian(n, 1, rng);
    const double t = time(rng);
    TimeVaryingMatrix phi{[a](double) { return a; }, 0.0, 1.0};
    const Vector got = peano_baker_solve(phi, u, t);
    const Vector want = skew_exp(t * a) * u;
    EXPECT_LE((got - want).norm(), 1e-8) << "n=" << n << " t=" << t;
  }
}

TEST(PeanoBaker, CommutingFamilyClosedForm) {
  // Phi(t) = [[0,-t],[t,0]] integrates to a rotation by t^2/2.
  TimeVaryingMatrix phi{[](double t) {
                          Matrix m(2, 2);
                          m << 0, -t, t, 0;
                          return m;
                        },
                        0.0, 2.0};
  Vector u(2);
  u << 1, 0;
  for (double t : {0.5, 1.0, 2.0}) {
    const double ang = t * t / 2.0;
    Vector want(2);
    want << std::cos(ang), std::sin(ang);
    expect_near(peano_baker_solve(phi, u, t), want, 1e-9);
  }
}

TEST(PeanoBaker, ReportsNoConvergence) {
  TimeVaryingMatrix phi{[](double) { return Matrix(600.0 * Matrix::Identity(2, 2)); }, 0.0, 1.0};
  Vector u = Vector::Ones(2);
  EXPECT_THROW(peano_baker_solve(phi, u, 1.0), NoConvergenceError);
}

TEST(PeanoBaker, RejectsTimeOutsideInterval) {
  TimeVaryingMatrix phi{[](double) { return Matrix::Zero(2, 2); }, 0.0, 1.0};
  EXPECT_THROW(peano_baker_solve(phi, Vector::Ones(2), 2.0), std::invalid_argument);
}
