#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/rng.hpp"

using namespace qlroe;

namespace {

Eigen::MatrixXcd random_matrix(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rng.complex_normal();
  return m;
}

}  // namespace

TEST(LpOperator, ShapeChecks) {
  const auto sp = build_path_space(3);
  EXPECT_THROW(LpOperator(sp, 2.0, 1, Eigen::MatrixXcd::Zero(2, 2)), InvalidArgument);
  EXPECT_THROW(LpOperator(sp, 0.5, 1, Eigen::MatrixXcd::Zero(3, 3)), InvalidArgument);
  EXPECT_THROW(LpOperator(sp, 2.0, 0, Eigen::MatrixXcd::Zero(0, 0)), InvalidArgument);
  const auto other = build_grid_space({3}, GridMetric::l1, Eigen::Vector3d(1, 2, 3));
  EXPECT_THROW(LpOperator::zero(sp, 2.0) + LpOperator::zero(other, 2.0), InvalidArgument);
  EXPECT_EQ(LpOperator::identity(sp, 2.0, 2).dim(), 6);
}

TEST(OpNorm, ExactEndpointsMatchOracle) {
  const auto sp = build_path_space(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_matrix(5, seed);
    const LpOperator a(sp, 1.0, 1, m);
    const auto b1 = op_norm(a);
    double col = 0.0, row = 0.0;
    for (int j = 0; j < 5; ++j) col = std::max(col, m.col(j).cwiseAbs().sum());
    for (int i = 0; i < 5; ++i) row = std::max(row, m.row(i).cwiseAbs().sum());
    EXPECT_NEAR(b1.lo, col, 1e-12 * col);
    EXPECT_NEAR(b1.hi, col, 1e-12 * col);
    const auto binf = op_norm(a, kInfinity);
    EXPECT_NEAR(binf.lo, row, 1e-12 * row);
    EXPECT_NEAR(binf.hi, row, 1e-12 * row);
    const auto b2 = op_norm(a, 2.0);
    const double s = oracle::spectral(m);
    EXPECT_LE(b2.lo, s * (1 + 1e-12));
    EXPECT_GE(b2.hi, s * (1 - 1e-12));
    EXPECT_LE(b2.width(), 1e-10 * s);
  }
}

TEST(OpNorm, GeneralExponentBracketsSphereSearch) {
  const auto sp = build_path_space(4);
  std::mt19937_64 rng(7);
  for (double p : {1.3, 1.7, 3.0, 5.0}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto m = random_matrix(4, 100 + seed);
      const auto b = op_norm(LpOperator(sp, p, 1, m));
      const double found = oracle::sphere_search(m, p, rng);
      EXPECT_LE(b.lo, b.hi);
      EXPECT_LE(found, b.hi + 1e-9) << "p=" << p;
      EXPECT_GE(found, b.lo - 1e-6) << "p=" << p;
    }
  }
}

TEST(OpNorm, DiagonalIsExactForEveryExponent) {
  const auto sp = build_path_space(4);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(4, 4);
  d.diagonal() << 0.5, -3.0, std::complex<double>(0, 2), 1.0;
  for (double p : {1.0, 1.5, 2.0, 4.0, kInfinity}) {
    const auto b = op_norm(LpOperator(sp, p, 1, d));
    EXPECT_NEAR(b.lo, 3.0, 1e-9);
    EXPECT_NEAR(b.hi, 3.0, 1e-9);
  }
}

TEST(OpNorm, WeightedMeasure) {
  Eigen::MatrixXd dist(2, 2);
  dist << 0, 1, 1, 0;
  const auto sp = make_space({"a", "b"}, dist, Eigen::Vector2d(1.0, 4.0));
  // Shift e_a -> e_b: ||T chi_a||_p = 4^{1/p} ||chi_a||_p.
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
  m(1, 0) = 1.0;
  for (double p : {1.0, 2.0, 3.0}) {
    const auto b = op_norm(LpOperator(sp, p, 1, m));
    EXPECT_NEAR(b.lo, std::pow(4.0, 1.0 / p), 1e-9);
    EXPECT_NEAR(b.hi, std::pow(4.0, 1.0 / p), 1e-9);
  }
  EXPECT_NEAR(op_norm(LpOperator(sp, kInfinity, 1, m)).hi, 1.0, 1e-12);
}

TEST(OpNorm, FiberBlocks) {
  const auto sp = build_path_space(2);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
  m.block(0, 2, 2, 2) << 1, 1, 1, 1;
  const auto b = op_norm(LpOperator(sp, 2.0, 2, m));
  EXPECT_NEAR(b.hi, 2.0, 1e-10);
}

TEST(OpNorm, SpectralOnSparseFiberIdentityBlocks) {
  // Cut-down exp-decay kernels tensored with Id_2: repeated singular values and many zero rows.
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const int n = 8 + t % 13;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    std::vector<int> rows(n), cols(n);
    for (int x = 0; x < n; ++x) {
      rows[x] = static_cast<int>(rng.index(4));
      cols[x] = static_cast<int>(rng.index(4));
    }
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        if (rows[x] < 3 && rows[x] == cols[y]) {
          const std::complex<double> v = std::pow(0.5, std::abs(x - y)) * rng.unit_phase() * rng.uniform(0.05, 1.0);
          m(2 * x, 2 * y) = v;
          m(2 * x + 1, 2 * y + 1) = v;
        }
    const auto b = op_norm(LpOperator(build_path_space(n), 2.0, 2, m));
    const double s = oracle::spectral(m);
    EXPECT_LE(b.lo, s * (1 + 1e-10)) << t;
    EXPECT_GE(b.hi, s * (1 - 1e-10)) << t;
    EXPECT_NEAR(b.hi, s, 1e-10 * std::max(1.0, s)) << t;
  }
}

TEST(Truncation, PropagationAndTruncate) {
  const auto sp = build_path_space(6);
  const LpOperator a(sp, 2.0, 1, random_matrix(6, 3));
  EXPECT_EQ(propagation(a), 5.0);
  const auto t = truncate(a, 2.0);
  EXPECT_EQ(propagation(t), 2.0);
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y) {
      const auto want = std::abs(x - y) <= 2 ? a.matrix()(x, y) : std::complex<double>(0);
      EXPECT_EQ(t.matrix()(x, y), want);
    }
  EXPECT_EQ(propagation(LpOperator::zero(sp, 2.0)), 0.0);
}

TEST(Multiplication, CommutatorAndRestriction) {
  const auto sp = build_path_space(4);
  const LpOperator a(sp, 2.0, 1, random_matrix(4, 9));
  const ScalarFunction f = ScalarFunction::from_real(sp, Eigen::Vector4d(0.1, -0.5, 1.0, 0.0));
  const Eigen::MatrixXcd F = f.values().asDiagonal();
  EXPECT_LE((commutator(a, f).matrix() - (a.matrix() * F - F * a.matrix())).norm(), 1e-14);
  EXPECT_LE((sandwich(f, a, f).matrix() - F * a.matrix() * F).norm(), 1e-14);
  const auto r = restrict_to(a, Subset{0, 1}, Subset{3});
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      EXPECT_EQ(r.matrix()(x, y), (x <= 1 && y == 3) ? a.matrix()(x, y) : std::complex<double>(0));
}
