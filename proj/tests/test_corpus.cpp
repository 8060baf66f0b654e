#include <gtest/gtest.h>

#include "qlroe/corpus.hpp"

using namespace qlroe;

namespace {

GenSpec spec(GenKind k, int n, double p = 2.0, std::uint64_t seed = 0) {
  GenSpec g;
  g.kind = k;
  g.space = build_path_space(n);
  g.p = p;
  g.seed = seed;
  return g;
}

}  // namespace

TEST(Gen, Deterministic) {
  for (auto k : {GenKind::finite_prop, GenKind::exp_decay, GenKind::random_dense}) {
    const auto a = gen(spec(k, 9, 2.0, 42)), b = gen(spec(k, 9, 2.0, 42)), c = gen(spec(k, 9, 2.0, 43));
    EXPECT_TRUE(a.matrix() == b.matrix());
    EXPECT_FALSE(a.matrix() == c.matrix());
  }
}

TEST(Gen, FinitePropagation) {
  auto g = spec(GenKind::finite_prop, 10);
  g.radius = 0;
  const auto d = gen(g);
  EXPECT_EQ(propagation(d), 0.0);
  for (double r : {1.0, 3.0}) {
    g.radius = r;
    for (double p : {1.0, 2.0, 3.0}) {
      g.p = p;
      const auto a = gen(g);
      EXPECT_LE(propagation(a), r);
      EXPECT_LE(op_norm_upper(a), 1.0);
    }
  }
}

TEST(Gen, AveragingNorm) {
  const auto t = gen(spec(GenKind::averaging, 5, 1.0));
  const auto b = op_norm(t);
  EXPECT_EQ(b.lo, 1.0);
  EXPECT_EQ(b.hi, 1.0);
  for (int y = 0; y < 5; ++y) EXPECT_EQ(t.matrix()(0, y), 1.0);
  EXPECT_EQ(t.matrix().bottomRows(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gen, ExpDecay) {
  auto g = spec(GenKind::exp_decay, 8);
  const auto a = gen(g);
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) EXPECT_NEAR(std::abs(a.matrix()(x, y)), std::pow(0.5, std::abs(x - y)), 1e-15);
  EXPECT_LE(eps_propagation(a, 3.0).bracket.hi, 0.25);
  // Analytic tail: rows and columns of the remainder beyond R sum to at most 2 lambda^{R+1} / (1 - lambda).
  for (double r = 0; r < 7; ++r)
    EXPECT_LE(eps_propagation(a, r).bracket.hi, 2.0 * std::pow(0.5, r + 1) / 0.5 * (1 + 1e-12));
  g.lambda = 1.0;
  EXPECT_THROW(gen(g), InvalidArgument);
  g.lambda = 0.0;
  EXPECT_THROW(gen(g), InvalidArgument);
}

TEST(Classify, Trichotomy) {
  const auto b = gen(spec(GenKind::random_dense, 12, 2.0, 1));
  const auto c0 = classify(truncate(b, 3.0));
  EXPECT_EQ(c0.kind, LocalityClass::finite_propagation);
  EXPECT_EQ(c0.propagation, 3.0);

  auto g = spec(GenKind::exp_decay, 32);
  EXPECT_EQ(classify(gen(g)).kind, LocalityClass::quasi_local);

  const auto t = classify(gen(spec(GenKind::averaging, 32, 1.0)));
  EXPECT_EQ(t.kind, LocalityClass::not_quasi_local);
  EXPECT_EQ(t.at_radius.witness_rows, Subset{0});
  EXPECT_EQ(t.at_radius.witness_cols, Subset::range(17, 31));
  EXPECT_GE(t.at_radius.bracket.lo, 1.0 - 1e-9);
  EXPECT_EQ(classify(b).kind, LocalityClass::not_quasi_local);
}
