#include "chc/fem.hpp"
#include "chc/mesh.hpp"
#include "chc/potential.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace chc;

TEST(Potential, DoubleWellValues)
{
  const Potential p = Potential::double_well();
  EXPECT_DOUBLE_EQ(p.f(1.0), 0.0);
  EXPECT_DOUBLE_EQ(p.f(0.0), 0.0);
  EXPECT_DOUBLE_EQ(p.f(2.0), 6.0);
  EXPECT_DOUBLE_EQ(p.F(1.0), 0.0);
  EXPECT_DOUBLE_EQ(p.F(0.0), 0.25);
  EXPECT_DOUBLE_EQ(p.f_prime(0.0), -1.0);
  EXPECT_NEAR(p.c1_squared(), 1.0, 1e-12);
  EXPECT_NEAR(p.pointwise_dissipativity(), 0.25, 1e-12);
}

TEST(Potential, RejectsNonQuartic)
{
  EXPECT_THROW(Potential({0, 0, 1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(Potential({0, 0, 1, 0, -1}), std::invalid_argument);
}

TEST(Potential, ConvexQuarticHasNoC1)
{
  const Potential p({0, 0, 1, 0, 1});
  EXPECT_EQ(p.c1_squared(), 0.0);
  EXPECT_EQ(p.pointwise_dissipativity(), 0.0);
}

class PotentialGrid : public ::testing::TestWithParam<std::array<double, 5>> {};

TEST_P(PotentialGrid, DerivativeLipschitzTaylorDissipativity)
{
  const Potential p(GetParam());
  const double c = p.local_lipschitz(), c1 = p.c1_squared(), d = p.pointwise_dissipativity();
  double min_fs = 1e300;
  for (int i = -300; i <= 300; ++i) {
    const double x = i / 100.0;
    for (double eps : {1e-3, 5e-4}) {
      const double fd = (p.F(x + eps) - p.F(x - eps)) / (2 * eps);
      EXPECT_LE(std::abs(fd - p.f(x)), 10.0 * p.leading() * eps * eps * (1 + x * x) + 1e-9);
    }
    min_fs = std::min(min_fs, p.f(x) * x);
    EXPECT_GE(p.f(x) * x + d, -1e-12);
    for (int l = -300; l <= 300; l += 7) {
      const double y = l / 100.0;
      EXPECT_LE(std::abs(p.f(x) - p.f(y)), c * (1 + x * x + y * y) * std::abs(x - y) + 1e-12);
      EXPECT_LE(p.F(x) - p.F(y), p.f(x) * (x - y) + 0.5 * c1 * (x - y) * (x - y) + 1e-12);
    }
  }
  // the dissipativity constant is attained, not just an upper bound
  EXPECT_NEAR(min_fs, -d, 1e-3 * (1 + d));
}

INSTANTIATE_TEST_SUITE_P(Quartics, PotentialGrid,
                         ::testing::Values(std::array<double, 5>{0.25, 0, -0.5, 0, 0.25},
                                           std::array<double, 5>{0, 0.3, -1.0, 0.2, 0.5},
                                           std::array<double, 5>{1, -0.5, 0.5, -0.4, 2.0},
                                           std::array<double, 5>{0, 0, 1, 0, 1}));

TEST(FunctionalF, Examples)
{
  const Potential p = Potential::double_well();
  const auto ops = assemble(build_interval_mesh(1.0, 8));
  EXPECT_NEAR(functional_F(FemFunction::Ones(9), *ops, p), 0.0, 1e-15);
  EXPECT_NEAR(functional_F(FemFunction::Zero(9), *ops, p), 0.25, 1e-14);
  FemFunction lin(9);
  for (int i = 0; i <= 8; ++i)
    lin[i] = -1.0 + 2.0 * i / 8.0;
  EXPECT_NEAR(functional_F(lin, *ops, p), 2.0 / 15.0, 1e-13);
}

TEST(FunctionalF, RectangleMatchesFineQuadrature)
{
  const Potential p({0.1, 0.2, -0.5, 0.3, 0.25});
  const auto ops = assemble(build_rectangle_mesh(1.0, 1.0, 3, 3));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  FemFunction v(ops->size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = n(rng);
  const auto fine = assemble(build_rectangle_mesh(1.0, 1.0, 3, 3), 10);
  EXPECT_NEAR(functional_F(v, *ops, p), functional_F(v, *fine, p), 1e-12);
}

TEST(Dissipativity, RandomFields)
{
  const Potential p = Potential::double_well();
  const auto ops = assemble(build_interval_mesh(1.0, 16));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<FemFunction> samples;
  for (int d = 0; d < 1000; ++d) {
    FemFunction v(ops->size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v[i] = 1.5 * n(rng);
    samples.push_back(v);
  }
  samples.push_back(FemFunction::Zero(ops->size()));
  EXPECT_GE(dissipativity_check(p, samples, *ops), 0.0);
  const std::vector<FemFunction> zero{FemFunction::Zero(ops->size())};
  EXPECT_NEAR(dissipativity_check(p, zero, *ops), 0.25, 1e-14);
}
