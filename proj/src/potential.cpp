// ============================================================================
// potential.cpp
// ============================================================================
#include "chc/potential.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chc {

namespace {

// Real roots of a0 + a1 s + a2 s^2 + a3 s^3 with a3 != 0 via the companion matrix.
std::vector<double> real_cubic_roots(double a0, double a1, double a2, double a3)
{
  Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  companion(0, 2) = -a0 / a3;
  companion(1, 2) = -a1 / a3;
  companion(2, 2) = -a2 / a3;
  Eigen::EigenSolver<Eigen::Matrix3d> es(companion, false);
  std::vector<double> roots;
  for (int i = 0; i < 3; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) <= 1e-9 * std::max(1.0, std::abs(z)))
      roots.push_back(z.real());
  }
  return roots;
}

}  // namespace

Potential::Potential(const std::array<double, 5>& coefficients) : c_(coefficients)
{
  for (double v : c_)
    if (!std::isfinite(v))
      throw std::invalid_argument("potential coefficients must be finite");
  if (!(c_[4] > 0.0))
    throw std::invalid_argument("potential must be quartic with positive leading coefficient");

  // g(s) = f(s) s is quartic with positive leading term; its minimum sits
  // at a real root of g'(s).
  const double g1 = c_[1], g2 = 2.0 * c_[2], g3 = 3.0 * c_[3], g4 = 4.0 * c_[4];
  const auto g = [&](double s) { return (((g4 * s + g3) * s + g2) * s + g1) * s; };
  double gmin = 0.0;  // g(0) = 0
  for (double s : real_cubic_roots(g1, 2.0 * g2, 3.0 * g3, 4.0 * g4)) {
    // one Newton polish on g'
    const double gp = ((4.0 * g4 * s + 3.0 * g3) * s + 2.0 * g2) * s + g1;
    const double gpp = (12.0 * g4 * s + 6.0 * g3) * s + 2.0 * g2;
    if (gpp != 0.0)
      s -= gp / gpp;
    gmin = std::min(gmin, g(s));
  }
  dissipativity_ = std::max(0.0, -gmin);

  // F'' = 12 c4 s^2 + 6 c3 s + 2 c2, minimum at s = -c3 / (4 c4)
  const double fpp_min = 2.0 * c_[2] - 3.0 * c_[3] * c_[3] / (4.0 * c_[4]);
  c1_squared_ = std::max(0.0, -fpp_min);
}

Potential Potential::double_well()
{
  return Potential({0.25, 0.0, -0.5, 0.0, 0.25});
}

double Potential::local_lipschitz() const
{
  // (f(x) - f(y)) / (x - y) = 4 c4 (x^2 + xy + y^2) + 3 c3 (x + y) + 2 c2 with
  // |x^2 + xy + y^2| <= 3/2 (x^2 + y^2) and |x + y| <= 1 + x^2 + y^2.
  return 6.0 * c_[4] + 3.0 * std::abs(c_[3]) + 2.0 * std::abs(c_[2]);
}

double functional_F(const FemFunction& v, const OperatorSet& ops, const Potential& p)
{
  return ops.integrate_composite(v, [&p](double s) { return p.F(s); });
}

double dissipativity_check(const Potential& p, std::span<const FemFunction> samples, const OperatorSet& ops)
{
  const double c0 = ops.measure() * p.pointwise_dissipativity();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& v : samples)
    worst = std::min(worst, ops.integrate_composite(v, [&p](double s) { return p.f(s) * s; }) + c0);
  return worst;
}

}  // namespace chc
