// ============================================================================
// chc/potential.hpp - Quartic potential F, f = F', and its structural constants
// ============================================================================
#pragma once

#include "chc/fem.hpp"

#include <array>
#include <span>

namespace chc {

/// F(s) = c[0] + c[1] s + c[2] s^2 + c[3] s^3 + c[4] s^4 with c[4] > 0.
class Potential {
public:
  explicit Potential(const std::array<double, 5>& coefficients);

  /// (s^2 - 1)^2 / 4
  static Potential double_well();

  const std::array<double, 5>& coefficients() const { return c_; }
  double leading() const { return c_[4]; }

  double F(double s) const { return (((c_[4] * s + c_[3]) * s + c_[2]) * s + c_[1]) * s + c_[0]; }
  double f(double s) const { return ((4.0 * c_[4] * s + 3.0 * c_[3]) * s + 2.0 * c_[2]) * s + c_[1]; }
  double f_prime(double s) const { return (12.0 * c_[4] * s + 6.0 * c_[3]) * s + 2.0 * c_[2]; }

  /// max(0, -min_s f(s) s); multiply by |D| for the dissipativity constant.
  double pointwise_dissipativity() const { return dissipativity_; }

  /// c_1^2 = max(0, -min F'').
  double c1_squared() const { return c1_squared_; }

  /// C with |f(x) - f(y)| <= C (1 + x^2 + y^2) |x - y|.
  double local_lipschitz() const;

private:
  std::array<double, 5> c_;
  double dissipativity_ = 0.0;
  double c1_squared_ = 0.0;
};

/// integral F(v) over the mesh, exact for P1 v with degree-4 quadrature.
double functional_F(const FemFunction& v, const OperatorSet& ops, const Potential& p);

/// min over samples of <f(v), v> + C_0 with C_0 = |D| * pointwise_dissipativity().
double dissipativity_check(const Potential& p, std::span<const FemFunction> samples, const OperatorSet& ops);

}  // namespace chc
