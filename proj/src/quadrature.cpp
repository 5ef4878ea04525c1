// ============================================================================
// quadrature.cpp - Golub-Welsch Gauss-Legendre and triangle rules
// ============================================================================
#include "chc/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace chc {

SegmentRule gauss_legendre(int n)
{
  if (n < 1)
    throw std::invalid_argument("gauss_legendre: need at least one point");

  // Jacobi matrix of the Legendre recurrence on [-1,1]
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);

  SegmentRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    rule.points[i] = 0.5 * (eig.eigenvalues()(i) + 1.0);
    // weight on [-1,1] is 2 v0^2; rescaled to [0,1] with unit total
    rule.weights[i] = v0 * v0;
  }
  return rule;
}

SegmentRule segment_rule_for_degree(int degree)
{
  const int n = std::max(1, (degree + 2) / 2);
  return gauss_legendre(n);
}

TriangleRule collapsed_triangle_rule(int n)
{
  const SegmentRule g = gauss_legendre(n);
  TriangleRule rule;
  for (int a = 0; a < n; ++a) {
    const double u = g.points[a];
    for (int b = 0; b < n; ++b) {
      const double v = g.points[b];
      rule.points.push_back({u, v * (1.0 - u)});
      // Jacobian (1-u); the reference area 1/2 is divided out
      rule.weights.push_back(2.0 * g.weights[a] * g.weights[b] * (1.0 - u));
    }
  }
  return rule;
}

TriangleRule triangle_rule_for_degree(int degree)
{
  if (degree <= 4) {
    // Symmetric 6-point rule (Dunavant degree 4)
    constexpr double a1 = 0.445948490915965;
    constexpr double w1 = 0.223381589678011;
    constexpr double a2 = 0.091576213509771;
    constexpr double w2 = 0.109951743655322;
    TriangleRule rule;
    for (const auto& [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double b = 1.0 - 2.0 * a;
      rule.points.push_back({a, a});
      rule.points.push_back({b, a});
      rule.points.push_back({a, b});
      rule.weights.insert(rule.weights.end(), 3, w);
    }
    return rule;
  }
  return collapsed_triangle_rule((degree + 3) / 2);
}

}  // namespace chc
