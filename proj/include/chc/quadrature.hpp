// ============================================================================
// chc/quadrature.hpp - Gauss rules on the reference segment and triangle
// ============================================================================
#pragma once

#include <array>
#include <vector>

namespace chc {

using Point = std::array<double, 2>;

/// Rule on the reference segment [0,1]. Weights sum to 1.
struct SegmentRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Rule on the reference triangle (0,0),(1,0),(0,1), points given in (xi, eta).
/// Weights sum to 1, i.e. they are fractions of the cell area.
struct TriangleRule {
  std::vector<Point> points;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre on [0,1], exact for polynomials of degree 2n-1.
SegmentRule gauss_legendre(int n);

/// Smallest Gauss-Legendre rule exact to the given polynomial degree.
SegmentRule segment_rule_for_degree(int degree);

/// Degree <= 4 uses the symmetric 6-point rule; higher degrees fall back to
/// a collapsed (Duffy) tensor Gauss rule.
TriangleRule triangle_rule_for_degree(int degree);

/// Collapsed tensor rule with n x n points, exact to degree 2n-2.
TriangleRule collapsed_triangle_rule(int n);

}  // namespace chc
