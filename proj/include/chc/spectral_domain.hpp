// ============================================================================
// chc/spectral_domain.hpp - Neumann Laplacian eigenbasis on intervals and
// rectangles, fractional norms and the semigroup exp(-t A^2)
// ============================================================================
#pragma once

#include "chc/quadrature.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace chc {

enum class DomainKind { interval, rectangle };

struct DomainSpec {
  DomainKind kind = DomainKind::interval;
  double lx = 1.0;
  double ly = 0.0;  // rectangle only

  static DomainSpec interval(double length);
  static DomainSpec rectangle(double lx, double ly);

  int dim() const { return kind == DomainKind::interval ? 1 : 2; }
  double measure() const { return kind == DomainKind::interval ? lx : lx * ly; }
};

struct Mode {
  std::array<int, 2> index{0, 0};  // (m, n); n = 0 on intervals
  double lambda = 0.0;
  double normalization = 0.0;      // product of 1/sqrt(L) or sqrt(2/L) factors
};

/// First J eigenpairs of the Neumann Laplacian, sorted by eigenvalue.
/// Equal eigenvalues are ordered by decreasing index tuple, so (1,0)
/// precedes (0,1) on the square.
class EigenBasis {
public:
  EigenBasis(const DomainSpec& domain, std::size_t modes);

  const DomainSpec& domain() const { return domain_; }
  std::size_t size() const { return modes_.size(); }
  const Mode& mode(std::size_t j) const { return modes_.at(j); }
  double lambda(std::size_t j) const { return modes_.at(j).lambda; }
  Eigen::VectorXd eigenvalues() const;

  /// Pointwise value phi_j(x); throws std::out_of_range for j >= size().
  double phi(std::size_t j, const Point& x) const;

  /// Angular frequencies (m pi / Lx, n pi / Ly) of mode j.
  std::array<double, 2> frequencies(std::size_t j) const;

private:
  DomainSpec domain_;
  std::vector<Mode> modes_;
};

std::shared_ptr<const EigenBasis> build_basis(const DomainSpec& domain, std::size_t modes);

/// Field v = sum_j c_j phi_j with c_j = <v, phi_j>.
struct SpectralField {
  std::shared_ptr<const EigenBasis> basis;
  Eigen::VectorXd coeffs;

  static SpectralField zero(std::shared_ptr<const EigenBasis> basis);
  static SpectralField mode(std::shared_ptr<const EigenBasis> basis, std::size_t j, double amplitude = 1.0);
  static SpectralField constant(std::shared_ptr<const EigenBasis> basis, double value);

  double value(const Point& x) const;
  double mean() const;
};

enum class NormKind {
  dotted,  // |v|_alpha, constant mode excluded
  full     // ||v||_alpha = (|v|_alpha^2 + <v,phi_0>^2)^(1/2), alpha >= 0
};

/// Throws std::domain_error for alpha < 0 when the mean coefficient is nonzero
/// (dotted), or for alpha < 0 at all (full).
double norm_alpha(const SpectralField& v, double alpha, NormKind kind = NormKind::dotted);

/// E(t)v: coefficient j scaled by exp(-t lambda_j^2).
SpectralField semigroup_apply(const SpectralField& v, double t);

/// A^p v for integer or fractional p >= 0 (mean removed for p > 0).
SpectralField apply_power(const SpectralField& v, double p);

/// Empirical sup over a time grid and all nonconstant modes of
/// t^(alpha/2) ||A^alpha E(t) phi_j||.
double smoothing_constant_probe(double alpha, const EigenBasis& basis);

/// Closed form of the smoothing constant, sup_s s^(alpha/2) exp(-s).
double smoothing_constant(double alpha);

}  // namespace chc
