// ============================================================================
// spectral_domain.cpp
// ============================================================================
#include "chc/spectral_domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chc {

namespace {

constexpr double pi = std::numbers::pi;

double factor_normalization(int m, double length)
{
  return m == 0 ? 1.0 / std::sqrt(length) : std::sqrt(2.0 / length);
}

}  // namespace

DomainSpec DomainSpec::interval(double length)
{
  if (!(length > 0.0))
    throw std::invalid_argument("interval length must be positive");
  return DomainSpec{DomainKind::interval, length, 0.0};
}

DomainSpec DomainSpec::rectangle(double lx, double ly)
{
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("rectangle side lengths must be positive");
  return DomainSpec{DomainKind::rectangle, lx, ly};
}

EigenBasis::EigenBasis(const DomainSpec& domain, std::size_t modes) : domain_(domain)
{
  if (modes < 1)
    throw std::invalid_argument("EigenBasis: need at least one mode");

  if (domain.kind == DomainKind::interval) {
    modes_.reserve(modes);
    for (std::size_t m = 0; m < modes; ++m) {
      const double w = m * pi / domain.lx;
      modes_.push_back({{static_cast<int>(m), 0}, w * w, factor_normalization(m, domain.lx)});
    }
    return;
  }

  // Every mode inside the s x s index square has lambda <= bound, so the
  // J smallest eigenvalues are all found among modes with lambda <= bound.
  const int s = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(modes))));
  const double wx = pi / domain.lx;
  const double wy = pi / domain.ly;
  const double bound = (s * wx) * (s * wx) + (s * wy) * (s * wy);
  const int mmax = static_cast<int>(std::sqrt(bound) / wx) + 1;
  const int nmax = static_cast<int>(std::sqrt(bound) / wy) + 1;

  std::vector<Mode> all;
  for (int m = 0; m <= mmax; ++m)
    for (int n = 0; n <= nmax; ++n) {
      const double lam = (m * wx) * (m * wx) + (n * wy) * (n * wy);
      if (lam <= bound * (1.0 + 1e-12))
        all.push_back({{m, n}, lam,
                       factor_normalization(m, domain.lx) * factor_normalization(n, domain.ly)});
    }

  // eigenvalues within 1e-12 relative count as ties
  std::sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
    const double tol = 1e-12 * std::max({1.0, a.lambda, b.lambda});
    if (std::abs(a.lambda - b.lambda) > tol)
      return a.lambda < b.lambda;
    return a.index > b.index;
  });
  all.resize(std::min(all.size(), modes));
  modes_ = std::move(all);
}

Eigen::VectorXd EigenBasis::eigenvalues() const
{
  Eigen::VectorXd lam(modes_.size());
  for (std::size_t j = 0; j < modes_.size(); ++j)
    lam[j] = modes_[j].lambda;
  return lam;
}

std::array<double, 2> EigenBasis::frequencies(std::size_t j) const
{
  const Mode& md = mode(j);
  const double wy = domain_.kind == DomainKind::rectangle ? pi / domain_.ly : 0.0;
  return {md.index[0] * pi / domain_.lx, md.index[1] * wy};
}

double EigenBasis::phi(std::size_t j, const Point& x) const
{
  if (j >= modes_.size())
    throw std::out_of_range("eigenfunction index " + std::to_string(j) + " >= " +
                            std::to_string(modes_.size()));
  const auto w = frequencies(j);
  double value = modes_[j].normalization * std::cos(w[0] * x[0]);
  if (domain_.kind == DomainKind::rectangle)
    value *= std::cos(w[1] * x[1]);
  return value;
}

std::shared_ptr<const EigenBasis> build_basis(const DomainSpec& domain, std::size_t modes)
{
  return std::make_shared<const EigenBasis>(domain, modes);
}

SpectralField SpectralField::zero(std::shared_ptr<const EigenBasis> basis)
{
  const auto n = basis->size();
  return {std::move(basis), Eigen::VectorXd::Zero(n)};
}

SpectralField SpectralField::mode(std::shared_ptr<const EigenBasis> basis, std::size_t j,
                                  double amplitude)
{
  if (j >= basis->size())
    throw std::out_of_range("SpectralField::mode: index out of range");
  SpectralField v = zero(std::move(basis));
  v.coeffs[j] = amplitude;
  return v;
}

SpectralField SpectralField::constant(std::shared_ptr<const EigenBasis> basis, double value)
{
  SpectralField v = zero(std::move(basis));
  v.coeffs[0] = value * std::sqrt(v.basis->domain().measure());
  return v;
}

double SpectralField::value(const Point& x) const
{
  double s = 0.0;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j)
    if (coeffs[j] != 0.0)
      s += coeffs[j] * basis->phi(j, x);
  return s;
}

double SpectralField::mean() const
{
  return coeffs[0] / std::sqrt(basis->domain().measure());
}

double norm_alpha(const SpectralField& v, double alpha, NormKind kind)
{
  if (alpha < 0.0) {
    if (kind == NormKind::full)
      throw std::domain_error("full norm is defined for alpha >= 0 only");
    if (v.coeffs[0] != 0.0)
      throw std::domain_error("negative-order seminorm requires a zero-mean field");
  }
  double s = 0.0;
  for (Eigen::Index j = 1; j < v.coeffs.size(); ++j)
    s += std::pow(v.basis->lambda(j), alpha) * v.coeffs[j] * v.coeffs[j];
  if (kind == NormKind::full)
    s += v.coeffs[0] * v.coeffs[0];
  return std::sqrt(s);
}

SpectralField semigroup_apply(const SpectralField& v, double t)
{
  if (t < 0.0)
    throw std::domain_error("semigroup_apply: negative time");
  SpectralField out = v;
  for (Eigen::Index j = 1; j < out.coeffs.size(); ++j) {
    const double lam = v.basis->lambda(j);
    out.coeffs[j] *= std::exp(-t * lam * lam);
  }
  return out;
}

SpectralField apply_power(const SpectralField& v, double p)
{
  if (p < 0.0)
    throw std::domain_error("apply_power: negative exponent");
  if (p == 0.0)
    return v;
  SpectralField out = v;
  out.coeffs[0] = 0.0;
  for (Eigen::Index j = 1; j < out.coeffs.size(); ++j)
    out.coeffs[j] *= std::pow(v.basis->lambda(j), p);
  return out;
}

double smoothing_constant(double alpha)
{
  if (alpha < 0.0)
    throw std::domain_error("smoothing_constant: alpha must be nonnegative");
  if (alpha == 0.0)
    return 1.0;
  return std::pow(alpha / 2.0, alpha / 2.0) * std::exp(-alpha / 2.0);
}

double smoothing_constant_probe(double alpha, const EigenBasis& basis)
{
  if (alpha < 0.0)
    throw std::domain_error("smoothing_constant_probe: alpha must be nonnegative");
  if (basis.size() < 2)
    return 0.0;

  const double lam_min = basis.lambda(1);
  const double lam_max = basis.lambda(basis.size() - 1);
  const double t_lo = 1e-3 / (lam_max * lam_max);
  const double t_hi = 1e2 / (lam_min * lam_min);
  constexpr int per_decade = 400;
  const int count = static_cast<int>(std::ceil(std::log10(t_hi / t_lo) * per_decade)) + 1;

  double best = 0.0;
  for (std::size_t j = 1; j < basis.size(); ++j) {
    const double lam = basis.lambda(j);
    // t = 0: only alpha = 0 gives a nonzero value
    if (alpha == 0.0)
      best = std::max(best, 1.0);
    for (int i = 0; i < count; ++i) {
      const double t = t_lo * std::pow(10.0, static_cast<double>(i) / per_decade);
      const double val = std::pow(t, alpha / 2.0) * std::pow(lam, alpha) * std::exp(-t * lam * lam);
      best = std::max(best, val);
    }
  }
  return best;
}

}  // namespace chc
