// ============================================================================
// noise.cpp
// ============================================================================
#include "chc/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace chc {

double NoiseSpec::q(const EigenBasis& basis, std::size_t j) const
{
  if (j == 0)
    return 0.0;
  return std::pow(basis.lambda(j), -r);
}

Eigen::VectorXd NoiseSpec::scales(const EigenBasis& basis) const
{
  const std::size_t n = std::min(modes, basis.size());
  Eigen::VectorXd s(n);
  for (std::size_t j = 0; j < n; ++j)
    s[j] = sigma * std::sqrt(q(basis, j));
  return s;
}

AdmissibilityReport admissibility(const NoiseSpec& spec, const EigenBasis& basis, double gamma, double beta)
{
  AdmissibilityReport rep;
  if (spec.sigma == 0.0) {
    rep.admissible = true;
    return rep;
  }
  const std::size_t n = std::min(spec.modes, basis.size());
  const double e = (beta - 2.0) / 2.0 + gamma;
  const double power = 2.0 * e - spec.r;  // term_j = lambda_j^power

  for (std::size_t j = 1; j < n; ++j)
    rep.partial += std::pow(basis.lambda(j), power);

  // Weyl growth lambda_j ~ c j^p, fitted on the upper half of the modes
  double p = 2.0 / basis.domain().dim();
  if (n >= 8) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t j = n / 2; j < n; ++j) {
      const double x = std::log(static_cast<double>(j));
      const double y = std::log(basis.lambda(j));
      sx += x; sy += y; sxx += x * x; sxy += x * y;
      ++cnt;
    }
    p = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  }
  rep.growth = p;
  const double decay = -p * power;  // term_j ~ j^{-decay}
  if (n < 2 || decay <= 1.0) {
    rep.admissible = false;
    rep.tail = std::numeric_limits<double>::infinity();
    rep.partial *= spec.sigma * spec.sigma;
    rep.value = rep.tail;
    return rep;
  }
  const double jl = static_cast<double>(n - 1);
  const double last = std::pow(basis.lambda(n - 1), power);
  // sum_{j >= n} last (j / jl)^{-decay}, Euler-Maclaurin on the integral
  const double t_n = last * std::pow(jl / (jl + 1.0), decay);
  rep.tail = t_n * ((jl + 1.0) / (decay - 1.0) + 0.5);
  rep.admissible = true;
  const double s2 = spec.sigma * spec.sigma;
  rep.partial *= s2;
  rep.tail *= s2;
  rep.value = rep.partial + rep.tail;
  return rep;
}

std::size_t truncation_for_tail(const NoiseSpec& spec, const DomainSpec& domain, double tol, std::size_t max_modes)
{
  NoiseSpec probe = spec;
  probe.sigma = 1.0;
  std::size_t lo = 2, hi = 16;
  const auto ok = [&](std::size_t j) {
    probe.modes = j;
    const EigenBasis basis(domain, j);
    const auto rep = admissibility(probe, basis, 0.5, 2.0);
    if (!rep.admissible)
      throw std::domain_error("noise is not admissible; no finite truncation exists");
    return rep.tail <= tol * rep.partial;
  };
  try {
    while (!ok(hi)) {
      lo = hi;
      if (hi >= max_modes)
        return 0;
      hi = std::min(2 * hi, max_modes);
    }
  } catch (const std::domain_error&) {
    return 0;
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t sample, std::uint64_t mode, std::uint64_t purpose)
{
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(sample), hi(sample), lo(mode), hi(mode), lo(purpose), hi(purpose)};
  return std::mt19937_64(seq);
}

WienerIncrements::WienerIncrements(double fine_step, Eigen::MatrixXd fine, std::vector<int> factors)
    : fine_step_(fine_step), fine_(std::move(fine)), factors_(std::move(factors))
{
  if (factors_.empty() || factors_.front() != 1)
    throw std::invalid_argument("level factors must start with 1");
  levels_.push_back(fine_);
  for (std::size_t l = 1; l < factors_.size(); ++l) {
    const int prev = factors_[l - 1];
    if (factors_[l] <= prev || factors_[l] % prev != 0)
      throw std::invalid_argument("level factors must increase, each dividing the next");
    const int ratio = factors_[l];
    if (fine_.cols() % ratio != 0)
      throw std::invalid_argument("level factor " + std::to_string(factors_[l]) +
                                  " does not divide the fine step count " + std::to_string(fine_.cols()));
    // summed left to right from the finest level, so every level equals the
    // plain sum of its fine increments bit for bit
    Eigen::MatrixXd dst(fine_.rows(), fine_.cols() / ratio);
    for (Eigen::Index i = 0; i < dst.cols(); ++i) {
      dst.col(i) = fine_.col(i * ratio);
      for (int s = 1; s < ratio; ++s)
        dst.col(i) += fine_.col(i * ratio + s);
    }
    levels_.push_back(std::move(dst));
  }
}

const Eigen::MatrixXd& WienerIncrements::level(int factor) const
{
  const auto it = std::find(factors_.begin(), factors_.end(), factor);
  if (it == factors_.end())
    throw std::out_of_range("no increment level with factor " + std::to_string(factor));
  return levels_[it - factors_.begin()];
}

std::uint64_t WienerIncrements::checksum() const
{
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(fine_.data());
  const std::size_t len = static_cast<std::size_t>(fine_.size()) * sizeof(double);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr char increments_magic[8] = {'C', 'H', 'C', 'W', 'I', 'N', 'C', '1'};

template <class T>
void put(std::ostream& os, const T& v)
{
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error("WienerIncrements::read: truncated stream");
  return v;
}

}  // namespace

void WienerIncrements::write(std::ostream& os) const
{
  os.write(increments_magic, sizeof(increments_magic));
  put<std::uint64_t>(os, modes());
  put<std::uint64_t>(os, fine_steps());
  put<double>(os, fine_step_);
  put<std::uint64_t>(os, factors_.size());
  for (int f : factors_)
    put<std::int64_t>(os, f);
  for (std::size_t j = 0; j < modes(); ++j)
    for (std::size_t i = 0; i < fine_steps(); ++i)
      put<double>(os, fine_(j, i));
}

WienerIncrements WienerIncrements::read(std::istream& is)
{
  char magic[sizeof(increments_magic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, increments_magic, sizeof(magic)) != 0)
    throw std::runtime_error("WienerIncrements::read: bad magic");
  const auto modes = get<std::uint64_t>(is);
  const auto steps = get<std::uint64_t>(is);
  const double dt = get<double>(is);
  std::vector<int> factors(get<std::uint64_t>(is));
  for (auto& f : factors)
    f = static_cast<int>(get<std::int64_t>(is));
  Eigen::MatrixXd fine(modes, steps);
  for (std::size_t j = 0; j < modes; ++j)
    for (std::size_t i = 0; i < steps; ++i)
      fine(j, i) = get<double>(is);
  return WienerIncrements(dt, std::move(fine), std::move(factors));
}

WienerIncrements sample_increments(const NoiseSpec& spec, double horizon, std::size_t fine_steps,
                                   std::vector<int> factors, std::uint64_t sample)
{
  if (fine_steps < 1)
    throw std::invalid_argument("sample_increments: need at least one step");
  if (!(horizon > 0.0))
    throw std::invalid_argument("sample_increments: horizon must be positive");
  if (!factors.empty() && fine_steps % static_cast<std::size_t>(factors.back()) != 0)
    throw std::invalid_argument("level factor " + std::to_string(factors.back()) +
                                " does not divide " + std::to_string(fine_steps));
  const double k = horizon / static_cast<double>(fine_steps);
  const double sd = std::sqrt(k);
  Eigen::MatrixXd fine(spec.modes, fine_steps);
  if (spec.sigma == 0.0) {
    fine.setZero();
  } else {
    for (std::size_t j = 0; j < spec.modes; ++j) {
      auto rng = make_stream(spec.seed, sample, j);
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < fine_steps; ++i)
        fine(j, i) = sd * normal(rng);
    }
  }
  if (factors.empty())
    factors = {1};
  return WienerIncrements(k, std::move(fine), std::move(factors));
}

SpectralField field_increment(const NoiseSpec& spec, std::shared_ptr<const EigenBasis> basis,
                              const Eigen::VectorXd& dbeta)
{
  SpectralField dw = SpectralField::zero(basis);
  const Eigen::VectorXd s = spec.scales(*basis);
  const Eigen::Index n = std::min<Eigen::Index>(s.size(), dbeta.size());
  dw.coeffs.head(n) = s.head(n).cwiseProduct(dbeta.head(n));
  dw.coeffs[0] = 0.0;
  return dw;
}

FemFunction project_increment(const SpectralField& dw, const OperatorSet& ops)
{
  return project_l2(dw, ops);
}

NoiseProjector::NoiseProjector(const NoiseSpec& spec, const EigenBasis& basis, const OperatorSet& ops)
{
  const std::size_t n = std::min(spec.modes, basis.size());
  const Eigen::MatrixXd loads = spectral_load_matrix(basis, ops, n);
  const Eigen::VectorXd s = spec.scales(basis);
  matrix_.resize(ops.size(), n);
  for (std::size_t j = 0; j < n; ++j)
    matrix_.col(j) = ops.solve_mass(loads.col(j)) * s[j];
}

ConvolutionCovariance convolution_covariance(double lambda, double k)
{
  if (lambda < 0.0 || !(k > 0.0))
    throw std::invalid_argument("convolution_covariance: need lambda >= 0 and k > 0");
  const double mu = lambda * lambda;
  const double x = mu * k;
  ConvolutionCovariance c;
  c.var_dbeta = k;
  double a = 0.0, b = 0.0;  // Var(I)/k and Cov/k
  if (x < 1e-6) {
    a = 1.0 - x + 2.0 * x * x / 3.0 - x * x * x / 3.0 + 2.0 * x * x * x * x / 15.0;
    b = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0;
  } else {
    a = -std::expm1(-2.0 * x) / (2.0 * x);
    b = -std::expm1(-x) / x;
  }
  c.var_integral = k * a;
  c.cov = k * b;
  if (x < 1e-2) {
    const double x2 = x * x;
    c.conditional_var = k * x2 * (1.0 / 12.0 - x / 12.0 + 17.0 * x2 / 360.0 - 7.0 * x2 * x / 360.0 +
                                  43.0 * x2 * x2 / 6720.0);
  } else {
    c.conditional_var = std::max(0.0, k * (a - b * b));
  }
  return c;
}

double conditional_integral(const ConvolutionCovariance& cov, double dbeta, double z)
{
  return cov.cov / cov.var_dbeta * dbeta + std::sqrt(cov.conditional_var) * z;
}

ConvolutionPair sample_convolution_pair(double lambda, double k, std::mt19937_64& rng)
{
  const ConvolutionCovariance cov = convolution_covariance(lambda, k);
  std::normal_distribution<double> normal;
  const double z1 = normal(rng);
  const double z2 = normal(rng);
  ConvolutionPair out;
  out.dbeta = std::sqrt(k) * z1;
  out.integral = lambda == 0.0 ? out.dbeta : conditional_integral(cov, out.dbeta, z2);
  return out;
}

}  // namespace chc
