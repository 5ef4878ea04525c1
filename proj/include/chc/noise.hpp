// ============================================================================
// chc/noise.hpp - Q-Wiener increments in the Neumann eigenbasis
//
// Q is diagonal in the eigenbasis with q_0 = 0 and q_j = lambda_j^{-r}, so
// every sampled increment has zero spatial average. Increments are drawn per
// (seed, sample, mode) stream and coarse time levels are formed by summing
// fine increments, which couples all levels of one sample.
// ============================================================================
#pragma once

#include "chc/fem.hpp"
#include "chc/spectral_domain.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace chc {

struct NoiseSpec {
  double r = 2.0;            // decay exponent of q_j
  double sigma = 1.0;        // amplitude
  std::size_t modes = 256;   // truncation J (including the constant mode)
  std::uint64_t seed = 42;

  double q(const EigenBasis& basis, std::size_t j) const;
  /// sigma sqrt(q_j), the factor mapping Brownian increments to field coefficients.
  Eigen::VectorXd scales(const EigenBasis& basis) const;
};

struct AdmissibilityReport {
  double value = 0.0;    // sigma^2 (partial + tail)
  double partial = 0.0;  // sigma^2 sum_{1<=j<J} lambda_j^{2e} q_j
  double tail = 0.0;     // Weyl-law estimate of the omitted terms
  double growth = 0.0;   // fitted p in lambda_j ~ c j^p
  bool admissible = false;
};

/// ||A^e Q^{1/2}||_HS^2 with e = (beta - 2)/2 + gamma.
AdmissibilityReport admissibility(const NoiseSpec& spec, const EigenBasis& basis, double gamma,
                                  double beta = 2.0);

/// Smallest J for which the Weyl tail of sum lambda_j q_j is below
/// tol times the retained sum. Returns 0 when the series diverges.
std::size_t truncation_for_tail(const NoiseSpec& spec, const DomainSpec& domain, double tol,
                                std::size_t max_modes = std::size_t{1} << 24);

/// Mersenne twister keyed on (seed, sample, mode, purpose).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t sample, std::uint64_t mode,
                            std::uint64_t purpose = 0);

/// Brownian increments of one sample on a hierarchy of time grids.
class WienerIncrements {
public:
  WienerIncrements() = default;
  WienerIncrements(double fine_step, Eigen::MatrixXd fine, std::vector<int> factors);

  std::size_t modes() const { return static_cast<std::size_t>(fine_.rows()); }
  std::size_t fine_steps() const { return static_cast<std::size_t>(fine_.cols()); }
  double fine_step() const { return fine_step_; }
  const std::vector<int>& factors() const { return factors_; }

  /// modes x steps matrix of increments for the given coarsening factor
  /// (1 = finest); factor must be one of factors().
  const Eigen::MatrixXd& level(int factor) const;
  double step(int factor) const { return fine_step_ * factor; }

  /// FNV-1a over the raw bytes of the finest increments.
  std::uint64_t checksum() const;

  /// Binary replay format: magic, dims, step, factors, then fine increments.
  void write(std::ostream& os) const;
  static WienerIncrements read(std::istream& is);

private:
  double fine_step_ = 0.0;
  Eigen::MatrixXd fine_;
  std::vector<int> factors_;
  std::vector<Eigen::MatrixXd> levels_;
};

/// Draws N_fine fine increments Delta beta_j ~ N(0, T / N_fine) for every mode
/// and builds the coarse levels. factors must start at 1, each dividing the
/// next, and the last must divide N_fine.
WienerIncrements sample_increments(const NoiseSpec& spec, double horizon, std::size_t fine_steps,
                                   std::vector<int> factors, std::uint64_t sample);

/// Field increment coefficients sigma sqrt(q_j) Delta beta_j.
SpectralField field_increment(const NoiseSpec& spec, std::shared_ptr<const EigenBasis> basis,
                              const Eigen::VectorXd& dbeta);

/// P_h Delta W.
FemFunction project_increment(const SpectralField& dw, const OperatorSet& ops);

/// Precomputed map Delta beta -> P_h Delta W for one mesh.
class NoiseProjector {
public:
  NoiseProjector(const NoiseSpec& spec, const EigenBasis& basis, const OperatorSet& ops);
  FemFunction apply(const Eigen::VectorXd& dbeta) const { return matrix_ * dbeta; }
  /// Projects every column of a modes x steps block at once.
  Eigen::MatrixXd apply_all(const Eigen::MatrixXd& dbeta) const { return matrix_ * dbeta; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

private:
  Eigen::MatrixXd matrix_;
};

/// Second moments of (Delta beta, I) with I = int_0^k exp(-lambda^2 (k - s)) d beta(s).
struct ConvolutionCovariance {
  double var_dbeta = 0.0;
  double var_integral = 0.0;
  double cov = 0.0;
  double conditional_var = 0.0;  // Var(I | Delta beta)
};

ConvolutionCovariance convolution_covariance(double lambda, double k);

struct ConvolutionPair {
  double dbeta = 0.0;
  double integral = 0.0;
};

/// Exact joint sample of (Delta beta, I).
ConvolutionPair sample_convolution_pair(double lambda, double k, std::mt19937_64& rng);

/// I given Delta beta and an independent standard normal z.
double conditional_integral(const ConvolutionCovariance& cov, double dbeta, double z);

}  // namespace chc
