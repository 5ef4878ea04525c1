// ============================================================================
// chc/experiments.hpp - convergence-rate studies, coupled strong convergence,
// moment bounds and the Hoelder-path probe
// ============================================================================
#pragma once

#include "chc/noise.hpp"
#include "chc/potential.hpp"
#include "chc/rate_fit.hpp"
#include "chc/spectral_domain.hpp"
#include "chc/stepper.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace chc {

struct StudyConfig {
  std::string study = "run";

  DomainSpec domain = DomainSpec::interval(1.0);
  int n = 64;                // cells per direction (finest level for hierarchies)
  double T = 0.1;
  std::size_t N = 100;       // time steps (finest level for hierarchies)

  std::size_t levels = 4;
  std::size_t samples = 16;  // Monte-Carlo sample count M
  unsigned workers = 1;

  NoiseSpec noise{2.0, 1.0, 0, 42};  // modes == 0 selects 4 n (interval) or 4 n^2 (rectangle)
  bool linear = false;       // f = 0
  std::array<double, 5> potential{0.25, 0.0, -0.5, 0.0, 0.25};
  StepperConfig stepper;
  int quad_degree = 4;

  /// Initial data / test field as (mode index, coefficient) pairs.
  std::vector<std::pair<std::size_t, double>> x0{{1, 0.5}};

  std::vector<int> sweep_n{16, 32, 64, 128};  // spatial sweeps
  std::vector<int> sweep_N{8, 16, 32, 64};    // temporal sweeps
  int fixed_n = 512;                          // mesh of temporal sweeps
  std::size_t fixed_N = 1000000;              // steps of spatial sweeps
  double t_eval = 0.01;                       // evaluation time of the derivative study
  std::vector<double> holder_gammas{0.25, 0.4, 0.45};
  std::size_t holder_refinements = 3;         // k, k/2, k/4

  Nonlinearity nonlinearity() const;
  std::size_t noise_modes(int cells) const;
};

struct LevelResult {
  std::size_t level = 0;
  double h = 0.0;
  double k = 0.0;
  std::size_t samples = 0;
  double error = 0.0;
  double stderr_ = 0.0;
};

struct RateStudyResult {
  std::string name;
  std::string axis;  // "h" or "k"
  std::vector<LevelResult> levels;
  LogLogFit fit;
  std::size_t failed_samples = 0;
  std::vector<std::uint64_t> checksums;  // per sample, when noise is involved
};

/// Header "level,h,k,M,error,stderr,slope,r2", one row per level.
void write_rate_csv(std::ostream& os, const RateStudyResult& result);

/// Spatial and temporal sweeps of ||(E(T) - R_{k,h}^N) P_h v|| for f = 0.
std::pair<RateStudyResult, RateStudyResult> det_linear_rate_study(const StudyConfig& cfg);

/// h-sweep of ||A_h E_h(t) P_h v - A E(t) v|| and k-sweep of
/// ||A_h R_{k,h}^N P_h v - A_h E_h(t_N) P_h v||.
std::pair<RateStudyResult, RateStudyResult> det_derivative_rate_study(const StudyConfig& cfg);

/// RMS over samples of sup_n ||W_A(t_n) - W_{A_h}^n||, with the exact-in-law
/// reference coupled to the scheme's Brownian increments. Spatial sweep first.
std::pair<RateStudyResult, RateStudyResult> stoch_conv_rate_study(const StudyConfig& cfg);

/// E max_n ||X_ref(t_n) - X_l(t_n)||^2 against the finest level of a coupled
/// hierarchy (cells and steps halved per level).
RateStudyResult strong_convergence_study(const StudyConfig& cfg);

struct MomentRow {
  std::size_t level = 0;
  double h = 0.0;
  double k = 0.0;
  std::size_t samples = 0;
  std::string statistic;
  int p = 1;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct MomentStudyResult {
  std::vector<MomentRow> rows;
  std::map<std::string, double> ratio;  // max/min across the ladder, keyed "statistic:p"
  std::vector<double> initial_bound;    // |X^0|_{-1,h} + J(X^0) + |Y^0|_1 per level
  std::size_t newton_failures = 0;
  std::size_t total_steps = 0;
  double max_mass_deviation = 0.0;
};

/// Three-level (h, k) ladder ending at (cfg.n, cfg.N).
MomentStudyResult moment_bound_study(const StudyConfig& cfg);
void write_moment_csv(std::ostream& os, const MomentStudyResult& result);

struct HolderRow {
  std::size_t refinement = 0;
  double k = 0.0;
  double gamma = 0.0;
  double quotient = 0.0;  // mean over samples of the max quotient
};

struct HolderResult {
  std::vector<HolderRow> rows;
  double stability_ratio = 0.0;  // max/min over refinements at the first gamma
};

/// Max of ||X(t) - X(s)|| / |t - s|^gamma over dyadic separations.
double holder_quotient(const std::vector<FemFunction>& path, double k, double gamma, const OperatorSet& ops);

HolderResult holder_probe(const StudyConfig& cfg);
void write_holder_csv(std::ostream& os, const HolderResult& result);

/// Single trajectory of the scheme from P_h x0 with sample 0 of the noise.
Trajectory single_run(const StudyConfig& cfg);

}  // namespace chc
