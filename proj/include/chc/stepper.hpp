// ============================================================================
// chc/stepper.hpp - Fully implicit backward Euler for the Cahn-Hilliard-Cook
// equation, solved by Newton's method in the mixed (X, Y) form
//
//   M X + k K Y        = M X_prev + M w       (w = P_h Delta W)
//   K X + b(X) - M Y   = 0                    (b_i = integral f(X) phi_i)
// ============================================================================
#pragma once

#include "chc/fem.hpp"
#include "chc/potential.hpp"

#include <Eigen/SparseLU>

#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace chc {

struct StepperConfig {
  double k = 1e-3;
  double newton_rtol = 1e-10;
  double newton_atol = 1e-12;
  int max_newton_iters = 50;
};

/// No potential means f = 0 (the linear problem).
using Nonlinearity = std::optional<Potential>;

struct State {
  FemFunction x;
  FemFunction y;  // chemical potential
  std::size_t step = 0;
  double time = 0.0;
};

struct StepDiagnostics {
  int newton_iterations = 0;
  double residual = 0.0;
  double mass = 0.0;
  double lyapunov = 0.0;
  double y_h1 = 0.0;           // |Y|_1
  double dx_l2 = 0.0;          // ||X^j - X^{j-1}||
  double dx_h1 = 0.0;          // |X^j - X^{j-1}|_1
  double energy_residual = 0.0;
  double energy_residual_printed = 0.0;
};

class NewtonFailure : public std::runtime_error {
public:
  NewtonFailure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// Y = A_h X + P_h f(X), i.e. M Y = K X + b(X).
FemFunction chemical_potential(const FemFunction& x, const OperatorSet& ops, const Nonlinearity& p);

/// J(X) = |X|_1^2 / 2 + integral F(X); F = 0 for the linear problem.
double lyapunov_J(const FemFunction& x, const OperatorSet& ops, const Nonlinearity& p);

struct EnergyResidual {
  /// J(X^j) - J(X^{j-1}) + |dX|_1^2/2 + k|Y^j|_1^2 - <Y^j, w> - c1^2 ||dX||^2 / 2
  double derived = 0.0;
  /// Same with + c1^2 ||dX||^2 / 2, the sign as printed in the source estimate.
  double printed = 0.0;
};

EnergyResidual energy_residual(const State& prev, const State& next, const FemFunction& w, double k,
                               const OperatorSet& ops, const Nonlinearity& p);

/// Newton solver for one mesh. Holds the LU workspace, so each worker
/// thread needs its own instance.
class Stepper {
public:
  Stepper(std::shared_ptr<const OperatorSet> ops, Nonlinearity potential, StepperConfig cfg);

  const OperatorSet& operators() const { return *ops_; }
  const StepperConfig& config() const { return cfg_; }
  const Nonlinearity& potential() const { return potential_; }

  State initial_state(const FemFunction& x0) const;

  /// One step; w = P_h Delta W (nodal coefficients). Throws NewtonFailure.
  State step(const State& prev, const FemFunction& w, StepDiagnostics* diag = nullptr);

private:
  std::shared_ptr<const OperatorSet> ops_;
  Nonlinearity potential_;
  StepperConfig cfg_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool pattern_ready_ = false;
};

/// Free-function form of one step.
State backward_euler_step(const State& prev, const FemFunction& w, const StepperConfig& cfg,
                          std::shared_ptr<const OperatorSet> ops, const Nonlinearity& p,
                          StepDiagnostics* diag = nullptr);

enum class StoragePolicy { full, strided, maxima_only };

struct RunningMaxima {
  double sup_l2 = 0.0;
  double sup_lyapunov = 0.0;
  double sup_mass_deviation = 0.0;
  double sup_minus_one = 0.0;  // sup |X^j|_{-1,h}, filled when requested
  double sum_k_y_h1_sq = 0.0;  // sum_j k |Y^j|_1^2
  double max_energy_residual = -std::numeric_limits<double>::infinity();
  double max_energy_residual_printed = -std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<State> states;            // by storage policy; always holds the initial state
  std::vector<StepDiagnostics> diagnostics;
  StepDiagnostics initial;              // mass, J and |Y|_1 of X^0
  RunningMaxima maxima;
  State final_state;
};

struct TrajectoryOptions {
  StoragePolicy storage = StoragePolicy::strided;
  std::size_t stride = 0;  // 0: ceil(N / 100)
  bool track_minus_one_norm = false;
};

/// X^0 = x0 followed by one step per column of increments (projected noise,
/// nodal coefficients, one column per step). Step errors are rethrown with the
/// step index.
Trajectory run_trajectory(Stepper& stepper, const FemFunction& x0, const Eigen::MatrixXd& projected_noise,
                          const TrajectoryOptions& options = {});

/// Writes "step,time,mass,J,Y_h1,newton_iters,residual" rows.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const StepperConfig& cfg);

}  // namespace chc
