// ============================================================================
// stepper.cpp - Newton iteration for the implicit step and trajectory driver
// ============================================================================
#include "chc/stepper.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace chc {

FemFunction chemical_potential(const FemFunction& x, const OperatorSet& ops, const Nonlinearity& p)
{
  Eigen::VectorXd rhs = ops.stiffness() * x;
  if (p)
    rhs += ops.load_composite(x, [&p](double s) { return p->f(s); });
  return ops.solve_mass(rhs);
}

double lyapunov_J(const FemFunction& x, const OperatorSet& ops, const Nonlinearity& p)
{
  const double grad = 0.5 * x.dot(ops.stiffness() * x);
  return p ? grad + functional_F(x, ops, *p) : grad;
}

EnergyResidual energy_residual(const State& prev, const State& next, const FemFunction& w, double k,
                               const OperatorSet& ops, const Nonlinearity& p)
{
  const FemFunction dx = next.x - prev.x;
  const SparseMatrix& m = ops.mass();
  const SparseMatrix& kk = ops.stiffness();
  const double c1sq = p ? p->c1_squared() : 0.0;
  const double common = lyapunov_J(next.x, ops, p) - lyapunov_J(prev.x, ops, p) + 0.5 * dx.dot(kk * dx) +
                        k * next.y.dot(kk * next.y) - next.y.dot(m * w);
  const double taylor = 0.5 * c1sq * dx.dot(m * dx);
  return {common - taylor, common + taylor};
}

Stepper::Stepper(std::shared_ptr<const OperatorSet> ops, Nonlinearity potential, StepperConfig cfg)
    : ops_(std::move(ops)), potential_(std::move(potential)), cfg_(cfg)
{
  if (!(cfg_.k > 0.0))
    throw std::invalid_argument("time step must be positive");
  if (!(cfg_.newton_rtol > 0.0) || !(cfg_.newton_atol > 0.0) || cfg_.max_newton_iters < 1)
    throw std::invalid_argument("Newton tolerances and iteration cap must be positive");
}

State Stepper::initial_state(const FemFunction& x0) const
{
  if (static_cast<std::size_t>(x0.size()) != ops_->size())
    throw std::invalid_argument("initial state size does not match the mesh");
  return {x0, chemical_potential(x0, *ops_, potential_), 0, 0.0};
}

State Stepper::step(const State& prev, const FemFunction& w, StepDiagnostics* diag)
{
  const OperatorSet& ops = *ops_;
  const SparseMatrix& m = ops.mass();
  const SparseMatrix& kk = ops.stiffness();
  const Eigen::Index n = static_cast<Eigen::Index>(ops.size());
  const double k = cfg_.k;

  const Eigen::VectorXd rhs = m * (prev.x + w);
  const double tol = cfg_.newton_atol + cfg_.newton_rtol * rhs.norm();

  State next{prev.x, prev.y.size() == n ? prev.y : chemical_potential(prev.x, ops, potential_),
             prev.step + 1, prev.time + k};

  std::vector<double> history;
  Eigen::VectorXd residual(2 * n);
  int iters = 0;
  for (;;) {
    residual.head(n) = m * next.x + k * (kk * next.y) - rhs;
    residual.tail(n) = kk * next.x - m * next.y;
    if (potential_)
      residual.tail(n) += ops.load_composite(next.x, [this](double s) { return potential_->f(s); });
    const double res = residual.norm();
    history.push_back(res);
    if (res <= tol)
      break;
    if (iters >= cfg_.max_newton_iters) {
      std::ostringstream msg;
      msg << "Newton did not converge in " << iters << " iterations (residual " << res << ", tolerance "
          << tol << ")";
      throw NewtonFailure(msg.str(), std::move(history));
    }

    // [[M, kK], [K + B'(X), -M]]
    const SparseMatrix bprime = potential_
                                    ? ops.weighted_mass(next.x, [this](double s) { return potential_->f_prime(s); })
                                    : ops.weighted_mass(next.x, [](double) { return 0.0; });
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * (m.nonZeros() + kk.nonZeros()) + bprime.nonZeros());
    for (int col = 0; col < n; ++col) {
      for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
        trip.emplace_back(it.row(), col, it.value());
        trip.emplace_back(n + it.row(), n + col, -it.value());
      }
      for (SparseMatrix::InnerIterator it(kk, col); it; ++it) {
        trip.emplace_back(it.row(), n + col, k * it.value());
        trip.emplace_back(n + it.row(), col, it.value());
      }
      for (SparseMatrix::InnerIterator it(bprime, col); it; ++it)
        trip.emplace_back(n + it.row(), col, it.value());
    }
    SparseMatrix jac(2 * n, 2 * n);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    if (!pattern_ready_) {
      lu_.analyzePattern(jac);
      pattern_ready_ = true;
    }
    lu_.factorize(jac);
    if (lu_.info() != Eigen::Success)
      throw NewtonFailure("Newton Jacobian factorization failed", std::move(history));
    const Eigen::VectorXd delta = lu_.solve(residual);
    if (lu_.info() != Eigen::Success || !delta.allFinite())
      throw NewtonFailure("Newton linear solve failed", std::move(history));
    next.x -= delta.head(n);
    next.y -= delta.tail(n);
    ++iters;
  }

  if (diag) {
    const FemFunction dx = next.x - prev.x;
    diag->newton_iterations = iters;
    diag->residual = history.back();
    diag->mass = mean(next.x, ops);
    diag->lyapunov = lyapunov_J(next.x, ops, potential_);
    diag->y_h1 = h1_seminorm(next.y, ops);
    diag->dx_l2 = l2_norm(dx, ops);
    diag->dx_h1 = h1_seminorm(dx, ops);
    const EnergyResidual er = energy_residual(prev, next, w, k, ops, potential_);
    diag->energy_residual = er.derived;
    diag->energy_residual_printed = er.printed;
  }
  return next;
}

State backward_euler_step(const State& prev, const FemFunction& w, const StepperConfig& cfg,
                          std::shared_ptr<const OperatorSet> ops, const Nonlinearity& p, StepDiagnostics* diag)
{
  Stepper stepper(std::move(ops), p, cfg);
  return stepper.step(prev, w, diag);
}

Trajectory run_trajectory(Stepper& stepper, const FemFunction& x0, const Eigen::MatrixXd& projected_noise,
                          const TrajectoryOptions& options)
{
  const OperatorSet& ops = stepper.operators();
  const std::size_t steps = static_cast<std::size_t>(projected_noise.cols());
  if (steps > 0 && static_cast<std::size_t>(projected_noise.rows()) != ops.size())
    throw std::invalid_argument("projected noise rows do not match the mesh");
  const std::size_t stride = options.stride ? options.stride : std::max<std::size_t>(1, (steps + 99) / 100);

  Trajectory traj;
  State state = stepper.initial_state(x0);
  const double mass0 = mean(state.x, ops);
  const double k = stepper.config().k;

  auto& mx = traj.maxima;
  mx.sup_l2 = l2_norm(state.x, ops);
  mx.sup_lyapunov = lyapunov_J(state.x, ops, stepper.potential());
  if (options.track_minus_one_norm)
    mx.sup_minus_one = discrete_minus_one_norm(state.x - Eigen::VectorXd::Constant(state.x.size(), mass0), ops);
  traj.initial.mass = mass0;
  traj.initial.lyapunov = mx.sup_lyapunov;
  traj.initial.y_h1 = h1_seminorm(state.y, ops);
  traj.states.push_back(state);
  traj.diagnostics.reserve(steps);

  for (std::size_t j = 0; j < steps; ++j) {
    StepDiagnostics diag;
    try {
      state = stepper.step(state, projected_noise.col(j), &diag);
    } catch (const NewtonFailure& e) {
      throw NewtonFailure("step " + std::to_string(j + 1) + ": " + e.what(), e.residual_history);
    }
    traj.diagnostics.push_back(diag);
    mx.sup_l2 = std::max(mx.sup_l2, l2_norm(state.x, ops));
    mx.sup_lyapunov = std::max(mx.sup_lyapunov, diag.lyapunov);
    mx.sup_mass_deviation = std::max(mx.sup_mass_deviation, std::abs(diag.mass - mass0));
    mx.sum_k_y_h1_sq += k * diag.y_h1 * diag.y_h1;
    mx.max_energy_residual = std::max(mx.max_energy_residual, diag.energy_residual);
    mx.max_energy_residual_printed = std::max(mx.max_energy_residual_printed, diag.energy_residual_printed);
    if (options.track_minus_one_norm)
      mx.sup_minus_one = std::max(
          mx.sup_minus_one,
          discrete_minus_one_norm(state.x - Eigen::VectorXd::Constant(state.x.size(), diag.mass), ops));

    const bool last = j + 1 == steps;
    if (options.storage == StoragePolicy::full ||
        (options.storage == StoragePolicy::strided && ((j + 1) % stride == 0 || last)))
      traj.states.push_back(state);
  }
  if (options.storage == StoragePolicy::maxima_only && steps > 0)
    traj.states.push_back(state);
  traj.final_state = state;
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const StepperConfig& cfg)
{
  os << "step,time,mass,J,Y_h1,newton_iters,residual\n";
  os << std::setprecision(17);
  const auto& d0 = traj.initial;
  os << 0 << ',' << 0.0 << ',' << d0.mass << ',' << d0.lyapunov << ',' << d0.y_h1 << ",0,0\n";
  for (std::size_t j = 0; j < traj.diagnostics.size(); ++j) {
    const auto& d = traj.diagnostics[j];
    os << j + 1 << ',' << (j + 1) * cfg.k << ',' << d.mass << ',' << d.lyapunov << ',' << d.y_h1 << ','
       << d.newton_iterations << ',' << d.residual << '\n';
  }
}

}  // namespace chc
