#include "chc/fem.hpp"
#include "chc/mesh.hpp"
#include "chc/noise.hpp"
#include "chc/stepper.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace chc;

namespace {

std::shared_ptr<const OperatorSet> interval_ops(int n)
{
  return assemble(build_interval_mesh(1.0, n));
}

StepperConfig with_step(double k)
{
  StepperConfig c;
  c.k = k;
  return c;
}

Eigen::MatrixXd noise_block(const OperatorSet& ops, double T, std::size_t N, double sigma, std::uint64_t sample)
{
  NoiseSpec spec;
  spec.sigma = sigma;
  spec.modes = 4 * (ops.size() - 1);
  const auto basis = build_basis(DomainSpec::interval(1.0), spec.modes);
  const NoiseProjector proj(spec, *basis, ops);
  return proj.apply_all(sample_increments(spec, T, N, {1}, sample).level(1));
}

FemFunction smooth_initial(const OperatorSet& ops, double amp = 0.5)
{
  const auto basis = build_basis(DomainSpec::interval(1.0), 4);
  SpectralField v = SpectralField::zero(basis);
  v.coeffs[1] = amp;
  v.coeffs[3] = -0.3 * amp;
  return project_l2(v, ops);
}

}  // namespace

TEST(ChemicalPotential, Constants)
{
  const auto ops = interval_ops(16);
  const Nonlinearity p = Potential::double_well();
  EXPECT_LT(chemical_potential(FemFunction::Ones(17), *ops, p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(chemical_potential(FemFunction::Zero(17), *ops, p).cwiseAbs().maxCoeff(), 1e-12);
  const FemFunction y = chemical_potential(FemFunction::Constant(17, 2.0), *ops, p);
  EXPECT_LT((y.array() - 6.0).abs().maxCoeff(), 1e-10);
}

TEST(Lyapunov, Examples)
{
  const auto ops = interval_ops(64);
  const Nonlinearity p = Potential::double_well();
  EXPECT_NEAR(lyapunov_J(FemFunction::Ones(65), *ops, p), 0.0, 1e-14);
  EXPECT_NEAR(lyapunov_J(FemFunction::Zero(65), *ops, p), 0.25, 1e-14);

  // J(P_h(0.1 phi_1)) against an independent fine quadrature of the exact cosine
  const auto basis = build_basis(DomainSpec::interval(1.0), 2);
  const FemFunction x = project_l2(SpectralField::mode(basis, 1, 0.1), *ops);
  const double pi = std::acos(-1.0);
  double f_int = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double s = 0.1 * std::sqrt(2.0) * std::cos(pi * (i + 0.5) / n);
    f_int += 0.25 * (s * s - 1) * (s * s - 1) / n;
  }
  EXPECT_NEAR(lyapunov_J(x, *ops, p), 0.5 * 0.01 * pi * pi + f_int, 1e-3);
  EXPECT_NEAR(lyapunov_J(x, *ops, p) - functional_F(x, *ops, *p), 0.5 * x.dot(ops->stiffness() * x), 1e-14);
}

TEST(Step, StationaryConstantIsFixedPoint)
{
  const auto ops = interval_ops(16);
  Stepper st(ops, Potential::double_well(), with_step(1e-3));
  const State s0 = st.initial_state(FemFunction::Ones(17));
  StepDiagnostics d;
  const State s1 = st.step(s0, FemFunction::Zero(17), &d);
  EXPECT_EQ(s1.x, s0.x);
  EXPECT_LE(d.newton_iterations, 1);
  const auto r = energy_residual(s0, s1, FemFunction::Zero(17), 1e-3, *ops, Potential::double_well());
  EXPECT_NEAR(r.derived, 0.0, 1e-14);
}

TEST(Step, LinearMatchesResolvent)
{
  const auto ops = interval_ops(32);
  const double k = 1e-3;
  const DiscreteSpectrum spec = discrete_spectrum(*ops);
  Stepper st(ops, std::nullopt, with_step(k));
  const Eigen::MatrixXd w = noise_block(*ops, 32 * k, 32, 1.0, 0);
  State s = st.initial_state(smooth_initial(*ops));
  Eigen::VectorXd c = spec.coefficients(s.x);
  const Eigen::ArrayXd damp = 1.0 / (1.0 + k * spec.eigenvalues.array().square());
  for (int n = 0; n < 32; ++n) {
    s = st.step(s, w.col(n));
    c = (damp * (c + spec.coefficients(w.col(n))).array()).matrix();
    EXPECT_LT((s.x - spec.vectors * c).cwiseAbs().maxCoeff(), 1e-9) << n;
  }
}

TEST(Step, FreeFunctionAgrees)
{
  const auto ops = interval_ops(16);
  const StepperConfig cfg = with_step(5e-4);
  Stepper st(ops, Potential::double_well(), cfg);
  const State s0 = st.initial_state(smooth_initial(*ops));
  const FemFunction w = noise_block(*ops, 5e-4, 1, 1.0, 2).col(0);
  const State a = st.step(s0, w);
  const State b = backward_euler_step(s0, w, cfg, ops, Potential::double_well());
  EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Step, NewtonFailureCarriesHistory)
{
  const auto ops = interval_ops(16);
  StepperConfig cfg = with_step(1e-3);
  cfg.max_newton_iters = 1;
  cfg.newton_rtol = 1e-16;
  cfg.newton_atol = 1e-300;
  Stepper st(ops, Potential::double_well(), cfg);
  try {
    st.step(st.initial_state(smooth_initial(*ops, 1.5)), FemFunction::Zero(17));
    FAIL() << "expected NewtonFailure";
  } catch (const NewtonFailure& e) {
    EXPECT_FALSE(e.residual_history.empty());
  }
}

TEST(Step, NewtonConvergesQuickly)
{
  // |X0|_1 <= 2, k <= 1e-3, h >= 1/128
  for (int n : {32, 128}) {
    const auto ops = interval_ops(n);
    Stepper st(ops, Potential::double_well(), with_step(1e-3));
    FemFunction x0 = smooth_initial(*ops, 0.3);
    ASSERT_LE(h1_seminorm(x0, *ops), 2.0);
    const Trajectory t = run_trajectory(st, x0, noise_block(*ops, 0.05, 50, 1.0, 4), {StoragePolicy::full});
    for (const auto& d : t.diagnostics)
      EXPECT_LE(d.newton_iterations, 8);
  }
}

TEST(Trajectory, ZeroStepsAndStorage)
{
  const auto ops = interval_ops(8);
  Stepper st(ops, Potential::double_well(), with_step(1e-3));
  const FemFunction x0 = smooth_initial(*ops);
  const Trajectory t0 = run_trajectory(st, x0, Eigen::MatrixXd(9, 0), {StoragePolicy::full});
  ASSERT_EQ(t0.states.size(), 1u);
  EXPECT_EQ(t0.states[0].x, x0);
  EXPECT_TRUE(t0.diagnostics.empty());

  const Eigen::MatrixXd w = noise_block(*ops, 0.25, 250, 1.0, 1);
  const Trajectory s = run_trajectory(st, x0, w, {StoragePolicy::strided, 0, false});
  EXPECT_EQ(s.states.size(), 1u + 84u);  // stride ceil(250/100) = 3
  const Trajectory m = run_trajectory(st, x0, w, {StoragePolicy::maxima_only});
  EXPECT_EQ(m.final_state.x, s.final_state.x);
  EXPECT_EQ(m.final_state.step, 250u);
}

TEST(Trajectory, MassAndEnergyNoisy)
{
  const auto ops = interval_ops(64);
  const double k = 5e-4;
  Stepper st(ops, Potential::double_well(), with_step(k));
  for (std::uint64_t sample = 0; sample < 3; ++sample) {
    FemFunction x0 = smooth_initial(*ops);
    x0.array() += 0.2;
    const Trajectory t = run_trajectory(st, x0, noise_block(*ops, 200 * k, 200, 1.0, sample), {StoragePolicy::full});
    EXPECT_LE(t.maxima.sup_mass_deviation, 1e-10);
    EXPECT_LE(t.maxima.max_energy_residual, 1e-8);
    for (std::size_t j = 1; j < t.states.size(); ++j)
      EXPECT_NEAR(mean(t.states[j].x, *ops), mean(t.states[j - 1].x, *ops), 1e-12);
  }
}

TEST(Trajectory, DeterministicEnergyDecreases)
{
  const auto ops = interval_ops(64);
  Stepper st(ops, Potential::double_well(), with_step(1e-4));
  const Trajectory t =
      run_trajectory(st, smooth_initial(*ops), Eigen::MatrixXd::Zero(65, 300), {StoragePolicy::full});
  double prev = t.initial.lyapunov;
  for (const auto& d : t.diagnostics) {
    EXPECT_LE(d.lyapunov, prev + 1e-8);
    EXPECT_LE(d.energy_residual, 1e-8);
    prev = d.lyapunov;
  }
}

TEST(Trajectory, LinearDeterministicMatchesSpectral)
{
  const auto ops = interval_ops(32);
  const double k = 2e-3;
  const DiscreteSpectrum spec = discrete_spectrum(*ops);
  Stepper st(ops, std::nullopt, with_step(k));
  const FemFunction x0 = smooth_initial(*ops);
  const Trajectory t = run_trajectory(st, x0, Eigen::MatrixXd::Zero(33, 20), {StoragePolicy::maxima_only});
  const Eigen::ArrayXd r = (1.0 + k * spec.eigenvalues.array().square()).pow(-20.0);
  const FemFunction expect = spec.vectors * (r * spec.coefficients(x0).array()).matrix();
  EXPECT_LT((t.final_state.x - expect).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Trajectory, CsvLayout)
{
  const auto ops = interval_ops(8);
  const StepperConfig cfg = with_step(0.01);
  Stepper st(ops, Potential::double_well(), cfg);
  const Trajectory t =
      run_trajectory(st, FemFunction::Ones(9), Eigen::MatrixXd::Zero(9, 5), {StoragePolicy::strided, 1, false});
  std::ostringstream os;
  write_trajectory_csv(os, t, cfg);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "step,time,mass,J,Y_h1,newton_iters,residual");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_NE(line.find(",0,"), std::string::npos);  // J of the stationary state is 0
  }
  EXPECT_EQ(rows, 6);
}
