// ============================================================================
// experiments.cpp - rate studies and Monte-Carlo diagnostics
//
// Linear studies work in the discrete eigenbasis of (K, M): with p = the
// M-coefficients of P_h v, R_{k,h}^n P_h v has coefficients
// (1 + k lambda_h^2)^{-n} p and E_h(t) P_h v has exp(-t lambda_h^2) p. L2
// distances to spectral fields use C = V^T L, where L holds the integrals of
// the continuous eigenfunctions against the hat functions.
// ============================================================================
#include "chc/experiments.hpp"
#include "chc/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <ostream>
#include <stdexcept>

namespace chc {

Nonlinearity StudyConfig::nonlinearity() const
{
  if (linear)
    return std::nullopt;
  return Potential(potential);
}

std::size_t StudyConfig::noise_modes(int cells) const
{
  if (noise.modes > 0)
    return noise.modes;
  const std::size_t c = static_cast<std::size_t>(cells);
  return domain.kind == DomainKind::interval ? 4 * c : 4 * c * c;
}

namespace {

Mesh make_mesh(const DomainSpec& domain, int cells)
{
  if (domain.kind == DomainKind::interval)
    return build_interval_mesh(domain.lx, cells);
  return build_rectangle_mesh(domain.lx, domain.ly, cells, cells);
}

std::size_t max_x0_index(const StudyConfig& cfg)
{
  std::size_t m = 0;
  for (const auto& [j, c] : cfg.x0)
    m = std::max(m, j);
  return m;
}

SpectralField x0_field(const StudyConfig& cfg, std::shared_ptr<const EigenBasis> basis)
{
  SpectralField v = SpectralField::zero(std::move(basis));
  for (const auto& [j, c] : cfg.x0) {
    if (j >= v.basis->size())
      throw std::out_of_range("initial data mode " + std::to_string(j) + " exceeds the basis");
    v.coeffs[j] += c;
  }
  return v;
}

void finish_fit(RateStudyResult& r, std::size_t upto)
{
  std::vector<double> x, y;
  for (std::size_t i = 0; i < std::min(upto, r.levels.size()); ++i) {
    x.push_back(r.axis == "h" ? r.levels[i].h : r.levels[i].k);
    y.push_back(r.levels[i].error);
  }
  r.fit = fit_loglog(x, y);
}

// (1 + k lam^2)^{-n}
Eigen::ArrayXd resolvent_power(const Eigen::VectorXd& lam, double k, double n)
{
  return (-n * (k * lam.array().square()).log1p()).exp();
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v)
{
  MeanSe out;
  if (v.empty())
    return out;
  for (double x : v)
    out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v)
      s += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return out;
}

}  // namespace

void write_rate_csv(std::ostream& os, const RateStudyResult& result)
{
  os << "level,h,k,M,error,stderr,slope,r2\n" << std::setprecision(17);
  for (const auto& l : result.levels)
    os << l.level << ',' << l.h << ',' << l.k << ',' << l.samples << ',' << l.error << ',' << l.stderr_ << ','
       << result.fit.slope << ',' << result.fit.r2 << '\n';
}

// ---------------------------------------------------------------------------
// deterministic studies

std::pair<RateStudyResult, RateStudyResult> det_linear_rate_study(const StudyConfig& cfg)
{
  const auto basis = build_basis(cfg.domain, max_x0_index(cfg) + 1);
  const SpectralField v = x0_field(cfg, basis);
  const SpectralField exact = semigroup_apply(v, cfg.T);

  const auto error_for = [&](const OperatorSet& ops, const DiscreteSpectrum& spec, double k, double steps) {
    const Eigen::VectorXd p = spec.coefficients(project_l2(v, ops));
    const Eigen::VectorXd w = (resolvent_power(spec.eigenvalues, k, steps) * p.array()).matrix();
    return l2_distance(spec.vectors * w, exact, ops);
  };

  RateStudyResult space{"det_linear_h", "h", {}, {}, 0, {}};
  for (std::size_t l = 0; l < cfg.sweep_n.size(); ++l) {
    const auto ops = assemble(make_mesh(cfg.domain, cfg.sweep_n[l]), cfg.quad_degree);
    const DiscreteSpectrum spec = discrete_spectrum(*ops);
    const double k = cfg.T / static_cast<double>(cfg.fixed_N);
    space.levels.push_back({l, ops->mesh().h, k, 1, error_for(*ops, spec, k, static_cast<double>(cfg.fixed_N)), 0.0});
  }
  finish_fit(space, space.levels.size());

  RateStudyResult time{"det_linear_k", "k", {}, {}, 0, {}};
  const auto ops = assemble(make_mesh(cfg.domain, cfg.fixed_n), cfg.quad_degree);
  const DiscreteSpectrum spec = discrete_spectrum(*ops);
  for (std::size_t l = 0; l < cfg.sweep_N.size(); ++l) {
    const double k = cfg.T / cfg.sweep_N[l];
    time.levels.push_back({l, ops->mesh().h, k, 1, error_for(*ops, spec, k, cfg.sweep_N[l]), 0.0});
  }
  finish_fit(time, time.levels.size());
  return {space, time};
}

std::pair<RateStudyResult, RateStudyResult> det_derivative_rate_study(const StudyConfig& cfg)
{
  const auto basis = build_basis(cfg.domain, max_x0_index(cfg) + 1);
  const SpectralField v = x0_field(cfg, basis);
  const double t = cfg.t_eval;
  const SpectralField target = apply_power(semigroup_apply(v, t), 1.0);

  RateStudyResult space{"det_deriv_h", "h", {}, {}, 0, {}};
  for (std::size_t l = 0; l < cfg.sweep_n.size(); ++l) {
    const auto ops = assemble(make_mesh(cfg.domain, cfg.sweep_n[l]), cfg.quad_degree);
    const DiscreteSpectrum spec = discrete_spectrum(*ops);
    const Eigen::ArrayXd lam = spec.eigenvalues.array();
    const Eigen::ArrayXd p = spec.coefficients(project_l2(v, *ops)).array();
    const Eigen::VectorXd w = (lam * (-t * lam.square()).exp() * p).matrix();
    space.levels.push_back({l, ops->mesh().h, 0.0, 1, l2_distance(spec.vectors * w, target, *ops), 0.0});
  }
  finish_fit(space, space.levels.size());

  RateStudyResult time{"det_deriv_k", "k", {}, {}, 0, {}};
  const auto ops = assemble(make_mesh(cfg.domain, cfg.fixed_n), cfg.quad_degree);
  const DiscreteSpectrum spec = discrete_spectrum(*ops);
  const Eigen::ArrayXd lam = spec.eigenvalues.array();
  const Eigen::ArrayXd p = spec.coefficients(project_l2(v, *ops)).array();
  for (std::size_t l = 0; l < cfg.sweep_N.size(); ++l) {
    const double k = t / cfg.sweep_N[l];
    const Eigen::ArrayXd diff =
        lam * (resolvent_power(spec.eigenvalues, k, cfg.sweep_N[l]) - (-t * lam.square()).exp()) * p;
    time.levels.push_back({l, ops->mesh().h, k, 1, std::sqrt(diff.square().sum()), 0.0});
  }
  finish_fit(time, time.levels.size());
  return {space, time};
}

// ---------------------------------------------------------------------------
// stochastic convolution

namespace {

struct ConvolutionMesh {
  std::shared_ptr<const OperatorSet> ops;
  Eigen::VectorXd lambda_h;
  Eigen::MatrixXd cross;  // C = V^T L, N_h x J
};

ConvolutionMesh convolution_mesh(const StudyConfig& cfg, int cells, const EigenBasis& basis, std::size_t modes)
{
  ConvolutionMesh cm;
  cm.ops = assemble(make_mesh(cfg.domain, cells), cfg.quad_degree);
  const DiscreteSpectrum spec = discrete_spectrum(*cm.ops);
  cm.lambda_h = spec.eigenvalues;
  cm.cross = spec.vectors.transpose() * spectral_load_matrix(basis, *cm.ops, modes);
  return cm;
}

// Standard normals driving the conditional part of the reference, J x N.
Eigen::MatrixXd reference_normals(const StudyConfig& cfg, std::size_t modes, std::size_t steps, std::uint64_t sample)
{
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(modes, steps);
  for (std::size_t j = 1; j < modes; ++j) {
    auto rng = make_stream(cfg.noise.seed, sample, j, 1);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < steps; ++i)
      z(j, i) = normal(rng);
  }
  return z;
}

// Exact-in-law W_A on the fine grid of inc: J x (N + 1) field coefficients.
Eigen::MatrixXd convolution_reference(const EigenBasis& basis, const Eigen::VectorXd& scales,
                                      const WienerIncrements& inc, const Eigen::MatrixXd& z)
{
  const Eigen::MatrixXd& db = inc.level(1);
  const std::size_t modes = inc.modes();
  const double k = inc.fine_step();
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(modes, inc.fine_steps() + 1);
  for (std::size_t j = 1; j < modes; ++j) {
    if (scales[j] == 0.0)
      continue;
    const double lam = basis.lambda(j);
    const ConvolutionCovariance cov = convolution_covariance(lam, k);
    const double decay = std::exp(-lam * lam * k);
    for (std::size_t i = 0; i < inc.fine_steps(); ++i)
      ref(j, i + 1) = decay * ref(j, i) + scales[j] * conditional_integral(cov, db(j, i), z(j, i));
  }
  return ref;
}

// int_0^k exp(-a (k - s)) ds
double decay_integral(double a, double k)
{
  return a * k < 1e-12 ? k * (1.0 - 0.5 * a * k) : -std::expm1(-a * k) / a;
}

// Semidiscrete convolution W_{A_h}(t) = int E_h(t - s) P_h dW(s), sampled
// exactly at the grid times jointly with the reference. Per step and noise
// mode the discrete-mode integrals are Gaussian given (Delta beta_j, z_j);
// regressing on those two independent normals leaves a residual whose
// covariance, summed over j, is an N_h x N_h matrix fixed per mesh.
struct SemidiscreteSampler {
  Eigen::ArrayXd decay;      // exp(-lambda_h^2 k)
  Eigen::MatrixXd load_db;   // N_h x J, multiplies Delta beta / sqrt(k)
  Eigen::MatrixXd load_z;    // N_h x J, multiplies z
  Eigen::MatrixXd residual;  // N_h x N_h factor of the conditional covariance
};

SemidiscreteSampler semidiscrete_sampler(const ConvolutionMesh& cm, const EigenBasis& basis,
                                         const Eigen::VectorXd& scales, double k)
{
  const Eigen::Index nh = cm.lambda_h.size();
  const Eigen::Index modes = scales.size();
  const Eigen::ArrayXd a = cm.lambda_h.array().square();
  SemidiscreteSampler s;
  s.decay = (-k * a).exp();
  s.load_db = Eigen::MatrixXd::Zero(nh, modes);
  s.load_z = Eigen::MatrixXd::Zero(nh, modes);
  const double sk = std::sqrt(k);
  for (Eigen::Index j = 1; j < modes; ++j) {
    if (scales[j] == 0.0)
      continue;
    const double mu = basis.lambda(static_cast<std::size_t>(j)) * basis.lambda(static_cast<std::size_t>(j));
    const ConvolutionCovariance cov = convolution_covariance(basis.lambda(static_cast<std::size_t>(j)), k);
    const double cond_sd = std::sqrt(std::max(0.0, cov.conditional_var));
    for (Eigen::Index i = 0; i < nh; ++i) {
      const double with_db = decay_integral(a[i], k);
      const double with_ref = decay_integral(a[i] + mu, k);
      const double l1 = with_db / sk;
      const double l2 = cond_sd > 0.0 ? (with_ref - cov.cov / k * with_db) / cond_sd : 0.0;
      const double w = cm.cross(i, j) * scales[j];
      s.load_db(i, j) = w * l1;
      s.load_z(i, j) = w * l2;
    }
  }
  Eigen::MatrixXd joint(nh, nh);
  for (Eigen::Index i = 0; i < nh; ++i)
    for (Eigen::Index m = 0; m < nh; ++m)
      joint(i, m) = decay_integral(a[i] + a[m], k);
  const Eigen::MatrixXd weighted = cm.cross * scales.cwiseAbs2().asDiagonal() * cm.cross.transpose();
  Eigen::MatrixXd cond = weighted.cwiseProduct(joint) - s.load_db * s.load_db.transpose() -
                         s.load_z * s.load_z.transpose();
  cond = 0.5 * (cond + cond.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cond);
  s.residual = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return s;
}

double semidiscrete_sup_error(const ConvolutionMesh& cm, const SemidiscreteSampler& s, const Eigen::MatrixXd& dbeta,
                              const Eigen::MatrixXd& z, const Eigen::MatrixXd& reference, std::mt19937_64& rng,
                              double k)
{
  const Eigen::Index steps = dbeta.cols();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd extra(cm.lambda_h.size(), steps);
  for (Eigen::Index n = 0; n < steps; ++n)
    for (Eigen::Index i = 0; i < extra.rows(); ++i)
      extra(i, n) = normal(rng);
  const Eigen::MatrixXd increments = s.load_db * (dbeta / std::sqrt(k)) + s.load_z * z + s.residual * extra;
  const Eigen::MatrixXd projected_ref = cm.cross * reference;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(cm.lambda_h.size());
  double sup = 0.0;
  for (Eigen::Index n = 1; n <= steps; ++n) {
    w = (s.decay * w.array()).matrix() + increments.col(n - 1);
    const double e2 = reference.col(n).squaredNorm() + w.squaredNorm() - 2.0 * w.dot(projected_ref.col(n));
    sup = std::max(sup, e2);
  }
  return std::sqrt(std::max(0.0, sup));
}

// sup_n ||W_A(t_n) - W_{A_h}^n|| for one mesh and one time level.
double convolution_sup_error(const ConvolutionMesh& cm, const Eigen::VectorXd& scales, const Eigen::MatrixXd& dbeta,
                             const Eigen::MatrixXd& reference, int factor, double k)
{
  const Eigen::Index steps = dbeta.cols();
  const Eigen::MatrixXd forcing = cm.cross * (scales.asDiagonal() * dbeta);
  const Eigen::ArrayXd damp = resolvent_power(cm.lambda_h, k, 1.0);

  Eigen::MatrixXd ref_level(reference.rows(), steps + 1);
  for (Eigen::Index n = 0; n <= steps; ++n)
    ref_level.col(n) = reference.col(n * factor);
  const Eigen::MatrixXd projected_ref = cm.cross * ref_level;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(cm.lambda_h.size());
  double sup = 0.0;
  for (Eigen::Index n = 1; n <= steps; ++n) {
    w = (damp * (w + forcing.col(n - 1)).array()).matrix();
    const double e2 = ref_level.col(n).squaredNorm() + w.squaredNorm() - 2.0 * w.dot(projected_ref.col(n));
    sup = std::max(sup, e2);
  }
  return std::sqrt(std::max(0.0, sup));
}

LevelResult rms_level(std::size_t level, double h, double k, const std::vector<double>& sup_errors)
{
  std::vector<double> sq;
  for (double e : sup_errors)
    sq.push_back(e * e);
  const MeanSe ms = mean_se(sq);
  const double rms = std::sqrt(ms.mean);
  return {level, h, k, sup_errors.size(), rms, rms > 0.0 ? ms.se / (2.0 * rms) : 0.0};
}

}  // namespace

std::pair<RateStudyResult, RateStudyResult> stoch_conv_rate_study(const StudyConfig& cfg)
{
  // spatial sweep in the k -> 0 limit: the semidiscrete convolution is
  // sampled exactly at cfg.N grid times, so no time-stepping error enters
  RateStudyResult space{"stoch_conv_h", "h", {}, {}, 0, {}};
  {
    const int finest = *std::max_element(cfg.sweep_n.begin(), cfg.sweep_n.end());
    NoiseSpec noise = cfg.noise;
    noise.modes = cfg.noise_modes(finest);
    const auto basis = build_basis(cfg.domain, noise.modes);
    if (!admissibility(noise, *basis, 0.5).admissible)
      throw std::domain_error("stochastic convolution study needs admissible noise");
    const Eigen::VectorXd scales = noise.scales(*basis);
    const double k = cfg.T / static_cast<double>(cfg.N);
    std::vector<ConvolutionMesh> meshes;
    std::vector<SemidiscreteSampler> samplers;
    for (int n : cfg.sweep_n) {
      meshes.push_back(convolution_mesh(cfg, n, *basis, noise.modes));
      samplers.push_back(semidiscrete_sampler(meshes.back(), *basis, scales, k));
    }

    std::vector<std::vector<double>> errs(meshes.size(), std::vector<double>(cfg.samples));
    space.checksums.resize(cfg.samples);
    parallel_for(cfg.samples, cfg.workers, [&](std::size_t m) {
      const WienerIncrements inc = sample_increments(noise, cfg.T, cfg.N, {1}, m);
      space.checksums[m] = inc.checksum();
      const Eigen::MatrixXd z = reference_normals(cfg, noise.modes, cfg.N, m);
      const Eigen::MatrixXd ref = convolution_reference(*basis, scales, inc, z);
      for (std::size_t l = 0; l < meshes.size(); ++l) {
        auto rng = make_stream(cfg.noise.seed, m, l, 2);
        errs[l][m] = semidiscrete_sup_error(meshes[l], samplers[l], inc.level(1), z, ref, rng, k);
      }
    });
    for (std::size_t l = 0; l < meshes.size(); ++l)
      space.levels.push_back(rms_level(l, meshes[l].ops->mesh().h, 0.0, errs[l]));
    finish_fit(space, space.levels.size());
  }

  // temporal sweep: one mesh, time levels coupled by summation
  RateStudyResult time{"stoch_conv_k", "k", {}, {}, 0, {}};
  {
    NoiseSpec noise = cfg.noise;
    noise.modes = cfg.noise_modes(cfg.fixed_n);
    const auto basis = build_basis(cfg.domain, noise.modes);
    if (!admissibility(noise, *basis, 0.5).admissible)
      throw std::domain_error("stochastic convolution study needs admissible noise");
    const Eigen::VectorXd scales = noise.scales(*basis);
    const ConvolutionMesh cm = convolution_mesh(cfg, cfg.fixed_n, *basis, noise.modes);

    std::vector<int> sorted = cfg.sweep_N;
    std::sort(sorted.begin(), sorted.end());
    const int fine = sorted.back();
    std::vector<int> factors;
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
      if (fine % *it != 0)
        throw std::invalid_argument("temporal sweep step counts must divide the finest one");
      factors.push_back(fine / *it);
    }

    std::vector<std::vector<double>> errs(cfg.sweep_N.size(), std::vector<double>(cfg.samples));
    time.checksums.resize(cfg.samples);
    parallel_for(cfg.samples, cfg.workers, [&](std::size_t m) {
      const WienerIncrements inc = sample_increments(noise, cfg.T, fine, factors, m);
      time.checksums[m] = inc.checksum();
      const Eigen::MatrixXd ref = convolution_reference(*basis, scales, inc, reference_normals(cfg, noise.modes, fine, m));
      for (std::size_t l = 0; l < cfg.sweep_N.size(); ++l) {
        const int factor = fine / cfg.sweep_N[l];
        errs[l][m] = convolution_sup_error(cm, scales, inc.level(factor), ref, factor, inc.step(factor));
      }
    });
    for (std::size_t l = 0; l < cfg.sweep_N.size(); ++l)
      time.levels.push_back(rms_level(l, cm.ops->mesh().h, cfg.T / cfg.sweep_N[l], errs[l]));
    finish_fit(time, time.levels.size());
  }
  return {space, time};
}

// ---------------------------------------------------------------------------
// nonlinear Monte-Carlo studies

namespace {

struct Level {
  int cells = 0;
  std::size_t steps = 0;
  int factor = 1;  // coarsening of the time grid relative to the finest level
  std::shared_ptr<const OperatorSet> ops;
  std::unique_ptr<NoiseProjector> projector;
  FemFunction x0;
};

// Levels ordered coarse to fine, cells and steps divided by 2 per level.
std::vector<Level> build_hierarchy(const StudyConfig& cfg, std::size_t count, const NoiseSpec& noise,
                                   std::shared_ptr<const EigenBasis> basis)
{
  std::vector<Level> levels(count);
  for (std::size_t l = 0; l < count; ++l) {
    const int scale = 1 << (count - 1 - l);
    Level& lv = levels[l];
    if (cfg.n % scale != 0 || cfg.N % static_cast<std::size_t>(scale) != 0)
      throw std::invalid_argument("hierarchy: n and N must be divisible by " + std::to_string(scale));
    lv.cells = cfg.n / scale;
    lv.steps = cfg.N / scale;
    lv.factor = scale;
    if (lv.cells < 2)
      throw std::invalid_argument("hierarchy: coarsest mesh has fewer than 2 cells");
    lv.ops = assemble(make_mesh(cfg.domain, lv.cells), cfg.quad_degree);
    lv.projector = std::make_unique<NoiseProjector>(noise, *basis, *lv.ops);
    lv.x0 = project_l2(x0_field(cfg, basis), *lv.ops);
  }
  return levels;
}

std::vector<int> hierarchy_factors(std::size_t count)
{
  std::vector<int> f;
  for (std::size_t l = 0; l < count; ++l)
    f.push_back(1 << l);
  return f;
}

StepperConfig level_stepper(const StudyConfig& cfg, const Level& lv)
{
  StepperConfig sc = cfg.stepper;
  sc.k = cfg.T / static_cast<double>(lv.steps);
  return sc;
}

}  // namespace

RateStudyResult strong_convergence_study(const StudyConfig& cfg)
{
  if (cfg.levels < 2)
    throw std::invalid_argument("strong convergence study needs at least two levels");
  NoiseSpec noise = cfg.noise;
  noise.modes = cfg.noise_modes(cfg.n);
  const auto basis = build_basis(cfg.domain, std::max(noise.modes, max_x0_index(cfg) + 1));
  const std::vector<Level> levels = build_hierarchy(cfg, cfg.levels, noise, basis);
  const Level& ref_level = levels.back();
  const Nonlinearity potential = cfg.nonlinearity();

  std::vector<SparseMatrix> to_fine;
  for (const auto& lv : levels)
    to_fine.push_back(transfer_matrix(lv.ops->mesh(), ref_level.ops->mesh()));
  const SparseMatrix& m_fine = ref_level.ops->mass();

  const std::size_t count = levels.size();
  std::vector<std::vector<double>> errs(count, std::vector<double>(cfg.samples, 0.0));
  std::vector<char> failed(cfg.samples, 0);
  RateStudyResult result{"strong", "h", {}, {}, 0, {}};
  result.checksums.resize(cfg.samples);

  parallel_for(cfg.samples, cfg.workers, [&](std::size_t m) {
    const WienerIncrements inc = sample_increments(noise, cfg.T, ref_level.steps, hierarchy_factors(count), m);
    result.checksums[m] = inc.checksum();
    std::vector<std::vector<State>> paths(count);
    try {
      for (std::size_t l = 0; l < count; ++l) {
        Stepper stepper(levels[l].ops, potential, level_stepper(cfg, levels[l]));
        const Eigen::MatrixXd w = levels[l].projector->apply_all(inc.level(levels[l].factor));
        paths[l] = run_trajectory(stepper, levels[l].x0, w, {StoragePolicy::full, 0, false}).states;
      }
    } catch (const NewtonFailure&) {
      failed[m] = 1;
      return;
    }
    const auto& ref = paths.back();
    for (std::size_t l = 0; l + 1 < count; ++l) {
      double worst = 0.0;
      for (std::size_t n = 0; n < paths[l].size(); ++n) {
        const FemFunction diff = ref[n * levels[l].factor].x - to_fine[l] * paths[l][n].x;
        worst = std::max(worst, diff.dot(m_fine * diff));
      }
      errs[l][m] = worst;
    }
  });

  for (std::size_t l = 0; l < count; ++l) {
    std::vector<double> ok;
    for (std::size_t m = 0; m < cfg.samples; ++m)
      if (!failed[m])
        ok.push_back(errs[l][m]);
    const MeanSe ms = mean_se(ok);
    result.levels.push_back({l, levels[l].ops->mesh().h, cfg.T / static_cast<double>(levels[l].steps), ok.size(),
                             ms.mean, ms.se});
  }
  for (char f : failed)
    result.failed_samples += f ? 1 : 0;
  finish_fit(result, count - 1);
  return result;
}

MomentStudyResult moment_bound_study(const StudyConfig& cfg)
{
  constexpr std::size_t ladder = 3;
  NoiseSpec noise = cfg.noise;
  noise.modes = cfg.noise_modes(cfg.n);
  const auto basis = build_basis(cfg.domain, std::max(noise.modes, max_x0_index(cfg) + 1));
  const std::vector<Level> levels = build_hierarchy(cfg, ladder, noise, basis);
  const Nonlinearity potential = cfg.nonlinearity();

  MomentStudyResult result;
  for (const auto& lv : levels) {
    const double mass0 = mean(lv.x0, *lv.ops);
    const FemFunction centered = lv.x0 - Eigen::VectorXd::Constant(lv.x0.size(), mass0);
    const FemFunction y0 = chemical_potential(lv.x0, *lv.ops, potential);
    result.initial_bound.push_back(discrete_minus_one_norm(centered, *lv.ops) + lyapunov_J(lv.x0, *lv.ops, potential) +
                                   h1_seminorm(y0, *lv.ops));
  }

  std::vector<std::vector<RunningMaxima>> stats(ladder, std::vector<RunningMaxima>(cfg.samples));
  std::vector<char> failed(cfg.samples, 0);
  parallel_for(cfg.samples, cfg.workers, [&](std::size_t m) {
    const WienerIncrements inc = sample_increments(noise, cfg.T, levels.back().steps, hierarchy_factors(ladder), m);
    try {
      for (std::size_t l = 0; l < ladder; ++l) {
        Stepper stepper(levels[l].ops, potential, level_stepper(cfg, levels[l]));
        const Eigen::MatrixXd w = levels[l].projector->apply_all(inc.level(levels[l].factor));
        stats[l][m] = run_trajectory(stepper, levels[l].x0, w, {StoragePolicy::maxima_only, 0, true}).maxima;
      }
    } catch (const NewtonFailure&) {
      failed[m] = 1;
    }
  });

  for (const auto& lv : levels)
    result.total_steps += lv.steps * cfg.samples;
  for (char f : failed)
    result.newton_failures += f ? 1 : 0;
  if (static_cast<double>(result.newton_failures) > 0.01 * static_cast<double>(result.total_steps))
    throw std::runtime_error("moment study aborted: " + std::to_string(result.newton_failures) +
                             " Newton failures exceed 1% of the steps");

  struct Statistic {
    const char* name;
    double (*value)(const RunningMaxima&, int p);
  };
  const Statistic statistics[] = {
      {"sup_minus_one_sq", [](const RunningMaxima& s, int p) { return std::pow(s.sup_minus_one, 2 * p); }},
      {"sup_l2_sq", [](const RunningMaxima& s, int p) { return std::pow(s.sup_l2, 2 * p); }},
      {"sup_J", [](const RunningMaxima& s, int p) { return std::pow(s.sup_lyapunov, p); }},
      {"sum_k_Y_h1_sq", [](const RunningMaxima& s, int p) { return std::pow(s.sum_k_y_h1_sq, p); }},
  };

  for (const auto& st : statistics)
    for (int p = 1; p <= 2; ++p) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t l = 0; l < ladder; ++l) {
        std::vector<double> vals;
        for (std::size_t m = 0; m < cfg.samples; ++m)
          if (!failed[m])
            vals.push_back(st.value(stats[l][m], p));
        const MeanSe ms = mean_se(vals);
        result.rows.push_back({l, levels[l].ops->mesh().h, cfg.T / static_cast<double>(levels[l].steps), vals.size(),
                               st.name, p, ms.mean, ms.se});
        lo = std::min(lo, ms.mean);
        hi = std::max(hi, ms.mean);
      }
      result.ratio[std::string(st.name) + ":" + std::to_string(p)] =
          lo > 0.0 ? hi / lo : (hi == lo ? 1.0 : std::numeric_limits<double>::infinity());
    }

  for (std::size_t l = 0; l < ladder; ++l)
    for (std::size_t m = 0; m < cfg.samples; ++m)
      if (!failed[m])
        result.max_mass_deviation = std::max(result.max_mass_deviation, stats[l][m].sup_mass_deviation);
  return result;
}

void write_moment_csv(std::ostream& os, const MomentStudyResult& result)
{
  os << "level,h,k,M,statistic,p,mean,stderr\n" << std::setprecision(17);
  for (const auto& r : result.rows)
    os << r.level << ',' << r.h << ',' << r.k << ',' << r.samples << ',' << r.statistic << ',' << r.p << ','
       << r.mean << ',' << r.stderr_ << '\n';
}

double holder_quotient(const std::vector<FemFunction>& path, double k, double gamma, const OperatorSet& ops)
{
  double best = 0.0;
  const std::size_t steps = path.empty() ? 0 : path.size() - 1;
  for (std::size_t sep = 1; sep <= steps; sep *= 2) {
    const double denom = std::pow(sep * k, gamma);
    for (std::size_t i = 0; i + sep <= steps; ++i)
      best = std::max(best, l2_norm(path[i + sep] - path[i], ops) / denom);
  }
  return best;
}

HolderResult holder_probe(const StudyConfig& cfg)
{
  const std::size_t refinements = std::max<std::size_t>(1, cfg.holder_refinements);
  NoiseSpec noise = cfg.noise;
  noise.modes = cfg.noise_modes(cfg.n);
  const auto basis = build_basis(cfg.domain, std::max(noise.modes, max_x0_index(cfg) + 1));
  const auto ops = assemble(make_mesh(cfg.domain, cfg.n), cfg.quad_degree);
  const NoiseProjector projector(noise, *basis, *ops);
  const FemFunction x0 = project_l2(x0_field(cfg, basis), *ops);
  const Nonlinearity potential = cfg.nonlinearity();
  const std::size_t fine_steps = cfg.N << (refinements - 1);

  // quotient[r][g][m]
  std::vector<std::vector<std::vector<double>>> q(
      refinements, std::vector<std::vector<double>>(cfg.holder_gammas.size(), std::vector<double>(cfg.samples)));
  parallel_for(cfg.samples, cfg.workers, [&](std::size_t m) {
    const WienerIncrements inc = sample_increments(noise, cfg.T, fine_steps, hierarchy_factors(refinements), m);
    for (std::size_t r = 0; r < refinements; ++r) {
      const int factor = 1 << (refinements - 1 - r);
      StepperConfig sc = cfg.stepper;
      sc.k = inc.step(factor);
      Stepper stepper(ops, potential, sc);
      const auto traj = run_trajectory(stepper, x0, projector.apply_all(inc.level(factor)), {StoragePolicy::full, 0, false});
      std::vector<FemFunction> path;
      for (const auto& s : traj.states)
        path.push_back(s.x);
      for (std::size_t g = 0; g < cfg.holder_gammas.size(); ++g)
        q[r][g][m] = holder_quotient(path, sc.k, cfg.holder_gammas[g], *ops);
    }
  });

  HolderResult result;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t r = 0; r < refinements; ++r)
    for (std::size_t g = 0; g < cfg.holder_gammas.size(); ++g) {
      const double avg = mean_se(q[r][g]).mean;
      result.rows.push_back({r, cfg.T / static_cast<double>(cfg.N << r), cfg.holder_gammas[g], avg});
      if (g == 0) {
        lo = std::min(lo, avg);
        hi = std::max(hi, avg);
      }
    }
  result.stability_ratio = lo > 0.0 ? hi / lo : (hi == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return result;
}

void write_holder_csv(std::ostream& os, const HolderResult& result)
{
  os << "refinement,k,gamma,quotient\n" << std::setprecision(17);
  for (const auto& r : result.rows)
    os << r.refinement << ',' << r.k << ',' << r.gamma << ',' << r.quotient << '\n';
}

Trajectory single_run(const StudyConfig& cfg)
{
  NoiseSpec noise = cfg.noise;
  noise.modes = cfg.noise_modes(cfg.n);
  const auto basis = build_basis(cfg.domain, std::max(noise.modes, max_x0_index(cfg) + 1));
  const auto ops = assemble(make_mesh(cfg.domain, cfg.n), cfg.quad_degree);
  const NoiseProjector projector(noise, *basis, *ops);
  StepperConfig sc = cfg.stepper;
  sc.k = cfg.T / static_cast<double>(cfg.N);
  Stepper stepper(ops, cfg.nonlinearity(), sc);
  const WienerIncrements inc = sample_increments(noise, cfg.T, cfg.N, {1}, 0);
  return run_trajectory(stepper, project_l2(x0_field(cfg, basis), *ops), projector.apply_all(inc.level(1)),
                        {StoragePolicy::strided, 0, false});
}

}  // namespace chc
