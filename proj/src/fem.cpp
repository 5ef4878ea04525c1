// ============================================================================
// fem.cpp - P1 assembly and the operators built on it
// ============================================================================
#include "chc/fem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <string>

namespace chc {

namespace {

using Triplet = Eigen::Triplet<double>;

// Gauss points per cell (and per direction on triangles) for a cosine whose
// phase advances by theta across the cell.
int oscillatory_points(double theta)
{
  return 10 + static_cast<int>(std::ceil(0.8 * theta));
}

}  // namespace

OperatorSet::OperatorSet(Mesh mesh, int quad_degree) : mesh_(std::move(mesh)), quad_degree_(quad_degree)
{
  const std::size_t n = mesh_.num_vertices();
  const int nv = mesh_.vertices_per_cell();
  std::vector<Triplet> m_trip, k_trip;
  m_trip.reserve(mesh_.num_cells() * nv * nv);
  k_trip.reserve(mesh_.num_cells() * nv * nv);

  const double scale = std::pow(mesh_.h > 0.0 ? mesh_.h : 1.0, mesh_.dim);
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const auto& cell = mesh_.cells[c];
    const double meas = mesh_.cell_measure(c);
    if (!(meas > 1e-14 * scale))
      throw AssemblyError("degenerate cell " + std::to_string(c) + " (measure " + std::to_string(meas) + ")");
    measure_ += meas;

    if (mesh_.dim == 1) {
      const double mloc[2][2] = {{meas / 3.0, meas / 6.0}, {meas / 6.0, meas / 3.0}};
      const double kloc[2][2] = {{1.0 / meas, -1.0 / meas}, {-1.0 / meas, 1.0 / meas}};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          m_trip.emplace_back(cell[a], cell[b], mloc[a][b]);
          k_trip.emplace_back(cell[a], cell[b], kloc[a][b]);
        }
      continue;
    }

    double bx[3], cy[3];
    for (int a = 0; a < 3; ++a) {
      const Point& pj = mesh_.vertices[cell[(a + 1) % 3]];
      const Point& pk = mesh_.vertices[cell[(a + 2) % 3]];
      bx[a] = pj[1] - pk[1];
      cy[a] = pk[0] - pj[0];
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        m_trip.emplace_back(cell[a], cell[b], meas * (a == b ? 2.0 : 1.0) / 12.0);
        k_trip.emplace_back(cell[a], cell[b], (bx[a] * bx[b] + cy[a] * cy[b]) / (4.0 * meas));
      }
  }

  mass_.resize(n, n);
  mass_.setFromTriplets(m_trip.begin(), m_trip.end());
  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(k_trip.begin(), k_trip.end());
  integrals_ = mass_ * Eigen::VectorXd::Ones(n);

  // quadrature for the nonlinear terms
  quad_.vertices_per_cell = nv;
  std::vector<double> ref_weights;
  if (mesh_.dim == 1) {
    const SegmentRule rule = segment_rule_for_degree(quad_degree);
    quad_.points_per_cell = static_cast<int>(rule.points.size());
    for (double s : rule.points) {
      quad_.shape.push_back(1.0 - s);
      quad_.shape.push_back(s);
    }
    ref_weights = rule.weights;
  } else {
    const TriangleRule rule = triangle_rule_for_degree(quad_degree);
    quad_.points_per_cell = static_cast<int>(rule.points.size());
    for (const auto& p : rule.points) {
      quad_.shape.push_back(1.0 - p[0] - p[1]);
      quad_.shape.push_back(p[0]);
      quad_.shape.push_back(p[1]);
    }
    ref_weights = rule.weights;
  }
  quad_.weights.reserve(mesh_.num_cells() * quad_.points_per_cell);
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c)
    for (double w : ref_weights)
      quad_.weights.push_back(w * mesh_.cell_measure(c));

  mass_solver_.compute(mass_);
  if (mass_solver_.info() != Eigen::Success)
    throw AssemblyError("mass matrix factorization failed");

  std::vector<Triplet> a_trip;
  a_trip.reserve(stiffness_.nonZeros() + 2 * n);
  for (int k = 0; k < stiffness_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(stiffness_, k); it; ++it)
      a_trip.emplace_back(it.row(), it.col(), it.value());
  for (std::size_t i = 0; i < n; ++i) {
    a_trip.emplace_back(i, n, integrals_[i]);
    a_trip.emplace_back(n, i, integrals_[i]);
  }
  SparseMatrix augmented(n + 1, n + 1);
  augmented.setFromTriplets(a_trip.begin(), a_trip.end());
  constrained_solver_.analyzePattern(augmented);
  constrained_solver_.factorize(augmented);
  if (constrained_solver_.info() != Eigen::Success)
    throw AssemblyError("constrained stiffness factorization failed");
}

FemFunction OperatorSet::solve_mass(const Eigen::VectorXd& b) const
{
  FemFunction x = mass_solver_.solve(b);
  if (mass_solver_.info() != Eigen::Success)
    throw std::runtime_error("mass solve failed");
  return x;
}

FemFunction OperatorSet::solve_stiffness(const Eigen::VectorXd& g, double mass) const
{
  const Eigen::Index n = static_cast<Eigen::Index>(size());
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = g;
  rhs[n] = mass;
  const Eigen::VectorXd sol = constrained_solver_.solve(rhs);
  if (constrained_solver_.info() != Eigen::Success)
    throw std::runtime_error("constrained stiffness solve failed");
  return sol.head(n);
}

std::shared_ptr<const OperatorSet> assemble(const Mesh& mesh, int quad_degree)
{
  return std::make_shared<const OperatorSet>(mesh, quad_degree);
}

double mean(const FemFunction& v, const OperatorSet& ops)
{
  return ops.integrals().dot(v) / ops.measure();
}

double l2_norm(const FemFunction& v, const OperatorSet& ops)
{
  return std::sqrt(std::max(0.0, v.dot(ops.mass() * v)));
}

double h1_seminorm(const FemFunction& v, const OperatorSet& ops)
{
  return std::sqrt(std::max(0.0, v.dot(ops.stiffness() * v)));
}

Eigen::MatrixXd spectral_load_matrix(const EigenBasis& basis, const OperatorSet& ops, std::size_t modes)
{
  modes = std::min(modes, basis.size());
  const Mesh& mesh = ops.mesh();
  Eigen::MatrixXd loads = Eigen::MatrixXd::Zero(ops.size(), modes);
  std::map<int, SegmentRule> seg_rules;
  std::map<int, TriangleRule> tri_rules;

  for (std::size_t j = 0; j < modes; ++j) {
    const auto w = basis.frequencies(j);
    const double norm = basis.mode(j).normalization;
    const double theta = (std::abs(w[0]) + std::abs(w[1])) * mesh.h;
    const int npts = oscillatory_points(theta);
    auto col = loads.col(j);

    if (mesh.dim == 1) {
      auto it = seg_rules.find(npts);
      if (it == seg_rules.end())
        it = seg_rules.emplace(npts, gauss_legendre(npts)).first;
      const SegmentRule& rule = it->second;
      for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const auto& cell = mesh.cells[c];
        const double x0 = mesh.vertices[cell[0]][0];
        const double x1 = mesh.vertices[cell[1]][0];
        const double len = mesh.cell_measure(c);
        double b0 = 0.0, b1 = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
          const double s = rule.points[q];
          const double val = rule.weights[q] * std::cos(w[0] * (x0 + s * (x1 - x0)));
          b0 += val * (1.0 - s);
          b1 += val * s;
        }
        col[cell[0]] += norm * len * b0;
        col[cell[1]] += norm * len * b1;
      }
      continue;
    }

    auto it = tri_rules.find(npts);
    if (it == tri_rules.end())
      it = tri_rules.emplace(npts, collapsed_triangle_rule(npts)).first;
    const TriangleRule& rule = it->second;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& cell = mesh.cells[c];
      const Point& a = mesh.vertices[cell[0]];
      const Point& p1 = mesh.vertices[cell[1]];
      const Point& p2 = mesh.vertices[cell[2]];
      const double area = mesh.cell_measure(c);
      double b[3] = {0.0, 0.0, 0.0};
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double xi = rule.points[q][0], eta = rule.points[q][1];
        const double x = a[0] + xi * (p1[0] - a[0]) + eta * (p2[0] - a[0]);
        const double y = a[1] + xi * (p1[1] - a[1]) + eta * (p2[1] - a[1]);
        const double val = rule.weights[q] * std::cos(w[0] * x) * std::cos(w[1] * y);
        b[0] += val * (1.0 - xi - eta);
        b[1] += val * xi;
        b[2] += val * eta;
      }
      for (int k = 0; k < 3; ++k)
        col[cell[k]] += norm * area * b[k];
    }
  }
  return loads;
}

namespace {

// Load of the modes with nonzero coefficients only.
Eigen::VectorXd spectral_load(const SpectralField& v, const OperatorSet& ops, bool weight_by_lambda)
{
  Eigen::Index last = v.coeffs.size() - 1;
  while (last > 0 && v.coeffs[last] == 0.0)
    --last;
  const Eigen::MatrixXd loads = spectral_load_matrix(*v.basis, ops, static_cast<std::size_t>(last + 1));
  Eigen::VectorXd weights = v.coeffs.head(last + 1);
  if (weight_by_lambda)
    for (Eigen::Index j = 0; j <= last; ++j)
      weights[j] *= v.basis->lambda(j);
  return loads * weights;
}

}  // namespace

FemFunction project_l2(const SpectralField& v, const OperatorSet& ops)
{
  return ops.solve_mass(spectral_load(v, ops, false));
}

FemFunction ritz_project(const SpectralField& v, const OperatorSet& ops)
{
  // integral grad v . grad w = lambda_j integral phi_j w for Neumann modes
  const Eigen::VectorXd g = spectral_load(v, ops, true);
  const double mass = v.coeffs[0] * std::sqrt(v.basis->domain().measure());
  return ops.solve_stiffness(g, mass);
}

double l2_distance(const FemFunction& uh, const SpectralField& v, const OperatorSet& ops)
{
  const double cross = uh.dot(spectral_load(v, ops, false));
  const double d2 = uh.dot(ops.mass() * uh) - 2.0 * cross + v.coeffs.squaredNorm();
  return std::sqrt(std::max(0.0, d2));
}

FemFunction apply_Ah(const FemFunction& v, const OperatorSet& ops)
{
  return ops.solve_mass(ops.stiffness() * v);
}

DiscreteSpectrum discrete_spectrum(const OperatorSet& ops, std::size_t max_dofs)
{
  if (ops.size() > max_dofs)
    throw std::length_error("discrete_spectrum: " + std::to_string(ops.size()) +
                            " dofs exceed the dense limit " + std::to_string(max_dofs) +
                            "; use discrete_minus_one_norm for negative norms");
  const Eigen::MatrixXd k = Eigen::MatrixXd(ops.stiffness());
  const Eigen::MatrixXd m = Eigen::MatrixXd(ops.mass());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, m, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("discrete_spectrum: generalized eigensolve failed");

  DiscreteSpectrum spec;
  spec.eigenvalues = solver.eigenvalues();
  spec.vectors = solver.eigenvectors();
  const Eigen::Index n = spec.eigenvalues.size();

  // the kernel is spanned by constants; store it exactly
  spec.eigenvalues[0] = 0.0;
  spec.vectors.col(0).setConstant(1.0 / std::sqrt(ops.measure()));
  for (Eigen::Index j = 1; j < n; ++j) {
    auto col = spec.vectors.col(j);
    Eigen::Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col[imax] < 0.0)
      col = -col;
  }
  spec.mass_vectors = ops.mass() * spec.vectors;
  return spec;
}

double discrete_norm_alpha(const FemFunction& v, double alpha, const DiscreteSpectrum& spectrum)
{
  const Eigen::VectorXd a = spectrum.coefficients(v);
  if (alpha < 0.0 && std::abs(a[0]) > 1e-10 * std::max(1.0, a.norm()))
    throw std::domain_error("negative-order discrete norm requires a zero-mean function");
  double s = 0.0;
  for (Eigen::Index j = 1; j < a.size(); ++j)
    s += std::pow(spectrum.eigenvalues[j], alpha) * a[j] * a[j];
  return std::sqrt(s);
}

double discrete_minus_one_norm(const FemFunction& v, const OperatorSet& ops)
{
  const Eigen::VectorXd mv = ops.mass() * v;
  if (std::abs(ops.integrals().dot(v)) > 1e-10 * std::max(1.0, std::sqrt(v.dot(mv))))
    throw std::domain_error("negative-order discrete norm requires a zero-mean function");
  const FemFunction y = ops.solve_stiffness(mv, 0.0);
  return std::sqrt(std::max(0.0, y.dot(mv)));
}

double h1_bound_check(const SpectralField& v, const OperatorSet& ops)
{
  if (std::abs(v.coeffs[0]) > 0.0)
    throw std::domain_error("h1_bound_check: field must have zero mean");
  const double exact = norm_alpha(v, 1.0);
  if (exact == 0.0)
    throw std::domain_error("h1_bound_check: zero field");
  return h1_seminorm(project_l2(v, ops), ops) / exact;
}

namespace {

bool barycentric(const Mesh& mesh, std::size_t c, const Point& x, double (&lam)[3])
{
  constexpr double tol = 1e-12;
  const auto& cell = mesh.cells[c];
  if (mesh.dim == 1) {
    const double x0 = mesh.vertices[cell[0]][0];
    const double x1 = mesh.vertices[cell[1]][0];
    const double s = (x[0] - x0) / (x1 - x0);
    lam[0] = 1.0 - s;
    lam[1] = s;
    lam[2] = 0.0;
    return s >= -tol && s <= 1.0 + tol;
  }
  const Point& a = mesh.vertices[cell[0]];
  const Point& b = mesh.vertices[cell[1]];
  const Point& p = mesh.vertices[cell[2]];
  const double det = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
  const double xi = ((x[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (x[1] - a[1])) / det;
  const double eta = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
  lam[0] = 1.0 - xi - eta;
  lam[1] = xi;
  lam[2] = eta;
  return xi >= -tol && eta >= -tol && lam[0] >= -tol;
}

}  // namespace

double evaluate(const FemFunction& v, const Mesh& mesh, const Point& x)
{
  double lam[3];
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    if (barycentric(mesh, c, x, lam)) {
      double s = 0.0;
      for (int a = 0; a < mesh.vertices_per_cell(); ++a)
        s += lam[a] * v[mesh.cells[c][a]];
      return s;
    }
  throw std::out_of_range("evaluate: point outside the mesh");
}

SparseMatrix transfer_matrix(const Mesh& from, const Mesh& to)
{
  std::vector<Triplet> trip;
  double lam[3];
  for (std::size_t i = 0; i < to.num_vertices(); ++i) {
    bool found = false;
    for (std::size_t c = 0; c < from.num_cells() && !found; ++c)
      if (barycentric(from, c, to.vertices[i], lam)) {
        for (int a = 0; a < from.vertices_per_cell(); ++a)
          if (lam[a] != 0.0)
            trip.emplace_back(i, from.cells[c][a], lam[a]);
        found = true;
      }
    if (!found)
      throw std::out_of_range("transfer_matrix: vertex outside the source mesh");
  }
  SparseMatrix p(to.num_vertices(), from.num_vertices());
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

FemFunction transfer(const FemFunction& v, const Mesh& from, const Mesh& to)
{
  return transfer_matrix(from, to) * v;
}

}  // namespace chc
