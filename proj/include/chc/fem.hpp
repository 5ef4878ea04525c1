// ============================================================================
// chc/fem.hpp - P1 finite elements: mass/stiffness assembly, the discrete
// Laplacian A_h = M^{-1} K, L2 and Ritz projectors, discrete spectrum
// ============================================================================
#pragma once

#include "chc/mesh.hpp"
#include "chc/spectral_domain.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>
#include <string>

namespace chc {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Nodal coefficients in the hat-function basis.
using FemFunction = Eigen::VectorXd;

class AssemblyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Quadrature points of every cell with hat-function values and physical
/// weights (reference weight times cell measure).
struct CellQuadrature {
  int points_per_cell = 0;
  int vertices_per_cell = 0;
  std::vector<double> shape;    // [q * vertices_per_cell + a]
  std::vector<double> weights;  // [c * points_per_cell + q]
};

/// Assembled M and K of one mesh plus cached factorizations. Immutable after
/// construction; concurrent const use is safe.
class OperatorSet {
public:
  OperatorSet(Mesh mesh, int quad_degree);
  OperatorSet(const OperatorSet&) = delete;
  OperatorSet& operator=(const OperatorSet&) = delete;

  const Mesh& mesh() const { return mesh_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  std::size_t size() const { return mesh_.num_vertices(); }
  double measure() const { return measure_; }
  int quad_degree() const { return quad_degree_; }
  const CellQuadrature& quadrature() const { return quad_; }

  /// Column integrals of the hats, M * 1.
  const Eigen::VectorXd& integrals() const { return integrals_; }

  /// M^{-1} b.
  FemFunction solve_mass(const Eigen::VectorXd& b) const;

  /// Solves K c = g subject to integrals . c = mass through the augmented
  /// (Lagrange multiplier) system.
  FemFunction solve_stiffness(const Eigen::VectorXd& g, double mass) const;

  /// sum_q w g(X(x_q)) over every cell; g is a scalar function.
  template <class G>
  double integrate_composite(const FemFunction& x, G&& g) const;

  /// b_i = integral g(X) phi_i.
  template <class G>
  Eigen::VectorXd load_composite(const FemFunction& x, G&& g) const;

  /// B_il = integral g(X) phi_i phi_l, same sparsity pattern as M.
  template <class G>
  SparseMatrix weighted_mass(const FemFunction& x, G&& g) const;

private:
  Mesh mesh_;
  int quad_degree_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  Eigen::VectorXd integrals_;
  double measure_ = 0.0;
  CellQuadrature quad_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_solver_;
  Eigen::SparseLU<SparseMatrix> constrained_solver_;
};

/// Assembles M and K with exact P1 element matrices; throws AssemblyError
/// naming the first degenerate cell.
std::shared_ptr<const OperatorSet> assemble(const Mesh& mesh, int quad_degree = 4);

double mean(const FemFunction& v, const OperatorSet& ops);
double l2_norm(const FemFunction& v, const OperatorSet& ops);
double h1_seminorm(const FemFunction& v, const OperatorSet& ops);

/// Load vector b_i = integral v phi_i for a pointwise-evaluable v.
template <class Field>
Eigen::VectorXd load_vector(Field&& v, const OperatorSet& ops, int degree);

/// P_h v for a pointwise-evaluable v with a quadrature of the given degree.
template <class Field>
FemFunction project_l2(Field&& v, const OperatorSet& ops, int degree)
{
  return ops.solve_mass(load_vector(std::forward<Field>(v), ops, degree));
}

/// Columns b_j = (integral phi_j phi_i)_i for j < modes, each integrated with a
/// Gauss rule refined to the frequency of phi_j.
Eigen::MatrixXd spectral_load_matrix(const EigenBasis& basis, const OperatorSet& ops,
                                     std::size_t modes);

/// P_h v of a truncated spectral field.
FemFunction project_l2(const SpectralField& v, const OperatorSet& ops);

/// R_h v = R_h P v + (I - P) v.
FemFunction ritz_project(const SpectralField& v, const OperatorSet& ops);

/// ||u_h - v|| evaluated exactly up to the spectral truncation of v.
double l2_distance(const FemFunction& uh, const SpectralField& v, const OperatorSet& ops);

/// M^{-1} K v.
FemFunction apply_Ah(const FemFunction& v, const OperatorSet& ops);

/// Generalized eigenpairs K phi = lambda M phi with M-orthonormal vectors.
struct DiscreteSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending, eigenvalues[0] = 0
  Eigen::MatrixXd vectors;       // column j is phi_{h,j}
  Eigen::MatrixXd mass_vectors;  // M * vectors; coefficients are mass_vectors^T v

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  Eigen::VectorXd coefficients(const FemFunction& v) const { return mass_vectors.transpose() * v; }
};

inline constexpr std::size_t dense_spectrum_limit = 4000;

/// Dense generalized eigensolve; throws std::length_error above max_dofs
/// (use discrete_minus_one_norm instead).
DiscreteSpectrum discrete_spectrum(const OperatorSet& ops, std::size_t max_dofs = dense_spectrum_limit);

/// |v|_{alpha,h} = ||A_h^{alpha/2} v||; for alpha < 0 v must have zero mean.
double discrete_norm_alpha(const FemFunction& v, double alpha, const DiscreteSpectrum& spectrum);

/// |v|_{-1,h} without the eigensolve: solves K y = M v on the zero-mean space.
double discrete_minus_one_norm(const FemFunction& v, const OperatorSet& ops);

/// |P_h v|_1 / |v|_1 for a zero-mean v.
double h1_bound_check(const SpectralField& v, const OperatorSet& ops);

/// Value of a P1 function at x.
double evaluate(const FemFunction& v, const Mesh& mesh, const Point& x);

/// Interpolates a P1 function onto the vertices of another mesh. Exact when
/// the fine mesh is a refinement of the coarse one.
FemFunction transfer(const FemFunction& v, const Mesh& from, const Mesh& to);

/// Sparse interpolation operator used by transfer().
SparseMatrix transfer_matrix(const Mesh& from, const Mesh& to);

// ---------------------------------------------------------------------------
// template implementations

template <class G>
double OperatorSet::integrate_composite(const FemFunction& x, G&& g) const
{
  const int nq = quad_.points_per_cell;
  const int nv = quad_.vertices_per_cell;
  double total = 0.0;
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const auto& cell = mesh_.cells[c];
    for (int q = 0; q < nq; ++q) {
      double xq = 0.0;
      for (int a = 0; a < nv; ++a)
        xq += quad_.shape[q * nv + a] * x[cell[a]];
      total += quad_.weights[c * nq + q] * g(xq);
    }
  }
  return total;
}

template <class G>
Eigen::VectorXd OperatorSet::load_composite(const FemFunction& x, G&& g) const
{
  const int nq = quad_.points_per_cell;
  const int nv = quad_.vertices_per_cell;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(size());
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const auto& cell = mesh_.cells[c];
    for (int q = 0; q < nq; ++q) {
      double xq = 0.0;
      for (int a = 0; a < nv; ++a)
        xq += quad_.shape[q * nv + a] * x[cell[a]];
      const double wg = quad_.weights[c * nq + q] * g(xq);
      for (int a = 0; a < nv; ++a)
        b[cell[a]] += wg * quad_.shape[q * nv + a];
    }
  }
  return b;
}

template <class G>
SparseMatrix OperatorSet::weighted_mass(const FemFunction& x, G&& g) const
{
  const int nq = quad_.points_per_cell;
  const int nv = quad_.vertices_per_cell;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh_.num_cells() * nv * nv);
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const auto& cell = mesh_.cells[c];
    double local[3][3] = {};
    for (int q = 0; q < nq; ++q) {
      double xq = 0.0;
      for (int a = 0; a < nv; ++a)
        xq += quad_.shape[q * nv + a] * x[cell[a]];
      const double wg = quad_.weights[c * nq + q] * g(xq);
      for (int a = 0; a < nv; ++a)
        for (int b = 0; b < nv; ++b)
          local[a][b] += wg * quad_.shape[q * nv + a] * quad_.shape[q * nv + b];
    }
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b)
        triplets.emplace_back(cell[a], cell[b], local[a][b]);
  }
  SparseMatrix out(size(), size());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

template <class Field>
Eigen::VectorXd load_vector(Field&& v, const OperatorSet& ops, int degree)
{
  const Mesh& mesh = ops.mesh();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ops.size());
  if (mesh.dim == 1) {
    const SegmentRule rule = segment_rule_for_degree(degree);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& cell = mesh.cells[c];
      const double x0 = mesh.vertices[cell[0]][0];
      const double x1 = mesh.vertices[cell[1]][0];
      const double len = mesh.cell_measure(c);
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double s = rule.points[q];
        const double val = rule.weights[q] * len * v(Point{x0 + s * (x1 - x0), 0.0});
        b[cell[0]] += val * (1.0 - s);
        b[cell[1]] += val * s;
      }
    }
    return b;
  }
  const TriangleRule rule = triangle_rule_for_degree(degree);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cells[c];
    const Point& a = mesh.vertices[cell[0]];
    const Point& p1 = mesh.vertices[cell[1]];
    const Point& p2 = mesh.vertices[cell[2]];
    const double area = mesh.cell_measure(c);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double xi = rule.points[q][0], eta = rule.points[q][1];
      const Point x{a[0] + xi * (p1[0] - a[0]) + eta * (p2[0] - a[0]),
                    a[1] + xi * (p1[1] - a[1]) + eta * (p2[1] - a[1])};
      const double val = rule.weights[q] * area * v(x);
      b[cell[0]] += val * (1.0 - xi - eta);
      b[cell[1]] += val * xi;
      b[cell[2]] += val * eta;
    }
  }
  return b;
}

}  // namespace chc
