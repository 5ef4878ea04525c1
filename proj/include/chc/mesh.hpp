// ============================================================================
// chc/mesh.hpp - Uniform interval meshes and structured triangulations
// ============================================================================
#pragma once

#include "chc/quadrature.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace chc {

/// Conforming simplicial mesh. In 1-D cells use the first two entries of
/// each vertex tuple and the y coordinate is 0.
struct Mesh {
  int dim = 1;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  double h = 0.0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_cells() const { return cells.size(); }
  int vertices_per_cell() const { return dim + 1; }

  /// Length or area of cell c (signed area for triangles is made positive).
  double cell_measure(std::size_t c) const;
  double cell_diameter(std::size_t c) const;
  double measure() const;
};

/// Uniform n-cell mesh of [0, length]; requires n >= 2.
Mesh build_interval_mesh(double length, int n);

/// 2 nx ny triangles on [0,lx] x [0,ly]; the diagonal direction alternates
/// between neighbouring squares. Requires nx, ny >= 2.
Mesh build_rectangle_mesh(double lx, double ly, int nx, int ny);

/// Plain text: "dim nv nc", vertex lines, cell lines.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

}  // namespace chc
