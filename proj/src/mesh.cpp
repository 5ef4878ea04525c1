// ============================================================================
// mesh.cpp
// ============================================================================
#include "chc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace chc {

namespace {

double distance(const Point& a, const Point& b)
{
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double measured_h(const Mesh& mesh)
{
  double h = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    h = std::max(h, mesh.cell_diameter(c));
  return h;
}

}  // namespace

double Mesh::cell_measure(std::size_t c) const
{
  const auto& cell = cells.at(c);
  if (dim == 1)
    return std::abs(vertices[cell[1]][0] - vertices[cell[0]][0]);
  const Point& a = vertices[cell[0]];
  const Point& b = vertices[cell[1]];
  const Point& p = vertices[cell[2]];
  return 0.5 * std::abs((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]));
}

double Mesh::cell_diameter(std::size_t c) const
{
  const auto& cell = cells.at(c);
  if (dim == 1)
    return distance(vertices[cell[0]], vertices[cell[1]]);
  return std::max({distance(vertices[cell[0]], vertices[cell[1]]),
                   distance(vertices[cell[1]], vertices[cell[2]]),
                   distance(vertices[cell[0]], vertices[cell[2]])});
}

double Mesh::measure() const
{
  double s = 0.0;
  for (std::size_t c = 0; c < num_cells(); ++c)
    s += cell_measure(c);
  return s;
}

Mesh build_interval_mesh(double length, int n)
{
  if (n < 2)
    throw std::invalid_argument("interval mesh needs at least 2 cells");
  if (!(length > 0.0))
    throw std::invalid_argument("interval length must be positive");
  Mesh mesh;
  mesh.dim = 1;
  mesh.vertices.reserve(n + 1);
  for (int i = 0; i <= n; ++i)
    mesh.vertices.push_back({length * i / n, 0.0});
  // the last vertex is set exactly so that the domain length is not perturbed
  mesh.vertices.back()[0] = length;
  for (int i = 0; i < n; ++i)
    mesh.cells.push_back({i, i + 1, -1});
  mesh.h = measured_h(mesh);
  return mesh;
}

Mesh build_rectangle_mesh(double lx, double ly, int nx, int ny)
{
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("rectangle mesh needs at least 2 cells per direction");
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("rectangle side lengths must be positive");
  Mesh mesh;
  mesh.dim = 2;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.push_back({lx * i / nx, ly * j / ny});
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.cells.push_back({v00, v10, v11});
        mesh.cells.push_back({v00, v11, v01});
      } else {
        mesh.cells.push_back({v00, v10, v01});
        mesh.cells.push_back({v10, v11, v01});
      }
    }
  mesh.h = measured_h(mesh);
  return mesh;
}

void write_mesh(std::ostream& os, const Mesh& mesh)
{
  os << mesh.dim << ' ' << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices)
    os << v[0] << ' ' << v[1] << '\n';
  for (const auto& c : mesh.cells) {
    for (int k = 0; k < mesh.vertices_per_cell(); ++k)
      os << (k ? " " : "") << c[k];
    os << '\n';
  }
}

Mesh read_mesh(std::istream& is)
{
  Mesh mesh;
  std::size_t nv = 0, nc = 0;
  if (!(is >> mesh.dim >> nv >> nc) || (mesh.dim != 1 && mesh.dim != 2))
    throw std::runtime_error("read_mesh: bad header");
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices)
    if (!(is >> v[0] >> v[1]))
      throw std::runtime_error("read_mesh: truncated vertex list");
  mesh.cells.resize(nc, {-1, -1, -1});
  for (auto& c : mesh.cells)
    for (int k = 0; k < mesh.vertices_per_cell(); ++k) {
      if (!(is >> c[k]))
        throw std::runtime_error("read_mesh: truncated cell list");
      if (c[k] < 0 || static_cast<std::size_t>(c[k]) >= nv)
        throw std::runtime_error("read_mesh: vertex index out of range");
    }
  mesh.h = measured_h(mesh);
  return mesh;
}

}  // namespace chc
