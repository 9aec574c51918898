#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "porofrac/common.hpp"

namespace porofrac {

/// Axis-aligned rectangle in material coordinates (m).
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool valid() const { return x1 > x0 && y1 > y0; }
  bool contains(const Eigen::Vector2d& x) const {
    return x[0] >= x0 && x[0] <= x1 && x[1] >= y0 && x[1] <= y1;
  }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  Eigen::Vector2d center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

enum class Subdomain : std::uint8_t {
  C,  ///< complement (coarse) part of the global mesh
  L,  ///< local fine mesh
  F,  ///< fictitious prolongation of C over the local region
};

/// Names used for the four outer boundary edge sets.
struct BoundaryNames {
  std::string left = "left";
  std::string right = "right";
  std::string bottom = "bottom";
  std::string top = "top";
};

/// Structured quadrilateral mesh of a rectangle. Immutable after construction;
/// safe to share across concurrent forward evaluations.
struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 4>> elements;  // counter-clockwise node ids
  std::vector<Subdomain> subdomain;          // one label per element
  std::map<std::string, std::vector<std::array<int, 2>>> boundary_tags;
  double h_e = 0;  // max element diagonal (m)

  // structured-grid metadata (all meshes in v1 are structured)
  int nx = 0, ny = 0;
  Rect bounds;
  double dx = 0, dy = 0;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int elem_id(int i, int j) const { return j * nx + i; }

  Eigen::Vector2d element_centroid(int e) const;
  double element_area(int e) const;
  double total_area() const;

  /// Node ids whose coordinates lie inside `r` (inclusive, 1e-12 tolerance).
  std::vector<int> nodes_in(const Rect& r) const;
  /// Node id closest to `x`.
  int nearest_node(const Eigen::Vector2d& x) const;
  /// True if the element touches at least one element with the given label.
  bool has_label(Subdomain s) const;
};

/// Coupling interface Gamma between the complement and the local region.
/// Node orderings walk the rectangle perimeter counter-clockwise starting at
/// the lower-left corner; local nodes are nested on global edges.
struct Interface {
  std::vector<int> gamma_g_nodes;  // on the global mesh
  std::vector<int> gamma_l_nodes;  // on the local mesh
  std::vector<std::array<int, 2>> gamma_g_edges;
  std::vector<std::array<int, 2>> gamma_l_edges;
  std::vector<Eigen::Vector2d> edge_normals;  // per global edge, outward from B_L
  /// Linear interpolation: values at gamma_l_nodes = T * values at gamma_g_nodes.
  Eigen::SparseMatrix<double> transfer;

  bool empty() const { return gamma_g_nodes.empty(); }
  int n_global() const { return static_cast<int>(gamma_g_nodes.size()); }
  int n_local() const { return static_cast<int>(gamma_l_nodes.size()); }
};

/// Global/local mesh pair produced by mark_local_region.
struct GlobalLocalMesh {
  Mesh global;      // subdomain labels C and F
  Mesh local;       // label L, refined by an integer factor
  Interface iface;  // empty when no region was marked
  Rect region;      // snapped local region
  int refinement = 1;
};

Mesh build_rect_mesh(const Rect& bounds, int nx, int ny, const BoundaryNames& tags = {});

/// Label the elements of `mesh` inside `region` as F and build the refined
/// local mesh plus the interface. An empty / non-overlapping region returns
/// the mesh unchanged with an empty interface. The region must not touch the
/// outer boundary.
GlobalLocalMesh mark_local_region(const Mesh& mesh, const Rect& region, int refinement = 1);

/// Recompute the interface descriptor for a marked global/local pair.
Interface extract_interface(const Mesh& global, const Mesh& local, const Rect& region);

double polyline_length(const Mesh& mesh, const std::vector<std::array<int, 2>>& edges);

}  // namespace porofrac
