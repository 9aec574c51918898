#include "porofrac/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace porofrac {

namespace {
constexpr double kGeomTol = 1e-12;
}

Eigen::Vector2d Mesh::element_centroid(int e) const {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (int a : elements[e]) c += nodes[a];
  return 0.25 * c;
}

double Mesh::element_area(int e) const {
  // shoelace over the quad
  double s = 0;
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector2d& a = nodes[elements[e][k]];
    const Eigen::Vector2d& b = nodes[elements[e][(k + 1) % 4]];
    s += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * s;
}

double Mesh::total_area() const {
  double s = 0;
  for (int e = 0; e < n_elements(); ++e) s += element_area(e);
  return s;
}

std::vector<int> Mesh::nodes_in(const Rect& r) const {
  std::vector<int> out;
  for (int n = 0; n < n_nodes(); ++n) {
    const auto& x = nodes[n];
    if (x[0] >= r.x0 - kGeomTol && x[0] <= r.x1 + kGeomTol && x[1] >= r.y0 - kGeomTol &&
        x[1] <= r.y1 + kGeomTol) {
      out.push_back(n);
    }
  }
  return out;
}

int Mesh::nearest_node(const Eigen::Vector2d& x) const {
  int best = 0;
  double bd = std::numeric_limits<double>::max();
  for (int n = 0; n < n_nodes(); ++n) {
    double d = (nodes[n] - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = n;
    }
  }
  return best;
}

bool Mesh::has_label(Subdomain s) const {
  return std::find(subdomain.begin(), subdomain.end(), s) != subdomain.end();
}

Mesh build_rect_mesh(const Rect& bounds, int nx, int ny, const BoundaryNames& tags) {
  if (nx < 1 || ny < 1) {
    throw InvalidGeometryError("build_rect_mesh: element counts must be >= 1");
  }
  if (!bounds.valid()) {
    throw InvalidGeometryError("build_rect_mesh: degenerate or inverted bounds");
  }

  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.bounds = bounds;
  m.dx = bounds.width() / nx;
  m.dy = bounds.height() / ny;

  m.nodes.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.nodes.emplace_back(bounds.x0 + i * m.dx, bounds.y0 + j * m.dy);
    }
  }

  m.elements.reserve(nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.elements.push_back({m.node_id(i, j), m.node_id(i + 1, j), m.node_id(i + 1, j + 1),
                            m.node_id(i, j + 1)});
    }
  }
  m.subdomain.assign(m.elements.size(), Subdomain::C);
  m.h_e = std::hypot(m.dx, m.dy);

  auto& bt = m.boundary_tags;
  for (int i = 0; i < nx; ++i) {
    bt[tags.bottom].push_back({m.node_id(i, 0), m.node_id(i + 1, 0)});
    bt[tags.top].push_back({m.node_id(i, ny), m.node_id(i + 1, ny)});
  }
  for (int j = 0; j < ny; ++j) {
    bt[tags.left].push_back({m.node_id(0, j), m.node_id(0, j + 1)});
    bt[tags.right].push_back({m.node_id(nx, j), m.node_id(nx, j + 1)});
  }
  return m;
}

namespace {

struct IndexBox {
  int i0, i1, j0, j1;  // element index ranges, half-open
  bool empty() const { return i1 <= i0 || j1 <= j0; }
};

IndexBox element_box(const Mesh& m, const Rect& region) {
  IndexBox b{m.nx, 0, m.ny, 0};
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      if (region.contains(m.element_centroid(m.elem_id(i, j)))) {
        b.i0 = std::min(b.i0, i);
        b.i1 = std::max(b.i1, i + 1);
        b.j0 = std::min(b.j0, j);
        b.j1 = std::max(b.j1, j + 1);
      }
    }
  }
  return b;
}

}  // namespace

GlobalLocalMesh mark_local_region(const Mesh& mesh, const Rect& region, int refinement) {
  if (refinement < 1) {
    throw UnsupportedConfigError("mark_local_region: refinement factor must be >= 1");
  }
  GlobalLocalMesh out;
  out.global = mesh;
  out.refinement = refinement;

  const IndexBox box = element_box(mesh, region);
  if (box.empty()) {
    return out;  // nothing to mark
  }
  if (box.i0 == 0 || box.j0 == 0 || box.i1 == mesh.nx || box.j1 == mesh.ny) {
    throw UnsupportedConfigError(
        "mark_local_region: local region touches the outer boundary; the interface must be "
        "interior");
  }

  out.region = Rect{mesh.bounds.x0 + box.i0 * mesh.dx, mesh.bounds.y0 + box.j0 * mesh.dy,
                    mesh.bounds.x0 + box.i1 * mesh.dx, mesh.bounds.y0 + box.j1 * mesh.dy};

  for (int j = box.j0; j < box.j1; ++j) {
    for (int i = box.i0; i < box.i1; ++i) {
      out.global.subdomain[mesh.elem_id(i, j)] = Subdomain::F;
    }
  }

  const int lnx = (box.i1 - box.i0) * refinement;
  const int lny = (box.j1 - box.j0) * refinement;
  out.local = build_rect_mesh(out.region, lnx, lny);
  out.local.subdomain.assign(out.local.elements.size(), Subdomain::L);

  out.iface = extract_interface(out.global, out.local, out.region);
  return out;
}

namespace {

/// Perimeter node ids of the index box [i0,i1]x[j0,j1] (node indices), walked
/// counter-clockwise from (i0,j0). Exactly 2*((i1-i0)+(j1-j0)) nodes.
std::vector<int> perimeter_nodes(const Mesh& m, int i0, int i1, int j0, int j1) {
  std::vector<int> out;
  for (int i = i0; i < i1; ++i) out.push_back(m.node_id(i, j0));
  for (int j = j0; j < j1; ++j) out.push_back(m.node_id(i1, j));
  for (int i = i1; i > i0; --i) out.push_back(m.node_id(i, j1));
  for (int j = j1; j > j0; --j) out.push_back(m.node_id(i0, j));
  return out;
}

int snapped_index(double x, double lo, double h, int n, const char* what) {
  double fi = (x - lo) / h;
  int i = static_cast<int>(std::llround(fi));
  if (i < 0 || i > n || std::abs(fi - i) * h > 1e-9) {
    throw InterfaceMismatchError(std::string("extract_interface: region edge not aligned with ") +
                                 what + " grid lines");
  }
  return i;
}

}  // namespace

Interface extract_interface(const Mesh& global, const Mesh& local, const Rect& region) {
  Interface ifc;
  if (local.n_elements() == 0) return ifc;

  const int gi0 = snapped_index(region.x0, global.bounds.x0, global.dx, global.nx, "global");
  const int gi1 = snapped_index(region.x1, global.bounds.x0, global.dx, global.nx, "global");
  const int gj0 = snapped_index(region.y0, global.bounds.y0, global.dy, global.ny, "global");
  const int gj1 = snapped_index(region.y1, global.bounds.y0, global.dy, global.ny, "global");

  ifc.gamma_g_nodes = perimeter_nodes(global, gi0, gi1, gj0, gj1);
  ifc.gamma_l_nodes = perimeter_nodes(local, 0, local.nx, 0, local.ny);

  const int ng = static_cast<int>(ifc.gamma_g_nodes.size());
  const int nl = static_cast<int>(ifc.gamma_l_nodes.size());
  if (ng == 0 || nl % ng != 0) {
    throw InterfaceMismatchError("extract_interface: local interface is not a refinement of the "
                                 "global one");
  }
  const int r = nl / ng;

  for (int k = 0; k < ng; ++k) {
    ifc.gamma_g_edges.push_back({ifc.gamma_g_nodes[k], ifc.gamma_g_nodes[(k + 1) % ng]});
  }
  for (int k = 0; k < nl; ++k) {
    ifc.gamma_l_edges.push_back({ifc.gamma_l_nodes[k], ifc.gamma_l_nodes[(k + 1) % nl]});
  }

  for (const auto& e : ifc.gamma_g_edges) {
    Eigen::Vector2d t = global.nodes[e[1]] - global.nodes[e[0]];
    t.normalize();
    ifc.edge_normals.emplace_back(t[1], -t[0]);  // ccw walk => this points out of B_L
  }

  // local nodes sit on global edges at fractions k/r; assemble the linear map
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < nl; ++k) {
    const int seg = k / r;
    const int frac = k % r;
    const double s = static_cast<double>(frac) / r;
    const int ga = seg;
    const int gb = (seg + 1) % ng;
    const Eigen::Vector2d expect = (1.0 - s) * global.nodes[ifc.gamma_g_nodes[ga]] +
                                   s * global.nodes[ifc.gamma_g_nodes[gb]];
    if ((expect - local.nodes[ifc.gamma_l_nodes[k]]).norm() > 1e-12) {
      throw InterfaceMismatchError("extract_interface: Gamma_L node off its host Gamma_G edge "
                                   "beyond 1e-12 m");
    }
    if (s == 0.0) {
      trips.emplace_back(k, ga, 1.0);
    } else {
      trips.emplace_back(k, ga, 1.0 - s);
      trips.emplace_back(k, gb, s);
    }
  }
  ifc.transfer.resize(nl, ng);
  ifc.transfer.setFromTriplets(trips.begin(), trips.end());
  return ifc;
}

double polyline_length(const Mesh& mesh, const std::vector<std::array<int, 2>>& edges) {
  double s = 0;
  for (const auto& e : edges) s += (mesh.nodes[e[1]] - mesh.nodes[e[0]]).norm();
  return s;
}

}  // namespace porofrac
