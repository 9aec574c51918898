#include "porofrac/output.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace porofrac {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file: " + path);
  return f;
}

void write_vtk_header(std::ofstream& f, const Mesh& mesh) {
  f << "# vtk DataFile Version 3.0\n";
  f << "porofrac output\n";
  f << "ASCII\n";
  f << "DATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << mesh.n_nodes() << " double\n";
  for (const auto& x : mesh.nodes) {
    f << csv_double(x[0]) << " " << csv_double(x[1]) << " 0\n";
  }
  f << "CELLS " << mesh.n_elements() << " " << 5 * mesh.n_elements() << "\n";
  for (const auto& e : mesh.elements) {
    f << "4 " << e[0] << " " << e[1] << " " << e[2] << " " << e[3] << "\n";
  }
  f << "CELL_TYPES " << mesh.n_elements() << "\n";
  for (int e = 0; e < mesh.n_elements(); ++e) f << "9\n";
}

void write_subdomain(std::ofstream& f, const Mesh& mesh) {
  f << "CELL_DATA " << mesh.n_elements() << "\n";
  f << "SCALARS subdomain int 1\nLOOKUP_TABLE default\n";
  for (auto s : mesh.subdomain) f << static_cast<int>(s) << "\n";
}

}  // namespace

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vtk(const std::string& path, const Mesh& mesh, const FieldState& state) {
  auto f = open_out(path);
  write_vtk_header(f, mesh);
  f << "POINT_DATA " << mesh.n_nodes() << "\n";
  f << "VECTORS displacement double\n";
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    f << csv_double(state.u[2 * n]) << " " << csv_double(state.u[2 * n + 1]) << " 0\n";
  }
  f << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int n = 0; n < mesh.n_nodes(); ++n) f << csv_double(state.p[n]) << "\n";
  f << "SCALARS phase_field double 1\nLOOKUP_TABLE default\n";
  for (int n = 0; n < mesh.n_nodes(); ++n) f << csv_double(state.d[n]) << "\n";
  write_subdomain(f, mesh);
}

void write_vtk_mesh(const std::string& path, const Mesh& mesh) {
  auto f = open_out(path);
  write_vtk_header(f, mesh);
  write_subdomain(f, mesh);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  auto f = open_out(path);
  f << "t,max_pressure,injection_pressure,min_d,max_d,newton_iters,wall_ms\n";
  for (const auto& r : traj.rows) {
    f << csv_double(r.t) << "," << csv_double(r.max_pressure) << ","
      << csv_double(r.injection_pressure) << "," << csv_double(r.min_d) << ","
      << csv_double(r.max_d) << "," << r.newton_iters << "," << csv_double(r.wall_ms) << "\n";
  }
}

void write_gl_iteration_csv(const std::string& path, const std::vector<GLIterRow>& rows) {
  auto f = open_out(path);
  f << "t,gl_iter,interface_residual_u,interface_residual_p,relaxation\n";
  for (const auto& r : rows) {
    f << csv_double(r.t) << "," << r.iter << "," << csv_double(r.res_u) << ","
      << csv_double(r.res_p) << "," << csv_double(r.relaxation) << "\n";
  }
}

void write_timing_csv(const std::string& path, const std::vector<TimingStats>& rows) {
  auto f = open_out(path);
  f << "model,min_T,max_T,mean_T,sum_T,ratio_T\n";
  for (const auto& r : rows) {
    f << r.model << "," << csv_double(r.min_t) << "," << csv_double(r.max_t) << ","
      << csv_double(r.mean_t) << "," << csv_double(r.sum_t) << ",";
    if (r.ratio >= 0) f << csv_double(r.ratio);
    f << "\n";
  }
}

void write_manifest(const std::string& path, const std::string& mode,
                    const std::string& config_path, std::uint64_t config_hash,
                    std::uint64_t seed, bool seeded, double wall_seconds) {
  auto f = open_out(path);
  f << "{\n";
  f << "  \"tool\": \"porofrac\",\n";
  f << "  \"version\": \"0.1.0\",\n";
  f << "  \"mode\": \"" << mode << "\",\n";
  f << "  \"config\": \"" << config_path << "\",\n";
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, config_hash);
  f << "  \"config_hash\": \"" << hex << "\",\n";
  if (seeded) {
    f << "  \"seed\": " << seed << ",\n";
  }
  f << "  \"wall_seconds\": " << csv_double(wall_seconds) << "\n";
  f << "}\n";
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace porofrac
