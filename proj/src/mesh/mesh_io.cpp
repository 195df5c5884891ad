#include "shapeopt/mesh_io.hpp"

#include "shapeopt/errors.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace shapeopt {

void write_mesh_text(std::ostream& os, const TriMesh& mesh) {
  os << std::setprecision(17);
  os << "vertices " << mesh.num_vertices() << '\n';
  for (const auto& p : mesh.vertices()) os << p.x() << ' ' << p.y() << '\n';
  os << "cells " << mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells()) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  os << "boundary " << mesh.boundary_edges().size() << '\n';
  for (const auto& e : mesh.boundary_edges()) os << e.v0 << ' ' << e.v1 << ' ' << to_string(e.marker) << '\n';
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::istringstream next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return std::istringstream(line);
    }
    throw InputError("mesh file: unexpected end of input after line " + std::to_string(line_no_));
  }

  std::size_t header(const std::string& keyword) {
    auto ss = next();
    std::string word;
    long long count = -1;
    if (!(ss >> word >> count) || word != keyword || count < 0) {
      throw InputError("mesh file line " + std::to_string(line_no_) + ": expected '" + keyword + " <count>'");
    }
    return static_cast<std::size_t>(count);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("mesh file line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& is_;
  std::size_t line_no_ = 0;
};

}  // namespace

TriMesh read_mesh_text(std::istream& is) {
  LineReader reader(is);
  std::vector<Vec2> vertices(reader.header("vertices"));
  for (auto& p : vertices) {
    auto ss = reader.next();
    if (!(ss >> p.x() >> p.y())) reader.fail("expected 'x y'");
  }
  std::vector<Cell> cells(reader.header("cells"));
  for (auto& c : cells) {
    auto ss = reader.next();
    if (!(ss >> c[0] >> c[1] >> c[2])) reader.fail("expected 'i j k'");
  }
  std::vector<BoundaryEdge> boundary(reader.header("boundary"));
  for (auto& e : boundary) {
    auto ss = reader.next();
    std::string marker;
    if (!(ss >> e.v0 >> e.v1 >> marker)) reader.fail("expected 'i j marker'");
    try {
      e.marker = parse_marker(marker);
    } catch (const InputError& err) {
      reader.fail(err.what());
    }
  }
  return TriMesh(std::move(vertices), std::move(cells), std::move(boundary));
}

void write_mesh_file(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  write_mesh_text(os, mesh);
}

TriMesh read_mesh_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open mesh file " + path.string());
  return read_mesh_text(is);
}

void write_vtk(std::ostream& os, const TriMesh& mesh, const std::vector<VtkField>& fields) {
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\nshapeopt mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) os << p.x() << ' ' << p.y() << " 0\n";
  os << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells()) os << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  os << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) os << "5\n";
  if (fields.empty()) return;
  os << "POINT_DATA " << mesh.num_vertices() << '\n';
  for (const auto& f : fields) {
    if ((f.components != 1 && f.components != 2) ||
        f.values.size() != static_cast<std::size_t>(f.components * mesh.num_vertices())) {
      throw InputError("VTK field '" + f.name + "' does not match the mesh");
    }
    if (f.components == 1) {
      os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) os << v << '\n';
    } else {
      os << "VECTORS " << f.name << " double\n";
      for (int v = 0; v < mesh.num_vertices(); ++v) os << f.values[2 * v] << ' ' << f.values[2 * v + 1] << " 0\n";
    }
  }
}

void write_vtk_file(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<VtkField>& fields) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  write_vtk(os, mesh, fields);
}

}  // namespace shapeopt
