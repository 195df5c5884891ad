#pragma once

#include "shapeopt/mesh.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace shapeopt {

// Plain-text mesh format:
//   vertices N        then N lines "x y"
//   cells M           then M lines "i j k"
//   boundary K        then K lines "i j marker"
// with marker in {inflow, outflow, wall, obstacle}. Lines starting with '#'
// are comments.
void write_mesh_text(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh_text(std::istream& is);
void write_mesh_file(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_mesh_file(const std::filesystem::path& path);

/// Nodal field for VTK output: 1 (scalar) or 2 (vector) components per vertex.
struct VtkField {
  std::string name;
  int components = 1;
  std::vector<double> values;
};

/// VTK legacy ASCII unstructured grid with point data.
void write_vtk(std::ostream& os, const TriMesh& mesh, const std::vector<VtkField>& fields = {});
void write_vtk_file(const std::filesystem::path& path, const TriMesh& mesh,
                    const std::vector<VtkField>& fields = {});

}  // namespace shapeopt
