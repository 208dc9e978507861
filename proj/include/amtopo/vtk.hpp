// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "amtopo/mesh.hpp"

namespace amtopo {

/// Named nodal field: one row per component. Single-row fields are
/// written as SCALARS, multi-row fields as VECTORS padded to three
/// components.
struct VtkField {
  std::string name;
  Matrix values;  // comps x n_nodes
};

/// Legacy ASCII unstructured-grid writer. Output is byte-stable for
/// identical inputs.
void write_vtk(const Mesh& mesh, const std::vector<VtkField>& fields, const std::string& path,
               const std::string& title = "amtopo output");

struct VtkData {
  Index n_points = 0;
  Matrix points;  // 3 x n
  std::map<std::string, Matrix> point_data;
};

/// Minimal reader for files produced by write_vtk (POINTS, POINT_DATA
/// with SCALARS and VECTORS).
VtkData read_vtk(const std::string& path);

/// Rasterizes nodal material fractions of a 2d structured mesh into an
/// RGB heatmap, one pixel per node (void white, phases colored). The
/// encoder emits uncompressed PNG; no imaging dependency is involved.
void write_png_heatmap(const Mesh& mesh, const Eigen::Ref<const Matrix>& fractions,
                       const std::string& path);

}  // namespace amtopo
