// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "amtopo/types.hpp"

namespace amtopo {

/// Axis-aligned box given by per-axis [lo, hi] ranges. Degenerate ranges
/// (lo == hi) select faces, edges or points.
struct Box {
  Vector lo;
  Vector hi;

  bool contains(const Eigen::Ref<const Vector>& x, double tol) const;
};

/// Structured box mesh description: extents l_1..l_d, cells per axis,
/// number of construction layers M along the build axis.
struct MeshSpec {
  Vector extents;         // d box lengths; extents[build_axis] = H
  IntVector divisions;    // cells per axis
  int layers = 1;         // M
  int build_axis = -1;    // defaults to the last axis

  int dim() const { return static_cast<int>(extents.size()); }
  int axis() const { return build_axis < 0 ? dim() - 1 : build_axis; }
  double height() const { return extents[axis()]; }
  double layer_thickness() const { return height() / layers; }

  /// Throws ConfigError unless extents/divisions are positive, M >= 1 and
  /// divisions along the build axis are an integer multiple of M.
  void validate() const;
};

/// Where the boundary tags live, as axis-aligned coordinate ranges.
struct BoundaryRules {
  std::vector<Box> dirichlet;  // structure fixed here (final-use system)
  std::vector<Box> neumann;    // surface traction support
  std::vector<Box> plate;      // building plate; empty = whole bottom face
};

struct BoundaryFacet {
  std::array<int, 3> v{{-1, -1, -1}};  // vertex ids, v[2] unused in 2d
  double measure = 0.0;                // length (2d) or area (3d)
};

/// Node and element index sets of the sub-box up to height k*delta,
/// together with the plate nodes acting as the Dirichlet set there.
struct SliceIndex {
  int layer = 0;
  std::vector<int> nodes;
  std::vector<int> elements;
  std::vector<int> plate_nodes;
};

/// Uniform simplicial triangulation of a box: Friedrich-Keller in 2d, the
/// Kuhn 6-tetrahedra split of every cube in 3d. Immutable after build;
/// safe for shared concurrent reads.
struct Mesh {
  MeshSpec spec;
  int dim = 0;
  Matrix nodes;            // dim x n_nodes
  IntMatrix elements;      // (dim+1) x n_elements
  IntVector element_class; // per-element shape class (gradient table index)
  std::vector<Matrix> class_gradients;  // per class: dim x (dim+1), columns = grad N_a
  double element_volume = 0.0;          // identical for all elements
  Vector lumped_mass;      // integral of each nodal hat function

  std::vector<int> dirichlet_nodes;
  std::vector<int> plate_nodes;
  std::vector<BoundaryFacet> neumann_facets;

  Index n_nodes() const { return nodes.cols(); }
  Index n_elements() const { return elements.cols(); }
  double domain_volume() const { return element_volume * static_cast<double>(n_elements()); }
  double plate_area() const;  // |Omega_B|, measure of the build-plate cross-section

  const Matrix& gradients(Index e) const { return class_gradients[element_class[e]]; }
};

/// Builds the structured mesh and applies the boundary tags.
Mesh build_mesh(const MeshSpec& spec, const BoundaryRules& rules);

/// Index sets of the sub-box up to height k*delta (k = 1..M gives the
/// nested family; k = M covers the full mesh).
SliceIndex slice(const Mesh& mesh, int k, int layers);

/// Evaluates a piecewise-linear nodal field (rows = components) at an
/// arbitrary point of the box.
Vector interpolate_at(const Mesh& mesh, const Eigen::Ref<const Matrix>& nodal,
                      const Eigen::Ref<const Vector>& point);

/// Evaluates the coarse nodal field at every node of `fine`. The meshes
/// must share the same box; resolutions may differ arbitrarily.
Matrix interpolate_field(const Mesh& coarse, const Eigen::Ref<const Matrix>& nodal,
                         const Mesh& fine);

/// Piecewise-linear prolongation onto the uniform refinement (every mesh
/// width halved). Throws ConfigError if the meshes are not in that relation.
Matrix prolongate(const Eigen::Ref<const Matrix>& coarse_field, const Mesh& coarse,
                  const Mesh& fine);

/// P1 stiffness of (grad a, grad b), one scalar unknown per node.
SparseMatrix scalar_stiffness(const Mesh& mesh);

/// P1 mass matrix of (a, b) with exact quadrature.
SparseMatrix consistent_mass(const Mesh& mesh);

}  // namespace amtopo
