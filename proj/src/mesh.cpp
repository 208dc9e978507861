// SPDX-License-Identifier: Apache-2.0
#include "amtopo/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amtopo {

namespace {

constexpr double kGeomTol = 1e-12;

std::vector<std::vector<int>> axis_permutations(int d) {
  std::vector<int> axes(d);
  std::iota(axes.begin(), axes.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(axes);
  } while (std::next_permutation(axes.begin(), axes.end()));
  return perms;
}

/// Vertex offsets (in cell units) of the Kuhn simplex belonging to one
/// axis permutation: walk from the cell corner to the opposite corner,
/// advancing one axis at a time.
IntMatrix kuhn_offsets(const std::vector<int>& perm) {
  const int d = static_cast<int>(perm.size());
  IntMatrix off = IntMatrix::Zero(d, d + 1);
  for (int step = 0; step < d; ++step) {
    off.col(step + 1) = off.col(step);
    off(perm[step], step + 1) = 1;
  }
  return off;
}

}  // namespace

bool Box::contains(const Eigen::Ref<const Vector>& x, double tol) const {
  for (Index a = 0; a < x.size(); ++a) {
    if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
  }
  return true;
}

void MeshSpec::validate() const {
  const int d = dim();
  if (d < 2 || d > 3) throw ConfigError("mesh: dimension must be 2 or 3");
  if (divisions.size() != d) throw ConfigError("mesh: divisions/extents size mismatch");
  for (int a = 0; a < d; ++a) {
    if (!(extents[a] > 0.0)) throw ConfigError("mesh: extents must be positive");
    if (divisions[a] < 1) throw ConfigError("mesh: divisions must be >= 1");
  }
  if (layers < 1) throw ConfigError("mesh: layer count must be >= 1");
  const int b = axis();
  if (b < 0 || b >= d) throw ConfigError("mesh: build axis out of range");
  if (divisions[b] % layers != 0)
    throw ConfigError("mesh: divisions along the build axis must be a multiple of the layer count");
}

double Mesh::plate_area() const {
  double area = 1.0;
  for (int a = 0; a < dim; ++a)
    if (a != spec.axis()) area *= spec.extents[a];
  return area;
}

Mesh build_mesh(const MeshSpec& spec, const BoundaryRules& rules) {
  spec.validate();
  const int d = spec.dim();
  Mesh mesh;
  mesh.spec = spec;
  mesh.dim = d;

  IntVector n = spec.divisions;
  Vector h(d);
  for (int a = 0; a < d; ++a) h[a] = spec.extents[a] / n[a];

  // node grid, x fastest
  Index n_nodes = 1;
  for (int a = 0; a < d; ++a) n_nodes *= (n[a] + 1);
  const auto node_id = [&](int i, int j, int k) {
    Index id = i + static_cast<Index>(n[0] + 1) * j;
    if (d == 3) id += static_cast<Index>(n[0] + 1) * (n[1] + 1) * k;
    return id;
  };

  mesh.nodes.resize(d, n_nodes);
  {
    const int nk = (d == 3) ? n[2] : 0;
    for (int k = 0; k <= nk; ++k)
      for (int j = 0; j <= n[1]; ++j)
        for (int i = 0; i <= n[0]; ++i) {
          const Index id = node_id(i, j, k);
          mesh.nodes(0, id) = i * h[0];
          mesh.nodes(1, id) = j * h[1];
          if (d == 3) mesh.nodes(2, id) = k * h[2];
        }
  }

  // one Kuhn simplex family per axis permutation, identical in every cell
  const auto perms = axis_permutations(d);
  std::vector<IntMatrix> offsets;
  offsets.reserve(perms.size());
  for (const auto& p : perms) offsets.push_back(kuhn_offsets(p));

  mesh.class_gradients.resize(perms.size());
  double vol = 0.0;
  for (std::size_t t = 0; t < perms.size(); ++t) {
    Matrix coords(d, d + 1);
    for (int v = 0; v <= d; ++v)
      for (int a = 0; a < d; ++a) coords(a, v) = offsets[t](a, v) * h[a];
    Matrix D(d, d);
    for (int v = 1; v <= d; ++v) D.col(v - 1) = coords.col(v) - coords.col(0);
    double det = D.determinant();
    if (det < 0.0) {  // flip to positive orientation
      offsets[t].col(d - 1).swap(offsets[t].col(d));
      for (int v = 0; v <= d; ++v)
        for (int a = 0; a < d; ++a) coords(a, v) = offsets[t](a, v) * h[a];
      for (int v = 1; v <= d; ++v) D.col(v - 1) = coords.col(v) - coords.col(0);
      det = D.determinant();
    }
    AMTOPO_REQUIRE(det > 0.0, "degenerate element");
    const double fact = (d == 2) ? 2.0 : 6.0;
    vol = det / fact;
    Matrix Dinv = D.inverse();
    Matrix grads = Matrix::Zero(d, d + 1);
    for (int v = 1; v <= d; ++v) grads.col(v) = Dinv.row(v - 1).transpose();
    grads.col(0) = -grads.rightCols(d).rowwise().sum();
    mesh.class_gradients[t] = grads;
  }
  mesh.element_volume = vol;

  Index n_cells = 1;
  for (int a = 0; a < d; ++a) n_cells *= n[a];
  const Index per_cell = static_cast<Index>(perms.size());
  mesh.elements.resize(d + 1, n_cells * per_cell);
  mesh.element_class.resize(n_cells * per_cell);

  Index e = 0;
  const int ck = (d == 3) ? n[2] : 1;
  for (int k = 0; k < ck; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i)
        for (Index t = 0; t < per_cell; ++t, ++e) {
          const IntMatrix& off = offsets[t];
          for (int v = 0; v <= d; ++v) {
            const int oi = i + off(0, v);
            const int oj = j + off(1, v);
            const int ok = (d == 3) ? k + off(2, v) : 0;
            mesh.elements(v, e) = static_cast<int>(node_id(oi, oj, ok));
          }
          mesh.element_class[e] = static_cast<int>(t);
        }

  mesh.lumped_mass = Vector::Zero(n_nodes);
  const double share = vol / (d + 1);
  for (Index el = 0; el < mesh.n_elements(); ++el)
    for (int v = 0; v <= d; ++v) mesh.lumped_mass[mesh.elements(v, el)] += share;

  // boundary tags
  const double tol = kGeomTol * spec.extents.maxCoeff();
  const int b = spec.axis();

  for (Index id = 0; id < n_nodes; ++id) {
    const Vector x = mesh.nodes.col(id);
    for (const Box& box : rules.dirichlet)
      if (box.contains(x, tol)) {
        mesh.dirichlet_nodes.push_back(static_cast<int>(id));
        break;
      }
    if (x[b] <= tol) {
      if (rules.plate.empty()) {
        mesh.plate_nodes.push_back(static_cast<int>(id));
      } else {
        for (const Box& box : rules.plate)
          if (box.contains(x, tol)) {
            mesh.plate_nodes.push_back(static_cast<int>(id));
            break;
          }
      }
    }
  }

  // boundary facets; the in-plane diagonal of the Kuhn split always runs
  // from the cell-local low corner to the high corner
  const auto tag_neumann = [&](const BoundaryFacet& f) {
    const int nv = (d == 2) ? 2 : 3;
    for (const Box& box : rules.neumann) {
      bool inside = true;
      for (int v = 0; v < nv && inside; ++v)
        inside = box.contains(mesh.nodes.col(f.v[v]), tol);
      if (inside) {
        mesh.neumann_facets.push_back(f);
        return;
      }
    }
  };

  for (int a = 0; a < d; ++a) {
    for (int side = 0; side < 2; ++side) {
      const int fixed = side == 0 ? 0 : n[a];
      if (d == 2) {
        const int p = 1 - a;
        for (int ip = 0; ip < n[p]; ++ip) {
          int idx[2];
          idx[a] = fixed;
          idx[p] = ip;
          const Index v0 = node_id(idx[0], idx[1], 0);
          idx[p] = ip + 1;
          const Index v1 = node_id(idx[0], idx[1], 0);
          BoundaryFacet f;
          f.v = {static_cast<int>(v0), static_cast<int>(v1), -1};
          f.measure = h[p];
          tag_neumann(f);
        }
      } else {
        const int p = (a + 1) % 3, q = (a + 2) % 3;
        for (int iq = 0; iq < n[q]; ++iq)
          for (int ip = 0; ip < n[p]; ++ip) {
            int idx[3];
            idx[a] = fixed;
            const auto corner = [&](int dp, int dq) {
              idx[p] = ip + dp;
              idx[q] = iq + dq;
              return static_cast<int>(node_id(idx[0], idx[1], idx[2]));
            };
            const int v00 = corner(0, 0), v10 = corner(1, 0);
            const int v01 = corner(0, 1), v11 = corner(1, 1);
            const double area = 0.5 * h[p] * h[q];
            BoundaryFacet f1;
            f1.v = {v00, v10, v11};
            f1.measure = area;
            tag_neumann(f1);
            BoundaryFacet f2;
            f2.v = {v00, v11, v01};
            f2.measure = area;
            tag_neumann(f2);
          }
      }
    }
  }

  return mesh;
}

SliceIndex slice(const Mesh& mesh, int k, int layers) {
  if (k < 1 || k > layers) throw ConfigError("slice: layer index out of range");
  AMTOPO_REQUIRE(layers == mesh.spec.layers, "slice layer count differs from mesh spec");
  const int b = mesh.spec.axis();
  const double height = mesh.spec.height();
  const double cut = k * (height / layers);
  const double tol = kGeomTol * height;

  SliceIndex s;
  s.layer = k;
  for (Index id = 0; id < mesh.n_nodes(); ++id)
    if (mesh.nodes(b, id) <= cut + tol) s.nodes.push_back(static_cast<int>(id));
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    bool in = true;
    for (int v = 0; v <= mesh.dim && in; ++v)
      in = mesh.nodes(b, mesh.elements(v, e)) <= cut + tol;
    if (in) s.elements.push_back(static_cast<int>(e));
  }
  s.plate_nodes = mesh.plate_nodes;
  return s;
}

Vector interpolate_at(const Mesh& mesh, const Eigen::Ref<const Matrix>& nodal,
                      const Eigen::Ref<const Vector>& point) {
  const int d = mesh.dim;
  const IntVector& n = mesh.spec.divisions;
  Vector h(d);
  for (int a = 0; a < d; ++a) h[a] = mesh.spec.extents[a] / n[a];

  int cell[3] = {0, 0, 0};
  double xi[3] = {0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) {
    const double s = point[a] / h[a];
    int c = static_cast<int>(std::floor(s));
    c = std::clamp(c, 0, n[a] - 1);
    cell[a] = c;
    xi[a] = std::clamp(s - c, 0.0, 1.0);
  }

  // order axes by descending local coordinate: Kuhn simplex membership
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.begin() + d, [&](int a, int b) { return xi[a] > xi[b]; });

  const auto node_id = [&](const int* idx) {
    Index id = idx[0] + static_cast<Index>(n[0] + 1) * idx[1];
    if (d == 3) id += static_cast<Index>(n[0] + 1) * (n[1] + 1) * idx[2];
    return id;
  };

  Vector value = Vector::Zero(nodal.rows());
  int idx[3] = {cell[0], cell[1], cell[2]};
  double prev = 1.0;
  for (int step = 0; step <= d; ++step) {
    const double cur = (step < d) ? xi[order[step]] : 0.0;
    value += (prev - cur) * nodal.col(node_id(idx));
    if (step < d) idx[order[step]] += 1;
    prev = cur;
  }
  return value;
}

Matrix interpolate_field(const Mesh& coarse, const Eigen::Ref<const Matrix>& nodal,
                         const Mesh& fine) {
  AMTOPO_REQUIRE(nodal.cols() == coarse.n_nodes(), "field size does not match mesh");
  AMTOPO_REQUIRE((coarse.spec.extents - fine.spec.extents).cwiseAbs().maxCoeff() <
                     kGeomTol * coarse.spec.extents.maxCoeff(),
                 "meshes must share the same box");
  Matrix out(nodal.rows(), fine.n_nodes());
  for (Index id = 0; id < fine.n_nodes(); ++id)
    out.col(id) = interpolate_at(coarse, nodal, fine.nodes.col(id));
  return out;
}

Matrix prolongate(const Eigen::Ref<const Matrix>& coarse_field, const Mesh& coarse,
                  const Mesh& fine) {
  for (int a = 0; a < coarse.dim; ++a)
    if (fine.spec.divisions[a] != 2 * coarse.spec.divisions[a])
      throw ConfigError("prolongate: fine mesh is not the uniform refinement of the coarse mesh");
  return interpolate_field(coarse, coarse_field, fine);
}

SparseMatrix scalar_stiffness(const Mesh& mesh) {
  const int d = mesh.dim;
  std::vector<Triplet> trip;
  trip.reserve(mesh.n_elements() * (d + 1) * (d + 1));
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Matrix& g = mesh.gradients(e);
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b)
        trip.emplace_back(mesh.elements(a, e), mesh.elements(b, e),
                          mesh.element_volume * g.col(a).dot(g.col(b)));
  }
  SparseMatrix L(mesh.n_nodes(), mesh.n_nodes());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

SparseMatrix consistent_mass(const Mesh& mesh) {
  const int d = mesh.dim;
  const double diag = mesh.element_volume * 2.0 / ((d + 1) * (d + 2));
  const double off = mesh.element_volume / ((d + 1) * (d + 2));
  std::vector<Triplet> trip;
  trip.reserve(mesh.n_elements() * (d + 1) * (d + 1));
  for (Index e = 0; e < mesh.n_elements(); ++e)
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b)
        trip.emplace_back(mesh.elements(a, e), mesh.elements(b, e), a == b ? diag : off);
  SparseMatrix M(mesh.n_nodes(), mesh.n_nodes());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace amtopo
