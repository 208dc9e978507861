// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

#include "amtopo/mesh.hpp"
#include "amtopo/phasefield.hpp"
#include "amtopo/types.hpp"

namespace amtopo {

struct Lame {
  double lambda = 0.0;
  double mu = 0.0;
};

/// Per-phase isotropic material tables. `final_use` drives the mechanical
/// system; `build_by_depth[t]` the construction system for elements t
/// layers below the current top (the last table covers all deeper layers).
/// Void entries are stored already scaled by eps^2.
struct MaterialSet {
  std::vector<Lame> final_use;
  std::vector<std::vector<Lame>> build_by_depth;

  const std::vector<Lame>& build_table(int depth) const {
    const int t = std::min<int>(depth, static_cast<int>(build_by_depth.size()) - 1);
    return build_by_depth[t];
  }
  int phases() const { return static_cast<int>(final_use.size()); }

  /// Positive moduli, matching table sizes, stiffest-to-weakest ordering.
  void validate() const;
};

/// Interpolated Lamé pair: quadratic mixture sum_ij f_i f_j c_max(i,j).
Lame interpolate_tensor(const Eigen::Ref<const Vector>& fractions, const std::vector<Lame>& table);

/// Force affine in the material fractions: value = base + coupling * f.
struct AffineForce {
  Vector base;      // d entries
  Matrix coupling;  // d x phases

  bool zero() const {
    return (base.size() == 0 || base.isZero(0.0)) &&
           (coupling.size() == 0 || coupling.isZero(0.0));
  }
  Vector value(const Eigen::Ref<const Vector>& fractions) const {
    Vector v = base;
    if (coupling.size() > 0) v += coupling * fractions;
    return v;
  }
  static AffineForce none(int dim, int phases) {
    return AffineForce{Vector::Zero(dim), Matrix::Zero(dim, phases)};
  }
};

/// Gravity-type load c * (1 - f_void) * direction, vanishing on pure void.
AffineForce material_weight(int dim, int phases, const Eigen::Ref<const Vector>& direction);

struct ForceSpec {
  AffineForce body;      // f on Omega
  AffineForce traction;  // g on Gamma_N
  AffineForce gravity;   // f^c on Omega_h
  bool top_layer_only = false;  // restrict f^c to the newest layer
};

/// Everything needed to assemble one linear elasticity system: element
/// set, Dirichlet nodes, per-element material tables and loads. Plain
/// data; the mesh is passed alongside wherever a context is used.
struct ElasticContext {
  int layer = 0;  // 0 for the mechanical system, else the slice index k
  std::vector<int> elements;
  std::vector<int> dirichlet;
  std::vector<int> table_of_element;  // index into the tables below
  std::vector<Matrix> lambda_mix;     // per table: phases x phases, entry ij = lambda_max(i,j)
  std::vector<Matrix> mu_mix;
  AffineForce body;
  std::vector<char> body_active;    // per element; empty = all active
  // when present, the self-weight functional pairs the displacement with
  // the body load restricted to these elements (newest layer) while the
  // state equation keeps the full load
  std::vector<char> weight_active;
  std::vector<BoundaryFacet> traction_facets;
  AffineForce traction;

  bool element_loaded(std::size_t local) const {
    return body_active.empty() || body_active[local];
  }
  bool element_weighted(std::size_t local) const {
    return weight_active.empty() || weight_active[local];
  }
};

/// Final-use system context: full mesh, Dirichlet on the fixture nodes.
ElasticContext ms_context(const Mesh& mesh, const MaterialSet& materials,
                          const ForceSpec& forces);

/// Construction-stage context for layer k: slice domain, Dirichlet on the
/// building plate, depth-dependent material tables, gravity load.
ElasticContext ams_context(const Mesh& mesh, const SliceIndex& sl, const MaterialSet& materials,
                           const ForceSpec& forces);

/// Assembled, factorized and solved P1 system.
struct ElasticSystem {
  std::vector<int> free_dofs;      // compressed -> node*dim + component
  std::vector<Index> dof_map;      // global displacement dof -> compressed (-1 fixed/absent)
  SparseMatrix stiffness;          // reduced, symmetric positive definite
  std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> factor;
  Vector load;
  Vector solution;
  Vector weight_load;       // restricted self-weight pairing vector (may be empty)
  double compliance = 0.0;  // load . solution = stored elastic energy pairing
  double self_weight = 0.0; // weight_load . solution, = compliance without restriction

  Index n_free() const { return static_cast<Index>(free_dofs.size()); }
  /// Solution expanded to dim x n_nodes (zero on fixed/absent nodes).
  Matrix displacement(const Mesh& mesh) const;
  /// Solves the system for an arbitrary reduced right-hand side.
  Vector solve(const Eigen::Ref<const Vector>& rhs) const;
};

/// Assembles stiffness and load at the given design, factorizes once and
/// solves. Throws SolverError if the factorization fails.
ElasticSystem assemble_and_solve(const Mesh& mesh, const ElasticContext& ctx,
                                 const DesignSpace& space, const Eigen::Ref<const Vector>& phi);

/// Dual vector (design space) of the compliance derivative
///   zeta -> 2 (f_phi[zeta], u) - (C'(phi)[zeta] E(u), E(u)) + 2 (g_phi[zeta], u).
Vector compliance_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                           const DesignSpace& space, const Eigen::Ref<const Vector>& phi);

/// Derivative of the self-weight pairing weight_load(phi) . u(phi). Equal
/// to compliance_gradient when no restriction is present; otherwise the
/// adjoint of the pairing is solved through the cached factorization.
Vector self_weight_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                            const DesignSpace& space, const Eigen::Ref<const Vector>& phi);

/// Dual vector of zeta -> (f_phi[zeta], u) + (g_phi[zeta], u) alone.
Vector load_phase_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                           const DesignSpace& space, const Eigen::Ref<const Vector>& phi);

/// Right-hand side of the linearized state equation in direction zeta:
///   -(C'(phi)[zeta] E(u), E(xi)) + (f_phi[zeta], xi) + (g_phi[zeta], xi).
Vector linearized_rhs(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                      const DesignSpace& space, const Eigen::Ref<const Vector>& phi,
                      const Eigen::Ref<const Vector>& zeta);

/// Same linear map assembled as a sparse matrix (free dofs x design dofs).
SparseMatrix linearization_matrix(const Mesh& mesh, const ElasticContext& ctx,
                                  const ElasticSystem& sys, const DesignSpace& space,
                                  const Eigen::Ref<const Vector>& phi);

/// Solves the linearized state equation reusing the cached factorization.
Vector solve_linearized(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                        const DesignSpace& space, const Eigen::Ref<const Vector>& phi,
                        const Eigen::Ref<const Vector>& zeta);

}  // namespace amtopo
