// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "amtopo/mesh.hpp"
#include "amtopo/types.hpp"

namespace amtopo {

/// Symmetric matrix of the obstacle potential 0.5 v^T A v on the Gibbs
/// simplex (infinite outside; handled by constraints, never evaluated).
struct PotentialMatrix {
  Matrix A;

  double value(const Eigen::Ref<const Vector>& v) const { return 0.5 * v.dot(A * v); }
  Vector gradient(const Eigen::Ref<const Vector>& v) const { return A * v; }
};

/// Zero diagonal, 0.1 between materials, 1 between material and void
/// (component N). Straightens the material/void interface.
PotentialMatrix standard_potential_matrix(int phases);

/// True if A has an eigenvalue below -tol (a concave direction, required
/// for phase separation).
bool has_negative_eigenvalue(const Eigen::Ref<const Matrix>& A, double tol = 1e-12);

/// Nodal N-component field on the Gibbs simplex.
struct PhaseField {
  Matrix values;   // N x n_nodes, columns on the simplex
  Vector mass;     // prescribed mean, N entries summing to 1
  double epsilon;  // interface width parameter
};

/// Two-phase reduction: one variable per node in [-1, 1].
struct ScalarPhaseField {
  Vector values;
  double mass;  // prescribed mean in [-1, 1]
  double epsilon;
};

/// phi = 0.5 (1 + t, 1 - t).
PhaseField to_vector(const ScalarPhaseField& s);
/// Inverse of to_vector; throws ConfigError unless the field has 2 phases.
ScalarPhaseField from_vector(const PhaseField& p);

/// Representation the optimizer works in: one column per node with either
/// a single box-constrained component (scalar two-phase form) or N
/// simplex-constrained components.
struct DesignSpace {
  Index n_nodes = 0;
  int comps = 1;
  bool scalar = true;
  Vector target_mass;  // comps entries

  int phases() const { return scalar ? 2 : comps; }
  Index size() const { return n_nodes * comps; }

  Matrix view(const Eigen::Ref<const Vector>& flat) const {
    return Eigen::Map<const Matrix>(flat.data(), comps, n_nodes);
  }
  Vector flatten(const Eigen::Ref<const Matrix>& values) const {
    return Eigen::Map<const Vector>(values.data(), values.size());
  }

  /// Material fractions per node (phases x n_nodes).
  Matrix fractions(const Eigen::Ref<const Vector>& flat) const;

  /// Pulls a fraction-space nodal dual vector back into design space.
  Vector fraction_pullback(const Eigen::Ref<const Matrix>& dual) const;

  /// Pushes a design direction forward into fraction space (the Jacobian
  /// of fractions()).
  Matrix fraction_direction(const Eigen::Ref<const Vector>& flat) const;

  /// Max simplex/box violation over all nodes.
  double feasibility_violation(const Eigen::Ref<const Vector>& flat) const;

  /// Max deviation of per-component means from target_mass.
  double mass_violation(const Eigen::Ref<const Vector>& flat, const Mesh& mesh) const;
};

/// Interface energy with exact quadrature on the gradient term and nodal
/// (lumped) quadrature on the potential term. Scalar fields use the scalar
/// potential convention (twice the vector-form energy of the same layout).
double ginzburg_landau(const Mesh& mesh, const DesignSpace& space, const SparseMatrix& stiffness,
                       const PotentialMatrix& pot, const Eigen::Ref<const Vector>& phi,
                       double eps);

/// Assembled first derivative (dual vector in design space).
Vector ginzburg_landau_gradient(const Mesh& mesh, const DesignSpace& space,
                                const SparseMatrix& stiffness, const PotentialMatrix& pot,
                                const Eigen::Ref<const Vector>& phi, double eps);

/// Second derivative as a bilinear form.
double ginzburg_landau_second(const Mesh& mesh, const DesignSpace& space,
                              const SparseMatrix& stiffness, const PotentialMatrix& pot,
                              const Eigen::Ref<const Vector>& zeta,
                              const Eigen::Ref<const Vector>& eta, double eps);

}  // namespace amtopo
