// SPDX-License-Identifier: Apache-2.0
#include "amtopo/phasefield.hpp"

#include <Eigen/Eigenvalues>

namespace amtopo {

PotentialMatrix standard_potential_matrix(int phases) {
  AMTOPO_REQUIRE(phases >= 2, "need at least material and void");
  Matrix A = Matrix::Constant(phases, phases, 0.1);
  A.row(phases - 1).setOnes();
  A.col(phases - 1).setOnes();
  A.diagonal().setZero();
  return PotentialMatrix{A};
}

bool has_negative_eigenvalue(const Eigen::Ref<const Matrix>& A, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  return es.eigenvalues().minCoeff() < -tol;
}

PhaseField to_vector(const ScalarPhaseField& s) {
  PhaseField p;
  p.values.resize(2, s.values.size());
  p.values.row(0) = 0.5 * (1.0 + s.values.array());
  p.values.row(1) = 0.5 * (1.0 - s.values.array());
  p.mass = Vector(2);
  p.mass << 0.5 * (1.0 + s.mass), 0.5 * (1.0 - s.mass);
  p.epsilon = s.epsilon;
  return p;
}

ScalarPhaseField from_vector(const PhaseField& p) {
  if (p.values.rows() != 2) throw ConfigError("from_vector: field must have exactly 2 phases");
  ScalarPhaseField s;
  s.values = (p.values.row(0) - p.values.row(1)).transpose();
  s.mass = p.mass[0] - p.mass[1];
  s.epsilon = p.epsilon;
  return s;
}

Matrix DesignSpace::fractions(const Eigen::Ref<const Vector>& flat) const {
  AMTOPO_REQUIRE(flat.size() == size(), "design vector size mismatch");
  if (!scalar) return view(flat);
  Matrix f(2, n_nodes);
  const auto t = Eigen::Map<const Vector>(flat.data(), flat.size());
  f.row(0) = 0.5 * (1.0 + t.array());
  f.row(1) = 0.5 * (1.0 - t.array());
  return f;
}

Vector DesignSpace::fraction_pullback(const Eigen::Ref<const Matrix>& dual) const {
  AMTOPO_REQUIRE(dual.rows() == phases() && dual.cols() == n_nodes, "dual vector size mismatch");
  if (!scalar) return flatten(dual);
  return 0.5 * (dual.row(0) - dual.row(1)).transpose();
}

Matrix DesignSpace::fraction_direction(const Eigen::Ref<const Vector>& flat) const {
  AMTOPO_REQUIRE(flat.size() == size(), "design direction size mismatch");
  if (!scalar) return view(flat);
  Matrix f(2, n_nodes);
  f.row(0) = 0.5 * flat.transpose();
  f.row(1) = -0.5 * flat.transpose();
  return f;
}

double DesignSpace::feasibility_violation(const Eigen::Ref<const Vector>& flat) const {
  const Matrix v = view(flat);
  if (scalar) return std::max(0.0, v.cwiseAbs().maxCoeff() - 1.0);
  double worst = std::max(0.0, -v.minCoeff());
  worst = std::max(worst, (v.colwise().sum().array() - 1.0).abs().maxCoeff());
  return worst;
}

double DesignSpace::mass_violation(const Eigen::Ref<const Vector>& flat, const Mesh& mesh) const {
  const Matrix v = view(flat);
  const Vector means = v * mesh.lumped_mass / mesh.domain_volume();
  return (means - target_mass).cwiseAbs().maxCoeff();
}

double ginzburg_landau(const Mesh& mesh, const DesignSpace& space, const SparseMatrix& stiffness,
                       const PotentialMatrix& pot, const Eigen::Ref<const Vector>& phi,
                       double eps) {
  const Matrix v = space.view(phi);
  const Matrix vl = v * stiffness;
  const double grad_term = 0.5 * eps * (vl.array() * v.array()).sum();

  double pot_term = 0.0;
  if (space.scalar) {
    pot_term = 0.5 * (mesh.lumped_mass.array() *
                      (1.0 - v.row(0).transpose().array().square()))
                         .sum();
  } else {
    const Matrix av = pot.A * v;
    pot_term = 0.5 * ((av.array() * v.array()).colwise().sum().transpose() *
                      mesh.lumped_mass.array())
                         .sum();
  }
  return grad_term + pot_term / eps;
}

Vector ginzburg_landau_gradient(const Mesh& mesh, const DesignSpace& space,
                                const SparseMatrix& stiffness, const PotentialMatrix& pot,
                                const Eigen::Ref<const Vector>& phi, double eps) {
  const Matrix v = space.view(phi);
  Matrix dual = eps * (v * stiffness);
  if (space.scalar) {
    dual.row(0) -= (mesh.lumped_mass.cwiseProduct(v.row(0).transpose()) / eps).transpose();
  } else {
    dual += (pot.A * v) * mesh.lumped_mass.asDiagonal() / eps;
  }
  return Eigen::Map<const Vector>(dual.data(), dual.size());
}

double ginzburg_landau_second(const Mesh& mesh, const DesignSpace& space,
                              const SparseMatrix& stiffness, const PotentialMatrix& pot,
                              const Eigen::Ref<const Vector>& zeta,
                              const Eigen::Ref<const Vector>& eta, double eps) {
  const Matrix z = space.view(zeta);
  const Matrix y = space.view(eta);
  double out = eps * ((z * stiffness).array() * y.array()).sum();
  if (space.scalar) {
    out -= (mesh.lumped_mass.array() * z.row(0).transpose().array() *
            y.row(0).transpose().array())
               .sum() /
           eps;
  } else {
    out += (((pot.A * z).array() * y.array()).colwise().sum().transpose() *
            mesh.lumped_mass.array())
               .sum() /
           eps;
  }
  return out;
}

}  // namespace amtopo
