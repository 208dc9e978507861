// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amtopo/phasefield.hpp"

using namespace amtopo;

namespace {

Mesh unit_square(int cells) {
  MeshSpec s;
  s.extents = Vector::Constant(2, 1.0);
  s.divisions = IntVector::Constant(2, cells);
  s.layers = 1;
  return build_mesh(s, {});
}

// random point on the Gibbs simplex
Vector simplex_sample(Rng& rng, int n) {
  Vector v(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = -std::log(1.0 - rng.next_uniform());
    sum += v[i];
  }
  return v / sum;
}

}  // namespace

TEST_CASE("obstacle potential on simplex vertices and midpoints") {
  PotentialMatrix pot = standard_potential_matrix(2);
  CHECK(pot.A(0, 1) == 1.0);
  CHECK(pot.A(0, 0) == 0.0);
  CHECK(has_negative_eigenvalue(pot.A));

  for (int i = 0; i < 2; ++i) {
    Vector e = Vector::Unit(2, i);
    CHECK(pot.value(e) == doctest::Approx(0.0));
  }
  Vector mid = Vector::Constant(2, 0.5);
  CHECK(pot.value(mid) == doctest::Approx(0.25));
  CHECK((pot.gradient(mid) - pot.A * mid).norm() == doctest::Approx(0.0));

  PotentialMatrix pot4 = standard_potential_matrix(4);
  CHECK(pot4.A(0, 1) == 0.1);
  CHECK(pot4.A(0, 3) == 1.0);
  CHECK((pot4.A - pot4.A.transpose()).norm() == 0.0);
  CHECK(has_negative_eigenvalue(pot4.A));

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    CHECK(pot4.value(simplex_sample(rng, 4)) >= 0.0);
  }
}

TEST_CASE("scalar/vector conversion") {
  ScalarPhaseField s;
  s.values = Vector::Constant(5, 1.0);
  s.mass = -0.25;
  s.epsilon = 0.025;
  PhaseField p = to_vector(s);
  CHECK((p.values.row(0).array() - 1.0).abs().maxCoeff() == 0.0);
  CHECK((p.values.row(1).array()).abs().maxCoeff() == 0.0);
  CHECK(p.mass[0] == doctest::Approx(0.375));  // 37.5% material
  CHECK(p.mass[1] == doctest::Approx(0.625));

  Rng rng(5);
  for (Index i = 0; i < s.values.size(); ++i) s.values[i] = 2.0 * rng.next_uniform() - 1.0;
  ScalarPhaseField back = from_vector(to_vector(s));
  CHECK((back.values - s.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.mass == s.mass);

  PhaseField p3;
  p3.values = Matrix::Constant(3, 4, 1.0 / 3.0);
  p3.mass = Vector::Constant(3, 1.0 / 3.0);
  p3.epsilon = 0.1;
  CHECK_THROWS_AS(from_vector(p3), ConfigError);
}

TEST_CASE("interface energy on constant fields") {
  Mesh mesh = unit_square(4);
  SparseMatrix L = scalar_stiffness(mesh);
  const double eps = 0.05;

  SUBCASE("pure phase has zero energy") {
    DesignSpace space{mesh.n_nodes(), 2, false, Vector::Zero(2)};
    PotentialMatrix pot = standard_potential_matrix(2);
    Matrix v(2, mesh.n_nodes());
    v.row(0).setOnes();
    v.row(1).setZero();
    CHECK(ginzburg_landau(mesh, space, L, pot, space.flatten(v), eps) ==
          doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("constant mixture pays only the potential term") {
    DesignSpace space{mesh.n_nodes(), 3, false, Vector::Zero(3)};
    PotentialMatrix pot = standard_potential_matrix(3);
    Vector c(3);
    c << 0.3, 0.5, 0.2;
    Matrix v = c.replicate(1, mesh.n_nodes());
    const double want = pot.value(c) / eps;  // |Omega| = 1
    CHECK(ginzburg_landau(mesh, space, L, pot, space.flatten(v), eps) ==
          doctest::Approx(want).epsilon(1e-13));
  }
  SUBCASE("scalar field convention doubles the vector energy") {
    DesignSpace sc{mesh.n_nodes(), 1, true, Vector::Constant(1, 0.0)};
    DesignSpace vec{mesh.n_nodes(), 2, false, Vector::Constant(2, 0.5)};
    PotentialMatrix pot = standard_potential_matrix(2);
    Rng rng(17);
    Vector t(mesh.n_nodes());
    for (Index i = 0; i < t.size(); ++i) t[i] = 0.8 * (2.0 * rng.next_uniform() - 1.0);
    Matrix v(2, mesh.n_nodes());
    v.row(0) = 0.5 * (1.0 + t.array());
    v.row(1) = 0.5 * (1.0 - t.array());
    const double scalar_energy = ginzburg_landau(mesh, sc, L, pot, t, eps);
    const double vector_energy = ginzburg_landau(mesh, vec, L, pot, vec.flatten(v), eps);
    CHECK(scalar_energy == doctest::Approx(2.0 * vector_energy).epsilon(1e-12));
  }
  SUBCASE("scalar potential value at zero") {
    DesignSpace sc{mesh.n_nodes(), 1, true, Vector::Constant(1, 0.0)};
    PotentialMatrix pot = standard_potential_matrix(2);
    Vector t = Vector::Zero(mesh.n_nodes());
    CHECK(ginzburg_landau(mesh, sc, L, pot, t, eps) == doctest::Approx(0.5 / eps));
  }
}

TEST_CASE("energy gradient and second form agree with differences") {
  Mesh mesh = unit_square(5);
  SparseMatrix L = scalar_stiffness(mesh);
  const double eps = 0.08;
  Rng rng(23);

  const auto fd_check = [&](const DesignSpace& space, const PotentialMatrix& pot) {
    Vector phi(space.size());
    Vector zeta(space.size());
    for (Index i = 0; i < phi.size(); ++i) {
      phi[i] = space.scalar ? 0.5 * (2.0 * rng.next_uniform() - 1.0)
                            : 0.2 + 0.6 * rng.next_uniform();
      zeta[i] = rng.next_normal();
    }
    if (!space.scalar) {  // normalize columns onto the simplex
      Matrix v = space.view(phi);
      v.array().rowwise() /= v.colwise().sum().array();
      phi = space.flatten(v);
    }
    Vector g = ginzburg_landau_gradient(mesh, space, L, pot, phi, eps);

    const double t = 1e-5;
    const double ep = ginzburg_landau(mesh, space, L, pot, phi + t * zeta, eps);
    const double em = ginzburg_landau(mesh, space, L, pot, phi - t * zeta, eps);
    const double fd = (ep - em) / (2.0 * t);
    CHECK(g.dot(zeta) == doctest::Approx(fd).epsilon(1e-6));

    // linearity in the direction
    CHECK(g.dot(2.5 * zeta) == doctest::Approx(2.5 * g.dot(zeta)).epsilon(1e-13));
    CHECK(g.dot(Vector::Zero(space.size())) == 0.0);

    // second form against differences of the gradient
    Vector eta(space.size());
    for (Index i = 0; i < eta.size(); ++i) eta[i] = rng.next_normal();
    Vector gp = ginzburg_landau_gradient(mesh, space, L, pot, phi + t * eta, eps);
    Vector gm = ginzburg_landau_gradient(mesh, space, L, pot, phi - t * eta, eps);
    const double sec_fd = (gp - gm).dot(zeta) / (2.0 * t);
    const double sec = ginzburg_landau_second(mesh, space, L, pot, zeta, eta, eps);
    CHECK(sec == doctest::Approx(sec_fd).epsilon(1e-5));
    CHECK(ginzburg_landau_second(mesh, space, L, pot, eta, zeta, eps) ==
          doctest::Approx(sec).epsilon(1e-12));
  };

  SUBCASE("scalar") {
    DesignSpace space{mesh.n_nodes(), 1, true, Vector::Constant(1, 0.0)};
    fd_check(space, standard_potential_matrix(2));
  }
  SUBCASE("three phases") {
    DesignSpace space{mesh.n_nodes(), 3, false, Vector::Constant(3, 1.0 / 3.0)};
    fd_check(space, standard_potential_matrix(3));
  }
}

TEST_CASE("energy is nonnegative for fields on the simplex") {
  Mesh mesh = unit_square(4);
  SparseMatrix L = scalar_stiffness(mesh);
  PotentialMatrix pot = standard_potential_matrix(3);
  DesignSpace space{mesh.n_nodes(), 3, false, Vector::Constant(3, 1.0 / 3.0)};
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix v(3, mesh.n_nodes());
    for (Index a = 0; a < mesh.n_nodes(); ++a) v.col(a) = simplex_sample(rng, 3);
    CHECK(ginzburg_landau(mesh, space, L, pot, space.flatten(v), 0.04) >= -1e-14);
  }
}

TEST_CASE("feasibility measures") {
  Mesh mesh = unit_square(2);
  DesignSpace sc{mesh.n_nodes(), 1, true, Vector::Constant(1, -0.25)};
  Vector t = Vector::Constant(mesh.n_nodes(), -0.25);
  CHECK(sc.feasibility_violation(t) == 0.0);
  CHECK(sc.mass_violation(t, mesh) == doctest::Approx(0.0));
  t[0] = -1.5;
  CHECK(sc.feasibility_violation(t) == doctest::Approx(0.5));

  DesignSpace vec{mesh.n_nodes(), 2, false, Vector::Constant(2, 0.5)};
  Matrix v = Matrix::Constant(2, mesh.n_nodes(), 0.5);
  CHECK(vec.feasibility_violation(vec.flatten(v)) == 0.0);
  v(0, 3) = 0.7;  // column sum now 1.2
  CHECK(vec.feasibility_violation(vec.flatten(v)) == doctest::Approx(0.2));
}
