// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amtopo/verify.hpp"
#include "test_support.hpp"

using namespace amtopo;
using namespace amtopo::testing;

namespace {

Mesh box_mesh(double lx, double h, int nx, int ny, int layers) {
  MeshSpec spec;
  spec.extents = Vector(2);
  spec.extents << lx, h;
  spec.divisions = IntVector(2);
  spec.divisions << nx, ny;
  spec.layers = layers;
  return build_mesh(spec, {});  // plate defaults to the whole bottom
}

}  // namespace

TEST_CASE("poincare quotient on slices") {
  Mesh mesh = box_mesh(1.0, 1.0, 8, 8, 4);

  SUBCASE("the linear profile attains h/sqrt(3)") {
    // y = x_d is in the P1 space; exact integrals give |y|/|grad y| = h/sqrt(3)
    SliceIndex full = slice(mesh, 4, 4);
    SparseMatrix L = scalar_stiffness(mesh), M = consistent_mass(mesh);
    Vector y(mesh.n_nodes());
    for (Index i = 0; i < mesh.n_nodes(); ++i) y[i] = mesh.nodes(1, i);
    const double ratio = std::sqrt(y.dot(M * y) / y.dot(L * y));
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

    const double q = poincare_quotient(mesh, full);
    CHECK(q >= ratio - 1e-12);  // the maximizer beats the linear profile
    CHECK(q <= 1.0 * (1.0 + 1e-8));
  }

  SUBCASE("discrete maxima stay below the height at every slice") {
    for (int k : {1, 2, 4}) {
      SliceIndex sl = slice(mesh, k, 4);
      const double h = 0.25 * k;
      CHECK(poincare_quotient(mesh, sl) <= h * (1.0 + 1e-8));
    }
  }

  SUBCASE("missing plate is an error") {
    BoundaryRules rules;
    rules.plate.push_back(box2(2.0, 3.0, 0.0, 0.0));  // outside the box: empty
    MeshSpec spec = mesh.spec;
    Mesh noplates = build_mesh(spec, rules);
    SliceIndex sl = slice(noplates, 4, 4);
    CHECK_THROWS_AS(poincare_quotient(noplates, sl), ConfigError);
  }
}

TEST_CASE("korn quotient on slices") {
  Mesh mesh = box_mesh(1.0, 1.0, 6, 8, 4);

  SUBCASE("the shear profile attains exactly two") {
    // u = (x_d, 0): |grad u|^2 = 1, |E(u)|^2 = 1/2 pointwise
    SliceIndex full = slice(mesh, 4, 4);
    const double q = korn_quotient(mesh, full);
    CHECK(q >= 2.0 - 1e-10);
  }

  SUBCASE("slice quotients obey the scaled full-domain bound") {
    SliceIndex full = slice(mesh, 4, 4);
    const double qH = korn_quotient(mesh, full);
    for (int k : {1, 2}) {
      SliceIndex sl = slice(mesh, k, 4);
      CHECK(korn_quotient(mesh, sl) <= 2.0 * qH * (1.0 + 1e-8));
    }
  }
}

TEST_CASE("combined report on a small box") {
  Mesh mesh = box_mesh(2.0, 1.0, 8, 4, 4);
  VerificationReport rep = verify_inequalities(mesh, Lame{44.0, 44.0});
  CHECK(rep.pass);
  CHECK(rep.poincare.size() == 3);
  for (const auto& r : rep.poincare) CHECK(r.value <= r.bound * (1.0 + 1e-8));
  for (const auto& r : rep.korn) CHECK(r.value <= r.bound * (1.0 + 1e-8));
  for (const auto& r : rep.coercivity) CHECK(r.value >= r.bound * (1.0 - 1e-8));

  const std::string text = rep.text();
  CHECK(text.find("ok") != std::string::npos);
  const std::string kv = rep.key_values();
  CHECK(kv.find("pass=1") != std::string::npos);
  CHECK(kv.find("korn_full=") != std::string::npos);
}

TEST_CASE("gradient audit") {
  Mesh mesh = cantilever_mesh(15, 5, 5);
  DesignSpace space = scalar_space(mesh);
  WeightScheme ws;
  Problem prob = build_problem(std::move(mesh), space, cantilever_materials(0.08),
                               cantilever_forces(), ws, 48.0, 0.02, 0.08);
  Vector phi = interior_design(prob.mesh);

  Rng rng(2);
  std::vector<Vector> dirs;
  for (int t = 0; t < 2; ++t) {
    Vector z(prob.space.size());
    for (Index i = 0; i < z.size(); ++i) z[i] = rng.next_normal();
    const double mean = prob.mesh.lumped_mass.dot(z) / prob.mesh.domain_volume();
    z.array() -= mean;
    dirs.push_back(z);
  }

  GradientAudit audit = gradient_audit(prob, phi, dirs);
  REQUIRE(audit.rows.size() == 3);
  CHECK(audit.best_total <= 1e-5);

  // the interface-energy term is quadratic: differences are exact at any step
  for (const auto& r : audit.rows) CHECK(r.err_E <= 1e-7);

  // antisymmetry of the derivative
  State st = evaluate(prob, phi);
  Vector g = reduced_gradient(prob, st);
  CHECK(g.dot(-dirs[0]) == doctest::Approx(-g.dot(dirs[0])).epsilon(1e-14));
}
