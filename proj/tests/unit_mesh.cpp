// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "amtopo/mesh.hpp"

using namespace amtopo;

namespace {

MeshSpec make_spec(std::initializer_list<double> ext, std::initializer_list<int> div, int layers = 1) {
  MeshSpec s;
  s.extents = Vector::Zero(static_cast<Index>(ext.size()));
  s.divisions = IntVector::Zero(static_cast<Index>(div.size()));
  int i = 0;
  for (double e : ext) s.extents[i++] = e;
  i = 0;
  for (int d : div) s.divisions[i++] = d;
  s.layers = layers;
  return s;
}

Box make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  Box b;
  b.lo = Vector::Zero(static_cast<Index>(lo.size()));
  b.hi = Vector::Zero(static_cast<Index>(hi.size()));
  int i = 0;
  for (double v : lo) b.lo[i++] = v;
  i = 0;
  for (double v : hi) b.hi[i++] = v;
  return b;
}

}  // namespace

TEST_CASE("structured node and element counts") {
  Mesh m = build_mesh(make_spec({1.0, 1.0}, {2, 2}), {});
  CHECK(m.n_nodes() == 9);
  CHECK(m.n_elements() == 8);
  CHECK(m.element_volume == doctest::Approx(1.0 / 8.0));
  CHECK(m.domain_volume() == doctest::Approx(1.0));
  CHECK(m.lumped_mass.sum() == doctest::Approx(1.0));
}

TEST_CASE("cantilever resolution matches the published node count") {
  Mesh m = build_mesh(make_spec({3.0, 1.0}, {960, 320}, 10), {});
  CHECK(m.n_nodes() == 308481);
}

TEST_CASE("3d resolution matches the published node count") {
  Mesh m = build_mesh(make_spec({2.0, 1.0, 1.0}, {160, 80, 80}, 10), {});
  CHECK(m.n_nodes() == 1056321);
  CHECK(m.n_elements() == 6 * 160 * 80 * 80);
  CHECK(m.domain_volume() == doctest::Approx(2.0));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(build_mesh(make_spec({1.0, 1.0}, {4, 6}, 4), {}), ConfigError);   // 6 % 4 != 0
  CHECK_THROWS_AS(build_mesh(make_spec({1.0, 0.0}, {4, 4}), {}), ConfigError);
  CHECK_THROWS_AS(build_mesh(make_spec({1.0, -2.0}, {4, 4}), {}), ConfigError);
}

TEST_CASE("slices follow the coordinate definition and nest") {
  Mesh m = build_mesh(make_spec({1.0, 1.0}, {10, 10}, 10), {});
  SliceIndex s1 = slice(m, 1, 10);

  // brute-force coordinate test
  std::vector<int> expect;
  for (Index e = 0; e < m.n_elements(); ++e) {
    bool in = true;
    for (int v = 0; v < 3; ++v) in = in && m.nodes(1, m.elements(v, e)) <= 0.1 + 1e-13;
    if (in) expect.push_back(static_cast<int>(e));
  }
  CHECK(s1.elements == expect);
  CHECK(s1.elements.size() == m.n_elements() / 10);

  SliceIndex sM = slice(m, 10, 10);
  CHECK(sM.elements.size() == static_cast<std::size_t>(m.n_elements()));
  CHECK(sM.nodes.size() == static_cast<std::size_t>(m.n_nodes()));

  for (int k = 1; k < 10; ++k) {
    SliceIndex a = slice(m, k, 10);
    SliceIndex b = slice(m, k + 1, 10);
    std::set<int> bn(b.nodes.begin(), b.nodes.end());
    for (int id : a.nodes) CHECK(bn.count(id) == 1);
    CHECK(a.elements.size() == static_cast<std::size_t>(k) * m.n_elements() / 10);
  }

  CHECK_THROWS_AS(slice(m, 0, 10), ConfigError);
  CHECK_THROWS_AS(slice(m, 11, 10), ConfigError);
}

TEST_CASE("boundary tags select the declared regions") {
  BoundaryRules rules;
  rules.dirichlet.push_back(make_box({0.0, 0.0}, {0.0, 1.0}));
  rules.neumann.push_back(make_box({2.75, 0.0}, {3.0, 0.0}));
  Mesh m = build_mesh(make_spec({3.0, 1.0}, {48, 16}, 4), rules);

  CHECK(m.dirichlet_nodes.size() == 17);  // left edge
  double glen = 0.0;
  for (const auto& f : m.neumann_facets) glen += f.measure;
  CHECK(glen == doctest::Approx(0.25));
  CHECK(m.plate_nodes.size() == 49);  // whole bottom by default

  // no node is both fixed and loaded here
  std::set<int> dn(m.dirichlet_nodes.begin(), m.dirichlet_nodes.end());
  for (const auto& f : m.neumann_facets) {
    CHECK(dn.count(f.v[0]) == 0);
    CHECK(dn.count(f.v[1]) == 0);
  }
}

TEST_CASE("3d boundary facets cover the selected face") {
  BoundaryRules rules;
  rules.neumann.push_back(make_box({0.0, 0.0, 0.0}, {2.0, 1.0, 0.0}));  // bottom face
  Mesh m = build_mesh(make_spec({2.0, 1.0, 1.0}, {8, 4, 4}, 4), rules);
  double area = 0.0;
  for (const auto& f : m.neumann_facets) area += f.measure;
  CHECK(area == doctest::Approx(2.0));
}

TEST_CASE("point evaluation reproduces linear fields") {
  Mesh m = build_mesh(make_spec({2.0, 1.0, 1.0}, {4, 2, 2}, 2), {});
  Matrix f(1, m.n_nodes());
  for (Index i = 0; i < m.n_nodes(); ++i)
    f(0, i) = 1.5 + 2.0 * m.nodes(0, i) - 0.75 * m.nodes(1, i) + 0.25 * m.nodes(2, i);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Vector p(3);
    p << 2.0 * rng.next_uniform(), rng.next_uniform(), rng.next_uniform();
    const double want = 1.5 + 2.0 * p[0] - 0.75 * p[1] + 0.25 * p[2];
    CHECK(interpolate_at(m, f, p)[0] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("prolongation is exact on piecewise-linear data and preserves mass") {
  Mesh coarse = build_mesh(make_spec({3.0, 1.0}, {6, 2}, 2), {});
  Mesh fine = build_mesh(make_spec({3.0, 1.0}, {12, 4}, 2), {});

  SUBCASE("constant") {
    Matrix f = Matrix::Constant(1, coarse.n_nodes(), 0.4);
    Matrix g = prolongate(f, coarse, fine);
    CHECK((g.array() - 0.4).abs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("linear in x") {
    Matrix f(1, coarse.n_nodes());
    for (Index i = 0; i < coarse.n_nodes(); ++i) f(0, i) = 2.0 * coarse.nodes(0, i) - 1.0;
    Matrix g = prolongate(f, coarse, fine);
    for (Index i = 0; i < fine.n_nodes(); ++i)
      CHECK(g(0, i) == doctest::Approx(2.0 * fine.nodes(0, i) - 1.0).epsilon(1e-13));
  }
  SUBCASE("mean preserved for arbitrary nodal data") {
    Rng rng(11);
    Matrix f(1, coarse.n_nodes());
    for (Index i = 0; i < coarse.n_nodes(); ++i) f(0, i) = rng.next_normal();
    Matrix g = prolongate(f, coarse, fine);
    const double mean_c = coarse.lumped_mass.dot(f.row(0).transpose()) / coarse.domain_volume();
    const double mean_f = fine.lumped_mass.dot(g.row(0).transpose()) / fine.domain_volume();
    CHECK(mean_f == doctest::Approx(mean_c).epsilon(1e-12));
  }
  SUBCASE("non-refinement pairs are rejected") {
    Mesh other = build_mesh(make_spec({3.0, 1.0}, {9, 3}, 1), {});
    Matrix f = Matrix::Zero(1, coarse.n_nodes());
    CHECK_THROWS_AS(prolongate(f, coarse, other), ConfigError);
  }
}

TEST_CASE("3d prolongation is exact on linear fields") {
  Mesh coarse = build_mesh(make_spec({1.0, 1.0, 1.0}, {2, 2, 2}, 2), {});
  Mesh fine = build_mesh(make_spec({1.0, 1.0, 1.0}, {4, 4, 4}, 2), {});
  Matrix f(2, coarse.n_nodes());
  for (Index i = 0; i < coarse.n_nodes(); ++i) {
    f(0, i) = coarse.nodes(0, i) + coarse.nodes(1, i) + coarse.nodes(2, i);
    f(1, i) = 1.0 - coarse.nodes(2, i);
  }
  Matrix g = prolongate(f, coarse, fine);
  for (Index i = 0; i < fine.n_nodes(); ++i) {
    CHECK(g(0, i) == doctest::Approx(fine.nodes.col(i).sum()).epsilon(1e-13));
    CHECK(g(1, i) == doctest::Approx(1.0 - fine.nodes(2, i)).epsilon(1e-13));
  }
}

TEST_CASE("build axis can be changed") {
  MeshSpec s = make_spec({3.0, 1.0}, {48, 16}, 5);
  s.build_axis = 0;
  CHECK_THROWS_AS(build_mesh(s, {}), ConfigError);  // 48 cells on axis 0, 5 layers
  s.layers = 48;
  Mesh m = build_mesh(s, {});
  CHECK(m.plate_nodes.size() == 17);  // x = 0 face holds 17 nodes
  CHECK(m.spec.height() == doctest::Approx(3.0));
}
