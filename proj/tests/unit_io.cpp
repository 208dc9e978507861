// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "amtopo/config.hpp"
#include "amtopo/vtk.hpp"

using namespace amtopo;

namespace {

const char* kCantileverPreset = R"(
# cantilever test configuration
[mesh]
extents = 3 1
divisions = 120 40
layers = 10

[phase]
scalar = true
mass = -0.25
epsilon = 0.025

[materials]
lame = 44 44
build_lame = 32 32

[forces]
g = 0 -1
fc_material = 0 -1

[boundary]
dirichlet = 0 0 0 1
neumann = 2.75 3 0 0

[cost]
beta1 = 48
beta2 = 0.02
weights = w1
)";

const char* kMbbPreset = R"(
[mesh]
extents = 5 1
divisions = 100 20
layers = 10

[phase]
scalar = false
phases = 3
mass = 0.25 0.05 0.7
epsilon = 0.025

[materials]
lame = 44 44 0.000625 0.000625
build_lame = 32 32 32 32

[forces]
g = 0 -1
fc_material = 0 -1

[boundary]
dirichlet = 0 0.1 0 0 ; 4.9 5 0 0
neumann = 2.25 2.75 1 1

[cost]
beta1 = 20
beta2 = 0.0002
)";

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cantilever preset parses to the documented values") {
  ProblemConfig cfg = parse_config(kCantileverPreset);
  CHECK(cfg.extents[0] == 3.0);
  CHECK(cfg.extents[1] == 1.0);
  CHECK(cfg.layers == 10);
  CHECK(cfg.scalar);
  CHECK(cfg.mass[0] == -0.25);
  CHECK(cfg.epsilon == 0.025);
  CHECK(cfg.material.at(0).lambda == 44.0);
  CHECK(cfg.build_material.at(0).mu == 32.0);
  CHECK(cfg.beta1 == 48.0);
  CHECK(cfg.beta2 == 0.02);
  CHECK(cfg.weights == "w1");
  CHECK(cfg.traction[1] == -1.0);
  CHECK(cfg.gravity_material[1] == -1.0);
  REQUIRE(cfg.dirichlet.size() == 1);
  CHECK(cfg.dirichlet[0].hi[1] == 1.0);
  REQUIRE(cfg.neumann.size() == 1);
  CHECK(cfg.neumann[0].lo[0] == 2.75);

  Problem prob = make_problem(cfg);
  CHECK(prob.mesh.n_nodes() == 121 * 41);
  CHECK(prob.space.scalar);
  // the material/void tables carry the eps^2 ersatz entries
  CHECK(prob.materials.final_use.back().lambda == doctest::Approx(0.025 * 0.025));
  CHECK(prob.materials.build_by_depth[0][0].lambda == 32.0);
}

TEST_CASE("multiphase preset with two fixture pads") {
  ProblemConfig cfg = parse_config(kMbbPreset);
  CHECK_FALSE(cfg.scalar);
  CHECK(cfg.phases == 3);
  CHECK(cfg.mass.size() == 3);
  CHECK(cfg.mass[1] == 0.05);
  REQUIRE(cfg.dirichlet.size() == 2);
  CHECK(cfg.dirichlet[1].lo[0] == 4.9);
  CHECK(cfg.beta1 == 20.0);

  Problem prob = make_problem(cfg);
  CHECK(prob.space.comps == 3);
  CHECK(prob.space.target_mass.sum() == doctest::Approx(1.0));
}

TEST_CASE("config errors carry the key path") {
  SUBCASE("missing required key") {
    std::string text = kCantileverPreset;
    const auto pos = text.find("mass = -0.25");
    text.erase(pos, 12);
    try {
      parse_config(text);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& ex) {
      CHECK(std::string(ex.what()).find("phase.mass") != std::string::npos);
    }
  }
  SUBCASE("unknown key") {
    try {
      parse_config(std::string(kCantileverPreset) + "\n[mesh]\nwobble = 3\n");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& ex) {
      CHECK(std::string(ex.what()).find("mesh.wobble") != std::string::npos);
    }
  }
  SUBCASE("type mismatch") {
    try {
      parse_config(std::string(kCantileverPreset) + "\n[cost]\nbeta1 = forty-eight\n");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& ex) {
      CHECK(std::string(ex.what()).find("cost.beta1") != std::string::npos);
    }
  }
  SUBCASE("violated invariant") {
    CHECK_THROWS_AS(
        parse_config(std::string(kCantileverPreset) + "\n[phase]\nmass = -1.5\n"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_config(std::string(kCantileverPreset) + "\n[mesh]\nlayers = 7\n"),
        ConfigError);  // 40 cells not divisible by 7
  }
}

TEST_CASE("normalized dump reparses to the same configuration") {
  ProblemConfig cfg = parse_config(kMbbPreset);
  const std::string dumped = dump_config(cfg);
  ProblemConfig cfg2 = parse_config(dumped);
  CHECK(dump_config(cfg2) == dumped);
}

TEST_CASE("overrides reuse the config grammar") {
  ProblemConfig cfg = parse_config(kCantileverPreset);
  apply_override(cfg, "cost.beta1", "96");
  CHECK(cfg.beta1 == 96.0);
  apply_override(cfg, "mesh.divisions", "48 16");
  CHECK(cfg.divisions[0] == 48);
  apply_override(cfg, "mesh.layers", "4");
  CHECK(cfg.layers == 4);
  cfg.validate();  // overrides are validated once the batch is complete
  CHECK_THROWS_AS(apply_override(cfg, "cost.nope", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "beta1", "1"), ConfigError);
}

TEST_CASE("vtk writer produces the frozen layout") {
  MeshSpec s;
  s.extents = Vector::Constant(2, 1.0);
  s.divisions = IntVector::Constant(2, 2);
  s.layers = 1;
  Mesh m = build_mesh(s, {});
  Matrix phi = Matrix::Constant(1, m.n_nodes(), 0.25);
  const std::string path = "unit_io_golden.vtk";
  write_vtk(m, {{"phi", phi}}, path, "design");

  const std::string expected =
      "# vtk DataFile Version 3.0\ndesign\nASCII\nDATASET UNSTRUCTURED_GRID\n"
      "POINTS 9 double\n0 0 0\n0.5 0 0\n1 0 0\n0 0.5 0\n0.5 0.5 0\n1 0.5 0\n0 1 0\n"
      "0.5 1 0\n1 1 0\nCELLS 8 32\n3 0 1 4\n3 0 4 3\n3 1 2 5\n3 1 5 4\n3 3 4 7\n"
      "3 3 7 6\n3 4 5 8\n3 4 8 7\nCELL_TYPES 8\n5\n5\n5\n5\n5\n5\n5\n5\n"
      "POINT_DATA 9\nSCALARS phi double 1\nLOOKUP_TABLE default\n"
      "0.25\n0.25\n0.25\n0.25\n0.25\n0.25\n0.25\n0.25\n0.25\n";
  CHECK(read_file(path) == expected);
  std::remove(path.c_str());
}

TEST_CASE("vector fields are padded to three components and round-trip") {
  MeshSpec s;
  s.extents = Vector::Constant(2, 1.0);
  s.divisions = IntVector::Constant(2, 3);
  s.layers = 1;
  Mesh m = build_mesh(s, {});
  Rng rng(77);
  Matrix u(2, m.n_nodes());
  Matrix phi(1, m.n_nodes());
  for (Index i = 0; i < m.n_nodes(); ++i) {
    u(0, i) = rng.next_normal();
    u(1, i) = rng.next_normal();
    phi(0, i) = 2.0 * rng.next_uniform() - 1.0;
  }
  const std::string path = "unit_io_roundtrip.vtk";
  write_vtk(m, {{"phi", phi}, {"u", u}}, path);

  VtkData data = read_vtk(path);
  CHECK(data.n_points == m.n_nodes());
  REQUIRE(data.point_data.count("phi") == 1);
  REQUIRE(data.point_data.count("u") == 1);
  CHECK(data.point_data["u"].rows() == 3);
  CHECK((data.point_data["u"].row(2).array() == 0.0).all());
  CHECK((data.point_data["phi"].row(0) - phi.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((data.point_data["u"].topRows(2) - u).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("png heatmaps carry the grid dimensions") {
  MeshSpec s;
  s.extents = Vector::Constant(2, 1.0);
  s.divisions = IntVector::Constant(2, 4);
  s.layers = 1;
  Mesh m = build_mesh(s, {});
  Matrix frac(2, m.n_nodes());
  for (Index i = 0; i < m.n_nodes(); ++i) {
    frac(0, i) = m.nodes(0, i);
    frac(1, i) = 1.0 - frac(0, i);
  }
  const std::string path = "unit_io_heat.png";
  write_png_heatmap(m, frac, path);
  std::ifstream is(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 60);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  for (int i = 0; i < 8; ++i) CHECK(static_cast<unsigned char>(bytes[i]) == sig[i]);
  // IHDR width/height big-endian at offsets 16 and 20: a 5x5 pixel image
  const auto be32 = [&](int off) {
    return (static_cast<unsigned char>(bytes[off]) << 24) |
           (static_cast<unsigned char>(bytes[off + 1]) << 16) |
           (static_cast<unsigned char>(bytes[off + 2]) << 8) |
           static_cast<unsigned char>(bytes[off + 3]);
  };
  CHECK(be32(16) == 5);
  CHECK(be32(20) == 5);
  std::remove(path.c_str());
}

TEST_CASE("history rows format deterministically") {
  IterationRecord r;
  r.k = 12;
  r.level = 1;
  r.j = 0.3517289123456789;
  r.E = 6.7;
  r.E_scalar = 13.4;
  r.F = 0.15;
  r.W = 0.0013777;
  r.lambda = 0.005;
  r.alpha = 0.25;
  r.backtracks = 2;
  r.stop_measure = 1.25e-3;
  r.v_h1 = 0.05;
  r.pdas_iters = 3;
  r.minres_iters = 210;
  const std::string a = history_csv_row(r);
  const std::string b = history_csv_row(r);
  CHECK(a == b);
  CHECK(a.find("12,1,0.351728912346,") == 0);
  CHECK(history_csv_header().find("stop_measure") != std::string::npos);
  // wall time never enters the deterministic log
  CHECK(history_csv_header().find("wall") == std::string::npos);
}
