// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "amtopo/vmpt.hpp"

namespace amtopo {

/// Parsed experiment description: sectioned key-value text with typed
/// scalars, vectors and box lists. Every field has a validated default
/// except the geometry, the mass and the fixture region.
struct ProblemConfig {
  // [mesh]
  Vector extents;
  IntVector divisions;
  int layers = 10;
  int build_axis = -1;
  // [phase]
  bool scalar = true;
  int phases = 2;
  Vector mass;  // one entry (scalar form) or `phases` entries on the simplex
  double epsilon = 0.025;
  // [materials], void pair stored before the eps^2 scaling
  std::vector<Lame> material;        // stiff-to-weak, material phases only
  Lame ersatz{1.0, 1.0};
  std::vector<Lame> build_material;  // construction-stage pairs
  std::vector<double> hardening;     // lambda=mu of phase 1 by depth below top
  // [forces]
  Vector traction;          // g on Gamma_N
  Vector body_const;        // phi-independent part of f
  Vector body_material;     // f contribution scaled by (1 - phi_void)
  Vector gravity_material;  // f^c scaled by (1 - phi_void)
  // [boundary]
  std::vector<Box> dirichlet;
  std::vector<Box> neumann;
  std::vector<Box> plate;
  // [cost]
  double beta1 = 48.0;
  double beta2 = 0.02;
  std::string weights = "w1";  // w1 | w2 | w3 | wnorm | table
  Vector weight_table;
  // [vmpt]
  std::string metric = "a1";
  double tol = 1e-3;
  int k_max = 5000;
  double tau = 0.5;
  double sigma = 1e-4;
  double lambda0 = 0.005;
  double lambda_min = 1e-10;
  double lambda_max = 1e10;
  double lambda_c = 0.75;
  bool nested = true;
  int m0 = 4;
  int khat = 0;  // 0: 16 for the scalar form, 8 for the multiphase form
  int growth = 2;
  double noise = 0.05;
  // [output]
  std::string out_dir = "out";
  int stride = 0;
  std::uint64_t seed = 1;
  int threads = 1;

  int dim() const { return static_cast<int>(extents.size()); }
  int khat_effective() const { return khat > 0 ? khat : (scalar ? 16 : 8); }
  void validate() const;
};

/// Parses the sectioned key-value text. Unknown keys, type mismatches and
/// violated invariants raise ConfigError with the offending key path.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);

/// Normalized echo with every default materialized. Re-parsing the dump
/// reproduces the same configuration.
std::string dump_config(const ProblemConfig& cfg);

/// Applies "section.key=value" using the same parser as the file format.
void apply_override(ProblemConfig& cfg, const std::string& key, const std::string& value);

MeshSpec mesh_spec(const ProblemConfig& cfg);
VMPTConfig vmpt_config(const ProblemConfig& cfg);

/// Builds the problem at the configured resolution, or at a coarser level
/// of the nesting ladder.
Problem make_problem(const ProblemConfig& cfg);
Problem make_problem_at(const ProblemConfig& cfg, const IntVector& divisions, int layers);

std::string history_csv_header();
std::string history_csv_row(const IterationRecord& rec);

}  // namespace amtopo
