// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "amtopo/cost.hpp"
#include "amtopo/qp.hpp"

namespace amtopo {

struct VMPTConfig {
  double tau = 0.5;    // backtracking factor
  double sigma = 1e-4; // slope fraction of the sufficient-decrease test
  double lambda0 = 0.005;
  double lambda_min = 1e-10;
  double lambda_max = 1e10;
  double lambda_c = 0.75;
  MetricKind metric = MetricKind::A1;
  double tol = 1e-3;  // on sqrt(beta2_eff * eps) |v|_H1
  int k_max = 5000;
  int max_backtracks = 60;
  int threads = 1;
  QPOptions qp;
  // nested continuation
  int nest_m0 = 4;
  int nest_khat = 16;  // cells per layer on the coarsest level
  int nest_growth = 2;
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;

  void validate() const;
};

struct IterationRecord {
  int k = 0;
  int level = 0;
  double j = 0, E = 0, E_scalar = 0, F = 0, W = 0;
  double lambda = 0, alpha = 0;
  int backtracks = 0;
  double stop_measure = 0;  // sqrt(beta2_eff eps) |v|_H1 seminorm
  double v_h1 = 0;          // full H1 norm of the direction
  int pdas_iters = 0;
  long minres_iters = 0;
  double q_value = 0;
  double wall_ms = 0;  // kept out of the deterministic log
};

struct RunHooks {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(int k, const Problem&, const Vector&)> on_checkpoint;
  std::function<void(int level, const Problem&, const Vector&, bool final_level)> on_level;
  int checkpoint_stride = 0;
};

struct RunResult {
  Vector phi;
  CostBreakdown cost;
  std::vector<IterationRecord> history;
  bool converged = false;
  int iterations = 0;  // accepted steps across all levels
  double wall_seconds = 0;
  double mean_pdas = 0;
  double final_lambda = 0;
  // invariants tracked across the whole run
  double max_feasibility_violation = 0;
  double max_mass_violation = 0;
  double max_q_value = 0;       // q_k(y) of every accepted subproblem
  bool monotone = true;         // j never increased on accepted steps
};

/// lambda rule: grow by 1/c after full steps, shrink by c otherwise.
double lambda_update(double lambda, double alpha, const VMPTConfig& cfg);

/// Smallest m with j(phi + tau^m v) <= j(phi) + tau^m sigma slope; -1 when
/// max_backtracks is exceeded. The generic form used by the line search.
int armijo_steps(const std::function<double(double)>& j_at, double j0, double slope,
                 double sigma, double tau, int max_backtracks);

/// Seeded constant-plus-noise start, projected onto the admissible set by
/// one zero-gradient subproblem solve.
Vector initialize(const Problem& prob, const VMPTConfig& cfg);

/// The variable-metric projection-type descent loop on one problem level.
RunResult vmpt_run(const Problem& prob, const VMPTConfig& cfg, const Vector& phi0,
                   const RunHooks* hooks = nullptr, PDASState* warm_io = nullptr,
                   int level = 0, int k_offset = 0);

struct NestLevel {
  int layers = 0;
  IntVector divisions;
};

/// Level ladder: double the layers from m0 up to the target, then halve
/// the mesh width until the target resolution is reached.
std::vector<NestLevel> nesting_plan(const MeshSpec& final_spec, int m0, int khat, int growth);

/// Nested continuation: solve coarse-to-fine, carrying the design and the
/// subproblem multipliers to the next level.
RunResult nested_run(const std::function<Problem(const IntVector&, int)>& make_problem,
                     const MeshSpec& final_spec, const VMPTConfig& cfg,
                     const RunHooks* hooks = nullptr);

}  // namespace amtopo
