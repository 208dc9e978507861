// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "amtopo/cost.hpp"
#include "amtopo/types.hpp"

namespace amtopo {

struct MinresResult {
  Vector x;
  int iters = 0;
  double residual = 0.0;  // final residual norm (absolute)
  bool converged = false;
  std::vector<double> history;  // residual norm estimates per iteration
};

/// MINRES for symmetric (possibly indefinite) operators, starting from x0.
/// Stops when the residual norm falls below tol_abs or after max_iters.
MinresResult minres(const std::function<Vector(const Vector&)>& apply,
                    const Eigen::Ref<const Vector>& rhs, const Eigen::Ref<const Vector>& x0,
                    double tol_abs, int max_iters);

/// Bound and equality constraints of the projection subproblem. Equality
/// rows are normalized to unit Euclidean norm.
struct Constraints {
  Vector lb;       // -inf entries allowed
  Vector ub;       // +inf entries allowed
  SparseMatrix E;  // m x n equality rows
  Vector e;        // m right sides

  Index size() const { return lb.size(); }
  Index rows() const { return E.rows(); }
  double violation(const Eigen::Ref<const Vector>& x) const;
};

/// Simplex (or box) plus mass constraints of the admissible set.
Constraints design_constraints(const Problem& prob);

/// min over y of  0.5 |y - anchor|_A^2 + gradient . (y - anchor)
/// subject to the constraints; `gradient` already carries the step scaling.
struct Subproblem {
  const MetricOperator* metric = nullptr;
  const Constraints* constraints = nullptr;
  Vector gradient;
  Vector anchor;
};

/// Primal iterate with bound and equality multipliers; reusable as the
/// warm start of the next solve.
struct PDASState {
  Vector x;
  Vector mu;
  Vector nu;
  bool valid() const { return x.size() > 0; }
};

struct QPOptions {
  double c_active = 0.0;      // complementarity scaling; 0 = match the metric scale
  double tol = 1e-10;         // KKT residual, relative to 1 + |gradient|
  double minres_tol = 1e-11;  // relative inner tolerance
  int minres_cap_factor = 10; // iteration cap = factor * unknowns
  int max_pdas = 50;
  double damping_factor = 0.75;
  double min_step = 1e-8;
  int max_recovery = 20;      // undamped fallback steps for degenerate sets
  double feas_target = 1e-11; // equality refinement threshold
};

struct QPResult {
  Vector minimizer;
  Vector direction;  // minimizer - anchor
  PDASState state;
  int pdas_iters = 0;
  long minres_iters = 0;
  int dampings = 0;
  int recoveries = 0;
  double residual = 0.0;
  double q_value = 0.0;
  std::vector<double> residual_history;
};

/// Damped primal-dual active set solve of the subproblem. Throws
/// SolverError (with the residual history) when the iteration stalls or
/// the cap is reached.
QPResult solve_subproblem(const Subproblem& sp, const PDASState* warm_start,
                          const QPOptions& opts = {});

}  // namespace amtopo
