// SPDX-License-Identifier: Apache-2.0
#include "amtopo/vmpt.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace amtopo {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double h1_seminorm(const Problem& prob, const Eigen::Ref<const Vector>& v) {
  const Matrix view = prob.space.view(v);
  return std::sqrt(std::max(0.0, ((view * prob.stiffness_scalar).array() * view.array()).sum()));
}

double h1_norm(const Problem& prob, const Eigen::Ref<const Vector>& v) {
  const Matrix view = prob.space.view(v);
  const double semi2 = ((view * prob.stiffness_scalar).array() * view.array()).sum();
  const double l2 = (view.array().square().rowwise() *
                     prob.mesh.lumped_mass.transpose().array())
                        .sum();
  return std::sqrt(std::max(0.0, semi2 + l2));
}

}  // namespace

void VMPTConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("vmpt: tau must be in (0,1)");
  if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("vmpt: sigma must be in (0,1)");
  if (!(lambda_c > 0.0 && lambda_c < 1.0)) throw ConfigError("vmpt: lambda factor must be in (0,1)");
  if (!(lambda_min > 0.0 && lambda_min <= lambda0 && lambda0 <= lambda_max))
    throw ConfigError("vmpt: need 0 < lambda_min <= lambda0 <= lambda_max");
  if (k_max < 0) throw ConfigError("vmpt: k_max must be nonnegative");
  if (nest_m0 < 1 || nest_khat < 1 || nest_growth < 2)
    throw ConfigError("vmpt: invalid nesting plan parameters");
}

double lambda_update(double lambda, double alpha, const VMPTConfig& cfg) {
  if (alpha < 1.0) return std::max(cfg.lambda_c * lambda, cfg.lambda_min);
  return std::min(lambda / cfg.lambda_c, cfg.lambda_max);
}

int armijo_steps(const std::function<double(double)>& j_at, double j0, double slope,
                 double sigma, double tau, int max_backtracks) {
  double alpha = 1.0;
  for (int m = 0; m <= max_backtracks; ++m) {
    if (j_at(alpha) <= j0 + alpha * sigma * slope) return m;
    alpha *= tau;
  }
  return -1;
}

Vector initialize(const Problem& prob, const VMPTConfig& cfg) {
  Rng rng(cfg.seed);
  Vector phi(prob.space.size());
  const Matrix base = prob.space.target_mass.replicate(1, prob.space.n_nodes);
  phi = prob.space.flatten(base);
  for (Index i = 0; i < phi.size(); ++i) phi[i] += cfg.noise_sigma * rng.next_normal();

  Constraints con = design_constraints(prob);
  MetricOperator metric(prob, MetricKind::A1);
  Subproblem sp{&metric, &con, Vector::Zero(prob.space.size()), phi};
  QPResult proj = solve_subproblem(sp, nullptr, cfg.qp);
  return proj.minimizer;
}

RunResult vmpt_run(const Problem& prob, const VMPTConfig& cfg, const Vector& phi0,
                   const RunHooks* hooks, PDASState* warm_io, int level, int k_offset) {
  cfg.validate();
  const auto t_start = Clock::now();
  const bool needs_linearization = cfg.metric != MetricKind::A1;
  const EvalOptions eval_opts{cfg.threads, false};

  RunResult run;
  Constraints con = design_constraints(prob);

  Vector phi = phi0;
  if (prob.space.feasibility_violation(phi) > 1e-10 ||
      prob.space.mass_violation(phi, prob.mesh) > 1e-10) {
    MetricOperator metric(prob, MetricKind::A1);
    Subproblem sp{&metric, &con, Vector::Zero(prob.space.size()), phi};
    phi = solve_subproblem(sp, nullptr, cfg.qp).minimizer;
  }

  State state = evaluate(prob, phi, eval_opts);
  if (needs_linearization) attach_linearization(prob, state);

  PDASState warm;
  if (warm_io && warm_io->valid()) warm = *warm_io;
  double lambda = std::clamp(cfg.lambda0, cfg.lambda_min, cfg.lambda_max);
  bool measure_was_above = false;
  long total_pdas = 0;

  const auto track_feasibility = [&](const Vector& p) {
    run.max_feasibility_violation =
        std::max(run.max_feasibility_violation, prob.space.feasibility_violation(p));
    run.max_mass_violation =
        std::max(run.max_mass_violation, prob.space.mass_violation(p, prob.mesh));
  };
  track_feasibility(state.phi);

  for (int k = 0; k <= cfg.k_max; ++k) {
    const auto t_iter = Clock::now();
    const Vector grad = reduced_gradient(prob, state);
    MetricOperator metric(prob, state, cfg.metric);

    // subproblem with the lambda-scaled gradient; on solver failure shrink
    // lambda (the rule's own factor) and retry
    QPResult qp;
    for (;;) {
      Subproblem sp{&metric, &con, lambda * grad, state.phi};
      try {
        qp = solve_subproblem(sp, warm.valid() ? &warm : nullptr, cfg.qp);
        break;
      } catch (const SolverError&) {
        if (lambda <= cfg.lambda_min * (1.0 + 1e-12)) throw;
        lambda = std::max(cfg.lambda_c * lambda, cfg.lambda_min);
        warm = PDASState{};  // the stalled multipliers are not worth keeping
      }
    }
    warm = qp.state;
    total_pdas += qp.pdas_iters;
    run.max_q_value = std::max(run.max_q_value, qp.q_value);

    const Vector& v = qp.direction;
    const double semi = h1_seminorm(prob, v);
    const double stop_measure = std::sqrt(prob.beta2_eff() * prob.eps) * semi;

    IterationRecord rec;
    rec.k = k_offset + k;
    rec.level = level;
    rec.j = state.cost.j;
    rec.E = state.cost.E;
    rec.E_scalar = state.cost.E_scalar;
    rec.F = state.cost.F;
    rec.W = state.cost.W;
    rec.lambda = lambda;
    rec.stop_measure = stop_measure;
    rec.v_h1 = h1_norm(prob, v);
    rec.pdas_iters = qp.pdas_iters;
    rec.minres_iters = qp.minres_iters;
    rec.q_value = qp.q_value;

    if (stop_measure > cfg.tol) measure_was_above = true;
    // Accept a stop only out of the lambda transient: either the measure
    // already crossed tol from above, or the step scale reached its steady
    // regime, or the direction vanishes identically.
    if (stop_measure <= cfg.tol &&
        (measure_was_above || lambda >= 1.0 || stop_measure == 0.0)) {
      rec.alpha = 0.0;
      rec.wall_ms = ms_since(t_iter);
      run.history.push_back(rec);
      if (hooks && hooks->on_iteration) hooks->on_iteration(rec);
      run.converged = true;
      break;
    }

    const double slope = grad.dot(v);
    if (!(slope < 0.0)) {
      std::ostringstream oss;
      oss << "search direction is not a descent direction (slope " << slope
          << ", |v|_H1 " << rec.v_h1 << ", k " << rec.k << ")";
      throw SolverError(oss.str());
    }

    // backtracking on the true cost; the accepted trial state is reused
    double alpha = 1.0;
    int backtracks = 0;
    State trial;
    for (;;) {
      trial = evaluate(prob, state.phi + alpha * v, eval_opts);
      if (trial.cost.j <= state.cost.j + alpha * cfg.sigma * slope) break;
      alpha *= cfg.tau;
      if (++backtracks > cfg.max_backtracks) {
        std::ostringstream oss;
        oss << "sufficient decrease failed after " << cfg.max_backtracks
            << " backtracks (k " << rec.k << ", slope " << slope << ", j " << state.cost.j
            << ")";
        throw SolverError(oss.str());
      }
    }
    if (trial.cost.j > state.cost.j) run.monotone = false;
    if (needs_linearization) attach_linearization(prob, trial);

    state = std::move(trial);
    track_feasibility(state.phi);
    lambda = lambda_update(lambda, alpha, cfg);
    ++run.iterations;
    run.final_lambda = lambda;

    rec.alpha = alpha;
    rec.backtracks = backtracks;
    rec.wall_ms = ms_since(t_iter);
    run.history.push_back(rec);
    if (hooks && hooks->on_iteration) hooks->on_iteration(rec);
    if (hooks && hooks->on_checkpoint && hooks->checkpoint_stride > 0 &&
        (k + 1) % hooks->checkpoint_stride == 0)
      hooks->on_checkpoint(rec.k, prob, state.phi);
  }

  if (warm_io) *warm_io = warm;
  if (run.final_lambda == 0.0) run.final_lambda = lambda;
  run.phi = state.phi;
  run.cost = state.cost;
  run.wall_seconds = ms_since(t_start) / 1000.0;
  run.mean_pdas = run.history.empty() ? 0.0 : static_cast<double>(total_pdas) /
                                                  static_cast<double>(run.history.size());
  return run;
}

std::vector<NestLevel> nesting_plan(const MeshSpec& final_spec, int m0, int khat, int growth) {
  final_spec.validate();
  const int d = final_spec.dim();
  const int b = final_spec.axis();
  const int target_m = final_spec.layers;
  const int target_div = final_spec.divisions[b];

  std::vector<NestLevel> plan;
  int m = std::min(m0, target_m);
  int div_b = m * khat;
  if (div_b > target_div)
    throw ConfigError("nesting: m0 * khat exceeds the target build-axis resolution");

  const auto push_level = [&](int layers, int div) {
    NestLevel lvl;
    lvl.layers = layers;
    lvl.divisions = IntVector(d);
    for (int a = 0; a < d; ++a) {
      const long num = static_cast<long>(final_spec.divisions[a]) * div;
      if (num % target_div != 0)
        throw ConfigError("nesting: level resolution does not divide the target mesh");
      lvl.divisions[a] = static_cast<int>(num / target_div);
    }
    plan.push_back(lvl);
  };

  for (;;) {
    push_level(m, div_b);
    if (m == target_m) break;
    m = std::min(growth * m, target_m);
    div_b = m * khat;
    if (div_b > target_div)
      throw ConfigError("nesting: layer growth overshoots the target resolution");
  }
  while (div_b < target_div) {
    div_b *= 2;
    if (div_b > target_div)
      throw ConfigError("nesting: target resolution is not reachable by halving the mesh width");
    push_level(target_m, div_b);
  }
  return plan;
}

RunResult nested_run(const std::function<Problem(const IntVector&, int)>& make_problem,
                     const MeshSpec& final_spec, const VMPTConfig& cfg,
                     const RunHooks* hooks) {
  const auto t_start = Clock::now();
  const std::vector<NestLevel> plan =
      nesting_plan(final_spec, cfg.nest_m0, cfg.nest_khat, cfg.nest_growth);

  RunResult total;
  PDASState warm;
  Vector phi;
  const Problem* prev = nullptr;
  Problem prob;
  long total_pdas = 0;

  for (std::size_t lvl = 0; lvl < plan.size(); ++lvl) {
    Problem next = make_problem(plan[lvl].divisions, plan[lvl].layers);
    if (lvl == 0) {
      prob = std::move(next);
      phi = initialize(prob, cfg);
    } else {
      // carry the design and the subproblem multipliers to the finer level
      const Problem& coarse = *prev;
      Matrix phi_f = interpolate_field(coarse.mesh, coarse.space.view(phi), next.mesh);
      PDASState fine_warm;
      if (warm.valid()) {
        fine_warm.x =
            next.space.flatten(interpolate_field(coarse.mesh, coarse.space.view(warm.x), next.mesh));
        fine_warm.mu =
            next.space.flatten(interpolate_field(coarse.mesh, coarse.space.view(warm.mu), next.mesh));
        const Index mf = next.space.scalar
                             ? 1
                             : next.space.n_nodes + next.space.comps - 1;
        fine_warm.nu = Vector::Zero(mf);
        if (next.space.scalar) {
          fine_warm.nu[0] = warm.nu[0];
        } else {
          Matrix nu_nodes = warm.nu.head(coarse.space.n_nodes).transpose();
          fine_warm.nu.head(next.space.n_nodes) =
              interpolate_field(coarse.mesh, nu_nodes, next.mesh).transpose();
          fine_warm.nu.tail(next.space.comps - 1) = warm.nu.tail(coarse.space.comps - 1);
        }
        warm = fine_warm;
      }
      prob = std::move(next);
      phi = prob.space.flatten(phi_f);
    }

    VMPTConfig level_cfg = cfg;
    if (lvl > 0) level_cfg.lambda0 = std::clamp(total.final_lambda, cfg.lambda_min, cfg.lambda_max);
    RunResult level_run = vmpt_run(prob, level_cfg, phi, hooks, &warm, static_cast<int>(lvl),
                                   total.iterations);
    total.final_lambda = level_run.final_lambda;
    phi = level_run.phi;
    total.history.insert(total.history.end(), level_run.history.begin(),
                         level_run.history.end());
    total.iterations += level_run.iterations;
    total.converged = level_run.converged;
    total.cost = level_run.cost;
    total.max_feasibility_violation =
        std::max(total.max_feasibility_violation, level_run.max_feasibility_violation);
    total.max_mass_violation = std::max(total.max_mass_violation, level_run.max_mass_violation);
    total.max_q_value = std::max(total.max_q_value, level_run.max_q_value);
    total.monotone = total.monotone && level_run.monotone;
    total_pdas += static_cast<long>(level_run.mean_pdas * level_run.history.size());
    if (hooks && hooks->on_level)
      hooks->on_level(static_cast<int>(lvl), prob, phi, lvl + 1 == plan.size());
    prev = &prob;
  }

  total.phi = phi;
  total.wall_seconds = ms_since(t_start) / 1000.0;
  total.mean_pdas = total.history.empty() ? 0.0 : static_cast<double>(total_pdas) /
                                                      static_cast<double>(total.history.size());
  return total;
}

}  // namespace amtopo
