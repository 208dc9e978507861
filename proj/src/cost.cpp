// SPDX-License-Identifier: Apache-2.0
#include "amtopo/cost.hpp"

#include <atomic>
#include <future>

namespace amtopo {

double WeightScheme::omega(int k, double delta, double plate_area) const {
  switch (kind) {
    case WeightKind::PerHeight:
    case WeightKind::TopLayer:
      return 1.0 / (k * delta);
    case WeightKind::Uniform:
      return 1.0;
    case WeightKind::Normalized:
      return 1.0 / (k * delta * plate_area);
    case WeightKind::Table:
      return table[k - 1];
  }
  return 1.0;
}

void WeightScheme::validate(int layers, double delta, double plate_area) const {
  if (kind == WeightKind::Table && table.size() != static_cast<Index>(layers))
    throw ConfigError("weights: table needs one entry per layer");
  for (int k = 1; k <= layers; ++k)
    if (!(omega(k, delta, plate_area) > 0.0))
      throw ConfigError("weights: omega(k delta) must be positive");
}

Problem build_problem(Mesh mesh, DesignSpace space, MaterialSet materials, ForceSpec forces,
                      WeightScheme weights, double beta1, double beta2, double eps) {
  Problem prob;
  prob.mesh = std::move(mesh);
  prob.space = std::move(space);
  prob.materials = std::move(materials);
  prob.forces = std::move(forces);
  prob.weights = std::move(weights);
  prob.beta1 = beta1;
  prob.beta2 = beta2;
  prob.eps = eps;
  prob.layers = prob.mesh.spec.layers;

  AMTOPO_REQUIRE(prob.space.n_nodes == prob.mesh.n_nodes(), "design space does not match mesh");
  prob.materials.validate();
  if (static_cast<int>(prob.materials.final_use.size()) != prob.space.phases())
    throw ConfigError("materials: table size differs from phase count");
  prob.weights.validate(prob.layers, prob.delta(), prob.mesh.plate_area());
  prob.forces.top_layer_only = prob.weights.top_layer_only();
  if (!(eps > 0.0)) throw ConfigError("interface parameter must be positive");
  if (prob.mesh.dirichlet_nodes.empty())
    throw ConfigError("mechanical system needs a nonempty fixture region");
  if (prob.mesh.plate_nodes.empty()) throw ConfigError("building plate region is empty");

  prob.potential = standard_potential_matrix(prob.space.phases());
  prob.stiffness_scalar = scalar_stiffness(prob.mesh);
  prob.slices.reserve(prob.layers);
  for (int k = 1; k <= prob.layers; ++k) prob.slices.push_back(slice(prob.mesh, k, prob.layers));
  prob.ms = ms_context(prob.mesh, prob.materials, prob.forces);
  prob.ams.reserve(prob.layers);
  for (int k = 1; k <= prob.layers; ++k)
    prob.ams.push_back(ams_context(prob.mesh, prob.slices[k - 1], prob.materials, prob.forces));
  return prob;
}

State evaluate(const Problem& prob, const Eigen::Ref<const Vector>& phi,
               const EvalOptions& opts) {
  State st;
  st.phi = phi;
  st.ams.resize(prob.layers);
  st.self_weights.assign(prob.layers, 0.0);
  if (opts.with_linearization) st.F_ams.resize(prob.layers);

  const auto solve_layer = [&](int k) {
    st.ams[k] = assemble_and_solve(prob.mesh, prob.ams[k], prob.space, phi);
    st.self_weights[k] = st.ams[k].self_weight;
    if (opts.with_linearization)
      st.F_ams[k] = linearization_matrix(prob.mesh, prob.ams[k], st.ams[k], prob.space, phi);
  };

  const int workers = std::max(1, opts.threads);
  if (workers == 1 || prob.layers == 1) {
    st.ms = assemble_and_solve(prob.mesh, prob.ms, prob.space, phi);
    for (int k = 0; k < prob.layers; ++k) solve_layer(k);
  } else {
    std::vector<std::future<void>> tasks;
    std::atomic<int> next{-1};  // -1 encodes the mechanical system
    const int total = prob.layers;
    for (int w = 0; w < std::min(workers, total + 1); ++w)
      tasks.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const int k = next.fetch_add(1);
          if (k >= total) return;
          if (k < 0)
            st.ms = assemble_and_solve(prob.mesh, prob.ms, prob.space, phi);
          else
            solve_layer(k);
        }
      }));
    for (auto& t : tasks) t.get();
  }
  if (opts.with_linearization) {
    st.F_ms = linearization_matrix(prob.mesh, prob.ms, st.ms, prob.space, phi);
    st.has_linearization = true;
  }

  CostBreakdown& c = st.cost;
  c.beta1 = prob.beta1;
  c.beta2 = prob.beta2;
  c.F = st.ms.compliance;
  c.W = overhang_penalty(prob, st.self_weights);
  const double gl = ginzburg_landau(prob.mesh, prob.space, prob.stiffness_scalar, prob.potential,
                                    phi, prob.eps);
  c.E = prob.space.scalar ? 0.5 * gl : gl;
  c.E_scalar = prob.space.scalar ? gl : 2.0 * gl;
  c.j = c.F + prob.beta1 * c.W + prob.beta2 * c.E;
  return st;
}

double overhang_penalty(const Problem& prob, const std::vector<double>& self_weights) {
  AMTOPO_REQUIRE(static_cast<int>(self_weights.size()) == prob.layers, "layer count mismatch");
  const double delta = prob.delta();
  double w = 0.0;
  for (int k = 1; k <= prob.layers; ++k) w += prob.omega(k) * self_weights[k - 1];
  return delta * w;
}

Vector reduced_gradient(const Problem& prob, const State& state) {
  Vector g = compliance_gradient(prob.mesh, prob.ms, state.ms, prob.space, state.phi);
  const double delta = prob.delta();
  for (int k = 1; k <= prob.layers; ++k) {
    const double w = prob.beta1 * delta * prob.omega(k);
    if (w != 0.0)
      g += w * self_weight_gradient(prob.mesh, prob.ams[k - 1], state.ams[k - 1], prob.space,
                                    state.phi);
  }
  g += prob.beta2_eff() * ginzburg_landau_gradient(prob.mesh, prob.space, prob.stiffness_scalar,
                                                   prob.potential, state.phi, prob.eps);
  return g;
}

MetricOperator::MetricOperator(const Problem& prob, const State& state, MetricKind kind)
    : prob_(&prob), state_(&state), kind_(kind) {
  if (kind_ != MetricKind::A1)
    AMTOPO_REQUIRE(state.has_linearization,
                   "variable metrics need the linearization matrices of the current state");
}

MetricOperator::MetricOperator(const Problem& prob, MetricKind kind)
    : prob_(&prob), kind_(kind) {
  AMTOPO_REQUIRE(kind == MetricKind::A1, "stateless metric is only available for a1");
}

void attach_linearization(const Problem& prob, State& state) {
  if (state.has_linearization) return;
  state.F_ams.resize(prob.layers);
  for (int k = 0; k < prob.layers; ++k)
    state.F_ams[k] = linearization_matrix(prob.mesh, prob.ams[k], state.ams[k], prob.space, state.phi);
  state.F_ms = linearization_matrix(prob.mesh, prob.ms, state.ms, prob.space, state.phi);
  state.has_linearization = true;
}

Vector MetricOperator::apply(const Eigen::Ref<const Vector>& p) const {
  const DesignSpace& space = prob_->space;
  const Matrix pv = space.view(p);
  Matrix out = (prob_->beta2_eff() * prob_->eps) * (pv * prob_->stiffness_scalar);
  Vector result = Eigen::Map<const Vector>(out.data(), out.size());

  if (kind_ == MetricKind::A2 || kind_ == MetricKind::A3) {
    const Vector rhs = state_->F_ms * p;
    result += 2.0 * (state_->F_ms.transpose() * state_->ms.solve(rhs));
    ++solves_;
  }
  if (kind_ == MetricKind::A3) {
    const double delta = prob_->delta();
    for (int k = 1; k <= prob_->layers; ++k) {
      const double w = 2.0 * prob_->beta1 * delta * prob_->omega(k);
      if (w == 0.0) continue;
      const Vector rhs = state_->F_ams[k - 1] * p;
      result += w * (state_->F_ams[k - 1].transpose() * state_->ams[k - 1].solve(rhs));
      ++solves_;
    }
  }
  return result;
}

MetricKind parse_metric(const std::string& name) {
  if (name == "a1") return MetricKind::A1;
  if (name == "a2") return MetricKind::A2;
  if (name == "a3") return MetricKind::A3;
  throw ConfigError("unknown metric '" + name + "' (expected a1, a2 or a3)");
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::A1: return "a1";
    case MetricKind::A2: return "a2";
    case MetricKind::A3: return "a3";
  }
  return "a1";
}

}  // namespace amtopo
