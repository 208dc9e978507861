// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "amtopo/elasticity.hpp"
#include "amtopo/mesh.hpp"
#include "amtopo/phasefield.hpp"

namespace amtopo {

/// Layer weight omega(k delta) of the overhang penalty.
enum class WeightKind {
  PerHeight,   // 1/h (full-domain gravity)
  Uniform,     // 1
  TopLayer,    // 1/h, gravity restricted to the newest layer
  Normalized,  // 1/|Omega_h|
  Table,       // user-supplied values
};

struct WeightScheme {
  WeightKind kind = WeightKind::PerHeight;
  Vector table;  // only for WeightKind::Table, one entry per layer

  double omega(int k, double delta, double plate_area) const;
  bool top_layer_only() const { return kind == WeightKind::TopLayer; }
  void validate(int layers, double delta, double plate_area) const;
};

struct CostBreakdown {
  double E = 0.0;         // interface energy, vector convention
  double E_scalar = 0.0;  // two-phase convention (= 2 E)
  double F = 0.0;         // mean compliance of the mechanical system
  double W = 0.0;         // layer-summed weighted self weights
  double j = 0.0;         // F + beta1 W + beta2 E
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Immutable description of one optimization problem instance. Element
/// sets, material tables and the scalar stiffness are built once; only
/// the design changes between evaluations.
struct Problem {
  Mesh mesh;
  std::vector<SliceIndex> slices;  // k = 1..M
  DesignSpace space;
  MaterialSet materials;
  ForceSpec forces;
  WeightScheme weights;
  PotentialMatrix potential;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double eps = 0.0;
  int layers = 1;
  SparseMatrix stiffness_scalar;
  ElasticContext ms;
  std::vector<ElasticContext> ams;  // k = 1..M

  /// Weight of the interface term in the representation the optimizer
  /// sees (the two-phase form carries half the vector-form weight).
  double beta2_eff() const { return space.scalar ? 0.5 * beta2 : beta2; }
  double delta() const { return mesh.spec.layer_thickness(); }
  double omega(int k) const { return weights.omega(k, delta(), mesh.plate_area()); }
};

Problem build_problem(Mesh mesh, DesignSpace space, MaterialSet materials, ForceSpec forces,
                      WeightScheme weights, double beta1, double beta2, double eps);

/// All solved systems and cost values at one design point.
struct State {
  Vector phi;
  ElasticSystem ms;
  std::vector<ElasticSystem> ams;
  std::vector<double> self_weights;  // F^c(k delta)
  CostBreakdown cost;
  // linearization matrices, only filled when a variable metric needs them
  SparseMatrix F_ms;
  std::vector<SparseMatrix> F_ams;
  bool has_linearization = false;
};

struct EvalOptions {
  int threads = 1;
  bool with_linearization = false;
};

/// Solves every state system at phi and evaluates the cost pieces. The
/// per-layer solves run in parallel; the reductions keep layer order.
State evaluate(const Problem& prob, const Eigen::Ref<const Vector>& phi,
               const EvalOptions& opts = {});

/// Fills the linearization matrices of an already evaluated state.
void attach_linearization(const Problem& prob, State& state);

/// Overhang penalty: delta * sum_k omega(k delta) F^c(k delta).
double overhang_penalty(const Problem& prob, const std::vector<double>& self_weights);

/// Assembled derivative of the reduced cost. Uses the adjoint shortcuts
/// (the states double as adjoints), so no extra solves are performed.
Vector reduced_gradient(const Problem& prob, const State& state);

enum class MetricKind { A1, A2, A3 };

/// The iteration-dependent inner product: A1 is the scaled gradient
/// product; A2 adds the positive compliance curvature through the
/// linearized mechanical system; A3 adds the construction-stage
/// counterparts. A2/A3 apply matrix-free through the cached
/// factorizations of `state`.
class MetricOperator {
 public:
  MetricOperator(const Problem& prob, const State& state, MetricKind kind);
  /// State-free gradient metric (A1 only).
  MetricOperator(const Problem& prob, MetricKind kind);

  Vector apply(const Eigen::Ref<const Vector>& p) const;
  double pairing(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& y) const {
    return apply(p).dot(y);
  }
  MetricKind kind() const { return kind_; }
  Index size() const { return prob_->space.size(); }
  long solves() const { return solves_; }
  /// Magnitude of the guaranteed part of the metric (the scaled gradient
  /// product); used to put the complementarity residual on the same scale.
  double scale_hint() const { return prob_->beta2_eff() * prob_->eps; }

 private:
  const Problem* prob_;
  const State* state_ = nullptr;
  MetricKind kind_;
  mutable long solves_ = 0;
};

MetricKind parse_metric(const std::string& name);
std::string metric_name(MetricKind kind);

}  // namespace amtopo
