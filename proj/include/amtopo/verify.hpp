// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "amtopo/cost.hpp"
#include "amtopo/mesh.hpp"

namespace amtopo {

/// Largest ratio |y|_L2 / |grad y|_L2 over the P1 functions on the slice
/// that vanish on the building plate. Dense generalized eigensolve up to
/// `dense_limit` unknowns, inverse power iteration beyond.
double poincare_quotient(const Mesh& mesh, const SliceIndex& sl, int dense_limit = 300);

/// Largest ratio |grad u|^2_L2 / |E(u)|^2_L2 over plate-clamped P1 vector
/// fields on the slice.
double korn_quotient(const Mesh& mesh, const SliceIndex& sl, int dense_limit = 300);

/// Smallest generalized eigenvalue of the pure-material elastic form
/// against the full H1 inner product on the slice (discrete coercivity).
double coercivity_constant(const Mesh& mesh, const SliceIndex& sl, const Lame& material,
                           int dense_limit = 300);

struct QuotientRow {
  int layer = 0;
  double height = 0.0;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::vector<QuotientRow> poincare;    // value <= height
  std::vector<QuotientRow> korn;        // value <= 2^{d-1} * full-domain value
  std::vector<QuotientRow> coercivity;  // chain bound from the two inequalities
  double korn_full = 0.0;
  bool pass = true;

  std::string text() const;
  std::string key_values() const;
};

/// Runs the quotient checks on slices at h in {H, H/2, H/4, ...} given by
/// the mesh's layer structure (layer counts must make these slices exist).
VerificationReport verify_inequalities(const Mesh& mesh, const Lame& material,
                                       const std::vector<int>& layers_to_check = {});

struct GradientAuditRow {
  double step = 0.0;
  double err_total = 0.0;  // relative error of the full derivative
  double err_F = 0.0;
  double err_W = 0.0;
  double err_E = 0.0;
};

struct GradientAudit {
  std::vector<GradientAuditRow> rows;  // one per step size, worst over directions
  double best_total = 0.0;             // min over steps of err_total
  std::string text() const;
  std::string key_values() const;
};

/// Central-difference check of the assembled cost derivative, per term,
/// for the given mass-free directions at an interior design.
GradientAudit gradient_audit(const Problem& prob, const Eigen::Ref<const Vector>& phi,
                             const std::vector<Vector>& directions,
                             const std::vector<double>& steps = {1e-4, 1e-5, 1e-6});

}  // namespace amtopo
