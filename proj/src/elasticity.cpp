// SPDX-License-Identifier: Apache-2.0
#include "amtopo/elasticity.hpp"

#include <cmath>

namespace amtopo {

namespace {

Matrix mix_matrix(const std::vector<Lame>& table, bool mu) {
  const int n = static_cast<int>(table.size());
  Matrix M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Lame& c = table[std::max(i, j)];
      M(i, j) = mu ? c.mu : c.lambda;
    }
  return M;
}

/// Element-constant strain data of a displacement field.
struct StrainData {
  Matrix E;       // symmetric gradient
  double trace;   // divergence
  double norm2;   // E : E
};

StrainData element_strain(const Mesh& mesh, Index e, const Matrix& U) {
  const int d = mesh.dim;
  const Matrix& g = mesh.gradients(e);
  Matrix Du = Matrix::Zero(d, d);
  for (int v = 0; v <= d; ++v) Du += U.col(mesh.elements(v, e)) * g.col(v).transpose();
  StrainData s;
  s.E = 0.5 * (Du + Du.transpose());
  s.trace = Du.trace();
  s.norm2 = s.E.squaredNorm();
  return s;
}

Vector element_average(const Mesh& mesh, Index e, const Matrix& nodal) {
  const int d = mesh.dim;
  Vector avg = Vector::Zero(nodal.rows());
  for (int v = 0; v <= d; ++v) avg += nodal.col(mesh.elements(v, e));
  return avg / (d + 1);
}

}  // namespace

void MaterialSet::validate() const {
  const auto check_table = [](const std::vector<Lame>& t) {
    if (t.size() < 2) throw ConfigError("materials: need at least material and void");
    for (const Lame& c : t)
      if (!(c.lambda > 0.0) || !(c.mu > 0.0))
        throw ConfigError("materials: moduli must be positive");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (t[i].lambda > t[i - 1].lambda + 1e-14 || t[i].mu > t[i - 1].mu + 1e-14)
        throw ConfigError("materials: phases must be ordered stiffest to weakest");
  };
  check_table(final_use);
  if (build_by_depth.empty()) throw ConfigError("materials: missing construction table");
  for (const auto& t : build_by_depth) {
    check_table(t);
    if (t.size() != final_use.size())
      throw ConfigError("materials: construction table size differs from phase count");
  }
}

Lame interpolate_tensor(const Eigen::Ref<const Vector>& fractions,
                        const std::vector<Lame>& table) {
  AMTOPO_REQUIRE(fractions.size() == static_cast<Index>(table.size()),
                 "fraction/table size mismatch");
  const Matrix L = mix_matrix(table, false);
  const Matrix M = mix_matrix(table, true);
  return Lame{fractions.dot(L * fractions), fractions.dot(M * fractions)};
}

AffineForce material_weight(int dim, int phases, const Eigen::Ref<const Vector>& direction) {
  AffineForce f;
  f.base = direction;
  f.coupling = Matrix::Zero(dim, phases);
  f.coupling.col(phases - 1) = -direction;  // cancels on pure void
  return f;
}

ElasticContext ms_context(const Mesh& mesh, const MaterialSet& materials,
                          const ForceSpec& forces) {
  ElasticContext ctx;
  ctx.layer = 0;
  ctx.elements.resize(mesh.n_elements());
  for (Index e = 0; e < mesh.n_elements(); ++e) ctx.elements[e] = static_cast<int>(e);
  ctx.dirichlet = mesh.dirichlet_nodes;
  ctx.table_of_element.assign(ctx.elements.size(), 0);
  ctx.lambda_mix = {mix_matrix(materials.final_use, false)};
  ctx.mu_mix = {mix_matrix(materials.final_use, true)};
  ctx.body = forces.body;
  ctx.traction_facets = mesh.neumann_facets;
  ctx.traction = forces.traction;
  return ctx;
}

ElasticContext ams_context(const Mesh& mesh, const SliceIndex& sl, const MaterialSet& materials,
                           const ForceSpec& forces) {
  ElasticContext ctx;
  ctx.layer = sl.layer;
  ctx.elements = sl.elements;
  ctx.dirichlet = sl.plate_nodes;

  const int depth_tables =
      std::min<int>(sl.layer, static_cast<int>(materials.build_by_depth.size()));
  ctx.lambda_mix.reserve(depth_tables);
  ctx.mu_mix.reserve(depth_tables);
  for (int t = 0; t < depth_tables; ++t) {
    ctx.lambda_mix.push_back(mix_matrix(materials.build_table(t), false));
    ctx.mu_mix.push_back(mix_matrix(materials.build_table(t), true));
  }

  const int b = mesh.spec.axis();
  const double delta = mesh.spec.layer_thickness();
  ctx.table_of_element.resize(ctx.elements.size());
  if (forces.top_layer_only) ctx.weight_active.resize(ctx.elements.size());
  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    double centroid = 0.0;
    for (int v = 0; v <= mesh.dim; ++v) centroid += mesh.nodes(b, mesh.elements(v, e));
    centroid /= (mesh.dim + 1);
    const int layer_of = static_cast<int>(std::floor(centroid / delta)) + 1;
    ctx.table_of_element[i] = std::min(sl.layer - layer_of, depth_tables - 1);
    // the state always carries the full construction gravity; the top-layer
    // scheme only restricts the self-weight pairing
    if (forces.top_layer_only) ctx.weight_active[i] = centroid > (sl.layer - 1) * delta;
  }
  ctx.body = forces.gravity;
  return ctx;
}

Matrix ElasticSystem::displacement(const Mesh& mesh) const {
  Matrix U = Matrix::Zero(mesh.dim, mesh.n_nodes());
  for (std::size_t i = 0; i < free_dofs.size(); ++i) {
    const int gdof = free_dofs[i];
    U(gdof % mesh.dim, gdof / mesh.dim) = solution[static_cast<Index>(i)];
  }
  return U;
}

Vector ElasticSystem::solve(const Eigen::Ref<const Vector>& rhs) const {
  AMTOPO_REQUIRE(factor != nullptr, "system was not factorized");
  return factor->solve(rhs);
}

ElasticSystem assemble_and_solve(const Mesh& mesh, const ElasticContext& ctx,
                                 const DesignSpace& space, const Eigen::Ref<const Vector>& phi) {
  const int d = mesh.dim;
  const Matrix frac = space.fractions(phi);

  ElasticSystem sys;
  std::vector<char> present(mesh.n_nodes(), 0);
  for (int e : ctx.elements)
    for (int v = 0; v <= d; ++v) present[mesh.elements(v, e)] = 1;
  std::vector<char> fixed(mesh.n_nodes(), 0);
  for (int nd : ctx.dirichlet) fixed[nd] = 1;

  sys.dof_map.assign(static_cast<std::size_t>(mesh.n_nodes()) * d, -1);
  for (Index nd = 0; nd < mesh.n_nodes(); ++nd) {
    if (!present[nd] || fixed[nd]) continue;
    for (int c = 0; c < d; ++c) {
      sys.dof_map[nd * d + c] = static_cast<Index>(sys.free_dofs.size());
      sys.free_dofs.push_back(static_cast<int>(nd * d + c));
    }
  }
  if (sys.free_dofs.empty()) throw SolverError("elastic system has no free unknowns");

  const double vol = mesh.element_volume;
  std::vector<Triplet> trip;
  trip.reserve(ctx.elements.size() * (d + 1) * (d + 1) * d * d);
  sys.load = Vector::Zero(sys.n_free());
  if (!ctx.weight_active.empty()) sys.weight_load = Vector::Zero(sys.n_free());

  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    const Matrix& g = mesh.gradients(e);
    const Vector fbar = element_average(mesh, e, frac);
    const Matrix& Lam = ctx.lambda_mix[ctx.table_of_element[i]];
    const Matrix& Mu = ctx.mu_mix[ctx.table_of_element[i]];
    const double lambda = fbar.dot(Lam * fbar);
    const double mu = fbar.dot(Mu * fbar);

    for (int a = 0; a <= d; ++a) {
      const int na = mesh.elements(a, e);
      for (int b = 0; b <= d; ++b) {
        const int nb = mesh.elements(b, e);
        const double gab = g.col(a).dot(g.col(b));
        for (int ci = 0; ci < d; ++ci) {
          const Index ra = sys.dof_map[na * d + ci];
          if (ra < 0) continue;
          for (int cj = 0; cj < d; ++cj) {
            const Index rb = sys.dof_map[nb * d + cj];
            if (rb < 0) continue;
            double val = lambda * g(ci, a) * g(cj, b) + mu * g(cj, a) * g(ci, b);
            if (ci == cj) val += mu * gab;
            trip.emplace_back(ra, rb, vol * val);
          }
        }
      }
    }

    if (!ctx.body.zero() && ctx.element_loaded(i)) {
      const Vector f = ctx.body.value(fbar);
      const double w = vol / (d + 1);
      const bool weighted = !ctx.weight_active.empty() && ctx.weight_active[i];
      for (int a = 0; a <= d; ++a) {
        const int na = mesh.elements(a, e);
        for (int c = 0; c < d; ++c) {
          const Index r = sys.dof_map[na * d + c];
          if (r < 0) continue;
          sys.load[r] += w * f[c];
          if (weighted) sys.weight_load[r] += w * f[c];
        }
      }
    }
  }

  if (!ctx.traction.zero()) {
    const int nfv = (d == 2) ? 2 : 3;
    for (const BoundaryFacet& fc : ctx.traction_facets) {
      Vector fbar = Vector::Zero(frac.rows());
      for (int v = 0; v < nfv; ++v) fbar += frac.col(fc.v[v]);
      fbar /= nfv;
      const Vector gval = ctx.traction.value(fbar);
      const double w = fc.measure / nfv;
      for (int v = 0; v < nfv; ++v)
        for (int c = 0; c < d; ++c) {
          const Index r = sys.dof_map[fc.v[v] * d + c];
          if (r >= 0) sys.load[r] += w * gval[c];
        }
    }
  }

  sys.stiffness.resize(sys.n_free(), sys.n_free());
  sys.stiffness.setFromTriplets(trip.begin(), trip.end());
  sys.factor = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
  sys.factor->compute(sys.stiffness);
  if (sys.factor->info() != Eigen::Success)
    throw SolverError("stiffness factorization failed (system not positive definite?)");
  sys.solution = sys.factor->solve(sys.load);
  sys.compliance = sys.load.dot(sys.solution);
  sys.self_weight =
      ctx.weight_active.empty() ? sys.compliance : sys.weight_load.dot(sys.solution);
  return sys;
}

Vector compliance_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                           const DesignSpace& space, const Eigen::Ref<const Vector>& phi) {
  const int d = mesh.dim;
  const double vol = mesh.element_volume;
  const Matrix U = sys.displacement(mesh);
  const Matrix frac = space.fractions(phi);
  const int np = space.phases();
  Matrix dual = Matrix::Zero(np, mesh.n_nodes());

  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    const Vector fbar = element_average(mesh, e, frac);
    const StrainData s = element_strain(mesh, e, U);
    const Matrix& Lam = ctx.lambda_mix[ctx.table_of_element[i]];
    const Matrix& Mu = ctx.mu_mix[ctx.table_of_element[i]];
    // derivative of (lambda, mu) per unit seed at one vertex
    const Vector lam_seed = 2.0 / (d + 1) * (Lam * fbar);
    const Vector mu_seed = 2.0 / (d + 1) * (Mu * fbar);
    const bool loaded = !ctx.body.zero() && ctx.element_loaded(i) &&
                        ctx.body.coupling.size() > 0;
    const Vector ubar = element_average(mesh, e, U);

    for (int a = 0; a <= d; ++a) {
      const int na = mesh.elements(a, e);
      for (int p = 0; p < np; ++p) {
        double v = -vol * (lam_seed[p] * s.trace * s.trace + 2.0 * mu_seed[p] * s.norm2);
        if (loaded) v += 2.0 * vol / (d + 1) * ctx.body.coupling.col(p).dot(ubar);
        dual(p, na) += v;
      }
    }
  }

  if (!ctx.traction.zero() && ctx.traction.coupling.size() > 0 &&
      !ctx.traction.coupling.isZero(0.0)) {
    const int nfv = (d == 2) ? 2 : 3;
    for (const BoundaryFacet& fc : ctx.traction_facets) {
      Vector ubar = Vector::Zero(d);
      for (int v = 0; v < nfv; ++v) ubar += U.col(fc.v[v]);
      ubar /= nfv;
      for (int v = 0; v < nfv; ++v)
        for (int p = 0; p < space.phases(); ++p)
          dual(p, fc.v[v]) += 2.0 * fc.measure / nfv * ctx.traction.coupling.col(p).dot(ubar);
    }
  }
  return space.fraction_pullback(dual);
}

Vector self_weight_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                            const DesignSpace& space, const Eigen::Ref<const Vector>& phi) {
  if (ctx.weight_active.empty()) return compliance_gradient(mesh, ctx, sys, space, phi);
  // pairing l(phi) . u(phi): the adjoint solves against the restricted load
  const int d = mesh.dim;
  const double vol = mesh.element_volume;
  const Vector adjoint = sys.solve(sys.weight_load);
  const Matrix U = sys.displacement(mesh);
  Matrix P = Matrix::Zero(d, mesh.n_nodes());
  for (std::size_t i = 0; i < sys.free_dofs.size(); ++i) {
    const int gdof = sys.free_dofs[i];
    P(gdof % d, gdof / d) = adjoint[static_cast<Index>(i)];
  }
  const Matrix frac = space.fractions(phi);
  const int np = space.phases();
  Matrix dual = Matrix::Zero(np, mesh.n_nodes());

  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    const Vector fbar = element_average(mesh, e, frac);
    const Matrix& Lam = ctx.lambda_mix[ctx.table_of_element[i]];
    const Matrix& Mu = ctx.mu_mix[ctx.table_of_element[i]];
    const Vector lam_seed = 2.0 / (d + 1) * (Lam * fbar);
    const Vector mu_seed = 2.0 / (d + 1) * (Mu * fbar);

    // mixed strain pairing of the state and the adjoint
    const Matrix& g = mesh.gradients(e);
    Matrix Du = Matrix::Zero(d, d), Dp = Matrix::Zero(d, d);
    for (int v = 0; v <= d; ++v) {
      Du += U.col(mesh.elements(v, e)) * g.col(v).transpose();
      Dp += P.col(mesh.elements(v, e)) * g.col(v).transpose();
    }
    const Matrix Eu = 0.5 * (Du + Du.transpose());
    const Matrix Ep = 0.5 * (Dp + Dp.transpose());
    const double tr_pair = Du.trace() * Dp.trace();
    const double ee_pair = (Eu.array() * Ep.array()).sum();

    const bool loaded = !ctx.body.zero() && ctx.element_loaded(i) &&
                        ctx.body.coupling.size() > 0;
    const Vector ubar = element_average(mesh, e, U);
    const Vector pbar = element_average(mesh, e, P);
    const bool weighted = ctx.element_weighted(i);

    for (int a = 0; a <= d; ++a) {
      const int na = mesh.elements(a, e);
      for (int p = 0; p < np; ++p) {
        double v = -vol * (lam_seed[p] * tr_pair + 2.0 * mu_seed[p] * ee_pair);
        if (loaded) {
          v += vol / (d + 1) * ctx.body.coupling.col(p).dot(pbar);  // state load variation
          if (weighted)
            v += vol / (d + 1) * ctx.body.coupling.col(p).dot(ubar);  // pairing variation
        }
        dual(p, na) += v;
      }
    }
  }
  return space.fraction_pullback(dual);
}

Vector load_phase_gradient(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                           const DesignSpace& space, const Eigen::Ref<const Vector>& phi) {
  const int d = mesh.dim;
  const Matrix U = sys.displacement(mesh);
  Matrix dual = Matrix::Zero(space.phases(), mesh.n_nodes());

  if (!ctx.body.zero() && ctx.body.coupling.size() > 0) {
    const double vol = mesh.element_volume;
    for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
      if (!ctx.element_loaded(i)) continue;
      const Index e = ctx.elements[i];
      const Vector ubar = element_average(mesh, e, U);
      for (int a = 0; a <= d; ++a)
        for (int p = 0; p < space.phases(); ++p)
          dual(p, mesh.elements(a, e)) += vol / (d + 1) * ctx.body.coupling.col(p).dot(ubar);
    }
  }
  if (!ctx.traction.zero() && ctx.traction.coupling.size() > 0) {
    const int nfv = (d == 2) ? 2 : 3;
    for (const BoundaryFacet& fc : ctx.traction_facets) {
      Vector ubar = Vector::Zero(d);
      for (int v = 0; v < nfv; ++v) ubar += U.col(fc.v[v]);
      ubar /= nfv;
      for (int v = 0; v < nfv; ++v)
        for (int p = 0; p < space.phases(); ++p)
          dual(p, fc.v[v]) += fc.measure / nfv * ctx.traction.coupling.col(p).dot(ubar);
    }
  }
  return space.fraction_pullback(dual);
}

Vector linearized_rhs(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                      const DesignSpace& space, const Eigen::Ref<const Vector>& phi,
                      const Eigen::Ref<const Vector>& zeta) {
  const int d = mesh.dim;
  const double vol = mesh.element_volume;
  const Matrix U = sys.displacement(mesh);
  const Matrix frac = space.fractions(phi);
  const Matrix zfrac = space.fraction_direction(zeta);

  Vector rhs = Vector::Zero(sys.n_free());
  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    const Matrix& g = mesh.gradients(e);
    const Vector fbar = element_average(mesh, e, frac);
    const Vector zbar = element_average(mesh, e, zfrac);
    const Matrix& Lam = ctx.lambda_mix[ctx.table_of_element[i]];
    const Matrix& Mu = ctx.mu_mix[ctx.table_of_element[i]];
    const double dlam = 2.0 * zbar.dot(Lam * fbar);
    const double dmu = 2.0 * zbar.dot(Mu * fbar);
    const StrainData s = element_strain(mesh, e, U);
    const bool loaded = !ctx.body.zero() && ctx.element_loaded(i) &&
                        ctx.body.coupling.size() > 0;
    const Vector df = loaded ? Vector(ctx.body.coupling * zbar) : Vector();

    for (int b = 0; b <= d; ++b) {
      const int nb = mesh.elements(b, e);
      const Vector Eg = s.E * g.col(b);
      for (int j = 0; j < d; ++j) {
        const Index r = sys.dof_map[nb * d + j];
        if (r < 0) continue;
        rhs[r] -= vol * (dlam * s.trace * g(j, b) + 2.0 * dmu * Eg[j]);
        if (loaded) rhs[r] += vol / (d + 1) * df[j];
      }
    }
  }

  if (!ctx.traction.zero() && ctx.traction.coupling.size() > 0) {
    const int nfv = (d == 2) ? 2 : 3;
    for (const BoundaryFacet& fc : ctx.traction_facets) {
      Vector zbar = Vector::Zero(zfrac.rows());
      for (int v = 0; v < nfv; ++v) zbar += zfrac.col(fc.v[v]);
      zbar /= nfv;
      const Vector dg = ctx.traction.coupling * zbar;
      for (int v = 0; v < nfv; ++v)
        for (int j = 0; j < d; ++j) {
          const Index r = sys.dof_map[fc.v[v] * d + j];
          if (r >= 0) rhs[r] += fc.measure / nfv * dg[j];
        }
    }
  }
  return rhs;
}

SparseMatrix linearization_matrix(const Mesh& mesh, const ElasticContext& ctx,
                                  const ElasticSystem& sys, const DesignSpace& space,
                                  const Eigen::Ref<const Vector>& phi) {
  const int d = mesh.dim;
  const double vol = mesh.element_volume;
  const Matrix U = sys.displacement(mesh);
  const Matrix frac = space.fractions(phi);
  const int np = space.phases();

  std::vector<Triplet> trip;
  trip.reserve(ctx.elements.size() * (d + 1) * (d + 1) * d);

  const auto design_scatter = [&](Index row, int node, int p, double value) {
    if (space.scalar) {
      trip.emplace_back(row, node, (p == 0 ? 0.5 : -0.5) * value);
    } else {
      trip.emplace_back(row, static_cast<Index>(node) * np + p, value);
    }
  };

  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const Index e = ctx.elements[i];
    const Matrix& g = mesh.gradients(e);
    const Vector fbar = element_average(mesh, e, frac);
    const Matrix& Lam = ctx.lambda_mix[ctx.table_of_element[i]];
    const Matrix& Mu = ctx.mu_mix[ctx.table_of_element[i]];
    const Vector lam_seed = 2.0 / (d + 1) * (Lam * fbar);
    const Vector mu_seed = 2.0 / (d + 1) * (Mu * fbar);
    const StrainData s = element_strain(mesh, e, U);
    const bool loaded = !ctx.body.zero() && ctx.element_loaded(i) &&
                        ctx.body.coupling.size() > 0;

    for (int b = 0; b <= d; ++b) {
      const int nb = mesh.elements(b, e);
      const Vector Eg = s.E * g.col(b);
      for (int j = 0; j < d; ++j) {
        const Index r = sys.dof_map[nb * d + j];
        if (r < 0) continue;
        for (int a = 0; a <= d; ++a) {
          const int na = mesh.elements(a, e);
          for (int p = 0; p < np; ++p) {
            double val = -vol * (lam_seed[p] * s.trace * g(j, b) + 2.0 * mu_seed[p] * Eg[j]);
            if (loaded) val += vol / ((d + 1) * (d + 1)) * ctx.body.coupling(j, p);
            design_scatter(r, na, p, val);
          }
        }
      }
    }
  }

  if (!ctx.traction.zero() && ctx.traction.coupling.size() > 0) {
    const int nfv = (d == 2) ? 2 : 3;
    for (const BoundaryFacet& fc : ctx.traction_facets) {
      for (int v = 0; v < nfv; ++v)
        for (int j = 0; j < d; ++j) {
          const Index r = sys.dof_map[fc.v[v] * d + j];
          if (r < 0) continue;
          for (int w = 0; w < nfv; ++w)
            for (int p = 0; p < np; ++p)
              design_scatter(r, fc.v[w], p,
                             fc.measure / (nfv * nfv) * ctx.traction.coupling(j, p));
        }
    }
  }

  SparseMatrix F(sys.n_free(), space.size());
  F.setFromTriplets(trip.begin(), trip.end());
  return F;
}

Vector solve_linearized(const Mesh& mesh, const ElasticContext& ctx, const ElasticSystem& sys,
                        const DesignSpace& space, const Eigen::Ref<const Vector>& phi,
                        const Eigen::Ref<const Vector>& zeta) {
  return sys.solve(linearized_rhs(mesh, ctx, sys, space, phi, zeta));
}

}  // namespace amtopo
