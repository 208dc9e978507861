// SPDX-License-Identifier: Apache-2.0
#include "amtopo/verify.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <sstream>

namespace amtopo {

namespace {

/// Free scalar unknowns of a slice: nodes of the slice without the plate.
std::vector<int> free_scalar_nodes(const Mesh& mesh, const SliceIndex& sl) {
  std::vector<char> in(mesh.n_nodes(), 0), fixed(mesh.n_nodes(), 0);
  for (int nd : sl.nodes) in[nd] = 1;
  for (int nd : sl.plate_nodes) fixed[nd] = 1;
  std::vector<int> free;
  for (Index nd = 0; nd < mesh.n_nodes(); ++nd)
    if (in[nd] && !fixed[nd]) free.push_back(static_cast<int>(nd));
  return free;
}

/// Largest eigenvalue of B^{-1} A for s.p.d. B by inverse-free power
/// iteration with a Cholesky solve per step.
double power_max_eig(const SparseMatrix& A, const SparseMatrix& B, int iters = 400) {
  Eigen::SimplicialLDLT<SparseMatrix> chol(B);
  AMTOPO_REQUIRE(chol.info() == Eigen::Success, "singular metric in quotient estimate");
  Rng rng(1234);
  Vector v(A.rows());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.next_normal();
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vector w = chol.solve(A * v);
    const double n = w.norm();
    if (n <= 0.0) break;
    v = w / n;
    lam = v.dot(A * v) / v.dot(B * v);
  }
  return lam;
}

double max_generalized_eig(const SparseMatrix& A, const SparseMatrix& B, int dense_limit) {
  if (A.rows() <= dense_limit) {
    const Matrix Ad(A), Bd(B);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(Ad, Bd);
    return es.eigenvalues().maxCoeff();
  }
  return power_max_eig(A, B);
}

double min_generalized_eig(const SparseMatrix& A, const SparseMatrix& B, int dense_limit) {
  if (A.rows() <= dense_limit) {
    const Matrix Ad(A), Bd(B);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(Ad, Bd);
    return es.eigenvalues().minCoeff();
  }
  return 1.0 / power_max_eig(B, A);
}

/// Vector-field matrices on the free slice nodes: full-gradient form,
/// symmetric-gradient form and the elastic form of one material.
struct VectorForms {
  SparseMatrix grad;     // sum_c int grad u_c . grad v_c
  SparseMatrix sym;      // int E(u) : E(v)
  SparseMatrix elastic;  // int C E(u) : E(v) for the given material
  SparseMatrix h1;       // grad + L2
};

VectorForms vector_forms(const Mesh& mesh, const SliceIndex& sl, const Lame& mat) {
  const int d = mesh.dim;
  std::vector<char> in(mesh.n_nodes(), 0), fixed(mesh.n_nodes(), 0);
  for (int nd : sl.nodes) in[nd] = 1;
  for (int nd : sl.plate_nodes) fixed[nd] = 1;
  std::vector<Index> map(mesh.n_nodes() * d, -1);
  Index nf = 0;
  for (Index nd = 0; nd < mesh.n_nodes(); ++nd)
    if (in[nd] && !fixed[nd])
      for (int c = 0; c < d; ++c) map[nd * d + c] = nf++;

  std::vector<Triplet> tg, ts, te, tm;
  const double vol = mesh.element_volume;
  const double mass_diag = vol * 2.0 / ((d + 1) * (d + 2));
  const double mass_off = vol / ((d + 1) * (d + 2));
  for (int e : sl.elements) {
    const Matrix& g = mesh.gradients(e);
    for (int a = 0; a <= d; ++a) {
      const int na = mesh.elements(a, e);
      for (int b = 0; b <= d; ++b) {
        const int nb = mesh.elements(b, e);
        const double gab = g.col(a).dot(g.col(b));
        const double mass = (a == b) ? mass_diag : mass_off;
        for (int ci = 0; ci < d; ++ci) {
          const Index ra = map[na * d + ci];
          if (ra < 0) continue;
          for (int cj = 0; cj < d; ++cj) {
            const Index rb = map[nb * d + cj];
            if (rb < 0) continue;
            if (ci == cj) {
              tg.emplace_back(ra, rb, vol * gab);
              tm.emplace_back(ra, rb, mass);
            }
            // E(u):E(v) with lambda = 0, mu = 1/2 gives the plain symmetric product
            double sym = 0.5 * g(cj, a) * g(ci, b);
            if (ci == cj) sym += 0.5 * gab;
            ts.emplace_back(ra, rb, vol * sym);
            double el = mat.lambda * g(ci, a) * g(cj, b) + mat.mu * g(cj, a) * g(ci, b);
            if (ci == cj) el += mat.mu * gab;
            te.emplace_back(ra, rb, vol * el);
          }
        }
      }
    }
  }
  VectorForms f;
  f.grad.resize(nf, nf);
  f.grad.setFromTriplets(tg.begin(), tg.end());
  f.sym.resize(nf, nf);
  f.sym.setFromTriplets(ts.begin(), ts.end());
  f.elastic.resize(nf, nf);
  f.elastic.setFromTriplets(te.begin(), te.end());
  SparseMatrix mass(nf, nf);
  mass.setFromTriplets(tm.begin(), tm.end());
  f.h1 = f.grad + mass;
  return f;
}

}  // namespace

double poincare_quotient(const Mesh& mesh, const SliceIndex& sl, int dense_limit) {
  if (sl.plate_nodes.empty()) throw ConfigError("quotient: the building plate is empty");
  std::vector<int> free = free_scalar_nodes(mesh, sl);
  AMTOPO_REQUIRE(!free.empty(), "slice too small for a nontrivial function");
  std::vector<Index> map(mesh.n_nodes(), -1);
  for (std::size_t i = 0; i < free.size(); ++i) map[free[i]] = static_cast<Index>(i);

  // restrict exact mass and stiffness to the slice elements
  std::vector<Triplet> tl, tm;
  const int d = mesh.dim;
  const double vol = mesh.element_volume;
  const double mass_diag = vol * 2.0 / ((d + 1) * (d + 2));
  const double mass_off = vol / ((d + 1) * (d + 2));
  for (int e : sl.elements) {
    const Matrix& g = mesh.gradients(e);
    for (int a = 0; a <= d; ++a) {
      const Index ra = map[mesh.elements(a, e)];
      if (ra < 0) continue;
      for (int b = 0; b <= d; ++b) {
        const Index rb = map[mesh.elements(b, e)];
        if (rb < 0) continue;
        tl.emplace_back(ra, rb, vol * g.col(a).dot(g.col(b)));
        tm.emplace_back(ra, rb, (a == b) ? mass_diag : mass_off);
      }
    }
  }
  SparseMatrix L(free.size(), free.size()), M(free.size(), free.size());
  L.setFromTriplets(tl.begin(), tl.end());
  M.setFromTriplets(tm.begin(), tm.end());
  return std::sqrt(std::max(0.0, max_generalized_eig(M, L, dense_limit)));
}

double korn_quotient(const Mesh& mesh, const SliceIndex& sl, int dense_limit) {
  if (sl.plate_nodes.empty()) throw ConfigError("quotient: the building plate is empty");
  VectorForms f = vector_forms(mesh, sl, Lame{0.0, 0.5});
  AMTOPO_REQUIRE(f.grad.rows() > 0, "slice too small for a nontrivial field");
  return max_generalized_eig(f.grad, f.sym, dense_limit);
}

double coercivity_constant(const Mesh& mesh, const SliceIndex& sl, const Lame& material,
                           int dense_limit) {
  VectorForms f = vector_forms(mesh, sl, material);
  return min_generalized_eig(f.elastic, f.h1, dense_limit);
}

VerificationReport verify_inequalities(const Mesh& mesh, const Lame& material,
                                       const std::vector<int>& layers_to_check) {
  const int M = mesh.spec.layers;
  const double H = mesh.spec.height();
  std::vector<int> layers = layers_to_check;
  if (layers.empty()) {
    // h in {H, H/2, H/4} where the layer structure allows
    for (int div : {1, 2, 4})
      if (M % div == 0 && M / div >= 1) layers.push_back(M / div);
  }

  VerificationReport rep;
  const double pow2 = std::pow(2.0, mesh.dim - 1);
  SliceIndex full = slice(mesh, M, M);
  rep.korn_full = korn_quotient(mesh, full);

  for (int k : layers) {
    SliceIndex sl = slice(mesh, k, M);
    const double h = k * mesh.spec.layer_thickness();

    QuotientRow pr;
    pr.layer = k;
    pr.height = h;
    pr.value = poincare_quotient(mesh, sl);
    pr.bound = h;
    pr.pass = pr.value <= h * (1.0 + 1e-8);
    rep.poincare.push_back(pr);

    QuotientRow kr;
    kr.layer = k;
    kr.height = h;
    kr.value = korn_quotient(mesh, sl);
    kr.bound = pow2 * rep.korn_full;
    kr.pass = kr.value <= kr.bound * (1.0 + 1e-8);
    rep.korn.push_back(kr);

    QuotientRow cr;
    cr.layer = k;
    cr.height = h;
    cr.value = coercivity_constant(mesh, sl, material);
    cr.bound = 2.0 * material.mu / (pow2 * rep.korn_full * (1.0 + H * H));
    cr.pass = cr.value >= cr.bound * (1.0 - 1e-8);
    rep.coercivity.push_back(cr);

    rep.pass = rep.pass && pr.pass && kr.pass && cr.pass;
  }
  return rep;
}

std::string VerificationReport::text() const {
  std::ostringstream os;
  os.precision(10);
  os << "inequality checks on slices (plate-clamped P1 spaces)\n";
  os << "  full-domain Korn quotient: " << korn_full << "\n";
  for (std::size_t i = 0; i < poincare.size(); ++i) {
    os << "  h = " << poincare[i].height << "\n";
    os << "    poincare quotient " << poincare[i].value << "  <= h = " << poincare[i].bound
       << "  " << (poincare[i].pass ? "ok" : "VIOLATED") << "\n";
    os << "    korn quotient     " << korn[i].value << "  <= " << korn[i].bound << "  "
       << (korn[i].pass ? "ok" : "VIOLATED") << "\n";
    os << "    coercivity        " << coercivity[i].value << "  >= " << coercivity[i].bound
       << "  " << (coercivity[i].pass ? "ok" : "VIOLATED") << "\n";
  }
  os << "overall: " << (pass ? "pass" : "FAIL") << "\n";
  return os.str();
}

std::string VerificationReport::key_values() const {
  std::ostringstream os;
  os.precision(17);
  os << "korn_full=" << korn_full << "\n";
  for (std::size_t i = 0; i < poincare.size(); ++i) {
    const int k = poincare[i].layer;
    os << "poincare_h_" << k << "=" << poincare[i].value << "\n";
    os << "poincare_bound_" << k << "=" << poincare[i].bound << "\n";
    os << "korn_h_" << k << "=" << korn[i].value << "\n";
    os << "korn_bound_" << k << "=" << korn[i].bound << "\n";
    os << "coercivity_h_" << k << "=" << coercivity[i].value << "\n";
    os << "coercivity_bound_" << k << "=" << coercivity[i].bound << "\n";
  }
  os << "pass=" << (pass ? 1 : 0) << "\n";
  return os.str();
}

GradientAudit gradient_audit(const Problem& prob, const Eigen::Ref<const Vector>& phi,
                             const std::vector<Vector>& directions,
                             const std::vector<double>& steps) {
  State st = evaluate(prob, phi);
  const Vector g_total = reduced_gradient(prob, st);
  Vector g_F = compliance_gradient(prob.mesh, prob.ms, st.ms, prob.space, phi);
  Vector g_W = Vector::Zero(prob.space.size());
  for (int k = 1; k <= prob.layers; ++k)
    g_W += prob.delta() * prob.omega(k) *
           self_weight_gradient(prob.mesh, prob.ams[k - 1], st.ams[k - 1], prob.space, phi);
  Vector g_E = ginzburg_landau_gradient(prob.mesh, prob.space, prob.stiffness_scalar,
                                        prob.potential, phi, prob.eps);

  GradientAudit audit;
  audit.best_total = 1e300;
  const auto rel = [](double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
  };

  for (double t : steps) {
    GradientAuditRow row;
    row.step = t;
    for (const Vector& zeta : directions) {
      State sp = evaluate(prob, phi + t * zeta);
      State sm = evaluate(prob, phi - t * zeta);
      const double fd_j = (sp.cost.j - sm.cost.j) / (2.0 * t);
      const double fd_F = (sp.cost.F - sm.cost.F) / (2.0 * t);
      const double fd_W = (sp.cost.W - sm.cost.W) / (2.0 * t);
      const double repr_p = prob.space.scalar ? sp.cost.E_scalar : sp.cost.E;
      const double repr_m = prob.space.scalar ? sm.cost.E_scalar : sm.cost.E;
      const double fd_E = (repr_p - repr_m) / (2.0 * t);
      row.err_total = std::max(row.err_total, rel(g_total.dot(zeta), fd_j));
      row.err_F = std::max(row.err_F, rel(g_F.dot(zeta), fd_F));
      row.err_W = std::max(row.err_W, rel(g_W.dot(zeta), fd_W));
      row.err_E = std::max(row.err_E, rel(g_E.dot(zeta), fd_E));
    }
    audit.rows.push_back(row);
    audit.best_total = std::min(audit.best_total, row.err_total);
  }
  return audit;
}

std::string GradientAudit::text() const {
  std::ostringstream os;
  os << "central-difference audit of the assembled derivative\n";
  os << "  step        total        F            W            E\n";
  for (const auto& r : rows) {
    os.precision(3);
    os << "  " << std::scientific << r.step << "  " << r.err_total << "  " << r.err_F << "  "
       << r.err_W << "  " << r.err_E << "\n";
  }
  os << "best total relative error: " << std::scientific << best_total << "\n";
  return os.str();
}

std::string GradientAudit::key_values() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : rows) {
    os << "audit_step_" << r.step << "_total=" << r.err_total << "\n";
    os << "audit_step_" << r.step << "_F=" << r.err_F << "\n";
    os << "audit_step_" << r.step << "_W=" << r.err_W << "\n";
    os << "audit_step_" << r.step << "_E=" << r.err_E << "\n";
  }
  os << "audit_best_total=" << best_total << "\n";
  return os.str();
}

}  // namespace amtopo
