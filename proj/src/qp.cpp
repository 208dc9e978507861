// SPDX-License-Identifier: Apache-2.0
#include "amtopo/qp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace amtopo {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

MinresResult minres(const std::function<Vector(const Vector&)>& apply,
                    const Eigen::Ref<const Vector>& rhs, const Eigen::Ref<const Vector>& x0,
                    double tol_abs, int max_iters) {
  MinresResult res;
  res.x = x0;
  Vector r1 = rhs - apply(res.x);
  double beta1 = r1.norm();
  res.residual = beta1;
  res.history.push_back(beta1);
  if (beta1 <= tol_abs) {
    res.converged = true;
    return res;
  }

  Vector y = r1;
  Vector r2 = r1;
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0;
  double phibar = beta1, cs = -1.0, sn = 0.0;
  Vector w = Vector::Zero(rhs.size());
  Vector w2 = Vector::Zero(rhs.size());

  for (int it = 1; it <= max_iters; ++it) {
    const Vector v = y / beta;
    y = apply(v);
    if (it >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = y.norm();

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    const Vector w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    res.x += phi * w;
    res.iters = it;
    res.residual = phibar;
    res.history.push_back(phibar);
    if (phibar <= tol_abs) {
      res.converged = true;
      break;
    }
    if (beta <= 1e-300) {  // exact Krylov breakdown: solution reached
      res.converged = true;
      break;
    }
  }
  return res;
}

double Constraints::violation(const Eigen::Ref<const Vector>& x) const {
  double v = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(lb[i])) v = std::max(v, lb[i] - x[i]);
    if (std::isfinite(ub[i])) v = std::max(v, x[i] - ub[i]);
  }
  if (E.rows() > 0) v = std::max(v, (E * x - e).cwiseAbs().maxCoeff());
  return v;
}

Constraints design_constraints(const Problem& prob) {
  const DesignSpace& space = prob.space;
  const Index n = space.size();
  const Index nodes = space.n_nodes;
  const Vector& lump = prob.mesh.lumped_mass;
  const double vol = prob.mesh.domain_volume();

  Constraints con;
  std::vector<Triplet> trip;
  std::vector<double> rhs;

  if (space.scalar) {
    con.lb = Vector::Constant(n, -1.0);
    con.ub = Vector::Constant(n, 1.0);
    for (Index a = 0; a < nodes; ++a) trip.emplace_back(0, a, lump[a] / vol);
    rhs.push_back(space.target_mass[0]);
  } else {
    const int N = space.comps;
    con.lb = Vector::Constant(n, 0.0);
    con.ub = Vector::Constant(n, kInf);
    // one unit-sum row per node
    for (Index a = 0; a < nodes; ++a) {
      for (int c = 0; c < N; ++c) trip.emplace_back(a, a * N + c, 1.0);
      rhs.push_back(1.0);
    }
    // independent mass rows for the first N-1 components
    for (int c = 0; c + 1 < N; ++c) {
      for (Index a = 0; a < nodes; ++a)
        trip.emplace_back(nodes + c, a * N + c, lump[a] / vol);
      rhs.push_back(space.target_mass[c]);
    }
  }

  const Index m = static_cast<Index>(rhs.size());
  con.E.resize(m, n);
  con.E.setFromTriplets(trip.begin(), trip.end());
  con.e = Eigen::Map<Vector>(rhs.data(), m);

  // normalize rows so multiplier scales are comparable
  Vector norms = Vector::Zero(m);
  for (int k = 0; k < con.E.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(con.E, k); it; ++it)
      norms[it.row()] += it.value() * it.value();
  norms = norms.cwiseSqrt();
  for (int k = 0; k < con.E.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(con.E, k); it; ++it)
      it.valueRef() /= norms[it.row()];
  con.e.array() /= norms.array();
  return con;
}

namespace {

/// Residual of the first-order system: stationarity, equalities and the
/// min/max complementarity map of the bounds.
struct KKTResidual {
  Vector stat;
  Vector eq;
  Vector comp;

  double squared_norm() const {
    return stat.squaredNorm() + eq.squaredNorm() + comp.squaredNorm();
  }
  double norm() const { return std::sqrt(squared_norm()); }
};

KKTResidual kkt_residual(const Subproblem& sp, double c,
                         const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu,
                         const Eigen::Ref<const Vector>& nu,
                         const Eigen::Ref<const Vector>& Adx) {
  const Constraints& con = *sp.constraints;
  KKTResidual r;
  r.stat = Adx + sp.gradient + mu;
  if (con.rows() > 0) r.stat += con.E.transpose() * nu;
  r.eq = con.E * x - con.e;
  r.comp = mu;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(con.ub[i])) r.comp[i] -= std::max(0.0, mu[i] + c * (x[i] - con.ub[i]));
    if (std::isfinite(con.lb[i])) r.comp[i] -= std::min(0.0, mu[i] + c * (x[i] - con.lb[i]));
  }
  return r;
}

}  // namespace

QPResult solve_subproblem(const Subproblem& sp, const PDASState* warm_start,
                          const QPOptions& opts) {
  AMTOPO_REQUIRE(sp.metric != nullptr && sp.constraints != nullptr, "incomplete subproblem");
  const MetricOperator& A = *sp.metric;
  const Constraints& con = *sp.constraints;
  const Index n = con.size();
  const Index m = con.rows();
  AMTOPO_REQUIRE(sp.gradient.size() == n && sp.anchor.size() == n, "subproblem size mismatch");

  Vector x = warm_start && warm_start->valid() ? warm_start->x : sp.anchor;
  Vector mu = warm_start && warm_start->valid() ? warm_start->mu : Vector::Zero(n);
  Vector nu = warm_start && warm_start->valid() ? warm_start->nu : Vector::Zero(m);

  QPResult out;
  double c = opts.c_active > 0.0 ? opts.c_active : A.scale_hint();
  Vector Adx = A.apply(x - sp.anchor);
  KKTResidual G = kkt_residual(sp, c, x, mu, nu, Adx);
  const double scale = 1.0 + sp.gradient.norm();
  const double target = opts.tol * scale;
  out.residual_history.push_back(G.norm());

  std::vector<signed char> active(n, 0);
  std::vector<Index> inactive;
  inactive.reserve(n);

  // support columns of each equality row (for the all-active guard)
  std::vector<std::vector<Index>> support(m);
  for (int k = 0; k < con.E.outerSize(); ++k)
    for (SparseMatrix::InnerIterator itr(con.E, k); itr; ++itr)
      support[itr.row()].push_back(itr.col());

  const auto update_active = [&]() {
    for (Index i = 0; i < n; ++i) {
      active[i] = 0;
      if (std::isfinite(con.ub[i]) && mu[i] + c * (x[i] - con.ub[i]) > 0.0)
        active[i] = 1;
      else if (std::isfinite(con.lb[i]) && mu[i] + c * (x[i] - con.lb[i]) < 0.0)
        active[i] = -1;
    }
    // every equality row needs inactive support; release the least-bound
    // variable of a fully active row
    for (Index r = 0; r < m; ++r) {
      bool any_inactive = support[r].empty();
      for (Index col : support[r])
        if (active[col] == 0) {
          any_inactive = true;
          break;
        }
      if (any_inactive) continue;
      Index release = support[r][0];
      double best = -kInf;
      for (Index col : support[r]) {
        const double score = active[col] < 0 ? mu[col] + c * (x[col] - con.lb[col])
                                             : -(mu[col] + c * (x[col] - con.ub[col]));
        if (score > best) {
          best = score;
          release = col;
        }
      }
      active[release] = 0;
    }
    inactive.clear();
    for (Index i = 0; i < n; ++i)
      if (active[i] == 0) inactive.push_back(i);
  };

  for (int it = 0; it < opts.max_pdas && G.norm() > target; ++it) {
    update_active();
    const Index ni = static_cast<Index>(inactive.size());

    // fixed part of the target iterate
    Vector w0 = sp.anchor;
    for (Index i = 0; i < n; ++i) {
      if (active[i] > 0) w0[i] = con.ub[i];
      else if (active[i] < 0) w0[i] = con.lb[i];
    }
    const Vector Aw0 = A.apply(w0 - sp.anchor);

    // saddle system on the inactive set
    Vector rhs(ni + m);
    for (Index i = 0; i < ni; ++i) rhs[i] = -sp.gradient[inactive[i]] - Aw0[inactive[i]];
    rhs.tail(m) = con.e - con.E * w0;

    const auto saddle = [&](const Vector& z) {
      Vector full = Vector::Zero(n);
      for (Index i = 0; i < ni; ++i) full[inactive[i]] = z[i];
      Vector Af = A.apply(full);
      Vector Etn = con.E.transpose() * z.tail(m);
      Vector outv(ni + m);
      for (Index i = 0; i < ni; ++i) outv[i] = Af[inactive[i]] + Etn[inactive[i]];
      outv.tail(m) = con.E * full;
      return outv;
    };

    Vector z0(ni + m);
    for (Index i = 0; i < ni; ++i) z0[i] = x[inactive[i]] - sp.anchor[inactive[i]];
    z0.tail(m) = nu;

    const double rhs_norm = rhs.norm();
    const double tol_inner = std::min(opts.minres_tol * std::max(rhs_norm, 1e-30),
                                      0.05 * G.norm());
    const int cap = opts.minres_cap_factor * static_cast<int>(ni + m) + 50;
    MinresResult mr = minres(saddle, rhs, z0, tol_inner, cap);
    out.minres_iters += mr.iters;

    Vector xhat = w0;
    for (Index i = 0; i < ni; ++i) xhat[inactive[i]] += mr.x[i];
    Vector nuhat = mr.x.tail(m);
    const Vector Axhat = A.apply(xhat - sp.anchor);
    Vector muhat = Vector::Zero(n);
    const Vector stat_free = Axhat + sp.gradient + con.E.transpose() * nuhat;
    for (Index i = 0; i < n; ++i)
      if (active[i] != 0) muhat[i] = -stat_free[i];

    // damped semismooth Newton step
    const Vector dx = xhat - x;
    const Vector dmu = muhat - mu;
    const Vector dnu = nuhat - nu;
    const Vector dAdx = Axhat - Adx;
    const double g2 = G.squared_norm();
    double t = 1.0;
    for (;;) {
      KKTResidual Gt = kkt_residual(sp, c, x + t * dx, mu + t * dmu, nu + t * dnu,
                                    Adx + t * dAdx);
      if (Gt.squared_norm() <= (1.0 - t / 4.0) * g2) {
        x += t * dx;
        mu += t * dmu;
        nu += t * dnu;
        Adx += t * dAdx;
        G = Gt;
        break;
      }
      t *= opts.damping_factor;
      if (t < opts.min_step) {
        // Heavily degenerate active sets (nearly everything pinned) can make
        // the damped direction inconsistent with the residual's branch
        // selection. Fall back to the plain full active-set step, which is
        // the classic undamped iteration, for a bounded number of times.
        if (out.recoveries < opts.max_recovery) {
          ++out.recoveries;
          c = std::min(1.0, 8.0 * c);  // bias the selection toward violations
          x = xhat;
          mu = muhat;
          nu = nuhat;
          Adx = Axhat;
          G = kkt_residual(sp, c, x, mu, nu, Adx);
          break;
        }
        std::ostringstream oss;
        oss << "PDAS stalled (step " << t << ", residual " << G.norm() << ", history:";
        for (double h : out.residual_history) oss << " " << h;
        oss << ")";
        throw SolverError(oss.str());
      }
    }
    if (t < 1.0) ++out.dampings;
    ++out.pdas_iters;
    out.residual_history.push_back(G.norm());
  }

  if (G.norm() > target) {
    std::ostringstream oss;
    oss << "PDAS did not converge within " << opts.max_pdas << " iterations (residual "
        << G.norm() << ", target " << target << ", history:";
    for (double h : out.residual_history) oss << " " << h;
    oss << ")";
    throw SolverError(oss.str());
  }

  // equality refinement: re-run the inner solve at the final active set
  // with a tighter tolerance if the mass rows are not met sharply enough
  for (int refine = 0; refine < 2 && m > 0; ++refine) {
    const double eqerr = (con.E * x - con.e).cwiseAbs().maxCoeff();
    if (eqerr <= opts.feas_target) break;
    update_active();
    const Index ni = static_cast<Index>(inactive.size());
    Vector w0 = x;
    const Vector Aw0 = A.apply(w0 - sp.anchor);
    Vector rhs(ni + m);
    for (Index i = 0; i < ni; ++i) rhs[i] = -sp.gradient[inactive[i]] - Aw0[inactive[i]];
    rhs.tail(m) = con.e - con.E * w0;
    const auto saddle = [&](const Vector& z) {
      Vector full = Vector::Zero(n);
      for (Index i = 0; i < ni; ++i) full[inactive[i]] = z[i];
      Vector Af = A.apply(full);
      Vector Etn = con.E.transpose() * z.tail(m);
      Vector outv(ni + m);
      for (Index i = 0; i < ni; ++i) outv[i] = Af[inactive[i]] + Etn[inactive[i]];
      outv.tail(m) = con.E * full;
      return outv;
    };
    Vector z0 = Vector::Zero(ni + m);
    z0.tail(m) = nu;
    MinresResult mr = minres(saddle, rhs, z0, opts.feas_target * 0.1,
                             opts.minres_cap_factor * static_cast<int>(ni + m) + 50);
    out.minres_iters += mr.iters;
    for (Index i = 0; i < ni; ++i) x[inactive[i]] += mr.x[i];
    nu = mr.x.tail(m);
    Adx = A.apply(x - sp.anchor);
    G = kkt_residual(sp, c, x, mu, nu, Adx);
  }

  out.minimizer = x;
  out.direction = x - sp.anchor;
  out.state = PDASState{x, mu, nu};
  out.residual = G.norm();
  out.q_value = 0.5 * out.direction.dot(Adx) + sp.gradient.dot(out.direction);
  return out;
}

}  // namespace amtopo
