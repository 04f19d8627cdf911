#include "hbmcmc/map.hpp"

#include "hbmcmc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hbmcmc {

namespace {

struct CgOutcome {
  Vec p;
  int iters = 0;
};

// Prior-preconditioned CG on H p = -g in R^n_M.
CgOutcome newton_cg(ForwardModel& model, const GaussianPrior& prior, const Vec& m, const Vec& g, double eta,
                    int max_iter) {
  const WeightedSpace& space = prior.space();
  const double target = eta * space.norm(g);
  CgOutcome out{Vec::Zero(g.size()), 0};
  Vec r = -g;
  Vec z = prior.apply_cov(r);
  Vec d = z;
  double rz = space.inner(r, z);
  for (int it = 0; it < max_iter; ++it) {
    const Vec hd = hvp(model, prior, m, d);
    ++out.iters;
    const double dhd = space.inner(d, hd);
    if (dhd <= 0) {
      // Negative curvature: keep the current iterate, or the preconditioned
      // steepest-descent direction if there is none yet.
      if (it == 0) out.p = d;
      break;
    }
    const double step = rz / dhd;
    out.p += step * d;
    r -= step * hd;
    if (space.norm(r) <= target) break;
    z = prior.apply_cov(r);
    const double rz_new = space.inner(r, z);
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  return out;
}

}  // namespace

MapResult solve_map(ForwardModel& model, const GaussianPrior& prior, const Vec& m_init, const MapOptions& opts) {
  if (m_init.size() != prior.n() || !m_init.allFinite()) throw ConfigError("solve_map: invalid initial point");
  const WeightedSpace& space = prior.space();
  const SolveCounter start = model.counter();

  MapResult res;
  Vec m = m_init;
  double J = cost(model, prior, m);
  Vec g = gradient(model, prior, m);
  const double g0 = space.norm(g);
  res.grad_norm_history.push_back(g0);
  res.cost_history.push_back(J);

  double gn = g0;
  while (true) {
    if (gn <= opts.grad_tol_rel * g0) {
      res.converged = true;
      break;
    }
    if (res.newton_iters >= opts.max_newton) break;

    const double eta = opts.forcing == CgForcing::Exact ? opts.exact_cg_tol : std::min(0.5, std::sqrt(gn / g0));
    CgOutcome cg = newton_cg(model, prior, m, g, eta, opts.max_cg);
    res.total_cg_iters += cg.iters;
    Vec p = std::move(cg.p);
    double slope = space.inner(g, p);
    if (!(slope < 0)) {
      p = -prior.apply_cov(g);
      slope = space.inner(g, p);
    }

    double alpha = 1.0;
    bool accepted = false;
    Vec m_new;
    double J_new = 0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      m_new = m + alpha * p;
      J_new = cost(model, prior, m_new);
      if (std::isfinite(J_new) && J_new <= J + opts.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw NumericalError("solve_map: line search failed after " + std::to_string(opts.max_backtracks) +
                           " halvings (non-descent direction)");
    }
    m = std::move(m_new);
    J = J_new;
    g = gradient(model, prior, m);
    gn = space.norm(g);
    ++res.newton_iters;
    res.grad_norm_history.push_back(gn);
    res.cost_history.push_back(J);
  }
  res.m_map = std::move(m);
  res.solve_count = model.counter() - start;
  return res;
}

}  // namespace hbmcmc
