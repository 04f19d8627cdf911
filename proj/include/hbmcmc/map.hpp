#pragma once

#include "hbmcmc/models.hpp"
#include "hbmcmc/prior.hpp"

#include <vector>

namespace hbmcmc {

enum class CgForcing {
  EisenstatWalker,  // eta_k = min(0.5, sqrt(||g_k|| / ||g_0||))
  Exact,            // eta_k = exact_cg_tol
};

struct MapOptions {
  double grad_tol_rel = 1e-5;
  int max_newton = 50;
  int max_cg = 200;
  CgForcing forcing = CgForcing::EisenstatWalker;
  double exact_cg_tol = 1e-12;
  double armijo_c = 1e-4;
  int max_backtracks = 30;
};

struct MapResult {
  Vec m_map;
  int newton_iters = 0;
  int total_cg_iters = 0;
  std::vector<double> grad_norm_history;  // ||g_k||_M, k = 0..newton_iters
  std::vector<double> cost_history;       // J(m_k)
  SolveCounter solve_count;               // solves spent inside solve_map
  bool converged = false;
};

/// Inexact Newton-CG on J. CG runs in the M inner product, preconditioned by
/// the prior covariance, and stops at ||r|| <= eta_k ||g_k|| (preconditioned
/// norm) or on negative curvature. Globalized by Armijo backtracking.
///
/// Stops when ||g_k||_M <= grad_tol_rel ||g_0||_M; on max_newton exhaustion
/// returns the last iterate with converged = false. Throws NumericalError
/// when the line search fails after max_backtracks halvings.
MapResult solve_map(ForwardModel& model, const GaussianPrior& prior, const Vec& m_init,
                    const MapOptions& opts = {});

}  // namespace hbmcmc
