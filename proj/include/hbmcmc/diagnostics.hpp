#pragma once

// Chain-quality statistics. Everything here is a pure function of chain data,
// so values recomputed from chain files match the in-memory ones exactly.

#include "hbmcmc/fem.hpp"
#include "hbmcmc/samplers.hpp"

#include <string>
#include <vector>

namespace hbmcmc {

/// Normalized, mean-centered autocorrelation rho(0..max_lag). rho(0) = 1
/// unless the series is constant, in which case all entries are zero.
Vec autocorrelation(const Vec& x, int max_lag);

enum class IatEstimator {
  // max of 1 + 2 sum_{s<=T} rho(s) over T before the first non-positive rho
  Windowed,
  // the same maximum over every T <= N/2
  MaxTruncation,
  // initial positive sequence of paired sums
  InitialPositive,
};

IatEstimator parse_iat_estimator(const std::string& s);
std::string to_string(IatEstimator e);

struct IatResult {
  double tau = 1.0;
  int window = 0;          // last lag contributing to tau
  bool degenerate = false;  // constant series, tau = N
};

/// Requires at least 10 values, else ConfigError. Result floored at 1.
IatResult iat_detail(const Vec& x, IatEstimator est = IatEstimator::Windowed);
double iat(const Vec& x, IatEstimator est = IatEstimator::Windowed);
double ess(const Vec& x, IatEstimator est = IatEstimator::Windowed);

/// Mean squared jump in the M-norm, averaged over the N-1 jumps of each chain.
double msj(const Chain& chain, const WeightedSpace& space, int start = 0);
double msj(const std::vector<Chain>& chains, const WeightedSpace& space, double burn_frac = 0.0);

struct MpsrfResult {
  double value = 1.0;
  bool regularized = false;
};

/// Multivariate PSRF over chains after discarding the first burn_frac of
/// each. Needs at least 2 chains of equal length with >= 2 retained samples.
MpsrfResult mpsrf_detail(const std::vector<Chain>& chains, double burn_frac = 0.0);
MpsrfResult mpsrf_detail(const std::vector<Mat>& chains, double burn_frac = 0.0);
double mpsrf(const std::vector<Chain>& chains, double burn_frac = 0.0);

/// First retained index for a chain of length N.
int burn_start(int N, double burn_frac);

/// Node nearest to frac * length.
int probe_node(const Mesh1D& mesh, double frac = 0.69);

/// Combined IAT of several chains at one coordinate: N_total / sum_c(N_c / tau_c).
double pooled_iat(const std::vector<Chain>& chains, int coord, double burn_frac = 0.0,
                  IatEstimator est = IatEstimator::Windowed);

/// Sum of every chain's final cumulative solve count.
long chain_solves(const std::vector<Chain>& chains);

/// (setup_solves + chain solves) / total ESS at coord. Throws NumericalError
/// if the ESS is zero.
double spis(const std::vector<Chain>& chains, int coord, long setup_solves, double burn_frac = 0.0,
            IatEstimator est = IatEstimator::Windowed);

struct DiagnosticsReport {
  std::string method;
  int chains = 0;
  int samples = 0;       // per chain
  int probe_index = 0;
  double mpsrf = 1.0;
  bool mpsrf_regularized = false;
  double iat = 1.0;
  double ess = 0.0;
  double msj = 0.0;
  double acceptance_rate = 0.0;
  long setup_solves = 0;
  long total_solves = 0;
  double spis = 0.0;
  double tpis = 0.0;  // wall seconds per independent sample, informational
};

DiagnosticsReport diagnose(const std::vector<Chain>& chains, const WeightedSpace& space, int probe_index,
                           long setup_solves, double burn_frac = 0.0, IatEstimator est = IatEstimator::Windowed,
                           double setup_seconds = 0.0);

}  // namespace hbmcmc
