#pragma once

// Metropolis-Hastings with Hessian-informed Gaussian proposals.
//
//   RWMH   y = m + sigma n~
//   SN     y = m - H(m)^{-1} g(m) + H(m)^{-1/2} n~        (Hessian rebuilt at every point)
//   SNMAP  y = m - H_map^{-1} g(m) + H_map^{-1/2} n~      (Hessian frozen at the MAP point)
//   ISMAP  y = m_map + H_map^{-1/2} n~                    (independence sampler)
//
// n~ = R^{-1} n with n standard normal, i.e. identity covariance in R^n_M.
// Inverse and square-root Hessians come from LowRankHessian.

#include "hbmcmc/lowrank.hpp"
#include "hbmcmc/models.hpp"
#include "hbmcmc/prior.hpp"
#include "hbmcmc/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hbmcmc {

enum class Method { RWMH, SN, SNMAP, ISMAP };

std::string to_string(Method m);
/// Accepts rwmh, sn, snmap, ismap (case-insensitive). Throws ConfigError.
Method parse_method(const std::string& s);

struct ProposalKind {
  Method method = Method::SNMAP;
  double rwmh_sigma = 0.0;  // RWMH only; must be > 0

  void validate() const;
};

/// Shared, read-only sampling inputs.
struct SamplerSetup {
  std::shared_ptr<const GaussianPrior> prior;
  /// MAP point and its low-rank Hessian (SNMAP, ISMAP).
  std::optional<Vec> m_map;
  std::shared_ptr<const LowRankHessian> lrh_map;
  /// Low-rank settings for SN's per-point Hessians.
  int r = 20;
  int l = 5;
};

struct ChainState {
  Vec m;
  double log_post = 0.0;
  std::optional<Vec> g;                       // SN, SNMAP
  std::shared_ptr<const LowRankHessian> lrh;  // SN: at m; SNMAP/ISMAP: the MAP instance
};

/// Evaluates log posterior and the caches `kind` needs at m. For SN the
/// Lanczos start vector is drawn from rng.
ChainState make_state(const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model, const Vec& m,
                      Rng& rng);

/// Mean of the proposal conditioned on `from`.
Vec proposal_mean(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from);

/// Draws y ~ q(from, .). Consumes exactly n standard normals from rng.
Vec propose(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from, Rng& rng);
/// Deterministic part of propose for a given noise vector.
Vec propose_from_noise(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from,
                       const Vec& noise);

/// log q(from, to) up to constants that cancel in the MH ratio. SN includes
/// the half log-determinant of the Hessian at `from`.
double log_q(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from, const Vec& to);

/// log of pi(y) q(y, m) / (pi(m) q(m, y)).
double log_acceptance_ratio(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from,
                            const ChainState& to);

struct StepResult {
  bool accepted = false;
  double log_alpha = 0.0;
  bool solver_failure = false;
};

/// One Metropolis-Hastings step. Draw order: proposal noise, SN Lanczos start
/// vectors, accept uniform. A NumericalError while evaluating the proposal
/// counts as a rejection.
StepResult mh_step(ChainState& state, const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model,
                   Rng& rng);

struct ChainMeta {
  std::string method;
  std::uint64_t seed = 0;
  int chain_id = 0;
  int r = 0;
  int l = 0;
  int start_index = -1;
  int n = 0;
  long solver_failures = 0;
  long start_solves = 0;      // solves spent evaluating the start state
  double wall_seconds = 0.0;  // informational only
};

struct Chain {
  Mat samples;                      // N x n, row k = state after step k
  std::vector<bool> accepted;       // N
  Vec log_post;                     // N
  std::vector<long> cumulative_solves;  // N, after the start-state evaluation
  ChainMeta meta;

  int size() const { return static_cast<int>(samples.rows()); }
  double acceptance_rate() const;
  /// Start evaluation plus all steps.
  long total_solves() const { return meta.start_solves + (cumulative_solves.empty() ? 0 : cumulative_solves.back()); }
};

/// N MH steps from m_start on a private stream make_stream(seed, chain_id).
/// cumulative_solves counts the steps only; the start-state evaluation is
/// kept separately in meta.start_solves.
Chain run_chain(const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model, const Vec& m_start,
                int N, std::uint64_t seed, int chain_id);

/// One chain per start point, chain_id = index into `starts`. Each worker
/// clones `model`; results are ordered by chain_id regardless of scheduling.
std::vector<Chain> run_chains(const ProposalKind& kind, const SamplerSetup& setup, const ForwardModel& model,
                              const std::vector<Vec>& starts, int N, std::uint64_t seed, int workers = 1);

/// Greedy maximin selection in the M-norm: first the sample farthest from
/// the pilot mean, then repeatedly the sample maximizing its minimum distance
/// to the selected set. Returns row indices. Throws ConfigError if k exceeds
/// the pilot length or k < 1.
std::vector<int> select_start_points(const Chain& pilot, int k, const WeightedSpace& space);

/// Multiplicative step-size adaptation towards `target` acceptance over
/// batches of `batch` steps: sigma *= exp(4 (rate - target)) per batch. Returns the tuned sigma.
double tune_rwmh_sigma(const SamplerSetup& setup, ForwardModel& model, const Vec& m_start, double sigma0,
                       int batches, int batch, std::uint64_t seed, double target = 0.25);

}  // namespace hbmcmc
