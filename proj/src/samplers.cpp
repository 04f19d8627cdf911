#include "hbmcmc/samplers.hpp"

#include "hbmcmc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace hbmcmc {

std::string to_string(Method m) {
  switch (m) {
    case Method::RWMH: return "rwmh";
    case Method::SN: return "sn";
    case Method::SNMAP: return "snmap";
    case Method::ISMAP: return "ismap";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "rwmh") return Method::RWMH;
  if (t == "sn") return Method::SN;
  if (t == "snmap") return Method::SNMAP;
  if (t == "ismap") return Method::ISMAP;
  throw ConfigError("unknown sampling method '" + s + "' (expected rwmh|sn|snmap|ismap)");
}

void ProposalKind::validate() const {
  if (method == Method::RWMH && !(rwmh_sigma > 0)) throw ConfigError("RWMH step sigma must be positive");
}

namespace {

void require_map(const SamplerSetup& s, Method m) {
  if (!s.m_map || !s.lrh_map) {
    throw ConfigError(to_string(m) + " needs the MAP point and its low-rank Hessian");
  }
}

}  // namespace

ChainState make_state(const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model, const Vec& m,
                      Rng& rng) {
  kind.validate();
  const GaussianPrior& prior = *setup.prior;
  ChainState s;
  s.m = m;
  s.log_post = log_posterior(model, prior, m);
  switch (kind.method) {
    case Method::RWMH:
      break;
    case Method::SN:
      s.g = gradient(model, prior, m);
      s.lrh = std::make_shared<const LowRankHessian>(build_lowrank(model, setup.prior, m, setup.r, setup.l, rng));
      break;
    case Method::SNMAP:
      require_map(setup, kind.method);
      s.g = gradient(model, prior, m);
      s.lrh = setup.lrh_map;
      break;
    case Method::ISMAP:
      require_map(setup, kind.method);
      s.lrh = setup.lrh_map;
      break;
  }
  return s;
}

Vec proposal_mean(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from) {
  switch (kind.method) {
    case Method::RWMH: return from.m;
    case Method::SN:
    case Method::SNMAP: return from.m - from.lrh->apply_inv(*from.g);
    case Method::ISMAP: return *setup.m_map;
  }
  return from.m;
}

Vec propose_from_noise(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from,
                       const Vec& noise) {
  const Vec white = setup.prior->space().whiten(noise);
  const Vec mean = proposal_mean(kind, setup, from);
  if (kind.method == Method::RWMH) return mean + kind.rwmh_sigma * white;
  return mean + from.lrh->apply_inv_sqrt(white);
}

Vec propose(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from, Rng& rng) {
  return propose_from_noise(kind, setup, from, standard_normal(rng, setup.prior->n()));
}

double log_q(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from, const Vec& to) {
  const WeightedSpace& space = setup.prior->space();
  const Vec d = to - proposal_mean(kind, setup, from);
  if (kind.method == Method::RWMH) return -0.5 * space.inner(d, d) / (kind.rwmh_sigma * kind.rwmh_sigma);
  double lq = -0.5 * space.inner(d, from.lrh->apply_H(d));
  if (kind.method == Method::SN) lq += from.lrh->half_logdet_rel();
  return lq;
}

double log_acceptance_ratio(const ProposalKind& kind, const SamplerSetup& setup, const ChainState& from,
                            const ChainState& to) {
  if (!std::isfinite(to.log_post)) return -std::numeric_limits<double>::infinity();
  // RWMH is symmetric, so the proposal densities cancel.
  if (kind.method == Method::RWMH) return to.log_post - from.log_post;
  return to.log_post - from.log_post + log_q(kind, setup, to, from.m) - log_q(kind, setup, from, to.m);
}

StepResult mh_step(ChainState& state, const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model,
                   Rng& rng) {
  StepResult res;
  const Vec y = propose(kind, setup, state, rng);
  std::optional<ChainState> cand;
  try {
    if (!y.allFinite()) throw NumericalError("non-finite proposal");
    cand = make_state(kind, setup, model, y, rng);
  } catch (const NumericalError&) {
    res.solver_failure = true;
  }
  const double u = uniform01(rng);
  if (!cand) {
    res.log_alpha = -std::numeric_limits<double>::infinity();
    return res;
  }
  res.log_alpha = log_acceptance_ratio(kind, setup, state, *cand);
  if (std::isnan(res.log_alpha)) res.log_alpha = -std::numeric_limits<double>::infinity();
  if (res.log_alpha >= 0 || u < std::exp(res.log_alpha)) {
    res.accepted = true;
    state = std::move(*cand);
  }
  return res;
}

double Chain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  return static_cast<double>(std::count(accepted.begin(), accepted.end(), true)) /
         static_cast<double>(accepted.size());
}

Chain run_chain(const ProposalKind& kind, const SamplerSetup& setup, ForwardModel& model, const Vec& m_start,
                int N, std::uint64_t seed, int chain_id) {
  if (N < 1) throw ConfigError("chain length must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const long before_start = model.counter().linearized_solves();
  Rng rng = make_stream(seed, static_cast<std::uint64_t>(chain_id));

  Chain chain;
  const int n = setup.prior->n();
  chain.samples.resize(N, n);
  chain.accepted.assign(static_cast<std::size_t>(N), false);
  chain.log_post.resize(N);
  chain.cumulative_solves.assign(static_cast<std::size_t>(N), 0);
  chain.meta.method = to_string(kind.method);
  chain.meta.seed = seed;
  chain.meta.chain_id = chain_id;
  chain.meta.r = setup.r;
  chain.meta.l = setup.l;
  chain.meta.n = n;

  ChainState state = make_state(kind, setup, model, m_start, rng);
  const long solves0 = model.counter().linearized_solves();
  chain.meta.start_solves = solves0 - before_start;
  for (int k = 0; k < N; ++k) {
    const StepResult step = mh_step(state, kind, setup, model, rng);
    if (step.solver_failure) ++chain.meta.solver_failures;
    chain.samples.row(k) = state.m.transpose();
    chain.accepted[static_cast<std::size_t>(k)] = step.accepted;
    chain.log_post(k) = state.log_post;
    chain.cumulative_solves[static_cast<std::size_t>(k)] = model.counter().linearized_solves() - solves0;
  }
  chain.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return chain;
}

std::vector<Chain> run_chains(const ProposalKind& kind, const SamplerSetup& setup, const ForwardModel& model,
                              const std::vector<Vec>& starts, int N, std::uint64_t seed, int workers) {
  const int c = static_cast<int>(starts.size());
  std::vector<Chain> out(static_cast<std::size_t>(c));
  workers = std::clamp(workers, 1, std::max(1, c));
  if (workers == 1) {
    for (int i = 0; i < c; ++i) {
      auto local = model.clone();
      out[static_cast<std::size_t>(i)] = run_chain(kind, setup, *local, starts[static_cast<std::size_t>(i)], N, seed, i);
    }
    return out;
  }
  std::mutex mu;
  int next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      int i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= c || error) return;
        i = next++;
      }
      try {
        auto local = model.clone();
        Chain ch = run_chain(kind, setup, *local, starts[static_cast<std::size_t>(i)], N, seed, i);
        out[static_cast<std::size_t>(i)] = std::move(ch);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<int> select_start_points(const Chain& pilot, int k, const WeightedSpace& space) {
  const int N = pilot.size();
  if (k < 1) throw ConfigError("number of start points must be >= 1");
  if (k > N) throw ConfigError("cannot select more start points than pilot samples");
  const Vec mean = pilot.samples.colwise().mean().transpose();
  auto dist2 = [&](const Vec& a, const Vec& b) {
    const Vec d = a - b;
    return space.inner(d, d);
  };

  std::vector<int> picked;
  Vec min_d(N);
  int first = 0;
  double best = -1.0;
  for (int i = 0; i < N; ++i) {
    const double d = dist2(pilot.samples.row(i).transpose(), mean);
    if (d > best) {
      best = d;
      first = i;
    }
  }
  picked.push_back(first);
  for (int i = 0; i < N; ++i) min_d(i) = dist2(pilot.samples.row(i).transpose(), pilot.samples.row(first).transpose());
  std::vector<bool> used(static_cast<std::size_t>(N), false);
  used[static_cast<std::size_t>(first)] = true;
  while (static_cast<int>(picked.size()) < k) {
    int arg = -1;
    double val = -1.0;
    for (int i = 0; i < N; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      if (min_d(i) > val) {
        val = min_d(i);
        arg = i;
      }
    }
    picked.push_back(arg);
    used[static_cast<std::size_t>(arg)] = true;
    const Vec chosen = pilot.samples.row(arg).transpose();
    for (int i = 0; i < N; ++i) min_d(i) = std::min(min_d(i), dist2(pilot.samples.row(i).transpose(), chosen));
  }
  return picked;
}

double tune_rwmh_sigma(const SamplerSetup& setup, ForwardModel& model, const Vec& m_start, double sigma0,
                       int batches, int batch, std::uint64_t seed, double target) {
  ProposalKind kind{Method::RWMH, sigma0};
  kind.validate();
  Rng rng = make_stream(seed, 0x7fffffffULL);
  ChainState state = make_state(kind, setup, model, m_start, rng);
  for (int b = 0; b < batches; ++b) {
    int acc = 0;
    for (int s = 0; s < batch; ++s) acc += mh_step(state, kind, setup, model, rng).accepted ? 1 : 0;
    const double rate = static_cast<double>(acc) / batch;
    // gain 4: an all-reject batch shrinks sigma by e^-1
    kind.rwmh_sigma *= std::exp(4.0 * (rate - target));
  }
  return kind.rwmh_sigma;
}

}  // namespace hbmcmc
