#include "hbmcmc/diagnostics.hpp"
#include "hbmcmc/errors.hpp"
#include "hbmcmc/lowrank.hpp"
#include "hbmcmc/map.hpp"
#include "hbmcmc/samplers.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace hbmcmc;
using hbmcmc::testing::make_fixture;

namespace {

struct Sampling {
  hbmcmc::testing::Fixture f;
  SamplerSetup setup;
};

Sampling make_sampling(const std::string& kind, int n = 139) {
  Sampling s{make_fixture(kind, n), {}};
  MapOptions opts;
  opts.forcing = CgForcing::Exact;
  const MapResult map = solve_map(*s.f.model, *s.f.prior, s.f.prior->mean(), opts);
  Rng rng(55);
  s.setup.prior = s.f.prior;
  s.setup.m_map = map.m_map;
  s.setup.lrh_map = std::make_shared<const LowRankHessian>(build_lowrank(*s.f.model, s.f.prior, map.m_map, 20, 5, rng));
  s.setup.r = 20;
  s.setup.l = 5;
  s.f.model->counter().reset();
  return s;
}

// Delegates to an exponential-reaction model but fails every forward solve
// once m(0) exceeds a threshold.
class FailingModel final : public ForwardModel {
 public:
  FailingModel(std::unique_ptr<ForwardModel> inner, double threshold)
      : inner_(std::move(inner)), threshold_(threshold) {
    obs_ = inner_->observations();
  }
  int n() const override { return inner_->n(); }
  std::string kind() const override { return "failing"; }
  Vec solve_forward(const Vec& m) override { return guarded(m, [&] { return inner_->solve_forward(m); }); }
  Vec observables(const Vec& m) override { return guarded(m, [&] { return inner_->observables(m); }); }
  Vec misfit_gradient_dual(const Vec& m) override {
    return guarded(m, [&] { return inner_->misfit_gradient_dual(m); });
  }
  Vec misfit_hessian_dual(const Vec& m, const Vec& d) override {
    return guarded(m, [&] { return inner_->misfit_hessian_dual(m, d); });
  }
  std::unique_ptr<ForwardModel> clone() const override {
    return std::make_unique<FailingModel>(inner_->clone(), threshold_);
  }

 protected:
  void invalidate_cache() override {}

 private:
  template <class F>
  Vec guarded(const Vec& m, F f) {
    if (m(0) > threshold_) throw NumericalError("synthetic solver failure");
    const SolveCounter before = inner_->counter();
    Vec out = f();
    counter_ += inner_->counter() - before;
    return out;
  }
  std::unique_ptr<ForwardModel> inner_;
  double threshold_;
};

double min_pairwise(const Mat& samples, const std::vector<int>& idx, const WeightedSpace& w) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const Vec d = (samples.row(idx[a]) - samples.row(idx[b])).transpose();
      best = std::min(best, w.norm(d));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("SNMAP") == Method::SNMAP);
  CHECK(parse_method("IsMap") == Method::ISMAP);
  CHECK(parse_method("sn") == Method::SN);
  CHECK(parse_method("rwmh") == Method::RWMH);
  CHECK(to_string(Method::SNMAP) == "snmap");
  CHECK_THROWS_AS(parse_method("dram"), ConfigError);
  CHECK_THROWS_AS((ProposalKind{Method::RWMH, 0.0}.validate()), ConfigError);
  CHECK_NOTHROW((ProposalKind{Method::SN, 0.0}.validate()));
}

TEST_CASE("MAP-based kinds need the MAP point") {
  auto f = make_fixture("linear", 31);
  SamplerSetup setup;
  setup.prior = f.prior;
  Rng rng(1);
  CHECK_THROWS_AS(make_state({Method::SNMAP}, setup, *f.model, f.prior->mean(), rng), ConfigError);
  CHECK_THROWS_AS(make_state({Method::ISMAP}, setup, *f.model, f.prior->mean(), rng), ConfigError);
}

TEST_CASE("proposal structure") {
  auto s = make_sampling("exp_reaction", 61);
  Rng rng(3);
  const ProposalKind snmap{Method::SNMAP}, ismap{Method::ISMAP}, rwmh{Method::RWMH, 0.1};

  // SNMAP at the MAP point: zero-gradient proposal mean is the current point
  const ChainState at_map = make_state(snmap, s.setup, *s.f.model, *s.setup.m_map, rng);
  CHECK(s.f.space->norm(proposal_mean(snmap, s.setup, at_map) - at_map.m) <= 1e-6 * s.f.space->norm(at_map.m));

  // ISMAP ignores the current state
  const ChainState a = make_state(ismap, s.setup, *s.f.model, s.f.prior->sample(rng), rng);
  const ChainState b = make_state(ismap, s.setup, *s.f.model, s.f.prior->sample(rng), rng);
  const Vec noise = standard_normal(rng, 61);
  CHECK(propose_from_noise(ismap, s.setup, a, noise) == propose_from_noise(ismap, s.setup, b, noise));
  const Vec y = s.f.prior->sample(rng);
  CHECK(log_q(ismap, s.setup, a, y) == log_q(ismap, s.setup, b, y));

  // RWMH is symmetric
  const ChainState ra = make_state(rwmh, s.setup, *s.f.model, a.m, rng);
  const ChainState rb = make_state(rwmh, s.setup, *s.f.model, b.m, rng);
  CHECK(log_q(rwmh, s.setup, ra, rb.m) == doctest::Approx(log_q(rwmh, s.setup, rb, ra.m)).epsilon(1e-14));

  // identity proposal: ratio exactly 1 for every kind
  for (Method m : {Method::RWMH, Method::SN, Method::SNMAP, Method::ISMAP}) {
    const ProposalKind k{m, 0.1};
    const ChainState st = make_state(k, s.setup, *s.f.model, a.m, rng);
    CHECK(log_acceptance_ratio(k, s.setup, st, st) == 0.0);
  }

  // -infinity guard
  ChainState bad = a;
  bad.log_post = -std::numeric_limits<double>::infinity();
  CHECK(log_acceptance_ratio(ismap, s.setup, a, bad) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("linear-Gaussian collapse of the Hessian-based proposals") {
  auto s = make_sampling("linear", 61);
  Rng rng(8);
  const ProposalKind sn{Method::SN}, snmap{Method::SNMAP}, ismap{Method::ISMAP};
  for (int t = 0; t < 10; ++t) {
    const Vec m = s.f.prior->sample(rng);
    const ChainState s1 = make_state(sn, s.setup, *s.f.model, m, rng);
    const ChainState s2 = make_state(snmap, s.setup, *s.f.model, m, rng);
    const ChainState s3 = make_state(ismap, s.setup, *s.f.model, m, rng);
    const Vec noise = standard_normal(rng, 61);
    const Vec y1 = propose_from_noise(sn, s.setup, s1, noise);
    const Vec y2 = propose_from_noise(snmap, s.setup, s2, noise);
    const Vec y3 = propose_from_noise(ismap, s.setup, s3, noise);
    const double scale = s.f.space->norm(y3);
    CHECK(s.f.space->norm(y1 - y3) <= 1e-8 * scale);
    CHECK(s.f.space->norm(y2 - y3) <= 1e-8 * scale);
    for (const auto& [kind, from] : {std::pair{sn, s1}, std::pair{snmap, s2}, std::pair{ismap, s3}}) {
      const ChainState to = make_state(kind, s.setup, *s.f.model, y3, rng);
      CHECK(std::abs(log_acceptance_ratio(kind, s.setup, from, to)) <= 1e-8);
    }
  }
}

TEST_CASE("chains are deterministic and independent of the worker count") {
  auto s = make_sampling("linear", 41);
  const ProposalKind k{Method::SNMAP};
  const Chain c1 = run_chain(k, s.setup, *s.f.model, *s.setup.m_map, 200, 42, 3);
  const Chain c2 = run_chain(k, s.setup, *s.f.model->clone(), *s.setup.m_map, 200, 42, 3);
  CHECK(c1.samples == c2.samples);
  CHECK(c1.accepted == c2.accepted);
  CHECK(c1.log_post == c2.log_post);
  CHECK(c1.cumulative_solves == c2.cumulative_solves);
  const Chain other = run_chain(k, s.setup, *s.f.model, *s.setup.m_map, 200, 42, 4);
  CHECK(other.samples != c1.samples);

  const std::vector<Vec> starts(4, *s.setup.m_map);
  const auto serial = run_chains(k, s.setup, *s.f.model, starts, 100, 9, 1);
  const auto parallel = run_chains(k, s.setup, *s.f.model, starts, 100, 9, 3);
  REQUIRE(serial.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(serial[i].meta.chain_id == i);
    CHECK(serial[i].samples == parallel[i].samples);
  }
}

TEST_CASE("rejections repeat the previous sample bit for bit") {
  auto s = make_sampling("exp_reaction", 41);
  const ProposalKind k{Method::RWMH, 0.3};
  const Chain c = run_chain(k, s.setup, *s.f.model, *s.setup.m_map, 500, 1, 0);
  int rejected = 0;
  for (int i = 1; i < c.size(); ++i) {
    if (!c.accepted[i]) {
      ++rejected;
      CHECK(c.samples.row(i) == c.samples.row(i - 1));
      CHECK(c.log_post(i) == c.log_post(i - 1));
    }
  }
  CHECK(rejected > 0);
  for (int i = 1; i < c.size(); ++i) CHECK(c.cumulative_solves[i] >= c.cumulative_solves[i - 1]);
}

TEST_CASE("single step from a forced identity proposal") {
  auto s = make_sampling("linear", 31);
  // sigma so small the proposal equals the start point in floating point
  const ProposalKind k{Method::RWMH, 1e-300};
  const Chain c = run_chain(k, s.setup, *s.f.model, *s.setup.m_map, 1, 5, 0);
  CHECK(c.size() == 1);
  CHECK(c.accepted[0]);
  CHECK(c.samples.row(0).transpose() == *s.setup.m_map);
}

TEST_CASE("per-step solve counts") {
  auto s = make_sampling("exp_reaction", 61);
  const int r = s.setup.r, l = s.setup.l;
  const std::vector<std::pair<Method, long>> expect{
      {Method::ISMAP, 1}, {Method::SNMAP, 2}, {Method::SN, 2 + 2L * (r + l)}, {Method::RWMH, 1}};
  for (const auto& [m, per_step] : expect) {
    CAPTURE(to_string(m));
    // fresh clone: no state cached at the start point
    const Chain c = run_chain({m, 0.05}, s.setup, *s.f.model->clone(), *s.setup.m_map, 30, 2, 0);
    for (int i = 0; i < c.size(); ++i) CHECK(c.cumulative_solves[i] == per_step * (i + 1));
    CHECK(c.meta.start_solves == per_step);  // the start state needs the same caches as a step
    CHECK(c.total_solves() == c.meta.start_solves + per_step * 30);
  }
}

TEST_CASE("proposal solver failures are rejections") {
  auto s = make_sampling("exp_reaction", 41);
  FailingModel model(s.f.model->clone(), s.setup.m_map->coeff(0) + 0.05);
  const Chain c = run_chain({Method::RWMH, 0.5}, s.setup, model, *s.setup.m_map, 200, 3, 0);
  CHECK(c.meta.solver_failures > 0);
  for (int i = 0; i < c.size(); ++i) CHECK(c.samples(i, 0) <= s.setup.m_map->coeff(0) + 0.05);
  // a failing start state is fatal
  Vec bad = *s.setup.m_map;
  bad(0) += 1.0;
  CHECK_THROWS_AS(run_chain({Method::RWMH, 0.5}, s.setup, model, bad, 10, 3, 0), NumericalError);
}

TEST_CASE("start point selection") {
  auto s = make_sampling("linear", 31);
  const Chain pilot = run_chain({Method::ISMAP}, s.setup, *s.f.model, *s.setup.m_map, 300, 7, 0);
  const WeightedSpace& w = *s.f.space;
  const Vec mean = pilot.samples.colwise().mean().transpose();

  const auto one = select_start_points(pilot, 1, w);
  REQUIRE(one.size() == 1);
  double far = 0;
  for (int i = 0; i < pilot.size(); ++i) far = std::max(far, w.norm(pilot.samples.row(i).transpose() - mean));
  CHECK(w.norm(pilot.samples.row(one[0]).transpose() - mean) == far);

  auto all = select_start_points(pilot, pilot.size(), w);
  std::sort(all.begin(), all.end());
  std::vector<int> iota(static_cast<std::size_t>(pilot.size()));
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(all == iota);

  const int k = 21;
  const double greedy = min_pairwise(pilot.samples, select_start_points(pilot, k, w), w);
  Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> idx = iota;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    CHECK(greedy >= min_pairwise(pilot.samples, idx, w));
  }
  CHECK_THROWS_AS(select_start_points(pilot, 0, w), ConfigError);
  CHECK_THROWS_AS(select_start_points(pilot, pilot.size() + 1, w), ConfigError);
}

TEST_CASE("ISMAP chain costs one forward solve per sample") {
  auto s = make_sampling("exp_reaction", 41);
  const Chain c = run_chain({Method::ISMAP}, s.setup, *s.f.model, *s.setup.m_map, 1000, 4, 0);
  CHECK(c.cumulative_solves.back() == 1000);
}

TEST_CASE("RWMH step tuning moves towards the target rate") {
  auto s = make_sampling("linear", 61);
  const double sigma = tune_rwmh_sigma(s.setup, *s.f.model, *s.setup.m_map, 1.0, 20, 100, 3);
  CHECK(sigma > 0);
  CHECK(sigma < 1.0);
  const Chain c = run_chain({Method::RWMH, sigma}, s.setup, *s.f.model, *s.setup.m_map, 4000, 11, 0);
  CHECK(c.acceptance_rate() > 0.1);
  CHECK(c.acceptance_rate() < 0.45);
}
