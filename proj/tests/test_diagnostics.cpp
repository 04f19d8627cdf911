#include "hbmcmc/diagnostics.hpp"
#include "hbmcmc/errors.hpp"
#include "hbmcmc/lowrank.hpp"
#include "hbmcmc/map.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace hbmcmc;

namespace {

Vec iid(int N, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(rng, N);
}

Vec ar1(int N, double phi, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Vec x(N);
  x(0) = nd(rng) / std::sqrt(1 - phi * phi);
  for (int i = 1; i < N; ++i) x(i) = phi * x(i - 1) + nd(rng);
  return x;
}

Chain chain_from(const Mat& samples) {
  Chain c;
  c.samples = samples;
  c.accepted.assign(static_cast<std::size_t>(samples.rows()), true);
  c.log_post = Vec::Zero(samples.rows());
  c.cumulative_solves.resize(static_cast<std::size_t>(samples.rows()));
  for (int i = 0; i < samples.rows(); ++i) c.cumulative_solves[static_cast<std::size_t>(i)] = 2L * (i + 1);
  c.meta.n = static_cast<int>(samples.cols());
  return c;
}

Mat iid_matrix(int N, int n, std::uint64_t seed, double offset = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  return Mat::NullaryExpr(N, n, [&] { return nd(rng) + offset; });
}

}  // namespace

TEST_CASE("autocorrelation basics") {
  const Vec x = ar1(200000, 0.5, 1);
  const Vec rho = autocorrelation(x, 5);
  CHECK(rho(0) == doctest::Approx(1.0));
  CHECK(rho(1) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(rho(2) == doctest::Approx(0.25).epsilon(0.05));
  CHECK(autocorrelation(Vec::Constant(50, 2.0), 3).norm() == 0.0);
}

TEST_CASE("IAT oracles") {
  CHECK(iat(iid(100000, 2)) == doctest::Approx(1.0).epsilon(0.1));
  const Vec a = ar1(1000000, 0.5, 3);
  CHECK(iat(a) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(iat(a, IatEstimator::InitialPositive) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(iat(a, IatEstimator::MaxTruncation) >= iat(a));

  const Vec base = iid(50000, 4);
  Vec dup(100000);
  for (int i = 0; i < 50000; ++i) dup(2 * i) = dup(2 * i + 1) = base(i);
  CHECK(iat(dup) == doctest::Approx(2.0).epsilon(0.15));

  const IatResult c = iat_detail(Vec::Constant(400, 1.5));
  CHECK(c.degenerate);
  CHECK(c.tau == 400.0);
  CHECK(ess(Vec::Constant(400, 1.5)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(iat(Vec::Ones(9)), ConfigError);
  CHECK(iat(iid(20, 5)) >= 1.0);
}

TEST_CASE("ESS oracles") {
  CHECK(ess(iid(10000, 6)) == doctest::Approx(10000).epsilon(0.1));
  CHECK(ess(ar1(30000, 0.5, 7)) == doctest::Approx(10000).epsilon(0.1));
}

TEST_CASE("thinning an independent chain does not inflate the IAT") {
  const Vec x = iid(100000, 8);
  Vec thin(50000);
  for (int i = 0; i < 50000; ++i) thin(i) = x(2 * i);
  // the standard error of tau on ~5e4 i.i.d. values is well below 0.05
  CHECK(iat(thin) <= iat(x) + 3 * 0.05);
}

TEST_CASE("IAT estimator names") {
  for (auto e : {IatEstimator::Windowed, IatEstimator::MaxTruncation, IatEstimator::InitialPositive}) {
    CHECK(parse_iat_estimator(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_iat_estimator("spectral"), ConfigError);
}

TEST_CASE("mean squared jump") {
  const WeightedSpace w(Mesh1D::uniform(5, 1.0));
  CHECK(msj(chain_from(Mat::Constant(10, 5, 0.3)), w) == 0.0);

  Mat two = Mat::Zero(2, 5);
  const double scale = 2.0 / w.norm(Vec::Ones(5));
  two.row(1) = Vec::Ones(5).transpose() * scale;
  CHECK(msj(chain_from(two), w) == doctest::Approx(4.0));

  // identity covariance in R^n_M: E||X - Y||_M^2 = 2 n
  Rng rng(9);
  Mat s(100000, 5);
  for (int i = 0; i < s.rows(); ++i) s.row(i) = w.whiten(standard_normal(rng, 5)).transpose();
  CHECK(msj(chain_from(s), w) == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("MPSRF oracles") {
  const std::vector<Mat> same{iid_matrix(100000, 3, 10), iid_matrix(100000, 3, 11)};
  const double r = mpsrf_detail(same).value;
  CHECK(r >= 1.0);
  CHECK(r <= 1.02);

  const std::vector<Mat> apart{iid_matrix(2000, 3, 12, -5.0), iid_matrix(2000, 3, 13, 5.0)};
  CHECK(mpsrf_detail(apart).value > 1.5);

  for (int t = 0; t < 5; ++t) {
    const std::vector<Mat> small{iid_matrix(20, 2, 20 + t), iid_matrix(20, 2, 40 + t), iid_matrix(20, 2, 60 + t)};
    CHECK(mpsrf_detail(small).value >= std::sqrt(19.0 / 20.0));
  }

  // constant identical chains: singular W, regularized and flagged
  const std::vector<Mat> flat{Mat::Constant(50, 3, 1.0), Mat::Constant(50, 3, 1.0)};
  CHECK(mpsrf_detail(flat).regularized);

  CHECK_THROWS_AS(mpsrf_detail(std::vector<Mat>{iid_matrix(10, 2, 1)}), ConfigError);
  CHECK_THROWS_AS(mpsrf_detail(std::vector<Mat>{iid_matrix(10, 2, 1), iid_matrix(11, 2, 2)}), ConfigError);
  CHECK_THROWS_AS(mpsrf_detail(same, 1.0), ConfigError);
}

TEST_CASE("burn-in and probe") {
  CHECK(burn_start(100, 0.0) == 0);
  CHECK(burn_start(100, 0.25) == 25);
  const Mesh1D mesh = Mesh1D::uniform(139, 1.0);
  CHECK(probe_node(mesh) == 95);
  CHECK(probe_node(mesh, 0.0) == 0);
}

TEST_CASE("SPIS formula instantiation") {
  // two chains of 5000 i.i.d. samples, 2 solves per step, setup 300
  std::vector<Chain> chains{chain_from(iid_matrix(5000, 3, 30)), chain_from(iid_matrix(5000, 3, 31))};
  const double tau0 = iat(chains[0].samples.col(1)), tau1 = iat(chains[1].samples.col(1));
  const double total_ess = 5000 / tau0 + 5000 / tau1;
  CHECK(pooled_iat(chains, 1) == doctest::Approx(10000 / total_ess));
  CHECK(chain_solves(chains) == 20000);
  CHECK(spis(chains, 1, 300) == doctest::Approx((300 + 20000) / total_ess));

  const DiagnosticsReport rep = diagnose(chains, WeightedSpace(Mesh1D::uniform(3, 1.0)), 1, 300);
  CHECK(rep.chains == 2);
  CHECK(rep.samples == 5000);
  CHECK(rep.ess == doctest::Approx(10000 / rep.iat));
  CHECK(rep.spis == doctest::Approx(static_cast<double>(rep.total_solves) / rep.ess));
  CHECK(rep.total_solves == 20300);
  CHECK(rep.acceptance_rate == 1.0);
  CHECK(rep.mpsrf >= 1.0);
}

TEST_CASE("SNMAP is cheaper per independent sample than SN on the linear problem") {
  auto f = hbmcmc::testing::make_fixture("linear", 61);
  MapOptions opts;
  opts.forcing = CgForcing::Exact;
  const MapResult map = solve_map(*f.model, *f.prior, f.prior->mean(), opts);
  Rng rng(1);
  SamplerSetup setup;
  setup.prior = f.prior;
  setup.m_map = map.m_map;
  setup.lrh_map = std::make_shared<const LowRankHessian>(build_lowrank(*f.model, f.prior, map.m_map, 20, 5, rng));
  const std::vector<Vec> starts(2, map.m_map);
  const auto sn = run_chains({Method::SN}, setup, *f.model, starts, 1000, 3);
  const auto snmap = run_chains({Method::SNMAP}, setup, *f.model, starts, 1000, 3);
  const int probe = probe_node(f.space->mesh());
  const long setup_solves = map.solve_count.linearized_solves() + 50;
  CHECK(spis(snmap, probe, setup_solves) < spis(sn, probe, 0));
}
