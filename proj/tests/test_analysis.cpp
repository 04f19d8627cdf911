#include "hbmcmc/analysis.hpp"
#include "hbmcmc/errors.hpp"
#include "hbmcmc/lowrank.hpp"
#include "hbmcmc/map.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace hbmcmc;
using hbmcmc::testing::make_fixture;

namespace {

// Exact draws from N(mean, H^{-1}) given the posterior eigensystem of H.
Mat gaussian_draws(const PosteriorEigensystem& es, const Vec& mean, int N, std::uint64_t seed) {
  Rng rng(seed);
  const Vec scale = es.lambda.cwiseSqrt().cwiseInverse();
  Mat out(N, mean.size());
  for (int k = 0; k < N; ++k) {
    const Vec z = standard_normal(rng, es.lambda.size()).cwiseProduct(scale);
    out.row(k) = (mean + es.V * z).transpose();
  }
  return out;
}

double sample_var(const Vec& x) { return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1); }

struct LinearPosterior {
  hbmcmc::testing::Fixture f;
  Vec m_map;
  PosteriorEigensystem es;
  EigenClassification cls;
};

LinearPosterior linear_posterior(int n = 61) {
  LinearPosterior p{make_fixture("linear", n), {}, {}, {}};
  MapOptions opts;
  opts.forcing = CgForcing::Exact;
  p.m_map = solve_map(*p.f.model, *p.f.prior, p.f.prior->mean(), opts).m_map;
  p.es = posterior_eigensystem(*p.f.model, *p.f.prior, p.m_map);
  p.cls = classify(p.es, *p.f.model, *p.f.prior, p.m_map, 0.5);
  return p;
}

}  // namespace

TEST_CASE("zero forward map: posterior eigensystem is the prior's") {
  const Mesh1D mesh = Mesh1D::uniform(31, 1.0);
  auto w = assemble_mass(mesh);
  auto prior = std::make_shared<const GaussianPrior>(w, 0.05, 2.0, Vec::Constant(31, 1.0));
  LinearGaussianModel model(w, make_observation_setup(mesh, {0.7, 0.9}), Mat::Zero(2, 31));
  const PosteriorEigensystem es = posterior_eigensystem(model, *prior, prior->mean());
  const Vec expect = prior->eigenvalues().reverse();
  CHECK((es.lambda - expect).norm() <= 1e-9 * expect.norm());
  CHECK((es.V.transpose() * w->M() * es.V - Mat::Identity(31, 31)).norm() <= 1e-9);
  const EigenClassification c = classify(es, model, *prior, prior->mean(), 0.5);
  for (const auto& r : c) {
    CHECK(r.r_m == doctest::Approx(0.0));
    CHECK(r.group != EigenGroup::DataInformed);
  }
}

TEST_CASE("classification invariants on the linear problem") {
  const auto p = linear_posterior();
  REQUIRE(p.cls.size() == 61);
  int informed = 0;
  for (std::size_t i = 0; i < p.cls.size(); ++i) {
    const EigenRecord& r = p.cls[i];
    CHECK(r.r_m >= -1e-10);
    CHECK(r.r_p > 0);
    CHECK(std::abs(r.r_m + r.r_p - r.lambda) <= 1e-8 * r.lambda);
    CHECK(r.lambda >= r.r_p * (1 - 1e-12));
    CHECK(r.d == doctest::Approx(r.r_m * r.r_m - r.r_p * r.r_p));
    if (i > 0) CHECK(r.d <= p.cls[i - 1].d);
    CHECK(r.observed_fraction() >= 0);
    CHECK(r.observed_fraction() <= 1);
    informed += r.group == EigenGroup::DataInformed;
    CHECK((r.group == EigenGroup::DataInformed) == (r.d > 0));
  }
  CHECK(informed > 0);
  CHECK(informed <= 10);

  // prior-tail rule: r_p above the median of the d <= 0 set
  std::vector<double> rp;
  for (const auto& r : p.cls)
    if (r.d <= 0) rp.push_back(r.r_p);
  std::sort(rp.begin(), rp.end());
  const std::size_t h = rp.size() / 2;
  const double median = rp.size() % 2 ? rp[h] : 0.5 * (rp[h - 1] + rp[h]);
  for (const auto& r : p.cls) {
    if (r.d > 0) continue;
    if (r.r_p > median) {
      CHECK(r.group == EigenGroup::PriorTail);
    } else {
      CHECK(r.group == (r.norm_unobserved >= r.norm_observed ? EigenGroup::Shadowed : EigenGroup::Mixed));
    }
  }
}

TEST_CASE("region norms") {
  const WeightedSpace w(Mesh1D::uniform(11, 1.0));
  Rng rng(3);
  const Vec v = standard_normal(rng, 11);
  CHECK(restricted_norm(v, w, std::vector<bool>(11, true)) == doctest::Approx(w.norm(v)));
  CHECK(restricted_norm(v, w, std::vector<bool>(11, false)) == 0.0);
  CHECK_THROWS_AS(restricted_norm(v, w, std::vector<bool>(3, true)), ConfigError);
}

TEST_CASE("dense top eigenvector agrees with the Lanczos direction") {
  auto f = make_fixture("exp_reaction");
  const MapResult map = solve_map(*f.model, *f.prior, f.prior->mean());
  const PosteriorEigensystem es = posterior_eigensystem(*f.model, *f.prior, map.m_map);
  Rng rng(5);
  const LowRankHessian lrh = build_lowrank(*f.model, f.prior, map.m_map, 20, 5, rng);
  // H = L^{-1} (V Lambda V^diamond + I) L^{-1}; the top data direction maps to L^{-1} v_1
  const Vec u = f.prior->apply_L_inv(lrh.V().col(0));
  const Vec v = es.V.col(0);
  const double cosine = std::abs(f.space->inner(u, v)) / (f.space->norm(u) * f.space->norm(v));
  MESSAGE("cosine between dense v1 and L^{-1} Lanczos v1: ", cosine);
  CHECK(cosine >= 0.999);
}

TEST_CASE("kernel density estimates") {
  Rng rng(7);
  const Vec x = standard_normal(rng, 100000);
  const MarginalCurve c = kde_1d(x, default_grid(x), "iid");
  CHECK(trapezoid(c.grid, c.density) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(c.density.minCoeff() >= 0);
  CHECK(c.density.maxCoeff() == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(0.03));
  CHECK(c.p025 == doctest::Approx(-1.96).epsilon(0.03));
  CHECK(c.p975 == doctest::Approx(1.96).epsilon(0.03));
  CHECK(default_grid(x, 256).size() == 257);

  // identical samples collapse to a spike with a floored bandwidth
  const Vec same = Vec::Constant(500, 0.7);
  const MarginalCurve s = kde_1d(same, default_grid(same), "spike");
  CHECK(trapezoid(s.grid, s.density) == doctest::Approx(1.0).epsilon(1e-3));
  Eigen::Index arg;
  s.density.maxCoeff(&arg);
  CHECK(s.grid(arg) == doctest::Approx(0.7));
  CHECK(s.bandwidth > 0);
  CHECK(s.bandwidth <= 1e-6 * (s.grid(s.grid.size() - 1) - s.grid(0)) * (1 + 1e-12));

  CHECK(quantile(Vec::LinSpaced(101, 0, 100), 0.25) == doctest::Approx(25.0));
  CHECK_THROWS_AS(point_marginal(Mat::Zero(99, 3), 1), ConfigError);
}

TEST_CASE("Gaussian-at-MAP self-consistency of eigen marginals") {
  const auto p = linear_posterior();
  const int N = 100000;
  const Mat draws = gaussian_draws(p.es, p.m_map, N, 11);
  const std::vector<int> idx{0, 1, 5, 30};
  const auto curves = eigen_marginals(draws, p.es, p.f.prior->mean(), p.m_map, idx, *p.f.space);
  const Mat proj = eigen_projections(draws, p.es, p.f.prior->mean(), idx, *p.f.space);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int i = idx[k];
    CAPTURE(i);
    const double mu = p.f.space->inner(p.es.V.col(i), p.m_map - p.f.prior->mean());
    const double var = 1.0 / p.es.lambda(i);
    const auto [cm, cv] = curve_moments(curves[k]);
    CHECK(std::abs(cm - mu) <= 0.05 * std::sqrt(var));
    CHECK(cv == doctest::Approx(var).epsilon(0.05));
    CHECK(trapezoid(curves[k].grid, curves[k].density) == doctest::Approx(1.0).epsilon(1e-3));
    REQUIRE(curves[k].gaussian_at_map);
    CHECK(trapezoid(curves[k].grid, *curves[k].gaussian_at_map) == doctest::Approx(1.0).epsilon(1e-3));
  }
  // distinct eigen-directions are uncorrelated
  const Vec a = proj.col(0).array() - proj.col(0).mean(), b = proj.col(1).array() - proj.col(1).mean();
  const double corr = a.dot(b) / (a.norm() * b.norm());
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(N));
}

TEST_CASE("variance ordering and prior-tail directions on exact posterior draws") {
  const auto p = linear_posterior();
  const Mat draws = gaussian_draws(p.es, p.m_map, 20000, 12);
  std::vector<int> all(p.cls.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = p.cls[i].index;
  const Mat proj = eigen_projections(draws, p.es, p.f.prior->mean(), all, *p.f.space);
  double max_informed = 0, min_shadowed = std::numeric_limits<double>::infinity();
  int tails = 0;
  for (std::size_t k = 0; k < p.cls.size(); ++k) {
    const EigenRecord& r = p.cls[k];
    const double v = sample_var(proj.col(static_cast<Eigen::Index>(k)));
    if (r.group == EigenGroup::DataInformed) max_informed = std::max(max_informed, v);
    if (r.group == EigenGroup::Shadowed) min_shadowed = std::min(min_shadowed, v);
    if (r.group == EigenGroup::PriorTail && tails < 5) {
      ++tails;
      CHECK(v == doctest::Approx(prior_projection_variance(*p.f.prior, p.es.V.col(r.index))).epsilon(0.1));
    }
  }
  CHECK(tails > 0);
  CHECK(max_informed < min_shadowed);
}

TEST_CASE("mass levels and pair densities") {
  // uniform density on 10 x 10 cells of unit mass: any threshold picks whole levels
  Mat f = Mat::Zero(10, 10);
  for (int i = 0; i < 10; ++i) f.row(i).setConstant(static_cast<double>(i + 1));
  f /= f.sum();
  const auto lv = mass_levels(f, 1.0, {0.05, 0.5, 0.95});
  REQUIRE(lv.size() == 3);
  CHECK(lv[0] >= lv[1]);
  CHECK(lv[1] >= lv[2]);

  const auto p = linear_posterior();
  const Mat draws = gaussian_draws(p.es, p.m_map, 5000, 13);
  const Contour2D c = eigen_pair_density(draws, p.es, p.f.prior->mean(), p.m_map, 0, 1, *p.f.space, 60);
  CHECK(c.density.rows() == c.gx.size());
  CHECK(c.density.cols() == c.gy.size());
  const double cell = (c.gx(1) - c.gx(0)) * (c.gy(1) - c.gy(0));
  CHECK(c.density.sum() * cell == doctest::Approx(1.0).epsilon(0.02));
  CHECK(c.density.minCoeff() >= 0);
  REQUIRE(c.levels.size() == 3);
  CHECK(c.levels[0] > c.levels[1]);
  CHECK(c.levels[1] > c.levels[2]);
  REQUIRE(c.gaussian_levels.size() == 3);
}

TEST_CASE("pooling honours burn-in") {
  Chain a, b;
  a.samples = Mat::Constant(10, 2, 1.0);
  b.samples = Mat::Constant(10, 2, 2.0);
  const Mat all = pool_samples({a, b});
  CHECK(all.rows() == 20);
  CHECK(pool_samples({a, b}, 0.5).rows() == 10);
  CHECK(all(15, 0) == 2.0);
}
