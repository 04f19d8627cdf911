#include "hbmcmc/analysis.hpp"

#include "hbmcmc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace hbmcmc {

PosteriorEigensystem posterior_eigensystem(ForwardModel& model, const GaussianPrior& prior, const Vec& m) {
  const int n = prior.n();
  if (n > 500) throw ConfigError("posterior_eigensystem: dense path limited to n <= 500");
  const WeightedSpace& space = prior.space();
  Mat H(n, n);
  for (int j = 0; j < n; ++j) H.col(j) = hvp(model, prior, m, Vec::Unit(n, j));
  // M H is symmetric; symmetrize away round-off.
  Mat MH = space.M() * H;
  MH = 0.5 * (MH + MH.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(MH, space.M());
  if (es.info() != Eigen::Success) throw NumericalError("posterior_eigensystem: eigensolver failed");
  PosteriorEigensystem out;
  out.V = es.eigenvectors().rowwise().reverse();
  out.lambda = es.eigenvalues().reverse();
  return out;
}

std::string to_string(EigenGroup g) {
  switch (g) {
    case EigenGroup::DataInformed: return "data_informed";
    case EigenGroup::Shadowed: return "shadowed";
    case EigenGroup::Mixed: return "mixed";
    case EigenGroup::PriorTail: return "prior_tail";
  }
  return "unknown";
}

double EigenRecord::observed_fraction() const {
  const double o = norm_observed * norm_observed;
  const double u = norm_unobserved * norm_unobserved;
  return o + u > 0 ? o / (o + u) : 0.0;
}

double restricted_norm(const Vec& v, const WeightedSpace& space, const std::vector<bool>& mask) {
  if (mask.size() != static_cast<std::size_t>(v.size()) || v.size() != space.n())
    throw ConfigError("restricted_norm: mask size mismatch");
  Vec w = v;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) w(i) = 0.0;
  }
  return space.norm(w);
}

EigenClassification classify(const PosteriorEigensystem& es, ForwardModel& model, const GaussianPrior& prior,
                             const Vec& m, double observed_from) {
  const WeightedSpace& space = prior.space();
  const Mesh1D& mesh = space.mesh();
  std::vector<bool> obs(static_cast<std::size_t>(mesh.n_nodes()));
  std::vector<bool> unobs(obs.size());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    obs[static_cast<std::size_t>(i)] = mesh.x(i) >= observed_from;
    unobs[static_cast<std::size_t>(i)] = !obs[static_cast<std::size_t>(i)];
  }

  EigenClassification recs;
  for (Eigen::Index k = 0; k < es.V.cols(); ++k) {
    const Vec v = es.V.col(k);
    const double vv = space.inner(v, v);
    EigenRecord r;
    r.index = static_cast<int>(k);
    r.lambda = es.lambda(k);
    r.r_m = space.inner(v, misfit_hvp(model, space, m, v)) / vv;
    r.r_p = space.inner(v, prior.apply_A(v)) / vv;
    r.d = r.r_m * r.r_m - r.r_p * r.r_p;
    r.norm_observed = restricted_norm(v, space, obs);
    r.norm_unobserved = restricted_norm(v, space, unobs);
    recs.push_back(r);
  }

  std::vector<double> rp_rest;
  for (const auto& r : recs) {
    if (!(r.d > 0)) rp_rest.push_back(r.r_p);
  }
  double median = 0.0;
  if (!rp_rest.empty()) {
    std::sort(rp_rest.begin(), rp_rest.end());
    const std::size_t h = rp_rest.size() / 2;
    median = rp_rest.size() % 2 ? rp_rest[h] : 0.5 * (rp_rest[h - 1] + rp_rest[h]);
  }
  for (auto& r : recs) {
    if (r.d > 0) r.group = EigenGroup::DataInformed;
    else if (r.r_p > median) r.group = EigenGroup::PriorTail;
    else if (r.norm_unobserved >= r.norm_observed) r.group = EigenGroup::Shadowed;
    else r.group = EigenGroup::Mixed;
  }
  std::stable_sort(recs.begin(), recs.end(), [](const EigenRecord& a, const EigenRecord& b) { return a.d > b.d; });
  return recs;
}

double quantile(Vec x, double p) {
  if (x.size() == 0) throw ConfigError("quantile of empty series");
  std::sort(x.data(), x.data() + x.size());
  const double pos = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, x.size() - 1);
  return x(lo) + (pos - static_cast<double>(lo)) * (x(hi) - x(lo));
}

double silverman_bandwidth(const Vec& x, double span, double floor_rel) {
  const double N = static_cast<double>(x.size());
  const double mean = x.mean();
  const double sd = N > 1 ? std::sqrt((x.array() - mean).square().sum() / (N - 1)) : 0.0;
  const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
  double s = sd;
  if (iqr > 0) s = std::min(sd, iqr / 1.34);
  const double h = 0.9 * s * std::pow(N, -0.2);
  return std::max(h, floor_rel * span);
}

Vec default_grid(const Vec& x, int points, double pad) {
  if (points < 3) throw ConfigError("grid needs at least 3 points");
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  double span = hi - lo;
  const double center = 0.5 * (lo + hi);
  if (!(span > 0)) span = std::max(1.0, std::abs(center));
  const double h = silverman_bandwidth(x, span);
  const double half = 0.5 * span + pad * h;
  // Odd point count puts a node at the center, so a collapsed sample lands on the grid.
  if (points % 2 == 0) ++points;
  return Vec::LinSpaced(points, center - half, center + half);
}

double trapezoid(const Vec& grid, const Vec& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) s += 0.5 * (grid(i + 1) - grid(i)) * (f(i) + f(i + 1));
  return s;
}

namespace {

Vec normalize_on_grid(const Vec& grid, Vec f, double spike_at) {
  const double mass = trapezoid(grid, f);
  if (mass > 1e-300 && std::isfinite(mass)) return f / mass;
  // Kernel narrower than the grid spacing: put the unit mass on the nearest node.
  f.setZero();
  Eigen::Index k = 0;
  (grid.array() - spike_at).abs().minCoeff(&k);
  f(k) = 1.0;
  return f / trapezoid(grid, f);
}

Vec gaussian_pdf(const Vec& grid, double mean, double var) {
  const double s = std::sqrt(var);
  return ((grid.array() - mean) / s).square().unaryExpr([](double z) { return std::exp(-0.5 * z); }) /
         (s * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

MarginalCurve kde_1d(const Vec& x, const Vec& grid, const std::string& provenance) {
  if (x.size() == 0 || grid.size() < 2) throw ConfigError("kde_1d: empty input");
  MarginalCurve c;
  c.provenance = provenance;
  c.grid = grid;
  const double span = grid(grid.size() - 1) - grid(0);
  c.bandwidth = silverman_bandwidth(x, span);
  const double h = c.bandwidth;
  Vec f = Vec::Zero(grid.size());
  const double norm = 1.0 / (static_cast<double>(x.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double t = grid(g);
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double z = (t - x(k)) / h;
      if (std::abs(z) < 40.0) s += std::exp(-0.5 * z * z);
    }
    f(g) = s * norm;
  }
  c.density = normalize_on_grid(grid, f, x.mean());
  c.p025 = quantile(x, 0.025);
  c.p975 = quantile(x, 0.975);
  return c;
}

std::pair<double, double> curve_moments(const MarginalCurve& c) {
  const double mass = trapezoid(c.grid, c.density);
  const double mean = trapezoid(c.grid, c.grid.cwiseProduct(c.density)) / mass;
  const Vec dev2 = (c.grid.array() - mean).square();
  const double var = trapezoid(c.grid, dev2.cwiseProduct(c.density)) / mass;
  return {mean, var};
}

Mat pool_samples(const std::vector<Chain>& chains, double burn_frac) {
  if (chains.empty()) throw ConfigError("pool_samples: no chains");
  Eigen::Index rows = 0;
  for (const auto& c : chains) {
    const int s = static_cast<int>(std::floor(burn_frac * c.size()));
    rows += c.size() - s;
  }
  Mat out(rows, chains[0].samples.cols());
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    const int s = static_cast<int>(std::floor(burn_frac * c.size()));
    out.middleRows(at, c.size() - s) = c.samples.bottomRows(c.size() - s);
    at += c.size() - s;
  }
  return out;
}

MarginalCurve point_marginal(const Mat& samples, int node, std::optional<Vec> grid) {
  if (samples.rows() < 100) throw ConfigError("point_marginal: need at least 100 samples");
  if (node < 0 || node >= samples.cols()) throw ConfigError("point_marginal: node index out of range");
  const Vec x = samples.col(node);
  return kde_1d(x, grid ? *grid : default_grid(x), "node_" + std::to_string(node));
}

Mat eigen_projections(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0,
                      const std::vector<int>& indices, const WeightedSpace& space) {
  Mat Vsel(es.V.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= es.V.cols()) throw ConfigError("eigen index out of range");
    Vsel.col(static_cast<Eigen::Index>(k)) = es.V.col(indices[k]);
  }
  const Mat MV = space.M() * Vsel;
  return (samples.rowwise() - m0.transpose()) * MV;
}

std::vector<MarginalCurve> eigen_marginals(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0,
                                           const Vec& m_map, const std::vector<int>& indices,
                                           const WeightedSpace& space, int grid_points) {
  const Mat C = eigen_projections(samples, es, m0, indices, space);
  std::vector<MarginalCurve> out;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int i = indices[k];
    const Vec c = C.col(static_cast<Eigen::Index>(k));
    const double mu = space.inner(es.V.col(i), m_map - m0);
    const double var = 1.0 / es.lambda(i);
    // Grid wide enough for both the samples and the Gaussian reference.
    Vec ext(c.size() + 2);
    ext << c, mu - 4.0 * std::sqrt(var), mu + 4.0 * std::sqrt(var);
    MarginalCurve curve = kde_1d(c, default_grid(ext, grid_points), "eig_" + std::to_string(i));
    curve.gaussian_at_map = normalize_on_grid(curve.grid, gaussian_pdf(curve.grid, mu, var), mu);
    out.push_back(std::move(curve));
  }
  return out;
}

std::vector<double> mass_levels(const Mat& f, double cell_area, const std::vector<double>& ps) {
  std::vector<double> vals(f.data(), f.data() + f.size());
  std::sort(vals.begin(), vals.end(), std::greater<>());
  const double total = std::accumulate(vals.begin(), vals.end(), 0.0) * cell_area;
  std::vector<double> out;
  for (double p : ps) {
    double cum = 0.0;
    double level = vals.empty() ? 0.0 : vals.back();
    for (double v : vals) {
      cum += v * cell_area;
      if (cum >= p * total) {
        level = v;
        break;
      }
    }
    out.push_back(level);
  }
  return out;
}

Contour2D eigen_pair_density(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0, const Vec& m_map,
                             int i, int j, const WeightedSpace& space, int grid_points) {
  if (i == j) throw ConfigError("eigen pair needs two distinct indices");
  const Mat C = eigen_projections(samples, es, m0, {i, j}, space);
  const Vec cx = C.col(0);
  const Vec cy = C.col(1);
  Contour2D out;
  out.i = i;
  out.j = j;
  const double mux = space.inner(es.V.col(i), m_map - m0);
  const double muy = space.inner(es.V.col(j), m_map - m0);
  const double vx = 1.0 / es.lambda(i);
  const double vy = 1.0 / es.lambda(j);
  Vec ex(cx.size() + 2), ey(cy.size() + 2);
  ex << cx, mux - 4.0 * std::sqrt(vx), mux + 4.0 * std::sqrt(vx);
  ey << cy, muy - 4.0 * std::sqrt(vy), muy + 4.0 * std::sqrt(vy);
  out.gx = default_grid(ex, grid_points);
  out.gy = default_grid(ey, grid_points);
  out.bx = silverman_bandwidth(cx, out.gx(out.gx.size() - 1) - out.gx(0));
  out.by = silverman_bandwidth(cy, out.gy(out.gy.size() - 1) - out.gy(0));

  // Product kernel: density(a, b) = (1/N) sum_k Kx(a - x_k) Ky(b - y_k).
  const Eigen::Index N = cx.size();
  Mat KX(out.gx.size(), N), KY(out.gy.size(), N);
  for (Eigen::Index k = 0; k < N; ++k) {
    KX.col(k) = ((out.gx.array() - cx(k)) / out.bx).square().unaryExpr([](double z) { return std::exp(-0.5 * z); });
    KY.col(k) = ((out.gy.array() - cy(k)) / out.by).square().unaryExpr([](double z) { return std::exp(-0.5 * z); });
  }
  out.density = KX * KY.transpose() / (static_cast<double>(N) * 2.0 * std::numbers::pi * out.bx * out.by);
  const double dx = out.gx(1) - out.gx(0);
  const double dy = out.gy(1) - out.gy(0);
  const double mass = out.density.sum() * dx * dy;
  if (mass > 0) out.density /= mass;

  const Vec gxp = gaussian_pdf(out.gx, mux, vx);
  const Vec gyp = gaussian_pdf(out.gy, muy, vy);
  out.gaussian_at_map = gxp * gyp.transpose();
  const double gmass = out.gaussian_at_map.sum() * dx * dy;
  if (gmass > 0) out.gaussian_at_map /= gmass;

  out.levels = mass_levels(out.density, dx * dy, out.mass_levels);
  out.gaussian_levels = mass_levels(out.gaussian_at_map, dx * dy, out.mass_levels);
  return out;
}

double prior_projection_variance(const GaussianPrior& prior, const Vec& v) {
  return prior.space().inner(v, prior.apply_cov(v));
}

}  // namespace hbmcmc
