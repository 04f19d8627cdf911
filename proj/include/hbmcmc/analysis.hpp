#pragma once

// Posterior interpretation at the MAP point: eigenvectors of the posterior
// precision, their Rayleigh-quotient classification, and kernel density
// marginals along nodes and eigen-directions.

#include "hbmcmc/models.hpp"
#include "hbmcmc/prior.hpp"
#include "hbmcmc/samplers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hbmcmc {

struct PosteriorEigensystem {
  Mat V;       // columns M-orthonormal
  Vec lambda;  // descending
};

/// Dense eigendecomposition of the Hessian at m (n Hessian actions). Meant
/// for n <= 500.
PosteriorEigensystem posterior_eigensystem(ForwardModel& model, const GaussianPrior& prior, const Vec& m);

enum class EigenGroup { DataInformed, Shadowed, Mixed, PriorTail };
std::string to_string(EigenGroup g);

struct EigenRecord {
  int index = 0;  // column of the eigensystem
  double lambda = 0.0;
  double r_m = 0.0;
  double r_p = 0.0;
  double d = 0.0;  // r_m^2 - r_p^2
  EigenGroup group = EigenGroup::Mixed;
  double norm_observed = 0.0;
  double norm_unobserved = 0.0;

  /// Fraction of the squared M-norm carried by the observed region.
  double observed_fraction() const;
};

/// Records sorted by descending d.
///
/// Groups: d > 0 is data_informed. Among the rest, r_p above the median of
/// that set is prior_tail; otherwise shadowed when the unobserved-region norm
/// is at least the observed one, else mixed. The observed region is
/// x >= observed_from.
using EigenClassification = std::vector<EigenRecord>;
EigenClassification classify(const PosteriorEigensystem& es, ForwardModel& model, const GaussianPrior& prior,
                             const Vec& m, double observed_from);

/// M-norm of v with entries outside the node mask zeroed.
double restricted_norm(const Vec& v, const WeightedSpace& space, const std::vector<bool>& mask);

struct MarginalCurve {
  std::string provenance;  // e.g. "node_42" or "eig_3"
  Vec grid;
  Vec density;
  std::optional<Vec> gaussian_at_map;
  double bandwidth = 0.0;
  double p025 = 0.0;
  double p975 = 0.0;
};

/// Silverman bandwidth 0.9 min(sd, IQR/1.34) N^{-1/5}, floored at
/// floor_rel * span.
double silverman_bandwidth(const Vec& x, double span, double floor_rel = 1e-6);

/// Empirical quantile, linear interpolation between order statistics.
double quantile(Vec x, double p);

/// Grid of `points` nodes covering the sample range padded by `pad`
/// bandwidths.
Vec default_grid(const Vec& x, int points = 256, double pad = 4.0);

/// Gaussian-kernel density on `grid`, renormalized to unit trapezoid mass.
MarginalCurve kde_1d(const Vec& x, const Vec& grid, const std::string& provenance = "");

double trapezoid(const Vec& grid, const Vec& f);
/// Mean and variance of a curve by trapezoid quadrature.
std::pair<double, double> curve_moments(const MarginalCurve& c);

/// Pooled post-burn-in samples, chains stacked in chain_id order.
Mat pool_samples(const std::vector<Chain>& chains, double burn_frac = 0.0);

/// KDE of one node's samples. Throws ConfigError for fewer than 100 samples.
MarginalCurve point_marginal(const Mat& samples, int node, std::optional<Vec> grid = std::nullopt);

/// c_i = <v_i, m - m0>_M for each sample row; one column per index.
Mat eigen_projections(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0,
                      const std::vector<int>& indices, const WeightedSpace& space);

/// Projection-direction KDEs with Gaussian-at-MAP reference curves
/// N(<v_i, m_map - m0>_M, 1/lambda_i).
std::vector<MarginalCurve> eigen_marginals(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0,
                                           const Vec& m_map, const std::vector<int>& indices,
                                           const WeightedSpace& space, int grid_points = 256);

struct Contour2D {
  int i = 0;
  int j = 0;
  Vec gx;
  Vec gy;
  Mat density;           // gx.size() x gy.size()
  Mat gaussian_at_map;   // same grid
  std::vector<double> mass_levels{0.05, 0.50, 0.95};
  std::vector<double> levels;           // density thresholds enclosing the mass levels
  std::vector<double> gaussian_levels;  // same for the reference
  double bx = 0.0;
  double by = 0.0;
};

/// Density threshold t with mass{f >= t} = p for each p (grid cell quadrature).
std::vector<double> mass_levels(const Mat& f, double cell_area, const std::vector<double>& ps);

Contour2D eigen_pair_density(const Mat& samples, const PosteriorEigensystem& es, const Vec& m0, const Vec& m_map,
                             int i, int j, const WeightedSpace& space, int grid_points = 80);

/// Variance of <v, m>_M under the prior: <v, A^{-1} v>_M.
double prior_projection_variance(const GaussianPrior& prior, const Vec& v);

}  // namespace hbmcmc
