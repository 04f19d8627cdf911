#pragma once

// Parameter-to-observable maps with adjoint derivatives.
//
// A ForwardModel works in "dual" (assembled) form: misfit gradients and
// Hessian actions come back as Euclidean vectors b with <g, mhat>_M = b^T mhat.
// The free functions below add the prior terms and convert to M-weighted
// Riesz representers with one application of M^{-1}.

#include "hbmcmc/fem.hpp"
#include "hbmcmc/prior.hpp"
#include "hbmcmc/rng.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hbmcmc {

/// Linearized PDE-solve ledger.
struct SolveCounter {
  long forward_solves = 0;
  long adjoint_solves = 0;
  long incremental_solves = 0;

  long linearized_solves() const { return forward_solves + adjoint_solves + incremental_solves; }
  void reset() { *this = SolveCounter{}; }
  SolveCounter operator-(const SolveCounter& o) const {
    return {forward_solves - o.forward_solves, adjoint_solves - o.adjoint_solves,
            incremental_solves - o.incremental_solves};
  }
  SolveCounter& operator+=(const SolveCounter& o) {
    forward_solves += o.forward_solves;
    adjoint_solves += o.adjoint_solves;
    incremental_solves += o.incremental_solves;
    return *this;
  }
};

/// Pointwise observations by linear interpolation, with diagonal Gaussian
/// noise.
struct ObservationSetup {
  std::vector<double> points;
  Mat B;          // q x n interpolation weights
  Vec noise_var;  // diagonal of Gamma_noise
  Vec y_obs;
  Vec signal;     // noiseless B u(m_true), when known

  int q() const { return static_cast<int>(points.size()); }
  /// Throws ConfigError unless weights sum to 1 per row and variances > 0.
  void validate(int n) const;
};

/// Interpolation matrix for points inside the mesh.
Mat interpolation_matrix(const Mesh1D& mesh, const std::vector<double>& points);

enum class ObsRegion { RightHalf, Full };

/// `count` points uniformly spaced over [L/2, L] (RightHalf) or [0, L].
std::vector<double> observation_points(const Mesh1D& mesh, int count, ObsRegion region);

/// Observations with unit noise and zero data; fill in with synthesize_data.
ObservationSetup make_observation_setup(const Mesh1D& mesh, std::vector<double> points);

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual int n() const = 0;
  int q() const { return obs_.q(); }
  virtual std::string kind() const = 0;

  /// State vector u(m). One forward solve unless cached at m.
  virtual Vec solve_forward(const Vec& m) = 0;
  /// Observables f(m) = B u(m) for PDE models.
  virtual Vec observables(const Vec& m) = 0;
  /// Assembled misfit gradient b with b^T mhat the directional derivative
  /// of 1/2 ||f(m) - y||^2_{Gamma^{-1}}. Forward (cached) + 1 adjoint solve.
  virtual Vec misfit_gradient_dual(const Vec& m) = 0;
  /// Assembled misfit Hessian action. Two linearized solves, plus the
  /// forward/adjoint pair when the gradient state at m is not cached.
  virtual Vec misfit_hessian_dual(const Vec& m, const Vec& m_hat) = 0;

  /// Fresh instance with the same data and a zeroed counter.
  virtual std::unique_ptr<ForwardModel> clone() const = 0;

  const ObservationSetup& observations() const { return obs_; }
  /// Throws ConfigError if the setup is invalid for this model. Drops any
  /// cached adjoint state.
  void set_observations(ObservationSetup obs);

  SolveCounter& counter() { return counter_; }
  const SolveCounter& counter() const { return counter_; }

 protected:
  virtual void invalidate_cache() = 0;

  ObservationSetup obs_;
  SolveCounter counter_;
};

/// f(m) = F m. Derivatives are exact; solve counts follow the same
/// one-forward / one-adjoint / two-incremental ledger as the PDE model so
/// that cost accounting is comparable.
class LinearGaussianModel final : public ForwardModel {
 public:
  /// F defaults to the observation interpolation matrix B.
  LinearGaussianModel(std::shared_ptr<const WeightedSpace> space, ObservationSetup obs,
                      std::optional<Mat> F = std::nullopt);

  int n() const override { return space_->n(); }
  std::string kind() const override { return "linear"; }
  Vec solve_forward(const Vec& m) override;
  Vec observables(const Vec& m) override;
  Vec misfit_gradient_dual(const Vec& m) override;
  Vec misfit_hessian_dual(const Vec& m, const Vec& m_hat) override;
  std::unique_ptr<ForwardModel> clone() const override;

  const Mat& F() const { return F_; }

 protected:
  void invalidate_cache() override { has_adjoint_ = false; }

 private:
  void ensure_state(const Vec& m, bool adjoint);

  std::shared_ptr<const WeightedSpace> space_;
  Mat F_;
  Vec last_m_;
  bool has_adjoint_ = false;
};

/// -u'' + exp(m) u = s on the mesh with natural boundary conditions, linear
/// elements, reaction coefficient interpolated nodally:
///   (S + R(exp(m))) u = f,  S = int phi' phi',  f = int s phi.
/// Linear in the state, so each forward solve is one linearized solve.
class ExpReaction1D final : public ForwardModel {
 public:
  ExpReaction1D(std::shared_ptr<const WeightedSpace> space, ObservationSetup obs,
                double source_constant = 1.0);

  int n() const override { return space_->n(); }
  std::string kind() const override { return "exp_reaction"; }
  Vec solve_forward(const Vec& m) override;
  Vec observables(const Vec& m) override;
  Vec misfit_gradient_dual(const Vec& m) override;
  Vec misfit_hessian_dual(const Vec& m, const Vec& m_hat) override;
  std::unique_ptr<ForwardModel> clone() const override;

  double source_constant() const { return source_; }
  /// Adjoint state at m (solves if not cached).
  Vec adjoint_state(const Vec& m);

 protected:
  void invalidate_cache() override { cache_.reset(); }

 private:
  struct Cache {
    Vec m;
    Vec u;
    std::optional<Vec> v;
    std::optional<TridiagCholesky> op;
  };
  Cache& ensure_forward(const Vec& m);
  Cache& ensure_adjoint(const Vec& m);

  std::shared_ptr<const WeightedSpace> space_;
  double source_;
  SymTridiag laplacian_;
  Vec load_;
  std::optional<Cache> cache_;
};

/// Synthetic data: y = B u(m_true) + eps, eps_i ~ N(0, sigma^2),
/// sigma = noise_rel * max_j |(B u)_j|. Returns a setup carrying both the
/// noisy data and the noiseless signal. Throws ConfigError if noise_rel < 0.
/// With noise_rel = 0 the variances are zero and set_observations rejects the
/// setup; supply a likelihood variance explicitly in that case.
ObservationSetup synthesize_data(ForwardModel& model, const Vec& m_true, double noise_rel, Rng& rng);

/// 1/2 ||f(m) - y||^2_{Gamma^{-1}}.
double data_misfit(ForwardModel& model, const Vec& m);
/// J(m) = misfit + 1/2 <m - m0, A (m - m0)>_M.
double cost(ForwardModel& model, const GaussianPrior& prior, const Vec& m);
/// -J(m), constant dropped.
double log_posterior(ForwardModel& model, const GaussianPrior& prior, const Vec& m);
/// M-weighted gradient of J.
Vec gradient(ForwardModel& model, const GaussianPrior& prior, const Vec& m);
/// Hessian action of J in R^n_M.
Vec hvp(ForwardModel& model, const GaussianPrior& prior, const Vec& m, const Vec& m_hat);
/// Data-misfit part of the Hessian action (no prior term).
Vec misfit_hvp(ForwardModel& model, const WeightedSpace& space, const Vec& m, const Vec& m_hat);
Vec misfit_hvp(ForwardModel& model, const GaussianPrior& prior, const Vec& m, const Vec& m_hat);

/// Default truth for the built-in experiments: sin(2 pi x / L) + 1.
Vec default_truth(const Mesh1D& mesh);

}  // namespace hbmcmc
