#pragma once

#include "hbmcmc/models.hpp"
#include "hbmcmc/prior.hpp"
#include "hbmcmc/rng.hpp"

#include <memory>

namespace hbmcmc {

/// Low-rank representation of the Hessian of J at a reference point,
///   H = L^{-*} (L* H_misfit L + I) L^{-1},  L* H_misfit L ~ V_r Lambda_r V_r^diamond,
/// with V_r M-orthonormal. All operations below are PDE-solve free.
class LowRankHessian {
 public:
  /// Rank-0 approximation (prior only).
  LowRankHessian(std::shared_ptr<const GaussianPrior> prior, Vec ref_point);
  /// From explicit eigenpairs; eigenvalues must be positive and descending.
  LowRankHessian(std::shared_ptr<const GaussianPrior> prior, Vec ref_point, Mat V, Vec lambda);

  int rank() const { return static_cast<int>(lambda_.size()); }
  const Vec& ref_point() const { return ref_; }
  const Mat& V() const { return v_; }
  const Vec& eigenvalues() const { return lambda_; }
  const GaussianPrior& prior() const { return *prior_; }

  /// All Ritz values of the Lanczos run (descending, including discarded).
  const Vec& ritz_values() const { return ritz_; }
  /// |beta_k s_ki| residual estimates of the retained pairs.
  const Vec& residual_estimates() const { return residuals_; }
  int lanczos_iterations() const { return iters_; }
  int restarts() const { return restarts_; }
  /// Retained pairs whose residual estimate exceeds kRitzTolerance (lambda + 1).
  int unconverged_pairs() const;

  /// L (I - V_r D_r V_r^diamond) L* g, D_r = diag(lambda / (lambda + 1)).
  Vec apply_inv(const Vec& g) const;
  /// L { V_r [(Lambda_r + I)^{-1/2} - I] V_r^diamond + I } x.
  Vec apply_inv_sqrt(const Vec& x) const;
  /// M-adjoint of apply_inv_sqrt.
  Vec apply_inv_sqrt_adjoint(const Vec& x) const;
  /// L^{-*} (V_r Lambda_r V_r^diamond + I) L^{-1} x.
  Vec apply_H(const Vec& x) const;
  /// 1/2 sum log(lambda_i + 1): log det H^{1/2} without the point-independent
  /// -log det L.
  double half_logdet_rel() const;

  friend LowRankHessian build_lowrank(ForwardModel&, std::shared_ptr<const GaussianPrior>, const Vec&, int,
                                      int, Rng&);

 private:
  Vec apply_inner(const Vec& x, const Vec& diag) const;  // x + V_r diag V_r^diamond x

  std::shared_ptr<const GaussianPrior> prior_;
  Vec ref_;
  Mat v_;
  Vec lambda_;
  Vec ritz_;
  Vec residuals_;
  int iters_ = 0;
  int restarts_ = 0;
};

/// Eigenvalues at or below this are discarded.
inline constexpr double kEigenvalueFloor = 1e-10;
/// Relative residual tolerance for reporting a Ritz pair as converged.
inline constexpr double kRitzTolerance = 1e-6;

/// r + l Lanczos iterations with full reorthogonalization on
/// x -> L* H_misfit(m) L x, retaining the top r positive eigenpairs.
/// Exactly one misfit Hessian action (2 linearized solves) per iteration,
/// plus a forward/adjoint pair if the model has no cached gradient state at m.
///
/// On breakdown (invariant subspace exhausted) the recurrence continues from
/// a fresh random vector orthogonal to the current basis; failing to find one
/// in 3 attempts throws NumericalError. Throws ConfigError unless r >= 1,
/// l >= 0 and r + l <= n.
LowRankHessian build_lowrank(ForwardModel& model, std::shared_ptr<const GaussianPrior> prior, const Vec& m,
                             int r, int l, Rng& rng);

}  // namespace hbmcmc
