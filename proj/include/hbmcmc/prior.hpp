#pragma once

#include "hbmcmc/fem.hpp"
#include "hbmcmc/rng.hpp"

#include <memory>

namespace hbmcmc {

/// Gaussian prior N(m0, A^{-1}) on R^n_M with elliptic precision
/// A = M^{-1} K, K = a * Laplacian + b * mass (natural boundary conditions).
///
/// The square-root factor is L = A^{-1/2} = V diag(lambda)^{-1/2} V^T M, built
/// from the dense generalized eigendecomposition K v = lambda M v with
/// V^T M V = I. L is M-self-adjoint, so L* = L and Gamma_prior = L L*.
///
/// Log densities drop their additive normalization constant.
class GaussianPrior {
 public:
  /// Throws ConfigError for non-positive coefficients or a mismatched mean,
  /// NumericalError if the eigensolver fails.
  GaussianPrior(std::shared_ptr<const WeightedSpace> space, double a, double b, Vec m0);

  int n() const { return space_->n(); }
  const WeightedSpace& space() const { return *space_; }
  const std::shared_ptr<const WeightedSpace>& space_ptr() const { return space_; }
  const Vec& mean() const { return m0_; }
  double a() const { return a_; }
  double b() const { return b_; }

  const Mat& K() const { return k_dense_; }
  /// Generalized eigenvectors (columns, M-orthonormal) and eigenvalues of
  /// (K, M), ascending.
  const Mat& eigenvectors() const { return v_; }
  const Vec& eigenvalues() const { return lambda_; }

  Vec apply_K(const Vec& x) const { return k_.apply(x); }
  /// A x = M^{-1} K x.
  Vec apply_A(const Vec& x) const;
  /// Gamma_prior x = K^{-1} M x.
  Vec apply_cov(const Vec& x) const;
  Vec apply_L(const Vec& x) const;
  Vec apply_L_adjoint(const Vec& x) const { return apply_L(x); }
  Vec apply_L_inv(const Vec& x) const;
  Vec apply_L_inv_adjoint(const Vec& x) const { return apply_L_inv(x); }

  /// -1/2 <m - m0, A (m - m0)>_M.
  double log_density(const Vec& m) const;

  /// m0 + L R^{-1} noise, noise standard normal in R^n.
  Vec sample_from_noise(const Vec& noise) const;
  Vec sample(Rng& rng) const;

  /// Nodal (Euclidean) variance of prior draws: diag(K^{-1}).
  Vec pointwise_variance() const;

  Mat L_dense() const;
  Mat cov_dense() const;  // K^{-1} M

 private:
  std::shared_ptr<const WeightedSpace> space_;
  double a_;
  double b_;
  Vec m0_;
  SymTridiag k_;
  TridiagCholesky k_chol_;
  Mat k_dense_;
  Mat v_;
  Vec lambda_;
  Mat vt_m_;  // V^T M
};

}  // namespace hbmcmc
