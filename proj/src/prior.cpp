#include "hbmcmc/prior.hpp"

#include "hbmcmc/errors.hpp"

#include <Eigen/Eigenvalues>

namespace hbmcmc {

GaussianPrior::GaussianPrior(std::shared_ptr<const WeightedSpace> space, double a, double b, Vec m0)
    : space_(std::move(space)),
      a_(a),
      b_(b),
      m0_(std::move(m0)),
      k_(assemble_stiffness_tridiag(space_->mesh(), a, b)),
      k_chol_(k_),
      k_dense_(k_.dense()) {
  if (m0_.size() != space_->n()) throw ConfigError("prior mean has wrong dimension");
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(k_dense_, space_->M());
  if (es.info() != Eigen::Success) throw NumericalError("prior generalized eigensolver failed");
  v_ = es.eigenvectors();
  lambda_ = es.eigenvalues();
  if (!(lambda_.minCoeff() > 0)) throw NumericalError("prior precision is not positive definite");
  vt_m_ = v_.transpose() * space_->M();
}

Vec GaussianPrior::apply_A(const Vec& x) const { return space_->solve_M(k_.apply(x)); }

Vec GaussianPrior::apply_cov(const Vec& x) const { return k_chol_.solve(space_->apply_M(x)); }

Vec GaussianPrior::apply_L(const Vec& x) const {
  return v_ * (vt_m_ * x).cwiseQuotient(lambda_.cwiseSqrt());
}

Vec GaussianPrior::apply_L_inv(const Vec& x) const {
  return v_ * (vt_m_ * x).cwiseProduct(lambda_.cwiseSqrt());
}

double GaussianPrior::log_density(const Vec& m) const {
  if (m.size() != n()) throw ConfigError("prior log density: dimension mismatch");
  const Vec d = m - m0_;
  return -0.5 * d.dot(k_.apply(d));
}

Vec GaussianPrior::sample_from_noise(const Vec& noise) const {
  return m0_ + apply_L(space_->whiten(noise));
}

Vec GaussianPrior::sample(Rng& rng) const { return sample_from_noise(standard_normal(rng, n())); }

Vec GaussianPrior::pointwise_variance() const {
  Vec var(n());
  for (int i = 0; i < n(); ++i) var(i) = k_chol_.solve(Vec::Unit(n(), i))(i);
  return var;
}

Mat GaussianPrior::L_dense() const { return v_ * lambda_.cwiseSqrt().cwiseInverse().asDiagonal() * vt_m_; }

Mat GaussianPrior::cov_dense() const { return k_dense_.llt().solve(space_->M()); }

}  // namespace hbmcmc
