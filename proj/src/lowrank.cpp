#include "hbmcmc/lowrank.hpp"

#include "hbmcmc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hbmcmc {

LowRankHessian::LowRankHessian(std::shared_ptr<const GaussianPrior> prior, Vec ref_point)
    : prior_(std::move(prior)), ref_(std::move(ref_point)), v_(Mat::Zero(prior_->n(), 0)) {}

LowRankHessian::LowRankHessian(std::shared_ptr<const GaussianPrior> prior, Vec ref_point, Mat V, Vec lambda)
    : prior_(std::move(prior)), ref_(std::move(ref_point)), v_(std::move(V)), lambda_(std::move(lambda)) {
  if (v_.rows() != prior_->n() || v_.cols() != lambda_.size()) throw ConfigError("LowRankHessian: shape mismatch");
  for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
    if (!(lambda_(i) > 0)) throw ConfigError("LowRankHessian: eigenvalues must be positive");
    if (i > 0 && lambda_(i) > lambda_(i - 1)) throw ConfigError("LowRankHessian: eigenvalues must be descending");
  }
  ritz_ = lambda_;
  residuals_ = Vec::Zero(lambda_.size());
}

Vec LowRankHessian::apply_inner(const Vec& x, const Vec& diag) const {
  if (rank() == 0) return x;
  const Vec coeff = v_.transpose() * prior_->space().apply_M(x);
  return x + v_ * diag.cwiseProduct(coeff);
}

Vec LowRankHessian::apply_inv(const Vec& g) const {
  const Vec d = -lambda_.array() / (lambda_.array() + 1.0);
  return prior_->apply_L(apply_inner(prior_->apply_L_adjoint(g), d));
}

Vec LowRankHessian::apply_inv_sqrt(const Vec& x) const {
  const Vec d = (lambda_.array() + 1.0).rsqrt() - 1.0;
  return prior_->apply_L(apply_inner(x, d));
}

Vec LowRankHessian::apply_inv_sqrt_adjoint(const Vec& x) const {
  const Vec d = (lambda_.array() + 1.0).rsqrt() - 1.0;
  return apply_inner(prior_->apply_L_adjoint(x), d);
}

Vec LowRankHessian::apply_H(const Vec& x) const {
  return prior_->apply_L_inv_adjoint(apply_inner(prior_->apply_L_inv(x), lambda_));
}

int LowRankHessian::unconverged_pairs() const {
  int count = 0;
  for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
    if (residuals_(i) > kRitzTolerance * (lambda_(i) + 1.0)) ++count;
  }
  return count;
}

double LowRankHessian::half_logdet_rel() const { return 0.5 * lambda_.array().log1p().sum(); }

LowRankHessian build_lowrank(ForwardModel& model, std::shared_ptr<const GaussianPrior> prior, const Vec& m,
                             int r, int l, Rng& rng) {
  const int n = prior->n();
  if (r < 1) throw ConfigError("lowrank.r must be >= 1");
  if (l < 0) throw ConfigError("lowrank.l must be >= 0");
  if (r + l > n) throw ConfigError("lowrank.r + lowrank.l must not exceed the parameter dimension");
  const WeightedSpace& space = prior->space();
  const int k = r + l;

  Mat Q = Mat::Zero(n, k);
  Vec alpha = Vec::Zero(k);
  Vec beta = Vec::Zero(k);  // beta(j) couples q_j and q_{j+1}
  int restarts = 0;

  // Fresh M-unit vector M-orthogonal to the first `cols` basis vectors.
  auto fresh_vector = [&](int cols) -> Vec {
    for (int attempt = 0; attempt < 3; ++attempt) {
      Vec w = standard_normal(rng, n);
      const double w0 = space.norm(w);
      for (int pass = 0; pass < 2 && cols > 0; ++pass) {
        w -= Q.leftCols(cols) * (Q.leftCols(cols).transpose() * space.apply_M(w));
      }
      const double nw = space.norm(w);
      if (nw > 1e-8 * w0) return w / nw;
    }
    throw NumericalError("Lanczos: could not generate a start vector orthogonal to the Krylov basis");
  };

  auto op = [&](const Vec& x) -> Vec {
    return prior->apply_L_adjoint(misfit_hvp(model, space, m, prior->apply_L(x)));
  };

  Q.col(0) = fresh_vector(0);
  double scale = 0.0;
  double beta_last = 0.0;
  for (int j = 0; j < k; ++j) {
    Vec w = op(Q.col(j));
    alpha(j) = space.inner(Q.col(j), w);
    scale = std::max(scale, std::abs(alpha(j)));
    w -= alpha(j) * Q.col(j);
    if (j > 0) w -= beta(j - 1) * Q.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * space.apply_M(w));
    }
    const double b = space.norm(w);
    if (j + 1 == k) {
      beta_last = b;
      break;
    }
    scale = std::max(scale, b);
    if (b <= 1e-10 * std::max(scale, 1.0)) {
      beta(j) = 0.0;
      Q.col(j + 1) = fresh_vector(j + 1);
      ++restarts;
    } else {
      beta(j) = b;
      Q.col(j + 1) = w / b;
    }
  }

  Mat T = Mat::Zero(k, k);
  T.diagonal() = alpha;
  for (int j = 0; j + 1 < k; ++j) {
    T(j, j + 1) = beta(j);
    T(j + 1, j) = beta(j);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  if (es.info() != Eigen::Success) throw NumericalError("Lanczos: tridiagonal eigensolver failed");

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return es.eigenvalues()(a) > es.eigenvalues()(b); });

  LowRankHessian out(prior, m);
  out.ritz_ = Vec(k);
  for (int i = 0; i < k; ++i) out.ritz_(i) = es.eigenvalues()(order[static_cast<std::size_t>(i)]);

  std::vector<int> keep;
  for (int i = 0; i < k && static_cast<int>(keep.size()) < r; ++i) {
    if (out.ritz_(i) > kEigenvalueFloor) keep.push_back(order[static_cast<std::size_t>(i)]);
  }
  const int kept = static_cast<int>(keep.size());
  Mat S(k, kept);
  out.lambda_ = Vec(kept);
  for (int i = 0; i < kept; ++i) {
    S.col(i) = es.eigenvectors().col(keep[static_cast<std::size_t>(i)]);
    out.lambda_(i) = es.eigenvalues()(keep[static_cast<std::size_t>(i)]);
  }
  out.v_ = Q * S;
  // Ritz residual ||T v - lambda v||_M = beta_last |s_{k-1,i}|.
  out.residuals_ = (beta_last * S.row(k - 1).cwiseAbs()).transpose();
  out.iters_ = k;
  out.restarts_ = restarts;
  return out;
}

}  // namespace hbmcmc
