#include "hbmcmc/models.hpp"

#include "hbmcmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hbmcmc {

namespace {

bool same_point(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

Vec exp_checked(const Vec& m) {
  Vec c = m.array().exp().matrix();
  if (!c.allFinite()) throw NumericalError("exp(m) overflow: parameter not finite");
  return c;
}

}  // namespace

void ObservationSetup::validate(int n) const {
  const int nq = q();
  if (B.rows() != nq || B.cols() != n) throw ConfigError("observation operator has wrong shape");
  if (noise_var.size() != nq || y_obs.size() != nq) throw ConfigError("observation vectors have wrong size");
  for (int i = 0; i < nq; ++i) {
    if (std::abs(B.row(i).sum() - 1.0) > 1e-12) throw ConfigError("interpolation weights must sum to 1");
    if (!(noise_var(i) > 0) || !std::isfinite(noise_var(i))) {
      throw ConfigError("noise variances must be strictly positive");
    }
  }
}

Mat interpolation_matrix(const Mesh1D& mesh, const std::vector<double>& points) {
  Mat b = Mat::Zero(static_cast<Eigen::Index>(points.size()), mesh.n_nodes());
  const auto& x = mesh.coords();
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double p = points[k];
    if (p < mesh.left() || p > mesh.right()) {
      throw ConfigError("observation point " + std::to_string(p) + " outside the mesh");
    }
    auto it = std::upper_bound(x.begin(), x.end(), p);
    int e = static_cast<int>(it - x.begin()) - 1;
    e = std::clamp(e, 0, mesh.n_elements() - 1);
    const double t = (p - mesh.x(e)) / mesh.h(e);
    const auto row = static_cast<Eigen::Index>(k);
    b(row, e) += 1.0 - t;
    b(row, e + 1) += t;
  }
  return b;
}

std::vector<double> observation_points(const Mesh1D& mesh, int count, ObsRegion region) {
  if (count < 1) throw ConfigError("obs.count must be >= 1");
  const double lo = region == ObsRegion::RightHalf ? mesh.left() + 0.5 * mesh.length() : mesh.left();
  const double hi = mesh.right();
  std::vector<double> p(static_cast<std::size_t>(count));
  if (count == 1) {
    p[0] = 0.5 * (lo + hi);
    return p;
  }
  for (int i = 0; i < count; ++i) p[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  p.back() = hi;
  return p;
}

ObservationSetup make_observation_setup(const Mesh1D& mesh, std::vector<double> points) {
  ObservationSetup s;
  s.B = interpolation_matrix(mesh, points);
  s.points = std::move(points);
  s.noise_var = Vec::Ones(s.q());
  s.y_obs = Vec::Zero(s.q());
  s.signal = Vec::Zero(s.q());
  return s;
}

void ForwardModel::set_observations(ObservationSetup obs) {
  obs.validate(n());
  obs_ = std::move(obs);
  invalidate_cache();
}

// ---------------------------------------------------------------------------

LinearGaussianModel::LinearGaussianModel(std::shared_ptr<const WeightedSpace> space, ObservationSetup obs,
                                         std::optional<Mat> F)
    : space_(std::move(space)) {
  set_observations(std::move(obs));
  F_ = F ? std::move(*F) : obs_.B;
  if (F_.rows() != q() || F_.cols() != n()) throw ConfigError("linear model F has wrong shape");
}

Vec LinearGaussianModel::solve_forward(const Vec& m) { return observables(m); }

// Mirrors the PDE model's caching so both models charge identical ledgers.
void LinearGaussianModel::ensure_state(const Vec& m, bool adjoint) {
  if (m.size() != n()) throw ConfigError("parameter has wrong dimension");
  if (!same_point(last_m_, m)) {
    counter_.forward_solves += 1;
    last_m_ = m;
    has_adjoint_ = false;
  }
  if (adjoint && !has_adjoint_) {
    counter_.adjoint_solves += 1;
    has_adjoint_ = true;
  }
}

Vec LinearGaussianModel::observables(const Vec& m) {
  ensure_state(m, false);
  return F_ * m;
}

Vec LinearGaussianModel::misfit_gradient_dual(const Vec& m) {
  ensure_state(m, true);
  const Vec r = F_ * m - obs_.y_obs;
  return F_.transpose() * r.cwiseQuotient(obs_.noise_var);
}

Vec LinearGaussianModel::misfit_hessian_dual(const Vec& m, const Vec& m_hat) {
  if (m_hat.size() != n()) throw ConfigError("direction has wrong dimension");
  ensure_state(m, true);
  counter_.incremental_solves += 2;
  return F_.transpose() * (F_ * m_hat).cwiseQuotient(obs_.noise_var);
}

std::unique_ptr<ForwardModel> LinearGaussianModel::clone() const {
  return std::make_unique<LinearGaussianModel>(space_, obs_, F_);
}

// ---------------------------------------------------------------------------

ExpReaction1D::ExpReaction1D(std::shared_ptr<const WeightedSpace> space, ObservationSetup obs,
                             double source_constant)
    : space_(std::move(space)),
      source_(source_constant),
      laplacian_(assemble_laplacian(space_->mesh())),
      load_(space_->apply_M(Vec::Constant(space_->n(), source_constant))) {
  set_observations(std::move(obs));
}

ExpReaction1D::Cache& ExpReaction1D::ensure_forward(const Vec& m) {
  if (m.size() != n()) throw ConfigError("parameter has wrong dimension");
  if (cache_ && same_point(cache_->m, m) && cache_->op) return *cache_;
  const Vec c = exp_checked(m);
  SymTridiag op = laplacian_;
  op += assemble_reaction(space_->mesh(), c);
  Cache fresh;
  fresh.m = m;
  fresh.op.emplace(op);
  counter_.forward_solves += 1;
  fresh.u = fresh.op->solve(load_);
  cache_ = std::move(fresh);
  return *cache_;
}

ExpReaction1D::Cache& ExpReaction1D::ensure_adjoint(const Vec& m) {
  Cache& c = ensure_forward(m);
  if (!c.v) {
    const Vec r = obs_.B * c.u - obs_.y_obs;
    const Vec rhs = -(obs_.B.transpose() * r.cwiseQuotient(obs_.noise_var));
    counter_.adjoint_solves += 1;
    c.v = c.op->solve(rhs);
  }
  return c;
}

Vec ExpReaction1D::solve_forward(const Vec& m) { return ensure_forward(m).u; }

Vec ExpReaction1D::observables(const Vec& m) { return obs_.B * ensure_forward(m).u; }

Vec ExpReaction1D::adjoint_state(const Vec& m) { return *ensure_adjoint(m).v; }

Vec ExpReaction1D::misfit_gradient_dual(const Vec& m) {
  const Cache& c = ensure_adjoint(m);
  return exp_checked(m).cwiseProduct(triple_product(space_->mesh(), c.u, *c.v));
}

Vec ExpReaction1D::misfit_hessian_dual(const Vec& m, const Vec& m_hat) {
  if (m_hat.size() != n()) throw ConfigError("direction has wrong dimension");
  const Cache& c = ensure_adjoint(m);
  const Mesh1D& mesh = space_->mesh();
  const Vec em = exp_checked(m);
  const Vec c_hat = em.cwiseProduct(m_hat);
  const SymTridiag r_hat = assemble_reaction(mesh, c_hat);

  // incremental forward: K(m) u_hat = -R(exp(m) m_hat) u
  counter_.incremental_solves += 1;
  const Vec u_hat = c.op->solve(-r_hat.apply(c.u));
  // incremental adjoint: K(m) v_hat = -B^T Gamma^{-1} B u_hat - R(exp(m) m_hat) v
  const Vec rhs = -(obs_.B.transpose() * (obs_.B * u_hat).cwiseQuotient(obs_.noise_var)) - r_hat.apply(*c.v);
  counter_.incremental_solves += 1;
  const Vec v_hat = c.op->solve(rhs);

  return c_hat.cwiseProduct(triple_product(mesh, c.u, *c.v)) +
         em.cwiseProduct(triple_product(mesh, u_hat, *c.v) + triple_product(mesh, c.u, v_hat));
}

std::unique_ptr<ForwardModel> ExpReaction1D::clone() const {
  return std::make_unique<ExpReaction1D>(space_, obs_, source_);
}

// ---------------------------------------------------------------------------

ObservationSetup synthesize_data(ForwardModel& model, const Vec& m_true, double noise_rel, Rng& rng) {
  if (!(noise_rel >= 0)) throw ConfigError("obs.noise_rel must be >= 0");
  ObservationSetup out = model.observations();
  out.signal = model.observables(m_true);
  const double sigma = noise_rel * out.signal.cwiseAbs().maxCoeff();
  out.noise_var = Vec::Constant(out.q(), sigma * sigma);
  out.y_obs = out.signal;
  if (sigma > 0) out.y_obs += sigma * standard_normal(rng, out.q());
  return out;
}

double data_misfit(ForwardModel& model, const Vec& m) {
  const ObservationSetup& obs = model.observations();
  const Vec r = model.observables(m) - obs.y_obs;
  return 0.5 * r.cwiseAbs2().cwiseQuotient(obs.noise_var).sum();
}

double cost(ForwardModel& model, const GaussianPrior& prior, const Vec& m) {
  return data_misfit(model, m) - prior.log_density(m);
}

double log_posterior(ForwardModel& model, const GaussianPrior& prior, const Vec& m) {
  return -cost(model, prior, m);
}

Vec gradient(ForwardModel& model, const GaussianPrior& prior, const Vec& m) {
  const Vec dual = model.misfit_gradient_dual(m) + prior.apply_K(m - prior.mean());
  return prior.space().solve_M(dual);
}

Vec misfit_hvp(ForwardModel& model, const WeightedSpace& space, const Vec& m, const Vec& m_hat) {
  return space.solve_M(model.misfit_hessian_dual(m, m_hat));
}

Vec misfit_hvp(ForwardModel& model, const GaussianPrior& prior, const Vec& m, const Vec& m_hat) {
  return misfit_hvp(model, prior.space(), m, m_hat);
}

Vec hvp(ForwardModel& model, const GaussianPrior& prior, const Vec& m, const Vec& m_hat) {
  return prior.space().solve_M(model.misfit_hessian_dual(m, m_hat) + prior.apply_K(m_hat));
}

Vec default_truth(const Mesh1D& mesh) {
  Vec t(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    t(i) = std::sin(2.0 * std::numbers::pi * (mesh.x(i) - mesh.left()) / mesh.length()) + 1.0;
  }
  return t;
}

}  // namespace hbmcmc
