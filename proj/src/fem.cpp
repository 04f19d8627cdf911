#include "hbmcmc/fem.hpp"

#include "hbmcmc/errors.hpp"

#include <cmath>
#include <string>

namespace hbmcmc {

Mesh1D::Mesh1D(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) throw ConfigError("Mesh1D needs at least 2 nodes");
  for (std::size_t i = 1; i < coords_.size(); ++i) {
    if (!(coords_[i] > coords_[i - 1])) {
      throw ConfigError("Mesh1D node coordinates must be strictly increasing (node " +
                        std::to_string(i) + ")");
    }
  }
}

Mesh1D Mesh1D::uniform(int n_nodes, double length) {
  if (n_nodes < 2) throw ConfigError("mesh.n_nodes must be >= 2");
  if (!(length > 0)) throw ConfigError("mesh.length must be positive");
  std::vector<double> c(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) c[static_cast<std::size_t>(i)] = length * i / (n_nodes - 1);
  c.back() = length;
  return Mesh1D(std::move(c));
}

int Mesh1D::nearest_node(double x) const {
  int best = 0;
  double best_d = std::abs(coords_[0] - x);
  for (int i = 1; i < n_nodes(); ++i) {
    const double d = std::abs(this->x(i) - x);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

Vec SymTridiag::apply(const Vec& x) const {
  const int n = size();
  Vec y = diag.cwiseProduct(x);
  for (int i = 0; i + 1 < n; ++i) {
    y(i) += off(i) * x(i + 1);
    y(i + 1) += off(i) * x(i);
  }
  return y;
}

Mat SymTridiag::dense() const {
  const int n = size();
  Mat a = Mat::Zero(n, n);
  a.diagonal() = diag;
  for (int i = 0; i + 1 < n; ++i) {
    a(i, i + 1) = off(i);
    a(i + 1, i) = off(i);
  }
  return a;
}

SymTridiag& SymTridiag::operator+=(const SymTridiag& o) {
  diag += o.diag;
  off += o.off;
  return *this;
}

TridiagCholesky::TridiagCholesky(const SymTridiag& a) : d_(a.size()), e_(a.size() > 0 ? a.size() - 1 : 0) {
  const int n = a.size();
  for (int i = 0; i < n; ++i) {
    double p = a.diag(i);
    if (i > 0) {
      e_(i - 1) = a.off(i - 1) / d_(i - 1);
      p -= e_(i - 1) * e_(i - 1);
    }
    if (!(p > 0) || !std::isfinite(p)) {
      throw NumericalError("tridiagonal Cholesky: non-positive pivot at row " + std::to_string(i));
    }
    d_(i) = std::sqrt(p);
  }
}

Vec TridiagCholesky::solve(const Vec& b) const {
  const int n = size();
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = b(i);
    if (i > 0) s -= e_(i - 1) * y(i - 1);
    y(i) = s / d_(i);
  }
  return solve_upper(y);
}

Vec TridiagCholesky::solve_upper(const Vec& b) const {
  const int n = size();
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b(i);
    if (i + 1 < n) s -= e_(i) * x(i + 1);
    x(i) = s / d_(i);
  }
  return x;
}

Vec TridiagCholesky::apply_upper(const Vec& x) const {
  const int n = size();
  Vec y = d_.cwiseProduct(x);
  for (int i = 0; i + 1 < n; ++i) y(i) += e_(i) * x(i + 1);
  return y;
}

WeightedSpace::WeightedSpace(Mesh1D mesh)
    : mesh_(std::move(mesh)),
      mass_(assemble_mass_tridiag(mesh_)),
      dense_(mass_.dense()),
      chol_(mass_) {}

Mat WeightedSpace::R() const {
  const int n = this->n();
  Mat r(n, n);
  for (int j = 0; j < n; ++j) r.col(j) = chol_.apply_upper(Vec::Unit(n, j));
  return r;
}

double WeightedSpace::inner(const Vec& y, const Vec& z) const { return y.dot(mass_.apply(z)); }

double WeightedSpace::norm(const Vec& y) const { return std::sqrt(std::max(0.0, inner(y, y))); }

SymTridiag assemble_mass_tridiag(const Mesh1D& mesh) {
  SymTridiag m(mesh.n_nodes());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double h = mesh.h(e);
    m.diag(e) += h / 3.0;
    m.diag(e + 1) += h / 3.0;
    m.off(e) += h / 6.0;
  }
  return m;
}

std::shared_ptr<const WeightedSpace> assemble_mass(const Mesh1D& mesh) {
  return std::make_shared<const WeightedSpace>(mesh);
}

SymTridiag assemble_laplacian(const Mesh1D& mesh) {
  SymTridiag k(mesh.n_nodes());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double inv_h = 1.0 / mesh.h(e);
    k.diag(e) += inv_h;
    k.diag(e + 1) += inv_h;
    k.off(e) -= inv_h;
  }
  return k;
}

SymTridiag assemble_stiffness_tridiag(const Mesh1D& mesh, double a, double b) {
  if (!(a > 0)) throw ConfigError("stiffness coefficient a must be positive");
  if (!(b > 0)) throw ConfigError("stiffness coefficient b must be positive");
  SymTridiag k = assemble_laplacian(mesh);
  k.diag *= a;
  k.off *= a;
  SymTridiag m = assemble_mass_tridiag(mesh);
  m.diag *= b;
  m.off *= b;
  k += m;
  return k;
}

Mat assemble_stiffness(const Mesh1D& mesh, double a, double b) {
  return assemble_stiffness_tridiag(mesh, a, b).dense();
}

SymTridiag assemble_reaction(const Mesh1D& mesh, const Vec& c) {
  if (c.size() != mesh.n_nodes()) throw ConfigError("assemble_reaction: coefficient size mismatch");
  SymTridiag r(mesh.n_nodes());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double h = mesh.h(e);
    const double ca = c(e);
    const double cb = c(e + 1);
    r.diag(e) += h * (ca / 4.0 + cb / 12.0);
    r.diag(e + 1) += h * (ca / 12.0 + cb / 4.0);
    r.off(e) += h * (ca + cb) / 12.0;
  }
  return r;
}

Vec triple_product(const Mesh1D& mesh, const Vec& u, const Vec& w) {
  const int n = mesh.n_nodes();
  if (u.size() != n || w.size() != n) throw ConfigError("triple_product: size mismatch");
  Vec t = Vec::Zero(n);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double h = mesh.h(e);
    const double aa = u(e) * w(e);
    const double bb = u(e + 1) * w(e + 1);
    const double ab = u(e) * w(e + 1) + u(e + 1) * w(e);
    t(e) += h * (aa / 4.0 + ab / 12.0 + bb / 12.0);
    t(e + 1) += h * (aa / 12.0 + ab / 12.0 + bb / 4.0);
  }
  return t;
}

double m_inner(const Vec& y, const Vec& z, const WeightedSpace& w) {
  if (y.size() != w.n() || z.size() != w.n()) throw ConfigError("m_inner: dimension mismatch");
  return w.inner(y, z);
}

Mat mm_adjoint(const Mat& b, const Mat& mass) {
  if (b.rows() != b.cols() || b.rows() != mass.rows() || mass.rows() != mass.cols()) {
    throw ConfigError("mm_adjoint: dimension mismatch");
  }
  return mass.llt().solve(b.transpose() * mass);
}

Mat mm_adjoint(const Mat& b, const WeightedSpace& w) {
  if (b.rows() != w.n() || b.cols() != w.n()) throw ConfigError("mm_adjoint: dimension mismatch");
  Mat bt_m = b.transpose() * w.M();
  for (int j = 0; j < bt_m.cols(); ++j) bt_m.col(j) = w.solve_M(bt_m.col(j));
  return bt_m;
}

Mat em_adjoint(const Mat& v, const Mat& mass) {
  if (v.rows() != mass.rows() || mass.rows() != mass.cols()) throw ConfigError("em_adjoint: dimension mismatch");
  return v.transpose() * mass;
}

Mat em_adjoint(const Mat& v, const WeightedSpace& w) { return em_adjoint(v, w.M()); }

}  // namespace hbmcmc
