#pragma once

// One-dimensional linear finite elements: mesh, mass/stiffness assembly, and
// the M-weighted inner-product space R^n_M in which every parameter vector
// lives.

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace hbmcmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Mesh1D {
 public:
  /// Throws ConfigError unless coords has at least 2 strictly increasing
  /// entries.
  explicit Mesh1D(std::vector<double> coords);

  /// Uniform mesh of n_nodes nodes on [0, length].
  static Mesh1D uniform(int n_nodes, double length);

  int n_nodes() const { return static_cast<int>(coords_.size()); }
  int n_elements() const { return n_nodes() - 1; }
  double x(int i) const { return coords_[static_cast<std::size_t>(i)]; }
  double h(int e) const { return x(e + 1) - x(e); }
  double left() const { return coords_.front(); }
  double right() const { return coords_.back(); }
  double length() const { return right() - left(); }
  const std::vector<double>& coords() const { return coords_; }

  /// Index of the node closest to coordinate x (ties go to the lower index).
  int nearest_node(double x) const;

 private:
  std::vector<double> coords_;
};

/// Symmetric tridiagonal matrix. The natural storage for every 1D
/// linear-element operator in this library.
struct SymTridiag {
  Vec diag;  // n
  Vec off;   // n-1, off(i) = A(i, i+1)

  explicit SymTridiag(int n = 0) : diag(Vec::Zero(n)), off(Vec::Zero(n > 0 ? n - 1 : 0)) {}
  int size() const { return static_cast<int>(diag.size()); }
  Vec apply(const Vec& x) const;
  Mat dense() const;
  SymTridiag& operator+=(const SymTridiag& o);
};

/// Cholesky factor A = L L^T of an SPD tridiagonal matrix; L is lower
/// bidiagonal.
class TridiagCholesky {
 public:
  /// Throws NumericalError on a non-positive pivot.
  explicit TridiagCholesky(const SymTridiag& a);

  Vec solve(const Vec& b) const;        // A^{-1} b
  Vec solve_upper(const Vec& b) const;  // L^{-T} b
  Vec apply_upper(const Vec& x) const;  // L^T x
  int size() const { return static_cast<int>(d_.size()); }

 private:
  Vec d_;  // diagonal of L
  Vec e_;  // sub-diagonal of L
};

/// R^n_M: the mass matrix of a mesh together with its factorizations.
/// Immutable after construction.
class WeightedSpace {
 public:
  explicit WeightedSpace(Mesh1D mesh);

  const Mesh1D& mesh() const { return mesh_; }
  int n() const { return mesh_.n_nodes(); }

  /// Dense mass matrix M.
  const Mat& M() const { return dense_; }
  const SymTridiag& M_tridiag() const { return mass_; }

  Vec apply_M(const Vec& x) const { return mass_.apply(x); }
  Vec solve_M(const Vec& b) const { return chol_.solve(b); }
  /// Euclidean Cholesky factor R = L^T with R^T R = M.
  Mat R() const;
  /// R^{-1} n. For n standard normal the result has Euclidean covariance
  /// M^{-1}, i.e. identity covariance in R^n_M.
  Vec whiten(const Vec& n) const { return chol_.solve_upper(n); }

  double inner(const Vec& y, const Vec& z) const;
  double norm(const Vec& y) const;

 private:
  Mesh1D mesh_;
  SymTridiag mass_;
  Mat dense_;
  TridiagCholesky chol_;
};

/// Exact mass matrix of linear hat functions.
SymTridiag assemble_mass_tridiag(const Mesh1D& mesh);
std::shared_ptr<const WeightedSpace> assemble_mass(const Mesh1D& mesh);

/// K_ij = int a phi_i' phi_j' + b phi_i phi_j, natural boundary conditions.
/// Throws ConfigError unless a > 0 and b > 0.
Mat assemble_stiffness(const Mesh1D& mesh, double a, double b);
SymTridiag assemble_stiffness_tridiag(const Mesh1D& mesh, double a, double b);

/// int phi_i' phi_j' (pure Laplacian part, no coefficient checks).
SymTridiag assemble_laplacian(const Mesh1D& mesh);

/// Weighted reaction matrix R(c)_ij = int c_h phi_i phi_j with
/// c_h = sum_k c_k phi_k, integrated exactly.
SymTridiag assemble_reaction(const Mesh1D& mesh, const Vec& c);

/// t_k = int phi_k u_h w_h, integrated exactly. This is the derivative of
/// w^T R(c) u with respect to c_k.
Vec triple_product(const Mesh1D& mesh, const Vec& u, const Vec& w);

/// <y, z>_M = y^T M z. Throws ConfigError on dimension mismatch.
double m_inner(const Vec& y, const Vec& z, const WeightedSpace& w);

/// B* = M^{-1} B^T M, the adjoint of B : R^n_M -> R^n_M.
Mat mm_adjoint(const Mat& b, const WeightedSpace& w);
Mat mm_adjoint(const Mat& b, const Mat& mass);

/// V^diamond = V^T M, the adjoint of V : R^r -> R^n_M.
Mat em_adjoint(const Mat& v, const WeightedSpace& w);
Mat em_adjoint(const Mat& v, const Mat& mass);

}  // namespace hbmcmc
