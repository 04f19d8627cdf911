#include "hbmcmc/diagnostics.hpp"

#include "hbmcmc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>

namespace hbmcmc {

Vec autocorrelation(const Vec& x, int max_lag) {
  const Eigen::Index N = x.size();
  max_lag = static_cast<int>(std::clamp<Eigen::Index>(max_lag, 0, N - 1));
  Vec rho = Vec::Zero(max_lag + 1);
  if (N == 0) return rho;
  const Vec c = x.array() - x.mean();
  const double c0 = c.squaredNorm();
  if (!(c0 > 0)) return rho;

  // Zero-padded FFT gives the linear (non-circular) autocovariance.
  Eigen::Index nfft = 1;
  while (nfft < 2 * N) nfft <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(nfft), 0.0);
  std::copy(c.data(), c.data() + N, padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> acov;
  fft.inv(acov, spec);
  for (int s = 0; s <= max_lag; ++s) rho(s) = acov[static_cast<std::size_t>(s)] / acov[0];
  return rho;
}

IatEstimator parse_iat_estimator(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "windowed") return IatEstimator::Windowed;
  if (t == "max_truncation") return IatEstimator::MaxTruncation;
  if (t == "initial_positive") return IatEstimator::InitialPositive;
  throw ConfigError("unknown IAT estimator '" + s + "' (expected windowed|max_truncation|initial_positive)");
}

std::string to_string(IatEstimator e) {
  switch (e) {
    case IatEstimator::Windowed: return "windowed";
    case IatEstimator::MaxTruncation: return "max_truncation";
    case IatEstimator::InitialPositive: return "initial_positive";
  }
  return "unknown";
}

IatResult iat_detail(const Vec& x, IatEstimator est) {
  const int N = static_cast<int>(x.size());
  if (N < 10) throw ConfigError("iat: series needs at least 10 values");
  IatResult out;
  if (!((x.array() - x.mean()).abs().maxCoeff() > 0)) {
    out.tau = N;
    out.window = N / 2;
    out.degenerate = true;
    return out;
  }
  const Vec rho = autocorrelation(x, N / 2);
  const int S = static_cast<int>(rho.size()) - 1;

  double best = 1.0;
  if (est == IatEstimator::InitialPositive) {
    double sum = -1.0;
    int s = 0;
    for (; 2 * s + 1 <= S; ++s) {
      const double pair = rho(2 * s) + rho(2 * s + 1);
      if (pair <= 0) break;
      sum += 2.0 * pair;
      out.window = 2 * s + 1;
    }
    best = sum;
  } else {
    double partial = 1.0;
    for (int s = 1; s <= S; ++s) {
      if (est == IatEstimator::Windowed && rho(s) <= 0) break;
      partial += 2.0 * rho(s);
      if (partial > best) {
        best = partial;
        out.window = s;
      }
    }
  }
  out.tau = std::max(1.0, best);
  return out;
}

double iat(const Vec& x, IatEstimator est) { return iat_detail(x, est).tau; }

double ess(const Vec& x, IatEstimator est) { return static_cast<double>(x.size()) / iat(x, est); }

int burn_start(int N, double burn_frac) {
  if (!(burn_frac >= 0 && burn_frac < 1)) throw ConfigError("burn_frac must lie in [0, 1)");
  return static_cast<int>(std::floor(burn_frac * N));
}

double msj(const Chain& chain, const WeightedSpace& space, int start) {
  const int N = chain.size();
  if (N - start < 2) throw ConfigError("msj: need at least two samples");
  double sum = 0.0;
  for (int k = start + 1; k < N; ++k) {
    const Vec d = (chain.samples.row(k) - chain.samples.row(k - 1)).transpose();
    sum += space.inner(d, d);
  }
  return sum / (N - start - 1);
}

double msj(const std::vector<Chain>& chains, const WeightedSpace& space, double burn_frac) {
  if (chains.empty()) throw ConfigError("msj: no chains");
  double sum = 0.0;
  long jumps = 0;
  for (const auto& c : chains) {
    const int s = burn_start(c.size(), burn_frac);
    const long nj = c.size() - s - 1;
    sum += msj(c, space, s) * static_cast<double>(nj);
    jumps += nj;
  }
  return sum / static_cast<double>(jumps);
}

MpsrfResult mpsrf_detail(const std::vector<Mat>& chains, double burn_frac) {
  const int c = static_cast<int>(chains.size());
  if (c < 2) throw ConfigError("mpsrf: need at least two chains");
  const Eigen::Index N_full = chains[0].rows();
  const Eigen::Index p = chains[0].cols();
  for (const auto& ch : chains) {
    if (ch.rows() != N_full || ch.cols() != p) throw ConfigError("mpsrf: chains must have equal shapes");
  }
  const int s = burn_start(static_cast<int>(N_full), burn_frac);
  const Eigen::Index N = N_full - s;
  if (N < 2) throw ConfigError("mpsrf: need at least two retained samples per chain");

  Mat W = Mat::Zero(p, p);
  Mat means(c, p);
  for (int j = 0; j < c; ++j) {
    const auto kept = chains[static_cast<std::size_t>(j)].bottomRows(N);
    means.row(j) = kept.colwise().mean();
    const Mat centered = kept.rowwise() - means.row(j);
    W += centered.transpose() * centered / static_cast<double>(N - 1);
  }
  W /= c;
  const Eigen::RowVectorXd grand = means.colwise().mean();
  const Mat mc = means.rowwise() - grand;
  const Mat BN = mc.transpose() * mc / static_cast<double>(c - 1);

  MpsrfResult out;
  // Rank-deficient W (e.g. fully rejected chains) gets a small diagonal shift.
  Eigen::LLT<Mat> llt(W);
  const double tr = W.trace();
  Eigen::SelfAdjointEigenSolver<Mat> wes(W, Eigen::EigenvaluesOnly);
  if (llt.info() != Eigen::Success || wes.eigenvalues()(0) <= 1e-12 * std::max(tr, 1e-300)) {
    W.diagonal().array() += 1e-12 * std::max(tr, 1e-300) + 1e-300;
    out.regularized = true;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(BN, W, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) throw NumericalError("mpsrf: generalized eigensolver failed");
  const double lmax = std::max(0.0, ges.eigenvalues().maxCoeff());
  const double Nd = static_cast<double>(N);
  out.value = std::sqrt((Nd - 1.0) / Nd + (c + 1.0) / c * lmax);
  return out;
}

MpsrfResult mpsrf_detail(const std::vector<Chain>& chains, double burn_frac) {
  std::vector<Mat> mats;
  mats.reserve(chains.size());
  for (const auto& c : chains) mats.push_back(c.samples);
  return mpsrf_detail(mats, burn_frac);
}

double mpsrf(const std::vector<Chain>& chains, double burn_frac) { return mpsrf_detail(chains, burn_frac).value; }

int probe_node(const Mesh1D& mesh, double frac) { return mesh.nearest_node(frac * mesh.length()); }

double pooled_iat(const std::vector<Chain>& chains, int coord, double burn_frac, IatEstimator est) {
  if (chains.empty()) throw ConfigError("pooled_iat: no chains");
  double n_total = 0.0;
  double ess_total = 0.0;
  for (const auto& c : chains) {
    if (coord < 0 || coord >= c.samples.cols()) throw ConfigError("probe coordinate out of range");
    const int s = burn_start(c.size(), burn_frac);
    const Vec x = c.samples.col(coord).tail(c.size() - s);
    n_total += static_cast<double>(x.size());
    ess_total += ess(x, est);
  }
  return n_total / ess_total;
}

long chain_solves(const std::vector<Chain>& chains) {
  long total = 0;
  for (const auto& c : chains) total += c.total_solves();
  return total;
}

double spis(const std::vector<Chain>& chains, int coord, long setup_solves, double burn_frac, IatEstimator est) {
  double e = 0.0;
  for (const auto& c : chains) {
    const int s = burn_start(c.size(), burn_frac);
    e += ess(c.samples.col(coord).tail(c.size() - s), est);
  }
  if (!(e > 0)) throw NumericalError("spis: zero effective sample size");
  return static_cast<double>(setup_solves + chain_solves(chains)) / e;
}

DiagnosticsReport diagnose(const std::vector<Chain>& chains, const WeightedSpace& space, int probe_index,
                           long setup_solves, double burn_frac, IatEstimator est, double setup_seconds) {
  if (chains.empty()) throw ConfigError("diagnose: no chains");
  DiagnosticsReport r;
  r.method = chains[0].meta.method;
  r.chains = static_cast<int>(chains.size());
  r.samples = chains[0].size();
  r.probe_index = probe_index;
  if (chains.size() >= 2) {
    const MpsrfResult m = mpsrf_detail(chains, burn_frac);
    r.mpsrf = m.value;
    r.mpsrf_regularized = m.regularized;
  }
  r.iat = pooled_iat(chains, probe_index, burn_frac, est);
  double n_total = 0.0;
  long accepted = 0;
  long steps = 0;
  double wall = setup_seconds;
  for (const auto& c : chains) {
    n_total += c.size() - burn_start(c.size(), burn_frac);
    accepted += std::count(c.accepted.begin(), c.accepted.end(), true);
    steps += static_cast<long>(c.accepted.size());
    wall += c.meta.wall_seconds;
  }
  r.ess = n_total / r.iat;
  r.msj = msj(chains, space, burn_frac);
  r.acceptance_rate = steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  r.setup_solves = setup_solves;
  r.total_solves = setup_solves + chain_solves(chains);
  if (!(r.ess > 0)) throw NumericalError("diagnose: zero effective sample size");
  r.spis = static_cast<double>(r.total_solves) / r.ess;
  r.tpis = wall / r.ess;
  return r;
}

}  // namespace hbmcmc
