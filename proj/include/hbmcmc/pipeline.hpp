#pragma once

// File-based workflow stages. Every stage reads its inputs from run.out_dir
// and writes its outputs there, so stages can run one at a time from the CLI
// or back to back through cmd_pipeline.

#include "hbmcmc/analysis.hpp"
#include "hbmcmc/config.hpp"
#include "hbmcmc/diagnostics.hpp"
#include "hbmcmc/lowrank.hpp"
#include "hbmcmc/map.hpp"
#include "hbmcmc/models.hpp"
#include "hbmcmc/prior.hpp"
#include "hbmcmc/samplers.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hbmcmc {

// Stream ids for the seed-derived generators that are not chains.
inline constexpr std::uint64_t kTruthStream = 0x7275746800000001ULL;
inline constexpr std::uint64_t kNoiseStream = 0x7275746800000002ULL;
inline constexpr std::uint64_t kLowRankStream = 0x7275746800000003ULL;
inline constexpr std::uint64_t kPilotStream = 0x7275746800000004ULL;
inline constexpr std::uint64_t kTuneStream = 0x7275746800000005ULL;

struct Problem {
  std::shared_ptr<const WeightedSpace> space;
  std::shared_ptr<const GaussianPrior> prior;
  std::unique_ptr<ForwardModel> model;

  const Mesh1D& mesh() const { return space->mesh(); }
};

/// Mesh, prior and model from the config. Without `obs` the model carries
/// placeholder observations (unit noise, zero data) at the configured points.
Problem make_problem(const RunConfig& cfg, std::optional<ObservationSetup> obs = std::nullopt);
Vec make_truth(const RunConfig& cfg, const Problem& p);
/// Seed of a method's chain campaign, distinct per method.
std::uint64_t campaign_seed(const RunConfig& cfg, Method m);

std::string out_path(const RunConfig& cfg, const std::string& rel);
std::string chains_dir(const RunConfig& cfg, Method m);

struct SynthOutput {
  Vec truth;
  ObservationSetup obs;
  long solves = 0;
};
/// truth.csv, observations.csv.
SynthOutput cmd_synth(const RunConfig& cfg);

/// Problem with the observations of a previous synth run.
Problem load_problem(const RunConfig& cfg);

/// map.csv (with newton_iters, converged, solves metadata), map_history.csv.
MapResult cmd_map(const RunConfig& cfg);
struct StoredMap {
  Vec m_map;
  long solves = 0;
};
StoredMap read_map(const RunConfig& cfg, const Mesh1D& mesh);

struct SampleOutput {
  std::vector<Chain> chains;
  long setup_solves = 0;   // charged to the method: MAP + low-rank (+ RWMH tuning)
  long lowrank_solves = 0;
  long pilot_solves = 0;   // shared start-point pilot, 0 when reused
  double setup_seconds = 0.0;
};
/// Chains for one method under chains/<method>/, plus setup.csv there.
/// Start points come from start_points.csv when it was produced under the
/// same config, otherwise a pilot chain from the MAP point is run first.
SampleOutput cmd_sample(const RunConfig& cfg, Method method);

/// Low-rank Hessian at the stored MAP point; writes lowrank_map.csv.
std::shared_ptr<const LowRankHessian> lowrank_at_map(const RunConfig& cfg, Problem& p, const Vec& m_map,
                                                     long* solves = nullptr);

/// Diagnostics for a directory of chain files, or for each method
/// subdirectory of it. Writes report.csv to run.out_dir.
std::vector<DiagnosticsReport> cmd_diagnose(const RunConfig& cfg, const std::string& dir);

struct AnalyzeOutput {
  PosteriorEigensystem eigensystem;
  EigenClassification classification;
  std::vector<MarginalCurve> point_marginals;
  std::vector<MarginalCurve> eigen_marginals;
  std::vector<Contour2D> contours;
  int probe_node = 0;
  int unobserved_node = 0;
  double prior_variance_unobserved = 0.0;
  double posterior_variance_unobserved = 0.0;
  long solves = 0;
};
/// analysis/eigen_classification.csv, analysis/marginal_<id>.csv,
/// analysis/contour_<i>_<j>.csv, analysis/summary.csv.
AnalyzeOutput cmd_analyze(const RunConfig& cfg, const std::string& dir);

struct PipelineOutput {
  std::vector<DiagnosticsReport> reports;
  std::map<std::string, long> stage_solves;
  std::string manifest_hash;
};
/// synth, map, per-method sampling, diagnose, analyze and manifest.json.
PipelineOutput cmd_pipeline(const RunConfig& cfg);

}  // namespace hbmcmc
