#pragma once

#include "elastica4d/curvespace.hpp"
#include "elastica4d/dsnsfit.hpp"
#include "elastica4d/spatialreg.hpp"
#include "elastica4d/temporalreg.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace e4d {

/// Failure inside one pipeline stage; what() starts with "[stage] ".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class MeanError : public std::runtime_error {
 public:
  MeanError(const std::string& what, std::vector<double> trace) : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

struct PairConfig {
  bool spatial = true;
  bool temporal = true;
  SpatialRegConfig spatial_cfg;
  TemporalRegConfig temporal_cfg;
  SphereGrid grid{32, 32};
  int time_samples = 50;
  int k_max = 10;
  double var_target = 0.99;
};

struct PairResult {
  SpatialRegResult spatial;
  std::optional<TemporalRegResult> temporal;
  TimeWarp warp;                          // identity when the temporal stage is off
  std::shared_ptr<const PcaBasis> basis;
  SampledSequence4D src;                  // src sampled on the pair grid
  SampledSequence4D tgt;                  // R tgt(gamma(s), t), spatially aligned only
  SampledSequence4D registered_tgt;       // aligned target read at zeta(t)
  SrvfCurve q1;
  SrvfCurve q2;                           // SRVF of the aligned, unwarped target
  SrvfCurve q2_registered;                // q2 acted on by zeta
};

/// Samples `surface` on `grid` at warp(times[m]), stored under times[m].
SampledSequence4D sample_warped(const Surface& surface, const SphereGrid& grid, const std::vector<double>& times,
                                const TimeWarp& warp, const std::string& name);

/// Spatial registration, sampling, shared PCA, SRVF, temporal registration.
PairResult register_pair(const Surface& src, const Surface& tgt, const PairConfig& cfg);
PairResult register_pair(const DsnsModel& src, const DsnsModel& tgt, const PairConfig& cfg);

struct GeodesicPath {
  std::vector<double> taus;
  std::vector<EmbeddedCurve> curves;
  std::vector<SampledSequence4D> sequences;
};

/// Straight line (1 - tau) q1 + tau q2 (start points likewise), each point
/// inverted to a curve and to frames on `grid`.
GeodesicPath geodesic(const SrvfCurve& q1, const SrvfCurve& q2, const std::vector<double>& taus,
                      const SphereGrid& grid);
/// 0, 1/(n-1), ..., 1.
std::vector<double> default_taus(int n = 5);
/// Sum of |q(tau_{i+1}) - q(tau_i)| along the straight line.
double path_length(const SrvfCurve& q1, const SrvfCurve& q2, const std::vector<double>& taus);

struct MeanConfig {
  PairConfig pair;          // grid, time samples, PCA and stage settings
  int max_iterations = 10;
  double tolerance = 1e-4;  // relative objective change
};

struct MeanResult {
  SrvfCurve mean_srvf;
  std::vector<TimeWarp> warps;
  SampledSequence4D mean_sequence;
  int iterations = 0;
  std::vector<double> objective_trace;   // entry 0: Euclidean mean, identity warps
  std::vector<SpatialRegResult> spatial;  // input i registered to input 0
  std::shared_ptr<const PcaBasis> basis;
  std::vector<SrvfCurve> inputs;          // SRVFs of the spatially aligned inputs
};

/// Sum over inputs of |q_mean - q_i * zeta_i|^2.
double mean_objective(const SrvfCurve& mean, const std::vector<SrvfCurve>& aligned);

/// Spatial registration to inputs[0], shared PCA, then alternating warp
/// registration against the mean and mean updates. An update that would
/// raise the objective is rejected and ends the iteration.
MeanResult karcher_mean(const std::vector<const Surface*>& inputs, const MeanConfig& cfg);
MeanResult karcher_mean(const std::vector<DsnsModel>& inputs, const MeanConfig& cfg);

/// Continuous representation of a mean sequence.
DsnsModel refit_mean_dsns(const SampledSequence4D& mean_sequence, const FitConfig& cfg);

}  // namespace e4d
