#include "elastica4d/stats4d.hpp"

#include <cmath>

namespace e4d {

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

SrvfCurve average(const std::vector<SrvfCurve>& curves) {
  SrvfCurve mean = curves.front();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    mean.values += curves[i].values;
    mean.start_point += curves[i].start_point;
  }
  mean.values /= static_cast<double>(curves.size());
  mean.start_point /= static_cast<double>(curves.size());
  return mean;
}

SpatialRegResult identity_spatial(const SpatialRegConfig& cfg) {
  SpatialRegResult r;
  r.diffeo = SphDiffeo(cfg.max_degree);
  r.converged = true;
  return r;
}

}  // namespace

SampledSequence4D sample_warped(const Surface& surface, const SphereGrid& grid, const std::vector<double>& times,
                                const TimeWarp& warp, const std::string& name) {
  SampledSequence4D seq{name, grid, times, {}};
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  const Eigen::VectorXd z = warp.evaluate(t).cwiseMax(0.0).cwiseMin(1.0);
  const Eigen::MatrixX2d angles = grid.angles();
  for (Eigen::Index m = 0; m < z.size(); ++m) seq.frames.push_back(sample_points(surface, angles, z(m)));
  return seq;
}

PairResult register_pair(const Surface& src, const Surface& tgt, const PairConfig& cfg) {
  PairResult r;
  r.spatial = cfg.spatial ? in_stage("spatial", [&] { return register_spatial(src, tgt, cfg.spatial_cfg); })
                          : identity_spatial(cfg.spatial_cfg);
  const AlignedSurface aligned(tgt, r.spatial.rotation, r.spatial.diffeo);
  const std::vector<double> times = uniform_times(cfg.time_samples);

  in_stage("curvespace", [&] {
    r.src = sample_sequence(src, cfg.grid, times, "src");
    r.tgt = sample_sequence(aligned, cfg.grid, times, "tgt");
    r.basis = std::make_shared<const PcaBasis>(fit_pca(pooled_frames({&r.src, &r.tgt}), cfg.k_max, cfg.var_target));
    r.q1 = srvf_map(embed_sequence(r.src, r.basis));
    r.q2 = srvf_map(embed_sequence(r.tgt, r.basis));
    return 0;
  });

  if (cfg.temporal) {
    r.temporal = in_stage("temporal", [&] { return register_temporal(r.q1, r.q2, cfg.temporal_cfg); });
    r.warp = r.temporal->warp;
    r.q2_registered = apply_warp(r.q2, r.warp, cfg.temporal_cfg.action);
  } else {
    r.q2_registered = r.q2;
  }
  r.registered_tgt = in_stage("temporal", [&] { return sample_warped(aligned, cfg.grid, times, r.warp, "tgt"); });
  return r;
}

PairResult register_pair(const DsnsModel& src, const DsnsModel& tgt, const PairConfig& cfg) {
  return register_pair(DsnsSurface(src), DsnsSurface(tgt), cfg);
}

std::vector<double> default_taus(int n) {
  if (n < 2) throw std::invalid_argument("default_taus: need at least two values");
  std::vector<double> taus(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) taus[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return taus;
}

GeodesicPath geodesic(const SrvfCurve& q1, const SrvfCurve& q2, const std::vector<double>& taus,
                      const SphereGrid& grid) {
  if (q1.basis != q2.basis) throw CurveError("geodesic: curves live in different bases");
  if (q1.times.size() != q2.times.size() || q1.times != q2.times || q1.values.cols() != q2.values.cols()) {
    throw CurveError("geodesic: curves are sampled differently");
  }
  GeodesicPath path;
  for (double tau : taus) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("geodesic: tau outside [0, 1]");
    SrvfCurve q = q1;
    q.values = (1.0 - tau) * q1.values + tau * q2.values;
    q.start_point = (1.0 - tau) * q1.start_point + tau * q2.start_point;
    path.taus.push_back(tau);
    path.curves.push_back(srvf_invert(q));
    if (q1.basis) path.sequences.push_back(reconstruct_sequence(path.curves.back(), grid, "geodesic"));
  }
  return path;
}

double path_length(const SrvfCurve& q1, const SrvfCurve& q2, const std::vector<double>& taus) {
  double total = 0.0;
  for (std::size_t i = 1; i < taus.size(); ++i) {
    const Eigen::MatrixXd a = (1.0 - taus[i - 1]) * q1.values + taus[i - 1] * q2.values;
    const Eigen::MatrixXd b = (1.0 - taus[i]) * q1.values + taus[i] * q2.values;
    total += std::sqrt(curve_l2(q1.times, a, b));
  }
  return total;
}

double mean_objective(const SrvfCurve& mean, const std::vector<SrvfCurve>& aligned) {
  double total = 0.0;
  for (const SrvfCurve& q : aligned) total += curve_l2(mean.times, mean.values, q.values);
  return total;
}

MeanResult karcher_mean(const std::vector<const Surface*>& inputs, const MeanConfig& cfg) {
  if (inputs.size() < 2) throw std::invalid_argument("karcher_mean: need at least two inputs");
  const PairConfig& pc = cfg.pair;
  MeanResult result;
  const std::vector<double> times = uniform_times(pc.time_samples);

  std::vector<SampledSequence4D> sequences;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    SpatialRegResult s = (pc.spatial && i > 0)
                             ? in_stage("spatial", [&] { return register_spatial(*inputs[0], *inputs[i], pc.spatial_cfg); })
                             : identity_spatial(pc.spatial_cfg);
    const AlignedSurface aligned(*inputs[i], s.rotation, s.diffeo);
    sequences.push_back(sample_sequence(aligned, pc.grid, times, "input"));
    result.spatial.push_back(std::move(s));
  }

  in_stage("curvespace", [&] {
    std::vector<const SampledSequence4D*> all;
    for (const auto& s : sequences) all.push_back(&s);
    result.basis = std::make_shared<const PcaBasis>(fit_pca(pooled_frames(all), pc.k_max, pc.var_target));
    for (const auto& s : sequences) result.inputs.push_back(srvf_map(embed_sequence(s, result.basis)));
    return 0;
  });

  std::vector<SrvfCurve> aligned = result.inputs;
  std::vector<WarpModel> models(inputs.size(), pretrained_identity(pc.temporal_cfg.seed));
  result.warps.assign(inputs.size(), TimeWarp());
  result.mean_srvf = average(aligned);
  result.objective_trace.push_back(mean_objective(result.mean_srvf, aligned));

  for (int iter = 1; pc.temporal && iter <= cfg.max_iterations; ++iter) {
    std::vector<SrvfCurve> next = aligned;
    std::vector<WarpModel> next_models = models;
    std::vector<TimeWarp> next_warps = result.warps;
    in_stage("temporal", [&] {
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const TemporalRegResult r = register_temporal(result.mean_srvf, result.inputs[i], pc.temporal_cfg, models[i]);
        next_warps[i] = r.warp;
        next_models[i] = r.warp.model();
        next[i] = apply_warp(result.inputs[i], r.warp, pc.temporal_cfg.action);
      }
      return 0;
    });
    const SrvfCurve mean = average(next);
    const double objective = mean_objective(mean, next);
    const double previous = result.objective_trace.back();
    if (!std::isfinite(objective)) throw MeanError("karcher_mean: objective became non-finite", result.objective_trace);
    if (objective > previous) break;
    aligned = std::move(next);
    models = std::move(next_models);
    result.warps = std::move(next_warps);
    result.mean_srvf = mean;
    result.objective_trace.push_back(objective);
    result.iterations = iter;
    if (previous - objective <= cfg.tolerance * previous) break;
  }

  result.mean_sequence = in_stage("curvespace", [&] {
    return reconstruct_sequence(srvf_invert(result.mean_srvf), pc.grid, "mean");
  });
  return result;
}

MeanResult karcher_mean(const std::vector<DsnsModel>& inputs, const MeanConfig& cfg) {
  std::vector<DsnsSurface> surfaces;
  surfaces.reserve(inputs.size());
  for (const DsnsModel& m : inputs) surfaces.emplace_back(m);
  std::vector<const Surface*> ptrs;
  for (const DsnsSurface& s : surfaces) ptrs.push_back(&s);
  return karcher_mean(ptrs, cfg);
}

DsnsModel refit_mean_dsns(const SampledSequence4D& mean_sequence, const FitConfig& cfg) {
  return in_stage("fit", [&] { return fit_dsns(mean_sequence, cfg).model; });
}

}  // namespace e4d
