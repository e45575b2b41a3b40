#include "elastica4d/checkpoint.hpp"
#include "elastica4d/container.hpp"
#include "elastica4d/dsnsfit.hpp"
#include "elastica4d/stats4d.hpp"
#include "elastica4d/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace e4d;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto staged(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string grid_problem(const std::string& text, int& h, int& w) {
  char x = 0, tail = 0;
  if (std::sscanf(text.c_str(), "%d%c%d%c", &h, &x, &w, &tail) != 3 || (x != 'x' && x != 'X')) {
    return "expected HxW, got '" + text + "'";
  }
  if (h < 2 || w < 3) return "need H >= 2 and W >= 3, got '" + text + "'";
  return {};
}

SphereGrid parse_grid(const std::string& text) {
  int h = 0, w = 0;
  const std::string problem = grid_problem(text, h, w);
  if (!problem.empty()) throw UsageError("--grid: " + problem);
  return SphereGrid(h, w);
}

const CLI::Validator kGrid(
    [](std::string& s) {
      int h = 0, w = 0;
      return grid_problem(s, h, w);
    },
    "HxW");

json matrix_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return rows;
}

/// Config snapshot, seeds, stage timings, artifacts and metrics of one command.
class RunManifest {
 public:
  RunManifest(const std::string& command, const CLI::App& sub) {
    doc_["command"] = command;
    json config = json::object();
    for (const CLI::Option* o : sub.get_options()) {
      if (o->get_name() == "--help") continue;
      const std::string key = o->get_name(false, true).substr(o->get_name(false, true).find_first_not_of('-'));
      if (o->count()) {
        const std::vector<std::string>& values = o->results();
        config[key] = values.size() == 1 ? json(values[0]) : json(values);
      } else if (o->get_expected_min() == 0) {
        config[key] = false;
      } else if (o->get_default_str().empty()) {
        config[key] = nullptr;
      } else {
        config[key] = o->get_default_str();
      }
    }
    doc_["config"] = config;
    doc_["seeds"] = json::object();
    doc_["timings"] = json::object();
    doc_["artifacts"] = json::array();
    doc_["metrics"] = json::object();
  }

  json& config() { return doc_["config"]; }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
  void metric(const std::string& name, const json& value) { doc_["metrics"][name] = value; }
  void artifact(const fs::path& path) { doc_["artifacts"].push_back(path.string()); }

  template <typename F>
  auto timed(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto result = staged(stage, std::forward<F>(f));
    doc_["timings"][stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  void write(const fs::path& path) {
    staged("io", [&] {
      std::ofstream out(path);
      out << doc_.dump(2) << '\n';
      if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
      return 0;
    });
  }

 private:
  json doc_;
};

void ensure_dir(const fs::path& dir) {
  staged("io", [&] {
    fs::create_directories(dir);
    return 0;
  });
}

fs::path manifest_beside(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }
fs::path sidecar_for(const fs::path& path) { return fs::path(path).replace_extension(".gt.json"); }

// Fitting options shared by fit, register, geodesic and mean.
struct FitOptions {
  std::string arch = "paper";
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<double> lr_final;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--arch", arch, "Network preset")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--epochs", epochs, "Fit epochs (preset default)")->check(CLI::NonNegativeNumber);
    app->add_option("--batch", batch, "Fit batch size, capped at K*N (preset default)")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Initial learning rate (preset default)")->check(CLI::PositiveNumber);
    app->add_option("--lr-final", lr_final, "Learning rate at the last epoch, 0 keeps it constant")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--seed", seed, "Seed for initialization, batches and warp pretraining");
  }

  FitConfig resolve(const SampledSequence4D& seq) const {
    FitConfig cfg = arch == "desk" ? FitConfig::desk() : FitConfig::paper();
    if (epochs) cfg.epochs = *epochs;
    if (batch) cfg.batch_size = *batch;
    if (lr) cfg.learning_rate = *lr;
    if (lr_final) cfg.final_learning_rate = *lr_final;
    cfg.seed = seed;
    const auto total = static_cast<long long>(seq.grid.size()) * seq.frame_count();
    cfg.batch_size = static_cast<int>(std::min<long long>(cfg.batch_size, total));
    return cfg;
  }
};

json fit_json(const FitConfig& cfg) {
  const DsnsArchitecture& a = cfg.architecture;
  return {{"epochs", cfg.epochs},
          {"batch", cfg.batch_size},
          {"lr", cfg.learning_rate},
          {"lr_final", cfg.final_learning_rate},
          {"blocks", a.blocks},
          {"width", a.width},
          {"spatial_frequencies", a.encoding.spatial_frequencies},
          {"temporal_frequencies", a.encoding.temporal_frequencies}};
}

// Loads a .dsns checkpoint, or fits a .s4d container.
DsnsModel load_model(const fs::path& path, const FitOptions& fit, RunManifest& manifest, const std::string& role) {
  if (path.extension() == ".dsns") {
    return staged("load", [&] { return load_dsns_checkpoint(path).model; });
  }
  const SampledSequence4D seq = staged("load", [&] {
    SampledSequence4D s = read_container(path).sequence;
    s.validate();
    return s;
  });
  const FitConfig cfg = fit.resolve(seq);
  manifest.config()["fit_" + role] = fit_json(cfg);
  FitResult r = manifest.timed("fit_" + role, [&] { return fit_dsns(seq, cfg); });
  manifest.metric("fit_" + role + "_final_loss", r.loss_history.empty() ? 0.0 : r.loss_history.back());
  manifest.metric("fit_" + role + "_mse", fit_loss(r.model, seq));
  return std::move(r.model);
}

// Registration options shared by register, geodesic and mean.
struct RegOptions {
  bool no_spatial = false;
  bool no_temporal = false;
  std::string grid = "32x32";
  int time_samples = 50;
  int spatial_iterations = SpatialRegConfig{}.iterations;
  std::vector<double> spatial_frames{0.0};
  double lambda = TemporalRegConfig{}.lambda;
  int warp_epochs = TemporalRegConfig{}.epochs;
  double warp_lr = TemporalRegConfig{}.learning_rate;
  std::string action = "full";

  void add(CLI::App* app) {
    app->add_flag("--no-spatial", no_spatial, "Skip spatial registration");
    app->add_flag("--no-temporal", no_temporal, "Skip temporal registration");
    app->add_option("--grid", grid, "Sampling grid for the SRVF stage")->check(kGrid);
    app->add_option("--time-samples", time_samples, "Time samples for the SRVF stage")->check(CLI::Range(3, 100000));
    app->add_option("--spatial-iterations", spatial_iterations, "Outer spatial iterations")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--spatial-frames", spatial_frames, "Times in [0, 1] whose frames enter the spatial loss")
        ->check(CLI::Range(0.0, 1.0))
        ->default_str("0");
    app->add_option("--lambda", lambda, "Monotonicity penalty weight")->check(CLI::NonNegativeNumber);
    app->add_option("--warp-epochs", warp_epochs, "Temporal registration epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--warp-lr", warp_lr, "Temporal registration learning rate")->check(CLI::PositiveNumber);
    app->add_option("--action", action, "Warp action on the SRVF")->check(CLI::IsMember({"full", "printed"}));
  }

  PairConfig resolve(std::uint64_t seed) const {
    PairConfig cfg;
    cfg.spatial = !no_spatial;
    cfg.temporal = !no_temporal;
    cfg.grid = parse_grid(grid);
    cfg.time_samples = time_samples;
    cfg.spatial_cfg.iterations = spatial_iterations;
    cfg.spatial_cfg.frames = spatial_frames;
    cfg.temporal_cfg.lambda = lambda;
    cfg.temporal_cfg.epochs = warp_epochs;
    cfg.temporal_cfg.learning_rate = warp_lr;
    cfg.temporal_cfg.action = action == "printed" ? WarpAction::kPrinted : WarpAction::kFull;
    cfg.temporal_cfg.seed = seed;
    return cfg;
  }
};

void write_warp_csv(const TimeWarp& warp, const fs::path& path) {
  const Eigen::VectorXd t = warp_grid(101);
  const Eigen::VectorXd z = warp.evaluate(t), dz = warp.derivative(t);
  std::ofstream out(path);
  out << "t,zeta,dzeta_dt\n";
  char line[96];
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", t(i), z(i), dz(i));
    out << line;
  }
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

double min_warp_slope(const TimeWarp& warp) { return warp.derivative(warp_grid(1001)).minCoeff(); }

double identity_deviation(const TimeWarp& warp) {
  const Eigen::VectorXd g = warp_grid(101);
  return (warp.evaluate(g) - g).cwiseAbs().maxCoeff();
}

std::optional<ClosedFormWarp> sidecar_warp(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  return staged("load", [&] {
    std::ifstream in(path);
    const json gt = json::parse(in);
    const json& w = gt.at("time_warp");
    ClosedFormWarp warp{w.at("a").get<double>(), w.at("c").get<double>(), w.at("power").get<double>()};
    warp.validate();
    return std::optional<ClosedFormWarp>(warp);
  });
}

// synth

struct SynthArgs {
  std::string family = "breathing-ellipsoid";
  std::string grid = "32x32";
  int frames = 30;
  std::uint64_t seed = 0;
  double amplitude = 0.3;
  bool perturb_rotation = false;
  std::optional<double> perturb_diffeo;
  bool perturb_warp = false;
  std::string out;
};

int run_synth(const SynthArgs& a, RunManifest& manifest) {
  SynthSpec spec;
  spec.family = parse_family(a.family);
  spec.amplitude = a.amplitude;
  spec.grid = parse_grid(a.grid);
  spec.times = uniform_times(a.frames);
  spec.seed = a.seed;
  spec.name = fs::path(a.out).stem().string();
  manifest.seed("seed", a.seed);

  const GroundTruthPerturbation drawn = random_perturbation(a.seed);
  GroundTruthPerturbation gt;
  gt.seed = a.seed;
  if (a.perturb_rotation) gt.rotation = drawn.rotation;
  if (a.perturb_diffeo) gt.sphere_diffeo = SquashDiffeo{drawn.sphere_diffeo.rotation, *a.perturb_diffeo};
  if (a.perturb_warp) gt.time_warp = drawn.time_warp;

  const SampledSequence4D seq = manifest.timed("synth", [&] { return perturb(spec, gt); });
  const json provenance{{"generator", "synth"}, {"family", a.family}, {"amplitude", a.amplitude}, {"seed", a.seed}};
  manifest.timed("io", [&] {
    write_container(seq, a.out, provenance);
    const json sidecar{{"family", a.family},
                       {"amplitude", a.amplitude},
                       {"seed", a.seed},
                       {"rotation", matrix_json(gt.rotation)},
                       {"sphere_diffeo", {{"c", gt.sphere_diffeo.c}, {"rotation", matrix_json(gt.sphere_diffeo.rotation)}}},
                       {"time_warp", {{"a", gt.time_warp.a}, {"c", gt.time_warp.c}, {"power", gt.time_warp.power}}}};
    std::ofstream out(sidecar_for(a.out));
    out << sidecar.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write the ground-truth sidecar");
    return 0;
  });
  manifest.artifact(a.out);
  manifest.artifact(sidecar_for(a.out));
  manifest.metric("frames", seq.frame_count());
  manifest.metric("scale", seq.scale);
  manifest.write(manifest_beside(a.out));
  return 0;
}

// fit

int run_fit(const std::string& in, const std::string& out, const FitOptions& fit, RunManifest& manifest) {
  manifest.seed("seed", fit.seed);
  const SampledSequence4D seq = staged("load", [&] {
    SampledSequence4D s = read_container(in).sequence;
    s.validate();
    return s;
  });
  const FitConfig cfg = fit.resolve(seq);
  manifest.config()["resolved"] = fit_json(cfg);
  const FitResult r = manifest.timed("fit", [&] { return fit_dsns(seq, cfg); });
  const double final_loss = r.loss_history.empty() ? fit_loss(r.model, seq) : r.loss_history.back();
  manifest.timed("io", [&] {
    save_checkpoint(r.model, {cfg.epochs, final_loss}, out);
    return 0;
  });
  manifest.artifact(out);
  manifest.metric("final_batch_loss", final_loss);
  manifest.metric("mse", fit_loss(r.model, seq));
  manifest.metric("mean_point_error", mean_point_error(evaluate_sequence(r.model, seq.grid, seq.times), seq));
  manifest.write(manifest_beside(out));
  return 0;
}

// eval

int run_eval(const std::string& model_path, const std::string& grid, int frames, const std::string& out,
             RunManifest& manifest) {
  const DsnsModel model = staged("load", [&] { return load_dsns_checkpoint(model_path).model; });
  SampledSequence4D seq =
      manifest.timed("eval", [&] { return evaluate_sequence(model, parse_grid(grid), uniform_times(frames)); });
  seq.name = fs::path(out).stem().string();
  manifest.timed("io", [&] {
    write_container(seq, out, {{"generator", "eval"}, {"model", model_path}});
    return 0;
  });
  manifest.artifact(out);
  manifest.metric("frames", seq.frame_count());
  manifest.write(manifest_beside(out));
  return 0;
}

// register and geodesic

PairResult register_inputs(const std::string& src, const std::string& tgt, const FitOptions& fit, const RegOptions& reg,
                           RunManifest& manifest) {
  manifest.seed("seed", fit.seed);
  const DsnsModel a = load_model(src, fit, manifest, "src");
  const DsnsModel b = load_model(tgt, fit, manifest, "tgt");
  const PairConfig cfg = reg.resolve(fit.seed);
  PairResult r = manifest.timed("register", [&] { return register_pair(a, b, cfg); });
  manifest.metric("spatial_initial_loss", r.spatial.initial_loss);
  manifest.metric("spatial_final_loss", r.spatial.loss_trace.empty() ? r.spatial.initial_loss : r.spatial.loss_trace.back());
  manifest.metric("spatial_fold_count", r.spatial.fold_count);
  manifest.metric("rotation", matrix_json(r.spatial.rotation));
  manifest.metric("srvf_distance_before", std::sqrt(curve_l2(r.q1, r.q2)));
  manifest.metric("srvf_distance_after", std::sqrt(curve_l2(r.q1, r.q2_registered)));
  if (r.temporal) {
    manifest.metric("temporal_identity_loss", r.temporal->identity_loss.total);
    manifest.metric("temporal_final_loss", r.temporal->final_loss.total);
    manifest.metric("temporal_reg", r.temporal->final_loss.reg);
    manifest.metric("temporal_converged", r.temporal->converged);
  }
  manifest.metric("warp_min_slope", min_warp_slope(r.warp));
  return r;
}

int run_register(const std::string& src, const std::string& tgt, const std::string& gt_path, const std::string& out_dir,
                 const FitOptions& fit, const RegOptions& reg, RunManifest& manifest) {
  ensure_dir(out_dir);
  const PairResult r = register_inputs(src, tgt, fit, reg, manifest);
  const fs::path sidecar = gt_path.empty() ? sidecar_for(tgt) : fs::path(gt_path);
  if (const auto truth = sidecar_warp(sidecar)) {
    manifest.metric("warp_sup_error", recover_inverse_error(TimeWarp::tabulate(*truth), r.warp));
    manifest.artifact(sidecar);
  }
  const fs::path dir(out_dir);
  manifest.timed("io", [&] {
    write_warp_csv(r.warp, dir / "warp.csv");
    std::ofstream losses(dir / "losses.csv");
    losses << "stage,iteration,loss\n";
    losses.precision(17);
    losses << "spatial,0," << r.spatial.initial_loss << '\n';
    for (std::size_t i = 0; i < r.spatial.loss_trace.size(); ++i) {
      losses << "spatial," << i + 1 << ',' << r.spatial.loss_trace[i] << '\n';
    }
    if (r.temporal) {
      for (std::size_t i = 0; i < r.temporal->loss_trace.size(); ++i) {
        losses << "temporal," << i << ',' << r.temporal->loss_trace[i] << '\n';
      }
    }
    if (!losses) throw std::runtime_error("cannot write losses.csv");
    write_container(r.src, dir / "src.s4d", {{"generator", "register"}, {"role", "src"}});
    write_container(r.registered_tgt, dir / "registered.s4d", {{"generator", "register"}, {"role", "tgt"}});
    return 0;
  });
  for (const char* name : {"warp.csv", "losses.csv", "src.s4d", "registered.s4d"}) manifest.artifact(dir / name);
  manifest.write(dir / "manifest.json");
  return 0;
}

int run_geodesic(const std::string& src, const std::string& tgt, int taus, const std::string& out_dir,
                 const FitOptions& fit, const RegOptions& reg, RunManifest& manifest) {
  ensure_dir(out_dir);
  const PairResult r = register_inputs(src, tgt, fit, reg, manifest);
  const GeodesicPath path =
      manifest.timed("geodesic", [&] { return geodesic(r.q1, r.q2_registered, default_taus(taus), r.src.grid); });
  manifest.metric("path_length", path_length(r.q1, r.q2_registered, path.taus));
  manifest.metric("endpoint_error_src", relative_l2_error(path.sequences.front(), r.src));
  manifest.metric("endpoint_error_tgt", relative_l2_error(path.sequences.back(), r.registered_tgt));
  const fs::path dir(out_dir);
  manifest.timed("io", [&] {
    for (std::size_t i = 0; i < path.sequences.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "geodesic_%02zu.s4d", i);
      SampledSequence4D seq = path.sequences[i];
      seq.name = fs::path(name).stem().string();
      write_container(seq, dir / name, {{"generator", "geodesic"}, {"tau", path.taus[i]}});
      manifest.artifact(dir / name);
    }
    write_warp_csv(r.warp, dir / "warp.csv");
    return 0;
  });
  manifest.artifact(dir / "warp.csv");
  manifest.write(dir / "manifest.json");
  return 0;
}

// mean

int run_mean(const std::vector<std::string>& inputs, const std::string& out_dir, int iterations, double tolerance,
             int refit_epochs, const FitOptions& fit, const RegOptions& reg, RunManifest& manifest) {
  if (inputs.size() < 2) throw UsageError("mean: need at least two --in files");
  ensure_dir(out_dir);
  manifest.seed("seed", fit.seed);
  std::vector<DsnsModel> models;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    models.push_back(load_model(inputs[i], fit, manifest, std::to_string(i)));
  }
  MeanConfig cfg;
  cfg.pair = reg.resolve(fit.seed);
  cfg.max_iterations = iterations;
  cfg.tolerance = tolerance;
  const MeanResult m = manifest.timed("mean", [&] { return karcher_mean(models, cfg); });
  manifest.metric("iterations", m.iterations);
  manifest.metric("objective_initial", m.objective_trace.front());
  manifest.metric("objective_final", m.objective_trace.back());
  json deviations = json::array();
  for (const TimeWarp& w : m.warps) deviations.push_back(identity_deviation(w));
  manifest.metric("warp_identity_deviation", deviations);

  const fs::path dir(out_dir);
  manifest.timed("io", [&] {
    write_container(m.mean_sequence, dir / "mean.s4d", {{"generator", "mean"}, {"inputs", inputs}});
    manifest.artifact(dir / "mean.s4d");
    for (std::size_t i = 0; i < m.warps.size(); ++i) {
      const fs::path p = dir / ("warp_" + std::to_string(i) + ".csv");
      write_warp_csv(m.warps[i], p);
      manifest.artifact(p);
    }
    std::ofstream trace(dir / "objective.csv");
    trace << "iteration,objective\n";
    trace.precision(17);
    for (std::size_t k = 0; k < m.objective_trace.size(); ++k) trace << k << ',' << m.objective_trace[k] << '\n';
    if (!trace) throw std::runtime_error("cannot write objective.csv");
    manifest.artifact(dir / "objective.csv");
    return 0;
  });
  if (refit_epochs > 0) {
    FitConfig fc = fit.resolve(m.mean_sequence);
    fc.epochs = refit_epochs;
    manifest.config()["fit_mean"] = fit_json(fc);
    const DsnsModel mean_model = manifest.timed("refit", [&] { return refit_mean_dsns(m.mean_sequence, fc); });
    manifest.timed("io", [&] {
      save_checkpoint(mean_model, {fc.epochs, fit_loss(mean_model, m.mean_sequence)}, dir / "mean.dsns");
      return 0;
    });
    manifest.artifact(dir / "mean.dsns");
  }
  manifest.write(dir / "manifest.json");
  return 0;
}

// export

int run_export(const std::string& in, const std::string& out_dir, RunManifest& manifest) {
  const SampledSequence4D seq = staged("load", [&] { return read_container(in).sequence; });
  const auto paths = manifest.timed("export", [&] { return export_obj(seq, out_dir); });
  for (const auto& p : paths) manifest.artifact(p);
  manifest.metric("files", paths.size());
  manifest.metric("vertices_per_frame", seq.grid.size());
  manifest.metric("faces_per_frame", 2 * seq.grid.cols() * (seq.grid.rows() - 1));
  manifest.write(fs::path(out_dir) / "manifest.json");
  return 0;
}

int configure_threads() {
  const char* env = std::getenv("ELASTICA4D_THREADS");
  if (!env || !*env) return Eigen::nbThreads();
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError("ELASTICA4D_THREADS must be a positive integer, got '" + std::string(env) + "'");
  Eigen::setNbThreads(static_cast<int>(n));
  return static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Continuous 4D surface registration, geodesics and means", "elastica4d");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sequence and its ground-truth sidecar");
  synth_cmd->add_option("--family", synth.family)
      ->check(CLI::IsMember({"breathing-ellipsoid", "bump-articulation", "twist"}));
  synth_cmd->add_option("--grid", synth.grid, "Sampling grid")->check(kGrid);
  synth_cmd->add_option("--frames", synth.frames, "Time samples")->check(CLI::Range(2, 100000));
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--amplitude", synth.amplitude, "Deformation amplitude");
  synth_cmd->add_flag("--perturb-rotation", synth.perturb_rotation, "Apply a seeded random rotation");
  synth_cmd->add_option("--perturb-diffeo", synth.perturb_diffeo, "Apply a squash diffeo with this c")
      ->check(CLI::Range(-0.99, 0.99));
  synth_cmd->add_flag("--perturb-warp", synth.perturb_warp, "Apply a seeded closed-form time warp");
  synth_cmd->add_option("--out", synth.out, "Output container (.s4d)")->required();

  std::string fit_in, fit_out;
  FitOptions fit_opts;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a D-SNS network to a container");
  fit_cmd->add_option("--in", fit_in, "Input container")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit_out, "Output checkpoint (.dsns)")->required();
  fit_opts.add(fit_cmd);

  std::string eval_model, eval_grid = "32x32", eval_out;
  int eval_frames = 30;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Sample a fitted network into a container");
  eval_cmd->add_option("--model", eval_model, "Checkpoint (.dsns)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--grid", eval_grid, "Sampling grid")->check(kGrid);
  eval_cmd->add_option("--frames", eval_frames, "Time samples")->check(CLI::Range(2, 100000));
  eval_cmd->add_option("--out", eval_out, "Output container (.s4d)")->required();

  std::string reg_src, reg_tgt, reg_gt, reg_out;
  FitOptions reg_fit;
  RegOptions reg_opts;
  CLI::App* reg_cmd = app.add_subcommand("register", "Spatiotemporally register a target to a source");
  reg_cmd->add_option("--src", reg_src, "Source (.dsns or .s4d)")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--tgt", reg_tgt, "Target (.dsns or .s4d)")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--gt", reg_gt, "Ground-truth sidecar (default: target with .gt.json)");
  reg_cmd->add_option("--out-dir", reg_out, "Output directory")->required();
  reg_fit.add(reg_cmd);
  reg_opts.add(reg_cmd);

  std::string geo_src, geo_tgt, geo_out;
  int geo_taus = 5;
  FitOptions geo_fit;
  RegOptions geo_opts;
  CLI::App* geo_cmd = app.add_subcommand("geodesic", "Register a pair and sample the geodesic between them");
  geo_cmd->add_option("--src", geo_src, "Source (.dsns or .s4d)")->required()->check(CLI::ExistingFile);
  geo_cmd->add_option("--tgt", geo_tgt, "Target (.dsns or .s4d)")->required()->check(CLI::ExistingFile);
  geo_cmd->add_option("--taus", geo_taus, "Number of equally spaced path points")->check(CLI::Range(2, 1000));
  geo_cmd->add_option("--out-dir", geo_out, "Output directory")->required();
  geo_fit.add(geo_cmd);
  geo_opts.add(geo_cmd);

  std::vector<std::string> mean_in;
  std::string mean_out;
  int mean_iterations = MeanConfig{}.max_iterations, mean_refit = 0;
  double mean_tolerance = MeanConfig{}.tolerance;
  FitOptions mean_fit;
  RegOptions mean_opts;
  CLI::App* mean_cmd = app.add_subcommand("mean", "Karcher mean of several sequences");
  mean_cmd->add_option("--in", mean_in, "Inputs (.dsns or .s4d)")->required()->check(CLI::ExistingFile);
  mean_cmd->add_option("--out-dir", mean_out, "Output directory")->required();
  mean_cmd->add_option("--iterations", mean_iterations, "Maximum outer iterations")->check(CLI::NonNegativeNumber);
  mean_cmd->add_option("--tolerance", mean_tolerance, "Relative objective change that stops the iteration")
      ->check(CLI::NonNegativeNumber);
  mean_cmd->add_option("--refit-epochs", mean_refit, "Fit a D-SNS to the mean with this many epochs (0 skips)")
      ->check(CLI::NonNegativeNumber);
  mean_fit.add(mean_cmd);
  mean_opts.add(mean_cmd);

  std::string export_in, export_out;
  CLI::App* export_cmd = app.add_subcommand("export", "Write one OBJ mesh per frame");
  export_cmd->add_option("--in", export_in, "Input container")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out-dir", export_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const int threads = configure_threads();
    CLI::App* sub = app.get_subcommands().front();
    RunManifest manifest(sub->get_name(), *sub);
    manifest.config()["threads"] = threads;
    if (sub == synth_cmd) return run_synth(synth, manifest);
    if (sub == fit_cmd) return run_fit(fit_in, fit_out, fit_opts, manifest);
    if (sub == eval_cmd) return run_eval(eval_model, eval_grid, eval_frames, eval_out, manifest);
    if (sub == reg_cmd) return run_register(reg_src, reg_tgt, reg_gt, reg_out, reg_fit, reg_opts, manifest);
    if (sub == geo_cmd) return run_geodesic(geo_src, geo_tgt, geo_taus, geo_out, geo_fit, geo_opts, manifest);
    if (sub == mean_cmd) {
      return run_mean(mean_in, mean_out, mean_iterations, mean_tolerance, mean_refit, mean_fit, mean_opts, manifest);
    }
    return run_export(export_in, export_out, manifest);
  } catch (const UsageError& e) {
    std::cerr << "elastica4d: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StageError& e) {
    std::cerr << "elastica4d: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "elastica4d: [internal] " << e.what() << '\n';
    return kExitStage;
  }
}
