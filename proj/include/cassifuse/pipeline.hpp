#ifndef CASSIFUSE_PIPELINE_HPP
#define CASSIFUSE_PIPELINE_HPP

// Experiment configuration and the design -> simulate -> fuse -> classify
// pipeline, both in memory and as resumable on-disk stages.
//
// Configuration keys (JSON; null means "use the derived default"):
//
//   seed                      master seed; every stage seed derives from it
//   scene.kind                "synthetic" | "file"
//   scene.rows/cols/bands/classes/regions/bumps/brightness_spread/band_noise
//                             synthetic scene parameters
//   scene.header/data/labels  cube header, raster and label CSV (kind "file";
//                             relative to the config file)
//   q, p                      spectral and spatial decimation factors
//   hs_filters, K, W          filter count and snapshot counts (null: L/q, P, P/q)
//   noise.kind, noise.snr_db  "none" | "gaussian" | "poisson"; SNR in dB
//   fusion.*                  solver settings (see FusionConfig), plus
//                             fusion.wavelet_levels
//   classifier.hidden/epochs/learning_rate/batch_size/standardize
//   train_rate                per-class training fraction
//   output_dir                artifact directory (relative to the config file)

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cassifuse/aperture.hpp"
#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/evaluation.hpp"
#include "cassifuse/fusion.hpp"
#include "cassifuse/io.hpp"
#include "cassifuse/mlp.hpp"
#include "cassifuse/random.hpp"
#include "cassifuse/sensing.hpp"
#include "cassifuse/solver.hpp"
#include "cassifuse/synthetic.hpp"

namespace cassifuse {

namespace fs = std::filesystem;

struct SceneSpec {
  std::string kind = "synthetic";
  SyntheticSceneConfig synthetic;
  fs::path header, data, labels;
};

struct ClassifierSpec {
  std::vector<std::size_t> hidden = default_hidden_layers();
  std::size_t epochs = 300;
  double learning_rate = 1e-2;
  std::size_t batch_size = 64;
  bool standardize = true;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  SceneSpec scene;
  std::size_t q = 2;
  std::size_t p = 2;
  std::optional<std::size_t> hs_filters, hs_snapshots, ms_snapshots;
  NoiseKind noise_kind = NoiseKind::none;
  double snr_db = kNoiselessSnr;
  FusionConfig fusion;
  std::size_t wavelet_levels = kDefaultWaveletLevels;
  ClassifierSpec classifier;
  double train_rate = 0.1;
  fs::path output_dir = "run";
};

// Stage seeds, all derived from the master seed.
struct StageSeeds {
  std::uint64_t scene, design, noise, power, split, init, train;
};

inline StageSeeds stage_seeds(std::uint64_t seed) {
  return {mix_seed(seed, 101), mix_seed(seed, 102), mix_seed(seed, 103), mix_seed(seed, 104),
          mix_seed(seed, 105), mix_seed(seed, 106), mix_seed(seed, 107)};
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Configuration parsing.

inline Json default_config_json() {
  const PipelineConfig d;
  const auto& s = d.scene.synthetic;
  Json j;
  j["seed"] = d.seed;
  j["scene"] = {{"kind", d.scene.kind},
                {"rows", s.rows},
                {"cols", s.cols},
                {"bands", s.bands},
                {"classes", s.classes},
                {"regions", s.regions},
                {"bumps", s.bumps},
                {"brightness_spread", s.brightness_spread},
                {"band_noise", s.band_noise},
                {"header", nullptr},
                {"data", nullptr},
                {"labels", nullptr}};
  j["q"] = d.q;
  j["p"] = d.p;
  j["hs_filters"] = nullptr;
  j["K"] = nullptr;
  j["W"] = nullptr;
  j["noise"] = {{"kind", "none"}, {"snr_db", nullptr}};
  const auto& f = d.fusion;
  j["fusion"] = {{"lambda1", nullptr},
                 {"lambda1_factor", f.lambda1_factor},
                 {"lambda2", f.lambda2},
                 {"rho", f.rho},
                 {"beta", nullptr},
                 {"max_iters", f.max_iters},
                 {"rel_tol", f.rel_tol},
                 {"alpha_schedule", to_string(f.schedule)},
                 {"alpha0", nullptr},
                 {"power_iterations", f.power_iterations},
                 {"wavelet_levels", d.wavelet_levels}};
  const auto& c = d.classifier;
  j["classifier"] = {{"hidden", c.hidden},
                     {"epochs", c.epochs},
                     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"standardize", c.standardize}};
  j["train_rate"] = d.train_rate;
  j["output_dir"] = d.output_dir.string();
  return j;
}

namespace detail {

// Copies `user` over `base`, rejecting keys the schema does not know.
inline void merge_config(Json& base, const Json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw configuration_error("field '" + (prefix.empty() ? std::string("<root>") : prefix) +
                              "': expected an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw configuration_error("field '" + path + "': unknown key");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_config(slot, value, path);
    } else {
      slot = value;
    }
  }
}

inline const Json& at_path(const Json& j, const std::string& path) {
  const Json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    cur = &cur->at(path.substr(start, dot - start));
    if (dot == std::string::npos) return *cur;
    start = dot + 1;
  }
}

inline std::size_t get_count(const Json& j, const std::string& path, bool allow_zero = false) {
  const auto& v = at_path(j, path);
  if (!v.is_number_integer() || v.get<std::int64_t>() < (allow_zero ? 0 : 1)) {
    throw configuration_error("field '" + path + "': expected " +
                              (allow_zero ? "a non-negative" : "a positive") + " integer, got " +
                              v.dump());
  }
  return v.get<std::size_t>();
}

inline std::optional<std::size_t> get_optional_count(const Json& j, const std::string& path) {
  if (at_path(j, path).is_null()) return std::nullopt;
  return get_count(j, path);
}

inline double get_real(const Json& j, const std::string& path) {
  const auto& v = at_path(j, path);
  if (!v.is_number()) throw configuration_error("field '" + path + "': expected a number, got " + v.dump());
  return v.get<double>();
}

inline std::optional<double> get_optional_real(const Json& j, const std::string& path) {
  if (at_path(j, path).is_null()) return std::nullopt;
  return get_real(j, path);
}

inline std::string get_string(const Json& j, const std::string& path) {
  const auto& v = at_path(j, path);
  if (!v.is_string()) throw configuration_error("field '" + path + "': expected a string, got " + v.dump());
  return v.get<std::string>();
}

inline bool get_bool(const Json& j, const std::string& path) {
  const auto& v = at_path(j, path);
  if (!v.is_boolean()) throw configuration_error("field '" + path + "': expected true/false, got " + v.dump());
  return v.get<bool>();
}

// Re-raises configuration errors from embedded validators under a field name.
template <class F>
void with_field(const std::string& field, F&& f) {
  try {
    f();
  } catch (const configuration_error& e) {
    throw configuration_error("field '" + field + "': " + e.what());
  }
}

}  // namespace detail

// Applies a "dotted.key=value" override; the value is read as JSON when it
// parses, otherwise as a string.
inline void apply_override(Json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw configuration_error("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  Json* cur = &user;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw configuration_error("override key '" + key + "' is malformed");
    if (!cur->is_object()) *cur = Json::object();
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    cur = &(*cur)[part];
    start = dot + 1;
  }
}

// Resolved, fully populated configuration tree.
inline Json resolve_config_json(const Json& user) {
  Json j = default_config_json();
  detail::merge_config(j, user, "");
  return j;
}

inline PipelineConfig config_from_json(const Json& user, const fs::path& base_dir = {}) {
  using namespace detail;
  const Json j = resolve_config_json(user);
  PipelineConfig c;
  const auto& seed = j.at("seed");
  if (!seed.is_number_integer() || seed.get<std::int64_t>() < 0) {
    throw configuration_error("field 'seed': expected a non-negative integer");
  }
  c.seed = seed.get<std::uint64_t>();
  const auto seeds = stage_seeds(c.seed);

  c.scene.kind = get_string(j, "scene.kind");
  auto& s = c.scene.synthetic;
  s.rows = get_count(j, "scene.rows");
  s.cols = get_count(j, "scene.cols");
  s.bands = get_count(j, "scene.bands");
  s.classes = get_count(j, "scene.classes");
  s.regions = get_count(j, "scene.regions");
  s.bumps = get_count(j, "scene.bumps");
  s.brightness_spread = get_real(j, "scene.brightness_spread");
  s.band_noise = get_real(j, "scene.band_noise");
  s.seed = seeds.scene;
  auto path_of = [&](const std::string& field) {
    const auto& v = at_path(j, field);
    if (!v.is_string() || v.get<std::string>().empty()) {
      throw configuration_error("field '" + field + "': a path is required for file scenes");
    }
    const fs::path p = v.get<std::string>();
    return (p.is_absolute() ? p : base_dir / p).lexically_normal();
  };
  if (c.scene.kind == "synthetic") {
    with_field("scene", [&] { s.validate(); });
  } else if (c.scene.kind == "file") {
    c.scene.header = path_of("scene.header");
    c.scene.data = path_of("scene.data");
    c.scene.labels = path_of("scene.labels");
  } else {
    throw configuration_error("field 'scene.kind': expected \"synthetic\" or \"file\", got \"" +
                              c.scene.kind + "\"");
  }

  c.q = get_count(j, "q");
  c.p = get_count(j, "p");
  c.hs_filters = get_optional_count(j, "hs_filters");
  c.hs_snapshots = get_optional_count(j, "K");
  c.ms_snapshots = get_optional_count(j, "W");
  if (c.scene.kind == "synthetic") {
    const std::size_t l = s.bands;
    if (!c.hs_filters && l % c.q != 0) {
      throw configuration_error("field 'q': q=" + std::to_string(c.q) +
                                " does not divide the band count L=" + std::to_string(l));
    }
    const std::size_t pf = c.hs_filters.value_or(l / c.q);
    if (l % pf != 0) {
      throw configuration_error("field 'hs_filters': " + std::to_string(pf) +
                                " does not divide the band count L=" + std::to_string(l));
    }
    if (pf % c.q != 0) {
      throw configuration_error("field 'q': q=" + std::to_string(c.q) +
                                " does not divide the filter count " + std::to_string(pf));
    }
    if (c.hs_snapshots && *c.hs_snapshots > pf) {
      throw configuration_error("field 'K': " + std::to_string(*c.hs_snapshots) +
                                " snapshots exceed the " + std::to_string(pf) + " filters");
    }
    if (c.ms_snapshots && *c.ms_snapshots > pf / c.q) {
      throw configuration_error("field 'W': " + std::to_string(*c.ms_snapshots) +
                                " snapshots exceed the " + std::to_string(pf / c.q) + " filters");
    }
    if (c.p > s.rows || c.p > s.cols) {
      throw configuration_error("field 'p': p=" + std::to_string(c.p) + " exceeds the scene extent");
    }
  }

  with_field("noise.kind", [&] { c.noise_kind = noise_kind_from_string(get_string(j, "noise.kind")); });
  const auto snr = get_optional_real(j, "noise.snr_db");
  if (c.noise_kind != NoiseKind::none) {
    if (!snr) throw configuration_error("field 'noise.snr_db': required for " + to_string(c.noise_kind) + " noise");
    c.snr_db = *snr;
  }

  auto& f = c.fusion;
  f.lambda1 = get_optional_real(j, "fusion.lambda1");
  f.lambda1_factor = get_real(j, "fusion.lambda1_factor");
  f.lambda2 = get_real(j, "fusion.lambda2");
  f.rho = get_real(j, "fusion.rho");
  f.beta = get_optional_real(j, "fusion.beta");
  f.max_iters = get_count(j, "fusion.max_iters");
  f.rel_tol = get_real(j, "fusion.rel_tol");
  with_field("fusion.alpha_schedule",
             [&] { f.schedule = alpha_schedule_from_string(get_string(j, "fusion.alpha_schedule")); });
  f.alpha0 = get_optional_real(j, "fusion.alpha0");
  f.power_iterations = get_count(j, "fusion.power_iterations");
  f.power_seed = seeds.power;
  try {
    f.validate();
  } catch (const configuration_error& e) {
    // Solver messages lead with the offending setting's name.
    const std::string msg = e.what();
    throw configuration_error("field 'fusion." + msg.substr(0, msg.find(' ')) + "': " + msg);
  }
  c.wavelet_levels = get_count(j, "fusion.wavelet_levels", true);

  auto& k = c.classifier;
  const auto& hidden = at_path(j, "classifier.hidden");
  if (!hidden.is_array()) throw configuration_error("field 'classifier.hidden': expected an array");
  k.hidden.clear();
  for (const auto& h : hidden) {
    if (!h.is_number_integer() || h.get<std::int64_t>() < 1) {
      throw configuration_error("field 'classifier.hidden': widths must be positive integers");
    }
    k.hidden.push_back(h.get<std::size_t>());
  }
  k.epochs = get_count(j, "classifier.epochs");
  k.learning_rate = get_real(j, "classifier.learning_rate");
  if (!(k.learning_rate > 0.0)) throw configuration_error("field 'classifier.learning_rate': must be > 0");
  k.batch_size = get_count(j, "classifier.batch_size");
  k.standardize = get_bool(j, "classifier.standardize");

  c.train_rate = get_real(j, "train_rate");
  if (!(c.train_rate > 0.0 && c.train_rate < 1.0)) {
    throw configuration_error("field 'train_rate': must lie in (0, 1)");
  }
  const fs::path out = get_string(j, "output_dir");
  c.output_dir = (out.is_absolute() ? out : base_dir / out).lexically_normal();
  return c;
}

// The resolved configuration as a JSON tree (defaults filled in, paths as
// resolved).
inline Json to_json(const PipelineConfig& c) {
  Json j = default_config_json();
  j["seed"] = c.seed;
  const auto& s = c.scene.synthetic;
  j["scene"]["kind"] = c.scene.kind;
  j["scene"]["rows"] = s.rows;
  j["scene"]["cols"] = s.cols;
  j["scene"]["bands"] = s.bands;
  j["scene"]["classes"] = s.classes;
  j["scene"]["regions"] = s.regions;
  j["scene"]["bumps"] = s.bumps;
  j["scene"]["brightness_spread"] = s.brightness_spread;
  j["scene"]["band_noise"] = s.band_noise;
  if (c.scene.kind == "file") {
    j["scene"]["header"] = c.scene.header.string();
    j["scene"]["data"] = c.scene.data.string();
    j["scene"]["labels"] = c.scene.labels.string();
  }
  j["q"] = c.q;
  j["p"] = c.p;
  if (c.hs_filters) j["hs_filters"] = *c.hs_filters;
  if (c.hs_snapshots) j["K"] = *c.hs_snapshots;
  if (c.ms_snapshots) j["W"] = *c.ms_snapshots;
  j["noise"]["kind"] = to_string(c.noise_kind);
  if (c.noise_kind != NoiseKind::none) j["noise"]["snr_db"] = c.snr_db;
  const auto& f = c.fusion;
  if (f.lambda1) j["fusion"]["lambda1"] = *f.lambda1;
  j["fusion"]["lambda1_factor"] = f.lambda1_factor;
  j["fusion"]["lambda2"] = f.lambda2;
  j["fusion"]["rho"] = f.rho;
  if (f.beta) j["fusion"]["beta"] = *f.beta;
  j["fusion"]["max_iters"] = f.max_iters;
  j["fusion"]["rel_tol"] = f.rel_tol;
  j["fusion"]["alpha_schedule"] = to_string(f.schedule);
  if (f.alpha0) j["fusion"]["alpha0"] = *f.alpha0;
  j["fusion"]["power_iterations"] = f.power_iterations;
  j["fusion"]["wavelet_levels"] = c.wavelet_levels;
  j["classifier"]["hidden"] = c.classifier.hidden;
  j["classifier"]["epochs"] = c.classifier.epochs;
  j["classifier"]["learning_rate"] = c.classifier.learning_rate;
  j["classifier"]["batch_size"] = c.classifier.batch_size;
  j["classifier"]["standardize"] = c.classifier.standardize;
  j["train_rate"] = c.train_rate;
  j["output_dir"] = c.output_dir.string();
  return j;
}

inline Json to_json(const StageSeeds& s) {
  return {{"scene", s.scene}, {"design", s.design}, {"noise", s.noise}, {"power", s.power},
          {"split", s.split}, {"init", s.init},     {"train", s.train}};
}

// Loads a config file and applies overrides. Relative paths inside resolve
// against the file's directory.
inline PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  Json user = Json::object();
  fs::path base;
  if (!path.empty()) {
    if (!fs::exists(path)) throw missing_input_error("config file " + path.string() + " not found");
    try {
      user = Json::parse(detail::read_text(path));
    } catch (const Json::exception& e) {
      throw configuration_error("config " + path.string() + ": " + e.what());
    }
    base = path.parent_path();
  }
  for (const auto& o : overrides) apply_override(user, o);
  return config_from_json(user, base);
}

// ---------------------------------------------------------------------------
// Stages in memory.

struct Scene {
  SpectralCube cube;
  LabelMap labels;
};

inline Scene load_scene(const PipelineConfig& c) {
  if (c.scene.kind == "synthetic") {
    auto s = make_synthetic_scene(c.scene.synthetic);
    return {std::move(s.cube), std::move(s.labels)};
  }
  for (const auto& p : {c.scene.header, c.scene.data, c.scene.labels}) {
    if (!fs::exists(p)) throw missing_input_error("scene input " + p.string() + " not found");
  }
  Scene s{read_cube(c.scene.header, c.scene.data), read_labels(c.scene.labels)};
  if (s.labels.rows() != s.cube.rows() || s.labels.cols() != s.cube.cols()) {
    throw data_error("ground truth is " + std::to_string(s.labels.rows()) + "x" +
                     std::to_string(s.labels.cols()) + " but the cube is " +
                     std::to_string(s.cube.rows()) + "x" + std::to_string(s.cube.cols()));
  }
  return s;
}

inline ApertureDesign design_stage(const PipelineConfig& c, std::size_t rows, std::size_t cols,
                                   std::size_t bands) {
  DesignOptions o;
  o.hs_filters = c.hs_filters;
  o.hs_snapshots = c.hs_snapshots;
  o.ms_snapshots = c.ms_snapshots;
  return design_dual_apertures(rows, cols, bands, c.q, c.p, stage_seeds(c.seed).design, o);
}

inline MeasurementSet simulate_stage(const PipelineConfig& c, const SpectralCube& scene,
                                     const ApertureDesign& d) {
  NoiseDescriptor n;
  n.kind = c.noise_kind;
  n.snr_db = c.noise_kind == NoiseKind::none ? kNoiselessSnr : c.snr_db;
  n.seed = stage_seeds(c.seed).noise;
  return simulate_measurements(scene, d, n);
}

inline FusedFeatures fuse_stage(const PipelineConfig& c, const ApertureDesign& d,
                                const MeasurementSet& y) {
  return fuse_measurements(d, y, c.fusion, c.wavelet_levels);
}

struct ClassificationOutcome {
  TrainTestSplit split;
  MlpNetwork network;
  std::vector<double> loss_trace;
  LabelMap predicted;
  ClassificationMetrics metrics;  // on the test pixels
};

inline ClassificationOutcome classify_stage(const PipelineConfig& c, const SpectralCube& features,
                                            const LabelMap& gt) {
  if (gt.rows() != features.rows() || gt.cols() != features.cols()) {
    throw data_error("ground truth does not match the feature grid");
  }
  const auto seeds = stage_seeds(c.seed);
  ClassificationOutcome o;
  o.split = split_train_test(gt, c.train_rate, seeds.split);
  TrainOptions t;
  t.epochs = c.classifier.epochs;
  t.learning_rate = c.classifier.learning_rate;
  t.batch_size = c.classifier.batch_size;
  t.standardize = c.classifier.standardize;
  t.seed = seeds.train;
  auto net = init_network(features.bands(), c.classifier.hidden, gt.class_count(), seeds.init);
  auto trained = train(std::move(net), o.split, features, t);
  o.network = std::move(trained.network);
  o.loss_trace = std::move(trained.loss_trace);
  o.predicted = predict_map(o.network, features);
  const auto test_gt = label_map_of(o.split.test, gt.rows(), gt.cols(), gt.class_count());
  o.metrics = metrics(o.predicted, test_gt);
  return o;
}

struct ExperimentResult {
  ApertureDesign design;
  MeasurementSet measurements;
  FusedFeatures fused;
  ClassificationOutcome outcome;
};

inline ExperimentResult run_experiment(const PipelineConfig& c, const Scene& scene) {
  ExperimentResult r;
  r.design = design_stage(c, scene.cube.rows(), scene.cube.cols(), scene.cube.bands());
  r.measurements = simulate_stage(c, scene.cube, r.design);
  r.fused = fuse_stage(c, r.design, r.measurements);
  r.outcome = classify_stage(c, r.fused.features, scene.labels);
  return r;
}

inline ExperimentResult run_experiment(const PipelineConfig& c) { return run_experiment(c, load_scene(c)); }

// ---------------------------------------------------------------------------
// Records.

inline Json to_json(const FusionReport& r) {
  Json j;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["final_objective"] = r.final_objective;
  j["lambda1"] = r.lambda1;
  j["lambda2"] = r.lambda2;
  j["rho"] = r.rho;
  j["beta"] = r.beta;
  j["last_relative_change"] = r.last_relative_change;
  j["data_residual"] = r.data_residual;
  j["sparsity_residual"] = r.sparsity_residual;
  j["tv_residual"] = r.tv_residual;
  if (!r.objective_trace.empty()) j["objective_trace"] = r.objective_trace;
  return j;
}

inline Json noise_json(const NoiseDescriptor& n) {
  Json j;
  j["kind"] = to_string(n.kind);
  j["snr_db"] = std::isinf(n.snr_db) ? Json("inf") : Json(n.snr_db);
  j["seed"] = n.seed;
  if (n.kind == NoiseKind::poisson) {
    j["poisson_scale_ms"] = n.poisson_scale_ms;
    j["poisson_scale_hs"] = n.poisson_scale_hs;
  }
  return j;
}

inline NoiseDescriptor noise_from_json(const Json& j) {
  NoiseDescriptor n;
  n.kind = noise_kind_from_string(j.at("kind").get<std::string>());
  n.snr_db = j.at("snr_db").is_string() ? kNoiselessSnr : j.at("snr_db").get<double>();
  n.seed = j.at("seed").get<std::uint64_t>();
  n.poisson_scale_ms = j.value("poisson_scale_ms", 0.0);
  n.poisson_scale_hs = j.value("poisson_scale_hs", 0.0);
  return n;
}

inline Json split_json(const TrainTestSplit& s) {
  return {{"rate", s.rate},
          {"seed", s.seed},
          {"train_per_class", s.train_per_class},
          {"test_per_class", s.test_per_class},
          {"train_total", s.train.size()},
          {"test_total", s.test.size()}};
}

inline Json compression_json(const ApertureDesign& d) {
  const auto rates = compression_rates(build_projections(d));
  const double q = static_cast<double>(d.q), p = static_cast<double>(d.p);
  return {{"eps_ms", 1.0 / q},
          {"eps_hs", 1.0 / (p * p)},
          {"ms_measurements", rates.ms_measurements},
          {"hs_measurements", rates.hs_measurements},
          {"feature_count", rates.feature_count},
          {"ms_rate", rates.ms_rate},
          {"hs_rate", rates.hs_rate}};
}

// ---------------------------------------------------------------------------
// On-disk stages.
//
// Each stage writes its artifacts first and a stamp last. A stamp records the
// stage key: a hash of the configuration slice the stage depends on and the
// keys of its inputs. A stage whose stamp matches is not recomputed, so an
// interrupted pipeline resumes at the first incomplete stage.

class Workspace {
 public:
  explicit Workspace(PipelineConfig config) : c_(std::move(config)), root_(c_.output_dir) {}

  const PipelineConfig& config() const noexcept { return c_; }
  const fs::path& root() const noexcept { return root_; }
  fs::path dir(const std::string& stage) const { return root_ / stage; }
  fs::path manifest_path() const { return root_ / "manifest.json"; }

  std::string config_hash() const {
    return hex64(fnv1a(to_json(c_).dump() + to_json(stage_seeds(c_.seed)).dump()));
  }

  std::string scene_key() const {
    const Json j = to_json(c_);
    Json s = j.at("scene");
    s["seed"] = stage_seeds(c_.seed).scene;
    return hex64(fnv1a("scene" + s.dump()));
  }
  std::string design_key() const {
    const Json j = to_json(c_);
    Json s = {{"q", j["q"]}, {"p", j["p"]}, {"hs_filters", j["hs_filters"]}, {"K", j["K"]},
              {"W", j["W"]}, {"seed", stage_seeds(c_.seed).design}};
    return hex64(fnv1a("design" + scene_key() + s.dump()));
  }
  std::string simulate_key() const {
    Json s = to_json(c_).at("noise");
    s["seed"] = stage_seeds(c_.seed).noise;
    return hex64(fnv1a("simulate" + design_key() + s.dump()));
  }
  std::string fuse_key() const {
    Json s = to_json(c_).at("fusion");
    s["power_seed"] = stage_seeds(c_.seed).power;
    return hex64(fnv1a("fuse" + simulate_key() + s.dump()));
  }
  std::string classify_key() const {
    const Json j = to_json(c_);
    Json s = {{"classifier", j["classifier"]},
              {"train_rate", j["train_rate"]},
              {"split", stage_seeds(c_.seed).split},
              {"init", stage_seeds(c_.seed).init},
              {"train", stage_seeds(c_.seed).train}};
    return hex64(fnv1a("classify" + fuse_key() + s.dump()));
  }

  bool stamped(const std::string& stage, const std::string& key) const {
    const auto p = dir(stage) / "stamp.json";
    if (!fs::exists(p)) return false;
    try {
      return read_json(p).value("key", std::string()) == key;
    } catch (const load_error&) {
      return false;
    }
  }

  void stamp(const std::string& stage, const std::string& key) const {
    write_json({{"stage", stage}, {"key", key}}, dir(stage) / "stamp.json");
  }

  // Fails with a missing-input error unless `stage` is complete for this config.
  void require(const std::string& stage, const std::string& key) const {
    const auto p = dir(stage) / "stamp.json";
    if (!fs::exists(p)) {
      throw missing_input_error(stage + " artifacts not found under " + root_.string() +
                                "; run '" + stage + "' first");
    }
    if (!stamped(stage, key)) {
      throw missing_input_error(stage + " artifacts under " + root_.string() +
                                " were produced by a different configuration; rerun '" + stage + "'");
    }
  }

  Json manifest() const {
    Json m = fs::exists(manifest_path()) ? read_json(manifest_path()) : Json::object();
    m["config"] = to_json(c_);
    m["seeds"] = to_json(stage_seeds(c_.seed));
    m["config_hash"] = config_hash();
    return m;
  }

  void update_manifest(const std::function<void(Json&)>& edit) const {
    Json m = manifest();
    if (m.contains("config_hash") && m.contains("stages") &&
        m["config_hash"] != config_hash()) {
      m["stages"] = Json::object();
    }
    edit(m);
    write_json(m, manifest_path());
  }

 private:
  PipelineConfig c_;
  fs::path root_;
};

struct StageLog {
  std::function<void(const std::string&)> sink = [](const std::string& s) { std::cerr << s << '\n'; };
  void operator()(const std::string& s) const {
    if (sink) sink(s);
  }
};

inline void write_cube_pair(const SpectralCube& c, const fs::path& stem, const Provenance& prov = {}) {
  fs::path h = stem, d = stem;
  h += ".hdr.json";
  d += ".f32";
  write_cube(c, h, d, prov);
}

inline SpectralCube read_cube_pair(const fs::path& stem) {
  fs::path h = stem, d = stem;
  h += ".hdr.json";
  d += ".f32";
  if (!fs::exists(h) || !fs::exists(d)) throw missing_input_error("missing cube " + stem.string());
  return read_cube(h, d);
}

// Scene: synthetic scenes are materialised under scene/; file scenes are read
// in place.
inline Scene stage_scene(const Workspace& ws, const StageLog& log = {}) {
  const auto& c = ws.config();
  if (c.scene.kind == "file") return load_scene(c);
  const auto dir = ws.dir("scene");
  const auto key = ws.scene_key();
  if (ws.stamped("scene", key)) {
    log("scene: reusing " + dir.string());
    return {read_cube_pair(dir / "scene"), read_labels(dir / "labels.csv", c.scene.synthetic.classes)};
  }
  auto s = load_scene(c);
  write_cube_pair(s.cube, dir / "scene", {{"content", "synthetic scene"}, {"seed", std::to_string(c.scene.synthetic.seed)}});
  write_labels(s.labels, dir / "labels.csv");
  ws.stamp("scene", key);
  // Continue from the stored (float32) cube so fresh and resumed runs agree.
  s.cube = read_cube_pair(dir / "scene");
  log("scene: synthetic " + std::to_string(s.cube.rows()) + "x" + std::to_string(s.cube.cols()) +
      "x" + std::to_string(s.cube.bands()) + ", " + std::to_string(s.labels.class_count()) + " classes");
  return s;
}

inline void save_design(const ApertureDesign& d, const fs::path& dir) {
  const Provenance hs{{"arm", "hyperspectral"}, {"seed", std::to_string(mix_seed(d.seed, kHsPatternStream))}};
  const Provenance ms{{"arm", "multispectral"}, {"seed", std::to_string(mix_seed(d.seed, kMsPatternStream))}};
  write_patterns(d.hs_patterns, dir / "hs_patterns.hdr.json", dir / "hs_patterns.f32", hs);
  write_patterns(d.ms_patterns, dir / "ms_patterns.hdr.json", dir / "ms_patterns.f32", ms);
  write_filter_bank(d.hs_bank, dir / "hs_filters.csv");
  write_filter_bank(d.ms_bank, dir / "ms_filters.csv");
  write_json({{"rows", d.rows},
              {"cols", d.cols},
              {"bands", d.hs_bank.bands()},
              {"q", d.q},
              {"p", d.p},
              {"hs_filters", d.hs_bank.count()},
              {"K", d.hs_snapshots()},
              {"W", d.ms_snapshots()},
              {"seed", d.seed}},
             dir / "design.json");
}

inline ApertureDesign load_design(const fs::path& dir) {
  const auto info = read_json(dir / "design.json");
  ApertureDesign d;
  d.hs_patterns = read_patterns(dir / "hs_patterns.hdr.json", dir / "hs_patterns.f32");
  d.ms_patterns = read_patterns(dir / "ms_patterns.hdr.json", dir / "ms_patterns.f32");
  d.hs_bank = read_filter_bank(dir / "hs_filters.csv");
  d.ms_bank = read_filter_bank(dir / "ms_filters.csv");
  d.rows = info.at("rows").get<std::size_t>();
  d.cols = info.at("cols").get<std::size_t>();
  d.q = info.at("q").get<std::size_t>();
  d.p = info.at("p").get<std::size_t>();
  d.seed = info.at("seed").get<std::uint64_t>();
  if (derive_ms_filter_bank(d.hs_bank, d.q).responses().size() != d.ms_bank.responses().size() ||
      !std::equal(d.ms_bank.responses().begin(), d.ms_bank.responses().end(),
                  derive_ms_filter_bank(d.hs_bank, d.q).responses().begin())) {
    throw parse_error("multispectral filters in " + dir.string() + " do not derive from the hyperspectral ones");
  }
  return d;
}

inline ApertureDesign stage_design(const Workspace& ws, const Scene& scene, const StageLog& log = {}) {
  const auto dir = ws.dir("design");
  const auto key = ws.design_key();
  if (ws.stamped("design", key)) {
    log("design: reusing " + dir.string());
    return load_design(dir);
  }
  auto d = design_stage(ws.config(), scene.cube.rows(), scene.cube.cols(), scene.cube.bands());
  save_design(d, dir);
  ws.stamp("design", key);
  ws.update_manifest([&](Json& m) {
    m["aperture"] = {{"L", d.hs_bank.bands()}, {"hs_filters", d.feature_bands()}, {"K", d.hs_snapshots()},
                     {"W", d.ms_snapshots()}, {"q", d.q}, {"p", d.p}, {"seed", d.seed}};
    m["compression"] = compression_json(d);
    m["stages"]["design"] = {{"key", key}, {"dir", dir.string()}};
  });
  log("design: K=" + std::to_string(d.hs_snapshots()) + " W=" + std::to_string(d.ms_snapshots()) +
      " filters=" + std::to_string(d.feature_bands()));
  return d;
}

inline MeasurementSet load_measurements(const fs::path& dir) {
  MeasurementSet y;
  y.y_ms = read_cube_pair(dir / "y_ms");
  y.y_hs = read_cube_pair(dir / "y_hs");
  y.noise = noise_from_json(read_json(dir / "noise.json"));
  return y;
}

inline MeasurementSet stage_simulate(const Workspace& ws, const Scene& scene, const ApertureDesign& d,
                                     const StageLog& log = {}) {
  const auto dir = ws.dir("measurements");
  const auto key = ws.simulate_key();
  if (ws.stamped("measurements", key)) {
    log("simulate: reusing " + dir.string());
    return load_measurements(dir);
  }
  auto y = simulate_stage(ws.config(), scene.cube, d);
  write_cube_pair(y.y_ms, dir / "y_ms", {{"arm", "multispectral"}});
  write_cube_pair(y.y_hs, dir / "y_hs", {{"arm", "hyperspectral"}});
  write_json(noise_json(y.noise), dir / "noise.json");
  ws.stamp("measurements", key);
  y.y_ms = read_cube_pair(dir / "y_ms");
  y.y_hs = read_cube_pair(dir / "y_hs");
  ws.update_manifest([&](Json& m) {
    m["noise"] = noise_json(y.noise);
    m["compression"] = compression_json(d);
    m["stages"]["simulate"] = {{"key", key}, {"dir", dir.string()}};
  });
  log("simulate: " + std::to_string(y.y_ms.size()) + " multispectral + " +
      std::to_string(y.y_hs.size()) + " hyperspectral measurements, noise " + to_string(y.noise.kind));
  return y;
}

inline FusedFeatures stage_fuse(const Workspace& ws, const ApertureDesign& d, const MeasurementSet& y,
                                const StageLog& log = {}) {
  const auto dir = ws.dir("fusion");
  const auto key = ws.fuse_key();
  if (ws.stamped("fusion", key)) {
    log("fuse: reusing " + dir.string());
    FusedFeatures f;
    f.features = read_cube_pair(dir / "features");
    const auto r = read_json(dir / "report.json");
    f.report.iterations = r.at("iterations").get<std::size_t>();
    f.report.converged = r.at("converged").get<bool>();
    f.report.final_objective = r.at("final_objective").get<double>();
    f.report.lambda1 = r.at("lambda1").get<double>();
    f.report.lambda2 = r.at("lambda2").get<double>();
    f.report.rho = r.at("rho").get<double>();
    f.report.beta = r.at("beta").get<double>();
    f.report.last_relative_change = r.at("last_relative_change").get<double>();
    f.wavelet_levels = r.at("wavelet_levels").get<std::size_t>();
    return f;
  }
  auto f = fuse_stage(ws.config(), d, y);
  std::ostringstream msg;
  msg << std::setprecision(6) << "fuse: lambda1=" << f.report.lambda1
      << (ws.config().fusion.lambda1 ? "" : " (lambda1_factor * ||H^T y||_inf)")
      << " lambda2=" << f.report.lambda2 << " beta=" << f.report.beta << " iterations="
      << f.report.iterations << (f.report.converged ? " (converged)" : " (max_iters reached)")
      << " rel_change=" << f.report.last_relative_change;
  write_cube_pair(f.features, dir / "features", {{"content", "fused features"}});
  Json rep = to_json(f.report);
  rep["wavelet_levels"] = f.wavelet_levels;
  write_json(rep, dir / "report.json");
  ws.stamp("fusion", key);
  f.features = read_cube_pair(dir / "features");
  ws.update_manifest([&](Json& m) {
    m["fusion"] = rep;
    m["stages"]["fuse"] = {{"key", key}, {"dir", dir.string()}};
  });
  log(msg.str());
  return f;
}

inline ClassificationOutcome stage_classify(const Workspace& ws, const SpectralCube& features,
                                            const LabelMap& gt, const StageLog& log = {}) {
  const auto dir = ws.dir("classify");
  const auto key = ws.classify_key();
  auto o = classify_stage(ws.config(), features, gt);
  if (!ws.stamped("classify", key)) {
    write_labels(o.predicted, dir / "predicted_labels.csv");
    write_network(o.network, dir / "network.bin");
    write_json(split_json(o.split), dir / "split.json");
    write_json(to_json(o.metrics), dir / "metrics.json");
    ws.stamp("classify", key);
  }
  ws.update_manifest([&](Json& m) {
    m["split"] = split_json(o.split);
    m["metrics"] = {{"overall_accuracy", o.metrics.overall_accuracy},
                    {"average_accuracy", o.metrics.average_accuracy},
                    {"kappa", o.metrics.kappa}};
    m["stages"]["classify"] = {{"key", key}, {"dir", dir.string()}};
  });
  std::ostringstream msg;
  msg << std::fixed << std::setprecision(4) << "classify: OA=" << o.metrics.overall_accuracy
      << " AA=" << o.metrics.average_accuracy << " kappa=" << o.metrics.kappa << " (train per class:";
  for (auto n : o.split.train_per_class) msg << ' ' << n;
  msg << ')';
  log(msg.str());
  return o;
}

// Ground truth for the classify stage.
inline LabelMap stage_ground_truth(const Workspace& ws) {
  const auto& c = ws.config();
  if (c.scene.kind == "file") {
    if (!fs::exists(c.scene.labels)) throw missing_input_error("labels " + c.scene.labels.string() + " not found");
    return read_labels(c.scene.labels);
  }
  ws.require("scene", ws.scene_key());
  return read_labels(ws.dir("scene") / "labels.csv", c.scene.synthetic.classes);
}

// Individual subcommands: each consumes the artifacts of the previous stage.
inline ApertureDesign cmd_design(const Workspace& ws, const StageLog& log = {}) {
  const auto scene = stage_scene(ws, log);
  return stage_design(ws, scene, log);
}

inline MeasurementSet cmd_simulate(const Workspace& ws, const StageLog& log = {}) {
  ws.require("design", ws.design_key());
  const auto scene = stage_scene(ws, log);
  return stage_simulate(ws, scene, load_design(ws.dir("design")), log);
}

inline FusedFeatures cmd_fuse(const Workspace& ws, const StageLog& log = {}) {
  ws.require("design", ws.design_key());
  ws.require("measurements", ws.simulate_key());
  return stage_fuse(ws, load_design(ws.dir("design")), load_measurements(ws.dir("measurements")), log);
}

inline ClassificationOutcome cmd_classify(const Workspace& ws, const StageLog& log = {}) {
  ws.require("fusion", ws.fuse_key());
  const auto gt = stage_ground_truth(ws);
  return stage_classify(ws, read_cube_pair(ws.dir("fusion") / "features"), gt, log);
}

inline ClassificationOutcome cmd_pipeline(const Workspace& ws, const StageLog& log = {}) {
  const auto scene = stage_scene(ws, log);
  const auto d = stage_design(ws, scene, log);
  const auto y = stage_simulate(ws, scene, d, log);
  const auto f = stage_fuse(ws, d, y, log);
  return stage_classify(ws, f.features, scene.labels, log);
}

// Exit-code contract of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingInput = 3,
  kExitDivergence = 4,
  kExitData = 5,
};

// Runs `f`, mapping exceptions onto exit codes with a diagnostic on `err`.
template <class F>
int run_guarded(F&& f, std::ostream& err = std::cerr) {
  try {
    f();
    return kExitOk;
  } catch (const configuration_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dimension_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const missing_input_error& e) {
    err << "missing input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const load_error& e) {
    err << "unreadable input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const divergence_error& e) {
    err << "numerical divergence at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitDivergence;
  } catch (const data_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace cassifuse

#endif  // CASSIFUSE_PIPELINE_HPP
