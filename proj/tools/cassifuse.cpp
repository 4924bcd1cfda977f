// cassifuse: command-line front end for the dual-arm fusion/classification
// pipeline. See README.md for the configuration schema.

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cassifuse/cassifuse.hpp"

namespace {

using namespace cassifuse;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool quiet = false;

  PipelineConfig load() const {
    auto sets = overrides;
    if (!output_dir.empty()) {
      sets.push_back("output_dir=" + Json(std::filesystem::absolute(output_dir).string()).dump());
    }
    return load_config(config, sets);
  }

  StageLog log() const {
    StageLog l;
    if (quiet) l.sink = nullptr;
    return l;
  }
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "JSON configuration file");
  cmd->add_option("-s,--set", o.overrides, "override a key, e.g. --set fusion.lambda2=0");
  cmd->add_option("-o,--output-dir", o.output_dir, "artifact directory (overrides output_dir)");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress lines");
}

void print_metrics(const ClassificationMetrics& m) {
  std::cout << to_json(m).dump(2) << '\n';
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-resolution compressive spectral imaging: fusion and classification"};
  app.require_subcommand(1);

  CommonOptions design_o, simulate_o, fuse_o, classify_o, pipeline_o, synth_o, sweep_o;
  auto* design = app.add_subcommand("design", "design coded-aperture patterns for both arms");
  add_common(design, design_o);
  auto* simulate = app.add_subcommand("simulate", "simulate both arms' measurements");
  add_common(simulate, simulate_o);
  auto* fuse_cmd = app.add_subcommand("fuse", "estimate fused features from the measurements");
  add_common(fuse_cmd, fuse_o);
  auto* classify = app.add_subcommand("classify", "train the classifier and evaluate it");
  add_common(classify, classify_o);
  auto* pipeline = app.add_subcommand("pipeline", "run every stage, resuming completed ones");
  add_common(pipeline, pipeline_o);

  auto* synth = app.add_subcommand("synth", "write the synthetic scene as a cube + label CSV");
  add_common(synth, synth_o);
  std::string synth_stem = "scene";
  synth->add_option("--stem", synth_stem, "output stem: <stem>.hdr.json, <stem>.f32, <stem>_labels.csv");

  auto* sweep = app.add_subcommand("sweep", "OA table over values of one key and several seeds");
  add_common(sweep, sweep_o);
  std::string sweep_key, sweep_values, sweep_table = "sweep.csv";
  std::size_t sweep_seeds = 5;
  sweep->add_option("--key", sweep_key, "dotted config key to vary")->required();
  sweep->add_option("--values", sweep_values, "comma-separated JSON values")->required();
  sweep->add_option("--seeds", sweep_seeds, "seeds 1..n per value")->check(CLI::PositiveNumber);
  sweep->add_option("--table", sweep_table, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (design->parsed()) {
    return run_guarded([&] {
      const Workspace ws(design_o.load());
      cmd_design(ws, design_o.log());
    });
  }
  if (simulate->parsed()) {
    return run_guarded([&] {
      const Workspace ws(simulate_o.load());
      cmd_simulate(ws, simulate_o.log());
    });
  }
  if (fuse_cmd->parsed()) {
    return run_guarded([&] {
      const Workspace ws(fuse_o.load());
      cmd_fuse(ws, fuse_o.log());
    });
  }
  if (classify->parsed()) {
    return run_guarded([&] {
      const Workspace ws(classify_o.load());
      print_metrics(cmd_classify(ws, classify_o.log()).metrics);
    });
  }
  if (pipeline->parsed()) {
    return run_guarded([&] {
      const Workspace ws(pipeline_o.load());
      print_metrics(cmd_pipeline(ws, pipeline_o.log()).metrics);
    });
  }
  if (synth->parsed()) {
    return run_guarded([&] {
      const auto c = synth_o.load();
      if (c.scene.kind != "synthetic") throw configuration_error("field 'scene.kind': synth needs a synthetic scene");
      const auto s = make_synthetic_scene(c.scene.synthetic);
      write_cube(s.cube, synth_stem + ".hdr.json", synth_stem + ".f32",
                 {{"content", "synthetic scene"}, {"seed", std::to_string(c.scene.synthetic.seed)}});
      write_labels(s.labels, synth_stem + "_labels.csv");
    });
  }
  if (sweep->parsed()) {
    return run_guarded([&] {
      std::ostringstream csv;
      csv << "key,value,seed,overall_accuracy,average_accuracy,kappa,fusion_iterations\n";
      csv << std::setprecision(10);
      for (const auto& value : split_list(sweep_values)) {
        double sum = 0.0;
        for (std::size_t seed = 1; seed <= sweep_seeds; ++seed) {
          auto sets = sweep_o.overrides;
          sets.push_back(sweep_key + "=" + value);
          sets.push_back("seed=" + std::to_string(seed));
          const auto c = load_config(sweep_o.config, sets);
          const auto r = run_experiment(c);
          const auto& m = r.outcome.metrics;
          csv << sweep_key << ',' << value << ',' << seed << ',' << m.overall_accuracy << ','
              << m.average_accuracy << ',' << m.kappa << ',' << r.fused.report.iterations << '\n';
          sum += m.overall_accuracy;
        }
        if (!sweep_o.quiet) {
          std::cerr << "sweep: " << sweep_key << '=' << value << " mean OA "
                    << sum / static_cast<double>(sweep_seeds) << '\n';
        }
      }
      detail::write_atomic(sweep_table, csv.str());
    });
  }
  return kExitFailure;
}
