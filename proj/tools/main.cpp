// sparsegn command-line harness: seeded benchmark tables, parameter sweeps,
// the 2x2 motivating geometry dumps, and scene generation/inspection.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsegn/sparsegn.hpp"

namespace {

sparsegn::ExperimentConfig build_experiment_config(const std::string& config_path,
                                                   const std::string& out_dir,
                                                   const std::vector<std::uint64_t>& seeds,
                                                   const std::vector<std::string>& methods,
                                                   bool plot_data) {
  sparsegn::ExperimentConfig config;
  if (!config_path.empty()) {
    config = sparsegn::ExperimentConfig::from_config(sparsegn::ConfigDoc::load(config_path));
  }
  if (!out_dir.empty()) config.output_directory = out_dir;
  if (!seeds.empty()) config.seeds = seeds;
  if (!methods.empty()) {
    config.methods.clear();
    for (const auto& name : methods) config.methods.push_back(sparsegn::parse_method(name));
  }
  if (plot_data) config.plot_data = true;
  return config;
}

void print_files(const std::vector<std::string>& files) {
  for (const auto& file : files) std::cout << "wrote " << file << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pruned coordinate-descent Gauss-Newton benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  bool plot_data = false;

  // motivating
  auto* motivating = app.add_subcommand("motivating", "Solve the 2x2 motivating systems");
  std::string case_name = "b01";
  motivating->add_option("--case", case_name, "System case: b01 or b51")->required();
  motivating->add_option("--out", out_dir, "Output directory");
  motivating->add_option("--methods", methods, "Subset of solution panels to emit")
      ->delimiter(',');

  // table
  auto* table = app.add_subcommand("table", "Run the error/sparsity benchmark table");
  table->add_option("--config", config_path, "Experiment config file");
  table->add_option("--out", out_dir, "Output directory");
  table->add_option("--seed", seeds, "Seed(s), overriding the config")->delimiter(',');
  table->add_option("--methods", methods, "Methods, overriding the config")->delimiter(',');
  table->add_flag("--plot-data", plot_data, "Also emit per-figure long-format CSVs");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind,
                    "One of: step-size, selection-step, prune-threshold, column-rule")
      ->required();
  sweep->add_option("--config", config_path, "Experiment config file");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--seed", seeds, "Seed(s), overriding the config")->delimiter(',');
  sweep->add_flag("--plot-data", plot_data,
                  "Accepted for symmetry; sweep traces are already long-format");

  // scene gen / show
  auto* scene = app.add_subcommand("scene", "Generate or inspect scene files");
  scene->require_subcommand(1);
  auto* scene_gen = scene->add_subcommand("gen", "Generate a scene JSON file");
  std::string scene_out = "scene.json";
  sparsegn::SceneSpec spec;
  std::uint64_t scene_seed = spec.seed;
  scene_gen->add_option("--out", scene_out, "Scene file path");
  scene_gen->add_option("--seed", scene_seed, "Scene seed");
  scene_gen->add_option("--parameters", spec.parameter_count, "Number of blendshape columns");
  scene_gen->add_option("--curves", spec.curve_count, "Number of curves");
  scene_gen->add_option("--samples", spec.samples_per_curve, "Samples per curve");
  scene_gen->add_option("--dup-fraction", spec.near_duplicate_fraction,
                        "Fraction of near-duplicate columns");
  scene_gen->add_option("--noise", spec.noise_amplitude, "Noise amplitude stored in the scene");
  auto* scene_show = scene->add_subcommand("show", "Print a scene summary");
  std::string scene_path;
  scene_show->add_option("path", scene_path, "Scene file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*motivating) {
      sparsegn::MotivatingOptions options;
      if (!out_dir.empty()) options.output_directory = out_dir;
      options.solutions = methods;
      const auto report =
          sparsegn::run_motivating(sparsegn::parse_motivating_case(case_name), options);
      for (const auto& solution : report.solutions) {
        std::cout << solution.name << ": x = (" << sparsegn::fmt17(solution.x(0)) << ", "
                  << sparsegn::fmt17(solution.x(1)) << ")\n";
      }
      print_files(report.files);
    } else if (*table) {
      const auto config = build_experiment_config(config_path, out_dir, seeds, methods, plot_data);
      const auto result = sparsegn::run_table_experiment(config);
      int failures = 0;
      for (const auto& row : result.rows) {
        if (!row.ok) ++failures;
      }
      std::cout << result.rows.size() << " rows (" << failures << " solver failures)\n";
      print_files(result.files);
    } else if (*sweep) {
      const auto config = build_experiment_config(config_path, out_dir, seeds, {}, plot_data);
      const auto kind = sparsegn::parse_sweep_kind(sweep_kind);
      const auto result = sparsegn::run_sweep(kind, config);
      int failures = 0;
      for (const auto& cell : result.cells) {
        if (!cell.ok) ++failures;
      }
      std::cout << result.cells.size() << " cells (" << failures << " solver failures)\n";
      print_files(result.files);
    } else if (*scene_gen) {
      spec.seed = scene_seed;
      const auto generated = sparsegn::generate_scene(spec);
      sparsegn::save_scene(generated, scene_out);
      std::cout << "wrote " << scene_out << "\n";
    } else if (*scene_show) {
      const auto loaded = sparsegn::load_scene(scene_path);
      std::cout << "scene_version: " << sparsegn::kSceneVersion << "\n"
                << "seed: " << loaded.seed << "\n"
                << "points: " << loaded.point_count() << "\n"
                << "parameters: " << loaded.parameter_count() << "\n"
                << "curves: " << loaded.curves.size() << " x " << loaded.samples_per_curve
                << " samples\n"
                << "noise_amplitude: " << sparsegn::fmt17(loaded.noise_amplitude) << "\n"
                << "camera: f=" << loaded.camera.focal_length << " c=(" << loaded.camera.cx
                << ", " << loaded.camera.cy << ") z=" << loaded.camera.z_distance << "\n";
      std::cout << "true weights:";
      for (Eigen::Index i = 0; i < loaded.true_weights.size(); ++i) {
        if (loaded.true_weights(i) != 0.0) {
          std::cout << " [" << i << "]=" << sparsegn::fmt17(loaded.true_weights(i));
        }
      }
      std::cout << "\n";
    }
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
