// Experiment harness: seeded benchmark runs over (method, noise, seed)
// cells, parameter sweeps with per-iteration traces, and the 2x2 motivating
// geometry dumps. All outputs are deterministic given the configuration;
// every CSV embeds the resolved configuration as a JSON header comment.
#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sparsegn/config.hpp"
#include "sparsegn/metrics.hpp"
#include "sparsegn/solvers.hpp"
#include "sparsegn/synth.hpp"

namespace sparsegn {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Formatting and CSV output

/// 17 significant digits: doubles round-trip exactly through the reports.
inline std::string fmt17(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

/// Short form for labels and column names.
inline std::string fmt_label(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const nlohmann::json& provenance,
            const std::vector<std::string>& columns) {
    out_.open(path, std::ios::binary);  // LF line endings on every platform
    if (!out_) {
      throw std::runtime_error("CsvWriter: cannot open " + path);
    }
    out_ << "# config " << provenance.dump() << "\n";
    write(columns);
  }

  void row(const std::vector<std::string>& cells) { write(cells); }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Parallel cells

/// Worker cap from SPARSE_GN_THREADS, falling back to the hardware count.
inline int thread_cap() {
  if (const char* env = std::getenv("SPARSE_GN_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  const unsigned hardware = std::thread::hardware_concurrency();
  return hardware == 0 ? 1 : static_cast<int>(hardware);
}

/// Runs fn(0..count-1) over a bounded worker pool. fn must not throw; cells
/// record their own failures.
template <typename Fn>
void parallel_for_cells(int count, Fn&& fn) {
  const int workers = std::min(thread_cap(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&next, count, &fn] {
      while (true) {
        const int index = next.fetch_add(1);
        if (index >= count) break;
        fn(index);
      }
    });
  }
  for (auto& thread : pool) thread.join();
}

// ---------------------------------------------------------------------------
// Experiment configuration

/// Per-method solver setup. Box limits are stored as broadcast scalars here
/// because the parameter count is only known once the scene exists.
struct MethodSetup {
  SolverConfig solver;
  std::optional<double> box_min;
  std::optional<double> box_max;
};

inline SolverConfig default_solver_config(Method method) {
  SolverConfig config;
  config.method = method;
  if (method == Method::PrunedCd) {
    config.cd.step_size = StepSize::fixed(0.01);  // benchmark protocol step
  }
  return config;
}

struct ExperimentConfig {
  SceneSpec scene;
  std::optional<std::string> scene_path;
  std::vector<double> noise_levels{0.0, 0.005, 0.01};
  std::vector<Method> methods{Method::Dogleg, Method::DoglegL2, Method::BfgsSoftL1,
                              Method::PrunedCd};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_directory = ".";
  std::vector<std::string> report_formats{"csv", "json"};
  bool plot_data = false;
  std::map<Method, MethodSetup> method_setups;

  MethodSetup setup_for(Method method) const {
    auto found = method_setups.find(method);
    if (found != method_setups.end()) return found->second;
    return MethodSetup{default_solver_config(method), std::nullopt, std::nullopt};
  }

  bool wants_format(const std::string& format) const {
    for (const auto& f : report_formats) {
      if (f == format) return true;
    }
    return false;
  }

  static ExperimentConfig from_config(const ConfigDoc& doc);
  nlohmann::json resolved_json() const;
};

namespace detail {

inline StepSize parse_step_size(const ConfigValue& value, const std::string& key) {
  if (value.is_string()) {
    const auto& text = std::get<std::string>(value.data);
    if (text == "greedy") return StepSize::greedy();
    throw std::invalid_argument("config: key '" + key + "' must be \"greedy\" or a number");
  }
  if (value.is_number()) return StepSize::fixed(std::get<double>(value.data));
  throw std::invalid_argument("config: key '" + key + "' must be \"greedy\" or a number");
}

inline SelectionStep parse_selection_step(const ConfigValue& value, const std::string& key) {
  if (value.is_string()) {
    const auto& text = std::get<std::string>(value.data);
    if (text == "same_as_taken") return SelectionStep::same_as_taken();
    throw std::invalid_argument("config: key '" + key +
                                "' must be \"same_as_taken\" or a number");
  }
  if (value.is_number()) return SelectionStep::fixed(std::get<double>(value.data));
  throw std::invalid_argument("config: key '" + key + "' must be \"same_as_taken\" or a number");
}

inline ColumnRule parse_rule(const std::string& name) {
  if (name == "ours") return ColumnRule::Ours;
  if (name == "gs" || name == "gauss_southwell") return ColumnRule::GaussSouthwell;
  if (name == "mbi") return ColumnRule::Mbi;
  throw std::invalid_argument("unknown column rule: " + name);
}

inline const char* to_string(ColumnRule rule) {
  switch (rule) {
    case ColumnRule::Ours: return "ours";
    case ColumnRule::GaussSouthwell: return "gs";
    case ColumnRule::Mbi: return "mbi";
  }
  return "unknown";
}

inline const std::vector<std::string>& solver_override_keys() {
  static const std::vector<std::string> keys = {
      "max_outer_iterations",      "prune_threshold",
      "l2_lambda",                 "soft_l1_lambda",
      "dogleg_initial_radius",     "cd.rule",
      "cd.step_size",              "cd.selection_step_size",
      "cd.max_unique_coordinates", "cd.min_rel_decrease",
      "cd.max_inner_iterations",   "cd.trust_radius",
      "cd.parameter_min",          "cd.parameter_max",
  };
  return keys;
}

inline void apply_solver_overrides(const ConfigDoc& doc, const std::string& prefix,
                                   MethodSetup& setup) {
  SolverConfig& solver = setup.solver;
  auto key = [&prefix](const char* name) { return prefix + name; };
  if (doc.has(key("max_outer_iterations"))) {
    solver.max_outer_iterations = doc.get_int(key("max_outer_iterations"), 0);
  }
  if (doc.has(key("prune_threshold"))) {
    solver.prune_threshold = doc.get_double(key("prune_threshold"), 0.0);
  }
  if (doc.has(key("l2_lambda"))) solver.l2_lambda = doc.get_double(key("l2_lambda"), 0.0);
  if (doc.has(key("soft_l1_lambda"))) {
    solver.soft_l1_lambda = doc.get_double(key("soft_l1_lambda"), 0.0);
  }
  if (doc.has(key("dogleg_initial_radius"))) {
    solver.dogleg_initial_radius = doc.get_double(key("dogleg_initial_radius"), 0.0);
  }
  if (doc.has(key("cd.rule"))) solver.cd.rule = parse_rule(doc.get_string(key("cd.rule"), ""));
  if (doc.has(key("cd.step_size"))) {
    solver.cd.step_size = parse_step_size(doc.at(key("cd.step_size")), key("cd.step_size"));
  }
  if (doc.has(key("cd.selection_step_size"))) {
    solver.cd.selection_step_size =
        parse_selection_step(doc.at(key("cd.selection_step_size")), key("cd.selection_step_size"));
  }
  if (doc.has(key("cd.max_unique_coordinates"))) {
    solver.cd.max_unique_coordinates = doc.get_int(key("cd.max_unique_coordinates"), 0);
  }
  if (doc.has(key("cd.min_rel_decrease"))) {
    solver.cd.min_rel_decrease = doc.get_double(key("cd.min_rel_decrease"), 0.0);
  }
  if (doc.has(key("cd.max_inner_iterations"))) {
    solver.cd.max_inner_iterations = doc.get_int(key("cd.max_inner_iterations"), 0);
  }
  if (doc.has(key("cd.trust_radius"))) {
    solver.cd.trust_radius = doc.get_double(key("cd.trust_radius"), 0.0);
  }
  if (doc.has(key("cd.parameter_min"))) {
    setup.box_min = doc.get_double(key("cd.parameter_min"), 0.0);
  }
  if (doc.has(key("cd.parameter_max"))) {
    setup.box_max = doc.get_double(key("cd.parameter_max"), 0.0);
  }
}

/// SolverConfig with broadcast box limits materialized for a known K.
inline SolverConfig materialize(const MethodSetup& setup, Eigen::Index parameter_count) {
  SolverConfig solver = setup.solver;
  if (setup.box_min) solver.cd.parameter_min = Vector::Constant(parameter_count, *setup.box_min);
  if (setup.box_max) solver.cd.parameter_max = Vector::Constant(parameter_count, *setup.box_max);
  return solver;
}

inline nlohmann::json step_size_json(const StepSize& step) {
  if (step.kind == StepSize::Kind::Greedy) return "greedy";
  return step.tau;
}

inline nlohmann::json selection_step_json(const SelectionStep& step) {
  if (step.kind == SelectionStep::Kind::SameAsTaken) return "same_as_taken";
  return step.tau;
}

inline nlohmann::json solver_json(const MethodSetup& setup) {
  const SolverConfig& solver = setup.solver;
  nlohmann::json doc;
  doc["max_outer_iterations"] = solver.max_outer_iterations;
  doc["prune_threshold"] = solver.prune_threshold;
  doc["l2_lambda"] = solver.l2_lambda;
  doc["soft_l1_lambda"] = solver.soft_l1_lambda;
  doc["dogleg_initial_radius"] = solver.dogleg_initial_radius;
  doc["cd"] = {{"rule", to_string(solver.cd.rule)},
               {"step_size", step_size_json(solver.cd.step_size)},
               {"selection_step_size", selection_step_json(solver.cd.selection_step_size)},
               {"max_unique_coordinates", solver.cd.max_unique_coordinates},
               {"min_rel_decrease", solver.cd.min_rel_decrease},
               {"max_inner_iterations", solver.cd.max_inner_iterations}};
  if (solver.cd.trust_radius) doc["cd"]["trust_radius"] = *solver.cd.trust_radius;
  if (setup.box_min) doc["cd"]["parameter_min"] = *setup.box_min;
  if (setup.box_max) doc["cd"]["parameter_max"] = *setup.box_max;
  return doc;
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_config(const ConfigDoc& doc) {
  ExperimentConfig config;

  std::set<std::string> known = {
      "scene.parameter_count", "scene.curve_count",   "scene.samples_per_curve",
      "scene.near_duplicate_fraction", "scene.true_weight_count", "scene.noise_amplitude",
      "scene.seed",            "scene.path",          "noise_levels",
      "methods",               "seeds",               "output_directory",
      "report_formats",        "plot_data",
  };
  std::vector<std::string> prefixes = {"", "pruned_cd.", "dogleg.", "dogleg_l2.",
                                       "bfgs_soft_l1."};
  for (const auto& prefix : prefixes) {
    for (const auto& key : detail::solver_override_keys()) {
      known.insert(prefix + key);
    }
  }
  for (const auto& key : doc.keys()) {
    if (known.count(key) == 0) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  config.scene.parameter_count = doc.get_int("scene.parameter_count", config.scene.parameter_count);
  config.scene.curve_count = doc.get_int("scene.curve_count", config.scene.curve_count);
  config.scene.samples_per_curve =
      doc.get_int("scene.samples_per_curve", config.scene.samples_per_curve);
  config.scene.near_duplicate_fraction = doc.get_double("scene.near_duplicate_fraction",
                                                        config.scene.near_duplicate_fraction);
  config.scene.true_weight_count =
      doc.get_int("scene.true_weight_count", config.scene.true_weight_count);
  config.scene.noise_amplitude =
      doc.get_double("scene.noise_amplitude", config.scene.noise_amplitude);
  config.scene.seed = static_cast<std::uint64_t>(doc.get_double("scene.seed",
                                                                static_cast<double>(config.scene.seed)));
  if (doc.has("scene.path")) config.scene_path = doc.get_string("scene.path", "");

  config.noise_levels = doc.get_double_list("noise_levels", config.noise_levels);
  if (config.noise_levels.empty()) {
    throw std::invalid_argument("config: noise_levels must not be empty");
  }
  if (doc.has("methods")) {
    config.methods.clear();
    for (const auto& name : doc.get_string_list("methods", {})) {
      config.methods.push_back(parse_method(name));
    }
  }
  if (config.methods.empty()) {
    throw std::invalid_argument("config: methods must not be empty");
  }
  if (doc.has("seeds")) {
    config.seeds.clear();
    for (double seed : doc.get_double_list("seeds", {})) {
      config.seeds.push_back(static_cast<std::uint64_t>(seed));
    }
  }
  if (config.seeds.empty()) {
    throw std::invalid_argument("config: seeds must not be empty");
  }
  config.output_directory = doc.get_string("output_directory", config.output_directory);
  config.report_formats = doc.get_string_list("report_formats", config.report_formats);
  config.plot_data = doc.get_bool("plot_data", config.plot_data);

  for (Method method : {Method::PrunedCd, Method::Dogleg, Method::DoglegL2, Method::BfgsSoftL1}) {
    MethodSetup setup{default_solver_config(method), std::nullopt, std::nullopt};
    detail::apply_solver_overrides(doc, "", setup);  // unprefixed keys apply to every method
    detail::apply_solver_overrides(doc, std::string(to_string(method)) + ".", setup);
    config.method_setups[method] = setup;
  }
  return config;
}

inline nlohmann::json ExperimentConfig::resolved_json() const {
  nlohmann::json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["scene"] = {{"parameter_count", scene.parameter_count},
                  {"curve_count", scene.curve_count},
                  {"samples_per_curve", scene.samples_per_curve},
                  {"near_duplicate_fraction", scene.near_duplicate_fraction},
                  {"true_weight_count", scene.true_weight_count},
                  {"noise_amplitude", scene.noise_amplitude},
                  {"seed", scene.seed}};
  if (scene_path) doc["scene"]["path"] = *scene_path;
  doc["noise_levels"] = noise_levels;
  nlohmann::json methods_json = nlohmann::json::array();
  for (Method method : methods) methods_json.push_back(to_string(method));
  doc["methods"] = methods_json;
  doc["seeds"] = seeds;
  doc["output_directory"] = output_directory;
  doc["report_formats"] = report_formats;
  doc["plot_data"] = plot_data;
  nlohmann::json solvers_json = nlohmann::json::object();
  for (Method method : methods) {
    solvers_json[to_string(method)] = detail::solver_json(setup_for(method));
  }
  doc["solvers"] = solvers_json;
  return doc;
}

// ---------------------------------------------------------------------------
// Table experiment (error/sparsity benchmark over method x noise x seed)

struct ReportRow {
  Method method = Method::PrunedCd;
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  WeightReport report;
  double final_residual = 0.0;
  int outer_iterations = 0;
  int unique_coordinates = 0;
  double wall_ms = 0.0;
  bool ok = true;
  std::string error;
  Vector weights;  // final weight vector, kept for plot data
};

struct TableResult {
  std::vector<ReportRow> rows;
  std::vector<std::string> files;
};

namespace detail {

/// Count of coordinates that changed at least once across the trace.
inline int count_touched_coordinates(const SolveTrace& trace) {
  if (trace.iterations.size() < 2) return 0;
  const Eigen::Index n = trace.iterations.front().x.size();
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 1; k < trace.iterations.size(); ++k) {
    const Vector& prev = trace.iterations[k - 1].x;
    const Vector& curr = trace.iterations[k].x;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (prev(i) != curr(i)) touched[static_cast<std::size_t>(i)] = 1;
    }
  }
  int count = 0;
  for (char t : touched) count += t;
  return count;
}

inline std::uint64_t noise_seed(std::uint64_t seed, double level) {
  return mix_seed(seed, std::bit_cast<std::uint64_t>(level));
}

inline std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

inline std::vector<BlendshapeScene> load_scenes(const ExperimentConfig& config) {
  std::vector<BlendshapeScene> scenes;
  scenes.reserve(config.seeds.size());
  if (config.scene_path) {
    const BlendshapeScene shared = load_scene(*config.scene_path);
    for (std::size_t i = 0; i < config.seeds.size(); ++i) scenes.push_back(shared);
  } else {
    for (std::uint64_t seed : config.seeds) {
      SceneSpec spec = config.scene;
      spec.seed = seed;
      scenes.push_back(generate_scene(spec));
    }
  }
  return scenes;
}

}  // namespace detail

inline ReportRow run_cell(const BlendshapeScene& scene, Method method, double noise_level,
                          std::uint64_t seed, const MethodSetup& setup) {
  ReportRow row;
  row.method = method;
  row.noise_level = noise_level;
  row.seed = seed;
  try {
    const auto target = target_curve_points(scene);
    const auto noisy = add_uniform_noise(target, noise_level, detail::noise_seed(seed, noise_level));
    const Problem problem = make_curve_problem(scene, noisy);
    SolverConfig solver = detail::materialize(setup, scene.parameter_count());
    solver.method = method;
    const SolveTrace trace = solve(problem, solver);
    row.report = weight_report(trace.final_x, scene.true_weights);
    row.final_residual = trace.iterations.back().residual_norm;
    row.outer_iterations = static_cast<int>(trace.iterations.size()) - 1;
    row.unique_coordinates = detail::count_touched_coordinates(trace);
    row.wall_ms = trace.wall_ms;
    row.weights = trace.final_x;
  } catch (const std::exception& error) {
    row.ok = false;
    row.error = error.what();
  }
  return row;
}

inline const std::vector<std::string>& report_row_columns() {
  static const std::vector<std::string> columns = {
      "method",       "noise",          "seed",
      "l2_error",     "l1_error",       "emd_error",
      "l0_zeros",     "gini",           "significant_count",
      "final_residual", "outer_iterations", "unique_coordinates",
      "status",       "wall_time_ms",
  };
  return columns;
}

inline std::vector<std::string> report_row_cells(const ReportRow& row) {
  return {to_string(row.method),
          fmt17(row.noise_level),
          std::to_string(row.seed),
          fmt17(row.report.l2_error),
          fmt17(row.report.l1_error),
          fmt17(row.report.emd_error),
          std::to_string(row.report.l0_zeros),
          fmt17(row.report.gini),
          std::to_string(row.report.significant_count),
          fmt17(row.final_residual),
          std::to_string(row.outer_iterations),
          std::to_string(row.unique_coordinates),
          row.ok ? "ok" : detail::sanitize(row.error),
          fmt17(row.wall_ms)};
}

/// Seed mean of `get(row)` over the ok rows of one (method, noise) cell.
template <typename Getter>
double seed_mean(const std::vector<ReportRow>& rows, Method method, double noise, Getter get) {
  double sum = 0.0;
  int count = 0;
  for (const ReportRow& row : rows) {
    if (row.method == method && row.noise_level == noise && row.ok) {
      sum += get(row);
      ++count;
    }
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / count;
}

inline TableResult run_table_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_directory);
  const nlohmann::json provenance = config.resolved_json();

  const std::vector<BlendshapeScene> scenes = detail::load_scenes(config);

  struct Cell {
    std::size_t method_index;
    std::size_t noise_index;
    std::size_t seed_index;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    for (std::size_t n = 0; n < config.noise_levels.size(); ++n) {
      for (std::size_t s = 0; s < config.seeds.size(); ++s) {
        cells.push_back(Cell{m, n, s});
      }
    }
  }

  TableResult result;
  result.rows.resize(cells.size());
  parallel_for_cells(static_cast<int>(cells.size()), [&](int index) {
    const Cell& cell = cells[static_cast<std::size_t>(index)];
    const Method method = config.methods[cell.method_index];
    result.rows[static_cast<std::size_t>(index)] =
        run_cell(scenes[cell.seed_index], method, config.noise_levels[cell.noise_index],
                 config.seeds[cell.seed_index], config.setup_for(method));
  });

  const fs::path out(config.output_directory);
  if (config.wants_format("csv")) {
    CsvWriter rows_csv((out / "rows.csv").string(), provenance, report_row_columns());
    for (const ReportRow& row : result.rows) {
      rows_csv.row(report_row_cells(row));
    }
    result.files.push_back((out / "rows.csv").string());

    // Aggregate tables: seed means, one row per method, one column block per
    // metric x noise level.
    std::vector<std::string> table1_columns = {"method"};
    std::vector<std::string> table2_columns = {"method"};
    for (const char* metric : {"l2", "l1", "emd"}) {
      for (double noise : config.noise_levels) {
        table1_columns.push_back(std::string(metric) + "_" + fmt_label(noise));
      }
    }
    for (const char* metric : {"l0", "gini"}) {
      for (double noise : config.noise_levels) {
        table2_columns.push_back(std::string(metric) + "_" + fmt_label(noise));
      }
    }
    CsvWriter table1((out / "table1.csv").string(), provenance, table1_columns);
    CsvWriter table2((out / "table2.csv").string(), provenance, table2_columns);
    for (Method method : config.methods) {
      std::vector<std::string> cells1 = {to_string(method)};
      std::vector<std::string> cells2 = {to_string(method)};
      for (double noise : config.noise_levels) {
        cells1.push_back(fmt17(
            seed_mean(result.rows, method, noise, [](const ReportRow& r) { return r.report.l2_error; })));
      }
      for (double noise : config.noise_levels) {
        cells1.push_back(fmt17(
            seed_mean(result.rows, method, noise, [](const ReportRow& r) { return r.report.l1_error; })));
      }
      for (double noise : config.noise_levels) {
        cells1.push_back(fmt17(
            seed_mean(result.rows, method, noise, [](const ReportRow& r) { return r.report.emd_error; })));
      }
      for (double noise : config.noise_levels) {
        cells2.push_back(fmt17(seed_mean(result.rows, method, noise, [](const ReportRow& r) {
          return static_cast<double>(r.report.l0_zeros);
        })));
      }
      for (double noise : config.noise_levels) {
        cells2.push_back(fmt17(
            seed_mean(result.rows, method, noise, [](const ReportRow& r) { return r.report.gini; })));
      }
      table1.row(cells1);
      table2.row(cells2);
    }
    result.files.push_back((out / "table1.csv").string());
    result.files.push_back((out / "table2.csv").string());

    if (config.plot_data) {
      CsvWriter errors((out / "plot_errors.csv").string(), provenance,
                       {"method", "noise", "seed", "l2_error"});
      CsvWriter weights((out / "plot_weights.csv").string(), provenance,
                        {"method", "noise", "seed", "index", "weight"});
      for (const ReportRow& row : result.rows) {
        if (!row.ok) continue;
        errors.row({to_string(row.method), fmt17(row.noise_level), std::to_string(row.seed),
                    fmt17(row.report.l2_error)});
        for (Eigen::Index i = 0; i < row.weights.size(); ++i) {
          weights.row({to_string(row.method), fmt17(row.noise_level), std::to_string(row.seed),
                       std::to_string(i), fmt17(row.weights(i))});
        }
      }
      result.files.push_back((out / "plot_errors.csv").string());
      result.files.push_back((out / "plot_weights.csv").string());
    }
  }
  if (config.wants_format("json")) {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const ReportRow& row : result.rows) {
      rows_json.push_back({{"method", to_string(row.method)},
                           {"noise", row.noise_level},
                           {"seed", row.seed},
                           {"l2_error", row.report.l2_error},
                           {"l1_error", row.report.l1_error},
                           {"emd_error", row.report.emd_error},
                           {"l0_zeros", row.report.l0_zeros},
                           {"gini", row.report.gini},
                           {"significant_count", row.report.significant_count},
                           {"final_residual", row.final_residual},
                           {"outer_iterations", row.outer_iterations},
                           {"unique_coordinates", row.unique_coordinates},
                           {"status", row.ok ? "ok" : row.error},
                           {"wall_time_ms", row.wall_ms}});
    }
    nlohmann::json report = {{"schema_version", kReportSchemaVersion},
                             {"config", provenance},
                             {"rows", rows_json}};
    std::ofstream json_out((out / "rows.json").string(), std::ios::binary);
    json_out << report.dump(2) << '\n';
    result.files.push_back((out / "rows.json").string());
  }
  {
    std::ofstream config_out((out / "config.json").string(), std::ios::binary);
    config_out << provenance.dump(2) << '\n';
    result.files.push_back((out / "config.json").string());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SweepKind { StepSize, SelectionStep, PruneThreshold, ColumnRule };

inline const char* to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::StepSize: return "step_size";
    case SweepKind::SelectionStep: return "selection_step";
    case SweepKind::PruneThreshold: return "prune_threshold";
    case SweepKind::ColumnRule: return "column_rule";
  }
  return "unknown";
}

inline SweepKind parse_sweep_kind(const std::string& name) {
  if (name == "step-size" || name == "step_size") return SweepKind::StepSize;
  if (name == "selection-step" || name == "selection_step") return SweepKind::SelectionStep;
  if (name == "prune-threshold" || name == "prune_threshold") return SweepKind::PruneThreshold;
  if (name == "column-rule" || name == "column_rule") return SweepKind::ColumnRule;
  throw std::invalid_argument("unknown sweep kind: " + name);
}

struct SweepSetting {
  std::string label;
  SolverConfig solver;
};

/// The fixed sweep grids. All sweeps run the pruned-CD solver with no
/// residual-stall threshold so the effect under study is isolated; pruning
/// is disabled except in the prune-threshold sweep itself.
inline std::vector<SweepSetting> sweep_settings(SweepKind kind, const ExperimentConfig& config) {
  SolverConfig base = config.setup_for(Method::PrunedCd).solver;
  base.method = Method::PrunedCd;
  base.cd.min_rel_decrease = 0.0;
  base.cd.max_unique_coordinates = 10;
  base.prune_threshold = 0.0;

  std::vector<SweepSetting> settings;
  switch (kind) {
    case SweepKind::StepSize: {
      SolverConfig greedy = base;
      greedy.cd.step_size = StepSize::greedy();
      settings.push_back({"greedy", greedy});
      for (double tau : {0.01, 0.02, 0.1, 0.5, 1.0}) {
        SolverConfig solver = base;
        solver.cd.step_size = StepSize::fixed(tau);
        settings.push_back({fmt_label(tau), solver});
      }
      break;
    }
    case SweepKind::SelectionStep: {
      // Taken step fixed at 0.01; the selection step varies. The
      // Gauss-Southwell rule with the same taken step is the reference.
      SolverConfig gs = base;
      gs.cd.rule = ColumnRule::GaussSouthwell;
      gs.cd.step_size = StepSize::fixed(0.01);
      settings.push_back({"gs", gs});
      for (double tau : {0.01, 0.02, 0.1, 0.5, 1.0}) {
        SolverConfig solver = base;
        solver.cd.rule = ColumnRule::Ours;
        solver.cd.step_size = StepSize::fixed(0.01);
        solver.cd.selection_step_size = SelectionStep::fixed(tau);
        settings.push_back({fmt_label(tau), solver});
      }
      break;
    }
    case SweepKind::PruneThreshold: {
      for (double threshold : {0.0, 0.2, 0.3, 0.5}) {
        SolverConfig solver = base;
        solver.prune_threshold = threshold;
        solver.cd.step_size = StepSize::fixed(0.01);
        solver.cd.max_unique_coordinates = 50;
        settings.push_back({fmt_label(threshold), solver});
      }
      break;
    }
    case SweepKind::ColumnRule: {
      for (ColumnRule rule : {ColumnRule::Mbi, ColumnRule::GaussSouthwell, ColumnRule::Ours}) {
        SolverConfig solver = base;
        solver.cd.rule = rule;
        solver.cd.step_size = StepSize::fixed(0.01);
        settings.push_back({detail::to_string(rule), solver});
      }
      break;
    }
  }
  return settings;
}

struct SweepCellResult {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<double> residual_trace;  // residual norm before every outer iteration
  Vector weights;
  bool ok = true;
  std::string error;
};

struct SweepResult {
  std::vector<SweepCellResult> cells;
  std::vector<std::string> files;
};

inline SweepResult run_sweep(SweepKind kind, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_directory);
  nlohmann::json provenance = config.resolved_json();
  provenance["sweep"] = to_string(kind);

  const std::vector<BlendshapeScene> scenes = detail::load_scenes(config);
  const std::vector<SweepSetting> settings = sweep_settings(kind, config);

  struct Cell {
    std::size_t setting_index;
    std::size_t seed_index;
  };
  std::vector<Cell> cells;
  for (std::size_t g = 0; g < settings.size(); ++g) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      cells.push_back(Cell{g, s});
    }
  }

  SweepResult result;
  result.cells.resize(cells.size());
  parallel_for_cells(static_cast<int>(cells.size()), [&](int index) {
    const Cell& cell = cells[static_cast<std::size_t>(index)];
    const BlendshapeScene& scene = scenes[cell.seed_index];
    const std::uint64_t seed = config.seeds[cell.seed_index];
    SweepCellResult& out = result.cells[static_cast<std::size_t>(index)];
    out.label = settings[cell.setting_index].label;
    out.seed = seed;
    try {
      const auto target = target_curve_points(scene);
      const auto noisy = add_uniform_noise(target, scene.noise_amplitude,
                                           detail::noise_seed(seed, scene.noise_amplitude));
      const Problem problem = make_curve_problem(scene, noisy);
      const SolveTrace trace = solve_pruned_cd(problem, settings[cell.setting_index].solver);
      for (const OuterRecord& record : trace.iterations) {
        out.residual_trace.push_back(record.residual_norm);
      }
      out.weights = trace.final_x;
    } catch (const std::exception& error) {
      out.ok = false;
      out.error = error.what();
    }
  });

  const fs::path out(config.output_directory);
  const std::string prefix = to_string(kind);
  CsvWriter traces((out / (prefix + "_traces.csv")).string(), provenance,
                   {"setting", "seed", "outer_iteration", "residual_norm"});
  CsvWriter weights((out / (prefix + "_weights.csv")).string(), provenance,
                    {"setting", "seed", "index", "weight"});
  bool any_failure = false;
  for (const SweepCellResult& cell : result.cells) {
    if (!cell.ok) {
      any_failure = true;
      continue;
    }
    for (std::size_t k = 0; k < cell.residual_trace.size(); ++k) {
      traces.row({cell.label, std::to_string(cell.seed), std::to_string(k),
                  fmt17(cell.residual_trace[k])});
    }
    for (Eigen::Index i = 0; i < cell.weights.size(); ++i) {
      weights.row({cell.label, std::to_string(cell.seed), std::to_string(i),
                   fmt17(cell.weights(i))});
    }
  }
  result.files.push_back((out / (prefix + "_traces.csv")).string());
  result.files.push_back((out / (prefix + "_weights.csv")).string());
  if (any_failure) {
    CsvWriter failures((out / (prefix + "_failures.csv")).string(), provenance,
                       {"setting", "seed", "error"});
    for (const SweepCellResult& cell : result.cells) {
      if (!cell.ok) {
        failures.row({cell.label, std::to_string(cell.seed), detail::sanitize(cell.error)});
      }
    }
    result.files.push_back((out / (prefix + "_failures.csv")).string());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Motivating 2x2 geometry dumps

struct MotivatingOptions {
  std::string output_directory = ".";
  std::vector<std::string> solutions;  // empty selects every panel
};

struct MotivatingSolution {
  std::string name;
  Eigen::Vector2d x;
};

struct MotivatingReport {
  MotivatingSystem system;
  std::vector<MotivatingSolution> solutions;
  std::vector<InnerStep> mbi_trace;
  std::vector<Eigen::Vector2d> mbi_iterates;
  std::vector<std::string> files;
};

namespace detail {

/// (A^T A + diag(penalties)) x = A^T b.
inline Eigen::Vector2d ridge_solution(const Eigen::Matrix2d& a, const Eigen::Vector2d& b,
                                      const Eigen::Vector2d& penalties) {
  const Eigen::Matrix2d normal =
      a.transpose() * a + Eigen::Matrix2d(penalties.asDiagonal());
  return normal.ldlt().solve(a.transpose() * b);
}

}  // namespace detail

inline MotivatingReport run_motivating(MotivatingCase which, const MotivatingOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(options.output_directory);

  MotivatingReport report;
  report.system = motivating_system(which);
  const Eigen::Matrix2d& a = report.system.matrix;
  const Eigen::Vector2d& b = report.system.rhs;

  auto wanted = [&options](const std::string& name) {
    if (options.solutions.empty()) return true;
    for (const auto& s : options.solutions) {
      if (s == name) return true;
    }
    return false;
  };

  if (wanted("exact")) {
    report.solutions.push_back({"exact", a.colPivHouseholderQr().solve(b)});
  }
  if (wanted("ridge_0.2")) {
    report.solutions.push_back(
        {"ridge_0.2", detail::ridge_solution(a, b, Eigen::Vector2d(0.2, 0.2))});
  }
  if (wanted("ridge_1")) {
    report.solutions.push_back(
        {"ridge_1", detail::ridge_solution(a, b, Eigen::Vector2d(1.0, 1.0))});
  }
  if (wanted("per_column_0_1")) {
    report.solutions.push_back(
        {"per_column_0_1", detail::ridge_solution(a, b, Eigen::Vector2d(0.0, 1.0))});
  }
  if (wanted("single_column")) {
    const double x1 = a.col(0).dot(b) / a.col(0).squaredNorm();
    report.solutions.push_back({"single_column", Eigen::Vector2d(x1, 0.0)});
  }
  if (wanted("pruned_cd")) {
    SolverConfig solver;
    solver.method = Method::PrunedCd;
    const SolveTrace trace = solve_pruned_cd(report.system.problem(), solver);
    report.solutions.push_back({"pruned_cd", trace.final_x});
  }
  if (wanted("mbi")) {
    const Problem problem = report.system.problem();
    const LinearSubproblem sub = linearize(problem, Vector::Zero(2));
    CdConfig cd;
    cd.rule = ColumnRule::Mbi;
    cd.step_size = StepSize::greedy();
    cd.min_rel_decrease = 0.0;
    cd.max_inner_iterations = 3;
    cd.max_unique_coordinates = 2;
    const CdResult inner = cd_solve(sub, {0, 1}, cd);
    report.mbi_trace = inner.inner_trace;
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    for (const InnerStep& step : inner.inner_trace) {
      x(step.column) += step.sign * step.alpha;
      report.mbi_iterates.push_back(x);
    }
    report.solutions.push_back({"mbi", x});
  }

  nlohmann::json provenance = {{"schema_version", kReportSchemaVersion},
                               {"case", to_string(which)},
                               {"matrix", {{a(0, 0), a(0, 1)}, {a(1, 0), a(1, 1)}}},
                               {"rhs", {b(0), b(1)}}};
  const fs::path out(options.output_directory);
  const std::string base = std::string("motivating_") + to_string(which);
  {
    CsvWriter csv((out / (base + "_solutions.csv")).string(), provenance,
                  {"solution", "x1", "x2", "a1x1_x", "a1x1_y", "a2x2_x", "a2x2_y",
                   "residual_norm"});
    for (const MotivatingSolution& solution : report.solutions) {
      const Eigen::Vector2d a1x1 = a.col(0) * solution.x(0);
      const Eigen::Vector2d a2x2 = a.col(1) * solution.x(1);
      const double residual = (a * solution.x - b).norm();
      csv.row({solution.name, fmt17(solution.x(0)), fmt17(solution.x(1)), fmt17(a1x1(0)),
               fmt17(a1x1(1)), fmt17(a2x2(0)), fmt17(a2x2(1)), fmt17(residual)});
    }
    report.files.push_back((out / (base + "_solutions.csv")).string());
  }
  if (!report.mbi_trace.empty()) {
    CsvWriter csv((out / (base + "_mbi_trace.csv")).string(), provenance,
                  {"iteration", "column", "alpha", "sign", "x1", "x2", "residual_norm"});
    for (std::size_t k = 0; k < report.mbi_trace.size(); ++k) {
      const InnerStep& step = report.mbi_trace[k];
      const Eigen::Vector2d& x = report.mbi_iterates[k];
      csv.row({std::to_string(k), std::to_string(step.column), fmt17(step.alpha),
               std::to_string(step.sign), fmt17(x(0)), fmt17(x(1)), fmt17(step.residual_norm)});
    }
    report.files.push_back((out / (base + "_mbi_trace.csv")).string());
  }
  {
    nlohmann::json doc = provenance;
    nlohmann::json solutions_json = nlohmann::json::object();
    for (const MotivatingSolution& solution : report.solutions) {
      solutions_json[solution.name] = {solution.x(0), solution.x(1)};
    }
    doc["solutions"] = solutions_json;
    std::ofstream json_out((out / (base + ".json")).string(), std::ios::binary);
    json_out << doc.dump(2) << '\n';
    report.files.push_back((out / (base + ".json")).string());
  }
  return report;
}

}  // namespace sparsegn
