#include "sparsegn/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using sparsegn::ConfigDoc;
using sparsegn::ExperimentConfig;
using sparsegn::Method;
using sparsegn::MotivatingCase;
using sparsegn::StepSize;
using sparsegn::Vector;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sparsegn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in) << "missing file " << path;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Strips the final (wall-time) column from every data line so timing noise
// does not affect comparisons.
std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      const std::size_t comma = line.rfind(',');
      if (comma != std::string::npos) line = line.substr(0, comma);
    }
    out << line << '\n';
  }
  return out.str();
}

TEST(ConfigDoc, ParsesScalarsListsAndComments) {
  const auto doc = ConfigDoc::parse(R"(
# benchmark setup
scene.parameter_count = 32
cd.step_size = "greedy"
noise_levels = [0, 0.005, 0.01]
methods = ["dogleg", "pruned_cd"]
plot_data = true
label = plain_word
)");
  EXPECT_EQ(doc.get_int("scene.parameter_count", 0), 32);
  EXPECT_EQ(doc.get_string("cd.step_size", ""), "greedy");
  EXPECT_EQ(doc.get_double_list("noise_levels", {}),
            (std::vector<double>{0.0, 0.005, 0.01}));
  EXPECT_EQ(doc.get_string_list("methods", {}),
            (std::vector<std::string>{"dogleg", "pruned_cd"}));
  EXPECT_TRUE(doc.get_bool("plot_data", false));
  EXPECT_EQ(doc.get_string("label", ""), "plain_word");
  EXPECT_EQ(doc.get_int("missing", 7), 7);
}

TEST(ConfigDoc, RejectsMalformedInput) {
  EXPECT_THROW(ConfigDoc::parse("just some words\n"), std::invalid_argument);
  EXPECT_THROW(ConfigDoc::parse("list = [1, 2\n"), std::invalid_argument);
  EXPECT_THROW(ConfigDoc::parse("mixed = [1, \"two\"]\n"), std::invalid_argument);
  const auto doc = ConfigDoc::parse("x = 1.5\n");
  EXPECT_THROW(doc.get_string("x", ""), std::invalid_argument);
  EXPECT_THROW(doc.get_int("x", 0), std::invalid_argument);
}

TEST(ExperimentConfig, DefaultsMatchTheBenchmarkProtocol) {
  const ExperimentConfig config;
  EXPECT_EQ(config.noise_levels, (std::vector<double>{0.0, 0.005, 0.01}));
  EXPECT_EQ(config.methods.size(), 4u);
  EXPECT_EQ(config.seeds.size(), 5u);
  const auto pruned = config.setup_for(Method::PrunedCd).solver;
  EXPECT_EQ(pruned.max_outer_iterations, 10);
  EXPECT_DOUBLE_EQ(pruned.prune_threshold, 0.3);
  EXPECT_EQ(pruned.cd.step_size.kind, StepSize::Kind::Fixed);
  EXPECT_DOUBLE_EQ(pruned.cd.step_size.tau, 0.01);
  EXPECT_EQ(pruned.cd.max_unique_coordinates, 10);
  const auto ridge = config.setup_for(Method::DoglegL2).solver;
  EXPECT_DOUBLE_EQ(ridge.l2_lambda, 3600.0);
  const auto bfgs = config.setup_for(Method::BfgsSoftL1).solver;
  EXPECT_DOUBLE_EQ(bfgs.soft_l1_lambda, 3600.0);
}

TEST(ExperimentConfig, AppliesDottedOverrides) {
  const auto doc = ConfigDoc::parse(R"(
scene.parameter_count = 24
seeds = [3, 4]
methods = ["pruned_cd", "dogleg"]
cd.step_size = 0.02
pruned_cd.prune_threshold = 0.5
pruned_cd.cd.max_unique_coordinates = 7
dogleg.dogleg_initial_radius = 50
max_outer_iterations = 6
)");
  const auto config = ExperimentConfig::from_config(doc);
  EXPECT_EQ(config.scene.parameter_count, 24);
  EXPECT_EQ(config.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(config.methods, (std::vector<Method>{Method::PrunedCd, Method::Dogleg}));

  const auto pruned = config.setup_for(Method::PrunedCd).solver;
  EXPECT_DOUBLE_EQ(pruned.cd.step_size.tau, 0.02);
  EXPECT_DOUBLE_EQ(pruned.prune_threshold, 0.5);
  EXPECT_EQ(pruned.cd.max_unique_coordinates, 7);
  EXPECT_EQ(pruned.max_outer_iterations, 6);

  const auto dogleg = config.setup_for(Method::Dogleg).solver;
  EXPECT_DOUBLE_EQ(dogleg.dogleg_initial_radius, 50.0);
  EXPECT_EQ(dogleg.max_outer_iterations, 6);
  // The unprefixed cd.* override reaches every method's cd config.
  EXPECT_DOUBLE_EQ(dogleg.cd.step_size.tau, 0.02);
}

TEST(ExperimentConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(ExperimentConfig::from_config(ConfigDoc::parse("scene.points = 3\n")),
               std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_config(ConfigDoc::parse("pruned_cd.typo = 1\n")),
               std::invalid_argument);
}

TEST(ExperimentConfig, GreedyStepSizeKeyword) {
  const auto config =
      ExperimentConfig::from_config(ConfigDoc::parse("cd.step_size = \"greedy\"\n"));
  EXPECT_EQ(config.setup_for(Method::PrunedCd).solver.cd.step_size.kind,
            StepSize::Kind::Greedy);
}

TEST(RunMotivating, B01ExactSolutionAndFiles) {
  const auto dir = fresh_dir("motivating_b01");
  sparsegn::MotivatingOptions options;
  options.output_directory = dir.string();
  const auto report = sparsegn::run_motivating(MotivatingCase::B01, options);

  const double expected = 1.0 / (0.1 + 1e-6);
  bool found_exact = false;
  bool found_pruned = false;
  for (const auto& solution : report.solutions) {
    if (solution.name == "exact") {
      found_exact = true;
      EXPECT_NEAR(solution.x(0), expected, 1e-8 * expected);
      EXPECT_NEAR(solution.x(1), expected, 1e-8 * expected);
    }
    if (solution.name == "pruned_cd") {
      found_pruned = true;
      EXPECT_EQ(solution.x, Eigen::Vector2d::Zero());  // the canceling solution is refused
    }
  }
  EXPECT_TRUE(found_exact);
  EXPECT_TRUE(found_pruned);
  EXPECT_TRUE(fs::exists(dir / "motivating_b01_solutions.csv"));
  EXPECT_TRUE(fs::exists(dir / "motivating_b01_mbi_trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "motivating_b01.json"));
}

TEST(RunMotivating, B51PerColumnRidgeMatchesClosedForm) {
  const auto dir = fresh_dir("motivating_b51");
  sparsegn::MotivatingOptions options;
  options.output_directory = dir.string();
  options.solutions = {"per_column_0_1", "mbi"};
  const auto report = sparsegn::run_motivating(MotivatingCase::B51, options);

  // Closed form of (A^T A + diag(0, 1)) x = A^T b by Cramer's rule.
  const Eigen::Matrix2d a = report.system.matrix;
  const Eigen::Vector2d b = report.system.rhs;
  const double m00 = a.col(0).squaredNorm();
  const double m01 = a.col(0).dot(a.col(1));
  const double m11 = a.col(1).squaredNorm() + 1.0;
  const double r0 = a.col(0).dot(b);
  const double r1 = a.col(1).dot(b);
  const double det = m00 * m11 - m01 * m01;
  const Eigen::Vector2d expected((r0 * m11 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det);

  ASSERT_EQ(report.solutions.size(), 2u);
  EXPECT_EQ(report.solutions[0].name, "per_column_0_1");
  EXPECT_NEAR(report.solutions[0].x(0), expected(0), 1e-12);
  EXPECT_NEAR(report.solutions[0].x(1), expected(1), 1e-12);

  // MBI coordinate descent dumps a three-step iterate sequence, and the
  // better-correlated first column is chosen first.
  ASSERT_EQ(report.mbi_trace.size(), 3u);
  EXPECT_EQ(report.mbi_trace[0].column, 0);
  const auto second = sparsegn::run_motivating(MotivatingCase::B51, options);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(report.mbi_trace[k].column, second.mbi_trace[k].column);
    EXPECT_EQ(report.mbi_trace[k].alpha, second.mbi_trace[k].alpha);
  }
}

ExperimentConfig tiny_table_config(const fs::path& dir) {
  ExperimentConfig config;
  config.scene.parameter_count = 12;
  config.scene.curve_count = 1;
  config.scene.samples_per_curve = 8;
  config.noise_levels = {0.0, 0.01};
  config.methods = {Method::Dogleg, Method::PrunedCd};
  config.seeds = {1, 2};
  config.output_directory = dir.string();
  return config;
}

TEST(RunTable, RowCountAndFiles) {
  const auto dir = fresh_dir("table_counts");
  const auto result = sparsegn::run_table_experiment(tiny_table_config(dir));
  EXPECT_EQ(result.rows.size(), 2u * 2u * 2u);
  for (const auto& row : result.rows) {
    EXPECT_TRUE(row.ok) << row.error;
  }
  EXPECT_TRUE(fs::exists(dir / "rows.csv"));
  EXPECT_TRUE(fs::exists(dir / "table1.csv"));
  EXPECT_TRUE(fs::exists(dir / "table2.csv"));
  EXPECT_TRUE(fs::exists(dir / "rows.json"));
  EXPECT_TRUE(fs::exists(dir / "config.json"));
}

TEST(RunTable, ReRunsAreByteIdenticalUpToWallTime) {
  const auto dir = fresh_dir("table_det");
  sparsegn::run_table_experiment(tiny_table_config(dir));
  const std::string rows_first = read_file(dir / "rows.csv");
  const std::string table1_first = read_file(dir / "table1.csv");
  const std::string table2_first = read_file(dir / "table2.csv");
  const std::string config_first = read_file(dir / "config.json");
  sparsegn::run_table_experiment(tiny_table_config(dir));
  EXPECT_EQ(drop_last_column(rows_first), drop_last_column(read_file(dir / "rows.csv")));
  EXPECT_EQ(table1_first, read_file(dir / "table1.csv"));
  EXPECT_EQ(table2_first, read_file(dir / "table2.csv"));
  EXPECT_EQ(config_first, read_file(dir / "config.json"));
}

TEST(RunTable, CsvHeaderEmbedsTheResolvedConfig) {
  const auto dir = fresh_dir("table_header");
  sparsegn::run_table_experiment(tiny_table_config(dir));
  const std::string csv = read_file(dir / "rows.csv");
  ASSERT_EQ(csv.rfind("# config ", 0), 0u);
  const std::string json_line = csv.substr(9, csv.find('\n') - 9);
  const auto parsed = nlohmann::json::parse(json_line);
  EXPECT_EQ(parsed["schema_version"], sparsegn::kReportSchemaVersion);
  EXPECT_EQ(parsed["methods"].size(), 2u);
  EXPECT_EQ(parsed["scene"]["parameter_count"], 12);
}

TEST(RunTable, SolverFailureIsRecordedInRowAndRunContinues) {
  const auto dir = fresh_dir("table_failure");
  auto config = tiny_table_config(dir);
  sparsegn::MethodSetup broken = config.setup_for(Method::PrunedCd);
  broken.solver.initial_x = Vector::Zero(5);  // wrong length for K = 12
  config.method_setups[Method::PrunedCd] = broken;
  const auto result = sparsegn::run_table_experiment(config);
  int failed = 0;
  int ok = 0;
  for (const auto& row : result.rows) {
    if (row.ok) {
      ++ok;
    } else {
      ++failed;
      EXPECT_FALSE(row.error.empty());
    }
  }
  EXPECT_EQ(failed, 4);  // every pruned_cd cell
  EXPECT_EQ(ok, 4);      // dogleg cells are unaffected
  EXPECT_TRUE(fs::exists(dir / "rows.csv"));
}

TEST(RunTable, PlotDataEmitsLongFormatFiles) {
  const auto dir = fresh_dir("table_plots");
  auto config = tiny_table_config(dir);
  config.plot_data = true;
  sparsegn::run_table_experiment(config);
  EXPECT_TRUE(fs::exists(dir / "plot_errors.csv"));
  EXPECT_TRUE(fs::exists(dir / "plot_weights.csv"));
}

TEST(RunTable, ScenePathReusesOneSharedScene) {
  const auto dir = fresh_dir("table_scene_path");
  sparsegn::SceneSpec spec;
  spec.parameter_count = 12;
  spec.curve_count = 1;
  spec.samples_per_curve = 8;
  spec.seed = 31;
  const auto scene = sparsegn::generate_scene(spec);
  const auto scene_file = dir / "scene.json";
  sparsegn::save_scene(scene, scene_file.string());

  auto config = tiny_table_config(dir);
  config.scene_path = scene_file.string();
  config.methods = {Method::Dogleg};
  config.noise_levels = {0.0};
  const auto result = sparsegn::run_table_experiment(config);
  ASSERT_EQ(result.rows.size(), 2u);
  // Same scene, no noise: both seeds produce identical errors.
  EXPECT_EQ(result.rows[0].report.l2_error, result.rows[1].report.l2_error);
}

TEST(RunSweep, GridsMatchTheProtocol) {
  ExperimentConfig config;
  const auto step = sparsegn::sweep_settings(sparsegn::SweepKind::StepSize, config);
  ASSERT_EQ(step.size(), 6u);
  EXPECT_EQ(step[0].label, "greedy");
  EXPECT_EQ(step[1].label, "0.01");
  EXPECT_EQ(step[5].label, "1");
  for (const auto& setting : step) {
    EXPECT_DOUBLE_EQ(setting.solver.prune_threshold, 0.0);
    EXPECT_DOUBLE_EQ(setting.solver.cd.min_rel_decrease, 0.0);
    EXPECT_EQ(setting.solver.cd.max_unique_coordinates, 10);
  }

  const auto selection = sparsegn::sweep_settings(sparsegn::SweepKind::SelectionStep, config);
  ASSERT_EQ(selection.size(), 6u);
  EXPECT_EQ(selection[0].label, "gs");
  for (std::size_t i = 1; i < selection.size(); ++i) {
    EXPECT_EQ(selection[i].solver.cd.step_size.kind, StepSize::Kind::Fixed);
    EXPECT_DOUBLE_EQ(selection[i].solver.cd.step_size.tau, 0.01);
  }

  const auto threshold = sparsegn::sweep_settings(sparsegn::SweepKind::PruneThreshold, config);
  ASSERT_EQ(threshold.size(), 4u);
  EXPECT_EQ(threshold[0].label, "0");
  EXPECT_EQ(threshold[3].label, "0.5");
  for (const auto& setting : threshold) {
    EXPECT_EQ(setting.solver.cd.max_unique_coordinates, 50);
  }

  const auto rule = sparsegn::sweep_settings(sparsegn::SweepKind::ColumnRule, config);
  ASSERT_EQ(rule.size(), 3u);
  EXPECT_EQ(rule[0].label, "mbi");
  EXPECT_EQ(rule[1].label, "gs");
  EXPECT_EQ(rule[2].label, "ours");
}

TEST(RunSweep, EmitsTracesAndWeights) {
  const auto dir = fresh_dir("sweep_rule");
  ExperimentConfig config;
  config.scene.parameter_count = 12;
  config.scene.curve_count = 1;
  config.scene.samples_per_curve = 8;
  config.seeds = {1, 2};
  config.output_directory = dir.string();
  const auto result = sparsegn::run_sweep(sparsegn::SweepKind::ColumnRule, config);
  EXPECT_EQ(result.cells.size(), 3u * 2u);
  for (const auto& cell : result.cells) {
    EXPECT_TRUE(cell.ok) << cell.error;
    EXPECT_GE(cell.residual_trace.size(), 1u);
    EXPECT_EQ(cell.weights.size(), 12);
  }
  EXPECT_TRUE(fs::exists(dir / "column_rule_traces.csv"));
  EXPECT_TRUE(fs::exists(dir / "column_rule_weights.csv"));
  const std::string traces = read_file(dir / "column_rule_traces.csv");
  EXPECT_NE(traces.find("\nmbi,1,0,"), std::string::npos);
}

TEST(Parallelism, ThreadCapDoesNotChangeResults) {
  const auto dir = fresh_dir("threads");
  setenv("SPARSE_GN_THREADS", "1", 1);
  EXPECT_EQ(sparsegn::thread_cap(), 1);
  sparsegn::run_table_experiment(tiny_table_config(dir));
  const std::string rows_single = read_file(dir / "rows.csv");
  setenv("SPARSE_GN_THREADS", "4", 1);
  EXPECT_EQ(sparsegn::thread_cap(), 4);
  sparsegn::run_table_experiment(tiny_table_config(dir));
  unsetenv("SPARSE_GN_THREADS");
  EXPECT_EQ(drop_last_column(rows_single), drop_last_column(read_file(dir / "rows.csv")));
}

TEST(Formatting, SeventeenDigitsRoundTrip) {
  for (double value : {0.1, 1.0 / 3.0, 3600.0, 5.1 / 1.01, 1e-12}) {
    const std::string text = sparsegn::fmt17(value);
    EXPECT_EQ(std::stod(text), value);
  }
}

}  // namespace
