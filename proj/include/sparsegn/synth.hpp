// Synthetic problem generators: the motivating 2x2 systems and a desk-scale
// blendshape curve-matching scene (smooth displacement basis over a spherical
// patch, pinhole projection, seeded noise). Everything here is pure and
// deterministic given the seed.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sparsegn/problem.hpp"
#include "sparsegn/rng.hpp"

namespace sparsegn {

// ---------------------------------------------------------------------------
// Motivating 2x2 systems

enum class MotivatingCase { B01, B51 };

inline const char* to_string(MotivatingCase c) { return c == MotivatingCase::B01 ? "b01" : "b51"; }

inline MotivatingCase parse_motivating_case(const std::string& name) {
  if (name == "b01" || name == "B01") return MotivatingCase::B01;
  if (name == "b51" || name == "B51") return MotivatingCase::B51;
  throw std::invalid_argument("unknown motivating case: " + name);
}

/// The near-singular 2x2 system whose exact solution overdials both columns.
/// B01 uses b = (0, 1) (nothing easily in the range of A); B51 uses
/// b = (5, 1) (the first component is easily captured).
struct MotivatingSystem {
  Eigen::Matrix2d matrix;
  Eigen::Vector2d rhs;
  MotivatingCase label = MotivatingCase::B01;

  Problem problem() const { return make_linear_problem(matrix, rhs); }
};

inline MotivatingSystem motivating_system(MotivatingCase which) {
  MotivatingSystem system;
  system.matrix << 1.0, -1.0, 0.1, 1e-6;
  system.rhs = which == MotivatingCase::B01 ? Eigen::Vector2d(0.0, 1.0)
                                            : Eigen::Vector2d(5.0, 1.0);
  system.label = which;
  return system;
}

// ---------------------------------------------------------------------------
// Camera and projection

struct Camera {
  double focal_length = 2.0;
  double cx = 0.0;
  double cy = 0.0;
  double z_distance = 2.0;  // distance from camera to the front of the patch
};

inline Eigen::Vector2d project(const Eigen::Vector3d& point, const Camera& camera) {
  if (!(point.z() > 0.0)) {
    throw std::invalid_argument("project: point behind camera (z = " +
                                std::to_string(point.z()) + ")");
  }
  return {camera.focal_length * point.x() / point.z() + camera.cx,
          camera.focal_length * point.y() / point.z() + camera.cy};
}

// ---------------------------------------------------------------------------
// Scene

struct SceneSpec {
  int parameter_count = 150;  // blendshape columns, K
  int curve_count = 8;
  int samples_per_curve = 30;
  double near_duplicate_fraction = 0.2;  // fraction of columns that are near-copies
  int true_weight_count = 2;
  double noise_amplitude = 0.0;  // normalized image units; the patch projects to ~1.0
  std::uint64_t seed = 1;

  void validate() const {
    if (parameter_count < 10) {
      throw std::invalid_argument("SceneSpec: parameter_count must be at least 10");
    }
    if (curve_count < 1) {
      throw std::invalid_argument("SceneSpec: curve_count must be at least 1");
    }
    if (samples_per_curve < 2) {
      throw std::invalid_argument("SceneSpec: samples_per_curve must be at least 2");
    }
    if (!(near_duplicate_fraction >= 0.0 && near_duplicate_fraction < 1.0)) {
      throw std::invalid_argument("SceneSpec: near_duplicate_fraction must lie in [0, 1)");
    }
    if (!(noise_amplitude >= 0.0)) {
      throw std::invalid_argument("SceneSpec: noise_amplitude must be nonnegative");
    }
    if (true_weight_count < 0) {
      throw std::invalid_argument("SceneSpec: true_weight_count must be nonnegative");
    }
  }
};

/// Ground-truth scene: a spherical patch of P points, K smooth displacement
/// columns (a configurable fraction are near-duplicates of earlier columns),
/// a sparse true weight vector, a pinhole camera, and the index lists of the
/// sampled curves. The target is always regenerated from true_weights, so
/// the no-noise residual at the true weights is exactly zero.
struct BlendshapeScene {
  Vector neutral;   // 3P, xyz per point
  Matrix basis;     // (3P) x K
  Vector true_weights;
  Camera camera;
  std::vector<std::vector<int>> curves;
  int samples_per_curve = 0;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index point_count() const { return neutral.size() / 3; }
  Eigen::Index parameter_count() const { return basis.cols(); }
};

inline BlendshapeScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  const int nu = spec.samples_per_curve;
  const int nv = 4 * spec.curve_count;  // keeps P >= 4 * samples_per_curve
  const int point_count = nu * nv;
  const int k = spec.parameter_count;
  const int duplicates = static_cast<int>(std::lround(spec.near_duplicate_fraction * k));
  const int originals = k - duplicates;
  if (spec.true_weight_count > originals) {
    throw std::invalid_argument("SceneSpec: true_weight_count exceeds non-duplicate columns");
  }

  BlendshapeScene scene;
  scene.camera = Camera{};
  scene.samples_per_curve = nu;
  scene.noise_amplitude = spec.noise_amplitude;
  scene.seed = spec.seed;

  // Spherical patch facing the camera; the front of the patch sits at
  // z = camera.z_distance.
  const double patch_radius = 1.0;
  const double angular_extent = 1.2;
  const Eigen::Vector3d center(0.0, 0.0, scene.camera.z_distance + patch_radius);
  scene.neutral.resize(3 * point_count);
  for (int j = 0; j < nv; ++j) {
    const double v = nv > 1 ? static_cast<double>(j) / (nv - 1) - 0.5 : 0.0;
    for (int i = 0; i < nu; ++i) {
      const double u = static_cast<double>(i) / (nu - 1) - 0.5;
      const double a = angular_extent * u;
      const double b = angular_extent * v;
      const Eigen::Vector3d direction(std::sin(a) * std::cos(b), std::sin(b),
                                      -std::cos(a) * std::cos(b));
      scene.neutral.segment<3>(3 * (j * nu + i)) = center + patch_radius * direction;
    }
  }

  // Curves run along u at evenly spaced rows.
  scene.curves.resize(spec.curve_count);
  for (int m = 0; m < spec.curve_count; ++m) {
    const int row = 4 * m + 2;
    scene.curves[m].resize(nu);
    for (int i = 0; i < nu; ++i) {
      scene.curves[m][i] = row * nu + i;
    }
  }
  std::vector<int> curve_points;
  for (const auto& curve : scene.curves) {
    curve_points.insert(curve_points.end(), curve.begin(), curve.end());
  }

  const Eigen::Vector3d box_min(scene.neutral.reshaped(3, point_count).rowwise().minCoeff());
  const Eigen::Vector3d box_max(scene.neutral.reshaped(3, point_count).rowwise().maxCoeff());
  const double diameter = (box_max - box_min).norm();

  // Smooth displacement fields, like a rig's shapes: most columns are
  // localized bumps (a Gaussian window around some curve point times a few
  // harmonics), a smaller share are global low-frequency fields that touch
  // everything at once. Each column is normalized so a unit weight moves
  // curve points by a few percent of the patch diameter (RMS).
  const int global_columns = std::max(1, static_cast<int>(std::lround(0.08 * originals)));
  scene.basis.resize(3 * point_count, k);
  auto curve_rms = [&scene, &curve_points](int column) {
    double sum_sq = 0.0;
    for (int p : curve_points) {
      sum_sq += scene.basis.col(column).segment<3>(3 * p).squaredNorm();
    }
    return std::sqrt(sum_sq / static_cast<double>(curve_points.size()));
  };
  for (int column = 0; column < originals; ++column) {
    const bool global = column < global_columns;
    const int harmonics = global ? 4 : 3;
    Eigen::Vector3d window_center = Eigen::Vector3d::Zero();
    double window_width = 0.0;
    if (!global) {
      const int anchor = curve_points[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(curve_points.size())))];
      window_center = scene.neutral.segment<3>(3 * anchor);
      window_width = rng.uniform(0.08, 0.18) * diameter;
    }
    std::vector<Eigen::Vector3d> directions(static_cast<std::size_t>(harmonics));
    std::vector<Eigen::Vector3d> frequencies(static_cast<std::size_t>(harmonics));
    std::vector<double> phases(static_cast<std::size_t>(harmonics));
    const double frequency_range = global ? 1.5 : 4.0;
    for (int h = 0; h < harmonics; ++h) {
      for (int c = 0; c < 3; ++c) directions[static_cast<std::size_t>(h)](c) = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        frequencies[static_cast<std::size_t>(h)](c) = rng.uniform(-frequency_range, frequency_range);
      }
      phases[static_cast<std::size_t>(h)] = rng.uniform(0.0, 2.0 * M_PI);
    }
    const double scale = 0.05 * rng.uniform(0.5, 1.8);  // a few percent of the diameter
    for (int p = 0; p < point_count; ++p) {
      const Eigen::Vector3d position = scene.neutral.segment<3>(3 * p);
      Eigen::Vector3d displacement = Eigen::Vector3d::Zero();
      for (int h = 0; h < harmonics; ++h) {
        displacement += directions[static_cast<std::size_t>(h)] *
                        std::sin(frequencies[static_cast<std::size_t>(h)].dot(position) +
                                 phases[static_cast<std::size_t>(h)]);
      }
      if (!global) {
        const double distance2 = (position - window_center).squaredNorm();
        displacement *= std::exp(-distance2 / (2.0 * window_width * window_width));
      }
      scene.basis.col(column).segment<3>(3 * p) = displacement;
    }
    const double rms = curve_rms(column);
    if (rms > 0.0) {
      scene.basis.col(column) *= scale * diameter / rms;
    }
  }

  // Near-duplicate columns: a copy of an earlier column plus ~1% RMS noise.
  // These create near-null-spaces like the redundant shapes of a real rig.
  std::vector<char> duplicated(static_cast<std::size_t>(originals), 0);
  for (int column = originals; column < k; ++column) {
    const int source = rng.uniform_int(originals);
    duplicated[static_cast<std::size_t>(source)] = 1;
    scene.basis.col(column) = scene.basis.col(source);
    const double amplitude = 0.01 * std::sqrt(3.0) * curve_rms(source);
    for (int row = 0; row < 3 * point_count; ++row) {
      scene.basis(row, column) += rng.uniform(-amplitude, amplitude);
    }
  }

  // Keep every point in front of the camera for ||w||_inf <= 2: bound the
  // total worst-case z excursion by 0.75 * z_distance.
  double worst_z = 0.0;
  for (int column = 0; column < k; ++column) {
    double column_max = 0.0;
    for (int p = 0; p < point_count; ++p) {
      column_max = std::max(column_max, std::abs(scene.basis(3 * p + 2, column)));
    }
    worst_z += 2.0 * column_max;
  }
  const double z_budget = 0.75 * scene.camera.z_distance;
  if (worst_z > z_budget) {
    const double shrink = z_budget / worst_z;
    for (int p = 0; p < point_count; ++p) {
      scene.basis.row(3 * p + 2) *= shrink;
    }
  }

  // True weights live on localized columns without a near-duplicate, the
  // analog of dialing two clean expression shapes.
  std::vector<int> eligible;
  for (int column = global_columns; column < originals; ++column) {
    if (!duplicated[static_cast<std::size_t>(column)]) eligible.push_back(column);
  }
  if (static_cast<int>(eligible.size()) < spec.true_weight_count) {
    for (int column = 0; column < originals &&
                         static_cast<int>(eligible.size()) < spec.true_weight_count;
         ++column) {
      if (std::find(eligible.begin(), eligible.end(), column) == eligible.end()) {
        eligible.push_back(column);
      }
    }
  }
  scene.true_weights = Vector::Zero(k);
  int placed = 0;
  while (placed < spec.true_weight_count) {
    const int index = eligible[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(eligible.size())))];
    if (scene.true_weights(index) == 0.0) {
      scene.true_weights(index) = 1.0;
      ++placed;
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Curve evaluation, resampling, noise

/// Projected positions of all curve points at weights w, curve by curve.
inline std::vector<Eigen::Vector2d> model_curve_points(const BlendshapeScene& scene,
                                                       const Vector& w) {
  if (w.size() != scene.parameter_count()) {
    throw std::invalid_argument("model_curve_points: weight vector has wrong length");
  }
  std::vector<Eigen::Vector2d> points;
  for (const auto& curve : scene.curves) {
    for (int p : curve) {
      const Eigen::Vector3d position =
          scene.neutral.segment<3>(3 * p) + scene.basis.middleRows(3 * p, 3) * w;
      points.push_back(project(position, scene.camera));
    }
  }
  return points;
}

/// The target C*: curve points generated exactly from the true weights.
inline std::vector<Eigen::Vector2d> target_curve_points(const BlendshapeScene& scene) {
  return model_curve_points(scene, scene.true_weights);
}

inline Vector flatten_points(const std::vector<Eigen::Vector2d>& points) {
  Vector flat(2 * static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    flat(2 * static_cast<Eigen::Index>(i)) = points[i].x();
    flat(2 * static_cast<Eigen::Index>(i) + 1) = points[i].y();
  }
  return flat;
}

/// n points at equal arc-length spacing along the polyline, endpoints
/// included.
inline std::vector<Eigen::Vector2d> resample_curve_uniform(
    const std::vector<Eigen::Vector2d>& polyline, int n) {
  if (polyline.size() < 2) {
    throw std::invalid_argument("resample_curve_uniform: polyline needs at least 2 points");
  }
  if (n < 2) {
    throw std::invalid_argument("resample_curve_uniform: need at least 2 samples");
  }
  std::vector<double> cumulative(polyline.size(), 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (polyline[i] - polyline[i - 1]).norm();
  }
  const double total = cumulative.back();
  if (total == 0.0) {
    throw std::invalid_argument("resample_curve_uniform: polyline has zero length");
  }
  std::vector<Eigen::Vector2d> samples(static_cast<std::size_t>(n));
  samples.front() = polyline.front();
  samples.back() = polyline.back();
  std::size_t segment = 0;
  for (int s = 1; s + 1 < n; ++s) {
    const double arc = total * static_cast<double>(s) / (n - 1);
    while (segment + 2 < polyline.size() && cumulative[segment + 1] < arc) {
      ++segment;
    }
    const double span = cumulative[segment + 1] - cumulative[segment];
    const double t = span > 0.0 ? (arc - cumulative[segment]) / span : 0.0;
    samples[static_cast<std::size_t>(s)] =
        polyline[segment] + t * (polyline[segment + 1] - polyline[segment]);
  }
  return samples;
}

/// Perturbs each coordinate by an independent draw from U(-amplitude,
/// amplitude), deterministic per seed.
inline std::vector<Eigen::Vector2d> add_uniform_noise(const std::vector<Eigen::Vector2d>& points,
                                                      double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) {
    throw std::invalid_argument("add_uniform_noise: amplitude must be nonnegative");
  }
  if (amplitude == 0.0) {
    return points;
  }
  Rng rng(seed);
  std::vector<Eigen::Vector2d> noisy = points;
  for (auto& point : noisy) {
    point.x() += rng.uniform(-amplitude, amplitude);
    point.y() += rng.uniform(-amplitude, amplitude);
  }
  return noisy;
}

// ---------------------------------------------------------------------------
// Curve-matching problem

/// min_w || target - projected_curves(x(w)) ||^2 as a Problem. The analytic
/// Jacobian chains the pinhole projection through the linear surface model;
/// the projection is the only nonlinearity.
inline Problem make_curve_problem(const BlendshapeScene& scene,
                                  const std::vector<Eigen::Vector2d>& target) {
  struct Data {
    Vector neutral_curve;  // 3N for the N stacked curve points
    Matrix basis_curve;    // (3N) x K
    Camera camera;
    Vector target;         // 2N
  };
  auto data = std::make_shared<Data>();
  std::vector<int> curve_points;
  for (const auto& curve : scene.curves) {
    curve_points.insert(curve_points.end(), curve.begin(), curve.end());
  }
  const Eigen::Index n_points = static_cast<Eigen::Index>(curve_points.size());
  if (static_cast<Eigen::Index>(target.size()) != n_points) {
    throw std::invalid_argument("make_curve_problem: target has " +
                                std::to_string(target.size()) + " points, scene has " +
                                std::to_string(n_points) + " curve samples");
  }
  const Eigen::Index k = scene.parameter_count();
  data->neutral_curve.resize(3 * n_points);
  data->basis_curve.resize(3 * n_points, k);
  for (Eigen::Index q = 0; q < n_points; ++q) {
    const int p = curve_points[static_cast<std::size_t>(q)];
    data->neutral_curve.segment<3>(3 * q) = scene.neutral.segment<3>(3 * p);
    data->basis_curve.middleRows(3 * q, 3) = scene.basis.middleRows(3 * p, 3);
  }
  data->camera = scene.camera;
  data->target = flatten_points(target);

  Problem problem;
  problem.parameter_count = k;
  problem.residual_count = 2 * n_points;
  problem.evaluate = [data](const Vector& w) -> Vector {
    const Vector positions = data->neutral_curve + data->basis_curve * w;
    Vector residual(data->target.size());
    for (Eigen::Index q = 0; q < positions.size() / 3; ++q) {
      const Eigen::Vector2d projected =
          project(positions.segment<3>(3 * q), data->camera);
      residual(2 * q) = projected.x() - data->target(2 * q);
      residual(2 * q + 1) = projected.y() - data->target(2 * q + 1);
    }
    return residual;
  };
  problem.jacobian = [data](const Vector& w) -> Matrix {
    const Vector positions = data->neutral_curve + data->basis_curve * w;
    Matrix jac(data->target.size(), w.size());
    Eigen::Matrix<double, 2, 3> projection;
    for (Eigen::Index q = 0; q < positions.size() / 3; ++q) {
      const double x = positions(3 * q);
      const double y = positions(3 * q + 1);
      const double z = positions(3 * q + 2);
      if (!(z > 0.0)) {
        throw std::invalid_argument("make_curve_problem: point behind camera during jacobian");
      }
      const double f = data->camera.focal_length;
      projection << f / z, 0.0, -f * x / (z * z),
                    0.0, f / z, -f * y / (z * z);
      jac.middleRows(2 * q, 2).noalias() = projection * data->basis_curve.middleRows(3 * q, 3);
    }
    return jac;
  };
  return problem;
}

// ---------------------------------------------------------------------------
// Scene serialization (versioned JSON)

inline constexpr int kSceneVersion = 1;

inline nlohmann::json scene_to_json(const BlendshapeScene& scene) {
  nlohmann::json doc;
  doc["scene_version"] = kSceneVersion;
  doc["seed"] = scene.seed;
  doc["samples_per_curve"] = scene.samples_per_curve;
  doc["noise_amplitude"] = scene.noise_amplitude;
  doc["camera"] = {{"focal_length", scene.camera.focal_length},
                   {"cx", scene.camera.cx},
                   {"cy", scene.camera.cy},
                   {"z_distance", scene.camera.z_distance}};
  const Eigen::Index points = scene.point_count();
  nlohmann::json neutral = nlohmann::json::array();
  for (Eigen::Index p = 0; p < points; ++p) {
    neutral.push_back({scene.neutral(3 * p), scene.neutral(3 * p + 1), scene.neutral(3 * p + 2)});
  }
  doc["neutral"] = std::move(neutral);
  nlohmann::json basis = nlohmann::json::array();
  for (Eigen::Index c = 0; c < scene.basis.cols(); ++c) {
    nlohmann::json column = nlohmann::json::array();
    for (Eigen::Index p = 0; p < points; ++p) {
      column.push_back(
          {scene.basis(3 * p, c), scene.basis(3 * p + 1, c), scene.basis(3 * p + 2, c)});
    }
    basis.push_back(std::move(column));
  }
  doc["basis"] = std::move(basis);
  doc["true_weights"] = std::vector<double>(scene.true_weights.begin(), scene.true_weights.end());
  doc["curves"] = scene.curves;
  return doc;
}

inline BlendshapeScene scene_from_json(const nlohmann::json& doc) {
  if (!doc.contains("scene_version") || doc["scene_version"].get<int>() != kSceneVersion) {
    throw std::runtime_error("scene_from_json: scene_version mismatch (expected " +
                             std::to_string(kSceneVersion) + ")");
  }
  BlendshapeScene scene;
  scene.seed = doc.at("seed").get<std::uint64_t>();
  scene.samples_per_curve = doc.at("samples_per_curve").get<int>();
  scene.noise_amplitude = doc.at("noise_amplitude").get<double>();
  const auto& camera = doc.at("camera");
  scene.camera.focal_length = camera.at("focal_length").get<double>();
  scene.camera.cx = camera.at("cx").get<double>();
  scene.camera.cy = camera.at("cy").get<double>();
  scene.camera.z_distance = camera.at("z_distance").get<double>();

  const auto& neutral = doc.at("neutral");
  const Eigen::Index points = static_cast<Eigen::Index>(neutral.size());
  scene.neutral.resize(3 * points);
  for (Eigen::Index p = 0; p < points; ++p) {
    for (int c = 0; c < 3; ++c) {
      scene.neutral(3 * p + c) = neutral[static_cast<std::size_t>(p)][c].get<double>();
    }
  }
  const auto& basis = doc.at("basis");
  const Eigen::Index k = static_cast<Eigen::Index>(basis.size());
  scene.basis.resize(3 * points, k);
  for (Eigen::Index column = 0; column < k; ++column) {
    const auto& entries = basis[static_cast<std::size_t>(column)];
    if (static_cast<Eigen::Index>(entries.size()) != points) {
      throw std::runtime_error("scene_from_json: basis column has wrong point count");
    }
    for (Eigen::Index p = 0; p < points; ++p) {
      for (int c = 0; c < 3; ++c) {
        scene.basis(3 * p + c, column) = entries[static_cast<std::size_t>(p)][c].get<double>();
      }
    }
  }
  const auto weights = doc.at("true_weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(weights.size()) != k) {
    throw std::runtime_error("scene_from_json: true_weights length does not match basis");
  }
  scene.true_weights = Eigen::Map<const Vector>(weights.data(), k);
  scene.curves = doc.at("curves").get<std::vector<std::vector<int>>>();
  for (const auto& curve : scene.curves) {
    for (int p : curve) {
      if (p < 0 || p >= points) {
        throw std::runtime_error("scene_from_json: curve index out of range");
      }
    }
  }
  return scene;
}

inline void save_scene(const BlendshapeScene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_scene: cannot open " + path);
  }
  out << scene_to_json(scene).dump();
  out << '\n';
}

inline BlendshapeScene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_scene: cannot open " + path);
  }
  nlohmann::json doc;
  in >> doc;
  return scene_from_json(doc);
}

}  // namespace sparsegn
