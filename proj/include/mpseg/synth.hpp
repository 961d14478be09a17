#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpseg/mask.hpp"

namespace mpseg {

enum class ShapeKind { kRectangle, kDisk };
enum class PrototypeKind { kOrthonormal, kRandom };

struct SynthConfig {
  std::size_t num_scenes = 200;
  std::size_t num_categories = 4;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t feature_dim = 32;
  std::size_t min_instances = 1;
  std::size_t max_instances = 6;
  std::vector<ShapeKind> shapes{ShapeKind::kRectangle, ShapeKind::kDisk};
  std::size_t rect_min = 5;
  std::size_t rect_max = 12;
  std::size_t disk_min = 3;
  std::size_t disk_max = 6;
  PrototypeKind prototypes = PrototypeKind::kOrthonormal;
  double feature_sigma = 0.1;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Single-line `key=value` rendering used in dataset headers.
  std::string to_header() const;
  static SynthConfig from_header(const std::string& kv);

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);

  bool operator==(const SynthConfig&) const = default;
};

struct Instance {
  std::size_t category = 0;
  BinaryMask mask;
  bool operator==(const Instance&) const = default;
};

struct Scene {
  std::size_t index = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Instance> instances;

  /// Category id per pixel, or -1 for background.
  std::vector<int> label_map() const;
  bool operator==(const Scene&) const = default;
};

/// (h·w)×dim feature vectors, row-major by pixel.
struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t pixels() const { return height * width; }
  std::span<const double> at(std::size_t y, std::size_t x) const {
    return {values.data() + (y * width + x) * dim, dim};
  }
};

inline constexpr std::size_t kNumScales = 3;

/// Scales ordered coarse to fine: 1/4, 1/2, 1/1 of the base extents.
struct FeaturePyramid {
  std::array<FeatureGrid, kNumScales> scales;
  /// Per-pixel embedding grid consumed by the mask head (base resolution).
  const FeatureGrid& embed() const { return scales[kNumScales - 1]; }
};

/// (K+1)×d prototype matrix; row K is the background prototype.
std::vector<double> make_prototypes(const SynthConfig& cfg);

Scene generate_scene(const SynthConfig& cfg, std::size_t index);
std::vector<Scene> generate_scenes(const SynthConfig& cfg);

FeaturePyramid synth_features(const Scene& scene, const SynthConfig& cfg);
/// Same, with a precomputed prototype matrix.
FeaturePyramid synth_features(const Scene& scene, const SynthConfig& cfg,
                              std::span<const double> prototypes);

/// 2×2 mean pooling; extents must be even.
FeatureGrid mean_pool2(const FeatureGrid& g);

struct Dataset {
  SynthConfig config;
  std::vector<Scene> scenes;
};

inline constexpr int kDatasetSchemaVersion = 1;

std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(const std::string& text);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace mpseg
