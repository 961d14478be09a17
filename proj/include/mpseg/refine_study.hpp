#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpseg/metrics.hpp"

namespace mpseg {

enum class WeightKind { kUniform, kSoftmax };

struct RefineStudyConfig {
  std::vector<double> sigmas{0.0, 0.05, 0.1, 0.2, 0.4};
  std::size_t samples_per_sigma = 200;
  std::size_t dim = 8;
  std::size_t pixels_per_category = 16;  // |C₀| = |C₁|
  double ratio_min = 0.1;                // sampled |M₀∩C₁| / |M₀∩C₀|
  double ratio_max = 1.5;
  WeightKind weights = WeightKind::kUniform;
  std::uint64_t seed = 1;

  static RefineStudyConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Two orthonormal category prototypes plus N(0, σ²) noise per pixel. M₀ holds
/// every C₀ pixel and round(ratio·|C₀|) C₁ pixels (at least one).
RefinementInput sample_refinement_instance(const RefineStudyConfig& cfg, double sigma,
                                           double area_ratio, std::uint64_t seed);

struct RefineSample {
  std::size_t index = 0;
  double sigma = 0.0;
  RefinementBounds bounds;
};

std::vector<RefineSample> run_refine_study(const RefineStudyConfig& cfg);

}  // namespace mpseg
