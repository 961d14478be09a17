#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpseg/decoder.hpp"
#include "mpseg/matching.hpp"
#include "mpseg/mp.hpp"

namespace mpseg {

/// V^i per layer: GT index or -1 for every query.
using MatchingVectors = std::vector<std::vector<int>>;

MatchingVectors matching_vectors(const std::vector<Assignment>& per_layer);

/// mIoU-L^i for i = 1..L over query rows [first, first+rows); entry i-1 holds layer i.
std::vector<double> miou_layerwise(const LayerOutputs& outputs, std::size_t first, std::size_t rows);
/// Matching part only.
std::vector<double> miou_layerwise(const LayerOutputs& outputs);

/// Util^i for i = 0..L against the last entry; O ≥ 1.
std::vector<double> util_layerwise(const MatchingVectors& v, std::size_t num_gt);

/// Util of the MP part under hard assignment; 1 at every layer. Throws on an empty part.
double util_mp_hard(const MPPart& mp);

/// Util^i of the MP part when each group is matched to its GT instances by
/// bipartite matching instead of hard assignment.
std::vector<double> util_mp_bipartite(const LayerOutputs& outputs, const Scene& scene,
                                      const MPPart& mp, const LossWeights& w);

// AP-lite -----------------------------------------------------------------------

struct Detection {
  std::size_t scene = 0;  // position in the scene list
  std::size_t query = 0;
  std::size_t category = 0;
  double score = 0.0;
  BinaryMask mask;
};

/// One detection per query: best real class, score = p(class) × mean mask
/// probability inside the binarized mask. Empty masks are dropped.
std::vector<Detection> detections_from(const LayerPrediction& pred, std::size_t rows,
                                       std::size_t height, std::size_t width,
                                       std::size_t scene_pos);

struct ApResult {
  double ap50 = 0.0;
  double ap75 = 0.0;
  double mean() const { return 0.5 * (ap50 + ap75); }
};

/// AP at one IoU threshold: per category greedy matching in score order,
/// 101-point interpolated precision, averaged over categories that have GT.
double average_precision(const std::vector<Detection>& dets, const std::vector<Scene>& scenes,
                         std::size_t num_categories, double iou_threshold);
ApResult ap_lite(const std::vector<Detection>& dets, const std::vector<Scene>& scenes,
                 std::size_t num_categories);

// Refinement threshold oracle -----------------------------------------------------

struct RefinementInput {
  std::size_t dim = 0;
  std::vector<double> features;  // n×dim
  std::vector<int> label;        // 0 → C₀, 1 → C₁, anything else unlabeled
  std::vector<char> in_m0;       // membership of the attended mask M₀
  std::vector<double> weight;    // attention weight per feature (used inside M₀)

  std::size_t size() const { return label.size(); }
};

struct RefinementBounds {
  double T0 = 0, T1 = 0;  // intra-category dot product range
  double t0 = 0, t1 = 0;  // inter-category dot product range
  double sum_alpha = 0;   // weights over M₀∩C₀
  double sum_beta = 0;    // weights over M₀∩C₁
  double weight_ratio = 0;  // Σβ/Σα
  double ratio_bound = 0;   // (T₀−t₁)/(T₁−t₀)
  bool condition = false;   // Σβ/Σα < ratio bound
  /// Guaranteed-separation threshold interval (lo, hi), when non-empty.
  std::optional<std::pair<double, double>> interval;
  bool separable = false;  // brute-force scan found a separating threshold
  std::string status;      // "separated", "partial-separation" or "no-guarantee"
};

/// Scores s_k = q₁·V_k with q₁ = Σ_{i∈M₀} w_i V_i, for every feature.
std::vector<double> refinement_scores(const RefinementInput& in);
/// Whether some threshold has every C₀ score above it and every C₁ score at or below it.
bool separating_threshold_exists(const RefinementInput& in);
/// Throws std::invalid_argument when M₀∩C₀ or M₀∩C₁ is empty.
RefinementBounds refinement_bounds(const RefinementInput& in);

struct WeightRatio {
  double weight_ratio = 0;  // Σβ/Σα
  double area_ratio = 0;    // |M₀∩C₁| / |M₀∩C₀|
};
WeightRatio unbiased_weight_ratio(std::span<const double> alpha, std::span<const double> beta);

}  // namespace mpseg
