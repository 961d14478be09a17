#pragma once

#include <span>
#include <string>
#include <vector>

#include "mpseg/decoder.hpp"
#include "mpseg/mp.hpp"

namespace mpseg {

/// query -> GT index, or -1 when unmatched.
struct Assignment {
  std::vector<int> match;
  double cost = 0.0;

  std::size_t matched() const;
  bool operator==(const Assignment&) const = default;
};

/// Minimum-cost one-to-one assignment of min(n, m) pairs on an n×m row-major
/// cost matrix (O(n²m) potentials method). Throws NumericError on non-finite entries.
Assignment hungarian(std::span<const double> cost, std::size_t n, std::size_t m);

struct LossWeights {
  double cls = 2.0;
  double bce = 5.0;
  double dice = 5.0;
  double no_object = 0.1;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

inline constexpr double kDiceEps = 1.0;

struct MaskLossValues {
  double bce = 0.0;
  double dice = 0.0;
};

/// Pixel-mean sigmoid cross-entropy and smooth dice of one logit map against a GT mask.
MaskLossValues mask_losses(std::span<const double> logits, const BinaryMask& gt);

/// rows×O matching cost for prediction rows [first, first+rows):
/// −λ_cls·p(C^o) + λ_bce·BCE + λ_dice·Dice.
std::vector<double> cost_matrix(const LayerPrediction& pred, std::size_t first, std::size_t rows,
                                const Scene& scene, const LossWeights& w);

enum class LossMode { kPerLayerBipartite, kFixedLastLayer, kConsistencyAux };

std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

struct LossResult {
  Tensor total;
  std::vector<Assignment> matching;  // per layer 0..L, matching part
  std::vector<double> layer_matching;  // per-layer matching-part loss value
  std::vector<double> layer_mp;        // per-layer MP-part loss value (zeros without MP)
  double aux = 0.0;                    // consistency term value
};

/// Differentiable set-prediction loss for both parts, summed over layers.
LossResult layer_losses(const LayerOutputs& outputs, const Scene& scene, const MPPart* mp,
                        LossMode mode, const LossWeights& w);

/// Matching-part assignments of every layer, without building a loss graph.
std::vector<Assignment> match_layers(const LayerOutputs& outputs, const Scene& scene,
                                     const LossWeights& w);

}  // namespace mpseg
