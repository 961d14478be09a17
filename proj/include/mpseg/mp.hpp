#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mpseg/decoder.hpp"
#include "mpseg/mask.hpp"
#include "mpseg/synth.hpp"

namespace mpseg {

struct MPConfig {
  bool enabled = false;
  std::size_t num_queries = 20;  // MP query budget n_q
  double lambda_p = 0.2;         // point-noise ratio
  double lambda_l = 0.2;         // label-flip probability
  /// 1-based layers receiving GT attention masks; nullopt means all layers.
  std::optional<std::vector<std::size_t>> layers;
  NoiseSpec noise{};

  /// Throws ConfigError on out-of-range values.
  void validate(std::size_t num_layers) const;
  /// Sorted layer list, expanding "all".
  std::vector<std::size_t> resolved_layers(std::size_t num_layers) const;
};

/// Number of MP groups for a budget of n_q queries and n_o objects:
/// ⌊n_q/n_o⌋, 0 for no objects, 1 when the objects exceed the budget.
std::size_t dynamic_groups(std::size_t n_q, std::size_t n_o);

struct MPPart {
  std::size_t num_groups = 0;
  std::size_t group_size = 0;  // instances per group
  std::vector<std::size_t> group_of;       // per MP query
  std::vector<std::size_t> gt_index;       // hard assignment: MP query -> GT instance
  std::vector<std::size_t> true_category;  // category of the assigned GT
  std::vector<std::size_t> query_category; // class embedding actually used (after flips)
  Tensor queries;                          // M×d, gathered from the class embeddings
  std::vector<LayerOverride> overrides;    // rows offset by the matching-part size

  std::size_t size() const { return gt_index.size(); }
  bool empty() const { return gt_index.empty(); }
  std::vector<std::size_t> group_sizes() const {
    return std::vector<std::size_t>(num_groups, group_size);
  }
};

/// Builds the MP part for one scene. Deterministic in `seed`.
MPPart build_mp_part(const Scene& scene, const FeaturePyramid& pyramid,
                     const DecoderParams& params, const MPConfig& cfg, std::uint64_t seed);

/// Matching queries see only matching queries; MP queries see the matching
/// part and their own group.
BoolGrid build_self_block(std::size_t num_matching, const std::vector<std::size_t>& group_sizes);

/// Forward spec for training: matching queries, then the MP part if given.
ForwardSpec training_spec(const FeaturePyramid& pyramid, const DecoderParams& params,
                          const MPPart* mp);

}  // namespace mpseg
