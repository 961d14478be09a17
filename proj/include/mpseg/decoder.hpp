#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpseg/mask.hpp"
#include "mpseg/synth.hpp"
#include "mpseg/tensor.hpp"

namespace mpseg {

struct DecoderDims {
  std::size_t num_queries = 20;  // matching-part queries
  std::size_t num_layers = 9;
  std::size_t dim = 32;
  std::size_t num_categories = 4;
  std::size_t ffn_dim = 64;
  /// Amplitude of the fixed sinusoidal pixel position code (0 disables it).
  double pos_scale = 0.5;

  std::size_t num_classes() const { return num_categories + 1; }  // + no-object
  bool operator==(const DecoderDims&) const = default;
};

struct LayerParams {
  // cross-attention
  Tensor cq_w, cq_b, ck_w, ck_b, cv_w, cv_b, co_w, co_b, cln_g, cln_b;
  // self-attention
  Tensor sq_w, sq_b, sk_w, sk_b, sv_w, sv_b, so_w, so_b, sln_g, sln_b;
  // feed-forward
  Tensor f1_w, f1_b, f2_w, f2_b, fln_g, fln_b;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct DecoderParams {
  DecoderDims dims;
  Tensor query_embed;  // N×d learnable matching queries
  Tensor class_embed;  // K×d class embeddings seeding MP queries
  std::vector<LayerParams> layers;
  Tensor out_ln_g, out_ln_b;  // shared norm in front of both heads
  Tensor cls_w, cls_b;        // d×(K+1)
  Tensor mask_w1, mask_b1, mask_w2, mask_b2;
  Tensor pix_w, pix_b;  // learned adapter on the per-pixel embedding grid

  static DecoderParams init(const DecoderDims& dims, std::uint64_t seed);

  /// All parameters in a fixed order; names are stable across versions.
  std::vector<NamedTensor> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;
};

/// Scale index used by decoder layer `layer` (1-based): 1/4, 1/2, 1/1, repeating.
inline std::size_t scale_for_layer(std::size_t layer) { return (layer - 1) % kNumScales; }

/// Attention-mask replacement for a contiguous run of queries at one layer.
struct LayerOverride {
  std::size_t layer = 1;        // 1-based decoder layer
  std::size_t first_query = 0;  // row of grids[0] in the query axis
  std::vector<BoolGrid> grids;  // one per query, at the layer's scale extents
};

struct ForwardSpec {
  const FeaturePyramid* pyramid = nullptr;
  Tensor queries;                   // (N + M)×d initial queries
  std::size_t num_matching = 0;     // first N rows form the matching part
  std::vector<LayerOverride> overrides;
  BoolGrid self_block;              // empty grid means no self-attention blocking
};

struct LayerPrediction {
  Tensor mask_logits;   // Q×(H·W), row-major pixels at base extents
  Tensor class_logits;  // Q×(K+1)
};

struct LayerOutputs {
  std::vector<LayerPrediction> layers;  // index 0 = prediction before layer 1
  std::size_t num_matching = 0;
  std::size_t num_mp = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t num_queries() const { return num_matching + num_mp; }
};

/// Fixed 2-D sinusoidal position code for an h×w grid, (h·w)×dim.
std::vector<double> position_code(std::size_t h, std::size_t w, std::size_t dim, double amplitude);

/// Precomputed per-forward pixel tensors (features plus position code per scale).
struct PixelInputs {
  std::array<Tensor, kNumScales> features;      // P_s×d
  std::array<Tensor, kNumScales> keyed;         // features + position code
  std::array<std::size_t, kNumScales> heights{}, widths{};
  Tensor embed_keyed;                           // base embed grid + position code
};
PixelInputs make_pixel_inputs(const FeaturePyramid& pyr, const DecoderDims& dims);

/// logits[n, p] = MLP(queries_n) · pixel_embed[p].
Tensor mask_head(const Tensor& queries, const Tensor& pixel_embed, const DecoderParams& params);
/// Same, with the MLP replaced by `mlp` (identity when undefined).
Tensor dot_mask_head(const Tensor& mlp_queries, const Tensor& pixel_embed);

/// sigmoid(logit) > 0.5.
bool mask_on(double logit);

/// Per-query blocking grids at the given extents from base-resolution logits.
std::vector<BoolGrid> binarize_for_attention(const Tensor& mask_logits, std::size_t base_h,
                                             std::size_t base_w, std::size_t target_h,
                                             std::size_t target_w);
/// Binarized base-resolution mask of one query row.
BinaryMask binarize_row(std::span<const double> logits, std::size_t h, std::size_t w);

/// Softmax attention of projected queries over keys/values, before the output
/// projection. Rows whose grid row is blocked use the −1e9 sentinel.
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const BoolGrid* block);

/// One decoder layer: masked cross-attention, self-attention, FFN; each with
/// residual connection and layer normalization.
Tensor decoder_layer(const Tensor& queries, const Tensor& scale_features,
                     const Tensor& scale_keyed, const BoolGrid& cross_block,
                     const BoolGrid* self_block, const LayerParams& lp);

LayerPrediction predict(const Tensor& queries, const Tensor& pixel_embed,
                        const DecoderParams& params);

LayerOutputs full_forward(const ForwardSpec& spec, const DecoderParams& params);

/// Forward spec with only the learnable matching queries (inference configuration).
ForwardSpec matching_only_spec(const FeaturePyramid& pyr, const DecoderParams& params);

// Checkpoints -----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const DecoderParams& params);
DecoderParams parse_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params);
DecoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mpseg
