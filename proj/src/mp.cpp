#include "mpseg/mp.hpp"

#include <algorithm>
#include <numeric>

#include "mpseg/error.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

namespace {
constexpr std::uint64_t kLabelStream = 0x6c6162656cULL;
constexpr std::uint64_t kMaskStream = 0x6d61736bULL;
}  // namespace

void MPConfig::validate(std::size_t num_layers) const {
  if (num_queries < 1) throw ConfigError("mp.num_queries must be at least 1");
  if (!(lambda_p >= 0.0 && lambda_p <= 1.0)) throw ConfigError("mp.lambda_p must lie in [0,1]");
  if (!(lambda_l >= 0.0 && lambda_l <= 1.0)) throw ConfigError("mp.lambda_l must lie in [0,1]");
  noise.validate();
  if (layers)
    for (auto l : *layers)
      if (l < 1 || l > num_layers)
        throw ConfigError("mp.layers entry " + std::to_string(l) + " outside [1.." +
                          std::to_string(num_layers) + "]");
}

std::vector<std::size_t> MPConfig::resolved_layers(std::size_t num_layers) const {
  std::vector<std::size_t> out;
  if (!layers) {
    out.resize(num_layers);
    std::iota(out.begin(), out.end(), std::size_t{1});
    return out;
  }
  out = *layers;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t dynamic_groups(std::size_t n_q, std::size_t n_o) {
  if (n_o == 0) return 0;
  if (n_o > n_q) return 1;
  return n_q / n_o;
}

MPPart build_mp_part(const Scene& scene, const FeaturePyramid& pyramid,
                     const DecoderParams& params, const MPConfig& cfg, std::uint64_t seed) {
  const auto& dims = params.dims;
  cfg.validate(dims.num_layers);
  MPPart part;
  const std::size_t n_o = scene.instances.size();
  part.num_groups = dynamic_groups(cfg.num_queries, n_o);
  if (part.num_groups == 0) return part;
  part.group_size = std::min(n_o, cfg.num_queries);

  const std::size_t K = dims.num_categories;
  NoiseSpec noise = cfg.noise;
  noise.lambda_p = cfg.lambda_p;
  for (std::size_t g = 0; g < part.num_groups; ++g) {
    for (std::size_t i = 0; i < part.group_size; ++i) {
      const std::size_t c = scene.instances[i].category;
      std::size_t used = c;
      Rng rng(mix_seed(seed, kLabelStream, g, i));
      if (K > 1 && rng.uniform01() < cfg.lambda_l) {
        const std::size_t other = static_cast<std::size_t>(rng.below(K - 1));
        used = other >= c ? other + 1 : other;
      }
      part.group_of.push_back(g);
      part.gt_index.push_back(i);
      part.true_category.push_back(c);
      part.query_category.push_back(used);
    }
  }
  part.queries = gather_rows(params.class_embed, part.query_category);

  const std::size_t M = part.size();
  for (std::size_t layer : cfg.resolved_layers(dims.num_layers)) {
    const auto& grid = pyramid.scales[scale_for_layer(layer)];
    LayerOverride ov;
    ov.layer = layer;
    ov.first_query = dims.num_queries;
    ov.grids.reserve(M);
    for (std::size_t q = 0; q < M; ++q) {
      const BinaryMask& gt = scene.instances[part.gt_index[q]].mask;
      const std::uint64_t s = mix_seed(mix_seed(seed, kMaskStream, layer, 0), part.group_of[q],
                                       part.gt_index[q], 0);
      const BinaryMask noised = apply_noise(gt, noise, s);
      ov.grids.push_back(to_attention_block(resize_nearest(noised, grid.height, grid.width)));
    }
    part.overrides.push_back(std::move(ov));
  }
  return part;
}

BoolGrid build_self_block(std::size_t num_matching, const std::vector<std::size_t>& group_sizes) {
  const std::size_t total =
      num_matching + std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  BoolGrid g(total, total);
  std::vector<std::size_t> group(total, 0);
  std::size_t at = num_matching;
  for (std::size_t k = 0; k < group_sizes.size(); ++k)
    for (std::size_t j = 0; j < group_sizes[k]; ++j) group[at++] = k + 1;
  for (std::size_t r = 0; r < total; ++r)
    for (std::size_t c = num_matching; c < total; ++c)
      if (group[r] != group[c]) g.set(r, c, true);
  return g;
}

ForwardSpec training_spec(const FeaturePyramid& pyramid, const DecoderParams& params,
                          const MPPart* mp) {
  if (!mp || mp->empty()) return matching_only_spec(pyramid, params);
  ForwardSpec spec;
  spec.pyramid = &pyramid;
  const Tensor parts[] = {params.query_embed, mp->queries};
  spec.queries = concat_rows(parts);
  spec.num_matching = params.dims.num_queries;
  spec.overrides = mp->overrides;
  spec.self_block = build_self_block(spec.num_matching, mp->group_sizes());
  return spec;
}

}  // namespace mpseg
