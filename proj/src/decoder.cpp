#include "mpseg/decoder.hpp"

#include <cmath>
#include <numbers>

#include "mpseg/error.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

namespace {

Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

Tensor gaussian(Rng& rng, std::size_t rows, std::size_t cols, double sd) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = sd * rng.normal();
  return Tensor::from({rows, cols}, std::move(v), true);
}

Tensor zeros_param(std::size_t n) { return Tensor::zeros({n}, true); }
Tensor ones_param(std::size_t n) { return Tensor::from({n}, std::vector<double>(n, 1.0), true); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
  fn("query_embed", p.query_embed);
  fn("class_embed", p.class_embed);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i + 1) + ".";
    fn(pre + "cross.q.w", l.cq_w);
    fn(pre + "cross.q.b", l.cq_b);
    fn(pre + "cross.k.w", l.ck_w);
    fn(pre + "cross.k.b", l.ck_b);
    fn(pre + "cross.v.w", l.cv_w);
    fn(pre + "cross.v.b", l.cv_b);
    fn(pre + "cross.o.w", l.co_w);
    fn(pre + "cross.o.b", l.co_b);
    fn(pre + "cross.ln.g", l.cln_g);
    fn(pre + "cross.ln.b", l.cln_b);
    fn(pre + "self.q.w", l.sq_w);
    fn(pre + "self.q.b", l.sq_b);
    fn(pre + "self.k.w", l.sk_w);
    fn(pre + "self.k.b", l.sk_b);
    fn(pre + "self.v.w", l.sv_w);
    fn(pre + "self.v.b", l.sv_b);
    fn(pre + "self.o.w", l.so_w);
    fn(pre + "self.o.b", l.so_b);
    fn(pre + "self.ln.g", l.sln_g);
    fn(pre + "self.ln.b", l.sln_b);
    fn(pre + "ffn.1.w", l.f1_w);
    fn(pre + "ffn.1.b", l.f1_b);
    fn(pre + "ffn.2.w", l.f2_w);
    fn(pre + "ffn.2.b", l.f2_b);
    fn(pre + "ffn.ln.g", l.fln_g);
    fn(pre + "ffn.ln.b", l.fln_b);
  }
  fn("head.ln.g", p.out_ln_g);
  fn("head.ln.b", p.out_ln_b);
  fn("head.cls.w", p.cls_w);
  fn("head.cls.b", p.cls_b);
  fn("head.mask.1.w", p.mask_w1);
  fn("head.mask.1.b", p.mask_b1);
  fn("head.mask.2.w", p.mask_w2);
  fn("head.mask.2.b", p.mask_b2);
  fn("pixel.w", p.pix_w);
  fn("pixel.b", p.pix_b);
}

}  // namespace

DecoderParams DecoderParams::init(const DecoderDims& dims, std::uint64_t seed) {
  if (dims.num_queries == 0 || dims.num_layers == 0 || dims.dim == 0 ||
      dims.num_categories == 0 || dims.ffn_dim == 0)
    throw ConfigError("decoder dimensions must be positive");
  Rng rng(mix_seed(seed, 0x64656364));
  const std::size_t d = dims.dim;
  DecoderParams p;
  p.dims = dims;
  p.query_embed = gaussian(rng, dims.num_queries, d, 1.0);
  p.class_embed = gaussian(rng, dims.num_categories, d, 1.0);
  for (std::size_t i = 0; i < dims.num_layers; ++i) {
    LayerParams l;
    l.cq_w = xavier(rng, d, d);
    l.cq_b = zeros_param(d);
    l.ck_w = xavier(rng, d, d);
    l.ck_b = zeros_param(d);
    l.cv_w = xavier(rng, d, d);
    l.cv_b = zeros_param(d);
    l.co_w = xavier(rng, d, d);
    l.co_b = zeros_param(d);
    l.cln_g = ones_param(d);
    l.cln_b = zeros_param(d);
    l.sq_w = xavier(rng, d, d);
    l.sq_b = zeros_param(d);
    l.sk_w = xavier(rng, d, d);
    l.sk_b = zeros_param(d);
    l.sv_w = xavier(rng, d, d);
    l.sv_b = zeros_param(d);
    l.so_w = xavier(rng, d, d);
    l.so_b = zeros_param(d);
    l.sln_g = ones_param(d);
    l.sln_b = zeros_param(d);
    l.f1_w = xavier(rng, d, dims.ffn_dim);
    l.f1_b = zeros_param(dims.ffn_dim);
    l.f2_w = xavier(rng, dims.ffn_dim, d);
    l.f2_b = zeros_param(d);
    l.fln_g = ones_param(d);
    l.fln_b = zeros_param(d);
    p.layers.push_back(std::move(l));
  }
  p.out_ln_g = ones_param(d);
  p.out_ln_b = zeros_param(d);
  p.cls_w = xavier(rng, d, dims.num_classes());
  p.cls_b = zeros_param(dims.num_classes());
  p.mask_w1 = xavier(rng, d, d);
  p.mask_b1 = zeros_param(d);
  p.mask_w2 = xavier(rng, d, d);
  p.mask_b2 = zeros_param(d);
  p.pix_w = xavier(rng, d, d);
  p.pix_b = zeros_param(d);
  return p;
}

std::vector<NamedTensor> DecoderParams::named() {
  std::vector<NamedTensor> out;
  visit_params(*this, [&](const std::string& n, Tensor& t) { out.push_back({n, &t}); });
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> DecoderParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  visit_params(*this, [&](const std::string& n, const Tensor& t) { out.emplace_back(n, &t); });
  return out;
}

std::size_t DecoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

// ---------------------------------------------------------------------------

std::vector<double> position_code(std::size_t h, std::size_t w, std::size_t dim, double amplitude) {
  std::vector<double> out(h * w * dim, 0.0);
  if (amplitude == 0.0) return out;
  const std::size_t half = dim / 2;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double* v = out.data() + (y * w + x) * dim;
      const double uy = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
      const double ux = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      for (std::size_t c = 0; c < half; ++c) {
        const double f = std::numbers::pi * static_cast<double>(c / 2 + 1);
        v[c] = amplitude * (c % 2 == 0 ? std::sin(f * uy) : std::cos(f * uy));
      }
      for (std::size_t c = half; c < dim; ++c) {
        const double f = std::numbers::pi * static_cast<double>((c - half) / 2 + 1);
        v[c] = amplitude * ((c - half) % 2 == 0 ? std::sin(f * ux) : std::cos(f * ux));
      }
    }
  return out;
}

PixelInputs make_pixel_inputs(const FeaturePyramid& pyr, const DecoderDims& dims) {
  PixelInputs px;
  for (std::size_t s = 0; s < kNumScales; ++s) {
    const auto& g = pyr.scales[s];
    if (g.dim != dims.dim)
      throw CompatibilityError("feature dimension " + std::to_string(g.dim) +
                               " does not match decoder dimension " + std::to_string(dims.dim));
    px.heights[s] = g.height;
    px.widths[s] = g.width;
    px.features[s] = Tensor::from({g.pixels(), g.dim}, g.values);
    auto pos = position_code(g.height, g.width, g.dim, dims.pos_scale);
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = g.values[i] + pos[i];
    px.keyed[s] = Tensor::from({g.pixels(), g.dim}, std::move(pos));
  }
  px.embed_keyed = px.keyed[kNumScales - 1];
  return px;
}

Tensor dot_mask_head(const Tensor& mlp_queries, const Tensor& pixel_embed) {
  if (mlp_queries.cols() != pixel_embed.cols())
    throw ShapeError("mask_head: query dimension " + std::to_string(mlp_queries.cols()) +
                     " does not match pixel embedding dimension " +
                     std::to_string(pixel_embed.cols()));
  return matmul_nt(mlp_queries, pixel_embed);
}

Tensor mask_head(const Tensor& queries, const Tensor& pixel_embed, const DecoderParams& p) {
  const Tensor h = relu(linear(queries, p.mask_w1, p.mask_b1));
  return dot_mask_head(linear(h, p.mask_w2, p.mask_b2), pixel_embed);
}

bool mask_on(double logit) { return 1.0 / (1.0 + std::exp(-logit)) > 0.5; }

BinaryMask binarize_row(std::span<const double> logits, std::size_t h, std::size_t w) {
  BinaryMask m(h, w);
  for (std::size_t i = 0; i < h * w; ++i)
    if (mask_on(logits[i])) m.flip(i);
  return m;
}

std::vector<BoolGrid> binarize_for_attention(const Tensor& mask_logits, std::size_t base_h,
                                             std::size_t base_w, std::size_t target_h,
                                             std::size_t target_w) {
  if (mask_logits.cols() != base_h * base_w)
    throw ShapeError("binarize_for_attention: logits do not cover the base extents");
  std::vector<BoolGrid> out;
  out.reserve(mask_logits.rows());
  const auto vals = mask_logits.values();
  for (std::size_t r = 0; r < mask_logits.rows(); ++r) {
    const auto m = binarize_row(vals.subspan(r * base_h * base_w, base_h * base_w), base_h, base_w);
    out.push_back(to_attention_block(resize_nearest(m, target_h, target_w)));
  }
  return out;
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const BoolGrid* block) {
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (block && !block->bits.empty()) scores = masked_fill(scores, *block, kBlockedLogit);
  return matmul(softmax_lastdim(scores), v);
}

Tensor decoder_layer(const Tensor& x_in, const Tensor& scale_features, const Tensor& scale_keyed,
                     const BoolGrid& cross_block, const BoolGrid* self_block,
                     const LayerParams& lp) {
  if (cross_block.rows != x_in.rows() || cross_block.cols != scale_features.rows())
    throw ShapeError("decoder_layer: cross blocking grid is " + std::to_string(cross_block.rows) +
                     "x" + std::to_string(cross_block.cols) + ", expected " +
                     std::to_string(x_in.rows()) + "x" + std::to_string(scale_features.rows()));
  if (self_block && !self_block->bits.empty() &&
      (self_block->rows != x_in.rows() || self_block->cols != x_in.rows()))
    throw ShapeError("decoder_layer: self blocking grid does not match the query count");

  Tensor x = x_in;
  {
    const Tensor q = linear(x, lp.cq_w, lp.cq_b);
    const Tensor k = linear(scale_keyed, lp.ck_w, lp.ck_b);
    const Tensor v = linear(scale_features, lp.cv_w, lp.cv_b);
    const Tensor o = linear(attend(q, k, v, &cross_block), lp.co_w, lp.co_b);
    x = layer_norm(add(x, o), lp.cln_g, lp.cln_b);
  }
  {
    const Tensor q = linear(x, lp.sq_w, lp.sq_b);
    const Tensor k = linear(x, lp.sk_w, lp.sk_b);
    const Tensor v = linear(x, lp.sv_w, lp.sv_b);
    const Tensor o = linear(attend(q, k, v, self_block), lp.so_w, lp.so_b);
    x = layer_norm(add(x, o), lp.sln_g, lp.sln_b);
  }
  {
    const Tensor h = relu(linear(x, lp.f1_w, lp.f1_b));
    const Tensor o = linear(h, lp.f2_w, lp.f2_b);
    x = layer_norm(add(x, o), lp.fln_g, lp.fln_b);
  }
  return x;
}

LayerPrediction predict(const Tensor& queries, const Tensor& pixel_embed, const DecoderParams& p) {
  const Tensor xn = layer_norm(queries, p.out_ln_g, p.out_ln_b);
  LayerPrediction out;
  out.class_logits = linear(xn, p.cls_w, p.cls_b);
  out.mask_logits = mask_head(xn, pixel_embed, p);
  return out;
}

LayerOutputs full_forward(const ForwardSpec& spec, const DecoderParams& params) {
  const auto& dims = params.dims;
  if (!spec.pyramid) throw ShapeError("full_forward: missing feature pyramid");
  const std::size_t Q = spec.queries.rows();
  if (spec.queries.ndim() != 2 || spec.queries.cols() != dims.dim)
    throw ShapeError("full_forward: queries must be Qx" + std::to_string(dims.dim));
  if (spec.num_matching > Q) throw ShapeError("full_forward: matching part exceeds query count");
  if (!spec.self_block.bits.empty() && (spec.self_block.rows != Q || spec.self_block.cols != Q))
    throw ShapeError("full_forward: self blocking grid must be QxQ");

  const PixelInputs px = make_pixel_inputs(*spec.pyramid, dims);
  const std::size_t H = px.heights.back(), W = px.widths.back();

  // Per-layer lookup: override grid (or nullptr) for every query.
  std::vector<std::vector<const BoolGrid*>> table(dims.num_layers + 1,
                                                  std::vector<const BoolGrid*>(Q, nullptr));
  for (const auto& ov : spec.overrides) {
    if (ov.layer < 1 || ov.layer > dims.num_layers)
      throw ShapeError("full_forward: override for layer " + std::to_string(ov.layer) +
                       " outside [1.." + std::to_string(dims.num_layers) + "]");
    if (ov.first_query + ov.grids.size() > Q)
      throw ShapeError("full_forward: override rows exceed the query count");
    const std::size_t s = scale_for_layer(ov.layer);
    for (std::size_t i = 0; i < ov.grids.size(); ++i) {
      const auto& g = ov.grids[i];
      if (g.rows != px.heights[s] || g.cols != px.widths[s])
        throw ShapeError("full_forward: override grid extents do not match layer scale");
      table[ov.layer][ov.first_query + i] = &g;
    }
  }

  const Tensor pixel_embed = linear(px.embed_keyed, params.pix_w, params.pix_b);
  const BoolGrid* self_block = spec.self_block.bits.empty() ? nullptr : &spec.self_block;

  LayerOutputs out;
  out.num_matching = spec.num_matching;
  out.num_mp = Q - spec.num_matching;
  out.height = H;
  out.width = W;
  out.layers.reserve(dims.num_layers + 1);

  Tensor x = spec.queries;
  out.layers.push_back(predict(x, pixel_embed, params));
  for (std::size_t layer = 1; layer <= dims.num_layers; ++layer) {
    const std::size_t s = scale_for_layer(layer);
    const std::size_t hs = px.heights[s], ws = px.widths[s], ps = hs * ws;
    const auto prev = out.layers.back().mask_logits.values();
    BoolGrid cross(Q, ps);
    for (std::size_t q = 0; q < Q; ++q) {
      BoolGrid row;
      if (const BoolGrid* ov = table[layer][q]) {
        row = *ov;
      } else {
        row = to_attention_block(
            resize_nearest(binarize_row(prev.subspan(q * H * W, H * W), H, W), hs, ws));
      }
      std::copy(row.bits.begin(), row.bits.end(), cross.bits.begin() + static_cast<std::ptrdiff_t>(q * ps));
    }
    x = decoder_layer(x, px.features[s], px.keyed[s], cross, self_block, params.layers[layer - 1]);
    out.layers.push_back(predict(x, pixel_embed, params));
  }
  return out;
}

ForwardSpec matching_only_spec(const FeaturePyramid& pyr, const DecoderParams& params) {
  ForwardSpec spec;
  spec.pyramid = &pyr;
  spec.queries = params.query_embed;
  spec.num_matching = params.dims.num_queries;
  return spec;
}

}  // namespace mpseg
