#include "mpseg/infer.hpp"

#include <cmath>

#include "mpseg/kernels.hpp"

namespace mpseg {

namespace {

using Mat = std::vector<double>;

struct View {
  std::size_t rows, cols;
  Mat data;
};

View linear(const View& x, const Tensor& w, const Tensor& b) {
  const std::size_t n = w.dim(1);
  View out{x.rows, n, Mat(x.rows * n)};
  kernels::gemm_nn(x.rows, x.cols, n, x.data, w.values(), out.data, false);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = out.data[i] + b.at(i % n);
  return out;
}

View layer_norm(const View& x, const Tensor& g, const Tensor& b) {
  View out{x.rows, x.cols, Mat(x.data.size())};
  Mat rstd(x.rows);
  kernels::normalize_rows(x.rows, x.cols, x.data, 1e-5, out.data, rstd);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = out.data[i] * g.at(i % x.cols) + b.at(i % x.cols);
  return out;
}

void relu_inplace(View& x) {
  for (auto& v : x.data) v = v > 0.0 ? v : 0.0;
}

View add(const View& a, const View& b) {
  View out{a.rows, a.cols, Mat(a.data.size())};
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

View attend(const View& q, const View& k, const View& v, const BoolGrid* block) {
  View scores{q.rows, k.rows, Mat(q.rows * k.rows)};
  kernels::gemm_nt(q.rows, q.cols, k.rows, q.data, k.data, scores.data, false);
  const double c = 1.0 / std::sqrt(static_cast<double>(q.cols));
  for (auto& s : scores.data) s *= c;
  if (block)
    for (std::size_t i = 0; i < scores.data.size(); ++i)
      if (block->bits[i]) scores.data[i] = kBlockedLogit;
  Mat probs(scores.data.size());
  kernels::softmax_rows(scores.rows, scores.cols, scores.data, probs);
  View out{q.rows, v.cols, Mat(q.rows * v.cols)};
  kernels::gemm_nn(q.rows, k.rows, v.cols, probs, v.data, out.data, false);
  return out;
}

LayerPrediction heads(const View& x, const View& pixel_embed, const DecoderParams& p) {
  const View xn = layer_norm(x, p.out_ln_g, p.out_ln_b);
  const View cls = linear(xn, p.cls_w, p.cls_b);
  View h = linear(xn, p.mask_w1, p.mask_b1);
  relu_inplace(h);
  const View m = linear(h, p.mask_w2, p.mask_b2);
  Mat logits(m.rows * pixel_embed.rows);
  kernels::gemm_nt(m.rows, m.cols, pixel_embed.rows, m.data, pixel_embed.data, logits, false);
  return {Tensor::from({m.rows, pixel_embed.rows}, std::move(logits)),
          Tensor::from({cls.rows, cls.cols}, cls.data)};
}

}  // namespace

LayerOutputs inference_forward(const FeaturePyramid& pyramid, const DecoderParams& params) {
  const auto& dims = params.dims;
  const PixelInputs px = make_pixel_inputs(pyramid, dims);
  const std::size_t H = px.heights.back(), W = px.widths.back();
  const std::size_t N = dims.num_queries;

  auto view_of = [](const Tensor& t) {
    return View{t.rows(), t.cols(), Mat(t.values().begin(), t.values().end())};
  };
  const View pixel_embed = linear(view_of(px.embed_keyed), params.pix_w, params.pix_b);

  LayerOutputs out;
  out.num_matching = N;
  out.height = H;
  out.width = W;
  View x = view_of(params.query_embed);
  out.layers.push_back(heads(x, pixel_embed, params));
  for (std::size_t layer = 1; layer <= dims.num_layers; ++layer) {
    const std::size_t s = scale_for_layer(layer);
    const auto& lp = params.layers[layer - 1];
    const auto block = binarize_for_attention(out.layers.back().mask_logits, H, W,
                                              px.heights[s], px.widths[s]);
    const std::size_t ps = px.heights[s] * px.widths[s];
    BoolGrid cross(N, ps);
    for (std::size_t q = 0; q < N; ++q)
      std::copy(block[q].bits.begin(), block[q].bits.end(),
                cross.bits.begin() + static_cast<std::ptrdiff_t>(q * ps));

    const View feat = view_of(px.features[s]);
    const View keyed = view_of(px.keyed[s]);
    {
      const View q = linear(x, lp.cq_w, lp.cq_b);
      const View k = linear(keyed, lp.ck_w, lp.ck_b);
      const View v = linear(feat, lp.cv_w, lp.cv_b);
      const View o = linear(attend(q, k, v, &cross), lp.co_w, lp.co_b);
      x = layer_norm(add(x, o), lp.cln_g, lp.cln_b);
    }
    {
      const View q = linear(x, lp.sq_w, lp.sq_b);
      const View k = linear(x, lp.sk_w, lp.sk_b);
      const View v = linear(x, lp.sv_w, lp.sv_b);
      const View o = linear(attend(q, k, v, nullptr), lp.so_w, lp.so_b);
      x = layer_norm(add(x, o), lp.sln_g, lp.sln_b);
    }
    {
      View h = linear(x, lp.f1_w, lp.f1_b);
      relu_inplace(h);
      const View o = linear(h, lp.f2_w, lp.f2_b);
      x = layer_norm(add(x, o), lp.fln_g, lp.fln_b);
    }
    out.layers.push_back(heads(x, pixel_embed, params));
  }
  return out;
}

}  // namespace mpseg
