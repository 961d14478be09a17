#include "mpseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mpseg/decoder.hpp"
#include "mpseg/matching.hpp"
#include "mpseg/mp.hpp"
#include "mpseg/rng.hpp"
#include "mpseg/synth.hpp"

namespace mpseg {

GradCheckResult gradient_check(const std::string& name, std::vector<Tensor> inputs,
                               const std::function<Tensor()>& loss, double eps, double tol) {
  for (auto& t : inputs) t.zero_grad();
  backward(loss());
  GradCheckResult r{name, 0.0, 0, true};
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic =
        t.grad().empty() ? std::vector<double>(t.size(), 0.0)
                         : std::vector<double>(t.grad().begin(), t.grad().end());
    auto vals = t.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + eps;
      const double up = loss().item();
      vals[i] = keep - eps;
      const double down = loss().item();
      vals[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    r.entries += vals.size();
    t.zero_grad();
  }
  r.rel_err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  r.pass = r.rel_err < tol;
  return r;
}

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Reduces any output to a scalar through fixed random weights.
Tensor project(const Tensor& out, const std::vector<double>& weights) {
  return sum(mul(out, Tensor::from(out.shape(), weights)));
}

struct Suite {
  Rng rng;
  std::vector<GradCheckResult> results;

  // f maps inputs to an arbitrary-shape output.
  void op(const std::string& name, std::vector<Tensor> in,
          const std::function<Tensor(const std::vector<Tensor>&)>& f) {
    const Tensor probe = f(in);
    const auto w = random_values(rng, probe.size(), -1.0, 1.0);
    results.push_back(gradient_check(name, in, [&] { return project(f(in), w); }));
  }
};

}  // namespace

std::vector<GradCheckResult> run_grad_suite(std::uint64_t seed) {
  Suite s{Rng(mix_seed(seed, 0x67726164ULL)), {}};
  auto& rng = s.rng;
  using V = std::vector<Tensor>;

  s.op("matmul", {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})},
       [](const V& x) { return matmul(x[0], x[1]); });
  s.op("matmul_nt", {random_tensor(rng, {3, 4}), random_tensor(rng, {5, 4})},
       [](const V& x) { return matmul_nt(x[0], x[1]); });
  s.op("add", {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
       [](const V& x) { return add(x[0], x[1]); });
  s.op("add_row_broadcast", {random_tensor(rng, {3, 4}), random_tensor(rng, {4})},
       [](const V& x) { return add(x[0], x[1]); });
  s.op("sub", {random_tensor(rng, {3, 4}), random_tensor(rng, {4})},
       [](const V& x) { return sub(x[0], x[1]); });
  s.op("mul", {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
       [](const V& x) { return mul(x[0], x[1]); });
  s.op("mul_row_broadcast", {random_tensor(rng, {3, 4}), random_tensor(rng, {4})},
       [](const V& x) { return mul(x[0], x[1]); });
  s.op("div", {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3}, 0.5, 2.0)},
       [](const V& x) { return div(x[0], x[1]); });
  s.op("scale", {random_tensor(rng, {2, 3})}, [](const V& x) { return scale(x[0], -1.7); });
  s.op("add_scalar", {random_tensor(rng, {2, 3})}, [](const V& x) { return add_scalar(x[0], 0.3); });
  s.op("relu", {random_tensor(rng, {3, 5})}, [](const V& x) { return relu(x[0]); });
  s.op("sigmoid", {random_tensor(rng, {3, 5})}, [](const V& x) { return sigmoid(x[0]); });
  s.op("softmax_lastdim", {random_tensor(rng, {3, 5})}, [](const V& x) { return softmax_lastdim(x[0]); });
  s.op("log_softmax_lastdim", {random_tensor(rng, {3, 5})},
       [](const V& x) { return log_softmax_lastdim(x[0]); });
  s.op("layer_norm", {random_tensor(rng, {3, 6}), random_tensor(rng, {6}), random_tensor(rng, {6})},
       [](const V& x) { return layer_norm(x[0], x[1], x[2]); });
  {
    BoolGrid block(3, 4);
    for (std::size_t i = 0; i < block.bits.size(); ++i) block.bits[i] = (i * 7 % 3) == 0;
    s.op("masked_fill", {random_tensor(rng, {3, 4})},
         [block](const V& x) { return masked_fill(x[0], block, -30.0); });
  }
  s.op("sum", {random_tensor(rng, {3, 4})}, [](const V& x) { return sum(x[0]); });
  s.op("mean", {random_tensor(rng, {3, 4})}, [](const V& x) { return mean(x[0]); });
  s.op("sum_lastdim", {random_tensor(rng, {3, 4})}, [](const V& x) { return sum_lastdim(x[0]); });
  s.op("pick_lastdim", {random_tensor(rng, {3, 4})}, [](const V& x) {
    const std::vector<std::size_t> idx{2, 0, 3};
    return pick_lastdim(x[0], idx);
  });
  s.op("concat_rows", {random_tensor(rng, {2, 3}), random_tensor(rng, {1, 3})},
       [](const V& x) { return concat_rows(x); });
  s.op("gather_rows", {random_tensor(rng, {4, 3})}, [](const V& x) {
    const std::vector<std::size_t> idx{3, 1, 1, 0};
    return gather_rows(x[0], idx);
  });
  s.op("slice_rows", {random_tensor(rng, {4, 3})}, [](const V& x) { return slice_rows(x[0], 1, 3); });
  s.op("reshape", {random_tensor(rng, {2, 6})}, [](const V& x) { return x[0].reshape({3, 4}); });
  {
    const auto targets = random_values(rng, 12, 0.0, 1.0);
    s.op("bce_with_logits_rows", {random_tensor(rng, {3, 4})},
         [targets](const V& x) { return bce_with_logits_rows(x[0], targets); });
  }
  {
    BoolGrid block(3, 5);
    block.set(0, 1, true);
    block.set(0, 4, true);
    block.set(2, 0, true);
    s.op("attend", {random_tensor(rng, {3, 4}), random_tensor(rng, {5, 4}), random_tensor(rng, {5, 4})},
         [block](const V& x) { return attend(x[0], x[1], x[2], &block); });
  }

  // Decoder pieces on a small configuration.
  DecoderDims dims;
  dims.num_queries = 3;
  dims.num_layers = 2;
  dims.dim = 6;
  dims.num_categories = 2;
  dims.ffn_dim = 8;
  {
    DecoderParams p = DecoderParams::init(dims, mix_seed(seed, 1));
    const Tensor pix = Tensor::from({5, 6}, random_values(rng, 30, -1.0, 1.0));
    const Tensor q = random_tensor(rng, {3, 6});
    V in{q, p.mask_w1, p.mask_b1, p.mask_w2, p.mask_b2};
    s.op("mask_head", in, [&p, pix](const V& x) { return mask_head(x[0], pix, p); });
  }
  {
    DecoderParams p = DecoderParams::init(dims, mix_seed(seed, 2));
    auto& lp = p.layers[0];
    const Tensor feat = Tensor::from({4, 6}, random_values(rng, 24, -1.0, 1.0));
    const Tensor keyed = Tensor::from({4, 6}, random_values(rng, 24, -1.0, 1.0));
    BoolGrid cross(3, 4);
    cross.set(0, 0, true);
    cross.set(1, 3, true);
    BoolGrid self(3, 3);
    self.set(0, 2, true);
    const Tensor q = random_tensor(rng, {3, 6});
    V in{q, lp.cq_w, lp.ck_b, lp.cv_w, lp.co_w, lp.cln_g, lp.sq_w, lp.sk_w, lp.sv_b, lp.so_w,
         lp.sln_b, lp.f1_w, lp.f1_b, lp.f2_w, lp.fln_g};
    s.op("decoder_layer", in, [&lp, feat, keyed, cross, self](const V& x) {
      return decoder_layer(x[0], feat, keyed, cross, &self, lp);
    });
  }
  {
    // End-to-end: two layers, 8×8 scene, matching part plus an MP part.
    SynthConfig sc;
    sc.num_scenes = 1;
    sc.num_categories = 2;
    sc.height = 8;
    sc.width = 8;
    sc.feature_dim = 6;
    sc.min_instances = 2;
    sc.max_instances = 2;
    sc.rect_min = 2;
    sc.rect_max = 4;
    sc.disk_min = 1;
    sc.disk_max = 2;
    sc.seed = seed;
    const Scene scene = generate_scene(sc, 0);
    const FeaturePyramid pyr = synth_features(scene, sc);
    DecoderParams p = DecoderParams::init(dims, mix_seed(seed, 3));
    MPConfig mc;
    mc.enabled = true;
    mc.num_queries = 4;
    mc.lambda_p = 0.2;
    mc.lambda_l = 0.0;
    V in;
    for (auto& [name, t] : p.named()) {
      (void)name;
      in.push_back(*t);
    }
    const LossWeights w;
    auto loss = [&]() {
      const MPPart mp = build_mp_part(scene, pyr, p, mc, seed);
      const LayerOutputs out = full_forward(training_spec(pyr, p, &mp), p);
      return layer_losses(out, scene, &mp, LossMode::kPerLayerBipartite, w).total;
    };
    s.results.push_back(gradient_check("end_to_end_two_layer", in, loss));
  }
  return s.results;
}

}  // namespace mpseg
