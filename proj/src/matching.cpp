#include "mpseg/matching.hpp"

#include <cmath>
#include <limits>

#include "mpseg/error.hpp"

namespace mpseg {

std::size_t Assignment::matched() const {
  std::size_t n = 0;
  for (int g : match) n += g >= 0 ? 1 : 0;
  return n;
}

namespace {

// Rows are assigned; requires n <= m. Returns column per row.
std::vector<int> hungarian_rows(std::span<const double> a, std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = static_cast<int>(j - 1);
  return col;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid_value(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

std::vector<double> class_probs(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  double mx = p[0];
  for (double v : p) mx = std::max(mx, v);
  double s = 0.0;
  for (auto& v : p) s += (v = std::exp(v - mx));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

Assignment hungarian(std::span<const double> cost, std::size_t n, std::size_t m) {
  if (cost.size() != n * m) throw ShapeError("hungarian: cost size does not match n*m");
  for (double c : cost)
    if (!std::isfinite(c)) throw NumericError("hungarian: non-finite cost entry");
  Assignment a;
  a.match.assign(n, -1);
  if (n == 0 || m == 0) return a;
  if (n <= m) {
    a.match = hungarian_rows(cost, n, m);
  } else {
    std::vector<double> t(m * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) t[j * n + i] = cost[i * m + j];
    const auto col = hungarian_rows(t, m, n);
    for (std::size_t j = 0; j < m; ++j) a.match[static_cast<std::size_t>(col[j])] = static_cast<int>(j);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (a.match[i] >= 0) a.cost += cost[i * m + static_cast<std::size_t>(a.match[i])];
  return a;
}

void LossWeights::validate() const {
  if (!(cls >= 0.0)) throw ConfigError("loss.cls must be nonnegative");
  if (!(bce >= 0.0)) throw ConfigError("loss.bce must be nonnegative");
  if (!(dice >= 0.0)) throw ConfigError("loss.dice must be nonnegative");
  if (!(no_object >= 0.0)) throw ConfigError("loss.no_object must be nonnegative");
}

MaskLossValues mask_losses(std::span<const double> logits, const BinaryMask& gt) {
  if (logits.size() != gt.pixels()) throw ShapeError("mask_losses: extents differ");
  double bce = 0.0, pt = 0.0, ps = 0.0, ts = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double t = gt[i] ? 1.0 : 0.0;
    bce += softplus(x) - x * t;
    const double p = sigmoid_value(x);
    pt += p * t;
    ps += p;
    ts += t;
  }
  const double n = static_cast<double>(logits.size());
  return {bce / n, 1.0 - (2.0 * pt + kDiceEps) / (ps + ts + kDiceEps)};
}

std::vector<double> cost_matrix(const LayerPrediction& pred, std::size_t first, std::size_t rows,
                                const Scene& scene, const LossWeights& w) {
  const std::size_t O = scene.instances.size();
  const std::size_t P = pred.mask_logits.cols();
  const std::size_t C = pred.class_logits.cols();
  const auto ml = pred.mask_logits.values();
  const auto cl = pred.class_logits.values();
  std::vector<double> out(rows * O);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t q = first + r;
    const auto logits = ml.subspan(q * P, P);
    const auto prob = class_probs(cl.subspan(q * C, C));
    double sp = 0.0, ps = 0.0;
    std::vector<double> p(P);
    for (std::size_t i = 0; i < P; ++i) {
      sp += softplus(logits[i]);
      p[i] = sigmoid_value(logits[i]);
      ps += p[i];
    }
    for (std::size_t o = 0; o < O; ++o) {
      const auto& bits = scene.instances[o].mask.bits();
      if (bits.size() != P) throw ShapeError("cost_matrix: mask extents differ");
      double xt = 0.0, pt = 0.0, ts = 0.0;
      for (std::size_t i = 0; i < P; ++i)
        if (bits[i]) {
          xt += logits[i];
          pt += p[i];
          ts += 1.0;
        }
      const double bce = (sp - xt) / static_cast<double>(P);
      const double dice = 1.0 - (2.0 * pt + kDiceEps) / (ps + ts + kDiceEps);
      out[r * O + o] = -w.cls * prob[scene.instances[o].category] + w.bce * bce + w.dice * dice;
    }
  }
  return out;
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::kPerLayerBipartite: return "per-layer-bipartite";
    case LossMode::kFixedLastLayer: return "fixed-last-layer";
    case LossMode::kConsistencyAux: return "consistency-aux";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "per-layer-bipartite") return LossMode::kPerLayerBipartite;
  if (s == "fixed-last-layer") return LossMode::kFixedLastLayer;
  if (s == "consistency-aux") return LossMode::kConsistencyAux;
  throw ConfigError("unknown loss mode '" + s + "'");
}

namespace {

struct Terms {
  Tensor loss;
  double value = 0.0;
};

// Class + mask loss for rows [first, first+rows) of one layer.
// target[r] is a GT index or -1; no_object_weight applies to -1 rows.
Terms part_loss(const LayerPrediction& pred, std::size_t first, std::size_t rows,
                const std::vector<int>& target, const Scene& scene, const LossWeights& w,
                std::size_t num_categories) {
  const Tensor cls_rows = slice_rows(pred.class_logits, first, first + rows);
  const Tensor logp = log_softmax_lastdim(cls_rows);
  std::vector<std::size_t> cls_target(rows);
  std::vector<double> weight(rows);
  double wsum = 0.0;
  std::vector<std::size_t> matched_rows;
  std::vector<std::size_t> matched_gt;
  for (std::size_t r = 0; r < rows; ++r) {
    if (target[r] >= 0) {
      const auto g = static_cast<std::size_t>(target[r]);
      cls_target[r] = scene.instances[g].category;
      weight[r] = 1.0;
      matched_rows.push_back(first + r);
      matched_gt.push_back(g);
    } else {
      cls_target[r] = num_categories;
      weight[r] = w.no_object;
    }
    wsum += weight[r];
  }
  Tensor loss = Tensor::scalar(0.0);
  if (wsum > 0.0) {
    const Tensor picked = pick_lastdim(logp, cls_target);
    const Tensor weighted = mul(picked, Tensor::from({rows}, weight));
    loss = scale(sum(weighted), -w.cls / wsum);
  }
  if (!matched_rows.empty()) {
    const std::size_t M = matched_rows.size();
    const std::size_t P = pred.mask_logits.cols();
    std::vector<double> tgt(M * P);
    std::vector<double> tsum(M, 0.0);
    for (std::size_t k = 0; k < M; ++k) {
      const auto& bits = scene.instances[matched_gt[k]].mask.bits();
      for (std::size_t i = 0; i < P; ++i) {
        tgt[k * P + i] = bits[i] ? 1.0 : 0.0;
        tsum[k] += tgt[k * P + i];
      }
    }
    const Tensor logits = gather_rows(pred.mask_logits, matched_rows);
    const Tensor bce = mean(bce_with_logits_rows(logits, tgt));
    const Tensor t = Tensor::from({M, P}, std::move(tgt));
    const Tensor p = sigmoid(logits);
    const Tensor numer = add_scalar(scale(sum_lastdim(mul(p, t)), 2.0), kDiceEps);
    const Tensor denom = add_scalar(add(sum_lastdim(p), Tensor::from({M}, tsum)), kDiceEps);
    const Tensor dice = mean(add_scalar(scale(div(numer, denom), -1.0), 1.0));
    loss = add(loss, add(scale(bce, w.bce), scale(dice, w.dice)));
  }
  return {loss, loss.item()};
}

// Mask loss of matching rows at layer i against binarized, detached layer i-1 masks.
Tensor consistency_term(const LayerPrediction& cur, const LayerPrediction& prev, std::size_t rows,
                        const LossWeights& w) {
  const std::size_t P = cur.mask_logits.cols();
  const auto pv = prev.mask_logits.values();
  std::vector<double> tgt(rows * P);
  std::vector<double> tsum(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < P; ++i) {
      tgt[r * P + i] = mask_on(pv[r * P + i]) ? 1.0 : 0.0;
      tsum[r] += tgt[r * P + i];
    }
  const Tensor logits = slice_rows(cur.mask_logits, 0, rows);
  const Tensor bce = mean(bce_with_logits_rows(logits, tgt));
  const Tensor t = Tensor::from({rows, P}, std::move(tgt));
  const Tensor p = sigmoid(logits);
  const Tensor numer = add_scalar(scale(sum_lastdim(mul(p, t)), 2.0), kDiceEps);
  const Tensor denom = add_scalar(add(sum_lastdim(p), Tensor::from({rows}, tsum)), kDiceEps);
  const Tensor dice = mean(add_scalar(scale(div(numer, denom), -1.0), 1.0));
  return add(scale(bce, w.bce), scale(dice, w.dice));
}

Assignment match_one(const LayerPrediction& pred, std::size_t rows, const Scene& scene,
                     const LossWeights& w) {
  const auto c = cost_matrix(pred, 0, rows, scene, w);
  return hungarian(c, rows, scene.instances.size());
}

}  // namespace

std::vector<Assignment> match_layers(const LayerOutputs& outputs, const Scene& scene,
                                     const LossWeights& w) {
  std::vector<Assignment> out;
  out.reserve(outputs.layers.size());
  for (const auto& pred : outputs.layers)
    out.push_back(match_one(pred, outputs.num_matching, scene, w));
  return out;
}

LossResult layer_losses(const LayerOutputs& outputs, const Scene& scene, const MPPart* mp,
                        LossMode mode, const LossWeights& w) {
  const std::size_t N = outputs.num_matching;
  const std::size_t L1 = outputs.layers.size();
  if (L1 < 2) throw ShapeError("layer_losses: need at least two layer entries");
  const bool has_mp = mp && !mp->empty();
  if (has_mp && mp->size() != outputs.num_mp)
    throw ConfigError("layer_losses: MP part size does not match the outputs");
  if (!has_mp && outputs.num_mp != 0)
    throw ConfigError("layer_losses: outputs carry MP queries but no MP part was given");
  const std::size_t K = outputs.layers[0].class_logits.cols() - 1;

  LossResult res;
  if (mode == LossMode::kFixedLastLayer) {
    const Assignment last = match_one(outputs.layers.back(), N, scene, w);
    res.matching.assign(L1, last);
  } else {
    res.matching = match_layers(outputs, scene, w);
  }

  std::vector<int> mp_target;
  if (has_mp) mp_target.assign(mp->gt_index.begin(), mp->gt_index.end());

  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < L1; ++i) {
    const auto& pred = outputs.layers[i];
    Terms m = part_loss(pred, 0, N, res.matching[i].match, scene, w, K);
    terms.push_back(m.loss);
    res.layer_matching.push_back(m.value);
    if (has_mp) {
      Terms t = part_loss(pred, N, mp->size(), mp_target, scene, w, K);
      terms.push_back(t.loss);
      res.layer_mp.push_back(t.value);
    } else {
      res.layer_mp.push_back(0.0);
    }
  }
  if (mode == LossMode::kConsistencyAux) {
    Tensor aux = Tensor::scalar(0.0);
    for (std::size_t i = 1; i < L1; ++i)
      aux = add(aux, consistency_term(outputs.layers[i], outputs.layers[i - 1], N, w));
    res.aux = aux.item();
    terms.push_back(aux);
  }
  Tensor total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  res.total = total;
  return res;
}

}  // namespace mpseg
