#include "mpseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mpseg/error.hpp"

namespace mpseg {

MatchingVectors matching_vectors(const std::vector<Assignment>& per_layer) {
  MatchingVectors v;
  v.reserve(per_layer.size());
  for (const auto& a : per_layer) v.push_back(a.match);
  return v;
}

std::vector<double> miou_layerwise(const LayerOutputs& outputs, std::size_t first,
                                   std::size_t rows) {
  const std::size_t H = outputs.height, W = outputs.width, P = H * W;
  if (outputs.layers.size() < 2) throw ShapeError("miou_layerwise: need at least two layers");
  std::vector<double> out;
  if (rows == 0) return std::vector<double>(outputs.layers.size() - 1, 0.0);
  std::vector<BinaryMask> prev(rows);
  for (std::size_t r = 0; r < rows; ++r)
    prev[r] = binarize_row(outputs.layers[0].mask_logits.values().subspan((first + r) * P, P), H, W);
  for (std::size_t i = 1; i < outputs.layers.size(); ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      BinaryMask cur =
          binarize_row(outputs.layers[i].mask_logits.values().subspan((first + r) * P, P), H, W);
      s += iou(prev[r], cur);
      prev[r] = std::move(cur);
    }
    out.push_back(s / static_cast<double>(rows));
  }
  return out;
}

std::vector<double> miou_layerwise(const LayerOutputs& outputs) {
  return miou_layerwise(outputs, 0, outputs.num_matching);
}

std::vector<double> util_layerwise(const MatchingVectors& v, std::size_t num_gt) {
  if (num_gt == 0) throw std::invalid_argument("util_layerwise: no GT instances");
  if (v.empty()) return {};
  const auto& last = v.back();
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& vi : v) {
    if (vi.size() != last.size()) throw ShapeError("util_layerwise: query counts differ");
    std::size_t hits = 0;
    for (std::size_t n = 0; n < vi.size(); ++n) hits += (vi[n] == last[n] && vi[n] != -1) ? 1 : 0;
    out.push_back(static_cast<double>(hits) / static_cast<double>(num_gt));
  }
  return out;
}

double util_mp_hard(const MPPart& mp) {
  if (mp.empty()) throw std::invalid_argument("util_mp_hard: empty MP part");
  // The assignment is the seeding map at every layer, so each layer agrees with the last.
  MatchingVectors v(2);
  for (auto g : mp.gt_index) {
    v[0].push_back(static_cast<int>(g));
    v[1].push_back(static_cast<int>(g));
  }
  return util_layerwise(v, mp.size()).front();
}

std::vector<double> util_mp_bipartite(const LayerOutputs& outputs, const Scene& scene,
                                      const MPPart& mp, const LossWeights& w) {
  if (mp.empty()) throw std::invalid_argument("util_mp_bipartite: empty MP part");
  Scene used = scene;
  used.instances.resize(mp.group_size);
  const std::size_t L1 = outputs.layers.size();
  std::vector<double> acc(L1, 0.0);
  for (std::size_t g = 0; g < mp.num_groups; ++g) {
    const std::size_t first = outputs.num_matching + g * mp.group_size;
    MatchingVectors v;
    for (const auto& pred : outputs.layers) {
      const auto c = cost_matrix(pred, first, mp.group_size, used, w);
      v.push_back(hungarian(c, mp.group_size, mp.group_size).match);
    }
    const auto u = util_layerwise(v, mp.group_size);
    for (std::size_t i = 0; i < L1; ++i) acc[i] += u[i];
  }
  for (auto& a : acc) a /= static_cast<double>(mp.num_groups);
  return acc;
}

// ---------------------------------------------------------------------------

std::vector<Detection> detections_from(const LayerPrediction& pred, std::size_t rows,
                                       std::size_t height, std::size_t width,
                                       std::size_t scene_pos) {
  const std::size_t P = height * width;
  const std::size_t C = pred.class_logits.cols();
  const auto ml = pred.mask_logits.values();
  const auto cl = pred.class_logits.values();
  std::vector<Detection> out;
  for (std::size_t q = 0; q < rows; ++q) {
    const auto logits = cl.subspan(q * C, C);
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    std::size_t best = 0;
    for (std::size_t c = 1; c + 1 < C; ++c)
      if (logits[c] > logits[best]) best = c;
    const double p_cls = std::exp(logits[best] - mx) / z;

    const auto m = ml.subspan(q * P, P);
    BinaryMask mask = binarize_row(m, height, width);
    double psum = 0.0;
    std::size_t area = 0;
    for (std::size_t i = 0; i < P; ++i)
      if (mask[i]) {
        psum += 1.0 / (1.0 + std::exp(-m[i]));
        ++area;
      }
    if (area == 0) continue;
    out.push_back({scene_pos, q, best, p_cls * psum / static_cast<double>(area), std::move(mask)});
  }
  return out;
}

double average_precision(const std::vector<Detection>& dets, const std::vector<Scene>& scenes,
                         std::size_t num_categories, double iou_threshold) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t cat = 0; cat < num_categories; ++cat) {
    std::size_t num_gt = 0;
    std::vector<std::vector<char>> taken(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      taken[s].assign(scenes[s].instances.size(), 0);
      for (const auto& inst : scenes[s].instances) num_gt += inst.category == cat ? 1 : 0;
    }
    if (num_gt == 0) continue;
    std::vector<const Detection*> ranked;
    for (const auto& d : dets)
      if (d.category == cat) ranked.push_back(&d);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Detection* a, const Detection* b) {
      if (a->score != b->score) return a->score > b->score;
      if (a->scene != b->scene) return a->scene < b->scene;
      return a->query < b->query;
    });
    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const Detection* d : ranked) {
      const auto& inst = scenes.at(d->scene).instances;
      double best_iou = iou_threshold;
      int best = -1;
      for (std::size_t g = 0; g < inst.size(); ++g) {
        if (inst[g].category != cat || taken[d->scene][g]) continue;
        const double v = iou(d->mask, inst[g].mask);
        if (v >= best_iou) {
          best_iou = v;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) {
        taken[d->scene][static_cast<std::size_t>(best)] = 1;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    }
    // Monotone precision envelope, then sample at 101 recall points.
    for (std::size_t i = precision.size(); i-- > 1;)
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    std::size_t j = 0;
    for (int r = 0; r <= 100; ++r) {
      const double rr = r / 100.0;
      while (j < recall.size() && recall[j] < rr - 1e-12) ++j;
      if (j < recall.size()) ap += precision[j];
    }
    total += ap / 101.0;
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

ApResult ap_lite(const std::vector<Detection>& dets, const std::vector<Scene>& scenes,
                 std::size_t num_categories) {
  return {average_precision(dets, scenes, num_categories, 0.5),
          average_precision(dets, scenes, num_categories, 0.75)};
}

// ---------------------------------------------------------------------------

namespace {

double dot(const RefinementInput& in, std::size_t a, std::size_t b) {
  const double* x = in.features.data() + a * in.dim;
  const double* y = in.features.data() + b * in.dim;
  double s = 0.0;
  for (std::size_t k = 0; k < in.dim; ++k) s += x[k] * y[k];
  return s;
}

bool labeled(int l) { return l == 0 || l == 1; }

void check_input(const RefinementInput& in) {
  const std::size_t n = in.size();
  if (in.features.size() != n * in.dim || in.in_m0.size() != n || in.weight.size() != n)
    throw ShapeError("refinement: inconsistent input sizes");
  for (double w : in.weight)
    if (!(w >= 0.0)) throw std::invalid_argument("refinement: weights must be nonnegative");
}

}  // namespace

std::vector<double> refinement_scores(const RefinementInput& in) {
  check_input(in);
  const std::size_t n = in.size();
  std::vector<double> s(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (in.in_m0[i]) s[k] += in.weight[i] * dot(in, i, k);
  return s;
}

bool separating_threshold_exists(const RefinementInput& in) {
  const auto s = refinement_scores(in);
  std::vector<std::pair<double, int>> cand;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t k = 0; k < in.size(); ++k)
    if (labeled(in.label[k])) {
      cand.emplace_back(s[k], in.label[k]);
      (in.label[k] == 0 ? n0 : n1)++;
    }
  if (n0 == 0 || n1 == 0) return true;
  std::sort(cand.begin(), cand.end());
  // Threshold at each candidate: C₁ scores ≤ τ, C₀ scores > τ.
  for (const auto& [tau, lab] : cand) {
    (void)lab;
    bool ok = true;
    for (const auto& [v, l] : cand) {
      if ((l == 0 && !(v > tau)) || (l == 1 && !(v <= tau))) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

RefinementBounds refinement_bounds(const RefinementInput& in) {
  check_input(in);
  const std::size_t n = in.size();
  RefinementBounds b;
  bool m0c0 = false, m0c1 = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in.in_m0[i]) continue;
    if (!labeled(in.label[i])) throw std::invalid_argument("refinement: M0 holds an unlabeled feature");
    if (in.label[i] == 0) {
      m0c0 = true;
      b.sum_alpha += in.weight[i];
    } else if (in.label[i] == 1) {
      m0c1 = true;
      b.sum_beta += in.weight[i];
    }
  }
  if (!m0c0 || !m0c1) throw std::invalid_argument("refinement: M0 must intersect both categories");

  const double inf = std::numeric_limits<double>::infinity();
  b.T0 = inf;
  b.T1 = -inf;
  b.t0 = inf;
  b.t1 = -inf;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in.in_m0[i] || !labeled(in.label[i])) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (!labeled(in.label[k])) continue;
      const double v = dot(in, i, k);
      if (in.label[i] == in.label[k]) {
        b.T0 = std::min(b.T0, v);
        b.T1 = std::max(b.T1, v);
      } else {
        b.t0 = std::min(b.t0, v);
        b.t1 = std::max(b.t1, v);
      }
    }
  }
  b.weight_ratio = b.sum_alpha > 0.0 ? b.sum_beta / b.sum_alpha : inf;
  const double num = b.T0 - b.t1, den = b.T1 - b.t0;
  b.ratio_bound = den > 0.0 ? num / den : (num > 0.0 ? inf : -inf);
  b.condition = b.sum_alpha * num > b.sum_beta * den;
  const double lo = b.t1 * b.sum_alpha + b.T1 * b.sum_beta;
  const double hi = b.T0 * b.sum_alpha + b.t0 * b.sum_beta;
  if (lo < hi) b.interval = std::make_pair(lo, hi);
  b.separable = separating_threshold_exists(in);
  if (b.condition && b.T0 > b.t1)
    b.status = "separated";
  else if (b.T0 <= b.t1)
    b.status = "partial-separation";
  else
    b.status = "no-guarantee";
  return b;
}

WeightRatio unbiased_weight_ratio(std::span<const double> alpha, std::span<const double> beta) {
  double sa = 0.0, sb = 0.0;
  for (double a : alpha) sa += a;
  for (double x : beta) sb += x;
  return {sa > 0.0 ? sb / sa : std::numeric_limits<double>::infinity(),
          alpha.empty() ? std::numeric_limits<double>::infinity()
                        : static_cast<double>(beta.size()) / static_cast<double>(alpha.size())};
}

}  // namespace mpseg
