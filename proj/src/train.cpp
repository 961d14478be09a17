#include "mpseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "mpseg/error.hpp"
#include "mpseg/infer.hpp"
#include "mpseg/kernels.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

using nlohmann::json;

namespace {

struct VariantName {
  Variant v;
  const char* name;
};
constexpr VariantName kVariants[] = {
    {Variant::kBaseline, "baseline"},
    {Variant::kMpFirstLayer, "mp-first-layer"},
    {Variant::kMpFirst3, "mp-first-3"},
    {Variant::kMpAllLayers, "mp-all-layers"},
    {Variant::kMpAllNoises, "mp-all+noises"},
    {Variant::kNaiveFixedMatching, "naive-fixed-matching"},
    {Variant::kNaiveAuxLoss, "naive-aux-loss"},
};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read_number(const json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(where + "." + key + ": expected a non-negative integer");
  } else {
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  }
  dst = v.get<T>();
}

bool variant_uses_mp(Variant v) {
  return v == Variant::kMpFirstLayer || v == Variant::kMpFirst3 || v == Variant::kMpAllLayers ||
         v == Variant::kMpAllNoises;
}

LossMode variant_loss_mode(Variant v) {
  if (v == Variant::kNaiveFixedMatching) return LossMode::kFixedLastLayer;
  if (v == Variant::kNaiveAuxLoss) return LossMode::kConsistencyAux;
  return LossMode::kPerLayerBipartite;
}

json dims_to_json(const DecoderDims& d) {
  return {{"num_queries", d.num_queries}, {"num_layers", d.num_layers}, {"dim", d.dim},
          {"ffn_dim", d.ffn_dim},         {"pos_scale", d.pos_scale}};
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& e : kVariants)
    if (e.v == v) return e.name;
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "mp-all-layers+noises") return Variant::kMpAllNoises;
  for (const auto& e : kVariants)
    if (s == e.name) return e.v;
  throw ConfigError("unknown variant '" + s + "'");
}

std::vector<std::string> variant_names() {
  std::vector<std::string> out;
  for (const auto& e : kVariants) out.emplace_back(e.name);
  return out;
}

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const std::optional<std::string>& variant) {
  check_keys(j, {"variant", "dataset", "synth", "decoder", "loss", "loss_mode", "mp", "train", "seed", "out"},
             "config");
  RunConfig c;
  if (variant) {
    c.variant = variant_from_string(*variant);
  } else if (j.contains("variant")) {
    if (!j["variant"].is_string()) throw ConfigError("config.variant: expected a string");
    c.variant = variant_from_string(j["variant"].get<std::string>());
  }
  if (j.contains("dataset")) {
    if (!j["dataset"].is_string()) throw ConfigError("config.dataset: expected a path string");
    c.dataset = j["dataset"].get<std::string>();
  }
  if (j.contains("synth")) c.synth = SynthConfig::from_json(j["synth"]);
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ConfigError("config.out: expected a path string");
    c.out = j["out"].get<std::string>();
  }
  read_number(j, "seed", c.seed, "config");

  if (j.contains("decoder")) {
    const auto& d = j["decoder"];
    check_keys(d, {"num_queries", "num_layers", "dim", "ffn_dim", "pos_scale"}, "decoder");
    read_number(d, "num_queries", c.decoder.num_queries, "decoder");
    read_number(d, "num_layers", c.decoder.num_layers, "decoder");
    read_number(d, "dim", c.decoder.dim, "decoder");
    read_number(d, "ffn_dim", c.decoder.ffn_dim, "decoder");
    read_number(d, "pos_scale", c.decoder.pos_scale, "decoder");
  }
  c.decoder.num_categories = c.synth.num_categories;

  if (j.contains("loss")) {
    const auto& l = j["loss"];
    check_keys(l, {"cls", "bce", "dice", "no_object"}, "loss");
    read_number(l, "cls", c.loss.cls, "loss");
    read_number(l, "bce", c.loss.bce, "loss");
    read_number(l, "dice", c.loss.dice, "loss");
    read_number(l, "no_object", c.loss.no_object, "loss");
  }

  std::optional<bool> mp_enabled;
  if (j.contains("mp")) {
    const auto& m = j["mp"];
    check_keys(m, {"enabled", "num_queries", "lambda_p", "lambda_l", "layers", "noise", "scale_min", "scale_max"},
               "mp");
    if (m.contains("enabled")) {
      if (!m["enabled"].is_boolean()) throw ConfigError("mp.enabled: expected a boolean");
      mp_enabled = m["enabled"].get<bool>();
    }
    read_number(m, "num_queries", c.mp.num_queries, "mp");
    read_number(m, "lambda_p", c.mp.lambda_p, "mp");
    read_number(m, "lambda_l", c.mp.lambda_l, "mp");
    read_number(m, "scale_min", c.mp.noise.scale_min, "mp");
    read_number(m, "scale_max", c.mp.noise.scale_max, "mp");
    if (m.contains("noise")) {
      if (!m["noise"].is_string()) throw ConfigError("mp.noise: expected a string");
      try {
        c.mp.noise.kind = noise_kind_from_string(m["noise"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("mp.noise: ") + e.what());
      }
    }
    if (m.contains("layers")) {
      const auto& ls = m["layers"];
      if (ls.is_string() && ls.get<std::string>() == "all") {
        c.mp.layers.reset();
      } else if (ls.is_array()) {
        std::vector<std::size_t> v;
        for (const auto& e : ls) {
          if (!e.is_number_integer() || e.get<long long>() < 1)
            throw ConfigError("mp.layers: expected positive layer numbers");
          v.push_back(e.get<std::size_t>());
        }
        c.mp.layers = v;
      } else {
        throw ConfigError("mp.layers: expected \"all\" or an array of layers");
      }
    }
  }

  // Variant settings.
  const bool uses_mp = variant_uses_mp(c.variant);
  if (mp_enabled && *mp_enabled != uses_mp)
    throw ConfigError("mp.enabled=" + std::string(*mp_enabled ? "true" : "false") +
                      " contradicts variant " + to_string(c.variant));
  c.mp.enabled = uses_mp;
  switch (c.variant) {
    case Variant::kMpFirstLayer: c.mp.layers = std::vector<std::size_t>{1}; break;
    case Variant::kMpFirst3: c.mp.layers = std::vector<std::size_t>{1, 2, 3}; break;
    case Variant::kMpAllLayers:
    case Variant::kMpAllNoises: c.mp.layers.reset(); break;
    default: break;
  }
  if (uses_mp && c.variant != Variant::kMpAllNoises) {
    c.mp.noise.kind = NoiseKind::kNone;
    c.mp.lambda_p = 0.0;
    c.mp.lambda_l = 0.0;
  }
  if (c.variant == Variant::kMpAllNoises) c.mp.noise.kind = NoiseKind::kPoint;

  c.loss_mode = variant_loss_mode(c.variant);
  if (j.contains("loss_mode")) {
    if (!j["loss_mode"].is_string()) throw ConfigError("config.loss_mode: expected a string");
    const LossMode m = loss_mode_from_string(j["loss_mode"].get<std::string>());
    if (m != c.loss_mode)
      throw ConfigError("loss_mode " + to_string(m) + " contradicts variant " + to_string(c.variant));
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, {"steps", "batch_size", "learning_rate", "decay_steps", "decay_factor", "weight_decay",
                   "beta1", "beta2", "eps", "log_every", "holdout_fraction"},
               "train");
    read_number(t, "steps", c.train.steps, "train");
    read_number(t, "batch_size", c.train.batch_size, "train");
    read_number(t, "learning_rate", c.train.learning_rate, "train");
    read_number(t, "decay_factor", c.train.decay_factor, "train");
    read_number(t, "weight_decay", c.train.weight_decay, "train");
    read_number(t, "beta1", c.train.beta1, "train");
    read_number(t, "beta2", c.train.beta2, "train");
    read_number(t, "eps", c.train.eps, "train");
    read_number(t, "log_every", c.train.log_every, "train");
    read_number(t, "holdout_fraction", c.train.holdout_fraction, "train");
    if (t.contains("decay_steps")) {
      if (!t["decay_steps"].is_array()) throw ConfigError("train.decay_steps: expected an array");
      c.train.decay_steps.clear();
      for (const auto& e : t["decay_steps"]) {
        if (!e.is_number_integer() || e.get<long long>() < 0)
          throw ConfigError("train.decay_steps: expected non-negative integers");
        c.train.decay_steps.push_back(e.get<std::size_t>());
      }
    }
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["variant"] = to_string(variant);
  j["dataset"] = dataset;
  j["synth"] = synth.to_json();
  j["decoder"] = dims_to_json(decoder);
  j["loss"] = {{"cls", loss.cls}, {"bce", loss.bce}, {"dice", loss.dice}, {"no_object", loss.no_object}};
  j["loss_mode"] = to_string(loss_mode);
  json m;
  m["enabled"] = mp.enabled;
  m["num_queries"] = mp.num_queries;
  m["lambda_p"] = mp.lambda_p;
  m["lambda_l"] = mp.lambda_l;
  if (mp.layers)
    m["layers"] = *mp.layers;
  else
    m["layers"] = "all";
  m["noise"] = to_string(mp.noise.kind);
  m["scale_min"] = mp.noise.scale_min;
  m["scale_max"] = mp.noise.scale_max;
  j["mp"] = m;
  j["train"] = {{"steps", train.steps},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"decay_steps", train.decay_steps},
                {"decay_factor", train.decay_factor},
                {"weight_decay", train.weight_decay},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"eps", train.eps},
                {"log_every", train.log_every},
                {"holdout_fraction", train.holdout_fraction}};
  j["seed"] = seed;
  j["out"] = out;
  return j;
}

void RunConfig::validate() const {
  synth.validate();
  if (decoder.num_queries < 1) throw ConfigError("decoder.num_queries must be at least 1");
  if (decoder.num_layers < 1) throw ConfigError("decoder.num_layers must be at least 1");
  if (decoder.dim < 1) throw ConfigError("decoder.dim must be at least 1");
  if (decoder.ffn_dim < 1) throw ConfigError("decoder.ffn_dim must be at least 1");
  if (!(decoder.pos_scale >= 0.0)) throw ConfigError("decoder.pos_scale must be nonnegative");
  loss.validate();
  mp.validate(decoder.num_layers);
  if (train.steps < 1) throw ConfigError("train.steps must be at least 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  for (std::size_t i = 1; i < train.decay_steps.size(); ++i)
    if (train.decay_steps[i] <= train.decay_steps[i - 1])
      throw ConfigError("train.decay_steps must be strictly increasing");
  if (!(train.decay_factor > 0.0)) throw ConfigError("train.decay_factor must be positive");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (!(train.beta1 >= 0.0 && train.beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0,1)");
  if (!(train.beta2 >= 0.0 && train.beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0,1)");
  if (!(train.eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (train.log_every < 1) throw ConfigError("train.log_every must be at least 1");
  if (!(train.holdout_fraction >= 0.0 && train.holdout_fraction < 1.0))
    throw ConfigError("train.holdout_fraction must lie in [0,1)");
}

std::uint64_t RunConfig::hash() const {
  json j = to_json();
  j.erase("out");
  return fnv1a64(j.dump());
}

Split split_dataset(std::size_t num_scenes, double holdout_fraction) {
  const auto hold = static_cast<std::size_t>(std::floor(static_cast<double>(num_scenes) * holdout_fraction));
  Split s;
  for (std::size_t i = 0; i < num_scenes; ++i) (i < num_scenes - hold ? s.train : s.holdout).push_back(i);
  return s;
}

Dataset resolve_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset);
  return Dataset{cfg.synth, generate_scenes(cfg.synth)};
}

// ---------------------------------------------------------------------------

AdamW::AdamW(DecoderParams& params, const TrainConfig& cfg) : cfg_(cfg) {
  for (auto& [name, t] : params.named()) {
    const bool embedding = name == "query_embed" || name == "class_embed";
    slots_.push_back({t, !embedding, std::vector<double>(t->size(), 0.0),
                      std::vector<double>(t->size(), 0.0)});
  }
}

double AdamW::rate_at(std::size_t step) const {
  double lr = cfg_.learning_rate;
  for (auto d : cfg_.decay_steps)
    if (step >= d) lr *= cfg_.decay_factor;
  return lr;
}

void AdamW::step(std::size_t step_index) {
  ++t_;
  const double lr = rate_at(step_index);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    auto g = s.param->grad();
    auto p = s.param->mutable_values();
    const bool has_grad = !g.empty();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * gi;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      if (s.decay) p[i] -= lr * cfg_.weight_decay * p[i];
      p[i] -= lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + cfg_.eps);
    }
    s.param->zero_grad();
  }
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kMpStream = 0x6d70ULL;
}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& data, const StepCallback& on_log) {
  cfg.validate();
  DecoderDims dims = cfg.decoder;
  dims.num_categories = data.config.num_categories;
  if (data.config.feature_dim != dims.dim)
    throw CompatibilityError("dataset feature_dim " + std::to_string(data.config.feature_dim) +
                             " does not match decoder.dim " + std::to_string(dims.dim));
  const Split split = split_dataset(data.scenes.size(), cfg.train.holdout_fraction);
  if (split.train.empty()) throw CompatibilityError("dataset has no training scenes");

  const auto protos = make_prototypes(data.config);
  std::vector<FeaturePyramid> pyramids(data.scenes.size());
  for (auto i : split.train) pyramids[i] = synth_features(data.scenes[i], data.config, protos);

  TrainResult res{DecoderParams::init(dims, mix_seed(cfg.seed, kInitStream)), {}};
  DecoderParams& params = res.params;
  AdamW opt(params, cfg.train);

  std::vector<std::size_t> order;
  std::size_t pos = 0, epoch = 0;
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  auto reshuffle = [&] {
    order = split.train;
    Rng rng(mix_seed(cfg.seed, kShuffleStream, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    pos = 0;
  };
  reshuffle();

  const double inv_b = 1.0 / static_cast<double>(cfg.train.batch_size);
  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    double step_loss = 0.0;
    for (std::size_t b = 0; b < cfg.train.batch_size; ++b) {
      if (pos == order.size()) {
        res.log.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_count));
        epoch_sum = 0.0;
        epoch_count = 0;
        ++epoch;
        reshuffle();
      }
      const std::size_t idx = order[pos++];
      const Scene& scene = data.scenes[idx];
      const FeaturePyramid& pyr = pyramids[idx];
      MPPart mp;
      if (cfg.mp.enabled) mp = build_mp_part(scene, pyr, params, cfg.mp, mix_seed(cfg.seed, kMpStream, step, b));
      const MPPart* mpp = mp.empty() ? nullptr : &mp;
      LossResult lr;
      try {
        const LayerOutputs out = full_forward(training_spec(pyr, params, mpp), params);
        lr = layer_losses(out, scene, mpp, cfg.loss_mode, cfg.loss);
      } catch (const NumericError& e) {
        throw NumericError("non-finite values at step " + std::to_string(step + 1) + " (scene " +
                           std::to_string(idx) + "): " + e.what());
      }
      const double v = lr.total.item();
      if (!std::isfinite(v))
        throw NumericError("non-finite loss at step " + std::to_string(step + 1) + " (scene " +
                           std::to_string(idx) + ")");
      backward(cfg.train.batch_size > 1 ? scale(lr.total, inv_b) : lr.total);
      step_loss += v * inv_b;
      epoch_sum += v;
      ++epoch_count;
    }
    opt.step(step);
    if ((step + 1) % cfg.train.log_every == 0 || step + 1 == cfg.train.steps) {
      res.log.steps.emplace_back(step + 1, step_loss);
      if (on_log) on_log(step + 1, step_loss);
    }
  }
  if (epoch_count > 0) res.log.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_count));
  return res;
}

// ---------------------------------------------------------------------------

namespace {

struct SceneEval {
  std::vector<double> miou_l, util;
  std::vector<Detection> dets;
  std::vector<double> mp_miou_l, mp_util_bip;
  double mp_hard = 0.0;
  bool has_mp = false;
};

// Runs `body(k)` for every position, in parallel, rethrowing the first failure.
template <class F>
void for_each_scene(std::size_t n, F body) {
  std::exception_ptr err;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

void check_compatible(const DecoderParams& params, const Dataset& data,
                      const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw CompatibilityError("no scenes to evaluate");
  if (data.config.num_categories != params.dims.num_categories)
    throw CompatibilityError("dataset has " + std::to_string(data.config.num_categories) +
                             " categories, checkpoint expects " +
                             std::to_string(params.dims.num_categories));
  if (data.config.feature_dim != params.dims.dim)
    throw CompatibilityError("dataset feature_dim " + std::to_string(data.config.feature_dim) +
                             " does not match checkpoint dim " + std::to_string(params.dims.dim));
  for (auto i : indices)
    if (i >= data.scenes.size()) throw CompatibilityError("scene index out of range");
}

EvalResult merge(const std::vector<SceneEval>& per, const std::vector<Scene>& scenes,
                 std::size_t num_categories) {
  EvalResult r;
  r.scenes = per.size();
  r.miou_l.assign(per.front().miou_l.size(), 0.0);
  r.util.assign(per.front().util.size(), 0.0);
  std::vector<Detection> dets;
  for (const auto& s : per) {
    for (std::size_t i = 0; i < s.miou_l.size(); ++i) r.miou_l[i] += s.miou_l[i];
    for (std::size_t i = 0; i < s.util.size(); ++i) r.util[i] += s.util[i];
    r.final_util_min = std::min(r.final_util_min, s.util.back());
    dets.insert(dets.end(), s.dets.begin(), s.dets.end());
  }
  for (auto& v : r.miou_l) v /= static_cast<double>(per.size());
  for (auto& v : r.util) v /= static_cast<double>(per.size());
  r.ap = ap_lite(dets, scenes, num_categories);
  return r;
}

}  // namespace

EvalResult evaluate(const DecoderParams& params, const Dataset& data,
                    const std::vector<std::size_t>& indices, EvalPath path, const LossWeights& w) {
  check_compatible(params, data, indices);
  const auto protos = make_prototypes(data.config);
  std::vector<SceneEval> per(indices.size());
  std::vector<Scene> scenes(indices.size());
  for_each_scene(indices.size(), [&](std::size_t k) {
    const Scene& scene = data.scenes[indices[k]];
    scenes[k] = scene;
    const FeaturePyramid pyr = synth_features(scene, data.config, protos);
    const LayerOutputs out = path == EvalPath::kPlain
                                 ? inference_forward(pyr, params)
                                 : full_forward(training_spec(pyr, params, nullptr), params);
    per[k].miou_l = miou_layerwise(out);
    per[k].util = util_layerwise(matching_vectors(match_layers(out, scene, w)), scene.instances.size());
    per[k].dets = detections_from(out.layers.back(), out.num_matching, out.height, out.width, k);
  });
  return merge(per, scenes, params.dims.num_categories);
}

AnalysisResult analyze(const DecoderParams& params, const Dataset& data,
                       const std::vector<std::size_t>& indices, const LossWeights& w,
                       const std::optional<std::vector<std::size_t>>& mp_layers) {
  check_compatible(params, data, indices);
  const auto protos = make_prototypes(data.config);
  MPConfig clean;
  clean.enabled = true;
  clean.lambda_p = 0.0;
  clean.lambda_l = 0.0;
  clean.noise.kind = NoiseKind::kNone;
  clean.num_queries = params.dims.num_queries;
  clean.layers = mp_layers;
  clean.validate(params.dims.num_layers);

  std::vector<SceneEval> per(indices.size());
  std::vector<Scene> scenes(indices.size());
  for_each_scene(indices.size(), [&](std::size_t k) {
    const Scene& scene = data.scenes[indices[k]];
    scenes[k] = scene;
    const FeaturePyramid pyr = synth_features(scene, data.config, protos);
    const MPPart mp = build_mp_part(scene, pyr, params, clean, 0);
    const LayerOutputs out = full_forward(training_spec(pyr, params, &mp), params);
    per[k].miou_l = miou_layerwise(out);
    per[k].util = util_layerwise(matching_vectors(match_layers(out, scene, w)), scene.instances.size());
    per[k].dets = detections_from(out.layers.back(), out.num_matching, out.height, out.width, k);
    if (!mp.empty()) {
      per[k].has_mp = true;
      per[k].mp_miou_l = miou_layerwise(out, out.num_matching, mp.size());
      per[k].mp_util_bip = util_mp_bipartite(out, scene, mp, w);
      per[k].mp_hard = util_mp_hard(mp);
    }
  });
  AnalysisResult a;
  a.matching = merge(per, scenes, params.dims.num_categories);
  const std::size_t L = params.dims.num_layers;
  a.mp_miou_l.assign(L, 0.0);
  a.mp_util_bipartite.assign(L + 1, 0.0);
  a.mp_util_hard.assign(L + 1, 0.0);
  std::size_t n = 0;
  for (std::size_t k = 0; k < per.size(); ++k) {
    if (!per[k].has_mp) continue;
    ++n;
    for (std::size_t i = 0; i < L; ++i) a.mp_miou_l[i] += per[k].mp_miou_l[i];
    for (std::size_t i = 0; i <= L; ++i) a.mp_util_bipartite[i] += per[k].mp_util_bip[i];
  }
  if (n > 0) {
    for (auto& v : a.mp_miou_l) v /= static_cast<double>(n);
    for (auto& v : a.mp_util_bipartite) v /= static_cast<double>(n);
  }
  double hard = 0.0;
  for (const auto& s : per)
    if (s.has_mp) hard += s.mp_hard;
  if (n > 0) std::fill(a.mp_util_hard.begin(), a.mp_util_hard.end(), hard / static_cast<double>(n));
  return a;
}

}  // namespace mpseg
