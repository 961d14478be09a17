#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpseg/decoder.hpp"
#include "mpseg/matching.hpp"
#include "mpseg/metrics.hpp"
#include "mpseg/mp.hpp"
#include "mpseg/synth.hpp"

namespace mpseg {

enum class Variant {
  kBaseline,
  kMpFirstLayer,
  kMpFirst3,
  kMpAllLayers,
  kMpAllNoises,
  kNaiveFixedMatching,
  kNaiveAuxLoss,
};

std::string to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant variant_from_string(const std::string& s);
std::vector<std::string> variant_names();

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 1;
  double learning_rate = 1e-4;
  std::vector<std::size_t> decay_steps;  // multiply the rate by decay_factor at each
  double decay_factor = 0.1;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t log_every = 10;
  double holdout_fraction = 0.2;

  bool operator==(const TrainConfig&) const = default;
};

struct RunConfig {
  Variant variant = Variant::kBaseline;
  std::string dataset;  // empty: generate from `synth`
  SynthConfig synth;
  DecoderDims decoder;
  LossWeights loss;
  LossMode loss_mode = LossMode::kPerLayerBipartite;
  MPConfig mp;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::string out = "out";

  /// Parses a config document; `variant` (when given) replaces the one in the
  /// document. Variant settings are applied and contradictions raise ConfigError.
  static RunConfig from_json(const nlohmann::json& j,
                             const std::optional<std::string>& variant = std::nullopt);
  /// Fully resolved configuration.
  nlohmann::json to_json() const;
  void validate() const;
  /// FNV-1a over the canonical resolved JSON text.
  std::uint64_t hash() const;
};

/// First (1−f) of the scenes train, the rest are held out.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
Split split_dataset(std::size_t num_scenes, double holdout_fraction);

/// Decoupled-weight-decay Adam over a parameter set.
class AdamW {
 public:
  AdamW(DecoderParams& params, const TrainConfig& cfg);
  /// Learning rate in effect at 0-based step `step`.
  double rate_at(std::size_t step) const;
  /// Applies one update from the accumulated gradients, then clears them.
  void step(std::size_t step_index);

 private:
  struct Slot {
    Tensor* param;
    bool decay;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  TrainConfig cfg_;
  std::size_t t_ = 0;
};

struct TrainLog {
  std::vector<std::pair<std::size_t, double>> steps;  // (step, loss) every log_every steps
  std::vector<double> epoch_loss;                     // mean loss per pass over the train split
};

struct TrainResult {
  DecoderParams params;
  TrainLog log;
};

using StepCallback = std::function<void(std::size_t step, double loss)>;

/// Trains from a fresh initialization. Throws NumericError naming the step on
/// a non-finite loss.
TrainResult train(const RunConfig& cfg, const Dataset& data, const StepCallback& on_log = {});

/// Scene-averaged diagnostics of the matching part (MP disabled).
struct EvalResult {
  std::size_t scenes = 0;
  std::vector<double> miou_l;  // layers 1..L
  std::vector<double> util;    // layers 0..L
  double final_util_min = 1.0; // smallest final-layer Util over scenes
  ApResult ap;
};

/// Forward path used for evaluation.
enum class EvalPath { kDecoder, kPlain };

EvalResult evaluate(const DecoderParams& params, const Dataset& data,
                    const std::vector<std::size_t>& indices, EvalPath path = EvalPath::kDecoder,
                    const LossWeights& w = {});

struct AnalysisResult {
  EvalResult matching;
  std::vector<double> mp_miou_l;           // layers 1..L
  std::vector<double> mp_util_bipartite;   // layers 0..L
  std::vector<double> mp_util_hard;        // layers 0..L
};

/// Matching-part diagnostics plus an MP part fed clean GT masks at `mp_layers`
/// (all layers when unset).
AnalysisResult analyze(const DecoderParams& params, const Dataset& data,
                       const std::vector<std::size_t>& indices, const LossWeights& w = {},
                       const std::optional<std::vector<std::size_t>>& mp_layers = std::nullopt);

/// Builds (or loads) the dataset a run refers to.
Dataset resolve_dataset(const RunConfig& cfg);

}  // namespace mpseg
