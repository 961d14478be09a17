#include "mpseg/refine_study.hpp"

#include <algorithm>
#include <cmath>

#include "mpseg/error.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

RefineStudyConfig RefineStudyConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("refine-study config must be an object");
  RefineStudyConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "sigmas") {
      if (!v.is_array()) throw ConfigError("sigmas: expected an array");
      c.sigmas.clear();
      for (const auto& s : v) {
        if (!s.is_number()) throw ConfigError("sigmas: expected numbers");
        c.sigmas.push_back(s.get<double>());
      }
    } else if (k == "samples_per_sigma" || k == "dim" || k == "pixels_per_category" || k == "seed") {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(k + ": expected a non-negative integer");
      if (k == "samples_per_sigma") c.samples_per_sigma = v.get<std::size_t>();
      if (k == "dim") c.dim = v.get<std::size_t>();
      if (k == "pixels_per_category") c.pixels_per_category = v.get<std::size_t>();
      if (k == "seed") c.seed = v.get<std::uint64_t>();
    } else if (k == "ratio_min" || k == "ratio_max") {
      if (!v.is_number()) throw ConfigError(k + ": expected a number");
      (k == "ratio_min" ? c.ratio_min : c.ratio_max) = v.get<double>();
    } else if (k == "weights") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "uniform")
        c.weights = WeightKind::kUniform;
      else if (s == "softmax")
        c.weights = WeightKind::kSoftmax;
      else
        throw ConfigError("weights: expected \"uniform\" or \"softmax\"");
    } else {
      throw ConfigError("refine-study: unknown key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

void RefineStudyConfig::validate() const {
  if (sigmas.empty()) throw ConfigError("sigmas must not be empty");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("sigmas must be nonnegative");
  if (dim < 2) throw ConfigError("dim must be at least 2");
  if (pixels_per_category < 1) throw ConfigError("pixels_per_category must be at least 1");
  if (!(ratio_min > 0.0 && ratio_max >= ratio_min)) throw ConfigError("ratio range must be positive and ordered");
}

RefinementInput sample_refinement_instance(const RefineStudyConfig& cfg, double sigma,
                                           double area_ratio, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = cfg.pixels_per_category, d = cfg.dim;
  RefinementInput in;
  in.dim = d;
  in.features.assign(2 * n * d, 0.0);
  in.label.resize(2 * n);
  in.in_m0.assign(2 * n, 0);
  in.weight.assign(2 * n, 0.0);
  const auto m1 = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(area_ratio * static_cast<double>(n))), 1, n);
  for (std::size_t k = 0; k < 2 * n; ++k) {
    const int lab = k < n ? 0 : 1;
    in.label[k] = lab;
    in.features[k * d + static_cast<std::size_t>(lab)] = 1.0;
    for (std::size_t j = 0; j < d; ++j) in.features[k * d + j] += sigma * rng.normal();
    in.in_m0[k] = lab == 0 || k - n < m1;
  }
  if (cfg.weights == WeightKind::kUniform) {
    const double w = 1.0 / static_cast<double>(n + m1);
    for (std::size_t k = 0; k < 2 * n; ++k)
      if (in.in_m0[k]) in.weight[k] = w;
  } else {
    std::vector<double> q0(d);
    for (auto& v : q0) v = rng.normal();
    double mx = -1e300;
    std::vector<double> logit(2 * n, 0.0);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      if (!in.in_m0[k]) continue;
      for (std::size_t j = 0; j < d; ++j) logit[k] += q0[j] * in.features[k * d + j];
      mx = std::max(mx, logit[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < 2 * n; ++k)
      if (in.in_m0[k]) z += (in.weight[k] = std::exp(logit[k] - mx));
    for (auto& w : in.weight) w /= z;
  }
  return in;
}

std::vector<RefineSample> run_refine_study(const RefineStudyConfig& cfg) {
  cfg.validate();
  std::vector<RefineSample> out;
  std::size_t index = 0;
  for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
    for (std::size_t k = 0; k < cfg.samples_per_sigma; ++k, ++index) {
      Rng rng(mix_seed(cfg.seed, si, k, 1));
      const double ratio = rng.uniform(cfg.ratio_min, cfg.ratio_max);
      const auto in = sample_refinement_instance(cfg, cfg.sigmas[si], ratio, mix_seed(cfg.seed, si, k, 2));
      out.push_back({index, cfg.sigmas[si], refinement_bounds(in)});
    }
  }
  return out;
}

}  // namespace mpseg
