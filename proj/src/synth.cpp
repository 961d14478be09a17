#include "mpseg/synth.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mpseg/error.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

namespace {

constexpr std::uint64_t kStreamPrototypes = 0x70726f74;
constexpr std::uint64_t kStreamScene = 0x7363656e;
constexpr std::uint64_t kStreamFeatures = 0x66656174;
constexpr int kMaxPlacementAttempts = 1000;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shape_name(ShapeKind k) { return k == ShapeKind::kRectangle ? "rectangle" : "disk"; }

ShapeKind shape_from_name(const std::string& s) {
  if (s == "rectangle") return ShapeKind::kRectangle;
  if (s == "disk") return ShapeKind::kDisk;
  throw ConfigError("shapes: unknown shape kind '" + s + "'");
}

std::string prototype_name(PrototypeKind k) {
  return k == PrototypeKind::kOrthonormal ? "orthonormal" : "random";
}

PrototypeKind prototype_from_name(const std::string& s) {
  if (s == "orthonormal") return PrototypeKind::kOrthonormal;
  if (s == "random") return PrototypeKind::kRandom;
  throw ConfigError("prototypes: unknown kind '" + s + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (num_categories == 0) throw ConfigError("num_categories must be at least 1");
  if (height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0)
    throw ConfigError("height/width must be positive multiples of 4");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (min_instances == 0 || min_instances > max_instances)
    throw ConfigError("min_instances/max_instances must satisfy 1 <= min <= max");
  if (shapes.empty()) throw ConfigError("shapes must list at least one shape kind");
  if (rect_min == 0 || rect_min > rect_max || rect_max > std::min(height, width))
    throw ConfigError("rect_min/rect_max must satisfy 1 <= min <= max <= image side");
  if (disk_min == 0 || disk_min > disk_max || 2 * disk_max + 1 > std::min(height, width))
    throw ConfigError("disk_min/disk_max must satisfy 1 <= min <= max and fit the image");
  if (!(feature_sigma >= 0.0) || !std::isfinite(feature_sigma))
    throw ConfigError("feature_sigma must be finite and non-negative");
  if (prototypes == PrototypeKind::kOrthonormal && num_categories + 1 > feature_dim)
    throw ConfigError("prototypes: orthonormal prototypes need num_categories + 1 <= feature_dim");
}

std::string SynthConfig::to_header() const {
  std::ostringstream os;
  os << "num_scenes=" << num_scenes << " num_categories=" << num_categories
     << " height=" << height << " width=" << width << " feature_dim=" << feature_dim
     << " min_instances=" << min_instances << " max_instances=" << max_instances << " shapes=";
  for (std::size_t i = 0; i < shapes.size(); ++i) os << (i ? "," : "") << shape_name(shapes[i]);
  os << " rect_min=" << rect_min << " rect_max=" << rect_max << " disk_min=" << disk_min
     << " disk_max=" << disk_max << " prototypes=" << prototype_name(prototypes)
     << " feature_sigma=" << format_double(feature_sigma) << " seed=" << seed;
  return os.str();
}

SynthConfig SynthConfig::from_header(const std::string& kv) {
  std::map<std::string, std::string> fields;
  std::istringstream is(kv);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config field '" + tok + "'");
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  SynthConfig c;
  auto take = [&](const char* key) -> std::string {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(std::string("missing config field ") + key);
    return it->second;
  };
  c.num_scenes = parse_size("num_scenes", take("num_scenes"));
  c.num_categories = parse_size("num_categories", take("num_categories"));
  c.height = parse_size("height", take("height"));
  c.width = parse_size("width", take("width"));
  c.feature_dim = parse_size("feature_dim", take("feature_dim"));
  c.min_instances = parse_size("min_instances", take("min_instances"));
  c.max_instances = parse_size("max_instances", take("max_instances"));
  c.shapes.clear();
  std::istringstream ss(take("shapes"));
  while (std::getline(ss, tok, ',')) c.shapes.push_back(shape_from_name(tok));
  c.rect_min = parse_size("rect_min", take("rect_min"));
  c.rect_max = parse_size("rect_max", take("rect_max"));
  c.disk_min = parse_size("disk_min", take("disk_min"));
  c.disk_max = parse_size("disk_max", take("disk_max"));
  c.prototypes = prototype_from_name(take("prototypes"));
  try {
    c.feature_sigma = std::stod(take("feature_sigma"));
  } catch (const std::logic_error&) {
    throw ConfigError("feature_sigma: not a number");
  }
  c.seed = parse_size("seed", take("seed"));
  return c;
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json j;
  j["num_scenes"] = num_scenes;
  j["num_categories"] = num_categories;
  j["height"] = height;
  j["width"] = width;
  j["feature_dim"] = feature_dim;
  j["min_instances"] = min_instances;
  j["max_instances"] = max_instances;
  auto arr = nlohmann::json::array();
  for (auto s : shapes) arr.push_back(shape_name(s));
  j["shapes"] = arr;
  j["rect_min"] = rect_min;
  j["rect_max"] = rect_max;
  j["disk_min"] = disk_min;
  j["disk_max"] = disk_max;
  j["prototypes"] = prototype_name(prototypes);
  j["feature_sigma"] = feature_sigma;
  j["seed"] = seed;
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  auto size_field = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(std::string(key) + ": expected a non-negative integer");
    dst = v.get<std::size_t>();
  };
  if (!j.is_object()) throw ConfigError("synth config must be an object");
  size_field("num_scenes", c.num_scenes);
  size_field("num_categories", c.num_categories);
  size_field("height", c.height);
  size_field("width", c.width);
  size_field("feature_dim", c.feature_dim);
  size_field("min_instances", c.min_instances);
  size_field("max_instances", c.max_instances);
  size_field("rect_min", c.rect_min);
  size_field("rect_max", c.rect_max);
  size_field("disk_min", c.disk_min);
  size_field("disk_max", c.disk_max);
  if (j.contains("shapes")) {
    if (!j["shapes"].is_array()) throw ConfigError("shapes: expected an array");
    c.shapes.clear();
    for (const auto& s : j["shapes"]) {
      if (!s.is_string()) throw ConfigError("shapes: expected strings");
      c.shapes.push_back(shape_from_name(s.get<std::string>()));
    }
  }
  if (j.contains("prototypes")) {
    if (!j["prototypes"].is_string()) throw ConfigError("prototypes: expected a string");
    c.prototypes = prototype_from_name(j["prototypes"].get<std::string>());
  }
  if (j.contains("feature_sigma")) {
    if (!j["feature_sigma"].is_number()) throw ConfigError("feature_sigma: expected a number");
    c.feature_sigma = j["feature_sigma"].get<double>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError("seed: expected an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::vector<int> Scene::label_map() const {
  std::vector<int> labels(height * width, -1);
  for (const auto& inst : instances)
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (inst.mask[i]) labels[i] = static_cast<int>(inst.category);
  return labels;
}

std::vector<double> make_prototypes(const SynthConfig& cfg) {
  const std::size_t rows = cfg.num_categories + 1, d = cfg.feature_dim;
  Rng rng(mix_seed(cfg.seed, kStreamPrototypes));
  std::vector<double> p(rows * d);
  for (auto& v : p) v = rng.normal();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = p.data() + r * d;
    if (cfg.prototypes == PrototypeKind::kOrthonormal) {
      for (std::size_t q = 0; q < r; ++q) {  // modified Gram-Schmidt
        const double* prev = p.data() + q * d;
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += row[k] * prev[k];
        for (std::size_t k = 0; k < d; ++k) row[k] -= dot * prev[k];
      }
    }
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) n2 += row[k] * row[k];
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t k = 0; k < d; ++k) row[k] *= inv;
  }
  return p;
}

Scene generate_scene(const SynthConfig& cfg, std::size_t index) {
  Rng rng(mix_seed(cfg.seed, kStreamScene, index));
  Scene scene;
  scene.index = index;
  scene.height = cfg.height;
  scene.width = cfg.width;
  BinaryMask occupied(cfg.height, cfg.width);
  const auto count = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(cfg.min_instances),
                      static_cast<std::int64_t>(cfg.max_instances)));
  const auto H = static_cast<std::int64_t>(cfg.height);
  const auto W = static_cast<std::int64_t>(cfg.width);

  for (std::size_t n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const ShapeKind kind = cfg.shapes[rng.below(cfg.shapes.size())];
      const auto category = static_cast<std::size_t>(rng.below(cfg.num_categories));
      BinaryMask m(cfg.height, cfg.width);
      if (kind == ShapeKind::kRectangle) {
        const auto h = rng.uniform_int(static_cast<std::int64_t>(cfg.rect_min),
                                       static_cast<std::int64_t>(cfg.rect_max));
        const auto w = rng.uniform_int(static_cast<std::int64_t>(cfg.rect_min),
                                       static_cast<std::int64_t>(cfg.rect_max));
        const auto y0 = rng.uniform_int(0, H - h);
        const auto x0 = rng.uniform_int(0, W - w);
        for (auto y = y0; y < y0 + h; ++y)
          for (auto x = x0; x < x0 + w; ++x)
            m.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), true);
      } else {
        const auto r = rng.uniform_int(static_cast<std::int64_t>(cfg.disk_min),
                                       static_cast<std::int64_t>(cfg.disk_max));
        const auto cy = rng.uniform_int(r, H - 1 - r);
        const auto cx = rng.uniform_int(r, W - 1 - r);
        for (auto y = cy - r; y <= cy + r; ++y)
          for (auto x = cx - r; x <= cx + r; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
              m.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), true);
      }
      bool overlap = false;
      for (std::size_t i = 0; i < m.pixels() && !overlap; ++i) overlap = m[i] && occupied[i];
      if (overlap) continue;
      for (std::size_t i = 0; i < m.pixels(); ++i)
        if (m[i]) occupied.flip(i);
      scene.instances.push_back({category, std::move(m)});
      placed = true;
    }
    if (!placed)
      throw ConfigError("scene " + std::to_string(index) + ": failed to place instance " +
                        std::to_string(n) + " after " + std::to_string(kMaxPlacementAttempts) +
                        " attempts");
  }
  return scene;
}

std::vector<Scene> generate_scenes(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Scene> scenes(cfg.num_scenes);
  const auto n = static_cast<std::ptrdiff_t>(cfg.num_scenes);
  std::string failure;
  // Scenes are seeded per index, so the thread schedule cannot change bytes.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      scenes[static_cast<std::size_t>(i)] = generate_scene(cfg, static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw ConfigError(failure);
  return scenes;
}

FeatureGrid mean_pool2(const FeatureGrid& g) {
  FeatureGrid out{g.height / 2, g.width / 2, g.dim, {}};
  out.values.assign(out.pixels() * g.dim, 0.0);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      double* dst = out.values.data() + (y * out.width + x) * g.dim;
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx) {
          auto src = g.at(2 * y + dy, 2 * x + dx);
          for (std::size_t k = 0; k < g.dim; ++k) dst[k] += src[k];
        }
      for (std::size_t k = 0; k < g.dim; ++k) dst[k] *= 0.25;
    }
  return out;
}

FeaturePyramid synth_features(const Scene& scene, const SynthConfig& cfg) {
  const auto protos = make_prototypes(cfg);
  return synth_features(scene, cfg, protos);
}

FeaturePyramid synth_features(const Scene& scene, const SynthConfig& cfg,
                              std::span<const double> prototypes) {
  const std::size_t d = cfg.feature_dim, K = cfg.num_categories;
  const auto labels = scene.label_map();
  FeatureGrid base{scene.height, scene.width, d, {}};
  base.values.resize(base.pixels() * d);
  Rng rng(mix_seed(cfg.seed, kStreamFeatures, scene.index));
  for (std::size_t i = 0; i < base.pixels(); ++i) {
    const std::size_t row = labels[i] < 0 ? K : static_cast<std::size_t>(labels[i]);
    const double* proto = prototypes.data() + row * d;
    double* dst = base.values.data() + i * d;
    for (std::size_t k = 0; k < d; ++k) {
      dst[k] = proto[k];
      if (cfg.feature_sigma > 0.0) dst[k] += cfg.feature_sigma * rng.normal();
    }
  }
  FeaturePyramid pyr;
  pyr.scales[1] = mean_pool2(base);
  pyr.scales[0] = mean_pool2(pyr.scales[1]);
  pyr.scales[2] = std::move(base);
  return pyr;
}

// ---------------------------------------------------------------------------

std::string serialize_dataset(const Dataset& ds) {
  std::string out = "mpseg-dataset version=" + std::to_string(kDatasetSchemaVersion) + " " +
                    ds.config.to_header() + "\n";
  for (const auto& s : ds.scenes) {
    out += std::to_string(s.index) + " " + std::to_string(s.instances.size());
    for (const auto& inst : s.instances)
      out += " " + std::to_string(inst.category) + ":" + rle_to_string(rle_encode(inst.mask));
    out += "\n";
  }
  return out;
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError("dataset: empty file");
  const std::string magic = "mpseg-dataset version=";
  if (line.rfind(magic, 0) != 0) throw IoError("dataset: missing header");
  const auto sp = line.find(' ', magic.size());
  const std::string ver = line.substr(magic.size(), sp - magic.size());
  if (ver != std::to_string(kDatasetSchemaVersion))
    throw IoError("dataset: unsupported schema version " + ver + " (expected " +
                  std::to_string(kDatasetSchemaVersion) + ")");
  Dataset ds;
  ds.config = SynthConfig::from_header(sp == std::string::npos ? "" : line.substr(sp + 1));
  ds.config.validate();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Scene s;
    std::size_t n = 0;
    if (!(ls >> s.index >> n)) throw IoError("dataset: malformed scene line");
    s.height = ds.config.height;
    s.width = ds.config.width;
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(ls >> tok)) throw IoError("dataset: scene " + std::to_string(s.index) + " truncated");
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw IoError("dataset: malformed instance '" + tok + "'");
      Instance inst;
      try {
        inst.category = parse_size("category", tok.substr(0, colon));
        inst.mask = rle_decode(rle_from_string(tok.substr(colon + 1)), s.height, s.width);
      } catch (const std::exception& e) {
        throw IoError("dataset: scene " + std::to_string(s.index) + ": " + e.what());
      }
      if (inst.category >= ds.config.num_categories)
        throw IoError("dataset: category out of range in scene " + std::to_string(s.index));
      s.instances.push_back(std::move(inst));
    }
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const auto text = serialize_dataset(ds);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_dataset(ss.str());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace mpseg
