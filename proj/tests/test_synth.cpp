#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mpseg/error.hpp"
#include "mpseg/synth.hpp"

using namespace mpseg;
namespace fs = std::filesystem;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mpseg_test_synth";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(GenerateScene, DeterministicInSeedAndIndex) {
  SynthConfig cfg;
  EXPECT_EQ(generate_scene(cfg, 17), generate_scene(cfg, 17));
  EXPECT_NE(generate_scene(cfg, 17), generate_scene(cfg, 18));
}

TEST(GenerateScene, SingleInstanceRange) {
  SynthConfig cfg;
  cfg.min_instances = cfg.max_instances = 1;
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(generate_scene(cfg, i).instances.size(), 1u);
}

TEST(GenerateScene, ThousandScenesValid) {
  SynthConfig cfg;
  cfg.num_scenes = 1000;
  cfg.num_categories = 4;
  const auto scenes = generate_scenes(cfg);
  ASSERT_EQ(scenes.size(), 1000u);
  for (const auto& s : scenes) {
    ASSERT_GE(s.instances.size(), cfg.min_instances);
    ASSERT_LE(s.instances.size(), cfg.max_instances);
    std::vector<int> owner(s.height * s.width, -1);
    for (std::size_t k = 0; k < s.instances.size(); ++k) {
      const auto& inst = s.instances[k];
      ASSERT_LT(inst.category, 4u);
      ASSERT_FALSE(inst.mask.empty());
      for (std::size_t p = 0; p < inst.mask.pixels(); ++p)
        if (inst.mask[p]) {
          ASSERT_EQ(owner[p], -1) << "scene " << s.index << " overlaps";
          owner[p] = static_cast<int>(k);
        }
    }
  }
}

TEST(GenerateScene, PlacementFailureNamesIndex) {
  SynthConfig cfg;
  cfg.height = cfg.width = 4;
  cfg.feature_dim = 8;
  cfg.shapes = {ShapeKind::kRectangle};
  cfg.rect_min = cfg.rect_max = 4;
  cfg.min_instances = cfg.max_instances = 2;
  try {
    generate_scene(cfg, 5);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scene 5"), std::string::npos) << e.what();
  }
}

TEST(SynthConfig, InvalidCategoryCount) {
  SynthConfig cfg;
  cfg.num_categories = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SynthConfig, JsonAndHeaderRoundTrip) {
  SynthConfig cfg;
  cfg.num_scenes = 7;
  cfg.feature_sigma = 0.25;
  cfg.shapes = {ShapeKind::kDisk};
  EXPECT_EQ(SynthConfig::from_json(cfg.to_json()), cfg);
  EXPECT_EQ(SynthConfig::from_header(cfg.to_header()), cfg);
}

TEST(SynthFeatures, ZeroNoiseGivesPrototypes) {
  SynthConfig cfg;
  cfg.feature_sigma = 0.0;
  const Scene s = generate_scene(cfg, 3);
  const auto protos = make_prototypes(cfg);
  const FeaturePyramid pyr = synth_features(s, cfg);
  const auto labels = s.label_map();
  const auto& base = pyr.scales[2];
  for (std::size_t p = 0; p < base.pixels(); ++p) {
    const std::size_t row = labels[p] < 0 ? cfg.num_categories : static_cast<std::size_t>(labels[p]);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      ASSERT_EQ(base.values[p * cfg.feature_dim + j], protos[row * cfg.feature_dim + j]);
  }
}

TEST(SynthFeatures, OrthonormalDotProducts) {
  SynthConfig cfg;
  cfg.feature_sigma = 0.0;
  cfg.prototypes = PrototypeKind::kOrthonormal;
  const Scene s = generate_scene(cfg, 11);
  const auto labels = s.label_map();
  const FeaturePyramid pyr = synth_features(s, cfg);
    const auto& base = pyr.scales[2];
  for (std::size_t p = 0; p < base.pixels(); p += 7)
    for (std::size_t q = 0; q < base.pixels(); q += 5) {
      const double d = dot(base.at(p / 32, p % 32), base.at(q / 32, q % 32));
      EXPECT_NEAR(d, labels[p] == labels[q] ? 1.0 : 0.0, 1e-12);
    }
}

TEST(SynthFeatures, IntraCategoryDotExceedsInter) {
  SynthConfig cfg;
  cfg.feature_sigma = 0.1;
  double intra = 0, inter = 0;
  std::size_t ni = 0, nx = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Scene s = generate_scene(cfg, i);
    const auto labels = s.label_map();
    const FeaturePyramid pyr = synth_features(s, cfg);
    const auto& base = pyr.scales[2];
    for (std::size_t p = 0; p < base.pixels(); p += 13)
      for (std::size_t q = p + 1; q < base.pixels(); q += 29) {
        if (labels[p] < 0 || labels[q] < 0) continue;
        const double d = dot(base.at(p / 32, p % 32), base.at(q / 32, q % 32));
        if (labels[p] == labels[q]) {
          intra += d;
          ++ni;
        } else {
          inter += d;
          ++nx;
        }
      }
  }
  ASSERT_GT(ni, 0u);
  ASSERT_GT(nx, 0u);
  EXPECT_GT(intra / static_cast<double>(ni), inter / static_cast<double>(nx));
}

TEST(SynthFeatures, PyramidExtentsAndPooling) {
  SynthConfig cfg;
  const Scene s = generate_scene(cfg, 2);
  const FeaturePyramid pyr = synth_features(s, cfg);
  EXPECT_EQ(pyr.scales[0].height, 8u);
  EXPECT_EQ(pyr.scales[1].height, 16u);
  EXPECT_EQ(pyr.scales[2].width, 32u);
  const auto pooled = mean_pool2(pyr.scales[2]);
  EXPECT_EQ(pooled.values, pyr.scales[1].values);
  for (double v : pyr.scales[0].values) ASSERT_TRUE(std::isfinite(v));
}

TEST(Dataset, SaveLoadRoundTrip) {
  SynthConfig cfg;
  cfg.num_scenes = 10;
  const Dataset ds{cfg, generate_scenes(cfg)};
  const fs::path p = temp_file("ten.ds");
  save_dataset(p, ds);
  const Dataset back = load_dataset(p);
  EXPECT_EQ(back.config, cfg);
  EXPECT_EQ(back.scenes, ds.scenes);
}

TEST(Dataset, WrongSchemaVersionRejected) {
  SynthConfig cfg;
  cfg.num_scenes = 2;
  std::string text = serialize_dataset({cfg, generate_scenes(cfg)});
  text.replace(text.find("version=1"), 9, "version=9");
  try {
    parse_dataset(text);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Dataset, TwoHundredScenesUnderTwoMegabytes) {
  SynthConfig cfg;
  cfg.num_scenes = 200;
  const Dataset ds{cfg, generate_scenes(cfg)};
  const fs::path p = temp_file("two_hundred.ds");
  save_dataset(p, ds);
  EXPECT_LT(fs::file_size(p), 2u * 1024u * 1024u);
}

TEST(Dataset, BytesArePureFunctionOfConfig) {
  SynthConfig cfg;
  cfg.num_scenes = 30;
  EXPECT_EQ(serialize_dataset({cfg, generate_scenes(cfg)}), serialize_dataset({cfg, generate_scenes(cfg)}));
}
