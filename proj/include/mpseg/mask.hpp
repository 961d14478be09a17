#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpseg/tensor.hpp"

namespace mpseg {

/// H×W binary mask, row-major.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width, bool fill = false)
      : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return bits_.size(); }

  bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t y, std::size_t x, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void flip(std::size_t i) { bits_[i] ^= 1; }

  std::size_t area() const;
  bool empty() const { return area() == 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Inclusive pixel bounding box.
struct BBox {
  std::size_t y0, x0, y1, x1;
  std::size_t height() const { return y1 - y0 + 1; }
  std::size_t width() const { return x1 - x0 + 1; }
};

/// Requires a non-empty mask.
BBox bounding_box(const BinaryMask& m);

/// Mean pixel coordinates (row, col) of the set pixels, in pixel-index units.
struct Centroid {
  double y, x;
};
Centroid centroid(const BinaryMask& m);

/// |a∩b| / |a∪b|; 1 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Nearest-neighbor resampling at cell centers.
BinaryMask resize_nearest(const BinaryMask& m, std::size_t h2, std::size_t w2);

enum class NoiseKind { kNone, kPoint, kShift, kScale };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kPoint;
  double lambda_p = 0.2;
  double scale_min = 0.8;
  double scale_max = 1.2;

  /// Throws ConfigError when out of range.
  void validate() const;
};

/// Flips a uniformly drawn count in [0, ⌊λ_p·area⌋] of distinct pixels taken
/// from the bounding box dilated by 10% per side.
BinaryMask point_noise(const BinaryMask& m, double lambda_p, std::uint64_t seed);

/// Translates the mask while keeping its centroid strictly inside the
/// original bounding box. Throws std::invalid_argument for an empty mask.
BinaryMask shift_noise(const BinaryMask& m, std::uint64_t seed);

/// Rescales about the centroid by a ratio drawn from [ratio_min, ratio_max].
BinaryMask scale_noise(const BinaryMask& m, double ratio_min, double ratio_max,
                       std::uint64_t seed);

BinaryMask apply_noise(const BinaryMask& m, const NoiseSpec& spec, std::uint64_t seed);

/// Blocks every pixel outside `m`; an empty mask blocks nothing.
BoolGrid to_attention_block(const BinaryMask& m);

/// Row-major run lengths, alternating, starting with a (possibly zero) run of 0s.
std::vector<std::uint32_t> rle_encode(const BinaryMask& m);
BinaryMask rle_decode(const std::vector<std::uint32_t>& runs, std::size_t height,
                      std::size_t width);
std::string rle_to_string(const std::vector<std::uint32_t>& runs);
std::vector<std::uint32_t> rle_from_string(const std::string& s);

}  // namespace mpseg
