#include "mpseg/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mpseg/error.hpp"
#include "mpseg/rng.hpp"

namespace mpseg {

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BBox bounding_box(const BinaryMask& m) {
  BBox b{m.height(), m.width(), 0, 0};
  bool any = false;
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x)
      if (m.at(y, x)) {
        any = true;
        b.y0 = std::min(b.y0, y);
        b.x0 = std::min(b.x0, x);
        b.y1 = std::max(b.y1, y);
        b.x1 = std::max(b.x1, x);
      }
  if (!any) throw std::invalid_argument("bounding_box of an empty mask");
  return b;
}

Centroid centroid(const BinaryMask& m) {
  double sy = 0.0, sx = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x)
      if (m.at(y, x)) {
        sy += static_cast<double>(y);
        sx += static_cast<double>(x);
        ++n;
      }
  if (n == 0) throw std::invalid_argument("centroid of an empty mask");
  return {sy / static_cast<double>(n), sx / static_cast<double>(n)};
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("iou: extents differ (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  std::size_t inter = 0, uni = 0;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask resize_nearest(const BinaryMask& m, std::size_t h2, std::size_t w2) {
  if (h2 == 0 || w2 == 0) throw std::invalid_argument("resize_nearest: zero extent");
  if (h2 == m.height() && w2 == m.width()) return m;
  BinaryMask out(h2, w2);
  const std::size_t h = m.height(), w = m.width();
  for (std::size_t y = 0; y < h2; ++y) {
    // Source index of the output cell center: floor((y + 1/2) · h / h2).
    const std::size_t sy = ((2 * y + 1) * h) / (2 * h2);
    for (std::size_t x = 0; x < w2; ++x) {
      const std::size_t sx = ((2 * x + 1) * w) / (2 * w2);
      out.set(y, x, m.at(sy, sx));
    }
  }
  return out;
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kPoint: return "point";
    case NoiseKind::kShift: return "shift";
    case NoiseKind::kScale: return "scale";
  }
  return "none";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseKind::kNone;
  if (s == "point") return NoiseKind::kPoint;
  if (s == "shift") return NoiseKind::kShift;
  if (s == "scale") return NoiseKind::kScale;
  throw ConfigError("unknown noise kind '" + s + "'");
}

void NoiseSpec::validate() const {
  if (!(lambda_p >= 0.0 && lambda_p <= 1.0))
    throw ConfigError("noise lambda_p must lie in [0,1]");
  if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 2.0))
    throw ConfigError("noise scale range must satisfy 0 < min <= max <= 2");
}

BinaryMask point_noise(const BinaryMask& m, double lambda_p, std::uint64_t seed) {
  if (!(lambda_p >= 0.0 && lambda_p <= 1.0))
    throw ConfigError("point_noise: lambda_p must lie in [0,1]");
  const std::size_t area = m.area();
  if (area == 0) return m;
  const auto max_flips = static_cast<std::size_t>(std::floor(lambda_p * static_cast<double>(area)));
  if (max_flips == 0) return m;

  Rng rng(seed);
  const auto count = static_cast<std::size_t>(rng.below(max_flips + 1));
  if (count == 0) return m;

  const BBox b = bounding_box(m);
  const auto pad_y = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(b.height())));
  const auto pad_x = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(b.width())));
  const std::size_t y0 = b.y0 >= pad_y ? b.y0 - pad_y : 0;
  const std::size_t x0 = b.x0 >= pad_x ? b.x0 - pad_x : 0;
  const std::size_t y1 = std::min(m.height() - 1, b.y1 + pad_y);
  const std::size_t x1 = std::min(m.width() - 1, b.x1 + pad_x);

  std::vector<std::size_t> region;
  region.reserve((y1 - y0 + 1) * (x1 - x0 + 1));
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) region.push_back(y * m.width() + x);

  // Partial Fisher-Yates: the first `count` slots become a uniform sample
  // without replacement.
  BinaryMask out = m;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(region.size() - i));
    std::swap(region[i], region[j]);
    out.flip(region[i]);
  }
  return out;
}

namespace {

BinaryMask translate(const BinaryMask& m, std::int64_t dy, std::int64_t dx) {
  if (dy == 0 && dx == 0) return m;
  BinaryMask out(m.height(), m.width());
  const auto h = static_cast<std::int64_t>(m.height());
  const auto w = static_cast<std::int64_t>(m.width());
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      if (!m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) continue;
      const auto ty = y + dy, tx = x + dx;
      if (ty >= 0 && ty < h && tx >= 0 && tx < w)
        out.set(static_cast<std::size_t>(ty), static_cast<std::size_t>(tx), true);
    }
  return out;
}

// Integer offsets d with lo < c + 1/2 + d < hi + 1, where c is the centroid
// coordinate and [lo, hi] the bbox extent along one axis.
std::pair<std::int64_t, std::int64_t> legal_offsets(double c, std::size_t lo, std::size_t hi) {
  const double center = c + 0.5;
  auto dmin = static_cast<std::int64_t>(std::floor(static_cast<double>(lo) - center)) + 1;
  auto dmax = static_cast<std::int64_t>(std::ceil(static_cast<double>(hi + 1) - center)) - 1;
  return {dmin, dmax};
}

}  // namespace

BinaryMask shift_noise(const BinaryMask& m, std::uint64_t seed) {
  if (m.empty()) throw std::invalid_argument("shift_noise: empty mask");
  const BBox b = bounding_box(m);
  const Centroid c = centroid(m);
  const auto [ymin, ymax] = legal_offsets(c.y, b.y0, b.y1);
  const auto [xmin, xmax] = legal_offsets(c.x, b.x0, b.x1);
  Rng rng(seed);
  const auto dy = rng.uniform_int(ymin, ymax);
  const auto dx = rng.uniform_int(xmin, xmax);
  return translate(m, dy, dx);
}

BinaryMask scale_noise(const BinaryMask& m, double ratio_min, double ratio_max,
                       std::uint64_t seed) {
  if (m.empty()) throw std::invalid_argument("scale_noise: empty mask");
  if (!(ratio_min > 0.0 && ratio_min <= ratio_max))
    throw ConfigError("scale_noise: invalid ratio range");
  Rng rng(seed);
  const double r = ratio_min == ratio_max ? ratio_min : rng.uniform(ratio_min, ratio_max);
  if (r == 1.0) return m;
  const Centroid c = centroid(m);
  const double cy = c.y + 0.5, cx = c.x + 0.5;
  BinaryMask out(m.height(), m.width());
  const auto h = static_cast<double>(m.height());
  const auto w = static_cast<double>(m.width());
  for (std::size_t y = 0; y < m.height(); ++y) {
    const double sy = cy + (static_cast<double>(y) + 0.5 - cy) / r;
    if (sy < 0.0 || sy >= h) continue;
    for (std::size_t x = 0; x < m.width(); ++x) {
      const double sx = cx + (static_cast<double>(x) + 0.5 - cx) / r;
      if (sx < 0.0 || sx >= w) continue;
      if (m.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx))) out.set(y, x, true);
    }
  }
  return out;
}

BinaryMask apply_noise(const BinaryMask& m, const NoiseSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case NoiseKind::kNone: return m;
    case NoiseKind::kPoint: return point_noise(m, spec.lambda_p, seed);
    case NoiseKind::kShift: return shift_noise(m, seed);
    case NoiseKind::kScale: return scale_noise(m, spec.scale_min, spec.scale_max, seed);
  }
  return m;
}

BoolGrid to_attention_block(const BinaryMask& m) {
  BoolGrid g(m.height(), m.width(), false);
  if (m.empty()) return g;
  for (std::size_t i = 0; i < m.pixels(); ++i) g.bits[i] = m[i] ? 0 : 1;
  return g;
}

std::vector<std::uint32_t> rle_encode(const BinaryMask& m) {
  std::vector<std::uint32_t> runs;
  std::uint8_t cur = 0;
  std::uint32_t len = 0;
  for (auto b : m.bits()) {
    if (b != cur) {
      runs.push_back(len);
      len = 0;
      cur = b;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

BinaryMask rle_decode(const std::vector<std::uint32_t>& runs, std::size_t height,
                      std::size_t width) {
  const auto total = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
  if (total != height * width)
    throw std::invalid_argument("rle_decode: runs cover " + std::to_string(total) +
                                " pixels, expected " + std::to_string(height * width));
  BinaryMask m(height, width);
  std::size_t pos = 0;
  bool v = false;
  for (auto r : runs) {
    if (v)
      for (std::size_t i = 0; i < r; ++i) m.flip(pos + i);
    pos += r;
    v = !v;
  }
  return m;
}

std::string rle_to_string(const std::vector<std::uint32_t>& runs) {
  std::string s;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(runs[i]);
  }
  return s;
}

std::vector<std::uint32_t> rle_from_string(const std::string& s) {
  std::vector<std::uint32_t> runs;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("malformed RLE token '" + tok + "'");
    runs.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
  }
  if (runs.empty()) throw std::invalid_argument("empty RLE");
  return runs;
}

}  // namespace mpseg
