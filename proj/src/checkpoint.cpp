#include <bit>
#include <fstream>
#include <sstream>

#include "mpseg/decoder.hpp"
#include "mpseg/error.hpp"

namespace mpseg {

// Layout (all integers little-endian):
//   "MPSEGCKP" | u32 version | u32 N, L, d, K, ffn | f64 pos_scale | u32 count
//   count × ( u32 name_len | name | u32 ndim | u64 dims[ndim] | f64 values[] )

namespace {

constexpr char kMagic[8] = {'M', 'P', 'S', 'E', 'G', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}
  std::uint64_t uint(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
      throw IoError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated file");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const DecoderParams& params) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  const auto& d = params.dims;
  put_u32(out, static_cast<std::uint32_t>(d.num_queries));
  put_u32(out, static_cast<std::uint32_t>(d.num_layers));
  put_u32(out, static_cast<std::uint32_t>(d.dim));
  put_u32(out, static_cast<std::uint32_t>(d.num_categories));
  put_u32(out, static_cast<std::uint32_t>(d.ffn_dim));
  put_f64(out, d.pos_scale);
  const auto named = params.named();
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t->ndim()));
    for (auto e : t->shape()) put_u64(out, e);
    for (double v : t->values()) put_f64(out, v);
  }
  return out;
}

DecoderParams parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0)
    throw IoError("checkpoint: bad magic");
  r.str(sizeof kMagic);
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CompatibilityError("checkpoint: unsupported version " + std::to_string(version));
  DecoderDims dims;
  dims.num_queries = r.u32();
  dims.num_layers = r.u32();
  dims.dim = r.u32();
  dims.num_categories = r.u32();
  dims.ffn_dim = r.u32();
  dims.pos_scale = r.f64();
  DecoderParams p = DecoderParams::init(dims, 0);
  auto named = p.named();
  const auto count = r.u32();
  if (count != named.size())
    throw CompatibilityError("checkpoint: expected " + std::to_string(named.size()) +
                             " parameter arrays, found " + std::to_string(count));
  for (auto& [name, tensor] : named) {
    const auto stored = r.str(r.u32());
    if (stored != name)
      throw CompatibilityError("checkpoint: expected parameter '" + name + "', found '" + stored + "'");
    Shape shape(r.u32());
    for (auto& e : shape) e = r.u64();
    if (shape != tensor->shape())
      throw CompatibilityError("checkpoint: parameter '" + name + "' has shape " +
                               shape_string(shape) + ", expected " + shape_string(tensor->shape()));
    auto vals = tensor->mutable_values();
    for (auto& v : vals) v = r.f64();
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const auto bytes = serialize_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

DecoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mpseg
