#include "fedtier/codec.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "fedtier/error.hpp"

namespace fedtier {

namespace {

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }

 private:
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{in_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw CodecError(CodecErrc::kTruncated, std::string("payload truncated while reading ") + what +
                                                  " at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes encode_params(const ModelParams& params) {
  Bytes out;
  out.reserve(16 + params.parameter_count() * 8 + params.size() * 32);
  Writer w(out);
  w.put(kCodecVersion);
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CodecError(CodecErrc::kMalformed, "parameter name too long");
    }
    w.put(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    w.put(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.put(static_cast<std::uint32_t>(d));
    for (double v : tensor.values()) w.put_f64(v);
  }
  return out;
}

ModelParams decode_params(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto version = r.get<std::uint16_t>("format version");
  if (version != kCodecVersion) {
    throw CodecError(CodecErrc::kVersionMismatch, "unsupported format version " +
                                                      std::to_string(version) + ", expected " +
                                                      std::to_string(kCodecVersion));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name = r.get_string(name_len, "name");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get<std::uint32_t>("dimension");
      if (d == 0) throw CodecError(CodecErrc::kMalformed, "zero dimension in tensor " + name);
    }
    const std::size_t n = element_count(shape);
    if (n > r.remaining() / 8) {
      throw CodecError(CodecErrc::kTruncated, "payload truncated inside tensor " + name);
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.get_f64("value");
    entries.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (r.remaining() != 0) {
    throw CodecError(CodecErrc::kMalformed, std::to_string(r.remaining()) + " trailing bytes");
  }
  try {
    return ModelParams(std::move(entries));
  } catch (const ShapeError& e) {
    throw CodecError(CodecErrc::kMalformed, e.what());
  }
}

ModelParams decode_params(std::span<const std::uint8_t> bytes, const SimpleCnnArch& arch) {
  ModelParams params = decode_params(bytes);
  const auto layout = arch.layout();
  bool ok = params.size() == layout.size();
  for (std::size_t i = 0; ok && i < layout.size(); ++i) {
    ok = params[i].name == layout[i].first && params[i].tensor.shape() == layout[i].second;
  }
  if (!ok) throw CodecError(CodecErrc::kShapeMismatch, "decoded parameters do not match the architecture");
  return params;
}

std::size_t encoded_size(const SimpleCnnArch& arch) {
  std::size_t n = 2 + 4;
  for (const auto& [name, shape] : arch.layout()) {
    n += 2 + name.size() + 1 + 4 * shape.size() + 8 * element_count(shape);
  }
  return n;
}

void write_params_file(const std::filesystem::path& path, const ModelParams& params) {
  const Bytes bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

ModelParams read_params_file(const std::filesystem::path& path, const SimpleCnnArch& arch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const Bytes bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_params(bytes, arch);
}

}  // namespace fedtier
