#include "cad/ad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cad::ad {
namespace {

constexpr std::string_view kMagic{"CADCKPT\0", 8};
// Caps allocation driven by untrusted length fields.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename U>
void put_le(std::string& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) fail(ErrorCode::MalformedFile, "checkpoint truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename U>
  U get_le() {
    const auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic);
  put_le<std::uint32_t>(out, Checkpoint::kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.header.size()));
  out += ckpt.header;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < t.size(); ++i) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(t[i]));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) fail(ErrorCode::MalformedFile, "bad checkpoint magic");
  const auto version = r.get_le<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    fail(ErrorCode::MalformedFile, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.header = std::string(r.take(r.get_le<std::uint32_t>()));
  const auto count = r.get_le<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(r.take(r.get_le<std::uint32_t>()));
    const auto rank = r.get_le<std::uint32_t>();
    if (rank > 8) fail(ErrorCode::MalformedFile, "tensor rank too large");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.get_le<std::uint64_t>();
      if (dim == 0 || dim > kMaxElements) fail(ErrorCode::MalformedFile, "bad tensor dimension");
      n *= dim;
      if (n > kMaxElements) fail(ErrorCode::MalformedFile, "tensor too large");
      shape.push_back(static_cast<Index>(dim));
    }
    if (n * 4 > bytes.size()) fail(ErrorCode::MalformedFile, "checkpoint truncated");
    Tensor<float> t(shape);
    for (std::uint64_t i = 0; i < n; ++i) t[static_cast<Index>(i)] = std::bit_cast<float>(r.get_le<std::uint32_t>());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) fail(ErrorCode::MalformedFile, "trailing bytes after checkpoint");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace cad::ad
