#include "pvg/core/pvgt.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pvg {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'V', 'G', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_pvgt(const Tensor<float>& tensor) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(8 + 4 * tensor.shape().size() + 4 * static_cast<std::size_t>(tensor.size()));
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (Index e : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (Index i = 0; i < tensor.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(tensor[i]));
  return out;
}

Tensor<float> decode_pvgt(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw BadMagicError(source + ": missing PVGT magic");
  if (bytes.size() < 8) throw TruncatedError(source + ": truncated before rank");
  const std::uint32_t rank = get_u32(bytes.data() + 4);
  if (rank == 0) throw FormatError(source + ": rank must be positive");
  std::size_t pos = 8;
  if (bytes.size() < pos + 4ULL * rank) throw TruncatedError(source + ": truncated in extents");
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i, pos += 4) {
    const std::uint32_t e = get_u32(bytes.data() + pos);
    if (e == 0) throw FormatError(source + ": zero extent");
    shape.push_back(static_cast<Index>(e));
    count *= e;
  }
  if (bytes.size() - pos < 4 * count) throw TruncatedError(source + ": truncated in values");
  if (bytes.size() - pos > 4 * count) throw FormatError(source + ": trailing bytes after values");
  Tensor<float> t(shape);
  for (std::uint64_t i = 0; i < count; ++i, pos += 4)
    t[static_cast<Index>(i)] = std::bit_cast<float>(get_u32(bytes.data() + pos));
  if (!t.all_finite()) throw FormatError(source + ": non-finite value stored");
  return t;
}

void write_pvgt(const std::filesystem::path& path, const Tensor<float>& tensor) {
  const auto bytes = encode_pvgt(tensor);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor<float> read_pvgt(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_pvgt(bytes, path.string());
}

}  // namespace pvg
