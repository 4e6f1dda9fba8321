#include "rnl/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace rnl {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'N', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "RNLT I/O assumes a little-endian host");

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::f32 : DType::f64;
}

void read_exact(std::istream& is, void* dst, std::size_t n, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw IoError(std::string("truncated RNLT stream while reading ") + what);
  }
}

template <typename T>
Tensor<T> read_payload(std::istream& is, Shape shape) {
  std::vector<T> data(element_count(shape));
  read_exact(is, data.data(), data.size() * sizeof(T), "values");
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  const std::array<std::uint8_t, 4> header{kVersion, static_cast<std::uint8_t>(dtype_of<T>()),
                                           static_cast<std::uint8_t>(t.rank()), 0};
  if (t.rank() > 255) throw IoError("RNLT supports rank <= 255");
  os.write(kMagic.data(), kMagic.size());
  os.write(reinterpret_cast<const char*>(header.data()), header.size());
  for (std::size_t e : t.shape()) {
    if (e > UINT32_MAX) throw IoError("RNLT extents must fit in u32");
    const auto e32 = static_cast<std::uint32_t>(e);
    os.write(reinterpret_cast<const char*>(&e32), sizeof e32);
  }
  os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  if (!os) throw IoError("failed writing RNLT stream");
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

AnyTensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  read_exact(is, magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw IoError("bad RNLT magic");
  std::array<std::uint8_t, 4> header{};
  read_exact(is, header.data(), header.size(), "header");
  if (header[0] != kVersion) throw IoError("unsupported RNLT version " + std::to_string(header[0]));
  if (header[2] == 0) throw IoError("RNLT rank must be >= 1");
  Shape shape(header[2]);
  for (auto& e : shape) {
    std::uint32_t e32 = 0;
    read_exact(is, &e32, sizeof e32, "extents");
    if (e32 == 0) throw IoError("RNLT extents must be >= 1");
    e = e32;
  }
  AnyTensor result;
  switch (header[1]) {
    case static_cast<std::uint8_t>(DType::f32):
      result = read_payload<float>(is, std::move(shape));
      break;
    case static_cast<std::uint8_t>(DType::f64):
      result = read_payload<double>(is, std::move(shape));
      break;
    default:
      throw IoError("unknown RNLT dtype " + std::to_string(header[1]));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after RNLT payload");
  return result;
}

AnyTensor load_any_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read_tensor(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);

}  // namespace rnl
