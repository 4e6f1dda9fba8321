#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "rnl/tensor.hpp"

namespace rnl {

// RNLT binary tensor file:
//   "RNLT" | u8 version (1) | u8 dtype (0 = f32, 1 = f64) | u8 rank | u8 pad (0)
//   | rank x u32 LE extents | raw LE values
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

AnyTensor read_tensor(std::istream& is);
AnyTensor load_any_tensor(const std::filesystem::path& path);

// Loads and converts to T.
template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  return std::visit([](const auto& t) { return t.template cast<T>(); }, load_any_tensor(path));
}

}  // namespace rnl
