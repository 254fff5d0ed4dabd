#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rocgan/tensor.hpp"

namespace rocgan {

// TNSR container:
//   "TNSR" | version u8 = 1 | dtype u8 (1 = f32, 2 = f64) | ndim u8 | reserved u8 = 0
//   | ndim x u32 dims (LE) | row-major LE payload
// ndim = 0 denotes a scalar with a one-element payload.
enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

inline constexpr std::uint8_t kTnsrVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype = DType::f64);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::string& path, const Tensor& t, DType dtype = DType::f64);
Tensor read_tensor(const std::string& path);

}  // namespace rocgan
