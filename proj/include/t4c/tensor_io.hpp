#pragma once

#include <iosfwd>
#include <string>

#include "t4c/tensor.hpp"

namespace t4c {

// T4CT v1: bit-exact binary tensor container, little-endian throughout.
//
//   magic  'T4CT'
//   u8     version        = 1
//   u8     dtype code     0=u8, 1=f32, 2=f64
//   u8     ndim
//   u8     reserved       = 0
//   u32    dims[ndim]
//   raw row-major payload
void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

void write_tensor(const Tensor& t, std::ostream& os);
Tensor read_tensor(std::istream& is, const std::string& what);

}  // namespace t4c
