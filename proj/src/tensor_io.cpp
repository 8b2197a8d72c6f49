#include "t4c/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace t4c {

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace {

void put_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

uint8_t get_u8(std::istream& is, const std::string& what) {
  int c = is.get();
  check(c != EOF, what + ": truncated file");
  return static_cast<uint8_t>(c);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(is.gcount() == 4, what + ": truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(const Tensor& t, std::ostream& os) {
  check(t.defined(), "cannot write an undefined tensor");
  os.write("T4CT", 4);
  put_u8(os, 1);
  put_u8(os, static_cast<uint8_t>(t.dtype()));
  check(t.shape().rank() <= 255, "tensor rank exceeds format limit");
  put_u8(os, static_cast<uint8_t>(t.shape().rank()));
  put_u8(os, 0);
  for (int d : t.shape().dims) put_u32(os, static_cast<uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.byte_size()));
}

void write_tensor(const Tensor& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), "cannot open for writing: " + path);
  write_tensor(t, os);
  os.flush();
  check(os.good(), "write failed: " + path);
}

Tensor read_tensor(std::istream& is, const std::string& what) {
  char magic[4];
  is.read(magic, 4);
  check(is.gcount() == 4 && std::memcmp(magic, "T4CT", 4) == 0, what + ": bad magic, not a T4CT file");
  uint8_t version = get_u8(is, what);
  check(version == 1, what + ": unsupported T4CT version " + std::to_string(version));
  uint8_t dcode = get_u8(is, what);
  check(dcode <= 2, what + ": unknown dtype code " + std::to_string(dcode));
  uint8_t ndim = get_u8(is, what);
  check(ndim >= 1, what + ": tensor rank must be >= 1");
  uint8_t reserved = get_u8(is, what);
  check(reserved == 0, what + ": nonzero reserved byte");
  Shape shape;
  for (int i = 0; i < ndim; ++i) {
    uint32_t d = get_u32(is, what);
    check(d >= 1 && d <= 0x7fffffffu, what + ": invalid extent");
    shape.dims.push_back(static_cast<int>(d));
  }
  Tensor t(std::move(shape), static_cast<DType>(dcode));
  is.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.byte_size()));
  check(static_cast<size_t>(is.gcount()) == t.byte_size(),
        what + ": payload shorter than dims declare");
  return t;
}

Tensor read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open: " + path);
  Tensor t = read_tensor(is, path);
  is.peek();
  check(is.eof(), path + ": trailing bytes after payload");
  return t;
}

}  // namespace t4c
