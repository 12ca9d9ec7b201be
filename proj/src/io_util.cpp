#include "pcc/io_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pcc {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f32(std::ostream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f32_span(std::ostream& os, std::span<const float> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

static void require_good(std::istream& is, const char* what) {
  if (!is.good()) throw std::runtime_error(std::string("unexpected end of stream reading ") + what);
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require_good(is, "u32");
  return v;
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require_good(is, "u64");
  return v;
}

float read_f32(std::istream& is) {
  float v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require_good(is, "f32");
  return v;
}

void read_f32_span(std::istream& is, std::span<float> out) {
  is.read(reinterpret_cast<char*>(out.data()),
          static_cast<std::streamsize>(out.size() * sizeof(float)));
  require_good(is, "f32 block");
}

std::string read_string(std::istream& is) {
  const uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require_good(is, "string");
  return s;
}

uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ull;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

uint64_t hash_file(const std::string& path) { return fnv1a64(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace pcc
