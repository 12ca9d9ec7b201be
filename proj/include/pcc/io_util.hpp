#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pcc {

// Binary files in this project are little-endian throughout.

void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f32_span(std::ostream& os, std::span<const float> v);
void write_string(std::ostream& os, const std::string& s);  // u32 length + bytes

uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
float read_f32(std::istream& is);
void read_f32_span(std::istream& is, std::span<float> out);
std::string read_string(std::istream& is);

uint64_t fnv1a64(std::span<const unsigned char> bytes);
uint64_t fnv1a64(const std::string& s);
uint64_t hash_file(const std::string& path);  // FNV-1a over the raw bytes

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace pcc
