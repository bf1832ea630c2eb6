// Copyright 2026 The Compose-Verify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "compose/binio.hpp"

#include <cstring>
#include <fstream>

#include "compose/error.hpp"

namespace compose {

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error(ErrorCode::kIoError, "write failed");
}

void BinaryWriter::magic(std::string_view four) { raw(four.data(), 4); }
void BinaryWriter::u8(std::uint8_t v) { raw(&v, 1); }
void BinaryWriter::u16(std::uint16_t v) { raw(&v, 2); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, 4); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, 8); }
void BinaryWriter::f32(float v) { raw(&v, 4); }
void BinaryWriter::bytes(std::string_view data) { raw(data.data(), data.size()); }

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw Error(ErrorCode::kTruncatedFile, "unexpected end of file");
  }
}

void BinaryReader::expect_magic(std::string_view four) {
  char buf[4];
  raw(buf, 4);
  if (std::memcmp(buf, four.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic,
                "expected magic '" + std::string(four) + "'");
  }
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  raw(&v, 1);
  return v;
}
std::uint16_t BinaryReader::u16() {
  std::uint16_t v;
  raw(&v, 2);
  return v;
}
std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, 4);
  return v;
}
std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, 8);
  return v;
}
float BinaryReader::f32() {
  float v;
  raw(&v, 4);
  return v;
}
std::string BinaryReader::bytes(std::size_t n) {
  std::string s(n, '\0');
  if (n > 0) raw(s.data(), n);
  return s;
}

bool BinaryReader::at_end() {
  return in_.peek() == std::char_traits<char>::eof();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open for reading: " + path.string());
  return in;
}

}  // namespace compose
