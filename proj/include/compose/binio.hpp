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

// Little-endian primitives for the binary file formats (EMB1, ENC1, VRF1).

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace compose {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view four);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void bytes(std::string_view data);

 private:
  void raw(const void* data, std::size_t n);
  std::ostream& out_;
};

// Every read that runs past the end of the stream throws TruncatedFile.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  // Throws BadMagic if the next four bytes differ from `four`.
  void expect_magic(std::string_view four);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string bytes(std::size_t n);
  bool at_end();

 private:
  void raw(void* data, std::size_t n);
  std::istream& in_;
};

// Open helpers throwing IoError.
std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

}  // namespace compose
