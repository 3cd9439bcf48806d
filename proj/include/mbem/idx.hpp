// Copyright 2026 The mbem Authors.
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

// IDX container (MNIST): two zero bytes, a type byte (0x08 = unsigned byte),
// a dimension count, then one big-endian uint32 per dimension and the
// row-major payload. Images use magic 0x00000803, labels 0x00000801.

#ifndef MBEM_IDX_HPP_
#define MBEM_IDX_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbem/linalg.hpp"

namespace mbem {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImageSet {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count x (rows * cols), row-major
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t pixels_per_image() const {
    return static_cast<std::size_t>(rows) * cols;
  }
  std::uint8_t pixel(std::size_t image, std::size_t k) const {
    return pixels[image * pixels_per_image() + k];
  }
  DataMatrix to_matrix() const;
  bool operator==(const IdxImageSet&) const = default;
};

// Parses an image file (3 dims). Throws ParseError with the byte offset of
// the first offending byte.
IdxImageSet parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_idx_images(const IdxImageSet& set);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

// Whole-file read; gzip-compressed input is inflated transparently.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

// Images plus optional labels; label count must match image count.
IdxImageSet read_idx(const std::string& images_path,
                     const std::string& labels_path = {});

// Concatenates image sets of equal geometry (e.g. train + test).
IdxImageSet concat(const IdxImageSet& a, const IdxImageSet& b);

}  // namespace mbem

#endif  // MBEM_IDX_HPP_
