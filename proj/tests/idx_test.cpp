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


#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "mbem/error.hpp"
#include "mbem/idx.hpp"

using namespace mbem;

namespace {

using Bytes = std::vector<std::uint8_t>;

const Bytes kTwoImages = {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                          1,    2,    3,    4,    5, 6, 7, 8};

std::uint64_t offset_of(const Bytes& bytes, bool labels = false) {
  try {
    if (labels) {
      parse_idx_labels(bytes);
    } else {
      parse_idx_images(bytes);
    }
  } catch (const ParseError& e) {
    return e.offset();
  }
  FAIL("expected a parse error");
  return 0;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mbem_idx_test_" + name);
}

void write_plain(const std::filesystem::path& p, const Bytes& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                           static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("hand-built image file") {
  const auto set = parse_idx_images(kTwoImages);
  CHECK(set.count == 2);
  CHECK(set.rows == 2);
  CHECK(set.cols == 2);
  const DataMatrix m = set.to_matrix();
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 4);
  for (Index i = 0; i < 2; ++i)
    for (Index k = 0; k < 4; ++k) CHECK(m(i, k) == static_cast<double>(1 + 4 * i + k));
  CHECK(set.pixel(1, 2) == 7);
}

TEST_CASE("parse errors carry byte offsets") {
  Bytes truncated = kTwoImages;
  truncated.pop_back();
  CHECK(offset_of(truncated) == truncated.size());

  Bytes magic = kTwoImages;
  magic[1] = 0x01;
  CHECK(offset_of(magic) == 0);

  Bytes type = kTwoImages;
  type[2] = 0x0D;
  CHECK(offset_of(type) == 2);

  CHECK(offset_of(kTwoImages, true) == 3);

  Bytes trailing = kTwoImages;
  trailing.push_back(9);
  CHECK(offset_of(trailing) == kTwoImages.size());

  Bytes header_only(kTwoImages.begin(), kTwoImages.begin() + 10);
  CHECK(offset_of(header_only) == 10);

  Bytes huge = {0, 0, 8, 3, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
  CHECK(offset_of(huge) == 12);

  CHECK(offset_of(Bytes{0, 0}) == 2);
}

TEST_CASE("labels") {
  const Bytes labels = {0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 9};
  CHECK(parse_idx_labels(labels) == Bytes{7, 0, 9});
  Bytes cut = labels;
  cut.pop_back();
  CHECK(offset_of(cut, true) == cut.size());
  CHECK(encode_idx_labels(Bytes{7, 0, 9}) == labels);
}

TEST_CASE("encode and parse round trip") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> byte(0, 255);
  IdxImageSet set;
  set.count = 5;
  set.rows = 3;
  set.cols = 4;
  for (int k = 0; k < 60; ++k) set.pixels.push_back(static_cast<std::uint8_t>(byte(rng)));
  const Bytes encoded = encode_idx_images(set);
  CHECK(parse_idx_images(encoded) == set);
  CHECK(encode_idx_images(parse_idx_images(kTwoImages)) == kTwoImages);
}

TEST_CASE("files, gzip and concatenation") {
  const auto images = temp_path("images.idx");
  const auto labels = temp_path("labels.idx.gz");
  write_plain(images, kTwoImages);
  const Bytes label_bytes = encode_idx_labels(Bytes{3, 4});
  gzFile gz = gzopen(labels.string().c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, label_bytes.data(), static_cast<unsigned>(label_bytes.size()));
  gzclose(gz);

  const auto set = read_idx(images.string(), labels.string());
  REQUIRE(set.labels.has_value());
  CHECK(*set.labels == Bytes{3, 4});
  CHECK(read_file_bytes(labels.string()) == label_bytes);

  const auto both = concat(set, set);
  CHECK(both.count == 4);
  CHECK(both.labels->size() == 4);
  CHECK(both.to_matrix().row(2) == set.to_matrix().row(0));

  const auto bad_labels = temp_path("bad_labels.idx");
  write_plain(bad_labels, encode_idx_labels(Bytes{1, 2, 3}));
  CHECK_THROWS_AS(read_idx(images.string(), bad_labels.string()), Error);
  CHECK_THROWS_AS(read_file_bytes(temp_path("missing").string()), Error);

  std::filesystem::remove(images);
  std::filesystem::remove(labels);
  std::filesystem::remove(bad_labels);
}
