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

#include "mbem/idx.hpp"

#include <zlib.h>

#include <limits>

#include "mbem/error.hpp"

namespace mbem {
namespace {

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 0;
};

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

IdxHeader parse_header(std::span<const std::uint8_t> bytes,
                       std::uint32_t expected_magic) {
  if (bytes.size() < 4) throw ParseError(bytes.size(), "truncated IDX magic");
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError(0, "bad IDX magic");
  if (bytes[2] != 0x08) throw ParseError(2, "unsupported IDX element type");
  IdxHeader h;
  h.magic = read_be32(bytes, 0);
  if (h.magic != expected_magic) throw ParseError(3, "unexpected IDX dimension count");
  const std::size_t ndim = bytes[3];
  const std::size_t header_size = 4 + 4 * ndim;
  if (bytes.size() < header_size) {
    throw ParseError(bytes.size(), "truncated IDX header");
  }
  std::size_t payload = 1;
  for (std::size_t k = 0; k < ndim; ++k) {
    const std::uint32_t dim = read_be32(bytes, 4 + 4 * k);
    if (dim != 0 && payload > std::numeric_limits<std::size_t>::max() / dim) {
      throw ParseError(4 + 4 * k, "IDX dimension product overflows");
    }
    payload *= dim;
    h.dims.push_back(dim);
  }
  h.payload_offset = header_size;
  h.payload_size = payload;
  const std::size_t available = bytes.size() - header_size;
  if (available < payload) {
    throw ParseError(bytes.size(), "truncated IDX payload: expected " +
                                       std::to_string(header_size + payload) +
                                       " bytes");
  }
  if (available > payload) {
    throw ParseError(header_size + payload, "trailing bytes after IDX payload");
  }
  return h;
}

}  // namespace

DataMatrix IdxImageSet::to_matrix() const {
  const std::size_t p = pixels_per_image();
  DataMatrix m(static_cast<Index>(count), static_cast<Index>(p));
  for (std::size_t i = 0; i < pixels.size(); ++i) m.data()[i] = pixels[i];
  return m;
}

IdxImageSet parse_idx_images(std::span<const std::uint8_t> bytes) {
  const IdxHeader h = parse_header(bytes, kIdxImagesMagic);
  IdxImageSet set;
  set.count = h.dims[0];
  set.rows = h.dims[1];
  set.cols = h.dims[2];
  set.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset),
                    bytes.end());
  return set;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const IdxHeader h = parse_header(bytes, kIdxLabelsMagic);
  return {bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end()};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImageSet& set) {
  if (set.pixels.size() != static_cast<std::size_t>(set.count) * set.pixels_per_image()) {
    throw Error(ErrorCode::kInvalidInput, "pixel buffer does not match header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + set.pixels.size());
  write_be32(out, kIdxImagesMagic);
  write_be32(out, set.count);
  write_be32(out, set.rows);
  write_be32(out, set.cols);
  out.insert(out.end(), set.pixels.begin(), set.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof(buf));
    if (got < 0) {
      gzclose(f);
      throw Error(ErrorCode::kIo, "read failed for " + path);
    }
    if (got == 0) break;
    out.insert(out.end(), buf, buf + got);
  }
  gzclose(f);
  return out;
}

IdxImageSet read_idx(const std::string& images_path, const std::string& labels_path) {
  IdxImageSet set = parse_idx_images(read_file_bytes(images_path));
  if (!labels_path.empty()) {
    auto labels = parse_idx_labels(read_file_bytes(labels_path));
    if (labels.size() != set.count) {
      throw Error(ErrorCode::kInvalidInput, "label count does not match image count");
    }
    set.labels = std::move(labels);
  }
  return set;
}

IdxImageSet concat(const IdxImageSet& a, const IdxImageSet& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error(ErrorCode::kInvalidInput, "image geometry differs");
  }
  if (a.labels.has_value() != b.labels.has_value()) {
    throw Error(ErrorCode::kInvalidInput, "only one image set carries labels");
  }
  IdxImageSet out = a;
  out.count = a.count + b.count;
  out.pixels.insert(out.pixels.end(), b.pixels.begin(), b.pixels.end());
  if (out.labels) out.labels->insert(out.labels->end(), b.labels->begin(), b.labels->end());
  return out;
}

}  // namespace mbem
