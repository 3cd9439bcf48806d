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

#ifndef MBEM_LINALG_HPP_
#define MBEM_LINALG_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <utility>

namespace mbem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Observations are stored one per row so that a row is contiguous.
using DataMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Packed upper triangle of a symmetric d x d matrix, row by row:
// (0,0) (0,1) ... (0,d-1) (1,1) ... (d-1,d-1).
inline Index packed_size(Index d) { return d * (d + 1) / 2; }

inline Index packed_index(Index i, Index j, Index d) {
  if (i > j) std::swap(i, j);
  return i * d - i * (i - 1) / 2 + (j - i);
}

inline Vector pack_symmetric(const Matrix& m) {
  const Index d = m.rows();
  Vector out(packed_size(d));
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) out[k++] = m(i, j);
  return out;
}

inline Matrix unpack_symmetric(const Vector& packed, Index d) {
  Matrix m(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      m(i, j) = packed[k];
      m(j, i) = packed[k];
      ++k;
    }
  return m;
}

// packed += w * y y^T
template <typename Derived>
inline void add_outer_packed(Vector& packed, const Eigen::MatrixBase<Derived>& y,
                             double w) {
  const Index d = y.size();
  Index k = 0;
  for (Index i = 0; i < d; ++i) {
    const double wyi = w * y[i];
    for (Index j = i; j < d; ++j) packed[k++] += wyi * y[j];
  }
}

}  // namespace mbem

#endif  // MBEM_LINALG_HPP_
