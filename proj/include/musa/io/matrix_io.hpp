// musa/io/matrix_io.hpp

// Copyright 2026  The musa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MUSA_IO_MATRIX_IO_HPP_
#define MUSA_IO_MATRIX_IO_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "musa/io/files.hpp"

namespace musa::io {

/// rows, cols, then column-major values in the scalar's own width.
template <typename Derived>
void write_matrix(ByteWriter& w, const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  static_assert(std::is_same_v<S, float> || std::is_same_v<S, double>);
  const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> dense = m;
  w.u64(static_cast<std::uint64_t>(dense.rows()));
  w.u64(static_cast<std::uint64_t>(dense.cols()));
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if constexpr (std::is_same_v<S, float>) {
      w.f32(dense.data()[i]);
    } else {
      w.f64(dense.data()[i]);
    }
  }
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> read_matrix(ByteReader& r) {
  const auto rows = static_cast<Eigen::Index>(r.u64());
  const auto cols = static_cast<Eigen::Index>(r.u64());
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(S) > r.remaining())
    throw std::runtime_error("read_matrix: truncated data");
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if constexpr (std::is_same_v<S, float>) {
      m.data()[i] = r.f32();
    } else {
      m.data()[i] = r.f64();
    }
  }
  return m;
}

/// Framed container: magic, version, payload, crc32 of the payload.
std::vector<char> seal(std::string_view magic, std::uint32_t version, const std::vector<char>& payload);
/// Checks magic, version and checksum and returns the payload.
std::vector<char> unseal(std::string_view magic, std::uint32_t version, const std::vector<char>& bytes,
                         const std::string& what);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace musa::io

#endif  // MUSA_IO_MATRIX_IO_HPP_
