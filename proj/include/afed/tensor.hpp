// Copyright 2026 The AFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace afed {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Rows index batch elements throughout
// the codebase.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor2& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

// a (n,k) x b (k,m) -> (n,m)
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// a (n,k) x b' (m,k) -> (n,m); i.e. a * b^T without materializing b^T.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
// a' (n,k) x b (n,m) -> (k,m); i.e. a^T * b.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);

Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
void add_row_inplace(Tensor2& a, const Tensor2& row);  // row: (1, cols)
Tensor2 colsum(const Tensor2& a);                      // -> (1, cols)
void scale_inplace(Tensor2& a, double s);
void axpy_inplace(Tensor2& y, double s, const Tensor2& x);  // y += s*x

bool all_finite(const Tensor2& a);
// Throws NumericError mentioning `what` when a NaN/Inf is present.
void require_finite(const Tensor2& a, const std::string& what);

}  // namespace afed
