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

#include "afed/tensor.hpp"

#include <cmath>

namespace afed {

namespace {
void check(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}
}  // namespace

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  check(a.cols == b.rows, "matmul: inner dimensions differ");
  Tensor2 out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  check(a.cols == b.cols, "matmul_nt: inner dimensions differ");
  Tensor2 out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        acc += a(i, k) * b(j, k);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  check(a.rows == b.rows, "matmul_tn: outer dimensions differ");
  Tensor2 out(a.cols, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out(i, j) += ari * b(r, j);
      }
    }
  }
  return out;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  check(a.same_shape(b), "add: shape mismatch");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  check(a.same_shape(b), "sub: shape mismatch");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  check(a.same_shape(b), "hadamard: shape mismatch");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

void add_row_inplace(Tensor2& a, const Tensor2& row) {
  check(row.rows == 1 && row.cols == a.cols, "add_row: shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      a(i, j) += row(0, j);
    }
  }
}

Tensor2 colsum(const Tensor2& a) {
  Tensor2 out(1, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      out(0, j) += a(i, j);
    }
  }
  return out;
}

void scale_inplace(Tensor2& a, double s) {
  for (double& v : a.data) v *= s;
}

void axpy_inplace(Tensor2& y, double s, const Tensor2& x) {
  check(y.same_shape(x), "axpy: shape mismatch");
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s * x.data[i];
}

bool all_finite(const Tensor2& a) {
  for (double v : a.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor2& a, const std::string& what) {
  if (!all_finite(a)) {
    throw NumericError("non-finite values in " + what);
  }
}

}  // namespace afed
