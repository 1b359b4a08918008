// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Internal helpers shared by the op implementations.

#ifndef LABTX_SRC_NUMERICS_OP_UTIL_HPP_
#define LABTX_SRC_NUMERICS_OP_UTIL_HPP_

#include <initializer_list>
#include <string>
#include <utility>

#include "labtx/error.hpp"
#include "labtx/numerics/tensor.hpp"

namespace labtx::detail {

using ImplPtr = std::shared_ptr<TensorImpl>;

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename Fn>
void record(const Tensor& out, Fn&& fn) {
  Tape::active()->record(out.handle(), std::forward<Fn>(fn));
}

// Gradient sink for an input: nullptr when the input does not want one.
inline Real* grad_sink(const ImplPtr& p) {
  return (p && p->requires_grad) ? p->grad_buffer() : nullptr;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

}  // namespace labtx::detail

#endif  // LABTX_SRC_NUMERICS_OP_UTIL_HPP_
