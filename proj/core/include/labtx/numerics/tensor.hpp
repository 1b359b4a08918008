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

#ifndef LABTX_NUMERICS_TENSOR_HPP_
#define LABTX_NUMERICS_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace labtx {

#ifdef LABTX_FLOAT32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool is_leaf = true;
  std::size_t node_id = kNoNode;

  Real* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), Real{0});
    return grad.data();
  }
};

}  // namespace detail

// Dense row-major n-dimensional array with optional gradient storage.
//
// Tensor is a handle: copies alias the same storage, like a shared pointer.
// Use clone() for an independent copy. Leaves created with
// set_requires_grad(true) accumulate gradients when a Tape sweeps backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor scalar(Real value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const Real> data() const { return impl_->data; }
  std::span<Real> mutable_data() { return impl_->data; }
  Real item() const;

  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient view; empty span when nothing has been accumulated yet.
  std::span<const Real> grad() const { return impl_->grad; }
  std::span<Real> mutable_grad() { return {impl_->grad_buffer(), numel()}; }
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->is_leaf; }
  std::size_t node_id() const { return impl_->node_id; }

  Tensor clone() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& handle() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tensor(std::shared_ptr<detail::TensorImpl>);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(std::shared_ptr<detail::TensorImpl> impl);

// Records differentiable operations in execution order and replays them in
// reverse. Operations record onto the tape active on the calling thread (see
// Tape::Recording) whenever at least one input requires a gradient; with no
// active tape they run as plain computations.
//
// A tape has a single writer. Run independent batches on separate tapes.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(const Tensor& loss);
  // Drops every recorded node and the intermediate buffers they keep alive.
  void clear();

  std::size_t record(std::shared_ptr<detail::TensorImpl> output, BackwardFn fn);

  static Tape* active();

  // RAII guard that makes a tape active for the current thread.
  class Recording {
   public:
    explicit Recording(Tape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Suspends recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

}  // namespace labtx

#endif  // LABTX_NUMERICS_TENSOR_HPP_
