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

#include "labtx/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "labtx/error.hpp"

namespace labtx {
namespace {

thread_local Tape* g_active_tape = nullptr;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (data.size() != shape_numel(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{1}, std::vector<Real>{value}); }

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), Real{0});
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_->is_leaf) throw ContractError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::clone() const {
  Tensor out(impl_->shape, impl_->data);
  return out;
}

Tensor make_tensor(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

std::size_t Tape::record(std::shared_ptr<detail::TensorImpl> output, BackwardFn fn) {
  const std::size_t id = nodes_.size();
  output->node_id = id;
  output->is_leaf = false;
  output->requires_grad = true;
  nodes_.push_back(Node{std::move(output), std::move(fn)});
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    throw NumericError("backward() on non-finite loss");
  }
  detail::TensorImpl* root = loss.impl();
  if (root->is_leaf) {
    if (root->requires_grad) root->grad_buffer()[0] += Real{1};
    return;
  }
  if (root->node_id >= nodes_.size() || nodes_[root->node_id].output.get() != root) {
    throw ContractError("loss was not recorded on this tape");
  }
  root->grad_buffer()[0] += Real{1};
  for (std::size_t i = root->node_id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output->grad.empty()) continue;
    node.backward();
  }
}

void Tape::clear() {
  for (Node& node : nodes_) node.output->node_id = kNoNode;
  nodes_.clear();
}

Tape* Tape::active() { return g_active_tape; }

Tape::Recording::Recording(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Recording::~Recording() { g_active_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

}  // namespace labtx
